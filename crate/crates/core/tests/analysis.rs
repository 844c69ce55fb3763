use heston_amer::analysis::*;
use heston_amer::boundary::default_tol;
use heston_amer::mc::McConfig;
use heston_amer::*;

fn small_mc(seed: u64) -> McConfig {
    McConfig {
        paths: 8_000,
        dates: 20,
        substeps: 2,
        seed,
    }
}

fn coarse() -> GridSpec {
    GridSpec::desk().coarsened().unwrap()
}

fn solve_pair(
    params: &HestonParams,
    spec: &PutSpec,
    grid: &GridSpec,
) -> (PriceSurface, PriceSurface, ExerciseBoundary) {
    let lattice = grid.build(params, spec, 100.0, 0.04).unwrap();
    let opts = SolverOptions::default();
    let a = solve_american(
        params,
        spec,
        &lattice,
        &PenaltyFamily::for_put(params, spec),
        &opts,
    )
    .unwrap();
    let e = solve_european(params, spec, &lattice, &opts).unwrap();
    let b = extract_boundary(&a, default_tol(&a)).unwrap();
    (a, e, b)
}

#[test]
fn premium_vanishes_without_rates_or_dividends() {
    let mut p = HestonParams::desk();
    p.r = 0.0;
    p.delta = 0.0;
    let spec = PutSpec::new(100.0, 1.0).unwrap();
    let (a, e, b) = solve_pair(&p, &spec, &coarse());
    let est = eep_premium(&p, &spec, 100.0, 0.04, &b, &a, &e, &small_mc(1)).unwrap();
    assert_eq!(est.premium, 0.0);
    assert_eq!(est.std_error, 0.0);
}

#[test]
fn premium_is_nonpositive_without_dividends() {
    let mut p = HestonParams::desk();
    p.delta = 0.0;
    let spec = PutSpec::new(100.0, 1.0).unwrap();
    let (a, e, b) = solve_pair(&p, &spec, &coarse());
    let est = eep_premium(&p, &spec, 100.0, 0.04, &b, &a, &e, &small_mc(2)).unwrap();
    assert!(est.premium < 0.0, "{est:?}");
    assert!(est.american >= est.european);
}

#[test]
fn premium_rejects_mismatched_lattices() {
    let p = HestonParams::desk();
    let spec = PutSpec::new(100.0, 1.0).unwrap();
    let (a, _, b) = solve_pair(&p, &spec, &coarse());
    let (_, e_fine, _) = solve_pair(&p, &spec, &GridSpec::desk());
    let err = eep_premium(&p, &spec, 100.0, 0.04, &b, &a, &e_fine, &small_mc(3)).unwrap_err();
    assert!(matches!(err, Error::GridMismatch(_)), "{err}");
}

#[test]
fn symmetric_data_is_a_fixed_point_of_the_dual() {
    let mut p = HestonParams::desk();
    p.delta = p.r;
    p.rho = 0.0;
    let spec = PutSpec::new(100.0, 1.0).unwrap();
    let dual = symmetry_dual(&p, &spec, 100.0).unwrap();
    assert_eq!(dual.params, p);
    assert_eq!(dual.spec, spec);
    assert_eq!(dual.spot, 100.0);
    let (entry, cmp) = check_symmetry(
        &p,
        &spec,
        100.0,
        0.04,
        &coarse(),
        &SolverOptions::default(),
        &small_mc(4),
    )
    .unwrap();
    assert!(cmp.literal_dual_put.is_none());
    assert!(entry.passed(), "{}", entry.detail);
}

#[test]
fn suite_reports_every_entry_in_order_and_is_deterministic() {
    let cfg = SuiteConfig {
        params: HestonParams::desk(),
        spec: PutSpec::new(100.0, 1.0).unwrap(),
        s0: 100.0,
        y0: 0.04,
        grid: coarse(),
        solver: SolverOptions::default(),
        mc: small_mc(5),
    };
    let a = run_suite(&cfg).unwrap();
    let ids: Vec<&str> = a.entries.iter().map(|e| e.id.as_str()).collect();
    assert_eq!(ids, ENTRY_ORDER);
    assert!(a.get("dominance").unwrap().passed());
    let b = run_suite(&cfg).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert!(a.to_text().lines().last().unwrap().starts_with("overall:"));
}

#[test]
fn european_monotone_t_is_not_applicable() {
    let p = HestonParams::desk();
    let spec = PutSpec::new(100.0, 1.0).unwrap();
    let (_, e, _) = solve_pair(&p, &spec, &coarse());
    assert_eq!(check_monotone_t(&e).status, Status::NotApplicable);
    // y-monotonicity and convexity hold for the European price as well
    assert!(check_monotone_y(&e).passed());
    assert!(check_convex_s(&e).passed());
}
