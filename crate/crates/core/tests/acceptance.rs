//! Acceptance run: one pass/fail line per criterion, nonzero exit on any
//! failure. Expensive desk and refined solves are shared between criteria.

use std::process::ExitCode;
use std::time::Instant;

use heston_amer::analysis::*;
use heston_amer::boundary::{
    check_boundary_monotone, check_boundary_range, check_t_sections, default_tol,
};
use heston_amer::mc::{european_estimate, lsmc_price, McConfig, PathScheme, Payoff};
use heston_amer::oracle::{american_put_binomial, european_put_quadrature, DeterministicVariance};
use heston_amer::*;

mod common;

const S0: f64 = 100.0;
const Y0: f64 = 0.04;

struct Solved {
    american: PriceSurface,
    european: PriceSurface,
    boundary: ExerciseBoundary,
}

fn solve(params: &HestonParams, spec: &PutSpec, grid: &GridSpec, s0: f64, y0: f64) -> Solved {
    let lattice = grid.build(params, spec, s0, y0).expect("lattice");
    let opts = SolverOptions::default();
    let penalty = PenaltyFamily::for_put(params, spec);
    let american = solve_american(params, spec, &lattice, &penalty, &opts).expect("american");
    let european = solve_european(params, spec, &lattice, &opts).expect("european");
    let boundary = extract_boundary(&american, default_tol(&american)).expect("boundary");
    Solved {
        american,
        european,
        boundary,
    }
}

struct Line {
    pass: bool,
    text: String,
}

fn line(pass: bool, text: String) -> Line {
    Line { pass, text }
}

fn entries_line(entries: &[ReportEntry]) -> String {
    entries
        .iter()
        .map(|e| format!("{} {} ({:.3e} vs {:.3e})", e.id, e.status.label(), e.measured, e.threshold))
        .collect::<Vec<_>>()
        .join("; ")
}

fn feller() -> HestonParams {
    HestonParams::desk()
}

fn non_feller() -> HestonParams {
    HestonParams {
        sigma: 0.6,
        ..HestonParams::desk()
    }
}

fn cross_backend(spec: &PutSpec) -> (Line, Solved) {
    let params = feller();
    let start = Instant::now();
    let solved = solve(&params, spec, &GridSpec::desk(), S0, Y0);
    let pde = solved.american.price(S0, Y0);
    let mc = lsmc_price(&params, spec, S0, Y0, &McConfig::default()).expect("lsmc");
    let secs = start.elapsed().as_secs_f64();
    let tol = (3.0 * mc.std_error).max(5e-3 * spec.strike);
    let gap = (pde - mc.price).abs();
    let pass = gap <= tol && secs <= 180.0;
    (
        line(
            pass,
            format!(
                "PDE {pde:.4} vs LSMC {:.4} (se {:.4}); |gap| {gap:.4} <= {tol:.4}; runtime {secs:.1}s <= 180s",
                mc.price, mc.std_error
            ),
        ),
        solved,
    )
}

fn deterministic_vol(spec: &PutSpec) -> Line {
    let params = HestonParams {
        sigma: 0.0,
        ..HestonParams::desk()
    };
    let y0 = params.theta;
    let s = solve(&params, spec, &GridSpec::desk(), S0, y0);
    let v = DeterministicVariance {
        kappa: params.kappa,
        theta: params.theta,
        y0,
    };
    let k = spec.strike;
    let quad = european_put_quadrature(S0, k, params.r, params.delta, v.integrated(1.0), 1.0);
    let tree = american_put_binomial(S0, k, params.r, params.delta, v, 1.0, 4000).expect("tree");
    let (pe, p) = (s.european.price(S0, y0), s.american.price(S0, y0));
    let (de, da) = ((pe - quad).abs(), (p - tree).abs());
    line(
        de <= 2e-3 * k && da <= 3e-3 * k,
        format!(
            "European {pe:.4} vs quadrature {quad:.4} (|gap| {de:.4} <= {:.3}); American {p:.4} vs binomial {tree:.4} (|gap| {da:.4} <= {:.3})",
            2e-3 * k,
            3e-3 * k
        ),
    )
}

fn tiny_lattice() -> Line {
    let (worst, eps) = common::tiny_lattice_deviation();
    line(
        worst <= eps,
        format!("max |penalty − LCP oracle| {worst:.3e} <= ε {eps:.1e}"),
    )
}

fn monotonicity(sets: &[(&str, &Solved)]) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, s) in sets {
        let entries = [
            check_monotone_y(&s.american),
            check_monotone_t(&s.american),
            check_convex_s(&s.american),
        ];
        pass &= entries.iter().all(ReportEntry::passed);
        parts.push(format!("{name}: {}", entries_line(&entries)));
    }
    line(pass, parts.join(" | "))
}

fn boundary_suite(sets: &[(&str, &Solved)]) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, s) in sets {
        let entries = [
            check_boundary_range(&s.boundary),
            check_boundary_monotone(&s.boundary),
            check_t_sections(&s.boundary),
        ];
        pass &= entries.iter().all(ReportEntry::passed);
        parts.push(format!("{name}: {}", entries_line(&entries)));
    }
    line(pass, parts.join(" | "))
}

fn eep_identity(spec: &PutSpec, desk: &Solved) -> Line {
    let mc = McConfig::default();
    let params = feller();
    let est = eep_premium(
        &params, spec, S0, Y0, &desk.boundary, &desk.american, &desk.european, &mc,
    )
    .expect("eep");
    let entry = check_eep(&est, spec);

    let zero_rates = HestonParams {
        r: 0.0,
        delta: 0.0,
        ..params
    };
    let z = solve(&zero_rates, spec, &GridSpec::desk(), S0, Y0);
    let zero = eep_premium(
        &zero_rates, spec, S0, Y0, &z.boundary, &z.american, &z.european, &mc,
    )
    .expect("eep r=δ=0");

    let no_div = HestonParams {
        delta: 0.0,
        ..params
    };
    let d = solve(&no_div, spec, &GridSpec::desk(), S0, Y0);
    let nd = eep_premium(&no_div, spec, S0, Y0, &d.boundary, &d.american, &d.european, &mc)
        .expect("eep δ=0");

    let pass = entry.passed() && zero.premium == 0.0 && nd.premium <= 0.0;
    line(
        pass,
        format!(
            "residual {:.3e} <= {:.3e} (premium {:.4}, se {:.1e}); r=δ=0 premium {}; δ=0 premium {:.4} <= 0",
            entry.measured, entry.threshold, est.premium, est.std_error, zero.premium, nd.premium
        ),
    )
}

fn smooth_fit(feller_levels: [&Solved; 2], non_feller_levels: [&Solved; 2]) -> Line {
    let fl = feller_levels.map(|s| (&s.american, &s.boundary));
    let nl = non_feller_levels.map(|s| (&s.american, &s.boundary));
    let s_feller = check_smooth_fit_s(&fl);
    let s_non = check_smooth_fit_s(&nl);
    let window = FitWindow::default_for(&feller_levels[0].american);
    let slopes: Vec<f64> = fl
        .iter()
        .map(|(s, b)| smooth_fit_y_slope(s, b, &window).boundary_slope)
        .collect();
    let y_decreasing = slopes[1] < slopes[0];
    let y_feller = check_smooth_fit_y(&fl, &feller());
    let y_non = check_smooth_fit_y(&nl, &non_feller());
    let pass = s_feller.passed()
        && s_non.passed()
        && y_decreasing
        && y_non.status == Status::NotApplicable;
    line(
        pass,
        format!(
            "s-gap Feller {} / non-Feller {}; Feller y-slope {:.3} -> {:.3}; smooth_fit_y entry {} (ratio {:.3}); non-Feller y {}",
            s_feller.detail,
            s_non.detail,
            slopes[0],
            slopes[1],
            y_feller.status.label(),
            y_feller.measured,
            y_non.status.label()
        ),
    )
}

fn strict_convexity(spec: &PutSpec, desk: &Solved) -> Line {
    let e = check_strict_convexity(
        &desk.american,
        Some(&desk.boundary),
        STRICT_MARGIN * spec.strike,
    );
    line(
        e.passed(),
        format!(
            "min second difference {:.3e} >= {:.1e}; {}",
            e.measured, e.threshold, e.detail
        ),
    )
}

fn symmetry(spec: &PutSpec) -> Line {
    let mc = McConfig::default();
    let opts = SolverOptions::default();
    let (entry, cmp) =
        check_symmetry(&feller(), spec, S0, Y0, &GridSpec::desk(), &opts, &mc).expect("symmetry");

    let no_div = HestonParams {
        delta: 0.0,
        ..feller()
    };
    let (_, deg) =
        check_symmetry(&no_div, spec, S0, Y0, &GridSpec::desk(), &opts, &mc).expect("symmetry δ=0");
    let euro = european_estimate(
        &no_div,
        spec,
        S0,
        Y0,
        &mc,
        Payoff::Call,
        PathScheme::FullTruncation,
    )
    .expect("european call");
    let floor = 1e-3 * spec.strike * (S0 / spec.strike).max(1.0);
    let tol_pde = (3.0 * euro.std_error).max(floor);
    let tol_mc = (3.0 * (euro.std_error.powi(2) + deg.lsmc_call.std_error.powi(2)).sqrt()).max(floor);
    let gap_pde = (deg.dual_put - euro.price).abs();
    let gap_mc = (deg.lsmc_call.price - euro.price).abs();
    let pass = entry.passed() && gap_pde <= tol_pde && gap_mc <= tol_mc;
    line(
        pass,
        format!(
            "dual put {:.4} vs LSMC call {:.4}, |gap| {:.4} <= {:.4}; δ=0: dual put {:.4}, LSMC call {:.4}, European MC call {:.4} (gaps {gap_pde:.4} <= {tol_pde:.4}, {gap_mc:.4} <= {tol_mc:.4})",
            cmp.dual_put,
            cmp.lsmc_call.price,
            entry.measured,
            entry.threshold,
            deg.dual_put,
            deg.lsmc_call.price,
            euro.price
        ),
    )
}

fn smoothed(spec: &PutSpec) -> Line {
    let (e, _) =
        check_smoothed_convergence(&feller(), spec, S0, Y0, &McConfig::default()).expect("smoothed");
    line(e.passed(), e.detail)
}

fn reproducible_json(spec: &PutSpec) -> String {
    let suite = run_suite(&SuiteConfig {
        params: feller(),
        spec: *spec,
        s0: S0,
        y0: Y0,
        grid: GridSpec::desk().coarsened().expect("coarse"),
        solver: SolverOptions::default(),
        mc: McConfig {
            paths: 20_000,
            dates: 25,
            substeps: 2,
            seed: 7,
        },
    })
    .expect("suite");
    let lsmc = lsmc_price(&feller(), spec, S0, Y0, &McConfig::default()).expect("lsmc");
    serde_json::to_string(&serde_json::json!({
        "suite": serde_json::from_str::<serde_json::Value>(&suite.to_json().expect("json")).expect("parse"),
        "lsmc": lsmc,
    }))
    .expect("json")
}

fn reproducibility(spec: &PutSpec) -> Line {
    let in_pool = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("pool")
            .install(|| reproducible_json(spec))
    };
    let a = in_pool(4);
    let b = in_pool(4);
    let c = in_pool(1);
    line(
        a == b && a == c,
        format!(
            "repeat identical: {}; 1 vs 4 threads identical: {}; {} bytes",
            a == b,
            a == c,
            a.len()
        ),
    )
}

fn main() -> ExitCode {
    let spec = PutSpec::new(100.0, 1.0).expect("spec");
    let started = Instant::now();
    let mut lines: Vec<(&str, Line)> = Vec::new();

    let (c1, f_desk) = cross_backend(&spec);
    lines.push(("cross-backend agreement", c1));
    lines.push(("deterministic-vol oracle", deterministic_vol(&spec)));
    lines.push(("tiny-lattice exactness", tiny_lattice()));

    let n_desk = solve(&non_feller(), &spec, &GridSpec::desk(), S0, Y0);
    let sets = [("Feller", &f_desk), ("non-Feller", &n_desk)];
    lines.push(("monotonicity suite", monotonicity(&sets)));
    lines.push(("boundary suite", boundary_suite(&sets)));
    lines.push(("EEP identity", eep_identity(&spec, &f_desk)));

    let f_fine = solve(&feller(), &spec, &GridSpec::desk().refined(1), S0, Y0);
    let n_fine = solve(&non_feller(), &spec, &GridSpec::desk().refined(1), S0, Y0);
    lines.push((
        "smooth fit",
        smooth_fit([&f_desk, &f_fine], [&n_desk, &n_fine]),
    ));
    lines.push(("strict convexity", strict_convexity(&spec, &f_desk)));
    lines.push(("put-call symmetry", symmetry(&spec)));
    lines.push(("smoothed-SDE convergence", smoothed(&spec)));
    lines.push(("reproducibility", reproducibility(&spec)));

    let mut failures = 0;
    for (i, (name, l)) in lines.iter().enumerate() {
        if !l.pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {:<26} {}  {}",
            i + 1,
            name,
            if l.pass { "PASS" } else { "FAIL" },
            l.text
        );
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.0}s",
        lines.len() - failures,
        lines.len(),
        started.elapsed().as_secs_f64()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
