//! The full verification suite on one configuration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::checks::{
    check_convex_s, check_dominance, check_moduli, check_monotone_t, check_monotone_y,
    check_smooth_fit_s, check_smooth_fit_y, check_strict_convexity, STRICT_MARGIN,
};
use crate::analysis::crosscheck::{check_smoothed_convergence, check_symmetry};
use crate::analysis::eep::{check_eep, eep_premium};
use crate::analysis::report::{ReportEntry, Status, VerificationReport};
use crate::boundary::{
    check_boundary_monotone, check_boundary_range, check_t_sections, default_tol,
    extract_boundary, ExerciseBoundary,
};
use crate::error::Result;
use crate::mc::McConfig;
use crate::model::{HestonParams, PutSpec};
use crate::pde::{
    solve_american, solve_european, GridSpec, PenaltyFamily, PriceSurface, SolverOptions,
};

/// Entry ids in report order. `dominance` gates the rest.
pub const ENTRY_ORDER: [&str; 14] = [
    "dominance",
    "monotone_y",
    "monotone_t",
    "convex_s",
    "strict_convexity",
    "moduli",
    "boundary_monotone",
    "boundary_range",
    "t_sections",
    "smooth_fit_s",
    "smooth_fit_y",
    "eep_identity",
    "symmetry",
    "smoothed_convergence",
];

/// Inputs of [`run_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub params: HestonParams,
    pub spec: PutSpec,
    pub s0: f64,
    pub y0: f64,
    /// Base lattice; smooth fit also uses one uniform refinement of it.
    pub grid: GridSpec,
    pub solver: SolverOptions,
    pub mc: McConfig,
}

struct Solved {
    american: PriceSurface,
    european: PriceSurface,
    boundary: ExerciseBoundary,
}

fn solve_level(cfg: &SuiteConfig, grid: &GridSpec) -> Result<Solved> {
    let lattice = grid.build(&cfg.params, &cfg.spec, cfg.s0, cfg.y0)?;
    let penalty = PenaltyFamily::for_put(&cfg.params, &cfg.spec);
    let (american, european) = rayon::join(
        || solve_american(&cfg.params, &cfg.spec, &lattice, &penalty, &cfg.solver),
        || solve_european(&cfg.params, &cfg.spec, &lattice, &cfg.solver),
    );
    let american = american?;
    let boundary = extract_boundary(&american, default_tol(&american))?;
    Ok(Solved {
        american,
        european: european?,
        boundary,
    })
}

type Job<'a> = Box<dyn Fn() -> Result<Vec<ReportEntry>> + Sync + Send + 'a>;

/// Solves the base and refined lattices, then evaluates every entry.
/// Entries are computed concurrently and assembled in [`ENTRY_ORDER`]. When
/// the dominance gate fails the remaining entries are reported
/// inconclusive without being evaluated.
pub fn run_suite(cfg: &SuiteConfig) -> Result<VerificationReport> {
    let (base, fine) = rayon::join(
        || solve_level(cfg, &cfg.grid),
        || solve_level(cfg, &cfg.grid.refined(1)),
    );
    let (base, fine) = (base?, fine?);
    let gate = check_dominance(&base.american, Some(&base.european));
    if !gate.passed() {
        let mut entries = vec![gate];
        for id in &ENTRY_ORDER[1..] {
            entries.push(
                ReportEntry::new(id, "", 0.0, 0.0, Status::Inconclusive)
                    .with_detail("not evaluated: dominance gate failed"),
            );
        }
        return Ok(VerificationReport::new(entries));
    }
    let k = cfg.spec.strike;
    let levels = [
        (&base.american, &base.boundary),
        (&fine.american, &fine.boundary),
    ];
    let jobs: Vec<Job> = vec![
        Box::new(|| Ok(vec![check_monotone_y(&base.american)])),
        Box::new(|| Ok(vec![check_monotone_t(&base.american)])),
        Box::new(|| Ok(vec![check_convex_s(&base.american)])),
        Box::new(|| {
            Ok(vec![check_strict_convexity(
                &base.american,
                Some(&base.boundary),
                STRICT_MARGIN * k,
            )])
        }),
        Box::new(|| Ok(vec![check_moduli(&base.american).0])),
        Box::new(|| {
            Ok(vec![
                check_boundary_monotone(&base.boundary),
                check_boundary_range(&base.boundary),
                check_t_sections(&base.boundary),
            ])
        }),
        Box::new(|| {
            Ok(vec![
                check_smooth_fit_s(&levels),
                check_smooth_fit_y(&levels, &cfg.params),
            ])
        }),
        Box::new(|| {
            let est = eep_premium(
                &cfg.params,
                &cfg.spec,
                cfg.s0,
                cfg.y0,
                &base.boundary,
                &base.american,
                &base.european,
                &cfg.mc,
            )?;
            Ok(vec![check_eep(&est, &cfg.spec)])
        }),
        Box::new(|| {
            let (e, _) = check_symmetry(
                &cfg.params,
                &cfg.spec,
                cfg.s0,
                cfg.y0,
                &cfg.grid,
                &cfg.solver,
                &cfg.mc,
            )?;
            Ok(vec![e])
        }),
        Box::new(|| {
            let (e, _) =
                check_smoothed_convergence(&cfg.params, &cfg.spec, cfg.s0, cfg.y0, &cfg.mc)?;
            Ok(vec![e])
        }),
    ];
    let results: Vec<Result<Vec<ReportEntry>>> = jobs.par_iter().map(|job| job()).collect();
    let mut entries = vec![gate];
    for r in results {
        entries.extend(r?);
    }
    debug_assert!(entries.iter().map(|e| e.id.as_str()).eq(ENTRY_ORDER));
    Ok(VerificationReport::new(entries))
}
