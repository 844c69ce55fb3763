//! Grid-refinement studies of prices and shape diagnostics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::checks::{
    check_convex_s, check_monotone_t, check_monotone_y, smooth_fit_s_gap, FitWindow,
};
use crate::analysis::eep::eep_premium;
use crate::boundary::{default_tol, extract_boundary};
use crate::error::{invalid, Result};
use crate::mc::McConfig;
use crate::model::{HestonParams, PutSpec};
use crate::oracle::{american_put_binomial, european_put_quadrature, DeterministicVariance};
use crate::pde::{solve_american, solve_european, GridSpec, PenaltyFamily, SolverOptions};

/// Steps of the binomial oracle used for the American error column.
const ORACLE_STEPS: usize = 4000;

/// One lattice level of a refinement study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub level: u32,
    pub nx: usize,
    pub ny: usize,
    pub steps: usize,
    pub american: f64,
    pub european: f64,
    /// Smooth-fit gap in `s` on the default window.
    pub smooth_fit_gap: f64,
    /// `max(0, −min u(y_{k+1}) + u(y_k))`.
    pub monotone_y_violation: f64,
    /// `max(0, max u(t_{i+1}) − u(t_i))`.
    pub monotone_t_violation: f64,
    /// `max(0, −min second difference in s)`.
    pub convexity_violation: f64,
    /// `|P − (P_e − premium)|`, when a Monte Carlo configuration is given.
    pub eep_residual: Option<f64>,
    /// `|P_e − quadrature|` in the deterministic-variance limit.
    pub european_oracle_error: Option<f64>,
    /// `|P − binomial|` in the deterministic-variance limit.
    pub american_oracle_error: Option<f64>,
}

/// Rows from coarse to fine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementTable {
    pub rows: Vec<RefinementRow>,
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (a > 0.0).then(|| b / a)
}

impl RefinementTable {
    /// Ratios `fine / coarse` of consecutive rows for one column.
    pub fn ratios(&self, column: impl Fn(&RefinementRow) -> Option<f64>) -> Vec<Option<f64>> {
        self.rows
            .windows(2)
            .map(|w| match (column(&w[0]), column(&w[1])) {
                (Some(a), Some(b)) => ratio(a, b),
                _ => None,
            })
            .collect()
    }

    /// CSV with one row per level; ratio columns are empty on the first
    /// row and where the coarse value is 0.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "level,nx,ny,steps,american,european,american_change,smooth_fit_gap,smooth_fit_ratio,\
             monotone_y_violation,monotone_t_violation,convexity_violation,eep_residual,eep_ratio,\
             european_oracle_error,american_oracle_error,oracle_ratio"
        )?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (i, r) in self.rows.iter().enumerate() {
            let prev = i.checked_sub(1).map(|j| &self.rows[j]);
            let change = prev.map(|p| r.american - p.american);
            let sf = prev.and_then(|p| ratio(p.smooth_fit_gap, r.smooth_fit_gap));
            let eep = prev.and_then(|p| match (p.eep_residual, r.eep_residual) {
                (Some(a), Some(b)) => ratio(a, b),
                _ => None,
            });
            let oracle = prev.and_then(|p| match (p.american_oracle_error, r.american_oracle_error) {
                (Some(a), Some(b)) => ratio(a, b),
                _ => None,
            });
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.level,
                r.nx,
                r.ny,
                r.steps,
                r.american,
                r.european,
                opt(change),
                r.smooth_fit_gap,
                opt(sf),
                r.monotone_y_violation,
                r.monotone_t_violation,
                r.convexity_violation,
                opt(r.eep_residual),
                opt(eep),
                opt(r.european_oracle_error),
                opt(r.american_oracle_error),
                opt(oracle)
            )?;
        }
        Ok(())
    }
}

/// Solves on `base.refined(l)` for `l = 0..levels` and tabulates prices
/// and diagnostics. Needs at least two levels.
#[allow(clippy::too_many_arguments)]
pub fn refinement_study(
    params: &HestonParams,
    spec: &PutSpec,
    s0: f64,
    y0: f64,
    base: &GridSpec,
    levels: u32,
    options: &SolverOptions,
    mc: Option<&McConfig>,
) -> Result<RefinementTable> {
    if levels < 2 {
        return Err(invalid("levels", format!("need at least 2, got {levels}")));
    }
    let mut rows = Vec::new();
    for level in 0..levels {
        let grid = base.refined(level);
        let lattice = grid.build(params, spec, s0, y0)?;
        let penalty = PenaltyFamily::for_put(params, spec);
        let american = solve_american(params, spec, &lattice, &penalty, options)?;
        let european = solve_european(params, spec, &lattice, options)?;
        let boundary = extract_boundary(&american, default_tol(&american))?;
        let window = FitWindow::default_for(&american);
        let eep_residual = match mc {
            Some(cfg) => Some(
                eep_premium(params, spec, s0, y0, &boundary, &american, &european, cfg)?.residual,
            ),
            None => None,
        };
        let (p, pe) = (american.price(s0, y0), european.price(s0, y0));
        let (european_oracle_error, american_oracle_error) = if params.oracle_mode() {
            let v = DeterministicVariance {
                kappa: params.kappa,
                theta: params.theta,
                y0,
            };
            let quad = european_put_quadrature(
                s0,
                spec.strike,
                params.r,
                params.delta,
                v.integrated(spec.maturity),
                spec.maturity,
            );
            let tree = american_put_binomial(
                s0,
                spec.strike,
                params.r,
                params.delta,
                v,
                spec.maturity,
                ORACLE_STEPS,
            )?;
            (Some((pe - quad).abs()), Some((p - tree).abs()))
        } else {
            (None, None)
        };
        rows.push(RefinementRow {
            level,
            nx: grid.nx,
            ny: grid.ny,
            steps: grid.steps,
            american: p,
            european: pe,
            smooth_fit_gap: smooth_fit_s_gap(&american, &boundary, &window).gap,
            monotone_y_violation: (-check_monotone_y(&american).measured).max(0.0),
            monotone_t_violation: check_monotone_t(&american).measured.max(0.0),
            convexity_violation: (-check_convex_s(&american).measured).max(0.0),
            eep_residual,
            european_oracle_error,
            american_oracle_error,
        });
    }
    Ok(RefinementTable { rows })
}
