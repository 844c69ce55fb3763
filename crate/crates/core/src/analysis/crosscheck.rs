//! Checks that combine the PDE and Monte Carlo engines: put–call symmetry
//! and convergence of the smoothed systems.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::report::{ReportEntry, Status};
use crate::error::Result;
use crate::mc::lsmc::check_inputs;
use crate::mc::paths::{mean_se, path_rng, Dynamics, CHUNK};
use crate::mc::{lsmc_estimate, uniform_times, McConfig, McEstimate, PathScheme, Payoff};
use crate::model::{symmetry_dual, HestonParams, PutSpec};
use crate::pde::{solve_american, GridSpec, PenaltyFamily, SolverOptions};

/// American call priced two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryComparison {
    /// PDE put at the dual data, evaluated at spot `K`.
    pub dual_put: f64,
    /// LSMC call on the original data.
    pub lsmc_call: McEstimate,
    /// PDE put at the literal dual (`r ↔ δ`, `ρ → −ρ`, strike ↔ spot,
    /// variance parameters unchanged), for comparison.
    pub literal_dual_put: Option<f64>,
    pub tolerance: f64,
}

fn dual_put_price(
    params: &HestonParams,
    spec: &PutSpec,
    spot: f64,
    y0: f64,
    grid: &GridSpec,
    options: &SolverOptions,
) -> Result<f64> {
    let lattice = grid.build(params, spec, spot, y0)?;
    let surface = solve_american(
        params,
        spec,
        &lattice,
        &PenaltyFamily::for_put(params, spec),
        options,
    )?;
    Ok(surface.price(spot, y0))
}

/// `C(0, s0, y0; K, r, δ, ρ)` by LSMC against the American put at the dual
/// data by PDE. Passes within `max(3·SE, 1e−3·K·max(1, s0/K))`.
pub fn check_symmetry(
    params: &HestonParams,
    spec: &PutSpec,
    s0: f64,
    y0: f64,
    grid: &GridSpec,
    options: &SolverOptions,
    cfg: &McConfig,
) -> Result<(ReportEntry, SymmetryComparison)> {
    check_inputs(params, spec, s0, y0, cfg)?;
    let dual = symmetry_dual(params, spec, s0)?;
    let dual_put = dual_put_price(&dual.params, &dual.spec, dual.spot, y0, grid, options)?;
    let literal = HestonParams {
        rho: -params.rho,
        r: params.delta,
        delta: params.r,
        ..*params
    };
    let literal_dual_put = if literal.kappa == dual.params.kappa {
        None
    } else {
        Some(dual_put_price(&literal, &dual.spec, dual.spot, y0, grid, options)?)
    };
    let lsmc_call = lsmc_estimate(
        params,
        spec,
        s0,
        y0,
        cfg,
        Payoff::Call,
        PathScheme::FullTruncation,
    )?;
    let k = spec.strike;
    let tolerance = (3.0 * lsmc_call.std_error).max(1e-3 * k * (s0 / k).max(1.0));
    let gap = (dual_put - lsmc_call.price).abs();
    let cmp = SymmetryComparison {
        dual_put,
        lsmc_call,
        literal_dual_put,
        tolerance,
    };
    let literal_note = match literal_dual_put {
        Some(v) => format!(
            "; literal swap without the variance-drift correction gives {v:.6} (gap {:.4})",
            (v - lsmc_call.price).abs()
        ),
        None => String::new(),
    };
    let entry = ReportEntry::new(
        "symmetry",
        "C(t,s,y;K,r,δ,ρ)=P(t,K,y;x,δ,r,−ρ)",
        gap,
        tolerance,
        Status::from_bool(gap <= tolerance),
    )
    .with_detail(format!(
        "dual put {dual_put:.6} vs LSMC call {:.6} (se {:.2e}); dual κ {:.4}, θ {:.5}{literal_note}",
        lsmc_call.price, lsmc_call.std_error, dual.params.kappa, dual.params.theta
    ))
    .with_config(json!({
        "params": params,
        "spec": spec,
        "s0": s0,
        "y0": y0,
        "dual": { "params": dual.params, "spec": dual.spec, "spot": dual.spot },
        "grid": grid,
        "mc": cfg,
    }));
    Ok((entry, cmp))
}

/// Smoothing indices used by [`check_smoothed_convergence`].
pub const SMOOTHING_INDICES: [u32; 3] = [4, 16, 64];

/// Path-wise distances and price gaps between the smoothed systems and the
/// Heston system under common random numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedConvergence {
    pub indices: Vec<u32>,
    /// `𝔼[sup_t |Yⁿ_t − Y_t|]` and its standard error, per index.
    pub sup_y: Vec<(f64, f64)>,
    /// `𝔼[sup_t |Xⁿ_t − X_t|]` and its standard error, per index.
    pub sup_x: Vec<(f64, f64)>,
    /// LSMC put price under the Heston system.
    pub base_price: McEstimate,
    /// LSMC put prices under the smoothed systems.
    pub smoothed_prices: Vec<McEstimate>,
    /// `|uⁿ − u|` per index.
    pub price_gaps: Vec<f64>,
}

/// Sup distances over every Euler step on `[0, T]`, per path.
fn sup_distances(
    params: &HestonParams,
    n: u32,
    x0: f64,
    y0: f64,
    maturity: f64,
    cfg: &McConfig,
) -> Result<((f64, f64), (f64, f64))> {
    let base = Dynamics::new(params, PathScheme::FullTruncation)?;
    let smooth = Dynamics::new(params, PathScheme::Smoothed { n })?;
    let times = uniform_times(maturity, cfg.dates * cfg.substeps);
    let nt = times.len();
    let mut dy = vec![0.0; cfg.paths];
    let mut dx = vec![0.0; cfg.paths];
    dy.par_chunks_mut(CHUNK)
        .zip(dx.par_chunks_mut(CHUNK))
        .enumerate()
        .for_each(|(c, (cy, cx))| {
            let mut buf = [vec![0.0; nt], vec![0.0; nt], vec![0.0; nt], vec![0.0; nt]];
            for q in 0..cy.len() {
                let stream = (c * CHUNK + q) as u64;
                let [xa, ya, xb, yb] = &mut buf;
                base.simulate_into(&mut path_rng(cfg.seed, stream), x0, y0, &times, 1, xa, ya);
                smooth.simulate_into(&mut path_rng(cfg.seed, stream), x0, y0, &times, 1, xb, yb);
                let sup = |a: &[f64], b: &[f64]| {
                    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
                };
                cy[q] = sup(ya, yb);
                cx[q] = sup(xa, xb);
            }
        });
    Ok((mean_se(&dy), mean_se(&dx)))
}

/// Sup distances strictly decreasing over `n ∈ {4, 16, 64}` with the last at
/// most half the first, for both components, and LSMC put price gaps
/// decreasing. The put payoff is bounded by `K`.
pub fn check_smoothed_convergence(
    params: &HestonParams,
    spec: &PutSpec,
    s0: f64,
    y0: f64,
    cfg: &McConfig,
) -> Result<(ReportEntry, SmoothedConvergence)> {
    check_inputs(params, spec, s0, y0, cfg)?;
    let x0 = s0.ln();
    let mut sup_y = Vec::new();
    let mut sup_x = Vec::new();
    let mut smoothed_prices = Vec::new();
    let base_price = lsmc_estimate(
        params,
        spec,
        s0,
        y0,
        cfg,
        Payoff::Put,
        PathScheme::FullTruncation,
    )?;
    for n in SMOOTHING_INDICES {
        let (y, x) = sup_distances(params, n, x0, y0, spec.maturity, cfg)?;
        sup_y.push(y);
        sup_x.push(x);
        smoothed_prices.push(lsmc_estimate(
            params,
            spec,
            s0,
            y0,
            cfg,
            Payoff::Put,
            PathScheme::Smoothed { n },
        )?);
    }
    let price_gaps: Vec<f64> = smoothed_prices
        .iter()
        .map(|e| (e.price - base_price.price).abs())
        .collect();
    let shrinking = |v: &[(f64, f64)]| {
        v.windows(2).all(|w| w[1].0 < w[0].0) && v[v.len() - 1].0 <= 0.5 * v[0].0
    };
    let gaps_down = price_gaps.windows(2).all(|w| w[1] <= w[0]);
    let pass = shrinking(&sup_y) && shrinking(&sup_x) && gaps_down;
    let ratio = sup_y[2].0 / sup_y[0].0;
    let out = SmoothedConvergence {
        indices: SMOOTHING_INDICES.to_vec(),
        sup_y,
        sup_x,
        base_price,
        smoothed_prices,
        price_gaps,
    };
    let entry = ReportEntry::new(
        "smoothed_convergence",
        "For any λ>0, we have",
        ratio,
        0.5,
        Status::from_bool(pass),
    )
    .with_detail(format!(
        "E sup|Yⁿ−Y| {:?}; E sup|Xⁿ−X| {:?}; price gaps {:?}",
        out.sup_y.iter().map(|v| v.0).collect::<Vec<_>>(),
        out.sup_x.iter().map(|v| v.0).collect::<Vec<_>>(),
        out.price_gaps
    ))
    .with_config(json!({
        "params": params,
        "spec": spec,
        "s0": s0,
        "y0": y0,
        "mc": cfg,
        "indices": SMOOTHING_INDICES,
    }));
    Ok((entry, out))
}
