//! Early exercise premium by simulation along an extracted boundary.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::report::{ReportEntry, Status};
use crate::boundary::ExerciseBoundary;
use crate::error::{Error, Result};
use crate::mc::lsmc::{check_inputs, path_samples};
use crate::mc::paths::{mean_se, Dynamics, PathScheme, SimulationSpec};
use crate::mc::McConfig;
use crate::model::{HestonParams, PutSpec};
use crate::pde::{PriceSurface, SurfaceKind};

/// Stream offset of the premium batch, disjoint from the LSMC streams.
const PREMIUM_STREAM: u64 = 2 << 40;

/// `premium = ∫₀ᵀ e^{−rs} 𝔼[(δS_s − rK)·1{S_s ≤ b(s, Y_s)}] ds`, so that
/// `P = P_e − premium`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PremiumEstimate {
    pub premium: f64,
    pub std_error: f64,
    pub paths: usize,
    /// PDE American price at `(0, s0, y0)`.
    pub american: f64,
    /// PDE European price at `(0, s0, y0)`.
    pub european: f64,
    /// `|P − (P_e − premium)|`.
    pub residual: f64,
}

/// Boundary at maturity: `min(K, rK/δ)`, or `K` when `δ = 0`.
pub fn boundary_at_maturity(params: &HestonParams, spec: &PutSpec) -> f64 {
    if params.delta > 0.0 {
        spec.strike.min(params.r * spec.strike / params.delta)
    } else {
        spec.strike
    }
}

fn same_nodes(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(u, v)| (u - v).abs() <= 1e-12 * (1.0 + u.abs()))
}

/// Simulates `(S, Y)` on the lattice time nodes and integrates the premium
/// density by the trapezoid rule, with `b` interpolated bilinearly in
/// `(t, y)` and tending to [`boundary_at_maturity`] after the last
/// boundary node.
#[allow(clippy::too_many_arguments)]
pub fn eep_premium(
    params: &HestonParams,
    spec: &PutSpec,
    s0: f64,
    y0: f64,
    boundary: &ExerciseBoundary,
    american: &PriceSurface,
    european: &PriceSurface,
    cfg: &McConfig,
) -> Result<PremiumEstimate> {
    check_inputs(params, spec, s0, y0, cfg)?;
    if american.kind != SurfaceKind::American {
        return Err(Error::SurfaceKind {
            expected: SurfaceKind::American.name(),
            got: american.kind.name(),
        });
    }
    if european.kind != SurfaceKind::European {
        return Err(Error::SurfaceKind {
            expected: SurfaceKind::European.name(),
            got: european.kind.name(),
        });
    }
    let times = american.lattice.t_nodes.clone();
    let nt = times.len();
    if european.lattice != american.lattice {
        return Err(Error::GridMismatch(
            "European and American surfaces live on different lattices".into(),
        ));
    }
    if !same_nodes(&boundary.t_nodes, &times[..nt - 1])
        || !same_nodes(&boundary.y_nodes, &american.lattice.y_nodes)
    {
        return Err(Error::GridMismatch(
            "boundary nodes differ from the surface lattice".into(),
        ));
    }
    if (times[nt - 1] - spec.maturity).abs() > 1e-12 * spec.maturity
        || american.params != *params
        || american.spec != *spec
    {
        return Err(Error::GridMismatch(
            "surfaces were solved for different model or contract data".into(),
        ));
    }

    let dynamics = Dynamics::new(params, PathScheme::FullTruncation)?;
    let sim = SimulationSpec {
        n_paths: cfg.paths,
        seed: cfg.seed,
        substeps: cfg.substeps,
        first_stream: PREMIUM_STREAM,
    };
    let (r, delta, k) = (params.r, params.delta, spec.strike);
    let b_t = boundary_at_maturity(params, spec);
    let weights: Vec<f64> = (0..nt)
        .map(|j| {
            let left = if j > 0 { times[j] - times[j - 1] } else { 0.0 };
            let right = if j + 1 < nt { times[j + 1] - times[j] } else { 0.0 };
            0.5 * (left + right) * (-r * times[j]).exp()
        })
        .collect();
    let samples = path_samples(&dynamics, s0, y0, &times, &sim, &|xs, ys| {
        let mut acc = 0.0;
        for j in 0..nt {
            let s = xs[j].exp();
            let b = boundary.interpolate(times[j], ys[j], spec.maturity, b_t);
            if s <= b {
                acc += weights[j] * (delta * s - r * k);
            }
        }
        acc
    });
    let (premium, std_error) = mean_se(&samples);
    let p = american.price(s0, y0);
    let pe = european.price(s0, y0);
    Ok(PremiumEstimate {
        premium,
        std_error,
        paths: cfg.paths,
        american: p,
        european: pe,
        residual: (p - (pe - premium)).abs(),
    })
}

/// The identity `P = P_e − premium` within `max(3·SE, 0.5%·K)`.
pub fn check_eep(estimate: &PremiumEstimate, spec: &PutSpec) -> ReportEntry {
    let threshold = (3.0 * estimate.std_error).max(0.005 * spec.strike);
    ReportEntry::new(
        "eep_identity",
        "Let P_e(0,S_0,Y_0) be the European put price",
        estimate.residual,
        threshold,
        Status::from_bool(estimate.residual <= threshold),
    )
    .with_detail(format!(
        "P {:.6}, P_e {:.6}, premium {:.6} (se {:.2e})",
        estimate.american, estimate.european, estimate.premium, estimate.std_error
    ))
    .with_config(json!({ "estimate": estimate, "spec": spec }))
}
