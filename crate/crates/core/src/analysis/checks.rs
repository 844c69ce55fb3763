//! Shape checks on price surfaces and boundaries.

use serde_json::json;

use crate::analysis::report::{ReportEntry, Status};
use crate::boundary::ExerciseBoundary;
use crate::model::{feller_satisfied, HestonParams};
use crate::pde::{Lattice, PriceSurface, SurfaceKind};

/// Tolerance used by the monotonicity and convexity checks, relative to
/// the strike.
pub const SHAPE_TOL: f64 = 1e-6;

fn surface_config(s: &PriceSurface) -> serde_json::Value {
    json!({
        "kind": s.kind,
        "lattice": s.lattice.config(),
        "params": s.params,
        "spec": s.spec,
    })
}

/// Gate: American ≥ European node-wise (when a European surface is given)
/// and American ≥ ψ − ε. Other entries are meaningless when this fails.
pub fn check_dominance(american: &PriceSurface, european: Option<&PriceSurface>) -> ReportEntry {
    let k = american.spec.strike;
    let eps = american.diagnostics.penalty_epsilon.unwrap_or(0.0);
    let l = &american.lattice;
    let mut worst_obstacle = f64::INFINITY;
    let mut worst_euro = f64::INFINITY;
    let mut at = None;
    for ti in 0..l.nt() {
        for i in 0..l.nx() {
            for kk in 0..l.ny() {
                let a = american.value(ti, i, kk);
                worst_obstacle = worst_obstacle.min(a - american.obstacle(i) + eps);
                if let Some(e) = european {
                    let d = a - e.value(ti, i, kk);
                    if d < worst_euro {
                        worst_euro = d;
                        at = Some((ti, i, kk));
                    }
                }
            }
        }
    }
    let grid_ok = european.is_none_or(|e| e.lattice == american.lattice);
    let threshold = -SHAPE_TOL * k;
    let measured = worst_obstacle.min(if european.is_some() {
        worst_euro
    } else {
        f64::INFINITY
    });
    let status = if american.kind != SurfaceKind::American || !grid_ok {
        Status::Inconclusive
    } else {
        Status::from_bool(measured >= threshold)
    };
    ReportEntry::new(
        "dominance",
        "P(t,s,y) ≥ P_e(t,s,y) and P(t,s,y) ≥ (K−s)⁺",
        measured,
        threshold,
        status,
    )
    .with_detail(format!(
        "min(P − ψ + ε) = {worst_obstacle:.3e}; min(P − P_e) = {worst_euro:.3e} at {at:?}"
    ))
    .with_config(surface_config(american))
}

/// `y ↦ u(t, x, y)` nondecreasing: min of `u(t, x, y_{k+1}) − u(t, x, y_k)`.
pub fn check_monotone_y(surface: &PriceSurface) -> ReportEntry {
    let l = &surface.lattice;
    let mut worst = f64::INFINITY;
    let mut at = None;
    for ti in 0..l.nt() {
        for i in 0..l.nx() {
            for k in 0..l.ny() - 1 {
                let d = surface.value(ti, i, k + 1) - surface.value(ti, i, k);
                if d < worst {
                    worst = d;
                    at = Some((ti, i, k));
                }
            }
        }
    }
    let threshold = -SHAPE_TOL * surface.spec.strike;
    ReportEntry::new(
        "monotone_y",
        "y ↦ P(t,s,y) is nondecreasing",
        worst,
        threshold,
        Status::from_bool(worst >= threshold),
    )
    .with_detail(format!("min increment at (t, x, y) index {at:?}"))
    .with_config(surface_config(surface))
}

/// `t ↦ u(t, x, y)` nonincreasing: max of `u(t_{i+1}) − u(t_i)`.
pub fn check_monotone_t(surface: &PriceSurface) -> ReportEntry {
    let l = &surface.lattice;
    let ns = l.n_space();
    let mut worst = f64::NEG_INFINITY;
    let mut at = None;
    for ti in 0..l.nt() - 1 {
        let (a, b) = (surface.slice(ti), surface.slice(ti + 1));
        for n in 0..ns {
            let d = b[n] - a[n];
            if d > worst {
                worst = d;
                at = Some((ti, n / l.ny(), n % l.ny()));
            }
        }
    }
    let threshold = SHAPE_TOL * surface.spec.strike;
    // a deep in-the-money European put is worth less than intrinsic, so the
    // property belongs to the American price only
    let status = match surface.kind {
        SurfaceKind::American => Status::from_bool(worst <= threshold),
        SurfaceKind::European => Status::NotApplicable,
    };
    ReportEntry::new(
        "monotone_t",
        "t ↦ P(t,s,y) is nonincreasing",
        worst,
        threshold,
        status,
    )
    .with_detail(format!("max increase at (t, x, y) index {at:?}"))
    .with_config(surface_config(surface))
}

/// Second difference in spot on the non-uniform grid `s_j = e^{x_j}`:
/// `(s_{j+1} − s_j)·(slope_right − slope_left)`, in currency.
pub fn second_difference_s(x_nodes: &[f64], u: impl Fn(usize) -> f64, j: usize) -> f64 {
    let (s0, s1, s2) = (x_nodes[j - 1].exp(), x_nodes[j].exp(), x_nodes[j + 1].exp());
    let left = (u(j) - u(j - 1)) / (s1 - s0);
    let right = (u(j + 1) - u(j)) / (s2 - s1);
    (s2 - s1) * (right - left)
}

/// `s ↦ P` convex, nonincreasing, with slope ≥ −1.
pub fn check_convex_s(surface: &PriceSurface) -> ReportEntry {
    let l = &surface.lattice;
    let mut worst = f64::INFINITY;
    let mut at = None;
    let (mut min_slope, mut max_slope) = (f64::INFINITY, f64::NEG_INFINITY);
    for ti in 0..l.nt() {
        for k in 0..l.ny() {
            let u = |i: usize| surface.value(ti, i, k);
            for i in 1..l.nx() - 1 {
                let d = second_difference_s(&l.x_nodes, u, i);
                if d < worst {
                    worst = d;
                    at = Some((ti, i, k));
                }
            }
            for i in 0..l.nx() - 1 {
                let slope = (u(i + 1) - u(i)) / (l.x_nodes[i + 1].exp() - l.x_nodes[i].exp());
                min_slope = min_slope.min(slope);
                max_slope = max_slope.max(slope);
            }
        }
    }
    let threshold = -SHAPE_TOL * surface.spec.strike;
    let slopes_ok = min_slope >= -1.0 - SHAPE_TOL && max_slope <= SHAPE_TOL;
    ReportEntry::new(
        "convex_s",
        "s ↦ P(t,s,y) is nonincreasing and convex",
        worst,
        threshold,
        Status::from_bool(worst >= threshold && slopes_ok),
    )
    .with_detail(format!(
        "min second difference at (t, x, y) index {at:?}; slopes in [{min_slope:.6}, {max_slope:.3e}]"
    ))
    .with_config(surface_config(surface))
}

/// Margin of the strict-convexity check relative to the strike, applied to
/// [`second_difference_s`].
pub const STRICT_MARGIN: f64 = 1e-6;

/// Minimum time value `u − ψ`, relative to the strike, for a node to enter
/// the strict-convexity mask.
pub const RESOLVED_TIME_VALUE: f64 = 1e-3;

/// Node mask for the strict-convexity check: `t < T`, `0 < y < y_max`,
/// log-price at least three cells above the boundary cell and one cell
/// from the lattice edges, and `u − ψ > min_time_value`.
///
/// Far out of the money the price and its curvature are exponentially
/// small, so no fixed margin can be met there; the time-value floor keeps
/// the mask on nodes where the continuation premium is resolved.
pub fn strict_convexity_mask(
    surface: &PriceSurface,
    boundary: Option<&ExerciseBoundary>,
    min_time_value: f64,
) -> Vec<(usize, usize, usize)> {
    let l = &surface.lattice;
    let tol = boundary.map(|b| b.tol).unwrap_or(0.0).max(min_time_value);
    let mut mask = Vec::new();
    for ti in 0..l.nt() - 1 {
        for k in 1..l.ny() - 1 {
            let first = match boundary {
                Some(b) => {
                    if b.is_unresolved(ti, k) {
                        continue;
                    }
                    Lattice::cell(&l.x_nodes, b.b(ti, k).ln()) + 3
                }
                None => 1,
            };
            for i in first.max(1)..l.nx() - 1 {
                if surface.value(ti, i, k) - surface.obstacle(i) > tol {
                    mask.push((ti, i, k));
                }
            }
        }
    }
    mask
}

fn min_second_difference(
    surface: &PriceSurface,
    mask: &[(usize, usize, usize)],
) -> (f64, Option<(usize, usize, usize)>) {
    let l = &surface.lattice;
    let mut worst = f64::INFINITY;
    let mut at = None;
    for &(ti, i, k) in mask {
        let d = second_difference_s(&l.x_nodes, |j| surface.value(ti, j, k), i);
        if d < worst {
            worst = d;
            at = Some((ti, i, k));
        }
    }
    (worst, at)
}

/// Strict convexity on the interior of the continuation region: min second
/// difference over the mask must be at least `margin`. The minimum over
/// the mask without the time-value floor is reported in the detail.
pub fn check_strict_convexity(
    surface: &PriceSurface,
    boundary: Option<&ExerciseBoundary>,
    margin: f64,
) -> ReportEntry {
    let k = surface.spec.strike;
    let mask = strict_convexity_mask(surface, boundary, RESOLVED_TIME_VALUE * k);
    let (worst, at) = min_second_difference(surface, &mask);
    let (raw, raw_at) = min_second_difference(surface, &strict_convexity_mask(surface, boundary, 0.0));
    let status = if mask.is_empty() {
        Status::Inconclusive
    } else {
        Status::from_bool(worst >= margin)
    };
    ReportEntry::new(
        "strict_convexity",
        "strictly convex in the continuation region",
        if mask.is_empty() { 0.0 } else { worst },
        margin,
        status,
    )
    .with_detail(format!(
        "{} masked nodes (time value > {:.3e}); min at (t, x, y) index {at:?}; \
         without the time-value floor min {raw:.3e} at {raw_at:?}; margin is a grid-level proxy",
        mask.len(),
        RESOLVED_TIME_VALUE * k
    ))
    .with_config(surface_config(surface))
}

/// Moduli of continuity on the `t = 0` slice.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModuliReport {
    /// `max |Δu/Δx|`.
    pub lipschitz_x: f64,
    /// Fitted exponent in `max_x |u(x, h) − u(x, 0)| ≈ C h^α`.
    pub holder_alpha: f64,
    /// Dyadic increments and the measured differences used in the fit.
    pub increments: Vec<(f64, f64)>,
    /// `max |Δu/Δy|` on `[θ/2, y_max/2]`.
    pub lipschitz_y: f64,
}

/// Least-squares slope of `ln v` against `ln h`.
fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(h, v)| *h > 0.0 && *v > 0.0)
        .map(|(h, v)| (h.ln(), v.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn measure_moduli(surface: &PriceSurface) -> ModuliReport {
    let l = &surface.lattice;
    let (nx, ny) = (l.nx(), l.ny());
    let u = |i: usize, k: usize| surface.value(0, i, k);
    let mut lipschitz_x: f64 = 0.0;
    for k in 0..ny {
        for i in 0..nx - 1 {
            lipschitz_x = lipschitz_x.max((u(i + 1, k) - u(i, k)).abs() / l.dx);
        }
    }
    let mut increments = Vec::new();
    let mut step = 1;
    while step < ny && increments.len() < 6 {
        let h = l.y_nodes[step];
        let d = (0..nx)
            .map(|i| (u(i, step) - u(i, 0)).abs())
            .fold(0.0, f64::max);
        increments.push((h, d));
        step *= 2;
    }
    let holder_alpha = log_log_slope(&increments);
    let (lo, hi) = (0.5 * surface.params.theta, 0.5 * l.y_max());
    let mut lipschitz_y: f64 = 0.0;
    for k in 0..ny - 1 {
        if l.y_nodes[k] >= lo && l.y_nodes[k + 1] <= hi {
            let dy = l.y_nodes[k + 1] - l.y_nodes[k];
            for i in 0..nx {
                lipschitz_y = lipschitz_y.max((u(i, k + 1) - u(i, k)).abs() / dy);
            }
        }
    }
    ModuliReport {
        lipschitz_x,
        holder_alpha,
        increments,
        lipschitz_y,
    }
}

/// Lipschitz in `x` (bounded by `K`, since `|s ∂P/∂s| ≤ K` for a convex
/// put price) and Hölder-½ in `y`. Passes when the x-ratio is within `K`
/// and either the fitted exponent is at least 0.45 or, under Feller, the
/// y-ratio on `[θ/2, y_max/2]` is within `K/θ`.
pub fn check_moduli(surface: &PriceSurface) -> (ReportEntry, ModuliReport) {
    let m = measure_moduli(surface);
    let k = surface.spec.strike;
    let x_ok = m.lipschitz_x <= k * (1.0 + 1e-9);
    let y_bound = k / surface.params.theta.max(f64::MIN_POSITIVE);
    let y_ok = m.holder_alpha >= 0.45
        || (feller_satisfied(&surface.params) && m.lipschitz_y <= y_bound);
    let entry = ReportEntry::new(
        "moduli",
        "x ↦ u(t,x,y) is Lipschitz continuous while the function y ↦ u(t,x,y) is Holder continuous",
        m.holder_alpha,
        0.45,
        Status::from_bool(x_ok && y_ok),
    )
    .with_detail(format!(
        "alpha {:.3}; max|du/dx| {:.4} (bound {k}); max|du/dy| on [θ/2, y_max/2] {:.4} (bound {y_bound:.1})",
        m.holder_alpha, m.lipschitz_x, m.lipschitz_y
    ))
    .with_config(surface_config(surface));
    (entry, m)
}

/// Region of `(t, y)` on which smooth fit is measured.
///
/// Near maturity the boundary runs into the strike, where the continuation
/// value has curvature of order `1/√(T − t)` that a three-node stencil
/// cannot resolve; near `y = 0` the generator degenerates and the first
/// rows carry the one-sided boundary treatment; near `y_max` the boundary
/// leaves the lattice. The window is fixed in physical units so that
/// refinement levels are compared on the same set.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FitWindow {
    pub t_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl FitWindow {
    /// `t ≤ 0.9T`, `θ/2 ≤ y ≤ y_max/2`.
    pub fn default_for(surface: &PriceSurface) -> Self {
        Self {
            t_max: 0.9 * surface.spec.maturity,
            y_min: 0.5 * surface.params.theta,
            y_max: 0.5 * surface.lattice.y_max(),
        }
    }

    pub fn contains(&self, t: f64, y: f64) -> bool {
        let slack = 1e-12;
        t <= self.t_max + slack && y >= self.y_min - slack && y <= self.y_max + slack
    }
}

/// Largest smooth-fit gap `|∂u/∂s(b⁺) + 1|` over resolved boundary nodes.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SlopeGap {
    pub gap: f64,
    pub at: Option<(usize, usize)>,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Derivative at `v` of the quadratic through three points.
fn quadratic_derivative(p: [(f64, f64); 3], v: f64) -> f64 {
    let [(a, fa), (b, fb), (c, fc)] = p;
    fa * ((v - b) + (v - c)) / ((a - b) * (a - c))
        + fb * ((v - a) + (v - c)) / ((b - a) * (b - c))
        + fc * ((v - a) + (v - b)) / ((c - a) * (c - b))
}

/// One-sided s-derivative just above the boundary from the three nodes
/// above the boundary cell, compared with `ψ'(b) = −1`.
pub fn smooth_fit_s_gap(
    surface: &PriceSurface,
    boundary: &ExerciseBoundary,
    window: &FitWindow,
) -> SlopeGap {
    let l = &surface.lattice;
    let mut out = SlopeGap {
        gap: 0.0,
        at: None,
        evaluated: 0,
        skipped: 0,
    };
    for ti in 0..boundary.nt() {
        for k in 0..l.ny() {
            if !window.contains(boundary.t_nodes[ti], l.y_nodes[k]) {
                continue;
            }
            if boundary.is_unresolved(ti, k) {
                out.skipped += 1;
                continue;
            }
            let b = boundary.b(ti, k);
            let j = Lattice::cell(&l.x_nodes, b.ln());
            if j + 3 >= l.nx() - 1 {
                out.skipped += 1;
                continue;
            }
            let pts = [1, 2, 3].map(|d| (l.x_nodes[j + d].exp(), surface.value(ti, j + d, k)));
            let gap = (quadratic_derivative(pts, b) + 1.0).abs();
            out.evaluated += 1;
            if gap > out.gap {
                out.gap = gap;
                out.at = Some((ti, k));
            }
        }
    }
    out
}

/// Smooth fit in `s` across refinement levels (coarse to fine). Passes when
/// the finest gap is at most 0.05 and each refinement shrinks the gap by a
/// factor of at most 0.7.
pub fn check_smooth_fit_s(levels: &[(&PriceSurface, &ExerciseBoundary)]) -> ReportEntry {
    let anchor = "∂/∂s P(t,b(t,y),y) = φ′(b(t,y))";
    if levels.is_empty() || levels.iter().any(|(s, _)| s.kind != SurfaceKind::American) {
        return ReportEntry::new("smooth_fit_s", anchor, 0.0, 0.05, Status::Inconclusive)
            .with_detail("requires American surfaces");
    }
    let window = FitWindow::default_for(levels[0].0);
    let gaps: Vec<SlopeGap> = levels
        .iter()
        .map(|(s, b)| smooth_fit_s_gap(s, b, &window))
        .collect();
    let last = gaps.last().unwrap();
    let ratios: Vec<f64> = gaps.windows(2).map(|w| w[1].gap / w[0].gap).collect();
    let shrinking = ratios.iter().all(|r| *r <= 0.7);
    let status = if gaps.iter().any(|g| g.evaluated == 0) {
        Status::Inconclusive
    } else {
        Status::from_bool(last.gap <= 0.05 && shrinking)
    };
    ReportEntry::new("smooth_fit_s", anchor, last.gap, 0.05, status)
        .with_detail(format!(
            "gaps {:?}; ratios {:?}; window {window:?}; finest worst at (t, y) index {:?}; {} skipped",
            gaps.iter().map(|g| g.gap).collect::<Vec<_>>(),
            ratios,
            last.at,
            last.skipped
        ))
        .with_config(surface_config(levels.last().unwrap().0))
}

/// Boundary y-slope relative to the interior y-slope scale.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct YSlope {
    /// `max |∂u/∂y|` at `(t, b(t, y), y)`, forward difference in `y`.
    pub boundary_slope: f64,
    /// `max |∂u/∂y|` over interior nodes of the `t = 0` slice.
    pub interior_scale: f64,
    pub ratio: f64,
    pub at: Option<(usize, usize)>,
}

pub fn smooth_fit_y_slope(
    surface: &PriceSurface,
    boundary: &ExerciseBoundary,
    window: &FitWindow,
) -> YSlope {
    let l = &surface.lattice;
    let (nx, ny) = (l.nx(), l.ny());
    let mut interior_scale: f64 = 0.0;
    for i in 1..nx - 1 {
        for k in 1..ny - 1 {
            let d = (surface.value(0, i, k + 1) - surface.value(0, i, k - 1))
                / (l.y_nodes[k + 1] - l.y_nodes[k - 1]);
            interior_scale = interior_scale.max(d.abs());
        }
    }
    let mut worst: f64 = 0.0;
    let mut at = None;
    for ti in 0..boundary.nt() {
        for k in 1..ny - 1 {
            if !window.contains(boundary.t_nodes[ti], l.y_nodes[k]) || boundary.is_unresolved(ti, k)
            {
                continue;
            }
            let xb = boundary.b(ti, k).ln();
            let j = Lattice::cell(&l.x_nodes, xb);
            let f = (xb - l.x_nodes[j]) / l.dx;
            let w = |kk: usize| {
                let w0 = surface.value(ti, j, kk) - surface.obstacle(j);
                let w1 = surface.value(ti, j + 1, kk) - surface.obstacle(j + 1);
                (1.0 - f) * w0 + f * w1
            };
            let d = ((w(k + 1) - w(k)) / (l.y_nodes[k + 1] - l.y_nodes[k])).abs();
            if d > worst {
                worst = d;
                at = Some((ti, k));
            }
        }
    }
    YSlope {
        boundary_slope: worst,
        interior_scale,
        ratio: if interior_scale > 0.0 {
            worst / interior_scale
        } else {
            0.0
        },
        at,
    }
}

/// Smooth fit in `y` under the Feller condition, across refinement levels.
/// Passes when the finest ratio to the interior scale is at most 0.05 and
/// the boundary slope decreases under each refinement.
pub fn check_smooth_fit_y(
    levels: &[(&PriceSurface, &ExerciseBoundary)],
    params: &HestonParams,
) -> ReportEntry {
    let anchor = "If 2κθ ≥ σ², … ∂/∂y P(t,b(t,y),y)=0";
    if !feller_satisfied(params) {
        return ReportEntry::new("smooth_fit_y", anchor, 0.0, 0.05, Status::NotApplicable)
            .with_detail("Feller condition fails; the property is only claimed under it");
    }
    if levels.is_empty() || levels.iter().any(|(s, _)| s.kind != SurfaceKind::American) {
        return ReportEntry::new("smooth_fit_y", anchor, 0.0, 0.05, Status::Inconclusive)
            .with_detail("requires American surfaces");
    }
    let window = FitWindow::default_for(levels[0].0);
    let slopes: Vec<YSlope> = levels
        .iter()
        .map(|(s, b)| smooth_fit_y_slope(s, b, &window))
        .collect();
    let last = slopes.last().unwrap();
    let decreasing = slopes
        .windows(2)
        .all(|w| w[1].boundary_slope < w[0].boundary_slope);
    ReportEntry::new(
        "smooth_fit_y",
        anchor,
        last.ratio,
        0.05,
        Status::from_bool(last.ratio <= 0.05 && decreasing),
    )
    .with_detail(format!(
        "boundary slopes {:?}; interior scale {:.4}; window {window:?}; finest worst at (t, y) index {:?}",
        slopes.iter().map(|s| s.boundary_slope).collect::<Vec<_>>(),
        last.interior_scale,
        last.at
    ))
    .with_config(surface_config(levels.last().unwrap().0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PutSpec;
    use crate::pde::{build_lattice, LatticeConfig, SolverDiagnostics, YGrading};

    fn surface_from(f: impl Fn(f64, f64, f64) -> f64, kind: SurfaceKind) -> PriceSurface {
        let lattice = build_lattice(&LatticeConfig {
            maturity: 1.0,
            nt: 4,
            x_min: 40f64.ln(),
            x_max: 250f64.ln(),
            nx: 201,
            y_min: 0.0,
            y_max: 0.4,
            ny: 21,
            grading: YGrading::Uniform,
        })
        .unwrap();
        let mut values = Vec::with_capacity(lattice.len());
        for t in &lattice.t_nodes {
            for x in &lattice.x_nodes {
                for y in &lattice.y_nodes {
                    values.push(f(*t, x.exp(), *y));
                }
            }
        }
        PriceSurface {
            lattice,
            params: HestonParams::desk(),
            spec: PutSpec::new(100.0, 1.0).unwrap(),
            kind,
            values,
            diagnostics: SolverDiagnostics {
                penalty_epsilon: Some(0.01),
                ..Default::default()
            },
        }
    }

    #[test]
    fn constant_in_y_has_zero_violation() {
        let s = surface_from(|_, s, _| (100.0 - s).max(0.0), SurfaceKind::American);
        let e = check_monotone_y(&s);
        assert!(e.passed());
        assert_eq!(e.measured, 0.0);
        let (m, rep) = check_moduli(&s);
        assert!(m.passed() || rep.holder_alpha.is_nan());
        assert_eq!(rep.lipschitz_y, 0.0);
    }

    #[test]
    fn decreasing_column_is_located() {
        let mut s = surface_from(|_, s, y| (100.0 - s).max(0.0) + y, SurfaceKind::American);
        let n = 2 * s.lattice.n_space() + s.lattice.idx(30, 5);
        s.values[n] += 1.0;
        let e = check_monotone_y(&s);
        assert!(!e.passed());
        assert!(e.detail.contains("(2, 30, 5)"), "{}", e.detail);
    }

    #[test]
    fn payoff_is_convex_with_slopes_in_range() {
        let s = surface_from(|_, s, _| (100.0 - s).max(0.0), SurfaceKind::American);
        let e = check_convex_s(&s);
        assert!(e.passed(), "{}", e.detail);
        assert!(e.measured >= 0.0);
    }

    #[test]
    fn concave_bump_is_located() {
        let mut s = surface_from(|_, s, _| (100.0 - s).max(0.0), SurfaceKind::American);
        let n = s.lattice.n_space() + s.lattice.idx(150, 3);
        s.values[n] += 0.5;
        let e = check_convex_s(&s);
        assert!(!e.passed());
        assert!(e.detail.contains("(1, 150, 3)"), "{}", e.detail);
    }

    #[test]
    fn t_increase_detected() {
        let s = surface_from(|t, s, _| (100.0 - s).max(0.0) + t, SurfaceKind::American);
        assert!(!check_monotone_t(&s).passed());
        let s = surface_from(|t, s, _| (100.0 - s).max(0.0) + 1.0 - t, SurfaceKind::American);
        assert!(check_monotone_t(&s).passed());
        let e = surface_from(|t, s, _| (100.0 - s).max(0.0) + t, SurfaceKind::European);
        assert_eq!(check_monotone_t(&e).status, Status::NotApplicable);
    }

    #[test]
    fn smooth_convex_function_is_strictly_convex_everywhere() {
        let s = surface_from(|_, s, _| 1e4 / s, SurfaceKind::European);
        let e = check_strict_convexity(&s, None, 1e-4);
        assert!(e.passed(), "{}", e.detail);
        // the payoff has zero curvature below the strike
        let p = surface_from(|_, s, _| (100.0 - s).max(0.0) + 1.0, SurfaceKind::European);
        assert!(!check_strict_convexity(&p, None, 1e-4).passed());
    }

    #[test]
    fn quadratic_derivative_is_exact() {
        let f = |x: f64| 2.0 - 3.0 * x + 0.5 * x * x;
        let pts = [1.0, 1.7, 2.1].map(|x| (x, f(x)));
        assert!((quadratic_derivative(pts, 0.8) - (-3.0 + 0.8)).abs() < 1e-12);
    }

    #[test]
    fn smooth_fit_on_constructed_tangent_surface() {
        // u = ψ below 80, and a quadratic tangent to ψ above
        let f = |_: f64, s: f64, _: f64| {
            if s <= 80.0 {
                100.0 - s
            } else {
                20.0 - (s - 80.0) + 0.01 * (s - 80.0).powi(2)
            }
        };
        let s = surface_from(f, SurfaceKind::American);
        let b = crate::boundary::extract_boundary(&s, 0.02).unwrap();
        let w = FitWindow {
            t_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        };
        let g = smooth_fit_s_gap(&s, &b, &w);
        assert!(g.gap < 0.05, "{g:?}");
        // below the boundary the slope is exactly −1
        let l = &s.lattice;
        let j = Lattice::cell(&l.x_nodes, 70f64.ln());
        let slope = (s.value(0, j + 1, 3) - s.value(0, j, 3))
            / (l.x_nodes[j + 1].exp() - l.x_nodes[j].exp());
        assert!((slope + 1.0).abs() < 1e-12);
        let y = smooth_fit_y_slope(&s, &b, &w);
        assert_eq!(y.boundary_slope, 0.0);
    }

    #[test]
    fn european_smooth_fit_is_inconclusive() {
        let s = surface_from(|_, s, _| 1e4 / s, SurfaceKind::European);
        let a = surface_from(|_, s, _| (100.0 - s).max(0.0), SurfaceKind::American);
        let b = crate::boundary::extract_boundary(&a, 0.02).unwrap();
        assert_eq!(check_smooth_fit_s(&[(&s, &b)]).status, Status::Inconclusive);
    }

    #[test]
    fn smooth_fit_y_not_applicable_without_feller() {
        let mut p = HestonParams::desk();
        p.sigma = 0.6;
        assert_eq!(check_smooth_fit_y(&[], &p).status, Status::NotApplicable);
    }

    #[test]
    fn holder_fit_recovers_square_root() {
        let s = surface_from(|_, s, y| (100.0 - s).max(0.0) + y.sqrt(), SurfaceKind::European);
        let m = measure_moduli(&s);
        assert!((m.holder_alpha - 0.5).abs() < 1e-9, "{}", m.holder_alpha);
    }
}
