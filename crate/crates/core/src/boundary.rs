//! Early-exercise boundary `b(t, y) = inf{s > 0 : P(t, s, y) > (K − s)⁺}`
//! extracted from an American surface, and the structural checks on it.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::report::{ReportEntry, Status};
use crate::error::{invalid, Error, Result};
use crate::pde::{Lattice, PriceSurface, SurfaceKind};

/// Critical spot prices on the `(t, y)` nodes of a lattice, `t < T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExerciseBoundary {
    pub t_nodes: Vec<f64>,
    pub y_nodes: Vec<f64>,
    /// Log-price nodes of the source lattice, used for cell widths.
    pub x_nodes: Vec<f64>,
    /// Indexed `[t][y]`.
    pub b_values: Vec<f64>,
    /// Columns where no contact with the obstacle was found.
    pub unresolved: Vec<bool>,
    pub tol: f64,
    pub strike: f64,
}

impl ExerciseBoundary {
    pub fn nt(&self) -> usize {
        self.t_nodes.len()
    }

    pub fn ny(&self) -> usize {
        self.y_nodes.len()
    }

    pub fn b(&self, ti: usize, k: usize) -> f64 {
        self.b_values[ti * self.ny() + k]
    }

    pub fn is_unresolved(&self, ti: usize, k: usize) -> bool {
        self.unresolved[ti * self.ny() + k]
    }

    pub fn resolved_count(&self) -> usize {
        self.unresolved.iter().filter(|u| !**u).count()
    }

    /// Width in spot of the lattice cell containing `s`.
    pub fn cell_width(&self, s: f64) -> f64 {
        let j = Lattice::cell(&self.x_nodes, s.ln());
        self.x_nodes[j + 1].exp() - self.x_nodes[j].exp()
    }

    /// `b` at `(t, y)`: linear in `y` between nodes (flat outside), and
    /// linear in `t` between boundary times. Beyond the last boundary time
    /// the boundary is interpolated towards `b_maturity` at `t = maturity`.
    pub fn interpolate(&self, t: f64, y: f64, maturity: f64, b_maturity: f64) -> f64 {
        let at_row = |ti: usize| -> f64 {
            let ny = self.ny();
            if y <= self.y_nodes[0] {
                return self.b(ti, 0);
            }
            if y >= self.y_nodes[ny - 1] {
                return self.b(ti, ny - 1);
            }
            let k = Lattice::cell(&self.y_nodes, y);
            let f = (y - self.y_nodes[k]) / (self.y_nodes[k + 1] - self.y_nodes[k]);
            (1.0 - f) * self.b(ti, k) + f * self.b(ti, k + 1)
        };
        let nt = self.nt();
        let last = self.t_nodes[nt - 1];
        if t >= last {
            let f = ((t - last) / (maturity - last)).clamp(0.0, 1.0);
            return (1.0 - f) * at_row(nt - 1) + f * b_maturity;
        }
        if nt == 1 {
            return at_row(0);
        }
        let i = Lattice::cell(&self.t_nodes, t);
        let f = ((t - self.t_nodes[i]) / (self.t_nodes[i + 1] - self.t_nodes[i])).clamp(0.0, 1.0);
        (1.0 - f) * at_row(i) + f * at_row(i + 1)
    }

    /// CSV with header `t,y,b,flag`; `flag` is `resolved` or `unresolved`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,y,b,flag")?;
        for (ti, t) in self.t_nodes.iter().enumerate() {
            for (k, y) in self.y_nodes.iter().enumerate() {
                let flag = if self.is_unresolved(ti, k) {
                    "unresolved"
                } else {
                    "resolved"
                };
                writeln!(w, "{t},{y},{},{flag}", self.b(ti, k))?;
            }
        }
        Ok(())
    }
}

/// Default extraction tolerance: twice the penalty scale.
pub fn default_tol(surface: &PriceSurface) -> f64 {
    2.0 * surface
        .diagnostics
        .penalty_epsilon
        .unwrap_or(1e-6 * surface.spec.strike)
}

/// Extracts `b(t_i, y_k)` for every `t_i < T`.
///
/// For each column the contact set `{u ≤ ψ + tol}` is followed upward from
/// the first interior log-price node while `s < K`. The boundary is placed
/// where `u − ψ` crosses `tol`, by linear interpolation between the last
/// contact node and the next one. Columns with no interior contact get
/// `spot(x_min)` and the unresolved flag.
pub fn extract_boundary(surface: &PriceSurface, tol: f64) -> Result<ExerciseBoundary> {
    if surface.kind != SurfaceKind::American {
        return Err(Error::SurfaceKind {
            expected: SurfaceKind::American.name(),
            got: surface.kind.name(),
        });
    }
    if let Some(eps) = surface.diagnostics.penalty_epsilon {
        if !(tol > eps) {
            return Err(invalid(
                "tol",
                format!("must exceed the penalty scale {eps}, got {tol}"),
            ));
        }
    } else if !(tol > 0.0) {
        return Err(invalid("tol", format!("must be > 0, got {tol}")));
    }
    let l = &surface.lattice;
    let (nt, nx, ny) = (l.nt(), l.nx(), l.ny());
    let k_strike = surface.spec.strike;
    let s_min = l.x_min().exp();
    let mut b_values = Vec::with_capacity((nt - 1) * ny);
    let mut unresolved = Vec::with_capacity((nt - 1) * ny);
    for ti in 0..nt - 1 {
        for k in 0..ny {
            let w = |i: usize| surface.value(ti, i, k) - surface.obstacle(i);
            let below_strike = |i: usize| l.x_nodes[i].exp() < k_strike;
            let mut last = None;
            let mut i = 1;
            while i < nx - 1 && below_strike(i) && w(i) <= tol {
                last = Some(i);
                i += 1;
            }
            match last {
                None => {
                    b_values.push(s_min);
                    unresolved.push(true);
                }
                Some(j) => {
                    let (w0, w1) = (w(j), w(j + 1));
                    let f = if w1 > w0 {
                        ((tol - w0) / (w1 - w0)).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let x = l.x_nodes[j] + f * (l.x_nodes[j + 1] - l.x_nodes[j]);
                    let mut b = x.exp();
                    if b >= k_strike {
                        b = l.x_nodes[j].exp();
                    }
                    b_values.push(b);
                    unresolved.push(false);
                }
            }
        }
    }
    Ok(ExerciseBoundary {
        t_nodes: l.t_nodes[..nt - 1].to_vec(),
        y_nodes: l.y_nodes.clone(),
        x_nodes: l.x_nodes.clone(),
        b_values,
        unresolved,
        tol,
        strike: k_strike,
    })
}

/// Worst violation of a pairwise order constraint, in spot and in cells.
#[derive(Debug, Clone, Copy, Default)]
struct Worst {
    spot: f64,
    cells: f64,
    at: Option<(usize, usize)>,
}

impl Worst {
    fn update(&mut self, excess: f64, cell: f64, at: (usize, usize)) {
        if excess > 0.0 && excess / cell > self.cells {
            self.spot = excess;
            self.cells = excess / cell;
            self.at = Some(at);
        }
    }
}

/// Checks `t ↦ b(t, y)` nondecreasing and `y ↦ b(t, y)` nonincreasing. A
/// violation counts only beyond one spot cell at the larger of the two
/// values. Unresolved columns are skipped.
pub fn check_boundary_monotone(b: &ExerciseBoundary) -> ReportEntry {
    let (nt, ny) = (b.nt(), b.ny());
    let cell = |v1: f64, v2: f64| b.cell_width(v1.max(v2));
    let mut in_t = Worst::default();
    let mut in_y = Worst::default();
    for ti in 0..nt {
        for k in 0..ny {
            if b.is_unresolved(ti, k) {
                continue;
            }
            let v = b.b(ti, k);
            if ti + 1 < nt && !b.is_unresolved(ti + 1, k) {
                let next = b.b(ti + 1, k);
                in_t.update(v - next, cell(v, next), (ti, k));
            }
            if k + 1 < ny && !b.is_unresolved(ti, k + 1) {
                let up = b.b(ti, k + 1);
                in_y.update(up - v, cell(v, up), (ti, k));
            }
        }
    }
    let measured = in_t.cells.max(in_y.cells);
    let status = if b.resolved_count() == 0 {
        Status::Inconclusive
    } else {
        Status::from_bool(measured <= 1.0)
    };
    ReportEntry::new(
        "boundary_monotone",
        "t ↦ b(t,y) is nondecreasing and right continuous; y ↦ b(t,y) is nonincreasing and left continuous",
        measured,
        1.0,
        status,
    )
    .with_detail(format!(
        "cells; t-inversion {:.3e} at {:?}, y-inversion {:.3e} at {:?} (spot units {:.3e}, {:.3e})",
        in_t.cells, in_t.at, in_y.cells, in_y.at, in_t.spot, in_y.spot
    ))
}

/// Checks `0 < b < K` at every node and `b ≥ spot(x_min)`.
pub fn check_boundary_range(b: &ExerciseBoundary) -> ReportEntry {
    let s_min = b.x_nodes[0].exp();
    let mut bad = 0usize;
    let mut first = None;
    let mut worst: f64 = 0.0;
    for (n, &v) in b.b_values.iter().enumerate() {
        let excess = (v - b.strike).max(0.0) + (s_min - v).max(0.0);
        if !(v > 0.0 && v < b.strike && v >= s_min) {
            bad += 1;
            first.get_or_insert((n / b.ny(), n % b.ny()));
            worst = worst.max(excess.max(f64::MIN_POSITIVE));
        }
    }
    let unresolved = b.unresolved.iter().filter(|u| **u).count();
    ReportEntry::new(
        "boundary_range",
        "We have b(t,y)>0; since P>0, we have b(t,y) ∈ [0,K)",
        worst,
        0.0,
        Status::from_bool(bad == 0),
    )
    .with_detail(format!(
        "{bad} nodes outside (0, K), first at {first:?}; {unresolved} unresolved columns"
    ))
}

/// Discrete t-sections check `ℰ_t = ⋂_{u>t} ℰ_u`.
///
/// On the grid this means `b(t_i, y) ≤ min_{u>t_i} b(u, y)` and that the
/// minimum over later times is attained at the next time node `t_{i+1}`.
/// Both are required within one spot cell. The largest right-limit gap
/// `b(t_{i+1}, y) − b(t_i, y)` is reported in the detail.
pub fn check_t_sections(b: &ExerciseBoundary) -> ReportEntry {
    let (nt, ny) = (b.nt(), b.ny());
    let mut inclusion = Worst::default();
    let mut attained = Worst::default();
    let mut gap_cells: f64 = 0.0;
    for k in 0..ny {
        // suffix minima over later times, resolved nodes only
        let mut later_min = f64::INFINITY;
        for ti in (0..nt).rev() {
            if b.is_unresolved(ti, k) {
                continue;
            }
            let v = b.b(ti, k);
            if later_min.is_finite() {
                let c = b.cell_width(v.max(later_min));
                inclusion.update(v - later_min, c, (ti, k));
                if ti + 1 < nt && !b.is_unresolved(ti + 1, k) {
                    let next = b.b(ti + 1, k);
                    attained.update(next - later_min, b.cell_width(next), (ti, k));
                    gap_cells = gap_cells.max((next - v) / b.cell_width(v.max(next)));
                }
            }
            later_min = later_min.min(v);
        }
    }
    let measured = inclusion.cells.max(attained.cells);
    let status = if b.resolved_count() == 0 {
        Status::Inconclusive
    } else {
        Status::from_bool(measured <= 1.0)
    };
    ReportEntry::new(
        "t_sections",
        "ℰ_t = ⋂_{u>t} ℰ_u",
        measured,
        1.0,
        status,
    )
    .with_detail(format!(
        "cells; inclusion {:.3e} at {:?}, right limit not at next node {:.3e} at {:?}; \
         largest one-step right-limit gap {gap_cells:.2} cells",
        inclusion.cells, inclusion.at, attained.cells, attained.at
    ))
}

/// One row of the jump census.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRow {
    pub nt: usize,
    pub ny: usize,
    pub nx: usize,
    /// y-columns with some one-step t-increment above `threshold_cells`.
    pub jump_columns: usize,
    pub resolved_columns: usize,
    pub fraction: f64,
}

/// Jump census across nested lattices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpCensus {
    pub threshold_cells: f64,
    pub rows: Vec<CensusRow>,
    /// True when the census fraction never increases along `rows`.
    pub nonincreasing: bool,
}

impl JumpCensus {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Counts, for each boundary, the y-columns whose one-step t-increment
/// exceeds five spot cells, and whether the fraction of such columns falls
/// under refinement. Boundaries are expected coarse to fine.
pub fn jump_census(boundaries: &[ExerciseBoundary]) -> JumpCensus {
    const THRESHOLD: f64 = 5.0;
    let rows: Vec<CensusRow> = boundaries
        .iter()
        .map(|b| {
            let mut jumps = 0;
            let mut resolved = 0;
            for k in 0..b.ny() {
                if (0..b.nt()).all(|ti| b.is_unresolved(ti, k)) {
                    continue;
                }
                resolved += 1;
                let jumped = (0..b.nt().saturating_sub(1)).any(|ti| {
                    if b.is_unresolved(ti, k) || b.is_unresolved(ti + 1, k) {
                        return false;
                    }
                    let (v, next) = (b.b(ti, k), b.b(ti + 1, k));
                    (next - v) > THRESHOLD * b.cell_width(v.max(next))
                });
                if jumped {
                    jumps += 1;
                }
            }
            CensusRow {
                nt: b.nt(),
                ny: b.ny(),
                nx: b.x_nodes.len(),
                jump_columns: jumps,
                resolved_columns: resolved,
                fraction: if resolved == 0 {
                    0.0
                } else {
                    jumps as f64 / resolved as f64
                },
            }
        })
        .collect();
    let nonincreasing = rows.windows(2).all(|w| w[1].fraction <= w[0].fraction);
    JumpCensus {
        threshold_cells: THRESHOLD,
        rows,
        nonincreasing,
    }
}
