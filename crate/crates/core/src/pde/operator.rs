//! Finite-difference discretization of the log-price generator minus `r`.
//!
//! Second-order terms use central differences, the cross derivative the
//! 7-point stencil whose diagonal pair is chosen by the sign of `ρ`, and the
//! drift terms are central where that keeps every off-diagonal coupling
//! nonnegative and upwinded otherwise.
//!
//! Row types:
//! - `x_min` / `x_max` columns carry an empty row; the solver fills them
//!   (a Dirichlet datum at `x_min`, zero x-slope lagged one step at `x_max`).
//! - `y = 0`: the degenerate transport operator `(r−δ)∂x + κθ∂y − r`,
//!   one-sided.
//! - `y = y_max`: `∂²u/∂y² = 0`; the cross term is dropped too and the
//!   variance drift is upwinded (it points inward since `y_max > θ`).

use crate::model::{generator_coeffs, HestonParams};
use crate::pde::lattice::Lattice;
use crate::pde::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Dirichlet,
    ZeroVariance,
    Interior,
    VarianceCap,
}

/// The assembled operator with row classification.
#[derive(Debug, Clone)]
pub struct DiscreteGenerator {
    pub matrix: CsrMatrix,
    pub kinds: Vec<RowKind>,
    /// Negative off-diagonal entries; nonzero means the M-matrix property
    /// is lost (typically `|ρ|` near 1 on a badly shaped cell).
    pub m_matrix_violations: usize,
}

impl DiscreteGenerator {
    pub fn is_dirichlet(&self) -> Vec<bool> {
        self.kinds.iter().map(|k| *k == RowKind::Dirichlet).collect()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.matrix.mul_vec(u, &mut out);
        out
    }
}

struct Row {
    entries: Vec<(usize, f64)>,
}

impl Row {
    fn add(&mut self, col: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((col, v));
        }
    }
}

/// Drift discretization along one axis: central if both resulting neighbor
/// weights stay nonnegative, upwind otherwise. `d_minus`/`d_plus` are the
/// diffusion weights already on the two neighbors, `h_minus`/`h_plus` the
/// spacings. Returns `(w_minus, w_center, w_plus)` for the drift alone.
fn drift_weights(b: f64, d_minus: f64, d_plus: f64, h_minus: f64, h_plus: f64) -> (f64, f64, f64) {
    let s = h_minus + h_plus;
    let cm = -b * h_plus / (h_minus * s);
    let cp = b * h_minus / (h_plus * s);
    let cc = b * (h_plus - h_minus) / (h_minus * h_plus);
    if d_minus + cm >= 0.0 && d_plus + cp >= 0.0 {
        (cm, cc, cp)
    } else if b > 0.0 {
        (0.0, -b / h_plus, b / h_plus)
    } else {
        (-b / h_minus, b / h_minus, 0.0)
    }
}

fn upwind(b: f64, h_minus: f64, h_plus: f64) -> (f64, f64, f64) {
    if b > 0.0 {
        (0.0, -b / h_plus, b / h_plus)
    } else {
        (-b / h_minus, b / h_minus, 0.0)
    }
}

/// Assembles the discrete `𝓛 − r` on the spatial nodes of `lattice`.
///
/// The coefficients are time-homogeneous; `t` is accepted for symmetry with
/// time-dependent boundary data.
pub fn assemble_operator(lattice: &Lattice, params: &HestonParams, _t: f64) -> DiscreteGenerator {
    let (nx, ny) = (lattice.nx(), lattice.ny());
    let h = lattice.dx;
    let ys = &lattice.y_nodes;
    let mut rows = Vec::with_capacity(nx * ny);
    let mut kinds = Vec::with_capacity(nx * ny);

    for i in 0..nx {
        for k in 0..ny {
            let me = lattice.idx(i, k);
            let mut row = Row {
                entries: Vec::with_capacity(10),
            };
            if i == 0 || i == nx - 1 {
                kinds.push(RowKind::Dirichlet);
                rows.push(row.entries);
                continue;
            }
            let y = ys[k];
            let g = generator_coeffs(0.0, y, params).expect("lattice variances are nonnegative");
            let xm = lattice.idx(i - 1, k);
            let xp = lattice.idx(i + 1, k);

            if k == 0 {
                kinds.push(RowKind::ZeroVariance);
                let (wm, wc, wp) = upwind(g.b_x, h, h);
                row.add(xm, wm);
                row.add(xp, wp);
                let mut center = wc;
                if g.b_y != 0.0 {
                    let hp = ys[1] - ys[0];
                    // b_y = κθ ≥ 0 at y = 0: forward difference
                    let w = g.b_y / hp;
                    row.add(lattice.idx(i, 1), w);
                    center -= w;
                }
                row.add(me, center + g.c);
                rows.push(row.entries);
                continue;
            }

            if k == ny - 1 {
                kinds.push(RowKind::VarianceCap);
                let dxx = g.a_xx / (h * h);
                let (wm, wc, wp) = drift_weights(g.b_x, dxx, dxx, h, h);
                row.add(xm, dxx + wm);
                row.add(xp, dxx + wp);
                let hm = ys[k] - ys[k - 1];
                let ym = lattice.idx(i, k - 1);
                let w = if g.b_y < 0.0 { -g.b_y / hm } else { g.b_y / hm };
                // backward difference: (u_k − u_{k−1})/hm
                row.add(ym, if g.b_y < 0.0 { w } else { -w });
                let center = -2.0 * dxx + wc + if g.b_y < 0.0 { -w } else { w };
                row.add(me, center + g.c);
                rows.push(row.entries);
                continue;
            }

            kinds.push(RowKind::Interior);
            let hm = ys[k] - ys[k - 1];
            let hp = ys[k + 1] - ys[k];
            let ym = lattice.idx(i, k - 1);
            let yp = lattice.idx(i, k + 1);

            // pure second-order weights on the four axis neighbors
            let mut w_xm = g.a_xx / (h * h);
            let mut w_xp = g.a_xx / (h * h);
            let mut w_ym = 2.0 * g.a_yy / (hm * (hm + hp));
            let mut w_yp = 2.0 * g.a_yy / (hp * (hm + hp));

            // cross term m·∂xy with m = 2·a_xy
            let m = 2.0 * g.a_xy;
            let mut corners: [(usize, f64); 2] = [(me, 0.0), (me, 0.0)];
            if m > 0.0 {
                let cp = 0.5 * m / (h * hp);
                let cm = 0.5 * m / (h * hm);
                corners = [
                    (lattice.idx(i + 1, k + 1), cp),
                    (lattice.idx(i - 1, k - 1), cm),
                ];
                w_xp -= cp;
                w_yp -= cp;
                w_xm -= cm;
                w_ym -= cm;
            } else if m < 0.0 {
                let cm = -0.5 * m / (h * hm);
                let cp = -0.5 * m / (h * hp);
                corners = [
                    (lattice.idx(i + 1, k - 1), cm),
                    (lattice.idx(i - 1, k + 1), cp),
                ];
                w_xp -= cm;
                w_ym -= cm;
                w_xm -= cp;
                w_yp -= cp;
            }

            let (dxm, dxc, dxp) = drift_weights(g.b_x, w_xm, w_xp, h, h);
            let (dym, dyc, dyp) = drift_weights(g.b_y, w_ym, w_yp, hm, hp);
            w_xm += dxm;
            w_xp += dxp;
            w_ym += dym;
            w_yp += dyp;

            let offdiag = [
                (xm, w_xm),
                (xp, w_xp),
                (ym, w_ym),
                (yp, w_yp),
                corners[0],
                corners[1],
            ];
            // consistency: every derivative stencil annihilates constants
            let mut center = dxc + dyc;
            let second_sum = 2.0 * g.a_xx / (h * h)
                + 2.0 * g.a_yy / (hm * hp)
                + if m > 0.0 {
                    -0.5 * m / (h * hp) - 0.5 * m / (h * hm)
                } else if m < 0.0 {
                    0.5 * m / (h * hm) + 0.5 * m / (h * hp)
                } else {
                    0.0
                };
            center -= second_sum;
            for (c, v) in offdiag {
                if c != me {
                    row.add(c, v);
                }
            }
            row.add(me, center + g.c);
            rows.push(row.entries);
        }
    }

    let matrix = CsrMatrix::from_rows(rows);
    let mut violations = 0;
    for r in 0..matrix.n() {
        for (c, v) in matrix.row(r) {
            if c != r && v < 0.0 {
                violations += 1;
            }
        }
    }
    DiscreteGenerator {
        matrix,
        kinds,
        m_matrix_violations: violations,
    }
}
