use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{HestonParams, PutSpec};
use crate::pde::lattice::Lattice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    European,
    American,
}

impl SurfaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SurfaceKind::European => "european",
            SurfaceKind::American => "american",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeScheme {
    #[default]
    Implicit,
    /// Crank–Nicolson after `rannacher_steps` steps, each replaced by two
    /// implicit half steps.
    CrankNicolson { rannacher_steps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SolverDiagnostics {
    pub scheme: TimeScheme,
    pub time_steps: usize,
    pub newton_iterations: usize,
    pub max_newton_per_step: usize,
    pub linear_iterations: usize,
    /// Largest final residual over all time steps.
    pub final_residual: f64,
    pub m_matrix_violations: usize,
    /// `min(u − ψ)` over all non-terminal nodes (American only).
    pub min_obstacle_gap: Option<f64>,
    pub penalty_epsilon: Option<f64>,
    pub oracle_mode: bool,
    pub degenerate_rate: bool,
}

/// Value function `u(t, x, y) = P(t, eˣ, y)` on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSurface {
    pub lattice: Lattice,
    pub params: HestonParams,
    pub spec: PutSpec,
    pub kind: SurfaceKind,
    /// Indexed `[t][x][y]`, `y` fastest.
    pub values: Vec<f64>,
    pub diagnostics: SolverDiagnostics,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    kind: SurfaceKind,
    params: &'a HestonParams,
    spec: &'a PutSpec,
    lattice: crate::pde::lattice::LatticeConfig,
    diagnostics: &'a SolverDiagnostics,
}

impl PriceSurface {
    pub fn value(&self, ti: usize, i: usize, k: usize) -> f64 {
        self.values[ti * self.lattice.n_space() + self.lattice.idx(i, k)]
    }

    pub fn slice(&self, ti: usize) -> &[f64] {
        let n = self.lattice.n_space();
        &self.values[ti * n..(ti + 1) * n]
    }

    /// Obstacle `ψ(x_i) = (K − e^{x_i})⁺`.
    pub fn obstacle(&self, i: usize) -> f64 {
        self.spec.payoff_log(self.lattice.x_nodes[i])
    }

    /// Value at `(t_ti, ln spot, y)` by cubic Lagrange interpolation in `x`
    /// and `y`.
    pub fn value_at(&self, ti: usize, spot: f64, y: f64) -> f64 {
        let l = &self.lattice;
        let (xs, wx) = lagrange4(&l.x_nodes, spot.ln());
        let (ys, wy) = lagrange4(&l.y_nodes, y);
        let mut acc = 0.0;
        for (a, &i) in xs.iter().enumerate() {
            for (b, &k) in ys.iter().enumerate() {
                acc += wx[a] * wy[b] * self.value(ti, i, k);
            }
        }
        acc
    }

    /// Price at time 0.
    pub fn price(&self, spot: f64, y0: f64) -> f64 {
        self.value_at(0, spot, y0)
    }

    /// CSV with header `t,x,y,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,y,value")?;
        let l = &self.lattice;
        for (ti, t) in l.t_nodes.iter().enumerate() {
            for (i, x) in l.x_nodes.iter().enumerate() {
                for (k, y) in l.y_nodes.iter().enumerate() {
                    writeln!(w, "{t},{x},{y},{}", self.value(ti, i, k))?;
                }
            }
        }
        Ok(())
    }

    /// JSON sidecar: lattice, parameters and diagnostics.
    pub fn sidecar_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Sidecar {
            kind: self.kind,
            params: &self.params,
            spec: &self.spec,
            lattice: self.lattice.config(),
            diagnostics: &self.diagnostics,
        })?)
    }
}

/// Four-point Lagrange stencil around `v`, clamped to the node range.
pub(crate) fn lagrange4(nodes: &[f64], v: f64) -> (Vec<usize>, Vec<f64>) {
    let n = nodes.len();
    if n < 4 {
        let j = Lattice::cell(nodes, v);
        let f = (v - nodes[j]) / (nodes[j + 1] - nodes[j]);
        return (vec![j, j + 1], vec![1.0 - f, f]);
    }
    let j = Lattice::cell(nodes, v);
    let start = j.saturating_sub(1).min(n - 4);
    let idx: Vec<usize> = (start..start + 4).collect();
    let w = idx
        .iter()
        .map(|&a| {
            idx.iter()
                .filter(|&&b| b != a)
                .fold(1.0, |acc, &b| acc * (v - nodes[b]) / (nodes[a] - nodes[b]))
        })
        .collect();
    (idx, w)
}
