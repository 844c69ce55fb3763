use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HestonParams, PutSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum YGrading {
    #[default]
    Uniform,
    /// Node `k` at `y_max·(k/(ny−1))²`, clustering nodes near `y = 0`.
    Sqrt,
}

/// Explicit bounds and node counts for a `(t, x, y)` lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub maturity: f64,
    /// Number of time nodes (steps + 1).
    pub nt: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    #[serde(default)]
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
    #[serde(default)]
    pub grading: YGrading,
}

/// A tensor-product grid: uniform in `t` and `x`, uniform or graded in `y`,
/// with `y_nodes[0] = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub t_nodes: Vec<f64>,
    pub x_nodes: Vec<f64>,
    pub y_nodes: Vec<f64>,
    pub dt: f64,
    pub dx: f64,
    pub grading: YGrading,
}

pub fn build_lattice(config: &LatticeConfig) -> Result<Lattice> {
    let c = config;
    if c.nt < 2 || c.nx < 2 || c.ny < 2 {
        return Err(Error::InvalidLattice(format!(
            "need at least 2 nodes per axis, got nt={} nx={} ny={}",
            c.nt, c.nx, c.ny
        )));
    }
    if c.y_min != 0.0 {
        return Err(Error::InvalidLattice(format!(
            "variance axis must start at 0, got y_min={}",
            c.y_min
        )));
    }
    if !(c.maturity.is_finite() && c.maturity > 0.0) {
        return Err(Error::InvalidLattice(format!(
            "maturity must be > 0, got {}",
            c.maturity
        )));
    }
    if !(c.x_min.is_finite() && c.x_max.is_finite() && c.x_max > c.x_min) {
        return Err(Error::InvalidLattice(format!(
            "x bounds must satisfy x_min < x_max, got [{}, {}]",
            c.x_min, c.x_max
        )));
    }
    if !(c.y_max.is_finite() && c.y_max > 0.0) {
        return Err(Error::InvalidLattice(format!(
            "y_max must be > 0, got {}",
            c.y_max
        )));
    }
    let dt = c.maturity / (c.nt - 1) as f64;
    let dx = (c.x_max - c.x_min) / (c.nx - 1) as f64;
    let mut t_nodes: Vec<f64> = (0..c.nt).map(|i| i as f64 * dt).collect();
    t_nodes[c.nt - 1] = c.maturity;
    let mut x_nodes: Vec<f64> = (0..c.nx).map(|i| c.x_min + i as f64 * dx).collect();
    x_nodes[c.nx - 1] = c.x_max;
    let last = (c.ny - 1) as f64;
    let y_nodes = (0..c.ny)
        .map(|k| {
            let f = k as f64 / last;
            match c.grading {
                YGrading::Uniform => c.y_max * f,
                YGrading::Sqrt => c.y_max * f * f,
            }
        })
        .collect();
    Ok(Lattice {
        t_nodes,
        x_nodes,
        y_nodes,
        dt,
        dx,
        grading: c.grading,
    })
}

impl Lattice {
    pub fn nt(&self) -> usize {
        self.t_nodes.len()
    }
    pub fn nx(&self) -> usize {
        self.x_nodes.len()
    }
    pub fn ny(&self) -> usize {
        self.y_nodes.len()
    }
    pub fn n_space(&self) -> usize {
        self.nx() * self.ny()
    }
    pub fn len(&self) -> usize {
        self.nt() * self.n_space()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Flat index of a spatial node; `y` runs fastest.
    pub fn idx(&self, i: usize, k: usize) -> usize {
        i * self.ny() + k
    }
    pub fn maturity(&self) -> f64 {
        *self.t_nodes.last().unwrap()
    }
    pub fn x_min(&self) -> f64 {
        self.x_nodes[0]
    }
    pub fn x_max(&self) -> f64 {
        *self.x_nodes.last().unwrap()
    }
    pub fn y_max(&self) -> f64 {
        *self.y_nodes.last().unwrap()
    }

    /// Index `j` with `nodes[j] <= v < nodes[j+1]`, clamped to valid cells.
    pub fn cell(nodes: &[f64], v: f64) -> usize {
        let n = nodes.len();
        match nodes.binary_search_by(|p| p.partial_cmp(&v).unwrap()) {
            Ok(j) => j.min(n - 2),
            Err(0) => 0,
            Err(j) => (j - 1).min(n - 2),
        }
    }

    pub fn config(&self) -> LatticeConfig {
        LatticeConfig {
            maturity: self.maturity(),
            nt: self.nt(),
            x_min: self.x_min(),
            x_max: self.x_max(),
            nx: self.nx(),
            y_min: 0.0,
            y_max: self.y_max(),
            ny: self.ny(),
            grading: self.grading,
        }
    }
}

/// Node counts and optional bounds, resolved against a contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// Number of time steps.
    pub steps: usize,
    /// Log-price half width around the strike and spot.
    #[serde(default)]
    pub x_half_width: Option<f64>,
    #[serde(default)]
    pub y_max: Option<f64>,
    #[serde(default)]
    pub grading: YGrading,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::desk()
    }
}

impl GridSpec {
    /// 161 × 81 nodes in `(x, y)`, 100 time steps.
    pub fn desk() -> Self {
        Self {
            nx: 161,
            ny: 81,
            steps: 100,
            x_half_width: None,
            y_max: None,
            grading: YGrading::Uniform,
        }
    }

    /// Halves all mesh sizes (`levels` times).
    pub fn refined(&self, levels: u32) -> Self {
        let f = 1usize << levels;
        Self {
            nx: (self.nx - 1) * f + 1,
            ny: (self.ny - 1) * f + 1,
            steps: self.steps * f,
            ..*self
        }
    }

    /// Doubles all mesh sizes; node counts must allow it.
    pub fn coarsened(&self) -> Option<Self> {
        if (self.nx - 1) % 2 != 0 || (self.ny - 1) % 2 != 0 || self.steps % 2 != 0 {
            return None;
        }
        Some(Self {
            nx: (self.nx - 1) / 2 + 1,
            ny: (self.ny - 1) / 2 + 1,
            steps: self.steps / 2,
            ..*self
        })
    }

    /// Default half width `5·√(max(θ, y0)·T)`, never below `4·√(θT)`.
    pub fn half_width(&self, params: &HestonParams, spec: &PutSpec, y0: f64) -> f64 {
        let floor = 4.0 * (params.theta * spec.maturity).sqrt();
        let default = 5.0 * (params.theta.max(y0) * spec.maturity).sqrt();
        self.x_half_width.unwrap_or(default.max(0.5)).max(floor)
    }

    /// Default `y_max = 20·max(θ, y0)`, never below `3·max(θ, y0)`.
    pub fn resolved_y_max(&self, params: &HestonParams, y0: f64) -> f64 {
        let scale = params.theta.max(y0);
        let floor = 3.0 * scale;
        self.y_max.unwrap_or((20.0 * scale).max(0.2)).max(floor)
    }

    pub fn lattice_config(
        &self,
        params: &HestonParams,
        spec: &PutSpec,
        spot: f64,
        y0: f64,
    ) -> LatticeConfig {
        let hw = self.half_width(params, spec, y0);
        let lk = spec.strike.ln();
        let ls = spot.ln();
        LatticeConfig {
            maturity: spec.maturity,
            nt: self.steps + 1,
            x_min: lk.min(ls) - hw,
            x_max: lk.max(ls) + hw,
            nx: self.nx,
            y_min: 0.0,
            y_max: self.resolved_y_max(params, y0),
            ny: self.ny,
            grading: self.grading,
        }
    }

    pub fn build(
        &self,
        params: &HestonParams,
        spec: &PutSpec,
        spot: f64,
        y0: f64,
    ) -> Result<Lattice> {
        build_lattice(&self.lattice_config(params, spec, spot, y0))
    }
}
