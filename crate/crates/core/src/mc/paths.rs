use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mc::smoothing::SmoothingFamily;
use crate::model::HestonParams;

/// Paths per work unit. Work is split by path index, never by thread, so
/// results do not depend on the thread count.
pub(crate) const CHUNK: usize = 1024;

/// Discretization of the variance (and log-price) dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathScheme {
    /// Euler with `Y⁺` in both drift and diffusion; stored variances are
    /// `Y⁺`.
    FullTruncation,
    /// Euler on the smoothed system driven by `fₙ`; stored variances are
    /// the raw iterates and may be negative.
    Smoothed { n: u32 },
}

/// Simulated trajectories. Matrices are path-major: entry `(p, j)` sits at
/// `p * times.len() + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub times: Vec<f64>,
    pub x_paths: Vec<f64>,
    pub y_paths: Vec<f64>,
    pub seed: u64,
    pub stream_ids: Vec<u64>,
    pub scheme: PathScheme,
    /// Euler substeps per interval of `times`.
    pub substeps: usize,
}

impl PathBatch {
    pub fn n_paths(&self) -> usize {
        self.stream_ids.len()
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn x(&self, path: usize, j: usize) -> f64 {
        self.x_paths[path * self.times.len() + j]
    }

    pub fn y(&self, path: usize, j: usize) -> f64 {
        self.y_paths[path * self.times.len() + j]
    }

    /// CSV with header `path_id,t,x,y`; `path_id` is the stream id.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "path_id,t,x,y")?;
        for (p, id) in self.stream_ids.iter().enumerate() {
            for (j, t) in self.times.iter().enumerate() {
                writeln!(w, "{id},{t},{},{}", self.x(p, j), self.y(p, j))?;
            }
        }
        Ok(())
    }
}

/// The generator for one path: ChaCha8 keyed by the master seed, with the
/// path's stream id selecting an independent stream.
pub(crate) fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One path's dynamics, shared by the simulators and the estimators.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Dynamics {
    params: HestonParams,
    scheme: PathScheme,
    smoothing: Option<SmoothingFamily>,
    rho_bar: f64,
}

impl Dynamics {
    pub(crate) fn new(params: &HestonParams, scheme: PathScheme) -> Result<Self> {
        params.validate()?;
        let smoothing = match scheme {
            PathScheme::FullTruncation => None,
            PathScheme::Smoothed { n } => Some(SmoothingFamily::new(n)?),
        };
        Ok(Self {
            params: *params,
            scheme,
            smoothing,
            rho_bar: (1.0 - params.rho * params.rho).sqrt(),
        })
    }

    /// Advances the raw state by `dt` with normals `z_w` (variance noise)
    /// and `z_bar` (independent asset noise).
    #[inline]
    fn step(&self, x: &mut f64, y: &mut f64, dt: f64, z_w: f64, z_bar: f64) {
        let p = &self.params;
        let (var, vol) = match &self.smoothing {
            None => {
                let v = y.max(0.0);
                (v, v.sqrt())
            }
            Some(f) => {
                let v = f.squared(*y);
                (v, v.sqrt())
            }
        };
        let sq = dt.sqrt();
        let z_b = p.rho * z_w + self.rho_bar * z_bar;
        *x += (p.r - p.delta - 0.5 * var) * dt + vol * sq * z_b;
        *y += p.kappa * (p.theta - var) * dt + p.sigma * vol * sq * z_w;
    }

    /// Stored variance for a raw state.
    #[inline]
    fn observed(&self, y: f64) -> f64 {
        match self.scheme {
            PathScheme::FullTruncation => y.max(0.0),
            PathScheme::Smoothed { .. } => y,
        }
    }

    /// Fills `xs`, `ys` (length `times.len()`) for one path.
    pub(crate) fn simulate_into(
        &self,
        rng: &mut ChaCha8Rng,
        x0: f64,
        y0: f64,
        times: &[f64],
        substeps: usize,
        xs: &mut [f64],
        ys: &mut [f64],
    ) {
        let (mut x, mut y) = (x0, y0);
        xs[0] = x;
        ys[0] = self.observed(y);
        for j in 1..times.len() {
            let dt = (times[j] - times[j - 1]) / substeps as f64;
            for _ in 0..substeps {
                let z_w: f64 = rng.sample(StandardNormal);
                let z_bar: f64 = rng.sample(StandardNormal);
                self.step(&mut x, &mut y, dt, z_w, z_bar);
            }
            xs[j] = x;
            ys[j] = self.observed(y);
        }
    }
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(invalid("times", "need at least two time points"));
    }
    if times[0] != 0.0 {
        return Err(invalid("times", "grid must start at 0"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || !times.iter().all(|t| t.is_finite()) {
        return Err(invalid("times", "grid must be strictly increasing"));
    }
    Ok(())
}

/// Uniform grid `0, T/m, …, T`.
pub fn uniform_times(maturity: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals)
        .map(|j| maturity * j as f64 / intervals as f64)
        .collect()
}

/// Options shared by the path simulators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub n_paths: usize,
    pub seed: u64,
    /// Euler substeps per interval of the output grid.
    pub substeps: usize,
    /// Stream id of the first path; path `p` uses `first_stream + p`.
    pub first_stream: u64,
}

impl SimulationSpec {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            substeps: 1,
            first_stream: 0,
        }
    }
}

pub(crate) fn simulate(
    params: &HestonParams,
    x0: f64,
    y0: f64,
    times: &[f64],
    sim: &SimulationSpec,
    scheme: PathScheme,
) -> Result<PathBatch> {
    check_times(times)?;
    if sim.n_paths < 1 {
        return Err(invalid("n_paths", "must be >= 1"));
    }
    if sim.substeps < 1 {
        return Err(invalid("substeps", "must be >= 1"));
    }
    if !(y0.is_finite() && y0 >= 0.0) {
        return Err(invalid("y0", format!("must be >= 0, got {y0}")));
    }
    if !x0.is_finite() {
        return Err(invalid("x0", "must be finite"));
    }
    let dyn_ = Dynamics::new(params, scheme)?;
    let nt = times.len();
    let mut xs = vec![0.0; sim.n_paths * nt];
    let mut ys = vec![0.0; sim.n_paths * nt];
    xs.par_chunks_mut(CHUNK * nt)
        .zip(ys.par_chunks_mut(CHUNK * nt))
        .enumerate()
        .for_each(|(c, (xc, yc))| {
            for (q, (xp, yp)) in xc.chunks_mut(nt).zip(yc.chunks_mut(nt)).enumerate() {
                let stream = sim.first_stream + (c * CHUNK + q) as u64;
                let mut rng = path_rng(sim.seed, stream);
                dyn_.simulate_into(&mut rng, x0, y0, times, sim.substeps, xp, yp);
            }
        });
    Ok(PathBatch {
        times: times.to_vec(),
        x_paths: xs,
        y_paths: ys,
        seed: sim.seed,
        stream_ids: (0..sim.n_paths as u64).map(|p| sim.first_stream + p).collect(),
        scheme,
        substeps: sim.substeps,
    })
}

/// Variance paths under full-truncation Euler. The log-price component is
/// simulated too (from `x = 0`) so the variance paths coincide with those
/// of [`simulate_heston`] for the same seed and streams.
pub fn simulate_cir(
    params: &HestonParams,
    y0: f64,
    times: &[f64],
    sim: &SimulationSpec,
) -> Result<PathBatch> {
    simulate(params, 0.0, y0, times, sim, PathScheme::FullTruncation)
}

/// Joint `(X, Y)` paths under full-truncation Euler. The asset noise is
/// `B = ρW + √(1 − ρ²)W̄`.
pub fn simulate_heston(
    params: &HestonParams,
    s0: f64,
    y0: f64,
    times: &[f64],
    sim: &SimulationSpec,
) -> Result<PathBatch> {
    if !(s0.is_finite() && s0 > 0.0) {
        return Err(invalid("s0", format!("must be > 0, got {s0}")));
    }
    simulate(params, s0.ln(), y0, times, sim, PathScheme::FullTruncation)
}

/// Paths of the smoothed system `(Xⁿ, Yⁿ)`. Uses the same normals as
/// [`simulate_heston`] for equal seed and streams.
pub fn simulate_smoothed(
    n: u32,
    params: &HestonParams,
    x0: f64,
    y0: f64,
    times: &[f64],
    sim: &SimulationSpec,
) -> Result<PathBatch> {
    SmoothingFamily::new(n)?;
    simulate(params, x0, y0, times, sim, PathScheme::Smoothed { n })
}

/// Mean and standard error of per-path samples. Both passes sum chunk
/// totals in path order.
pub(crate) fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let ordered_sum = |f: &dyn Fn(f64) -> f64| -> f64 {
        samples
            .chunks(CHUNK)
            .map(|c| c.iter().map(|&v| f(v)).sum::<f64>())
            .fold(0.0, |a, b| a + b)
    };
    let mean = ordered_sum(&|v| v) / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = ordered_sum(&|v| (v - mean) * (v - mean)) / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        uniform_times(1.0, 50)
    }

    #[test]
    fn zero_vol_of_vol_at_long_run_level_is_constant() {
        let mut p = HestonParams::desk();
        p.sigma = 0.0;
        let b = simulate_cir(&p, p.theta, &grid(), &SimulationSpec::new(64, 1)).unwrap();
        assert!(b.y_paths.iter().all(|&y| (y - p.theta).abs() < 1e-15));
    }

    #[test]
    fn rejects_negative_initial_variance() {
        let p = HestonParams::desk();
        assert!(simulate_cir(&p, -0.01, &grid(), &SimulationSpec::new(4, 1)).is_err());
    }

    #[test]
    fn truncated_paths_are_nonnegative_without_feller() {
        let mut p = HestonParams::desk();
        p.sigma = 1.0;
        let b = simulate_cir(&p, 0.01, &grid(), &SimulationSpec::new(2000, 5)).unwrap();
        assert!(b.y_paths.iter().all(|&y| y >= 0.0));
        assert!(b.y_paths.iter().any(|&y| y == 0.0));
    }

    #[test]
    fn initial_column_and_provenance() {
        let p = HestonParams::desk();
        let mut sim = SimulationSpec::new(10, 9);
        sim.first_stream = 100;
        let b = simulate_heston(&p, 90.0, 0.05, &grid(), &sim).unwrap();
        for q in 0..10 {
            assert_eq!(b.x(q, 0), 90f64.ln());
            assert_eq!(b.y(q, 0), 0.05);
        }
        assert_eq!(b.stream_ids[0], 100);
        assert_eq!(b.seed, 9);
    }

    #[test]
    fn cir_matches_heston_variance_component() {
        let p = HestonParams::desk();
        let sim = SimulationSpec::new(50, 3);
        let a = simulate_cir(&p, 0.04, &grid(), &sim).unwrap();
        let b = simulate_heston(&p, 100.0, 0.04, &grid(), &sim).unwrap();
        assert_eq!(a.y_paths, b.y_paths);
    }

    #[test]
    fn more_paths_keep_earlier_paths() {
        let p = HestonParams::desk();
        let a = simulate_heston(&p, 100.0, 0.04, &grid(), &SimulationSpec::new(10, 3)).unwrap();
        let b = simulate_heston(&p, 100.0, 0.04, &grid(), &SimulationSpec::new(3000, 3)).unwrap();
        assert_eq!(a.x_paths[..], b.x_paths[..a.x_paths.len()]);
    }

    #[test]
    fn independent_of_thread_count() {
        let p = HestonParams::desk();
        let sim = SimulationSpec::new(3000, 11);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_heston(&p, 100.0, 0.04, &grid(), &sim).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn csv_layout() {
        let p = HestonParams::desk();
        let b = simulate_heston(&p, 100.0, 0.04, &[0.0, 0.5, 1.0], &SimulationSpec::new(2, 1))
            .unwrap();
        let mut out = Vec::new();
        b.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "path_id,t,x,y");
        assert_eq!(lines.len(), 1 + 2 * 3);
        assert!(lines[4].starts_with("1,0,"));
    }

    #[test]
    fn mean_se_of_constant() {
        let (m, s) = mean_se(&[2.0; 5000]);
        assert_eq!(m, 2.0);
        assert!(s < 1e-7);
    }
}
