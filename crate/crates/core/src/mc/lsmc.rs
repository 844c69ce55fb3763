use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mc::paths::{
    mean_se, path_rng, simulate, uniform_times, Dynamics, PathScheme, SimulationSpec, CHUNK,
};
use crate::model::{HestonParams, PutSpec};

/// Stream offset of the valuation batch, far above any training stream.
const VALUATION_STREAM: u64 = 1 << 40;

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    /// Paths in each of the training and valuation batches.
    #[serde(default = "McConfig::default_paths")]
    pub paths: usize,
    /// Exercise dates after time 0; the last one is the maturity.
    #[serde(default = "McConfig::default_dates")]
    pub dates: usize,
    /// Euler substeps between consecutive dates.
    #[serde(default = "McConfig::default_substeps")]
    pub substeps: usize,
    #[serde(default = "McConfig::default_seed")]
    pub seed: u64,
}

impl McConfig {
    fn default_paths() -> usize {
        100_000
    }
    fn default_dates() -> usize {
        50
    }
    fn default_substeps() -> usize {
        4
    }
    fn default_seed() -> u64 {
        20_240_601
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths < 2 {
            return Err(invalid("paths", "must be >= 2"));
        }
        if self.dates < 1 {
            return Err(invalid("dates", "must be >= 1"));
        }
        if self.substeps < 1 {
            return Err(invalid("substeps", "must be >= 1"));
        }
        Ok(())
    }

    /// Exercise-date grid on `[0, T]`.
    pub fn date_grid(&self, maturity: f64) -> Vec<f64> {
        uniform_times(maturity, self.dates)
    }
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            paths: Self::default_paths(),
            dates: Self::default_dates(),
            substeps: Self::default_substeps(),
            seed: Self::default_seed(),
        }
    }
}

/// Vanilla payoffs priced by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Payoff {
    Put,
    Call,
}

impl Payoff {
    pub fn eval(self, strike: f64, s: f64) -> f64 {
        match self {
            Payoff::Put => (strike - s).max(0.0),
            Payoff::Call => (s - strike).max(0.0),
        }
    }
}

/// A Monte Carlo price with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub price: f64,
    pub std_error: f64,
    pub paths: usize,
}

pub(crate) fn check_inputs(
    params: &HestonParams,
    spec: &PutSpec,
    s0: f64,
    y0: f64,
    cfg: &McConfig,
) -> Result<()> {
    params.validate()?;
    spec.validate()?;
    cfg.validate()?;
    if !(s0.is_finite() && s0 > 0.0) {
        return Err(invalid("s0", format!("must be > 0, got {s0}")));
    }
    if !(y0.is_finite() && y0 >= 0.0) {
        return Err(invalid("y0", format!("must be >= 0, got {y0}")));
    }
    Ok(())
}

/// Per-path samples from a streaming simulation that keeps one path in
/// memory per worker.
pub(crate) fn path_samples(
    dynamics: &Dynamics,
    s0: f64,
    y0: f64,
    times: &[f64],
    sim: &SimulationSpec,
    sample: &(dyn Fn(&[f64], &[f64]) -> f64 + Sync),
) -> Vec<f64> {
    let nt = times.len();
    let mut out = vec![0.0; sim.n_paths];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let mut xs = vec![0.0; nt];
        let mut ys = vec![0.0; nt];
        for (q, v) in chunk.iter_mut().enumerate() {
            let mut rng = path_rng(sim.seed, sim.first_stream + (c * CHUNK + q) as u64);
            dynamics.simulate_into(&mut rng, s0.ln(), y0, times, sim.substeps, &mut xs, &mut ys);
            *v = sample(&xs, &ys);
        }
    });
    out
}

/// European price by averaging discounted terminal payoffs over the
/// training streams.
pub fn european_estimate(
    params: &HestonParams,
    spec: &PutSpec,
    s0: f64,
    y0: f64,
    cfg: &McConfig,
    payoff: Payoff,
    scheme: PathScheme,
) -> Result<McEstimate> {
    check_inputs(params, spec, s0, y0, cfg)?;
    let dynamics = Dynamics::new(params, scheme)?;
    let times = cfg.date_grid(spec.maturity);
    let sim = SimulationSpec {
        n_paths: cfg.paths,
        seed: cfg.seed,
        substeps: cfg.substeps,
        first_stream: 0,
    };
    let disc = (-params.r * spec.maturity).exp();
    let k = spec.strike;
    let samples = path_samples(&dynamics, s0, y0, &times, &sim, &|xs, _| {
        disc * payoff.eval(k, xs[xs.len() - 1].exp())
    });
    let (price, std_error) = mean_se(&samples);
    Ok(McEstimate {
        price,
        std_error,
        paths: cfg.paths,
    })
}

/// European put under the Heston dynamics.
pub fn european_mc_price(
    params: &HestonParams,
    spec: &PutSpec,
    s0: f64,
    y0: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    european_estimate(params, spec, s0, y0, cfg, Payoff::Put, PathScheme::FullTruncation)
}

/// American put under the Heston dynamics by least-squares Monte Carlo.
pub fn lsmc_price(
    params: &HestonParams,
    spec: &PutSpec,
    s0: f64,
    y0: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    lsmc_estimate(params, spec, s0, y0, cfg, Payoff::Put, PathScheme::FullTruncation)
}

const BASIS: usize = 6;

/// `1, m, y, m², y², m·y` with `m = s/K`.
fn basis(m: f64, y: f64) -> [f64; BASIS] {
    [1.0, m, y, m * m, y * y, m * y]
}

/// Continuation fit at one date in standardized coordinates. Columns with
/// no spread across the regression set are dropped.
#[derive(Debug, Clone)]
struct Fit {
    center: [f64; BASIS],
    scale: [f64; BASIS],
    keep: [bool; BASIS],
    coef: Vec<f64>,
}

impl Fit {
    fn eval(&self, m: f64, y: f64) -> f64 {
        let b = basis(m, y);
        let mut acc = 0.0;
        let mut c = 0;
        for j in 0..BASIS {
            if self.keep[j] {
                acc += self.coef[c] * (b[j] - self.center[j]) / self.scale[j];
                c += 1;
            }
        }
        acc
    }
}

fn regress(rows: &[[f64; BASIS]], targets: &[f64], date: usize) -> Result<Fit> {
    let n = rows.len() as f64;
    let mut center = [0.0; BASIS];
    let mut scale = [1.0; BASIS];
    let mut keep = [true; BASIS];
    for j in 1..BASIS {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        center[j] = mean;
        if sd <= 1e-10 * (mean.abs() + 1.0) {
            keep[j] = false;
        } else {
            scale[j] = sd;
        }
    }
    let cols: Vec<usize> = (0..BASIS).filter(|&j| keep[j]).collect();
    let m = cols.len();
    let mut ata = DMatrix::<f64>::zeros(m, m);
    let mut atb = DVector::<f64>::zeros(m);
    let mut z = vec![0.0; m];
    for (row, &t) in rows.iter().zip(targets) {
        for (a, &j) in cols.iter().enumerate() {
            z[a] = (row[j] - center[j]) / scale[j];
        }
        for a in 0..m {
            atb[a] += z[a] * t;
            for b in 0..=a {
                ata[(a, b)] += z[a] * z[b];
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            ata[(b, a)] = ata[(a, b)];
        }
    }
    let chol = ata
        .clone()
        .cholesky()
        .ok_or(Error::SingularRegression { date })?;
    // standardized columns: a healthy pivot is O(n)
    let l = chol.l();
    if (0..m).any(|a| l[(a, a)] * l[(a, a)] < 1e-10 * ata[(a, a)]) {
        return Err(Error::SingularRegression { date });
    }
    let coef = chol.solve(&atb);
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::SingularRegression { date });
    }
    Ok(Fit {
        center,
        scale,
        keep,
        coef: coef.iter().copied().collect(),
    })
}

/// Early-exercise price by least-squares Monte Carlo.
///
/// Continuation values are regressed on the basis `1, S/K, Y, (S/K)², Y²,
/// (S/K)·Y` over in-the-money training paths. The reported price comes
/// from an independent valuation batch that follows the fitted exercise
/// rule, so it is a low-biased estimate.
pub fn lsmc_estimate(
    params: &HestonParams,
    spec: &PutSpec,
    s0: f64,
    y0: f64,
    cfg: &McConfig,
    payoff: Payoff,
    scheme: PathScheme,
) -> Result<McEstimate> {
    check_inputs(params, spec, s0, y0, cfg)?;
    let k = spec.strike;
    let times = cfg.date_grid(spec.maturity);
    let nd = times.len();
    let train = simulate(
        params,
        s0.ln(),
        y0,
        &times,
        &SimulationSpec {
            n_paths: cfg.paths,
            seed: cfg.seed,
            substeps: cfg.substeps,
            first_stream: 0,
        },
        scheme,
    )?;
    let np = cfg.paths;
    let mut cash: Vec<f64> = (0..np)
        .map(|p| payoff.eval(k, train.x(p, nd - 1).exp()))
        .collect();
    let mut fits: Vec<Option<Fit>> = vec![None; nd];
    for j in (1..nd - 1).rev() {
        let disc = (-params.r * (times[j + 1] - times[j])).exp();
        for c in cash.iter_mut() {
            *c *= disc;
        }
        let itm: Vec<usize> = (0..np)
            .filter(|&p| payoff.eval(k, train.x(p, j).exp()) > 0.0)
            .collect();
        if itm.len() < 4 * BASIS {
            continue;
        }
        let rows: Vec<[f64; BASIS]> = itm
            .iter()
            .map(|&p| basis(train.x(p, j).exp() / k, train.y(p, j)))
            .collect();
        let targets: Vec<f64> = itm.iter().map(|&p| cash[p]).collect();
        let fit = regress(&rows, &targets, j)?;
        for (&p, row) in itm.iter().zip(&rows) {
            let exercise = payoff.eval(k, train.x(p, j).exp());
            if exercise >= fit.eval(row[1], row[2]) {
                cash[p] = exercise;
            }
        }
        fits[j] = Some(fit);
    }
    drop(train);

    let dynamics = Dynamics::new(params, scheme)?;
    let sim = SimulationSpec {
        n_paths: np,
        seed: cfg.seed,
        substeps: cfg.substeps,
        first_stream: VALUATION_STREAM,
    };
    let r = params.r;
    let samples = path_samples(&dynamics, s0, y0, &times, &sim, &|xs, ys| {
        for j in 1..nd {
            let s = xs[j].exp();
            let ex = payoff.eval(k, s);
            if ex <= 0.0 {
                continue;
            }
            let stop = match &fits[j] {
                _ if j == nd - 1 => true,
                Some(f) => ex >= f.eval(s / k, ys[j]),
                None => false,
            };
            if stop {
                return (-r * times[j]).exp() * ex;
            }
        }
        0.0
    });
    let (mean, se) = mean_se(&samples);
    let now = payoff.eval(k, s0);
    let (price, std_error) = if now >= mean { (now, 0.0) } else { (mean, se) };
    Ok(McEstimate {
        price,
        std_error,
        paths: np,
    })
}

/// One line of the estimator results log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRecord {
    pub estimator: String,
    pub estimate: McEstimate,
    pub params: HestonParams,
    pub spec: PutSpec,
    pub s0: f64,
    pub y0: f64,
    pub config: McConfig,
}

/// Appends `record` as one JSON line.
pub fn append_results_log(path: &Path, record: &McRecord) -> Result<()> {
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    writeln!(f, "{}", serde_json::to_string(record)?)?;
    Ok(())
}
