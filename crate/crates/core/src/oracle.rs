//! Reference prices for the deterministic-variance limit `σ = 0`.
//!
//! With zero vol-of-vol the variance follows `Y_t = θ + (y0 − θ)e^{−κt}`
//! and the asset is lognormal with integrated variance `∫Y`. These routines
//! share no code with the PDE or Monte Carlo engines.

use crate::error::{invalid, Result};

/// `∫₀ᵗ Y_s ds` for the deterministic variance path.
pub fn integrated_variance(kappa: f64, theta: f64, y0: f64, t: f64) -> f64 {
    theta * t + (y0 - theta) * (1.0 - (-kappa * t).exp()) / kappa
}

/// European put by Simpson quadrature of the payoff against the lognormal
/// density, split at the payoff kink.
pub fn european_put_quadrature(
    spot: f64,
    strike: f64,
    r: f64,
    delta: f64,
    total_variance: f64,
    maturity: f64,
) -> f64 {
    let disc = (-r * maturity).exp();
    let drift = spot.ln() + (r - delta) * maturity - 0.5 * total_variance;
    if total_variance <= 0.0 {
        return disc * (strike - drift.exp()).max(0.0);
    }
    let sd = total_variance.sqrt();
    // payoff is positive for z < z_kink
    let z_kink = (strike.ln() - drift) / sd;
    let lo = -12.0f64;
    let hi = z_kink.min(12.0);
    if hi <= lo {
        return 0.0;
    }
    let integrand = |z: f64| {
        let s = (drift + sd * z).exp();
        (strike - s).max(0.0) * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
    };
    disc * simpson(integrand, lo, hi, 20_000)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Variance path for the tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterministicVariance {
    pub kappa: f64,
    pub theta: f64,
    pub y0: f64,
}

impl DeterministicVariance {
    pub fn integrated(&self, t: f64) -> f64 {
        integrated_variance(self.kappa, self.theta, self.y0, t)
    }
}

/// American put on a recombining binomial tree with time-dependent
/// variance. Steps are placed at equal increments of integrated variance so
/// that `u = e^{√ΔV}` is constant; the step lengths vary instead. The
/// result averages `steps` and `steps + 1` to damp the odd-even
/// oscillation.
pub fn american_put_binomial(
    spot: f64,
    strike: f64,
    r: f64,
    delta: f64,
    variance: DeterministicVariance,
    maturity: f64,
    steps: usize,
) -> Result<f64> {
    let a = tree(spot, strike, r, delta, variance, maturity, steps, true)?;
    let b = tree(spot, strike, r, delta, variance, maturity, steps + 1, true)?;
    Ok(0.5 * (a + b))
}

/// Same tree without early exercise.
pub fn european_put_binomial(
    spot: f64,
    strike: f64,
    r: f64,
    delta: f64,
    variance: DeterministicVariance,
    maturity: f64,
    steps: usize,
) -> Result<f64> {
    let a = tree(spot, strike, r, delta, variance, maturity, steps, false)?;
    let b = tree(spot, strike, r, delta, variance, maturity, steps + 1, false)?;
    Ok(0.5 * (a + b))
}

#[allow(clippy::too_many_arguments)]
fn tree(
    spot: f64,
    strike: f64,
    r: f64,
    delta: f64,
    variance: DeterministicVariance,
    maturity: f64,
    steps: usize,
    american: bool,
) -> Result<f64> {
    let total = variance.integrated(maturity);
    if !(total > 0.0) {
        return Err(invalid("variance", "integrated variance must be > 0"));
    }
    if steps == 0 {
        return Err(invalid("steps", "must be >= 1"));
    }
    let dv = total / steps as f64;
    // times t_j with V(t_j) = j·ΔV
    let mut times = Vec::with_capacity(steps + 1);
    times.push(0.0);
    for j in 1..steps {
        let target = j as f64 * dv;
        let (mut lo, mut hi) = (times[j - 1], maturity);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if variance.integrated(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        times.push(0.5 * (lo + hi));
    }
    times.push(maturity);

    let up = dv.sqrt().exp();
    let down = 1.0 / up;
    let node = |i: usize, j: usize| spot * up.powi(2 * j as i32 - i as i32);
    let mut v: Vec<f64> = (0..=steps).map(|j| (strike - node(steps, j)).max(0.0)).collect();
    for i in (0..steps).rev() {
        let dt = times[i + 1] - times[i];
        let p = (((r - delta) * dt).exp() - down) / (up - down);
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(
                "steps",
                format!("branch probability {p} outside [0, 1]; use more steps"),
            ));
        }
        let disc = (-r * dt).exp();
        for j in 0..=i {
            let cont = disc * (p * v[j + 1] + (1.0 - p) * v[j]);
            v[j] = if american {
                cont.max(strike - node(i, j))
            } else {
                cont
            };
        }
    }
    Ok(v[0])
}
