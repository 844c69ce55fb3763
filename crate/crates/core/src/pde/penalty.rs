use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{HestonParams, PutSpec};

/// Smooth penalty `ζ_ε` for the obstacle constraint `u ≥ ψ`.
///
/// With `z = (w − ε)/ε`,
///
/// ```text
/// ζ_ε(w) = λ·(z − atan z)   for w < ε
///        = 0                for w ≥ ε
/// ```
///
/// which is nondecreasing, concave and C² (the first two derivatives vanish
/// at `w = ε`), with `0 ≤ ζ'_ε ≤ λ/ε`. `λ` is fixed by the floor
/// `ζ_ε(0) = λ(π/4 − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyFamily {
    pub epsilon: f64,
    /// `ζ_ε(0)`; negative.
    pub floor: f64,
}

impl PenaltyFamily {
    pub fn new(epsilon: f64, floor: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be > 0, got {epsilon}")));
        }
        if !(floor.is_finite() && floor < 0.0) {
            return Err(invalid("floor", format!("must be < 0, got {floor}")));
        }
        Ok(Self { epsilon, floor })
    }

    /// `ε = 1e−6·K`. The penalized solution sits `O(ε)` above the obstacle
    /// wherever the constraint binds, so `ε` is kept below the shape
    /// tolerances of the analysis checks. The obstacle source `(𝓛 − r)ψ = δeˣ − rK` is bounded
    /// below by `−rK`; the floor is set to twice that so the constraint
    /// holds with margin on the discrete operator. For `r = 0` the scale
    /// falls back to `0.01·K`.
    pub fn for_put(params: &HestonParams, spec: &PutSpec) -> Self {
        let k = spec.strike;
        Self {
            epsilon: 1e-6 * k,
            floor: -2.0 * k * params.r.max(0.01),
        }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    fn lambda(&self) -> f64 {
        self.floor / (FRAC_PI_4 - 1.0)
    }

    /// Upper bound of `ζ'_ε`.
    pub fn max_slope(&self) -> f64 {
        self.lambda() / self.epsilon
    }
}

/// `(ζ_ε(w), ζ'_ε(w))`.
pub fn apply_penalty(w: f64, penalty: &PenaltyFamily) -> (f64, f64) {
    let eps = penalty.epsilon;
    if w >= eps {
        return (0.0, 0.0);
    }
    let lambda = penalty.lambda();
    let z = (w - eps) / eps;
    let z2 = z * z;
    (lambda * (z - z.atan()), lambda / eps * z2 / (1.0 + z2))
}

/// `ζ''_ε(w)`.
pub fn penalty_curvature(w: f64, penalty: &PenaltyFamily) -> f64 {
    let eps = penalty.epsilon;
    if w >= eps {
        return 0.0;
    }
    let z = (w - eps) / eps;
    let q = 1.0 + z * z;
    penalty.lambda() / (eps * eps) * 2.0 * z / (q * q)
}

/// Gap `w` at which `ζ_ε(w) = source`, the steady state of the penalized
/// equation where the obstacle is active and `(𝓛 − r)ψ = source`. Returns
/// `ε` for `source ≥ 0`.
pub fn equilibrium_gap(source: f64, penalty: &PenaltyFamily) -> f64 {
    let eps = penalty.epsilon;
    if source >= 0.0 {
        return eps;
    }
    // ζ_ε is increasing on (−∞, ε) and unbounded below
    let mut lo = eps;
    while apply_penalty(lo, penalty).0 > source {
        lo -= 2.0 * (eps - lo).max(eps);
    }
    let mut hi = eps;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if apply_penalty(mid, penalty).0 > source {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * eps {
            break;
        }
    }
    0.5 * (lo + hi)
}
