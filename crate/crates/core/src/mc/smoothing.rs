use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Smooth approximation `fₙ` of `y ↦ √(y⁺)`.
///
/// `fₙ = √gₙ` with
///
/// ```text
/// sₙ(y) = ln(1 + e^{n²y}) / n²
/// gₙ(y) = 1/n² + Mₙ·tanh(sₙ(y)/Mₙ),   Mₙ = n² − 1/n²
/// ```
///
/// so `1/n ≤ fₙ ≤ n`, `fₙ` is increasing, and `|gₙ'| ≤ 1` for every `n`
/// (`fₙ²` is 1-Lipschitz). On compacts `gₙ → y⁺` at rate `O(1/n²)`, hence
/// `fₙ → √(y⁺)` locally uniformly at rate `O(1/n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothingFamily {
    n: u32,
}

impl SmoothingFamily {
    pub fn new(n: u32) -> Result<Self> {
        if n < 1 {
            return Err(invalid("n", "smoothing index must be >= 1"));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// `fₙ²(y)`.
    pub fn squared(&self, y: f64) -> f64 {
        let n2 = (self.n as f64).powi(2);
        let softplus = y.max(0.0) + (-(n2 * y).abs()).exp().ln_1p() / n2;
        let cap = n2 - 1.0 / n2;
        if cap == 0.0 {
            return 1.0;
        }
        1.0 / n2 + cap * (softplus / cap).tanh()
    }

    /// `fₙ(y)`.
    pub fn eval(&self, y: f64) -> f64 {
        self.squared(y).sqrt()
    }
}
