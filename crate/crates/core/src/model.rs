//! Model constants, the put payoff, generator coefficients and the
//! put-call symmetry map.
//!
//! Log-price coordinates are used throughout: `x = ln s`, and the
//! generator of `(X, Y)` is
//!
//! ```text
//! y/2 (∂xx + 2ρσ ∂xy + σ² ∂yy) + (r − δ − y/2) ∂x + κ(θ − y) ∂y
//! ```
//!
//! All second-order coefficients vanish on `y = 0`, where the operator
//! degenerates to pure transport.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Heston model constants under the pricing measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HestonParams {
    /// Mean-reversion rate of the variance.
    pub kappa: f64,
    /// Long-run variance.
    pub theta: f64,
    /// Volatility of variance.
    pub sigma: f64,
    /// Correlation between the asset and variance noises.
    pub rho: f64,
    /// Risk-free rate.
    pub r: f64,
    /// Continuous dividend yield.
    pub delta: f64,
}

impl HestonParams {
    pub fn new(kappa: f64, theta: f64, sigma: f64, rho: f64, r: f64, delta: f64) -> Result<Self> {
        let p = Self {
            kappa,
            theta,
            sigma,
            rho,
            r,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Engineering defaults used by the CLI and the acceptance suite.
    pub fn desk() -> Self {
        Self {
            kappa: 1.5,
            theta: 0.04,
            sigma: 0.3,
            rho: -0.5,
            r: 0.05,
            delta: 0.02,
        }
    }

    /// Checks the parameter invariants.
    ///
    /// `sigma = 0` and `theta = 0` are admitted as oracle limits and
    /// `r = 0` as a degenerate test case; see [`HestonParams::oracle_mode`]
    /// and [`HestonParams::degenerate_rate`].
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("kappa", self.kappa),
            ("theta", self.theta),
            ("sigma", self.sigma),
            ("rho", self.rho),
            ("r", self.r),
            ("delta", self.delta),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(invalid(name, format!("must be finite, got {v}")));
            }
        }
        if self.kappa <= 0.0 {
            return Err(invalid("kappa", format!("must be > 0, got {}", self.kappa)));
        }
        if self.theta < 0.0 {
            return Err(invalid("theta", format!("must be >= 0, got {}", self.theta)));
        }
        if self.sigma < 0.0 {
            return Err(invalid("sigma", format!("must be >= 0, got {}", self.sigma)));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(invalid("rho", format!("must lie in (-1, 1), got {}", self.rho)));
        }
        if self.r < 0.0 {
            return Err(invalid("r", format!("must be >= 0, got {}", self.r)));
        }
        if self.delta < 0.0 {
            return Err(invalid("delta", format!("must be >= 0, got {}", self.delta)));
        }
        Ok(())
    }

    /// True for the deterministic-volatility or zero-variance limits that
    /// exist only to compare against independent oracles.
    pub fn oracle_mode(&self) -> bool {
        self.sigma == 0.0 || self.theta == 0.0
    }

    /// True when `r = 0`, which the pricing theory excludes.
    pub fn degenerate_rate(&self) -> bool {
        self.r == 0.0
    }
}

/// A vanilla put contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PutSpec {
    pub strike: f64,
    pub maturity: f64,
}

impl PutSpec {
    pub fn new(strike: f64, maturity: f64) -> Result<Self> {
        let s = Self { strike, maturity };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err(invalid("strike", format!("must be > 0, got {}", self.strike)));
        }
        if !(self.maturity.is_finite() && self.maturity > 0.0) {
            return Err(invalid(
                "maturity",
                format!("must be > 0, got {}", self.maturity),
            ));
        }
        Ok(())
    }

    /// Put payoff in log-price coordinates.
    pub fn payoff_log(&self, x: f64) -> f64 {
        (self.strike - x.exp()).max(0.0)
    }
}

/// `(strike − s)⁺`.
pub fn payoff_put(strike: f64, s: f64) -> Result<f64> {
    if !(strike > 0.0) {
        return Err(invalid("strike", format!("must be > 0, got {strike}")));
    }
    if !(s >= 0.0) {
        return Err(invalid("s", format!("spot must be >= 0, got {s}")));
    }
    Ok((strike - s).max(0.0))
}

/// `2κθ ≥ σ²`.
pub fn feller_satisfied(params: &HestonParams) -> bool {
    2.0 * params.kappa * params.theta >= params.sigma * params.sigma
}

/// Coefficients of the log-price generator minus `r` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorCoeffs {
    pub a_xx: f64,
    pub a_xy: f64,
    pub a_yy: f64,
    pub b_x: f64,
    pub b_y: f64,
    pub c: f64,
}

impl GeneratorCoeffs {
    /// Determinant of the diffusion matrix `[[a_xx, a_xy], [a_xy, a_yy]]`.
    pub fn diffusion_det(&self) -> f64 {
        self.a_xx * self.a_yy - self.a_xy * self.a_xy
    }
}

/// The coefficients do not depend on `x`; it is accepted to keep the call
/// shape of a general point evaluation.
pub fn generator_coeffs(_x: f64, y: f64, params: &HestonParams) -> Result<GeneratorCoeffs> {
    if !(y >= 0.0) {
        return Err(invalid("y", format!("variance must be >= 0, got {y}")));
    }
    let HestonParams {
        kappa,
        theta,
        sigma,
        rho,
        r,
        delta,
    } = *params;
    Ok(GeneratorCoeffs {
        a_xx: 0.5 * y,
        a_xy: 0.5 * rho * sigma * y,
        a_yy: 0.5 * sigma * sigma * y,
        b_x: r - delta - 0.5 * y,
        b_y: kappa * (theta - y),
        c: -r,
    })
}

/// Data at which an American put reproduces an American call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualData {
    pub params: HestonParams,
    pub spec: PutSpec,
    pub spot: f64,
}

/// Put-call symmetry: the American call at `(params, spec, spot)` equals the
/// American put at the returned data.
///
/// Rate and dividend are swapped, the correlation is negated and strike and
/// spot trade places. The change of numeraire to the asset also shifts the
/// variance drift from `κ(θ − y)` to `κθ − (κ − ρσ)y`, so the dual carries
/// `κ' = κ − ρσ` and `θ' = κθ/κ'`. With `ρ = 0` or `σ = 0` these reduce to
/// the original values. The map is an involution.
pub fn symmetry_dual(params: &HestonParams, spec: &PutSpec, spot: f64) -> Result<DualData> {
    params.validate()?;
    spec.validate()?;
    if !(spot.is_finite() && spot > 0.0) {
        return Err(invalid("spot", format!("must be > 0, got {spot}")));
    }
    let kappa = params.kappa - params.rho * params.sigma;
    if kappa <= 0.0 {
        return Err(invalid(
            "kappa",
            format!("dual mean reversion κ − ρσ = {kappa} must be > 0"),
        ));
    }
    let theta = params.kappa * params.theta / kappa;
    Ok(DualData {
        params: HestonParams {
            kappa,
            theta,
            sigma: params.sigma,
            rho: -params.rho,
            r: params.delta,
            delta: params.r,
        },
        spec: PutSpec {
            strike: spot,
            maturity: spec.maturity,
        },
        spot: spec.strike,
    })
}

/// Flat parameter record used for exchange with other tools.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSet {
    pub kappa: f64,
    pub theta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub r: f64,
    pub delta: f64,
    pub strike: f64,
    pub maturity: f64,
    pub spot: f64,
    pub y0: f64,
}

impl ParameterSet {
    pub fn from_parts(params: &HestonParams, spec: &PutSpec, spot: f64, y0: f64) -> Self {
        Self {
            kappa: params.kappa,
            theta: params.theta,
            sigma: params.sigma,
            rho: params.rho,
            r: params.r,
            delta: params.delta,
            strike: spec.strike,
            maturity: spec.maturity,
            spot,
            y0,
        }
    }

    /// Validates and splits into `(params, spec, spot, y0)`.
    pub fn split(&self) -> Result<(HestonParams, PutSpec, f64, f64)> {
        let params = HestonParams::new(
            self.kappa, self.theta, self.sigma, self.rho, self.r, self.delta,
        )?;
        let spec = PutSpec::new(self.strike, self.maturity)?;
        if !(self.spot.is_finite() && self.spot > 0.0) {
            return Err(invalid("spot", format!("must be > 0, got {}", self.spot)));
        }
        if !(self.y0.is_finite() && self.y0 >= 0.0) {
            return Err(invalid("y0", format!("must be >= 0, got {}", self.y0)));
        }
        Ok((params, spec, self.spot, self.y0))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(text)?;
        set.split()?;
        Ok(set)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
