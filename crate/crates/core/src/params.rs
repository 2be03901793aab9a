//! Market and process parameters shared by every pricer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the risk-neutral CEV diffusion
/// `dS = (r - q) S dt + sigma S^(beta/2) dW`.
///
/// `beta = 2` is geometric Brownian motion with volatility `sigma`. The
/// closed-form pricer also accepts `beta > 2`; the lattice does not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CevParams {
    pub s0: f64,
    pub sigma: f64,
    pub beta: f64,
    pub r: f64,
    pub q: f64,
}

impl CevParams {
    pub fn new(s0: f64, sigma: f64, beta: f64, r: f64, q: f64) -> Result<Self> {
        let p = CevParams {
            s0,
            sigma,
            beta,
            r,
            q,
        };
        p.validate()?;
        Ok(p)
    }

    /// Dividend-free parameters, the setting of the lattice.
    pub fn no_dividend(s0: f64, sigma: f64, beta: f64, r: f64) -> Result<Self> {
        Self::new(s0, sigma, beta, r, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s0.is_finite() && self.s0 > 0.0) {
            return Err(Error::invalid(
                "s0",
                format!("must be > 0, got {}", self.s0),
            ));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid(
                "sigma",
                format!("must be > 0, got {}", self.sigma),
            ));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::invalid(
                "beta",
                format!("must be > 0, got {}", self.beta),
            ));
        }
        if !(self.r.is_finite() && self.r >= 0.0) {
            return Err(Error::invalid("r", format!("must be >= 0, got {}", self.r)));
        }
        if !(self.q.is_finite() && self.q >= 0.0) {
            return Err(Error::invalid("q", format!("must be >= 0, got {}", self.q)));
        }
        Ok(())
    }

    /// Checks the extra restrictions of the lattice: `beta <= 2` and no dividends.
    pub fn validate_for_lattice(&self) -> Result<()> {
        self.validate()?;
        if self.beta > 2.0 {
            return Err(Error::UnsupportedBeta { beta: self.beta });
        }
        if self.q != 0.0 {
            return Err(Error::invalid(
                "q",
                "the lattice assumes a non-dividend-paying stock (q = 0)",
            ));
        }
        Ok(())
    }

    /// Exponent of the diffusion term, `alpha = beta / 2`.
    pub fn alpha(&self) -> f64 {
        0.5 * self.beta
    }

    /// Local diffusion coefficient `sigma * S^(beta/2)`.
    pub fn diffusion(&self, s: f64) -> f64 {
        self.sigma * s.powf(self.alpha())
    }

    /// Local variance rate `sigma^2 * S^beta`.
    pub fn variance(&self, s: f64) -> f64 {
        self.sigma * self.sigma * s.powf(self.beta)
    }

    pub fn is_gbm(&self) -> bool {
        (self.beta - 2.0).abs() < 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Put,
    Call,
}

impl OptionKind {
    pub fn intrinsic(self, spot: f64, strike: f64) -> f64 {
        match self {
            OptionKind::Put => (strike - spot).max(0.0),
            OptionKind::Call => (spot - strike).max(0.0),
        }
    }
}
