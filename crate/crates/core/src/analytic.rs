//! Closed-form European prices under CEV and Black-Scholes dynamics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{CevParams, OptionKind};
use crate::special::{ncx2_cdf, norm_cdf};

/// Arguments of the noncentral chi-square terms in the CEV closed forms.
///
/// `c` carries the spot, `a` the forward-discounted strike, `b = 1 / (1 - alpha)`
/// and `omega` is the integrated variance scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticInputs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub omega: f64,
}

impl AnalyticInputs {
    pub fn new(params: &CevParams, strike: f64, maturity: f64) -> Result<Self> {
        params.validate()?;
        check_contract(strike, maturity)?;
        if params.is_gbm() {
            return Err(Error::invalid(
                "beta",
                "the chi-square arguments are undefined at beta = 2",
            ));
        }
        let alpha = params.alpha();
        let k = 1.0 - alpha;
        let carry = params.r - params.q;
        let x = 2.0 * carry * (alpha - 1.0) * maturity;
        // sigma^2 (e^x - 1) / (2 (r - q) (alpha - 1)), continuous through r = q
        let growth = if x.abs() < 1e-12 {
            1.0 + 0.5 * x
        } else {
            x.exp_m1() / x
        };
        let omega = params.sigma * params.sigma * maturity * growth;
        let scale = k * k * omega;
        let forward_strike = strike * (-carry * maturity).exp();
        Ok(AnalyticInputs {
            a: forward_strike.powf(2.0 * k) / scale,
            b: 1.0 / k,
            c: params.s0.powf(2.0 * k) / scale,
            omega,
        })
    }
}

fn check_contract(strike: f64, maturity: f64) -> Result<()> {
    if !(strike.is_finite() && strike > 0.0) {
        return Err(Error::invalid(
            "strike",
            format!("must be > 0, got {strike}"),
        ));
    }
    if !(maturity.is_finite() && maturity > 0.0) {
        return Err(Error::invalid(
            "maturity",
            format!("must be > 0, got {maturity}"),
        ));
    }
    Ok(())
}

/// European option price under CEV.
///
/// Dispatches to Black-Scholes when `|beta - 2| < 1e-9`, to the Cox formula
/// for `beta < 2` and to the Emanuel-MacBeth formula for `beta > 2`.
pub fn european_price_cev(
    params: &CevParams,
    strike: f64,
    maturity: f64,
    kind: OptionKind,
) -> Result<f64> {
    params.validate()?;
    check_contract(strike, maturity)?;
    if params.is_gbm() {
        return black_scholes_price(
            params.s0,
            strike,
            params.r,
            params.q,
            params.sigma,
            maturity,
            kind,
        );
    }
    let AnalyticInputs { a, b, c, .. } = AnalyticInputs::new(params, strike, maturity)?;
    let spot = params.s0 * (-params.q * maturity).exp();
    let cash = strike * (-params.r * maturity).exp();

    // (probability the strike side finishes in the money, spot-side analogue)
    let (strike_cdf, spot_cdf) = if params.beta < 2.0 {
        (ncx2_cdf(c, b, a)?, ncx2_cdf(a, b + 2.0, c)?)
    } else {
        (ncx2_cdf(a, 2.0 - b, c)?, ncx2_cdf(c, -b, a)?)
    };
    let price = match kind {
        OptionKind::Put => cash * (1.0 - strike_cdf) - spot * spot_cdf,
        OptionKind::Call => spot * (1.0 - spot_cdf) - cash * strike_cdf,
    };
    Ok(price.max(0.0))
}

/// Black-Scholes-Merton price with continuous dividend yield `q`.
pub fn black_scholes_price(
    s0: f64,
    strike: f64,
    r: f64,
    q: f64,
    sigma: f64,
    maturity: f64,
    kind: OptionKind,
) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid("sigma", format!("must be > 0, got {sigma}")));
    }
    if !(s0 > 0.0 && strike >= 0.0 && maturity > 0.0) {
        return Err(Error::invalid(
            "contract",
            format!("need s0 > 0, strike >= 0, maturity > 0; got {s0}, {strike}, {maturity}"),
        ));
    }
    let spot = s0 * (-q * maturity).exp();
    let cash = strike * (-r * maturity).exp();
    if strike == 0.0 {
        return Ok(match kind {
            OptionKind::Put => 0.0,
            OptionKind::Call => spot,
        });
    }
    let vol = sigma * maturity.sqrt();
    let d1 = ((s0 / strike).ln() + (r - q + 0.5 * sigma * sigma) * maturity) / vol;
    let d2 = d1 - vol;
    Ok(match kind {
        OptionKind::Call => spot * norm_cdf(d1) - cash * norm_cdf(d2),
        OptionKind::Put => cash * norm_cdf(-d2) - spot * norm_cdf(-d1),
    })
}

/// Lognormal density of `S_t` under GBM with drift `mu`.
pub fn lognormal_pdf(x: f64, s0: f64, mu: f64, sigma: f64, t: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let var = sigma * sigma * t;
    let z = (x / s0).ln() - (mu - 0.5 * sigma * sigma) * t;
    (-z * z / (2.0 * var)).exp() / (x * (2.0 * std::f64::consts::PI * var).sqrt())
}
