//! Option pricing on an exactly-recombining binomial lattice for the
//! constant elasticity of variance (CEV) diffusion
//! `dS = r S dt + sigma S^(beta/2) dW`.
//!
//! - [`lattice`] builds the price grid and its closed-form envelope.
//! - [`pricing`] runs European and American backward induction on it.
//! - [`analytic`] and [`mc`] are independent oracles: closed-form CEV and
//!   Black-Scholes prices, and an Euler-Maruyama simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod error;
pub mod lattice;
pub mod mc;
pub mod params;
pub mod pricing;
pub mod special;

pub use analytic::{black_scholes_price, european_price_cev, lognormal_pdf, AnalyticInputs};
pub use error::{Error, Result};
pub use lattice::{build_lattice, envelope_closed_form, envelope_deviation, Direction, Lattice};
pub use mc::{mc_european_price, simulate_terminal, McConfig, McEstimate};
pub use params::{CevParams, OptionKind};
pub use pricing::{
    price_option, terminal_distribution, transition_weights_exact, up_probability_approx,
    PayoffSpec, PricingResult, Style, TransitionWeights, WeightsMode,
};
pub use special::{ncx2_cdf, norm_cdf, reg_lower_gamma};
