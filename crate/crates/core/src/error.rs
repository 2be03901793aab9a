use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A user-supplied parameter is outside its admissible range.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The lattice is only defined for 0 < beta <= 2.
    #[error(
        "beta = {beta} > 2 is not supported by the lattice; use the analytic pricer for beta > 2"
    )]
    UnsupportedBeta { beta: f64 },

    #[error("degenerate grid spacing at level {level}, index {index}")]
    DegenerateSpacing { level: usize, index: usize },

    #[error("inadmissible weights (up = {h_up}, down = {h_down}) at step {step}, node {node}; increase n_steps")]
    InadmissibleWeights {
        step: usize,
        node: usize,
        h_up: f64,
        h_down: f64,
    },

    #[error("inadmissible probability {p} at price {price}; increase n_steps")]
    InadmissibleProbability { p: f64, price: f64 },

    #[error("{routine} did not converge for ({a}, {b})")]
    NonConvergence {
        routine: &'static str,
        a: f64,
        b: f64,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad inputs rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::UnsupportedBeta { .. }
        )
    }
}
