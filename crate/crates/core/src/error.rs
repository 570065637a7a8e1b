use thiserror::Error;

/// Errors raised by the pathwise solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or inconsistent input (grids, paths, parameters).
    #[error("invalid input: {0}")]
    Input(String),

    /// A dispersion piece or gain function could not be turned into a transform.
    #[error("transform construction failed on piece {piece}: {reason}")]
    Construction { piece: usize, reason: String },

    /// A point was evaluated outside the domain of a map.
    #[error("{what} = {value} lies outside the domain ({lo}, {hi})")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// The ODE right-hand side returned a non-finite value.
    #[error("non-finite drift evaluation at t = {t}, gamma = {gamma}")]
    NonFinite { t: f64, gamma: f64 },

    /// A numerical diagnostic that must hold did not.
    #[error("diagnostic failure: {0}")]
    Diagnostic(String),

    /// A solved path left the domain before its recorded stop time.
    #[error("internal consistency: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
