//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong when building states, evolving them, or
/// fitting records.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A constructor or configuration value violated its range contract.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Atom placed on or behind the surface.
    #[error("non-physical geometry: atom-surface separation {separation_m} m must be positive")]
    NonPhysicalGeometry { separation_m: f64 },

    /// Adaptive quadrature exhausted its depth budget.
    #[error("quadrature did not converge: requested rel. tolerance {requested:e}, achieved {achieved:e}")]
    QuadratureNoConvergence { requested: f64, achieved: f64 },

    /// The exact propagator could not reach the requested step tolerance.
    #[error("time evolution did not converge: achieved step tolerance {achieved:e}")]
    EvolveNoConvergence { achieved: f64 },

    /// xi^2 = N <Jz^2>/<Jx>^2 with <Jx> = 0 (twin Fock); use the
    /// sigma-parameterized branch instead.
    #[error("squeezing parameter undefined: <Jx> = 0")]
    UndefinedSqueezing,

    /// d<Jz>/d(delta) vanishes, so no information about delta is acquired.
    #[error("divergent sensitivity at t = {t_s} s: d<Jz>/d(delta) vanishes")]
    DivergentSensitivity { t_s: f64 },

    /// Every per-time sensitivity in an aggregation was infinite.
    #[error("cannot aggregate: no finite per-time sensitivities")]
    AllDivergent,

    /// The likelihood optimum sits on the edge of the search interval.
    #[error("likelihood optimum not bracketed by [{lo}, {hi}] 1/s")]
    OptimumNotBracketed { lo: f64, hi: f64 },

    /// The likelihood carries no delta dependence (degenerate record/model).
    #[error("flat likelihood: record carries no information about delta")]
    FlatLikelihood,

    /// Input to a regression or aggregation was degenerate.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
