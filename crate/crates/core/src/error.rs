use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {what} = {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("not differentiable: {0}")]
    NotDifferentiable(&'static str),

    #[error("degenerate vega: |vega| = {vega:e} below floor at S = {spot}")]
    DegenerateVega { vega: f64, spot: f64 },

    #[error("degenerate constraint: {0}")]
    DegenerateConstraint(&'static str),

    #[error("value surface does not provide {0}")]
    MissingPartial(&'static str),

    #[error("capability: {0}")]
    Capability(&'static str),

    #[error("invalid instance: {0}")]
    InvalidInstance(&'static str),

    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),

    #[error("control {coordinate} = {value} outside box [{lo}, {hi}]")]
    ControlOutOfBox {
        coordinate: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invariant violated: {what} = {value}")]
    Invariant { what: &'static str, value: f64 },

    #[error("oracle did not converge after {iterations} iterations (last step {last_step:e})")]
    OracleFailure { iterations: usize, last_step: f64 },

    #[error("at t = {t}, S = {s}, Σ = {sigma}: {source}")]
    State {
        t: f64,
        s: f64,
        sigma: f64,
        #[source]
        source: alloc::boxed::Box<Error>,
    },

    #[error("path {path}, step {step}: {source}")]
    Path {
        path: u64,
        step: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64) -> Self {
        Error::Domain { what, value }
    }

    pub fn at_state(self, st: &crate::MarketState) -> Self {
        Error::State {
            t: st.t,
            s: st.s,
            sigma: st.sigma,
            source: alloc::boxed::Box::new(self),
        }
    }

    /// The innermost error, with state and path context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::State { source, .. } | Error::Path { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn at_path(self, path: u64, step: usize) -> Self {
        Error::Path {
            path,
            step,
            source: alloc::boxed::Box::new(self),
        }
    }
}
