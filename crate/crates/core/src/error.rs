use thiserror::Error;

/// Errors raised across the function algebra, operators, norms and checks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HardyError {
    #[error("malformed partition: {0}")]
    MalformedPartition(String),
    #[error("non-finite atom: {0}")]
    NonFiniteAtom(String),
    #[error("negative value {value:e} at x = {x:e}")]
    NegativityDetected { x: f64, value: f64 },
    #[error("log power {0} exceeds the cap of {cap}", cap = crate::funcmodel::MAX_LOG_POWER)]
    LogPowerCap(u32),
    #[error("Hardy average diverges at 0: exponent {exponent} <= -1 on the first piece")]
    DivergentAtZero { exponent: f64 },
    #[error("dual average diverges at infinity: exponent {exponent} >= 0 on the unbounded piece")]
    DivergentAtInfinity { exponent: f64 },
    #[error("function is not nonincreasing near x = {x:e}")]
    NotMonotone { x: f64 },
    #[error("downward jump of size {size:e} at breakpoint {at}; mollify first")]
    JumpDiscontinuity { at: f64, size: f64 },
    #[error("function does not vanish at infinity")]
    NoDecayAtInfinity,
    #[error("L^p norm diverges at {end}: exponent test gives {exponent}")]
    NormDiverges { end: &'static str, exponent: f64 },
    #[error("quadrature did not reach the error budget: err {err:e} > target {target:e}")]
    NotConverged { value: f64, err: f64, target: f64 },
    #[error("exponent p = {0} must satisfy p > 1")]
    BadExponent(f64),
    #[error("degenerate input: ||Hf||_p = {0:e} is numerically zero")]
    DegenerateInput(f64),
    #[error("epsilon {eps} outside the admissible range (0, {max})")]
    EpsOutOfRange { eps: f64, max: f64 },
    #[error("at least 3 converged records are required, got {0}")]
    InsufficientData(usize),
    #[error("equivalence violated at x = {x:e}: {what} gap {gap:e}")]
    EquivalenceViolated { x: f64, what: String, gap: f64 },
    #[error("not representable: {0}")]
    NotRepresentable(String),
    #[error("output error: {0}")]
    Output(String),
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, HardyError>;
