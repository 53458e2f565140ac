//! Hardy operator `H`, its dual `H*`, and sharp relations between their
//! L^p norms, computed exactly on a piecewise power-log function algebra.
//!
//! Modules:
//! - [`funcmodel`]: the function algebra and its JSON format;
//! - [`operators`]: exact `H`, `H*` and `H phi - phi`;
//! - [`norms`]: L^p norms with error estimates and the numeric callable path;
//! - [`verify`]: sharp and crude constants, three-valued verdicts;
//! - [`extremal`]: the three extremal families and their epsilon sweeps;
//! - [`duality`]: the monotone `phi` <-> density `f` transform and mollification;
//! - [`cli`]: argument handling, function shorthand, fuzz generation.

pub mod cli;
pub mod duality;
pub mod error;
pub mod extremal;
pub mod funcmodel;
pub mod norms;
pub mod operators;
pub mod output;
pub mod quad;
pub mod verify;

pub use error::{HardyError, Result};
pub use funcmodel::{make_piecewise, Bound, PiecewiseFn, PowerLogAtom};
pub use norms::{CallableFn, QuadResult};
