//! Dimensional analysis toolkit.
//!
//! - [`decvalue`]: exact decimal values with a single rounding per operation.
//! - [`dimension`]: SI dimension exponent vectors.
//! - [`measure`]: units, the unit registry and dimension-checked measurements.
//! - [`quantlang`]: a small quantity-expression language with a static
//!   dimension checker and evaluator.
//! - [`currency`]: an order, bill, pay and serve settlement machine with
//!   time-varying exchange rates.
//! - [`selftest`]: the randomized property harness.

// diagnostics carry both dimensions and a message; boxing them buys nothing here
#![allow(clippy::result_large_err)]

pub mod currency;
pub mod decvalue;
pub mod dimension;
pub mod measure;
pub mod quantlang;
pub mod selftest;

pub use decvalue::{DecError, DecValue, PrecisionContext, Rational};
pub use dimension::{BaseDimension, Dimension};
pub use measure::{MeasureError, Measurement, Unit, UnitRegistry};
