//! Certified real root isolation for square nonlinear systems.
//!
//! A box is certified when a preconditioned copy of the system is
//! strongly monotone on it (all leading-row-block minors of its interval
//! Jacobian are sign-definite) and a recursive walk over its faces proves
//! that exactly one zero lies inside.

pub mod criterion;
pub mod existence;
pub mod funcsys;
pub mod generate;
pub mod interval;
pub mod isolator;
pub mod miranda;

pub use funcsys::{FuncSystem, SquareSystem};
pub use interval::{Interval, IntervalMatrix, NBox, Sign};
