//! Numerical machinery for Brownian motion on disconnected subsets of the
//! real line: q-series, continued fractions attached to three-term
//! recurrences, birth-and-death hitting transforms, time scales, closed forms
//! on the self-similar set `T_q`, and an exact Monte Carlo simulator.

pub mod error;
pub mod laplace;
pub mod birthdeath;
pub mod contfrac;
pub mod qpoisson;
pub mod qseries;
pub mod quad;
pub mod sim;
pub mod timescale;
pub mod tq;

pub use error::{Error, Result};
