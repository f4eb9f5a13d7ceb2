//! Word-level machinery for odometer-based and circular symbolic systems.
//!
//! Construction sequences, the circular operator, parsing and genetic markers, empirical
//! distributions, the codes approximating the natural map, slippage, and perfect-match search.
//! Everything is exact: big integers for coefficients and rationals for densities.

pub mod coeff;
pub mod error;
pub mod functor;
pub mod matching;
pub mod natural_map;
pub mod report;
pub mod statistics;
pub mod words;

pub use error::{Error, Result};
