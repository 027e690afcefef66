//! Exact construction of a tower of two independent defect Artin-Schreier
//! extensions of valued two-dimensional function fields, together with the
//! checks that certify it: Jacobian exponents recomputed from explicit power
//! series, exact-rational distance ledgers, and the decision procedure showing
//! that no intermediate extension is strongly monomial.

pub mod certificate;
pub mod cli;
pub mod error;
pub mod field;
pub mod frames;
pub mod monocheck;
pub mod series;
pub mod tower;
pub mod valuation;

pub use error::{Error, Result};
pub use field::{Field, FieldElem};
pub use series::{ShiftedSeries, TruncSeries, Var, Weights};
