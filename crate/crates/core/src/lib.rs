pub mod arith;
pub mod cli;
pub mod error;
pub mod poly;
pub mod jumping;
pub mod monomial;
pub mod series;
pub mod transform;

pub use arith::Rational;
pub use error::{Error, Result};
pub use poly::Poly;
