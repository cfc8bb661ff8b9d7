//! Exact symbolic layer: commuting rational functions and matrix expression
//! trees.

pub mod gcd;
pub mod matrix;
pub mod poly;
pub mod render;
pub mod scalar;
pub mod var;

pub use matrix::{DimSymbol, MatrixExpr, MatrixKind, MatrixSymbol};
pub use poly::{Monomial, Poly, Rational, Term};
pub use render::Format;
pub use scalar::{ScalarExpr, SubstitutionMap};
pub use var::{Var, VarKind};
