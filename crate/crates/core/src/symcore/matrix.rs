//! Matrix expression trees over named matrix symbols.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::scalar::ScalarExpr;
use super::var::Var;
use crate::error::{Error, Result};

/// A named positive dimension such as `n` or `d`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DimSymbol(Arc<str>);

impl DimSymbol {
    pub fn new(name: &str) -> DimSymbol {
        DimSymbol(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    /// The dimension as a scalar indeterminate.
    pub fn var(&self) -> Var {
        Var::dim(&self.0)
    }

    pub fn scalar(&self) -> ScalarExpr {
        ScalarExpr::var(self.var())
    }
}

impl fmt::Debug for DimSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for DimSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MatrixKind {
    Deterministic,
    Random,
}

impl MatrixKind {
    pub fn tag(self) -> &'static str {
        match self {
            MatrixKind::Deterministic => "det",
            MatrixKind::Random => "rand",
        }
    }

    pub fn from_tag(s: &str) -> Option<MatrixKind> {
        match s {
            "det" | "deterministic" => Some(MatrixKind::Deterministic),
            "rand" | "random" => Some(MatrixKind::Random),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatrixSymbol {
    pub name: String,
    pub rows: DimSymbol,
    pub cols: DimSymbol,
    pub kind: MatrixKind,
}

impl MatrixSymbol {
    pub fn new(name: &str, rows: &str, cols: &str, kind: MatrixKind) -> Arc<MatrixSymbol> {
        Arc::new(MatrixSymbol {
            name: name.to_string(),
            rows: DimSymbol::new(rows),
            cols: DimSymbol::new(cols),
            kind,
        })
    }

    pub fn is_random(&self) -> bool {
        self.kind == MatrixKind::Random
    }

    /// The commuting scalar standing for this symbol and its transpose.
    pub fn scalar_var(&self) -> Var {
        Var::mat_scalar(&self.name, self.kind == MatrixKind::Deterministic)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum MatrixExpr {
    Symbol(Arc<MatrixSymbol>),
    Identity(DimSymbol),
    Zero(DimSymbol, DimSymbol),
    Transpose(Box<MatrixExpr>),
    Sum(Vec<MatrixExpr>),
    Product(Vec<MatrixExpr>),
    ScalarMul(ScalarExpr, Box<MatrixExpr>),
    Inverse(Box<MatrixExpr>),
}

use MatrixExpr as M;

impl MatrixExpr {
    pub fn symbol(s: &Arc<MatrixSymbol>) -> MatrixExpr {
        M::Symbol(s.clone())
    }

    pub fn identity(d: &str) -> MatrixExpr {
        M::Identity(DimSymbol::new(d))
    }

    pub fn t(self) -> MatrixExpr {
        M::Transpose(Box::new(self))
    }

    pub fn inv(self) -> MatrixExpr {
        M::Inverse(Box::new(self))
    }

    pub fn scale(self, c: ScalarExpr) -> MatrixExpr {
        M::ScalarMul(c, Box::new(self))
    }

    pub fn plus(self, other: MatrixExpr) -> MatrixExpr {
        match self {
            M::Sum(mut v) => {
                v.push(other);
                M::Sum(v)
            }
            e => M::Sum(vec![e, other]),
        }
    }

    pub fn times(self, other: MatrixExpr) -> MatrixExpr {
        match self {
            M::Product(mut v) => {
                v.push(other);
                M::Product(v)
            }
            e => M::Product(vec![e, other]),
        }
    }

    /// `(rows, cols)`, checking every node on the way.
    pub fn shape(&self) -> Result<(DimSymbol, DimSymbol)> {
        match self {
            M::Symbol(s) => Ok((s.rows.clone(), s.cols.clone())),
            M::Identity(d) => Ok((d.clone(), d.clone())),
            M::Zero(r, c) => Ok((r.clone(), c.clone())),
            M::Transpose(x) => {
                let (r, c) = x.shape()?;
                Ok((c, r))
            }
            M::ScalarMul(_, x) => x.shape(),
            M::Inverse(x) => {
                let (r, c) = x.shape()?;
                if r != c {
                    return Err(Error::shape(
                        x.to_string(),
                        format!("inverse of a {r} x {c} matrix"),
                    ));
                }
                Ok((r, c))
            }
            M::Sum(xs) => {
                let first = xs
                    .first()
                    .ok_or_else(|| Error::shape("sum", "empty sum"))?
                    .shape()?;
                for x in &xs[1..] {
                    let s = x.shape()?;
                    if s != first {
                        return Err(Error::shape(
                            x.to_string(),
                            format!("term is {} x {}, expected {} x {}", s.0, s.1, first.0, first.1),
                        ));
                    }
                }
                Ok(first)
            }
            M::Product(xs) => {
                let (r, mut c) = xs
                    .first()
                    .ok_or_else(|| Error::shape("product", "empty product"))?
                    .shape()?;
                for x in &xs[1..] {
                    let (r2, c2) = x.shape()?;
                    if r2 != c {
                        return Err(Error::shape(
                            x.to_string(),
                            format!("factor has {r2} rows, expected {c}"),
                        ));
                    }
                    c = c2;
                }
                Ok((r, c))
            }
        }
    }

    /// Every matrix symbol in the tree, keyed by name.
    pub fn symbols(&self) -> BTreeMap<String, Arc<MatrixSymbol>> {
        let mut out = BTreeMap::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeMap<String, Arc<MatrixSymbol>>) {
        match self {
            M::Symbol(s) => {
                out.entry(s.name.clone()).or_insert_with(|| s.clone());
            }
            M::Identity(_) | M::Zero(..) => {}
            M::Transpose(x) | M::Inverse(x) | M::ScalarMul(_, x) => x.collect_symbols(out),
            M::Sum(xs) | M::Product(xs) => xs.iter().for_each(|x| x.collect_symbols(out)),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, M::Zero(..))
    }

    /// Structural simplification: double transposes, transpose distribution
    /// over sums and products, identity/zero absorption and scalar
    /// flattening. Products are never reordered.
    pub fn simplify(&self) -> MatrixExpr {
        match self {
            M::Symbol(_) | M::Identity(_) | M::Zero(..) => self.clone(),
            M::Transpose(x) => transpose_of(x.simplify()),
            M::Inverse(x) => match x.simplify() {
                M::Identity(d) => M::Identity(d),
                M::ScalarMul(c, y) if !c.is_zero() => {
                    M::ScalarMul(c.inv().expect("nonzero"), Box::new(M::Inverse(y)))
                }
                y => M::Inverse(Box::new(y)),
            },
            M::ScalarMul(c, x) => scaled(c.clone(), x.simplify()),
            M::Sum(xs) => {
                let shape = self.shape().ok();
                let mut terms = Vec::new();
                for x in xs {
                    match x.simplify() {
                        M::Sum(inner) => terms.extend(inner),
                        M::Zero(..) => {}
                        y => terms.push(y),
                    }
                }
                match terms.len() {
                    0 => zero_of(shape),
                    1 => terms.pop().unwrap(),
                    _ => M::Sum(terms),
                }
            }
            M::Product(xs) => {
                let shape = self.shape().ok();
                let mut coeff = ScalarExpr::one();
                let mut factors = Vec::new();
                for x in xs {
                    let mut y = x.simplify();
                    if let M::ScalarMul(c, inner) = y {
                        coeff = coeff.mul(&c);
                        y = *inner;
                    }
                    match y {
                        M::Product(inner) => factors.extend(inner),
                        M::Identity(_) => {}
                        M::Zero(..) => return zero_of(shape),
                        y => factors.push(y),
                    }
                }
                let body = match factors.len() {
                    0 => match shape {
                        Some((r, _)) => M::Identity(r),
                        None => M::Product(Vec::new()),
                    },
                    1 => factors.pop().unwrap(),
                    _ => M::Product(factors),
                };
                scaled(coeff, body)
            }
        }
    }

    /// Renders in the expression DSL syntax.
    pub fn to_dsl(&self) -> String {
        self.dsl(0)
    }

    // precedence: 0 sum, 1 product, 2 postfix/atom
    fn dsl(&self, prec: u8) -> String {
        let wrap = |s: String, p: u8| if p < prec { format!("({s})") } else { s };
        match self {
            M::Symbol(s) => s.name.clone(),
            M::Identity(d) => format!("I({d})"),
            M::Zero(r, c) => format!("zeros({r}, {c})"),
            M::Transpose(x) => format!("{}'", x.dsl(2)),
            M::Inverse(x) => format!("inv({})", x.dsl(0)),
            M::ScalarMul(c, x) => wrap(
                format!("({}) * {}", super::render::text(c), x.dsl(2)),
                1,
            ),
            M::Sum(xs) => wrap(
                xs.iter().map(|x| x.dsl(1)).collect::<Vec<_>>().join(" + "),
                0,
            ),
            M::Product(xs) => wrap(
                xs.iter().map(|x| x.dsl(2)).collect::<Vec<_>>().join(" * "),
                1,
            ),
        }
    }
}

fn zero_of(shape: Option<(DimSymbol, DimSymbol)>) -> MatrixExpr {
    let (r, c) = shape.unwrap_or_else(|| (DimSymbol::new("?"), DimSymbol::new("?")));
    M::Zero(r, c)
}

fn scaled(c: ScalarExpr, x: MatrixExpr) -> MatrixExpr {
    if c.is_one() {
        return x;
    }
    match x {
        M::Zero(r, cc) => M::Zero(r, cc),
        _ if c.is_zero() => zero_of(x.shape().ok()),
        M::ScalarMul(c2, inner) => scaled(c.mul(&c2), *inner),
        x => M::ScalarMul(c, Box::new(x)),
    }
}

fn transpose_of(x: MatrixExpr) -> MatrixExpr {
    match x {
        M::Transpose(inner) => *inner,
        M::Identity(d) => M::Identity(d),
        M::Zero(r, c) => M::Zero(c, r),
        M::Sum(xs) => M::Sum(xs.into_iter().map(transpose_of).collect()),
        M::Product(xs) => M::Product(xs.into_iter().rev().map(transpose_of).collect()),
        M::ScalarMul(c, inner) => M::ScalarMul(c, Box::new(transpose_of(*inner))),
        x => M::Transpose(Box::new(x)),
    }
}

impl fmt::Display for MatrixExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_dsl())
    }
}
