//! Affine block entries and the pencil container.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::symcore::render::{latex, name_latex, text};
use crate::symcore::{DimSymbol, MatrixExpr, MatrixSymbol, Rational, ScalarExpr};

/// A matrix symbol, possibly transposed, as it appears in a block.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymRef {
    pub symbol: Arc<MatrixSymbol>,
    pub transposed: bool,
}

impl SymRef {
    pub fn new(symbol: &Arc<MatrixSymbol>, transposed: bool) -> SymRef {
        SymRef { symbol: symbol.clone(), transposed }
    }

    pub fn shape(&self) -> (DimSymbol, DimSymbol) {
        let s = &self.symbol;
        if self.transposed {
            (s.cols.clone(), s.rows.clone())
        } else {
            (s.rows.clone(), s.cols.clone())
        }
    }

    pub fn t(&self) -> SymRef {
        SymRef { symbol: self.symbol.clone(), transposed: !self.transposed }
    }

    pub fn is_random(&self) -> bool {
        self.symbol.is_random()
    }

    pub fn to_expr(&self) -> MatrixExpr {
        let e = MatrixExpr::Symbol(self.symbol.clone());
        if self.transposed {
            e.t()
        } else {
            e
        }
    }

    pub fn dsl(&self) -> String {
        if self.transposed {
            format!("{}'", self.symbol.name)
        } else {
            self.symbol.name.clone()
        }
    }
}

/// `c0 * I + sum_k c_k * T_k` where each `T_k` is a symbol or its transpose.
/// Terms are kept sorted with non-zero coefficients and no repeats.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Block {
    pub identity: ScalarExpr,
    pub terms: Vec<(SymRef, ScalarExpr)>,
}

impl Block {
    pub fn zero() -> Block {
        Block::default()
    }

    pub fn scalar(c: ScalarExpr) -> Block {
        Block { identity: c, terms: Vec::new() }
    }

    pub fn identity() -> Block {
        Block::scalar(ScalarExpr::one())
    }

    pub fn sym(s: SymRef, c: ScalarExpr) -> Block {
        Block::zero().plus(&Block { identity: ScalarExpr::zero(), terms: vec![(s, c)] })
    }

    pub fn is_zero(&self) -> bool {
        self.identity.is_zero() && self.terms.is_empty()
    }

    /// `Some(c)` if the block is `c * I` (or zero).
    pub fn as_scalar(&self) -> Option<&ScalarExpr> {
        if self.terms.is_empty() {
            Some(&self.identity)
        } else {
            None
        }
    }

    pub fn plus(&self, other: &Block) -> Block {
        let mut map: BTreeMap<SymRef, ScalarExpr> = BTreeMap::new();
        for (s, c) in self.terms.iter().chain(other.terms.iter()) {
            let e = map.entry(s.clone()).or_insert_with(ScalarExpr::zero);
            *e = e.add(c);
        }
        Block {
            identity: self.identity.add(&other.identity),
            terms: map.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    pub fn scale(&self, c: &ScalarExpr) -> Block {
        if c.is_zero() {
            return Block::zero();
        }
        Block {
            identity: self.identity.mul(c),
            terms: self.terms.iter().map(|(s, k)| (s.clone(), k.mul(c))).collect(),
        }
    }

    pub fn neg(&self) -> Block {
        self.scale(&ScalarExpr::int(-1))
    }

    pub fn minus(&self, other: &Block) -> Block {
        self.plus(&other.neg())
    }

    /// Product when at least one side is a scalar multiple of the identity.
    pub fn mul(&self, other: &Block) -> Option<Block> {
        if let Some(c) = self.as_scalar() {
            return Some(other.scale(c));
        }
        other.as_scalar().map(|c| self.scale(c))
    }

    pub fn transpose(&self) -> Block {
        let mut terms: Vec<(SymRef, ScalarExpr)> =
            self.terms.iter().map(|(s, c)| (s.t(), c.clone())).collect();
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        Block { identity: self.identity.clone(), terms }
    }

    pub fn random_terms(&self) -> impl Iterator<Item = &(SymRef, ScalarExpr)> {
        self.terms.iter().filter(|(s, _)| s.is_random())
    }

    pub fn has_random(&self) -> bool {
        self.terms.iter().any(|(s, _)| s.is_random())
    }

    /// Identity and deterministic-symbol terms only.
    pub fn deterministic_part(&self) -> Block {
        Block {
            identity: self.identity.clone(),
            terms: self.terms.iter().filter(|(s, _)| !s.is_random()).cloned().collect(),
        }
    }

    /// Random-symbol terms only.
    pub fn random_part(&self) -> Block {
        Block {
            identity: ScalarExpr::zero(),
            terms: self.terms.iter().filter(|(s, _)| s.is_random()).cloned().collect(),
        }
    }

    /// The block as a matrix expression of the given shape.
    pub fn to_expr(&self, rows: &DimSymbol, cols: &DimSymbol) -> MatrixExpr {
        let mut parts = Vec::new();
        if !self.identity.is_zero() {
            parts.push(with_coeff(&self.identity, MatrixExpr::Identity(rows.clone())));
        }
        for (s, c) in &self.terms {
            parts.push(with_coeff(c, s.to_expr()));
        }
        match parts.len() {
            0 => MatrixExpr::Zero(rows.clone(), cols.clone()),
            1 => parts.pop().unwrap(),
            _ => MatrixExpr::Sum(parts),
        }
    }

    /// Converts an affine matrix expression into block form.
    pub fn from_expr(e: &MatrixExpr) -> std::result::Result<Block, &'static str> {
        use MatrixExpr as M;
        match e {
            M::Zero(..) => Ok(Block::zero()),
            M::Identity(_) => Ok(Block::identity()),
            M::Symbol(s) => Ok(Block::sym(SymRef::new(s, false), ScalarExpr::one())),
            M::Transpose(x) => Ok(Block::from_expr(x)?.transpose()),
            M::ScalarMul(c, x) => Ok(Block::from_expr(x)?.scale(c)),
            M::Sum(xs) => {
                let mut acc = Block::zero();
                for x in xs {
                    acc = acc.plus(&Block::from_expr(x)?);
                }
                Ok(acc)
            }
            M::Product(xs) => {
                let mut acc = Block::identity();
                for x in xs {
                    acc = acc
                        .mul(&Block::from_expr(x)?)
                        .ok_or("product of matrix symbols")?;
                }
                Ok(acc)
            }
            M::Inverse(x) => match Block::from_expr(x)?.as_scalar() {
                Some(c) if !c.is_zero() => Ok(Block::scalar(c.inv().unwrap())),
                _ => Err("inverse of a matrix symbol"),
            },
        }
    }

    /// Text in the pencil-file syntax, e.g. `-Z'` or `I - (1/lambda)*Sigma`.
    pub fn dsl(&self) -> String {
        let mut parts: Vec<(bool, String)> = Vec::new();
        if !self.identity.is_zero() {
            parts.push(coeff_dsl(&self.identity, "I"));
        }
        for (s, c) in &self.terms {
            parts.push(coeff_dsl(c, &s.dsl()));
        }
        if parts.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (k, (neg, body)) in parts.into_iter().enumerate() {
            match (k, neg) {
                (0, true) => out.push('-'),
                (0, false) => {}
                (_, true) => out.push_str(" - "),
                (_, false) => out.push_str(" + "),
            }
            out.push_str(&body);
        }
        out
    }

    pub fn latex(&self) -> String {
        let mut parts: Vec<(bool, String)> = Vec::new();
        if !self.identity.is_zero() {
            parts.push(coeff_latex(&self.identity, "\\mathbb{I}".into()));
        }
        for (s, c) in &self.terms {
            let mut body = name_latex(&s.symbol.name);
            if s.transposed {
                body.push_str("^\\top");
            }
            parts.push(coeff_latex(c, body));
        }
        if parts.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (k, (neg, body)) in parts.into_iter().enumerate() {
            match (k, neg) {
                (0, true) => out.push_str("- "),
                (0, false) => {}
                (_, true) => out.push_str(" - "),
                (_, false) => out.push_str(" + "),
            }
            out.push_str(&body);
        }
        out
    }
}

fn with_coeff(c: &ScalarExpr, e: MatrixExpr) -> MatrixExpr {
    if c.is_one() {
        e
    } else {
        e.scale(c.clone())
    }
}

fn split_sign(c: &ScalarExpr) -> (bool, ScalarExpr) {
    match c.constant_value() {
        Some(q) if q.is_negative() => (true, c.neg()),
        _ if c.num().len() == 1 && c.num().leading_coeff().is_negative() => (true, c.neg()),
        _ => (false, c.clone()),
    }
}

fn coeff_dsl(c: &ScalarExpr, body: &str) -> (bool, String) {
    let (neg, c) = split_sign(c);
    if c.is_one() {
        (neg, body.to_string())
    } else {
        (neg, format!("({})*{}", text(&c), body))
    }
}

fn coeff_latex(c: &ScalarExpr, body: String) -> (bool, String) {
    let (neg, c) = split_sign(c);
    if c.is_one() {
        (neg, body)
    } else {
        (neg, format!("{} {}", latex(&c), body))
    }
}

/// How the target is read off `Q^{-1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Selection {
    Vectors { u: Vec<Rational>, v: Vec<Rational> },
    Entry(usize, usize),
}

/// `p x p` block matrix affine in matrix symbols, with block `i` of size
/// `dims[i]` (blocks are square blockwise: rows and columns share dims).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pencil {
    pub dims: Vec<DimSymbol>,
    pub blocks: Vec<Vec<Block>>,
    pub selection: Selection,
}

impl Pencil {
    /// Builds and validates a pencil.
    pub fn new(dims: Vec<DimSymbol>, blocks: Vec<Vec<Block>>, selection: Selection) -> Result<Pencil> {
        let p = Pencil { dims, blocks, selection };
        p.validate()?;
        Ok(p)
    }

    pub fn size(&self) -> usize {
        self.dims.len()
    }

    pub fn block(&self, i: usize, j: usize) -> &Block {
        &self.blocks[i][j]
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.dims.len();
        if p == 0 {
            return Err(Error::Invalid("pencil has no blocks".into()));
        }
        if self.blocks.len() != p || self.blocks.iter().any(|r| r.len() != p) {
            return Err(Error::Invalid(format!("block grid must be {p} x {p}")));
        }
        for (i, row) in self.blocks.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                let want = (self.dims[i].clone(), self.dims[j].clone());
                if !b.identity.is_zero() && want.0 != want.1 {
                    return Err(Error::shape(
                        format!("block ({i}, {j})"),
                        format!("identity in a rectangular {} x {} block", want.0, want.1),
                    ));
                }
                for (s, c) in &b.terms {
                    if s.shape() != want {
                        let (r, cc) = s.shape();
                        return Err(Error::shape(
                            format!("block ({i}, {j})"),
                            format!("{} is {r} x {cc}, block is {} x {}", s.dsl(), want.0, want.1),
                        ));
                    }
                    if c.any_var(|v| v.is_g() || matches!(v.kind(), crate::symcore::VarKind::MatScalar { .. } | crate::symcore::VarKind::Trace(_))) {
                        return Err(Error::Invalid(format!(
                            "block ({i}, {j}) has a non-constant coefficient"
                        )));
                    }
                }
            }
        }
        match &self.selection {
            Selection::Vectors { u, v } => {
                if u.len() != p || v.len() != p {
                    return Err(Error::Invalid(format!("u and v must have length {p}")));
                }
                select_terms(u, v)?;
            }
            Selection::Entry(i, j) => {
                if *i >= p || *j >= p {
                    return Err(Error::IndexOutOfRange(*i, *j, p));
                }
            }
        }
        Ok(())
    }

    /// The selection as `(u, v)`.
    pub fn uv(&self) -> (Vec<Rational>, Vec<Rational>) {
        match &self.selection {
            Selection::Vectors { u, v } => (u.clone(), v.clone()),
            Selection::Entry(i, j) => {
                let p = self.size();
                let mut u = vec![Rational::zero(); p];
                let mut v = vec![Rational::zero(); p];
                u[*i] = Rational::from_integer(1.into());
                v[*j] = Rational::from_integer(1.into());
                (u, v)
            }
        }
    }

    pub fn terms(&self) -> Result<Vec<(usize, usize, Rational)>> {
        let (u, v) = self.uv();
        select_terms(&u, &v)
    }

    /// Every matrix symbol in the pencil, keyed by name.
    pub fn symbols(&self) -> BTreeMap<String, Arc<MatrixSymbol>> {
        let mut out = BTreeMap::new();
        for row in &self.blocks {
            for b in row {
                for (s, _) in &b.terms {
                    out.entry(s.symbol.name.clone()).or_insert_with(|| s.symbol.clone());
                }
            }
        }
        out
    }

    pub fn random_symbols(&self) -> Vec<Arc<MatrixSymbol>> {
        self.symbols().into_values().filter(|s| s.is_random()).collect()
    }

    /// Number of structurally non-zero blocks.
    pub fn nonzero_blocks(&self) -> usize {
        self.blocks.iter().flatten().filter(|b| !b.is_zero()).count()
    }

    /// `Q` as a LaTeX matrix.
    pub fn latex(&self) -> String {
        let rows: Vec<String> = self
            .blocks
            .iter()
            .map(|r| r.iter().map(Block::latex).collect::<Vec<_>>().join(" & "))
            .collect();
        format!("\\left[\\begin{{matrix}}{}\\end{{matrix}}\\right]", rows.join("\\\\"))
    }
}

impl fmt::Display for Pencil {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<Vec<String>> = self
            .blocks
            .iter()
            .map(|r| r.iter().map(Block::dsl).collect())
            .collect();
        let p = self.size();
        let widths: Vec<usize> = (0..p)
            .map(|j| cells.iter().map(|r| r[j].len()).max().unwrap_or(1))
            .collect();
        writeln!(
            f,
            "dims: [{}]",
            self.dims.iter().map(|d| d.name()).collect::<Vec<_>>().join(", ")
        )?;
        for row in &cells {
            let padded: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect();
            writeln!(f, "[ {} ]", padded.join("  "))?;
        }
        let (u, v) = self.uv();
        let show = |x: &[Rational]| x.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(", ");
        write!(f, "u = [{}]\nv = [{}]", show(&u), show(&v))
    }
}

/// Non-zero `u_i v_j` pairs of `u^T Q^{-1} v = sum_ij u_i v_j Q^{-1}_{ij}`.
pub fn select_terms(u: &[Rational], v: &[Rational]) -> Result<Vec<(usize, usize, Rational)>> {
    if u.iter().all(Zero::is_zero) || v.iter().all(Zero::is_zero) {
        return Err(Error::EmptySelection);
    }
    let mut out = Vec::new();
    for (i, ui) in u.iter().enumerate() {
        if ui.is_zero() {
            continue;
        }
        for (j, vj) in v.iter().enumerate() {
            if !vj.is_zero() {
                out.push((i, j, ui * vj));
            }
        }
    }
    Ok(out)
}
