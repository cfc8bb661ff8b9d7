//! From a pencil to a closed system of fixed-point equations for the limiting
//! block traces of its inverse.

mod factor;
pub mod inverse;
mod system;
mod transform;

use std::collections::BTreeMap;
use std::str::FromStr;

pub use factor::{factor, Factored};
pub use inverse::{invert, SMatrix};
pub use system::{
    apply_rewrites, construct_equations, infer_structure, invert_difference, matricize, Equation,
    EquivalenceClasses, FixedPointSystem, Structure, TargetEntry, TraceAtom,
};
pub use transform::{
    desymmetrize, embed, pencil_r, r_transform, scalarize, scalarize_block, symmetric_g, symmetrize,
    symmetrize_blocks, symmetrize_scalar, ScalarizedPencil, VarianceSpec,
};

use crate::dsl::Rewrite;
use crate::error::{Error, Result};
use crate::pencil::{decompose, Pencil, PencilSplit};
use crate::symcore::{Rational, ScalarExpr, SubstitutionMap, Var};

/// Default entry variance of random matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Normalization {
    /// `1/(n*lambda)`.
    #[default]
    Full,
    /// `1/n`.
    SampleSize,
    /// Only the explicitly given variances.
    Custom,
}

impl FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Normalization::Full),
            "sample_size" => Ok(Normalization::SampleSize),
            "custom" => Ok(Normalization::Custom),
            _ => Err(Error::Invalid(format!("unknown normalization {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CalcOptions {
    pub normalize: Normalization,
    /// Per-symbol variances; these take precedence over the normalization.
    pub variances: VarianceSpec,
    /// Dimension playing the role of `n` in the default variances.
    pub sample_dim: String,
    pub subs: Vec<(Var, ScalarExpr)>,
    pub rewrites: Vec<Rewrite>,
    /// Merge equal entries of the inverse pencil.
    pub dedup: bool,
}

impl Default for CalcOptions {
    fn default() -> Self {
        CalcOptions {
            normalize: Normalization::Full,
            variances: VarianceSpec::new(),
            sample_dim: "n".into(),
            subs: Vec::new(),
            rewrites: Vec::new(),
            dedup: true,
        }
    }
}

impl CalcOptions {
    /// Variance of every random symbol of `q`.
    pub fn variance_spec(&self, q: &Pencil) -> Result<VarianceSpec> {
        let n = ScalarExpr::var(Var::dim(&self.sample_dim));
        let lambda = ScalarExpr::var(Var::constant("lambda"));
        let mut out = VarianceSpec::new();
        for s in q.random_symbols() {
            let v = match (self.variances.get(&s.name), self.normalize) {
                (Some(v), _) => v.clone(),
                (None, Normalization::Full) => n.mul(&lambda).inv()?,
                (None, Normalization::SampleSize) => n.inv()?,
                (None, Normalization::Custom) => return Err(Error::MissingVariance(s.name.clone())),
            };
            out.insert(s.name.clone(), v);
        }
        Ok(out)
    }
}

/// Every intermediate object of [`calc`].
#[derive(Clone, Debug)]
pub struct Stages {
    pub split: PencilSplit,
    pub scalarized: ScalarizedPencil,
    pub variances: VarianceSpec,
    pub structure: Structure,
    pub representatives: BTreeMap<(usize, usize), (usize, usize)>,
    pub r: SMatrix,
    pub g: SMatrix,
    pub system: FixedPointSystem,
}

/// Matrix of `G` unknowns after zero-pattern pruning and deduplication.
fn unknowns(q: &Pencil, structure: &Structure, reps: &BTreeMap<(usize, usize), (usize, usize)>) -> SMatrix {
    let p = q.size();
    let mut g = inverse::zeros(p);
    for i in 0..p {
        for j in 0..p {
            if structure.zero[i][j] || q.dims[i] != q.dims[j] {
                continue;
            }
            let (s, t) = reps.get(&(i, j)).copied().unwrap_or((i, j));
            g[i][j] = ScalarExpr::var(Var::g(s, t));
        }
    }
    g
}

fn substitute_all(m: &SMatrix, map: &SubstitutionMap) -> Result<SMatrix> {
    m.iter().map(|r| r.iter().map(|x| x.substitute(map)).collect()).collect()
}

pub fn calc_stages(q: &Pencil, targets: &[(usize, usize, Rational)], opts: &CalcOptions) -> Result<Stages> {
    let p = q.size();
    for &(i, j, _) in targets {
        if i >= p || j >= p {
            return Err(Error::IndexOutOfRange(i, j, p));
        }
    }
    let split = decompose(q)?;
    let scalarized = scalarize(&split);
    let variances = opts.variance_spec(q)?;
    let structure = infer_structure(&scalarized)?;
    let representatives = structure.classes.representatives(&q.dims, opts.dedup);
    let gmat = unknowns(q, &structure, &representatives);
    let map: SubstitutionMap = opts.subs.iter().cloned().collect();
    // substitution is a ring map, so applying it before inversion gives the
    // same equations with smaller intermediate expressions
    let r = substitute_all(&pencil_r(&split.qx, &gmat, &variances, &q.dims)?, &map)?;
    let f = substitute_all(&scalarized.f, &map)?;
    let g = invert_difference(&f, &r, &structure.zero)?;
    let raw = construct_equations(&g, targets, &opts.subs, &representatives, &q.dims)?;
    let mut symbol_dims = BTreeMap::new();
    for s in q.symbols().values() {
        symbol_dims.insert(s.name.clone(), s.rows.clone());
    }
    let system = matricize(&raw, &symbol_dims, &opts.rewrites)?;
    Ok(Stages { split, scalarized, variances, structure, representatives, r, g, system })
}

/// Fixed-point system for the normalized trace of block `(i, j)` of `Q^{-1}`.
pub fn calc(q: &Pencil, i: usize, j: usize, opts: &CalcOptions) -> Result<FixedPointSystem> {
    Ok(calc_stages(q, &[(i, j, Rational::from_integer(1.into()))], opts)?.system)
}

/// System for `u^T Q^{-1} v` using the pencil's own selection.
pub fn calc_selection(q: &Pencil, opts: &CalcOptions) -> Result<FixedPointSystem> {
    Ok(calc_stages(q, &q.terms()?, opts)?.system)
}

/// `d = n*phi`, the usual aspect-ratio substitution.
pub fn aspect_ratio_subs() -> Vec<(Var, ScalarExpr)> {
    let n = ScalarExpr::var(Var::dim("n"));
    vec![(Var::dim("d"), n.mul(&ScalarExpr::var(Var::constant("phi"))))]
}
