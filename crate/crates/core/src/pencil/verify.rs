//! Numeric check that a pencil realizes an expression.

use std::collections::{BTreeMap, BTreeSet};

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::block::Pencil;
use crate::dsl::Rewrite;
use crate::error::{Error, Result};
use crate::numeric::dense::{gaussian, inverse, matrix_power, random_spd, Instance};
use crate::numeric::trial_seed;
use crate::symcore::{MatrixExpr, MatrixSymbol, ScalarExpr, VarKind};

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub instantiations: usize,
    pub max_failures: usize,
    /// Range for constants such as `lambda`.
    pub constant_range: (f64, f64),
    /// Identities such as `Sigma_sqrt^2 = Sigma` imposed on the draws.
    pub relations: Vec<Rewrite>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { instantiations: 10, max_failures: 5, constant_range: (0.5, 2.0), relations: Vec::new() }
    }
}

/// Max over instantiations of `max |u^T Q^{-1} v - e|`.
pub fn verify(q: &Pencil, e: &MatrixExpr, dims: &BTreeMap<String, usize>, seed: u64) -> Result<f64> {
    verify_with(q, e, dims, seed, &VerifyOptions::default())
}

fn expr_constants(e: &MatrixExpr, out: &mut BTreeSet<String>) {
    use MatrixExpr as M;
    match e {
        M::Symbol(_) | M::Identity(_) | M::Zero(..) => {}
        M::Transpose(x) | M::Inverse(x) => expr_constants(x, out),
        M::ScalarMul(c, x) => {
            scalar_constants(c, out);
            expr_constants(x, out);
        }
        M::Sum(xs) | M::Product(xs) => xs.iter().for_each(|x| expr_constants(x, out)),
    }
}

fn scalar_constants(c: &ScalarExpr, out: &mut BTreeSet<String>) {
    out.extend(c.vars().into_iter().filter(|v| matches!(v.kind(), VarKind::Const)).map(|v| v.name().to_string()));
}

/// Draws every symbol in `symbols` plus constants, honoring `relations`.
pub(crate) fn draw_instance(
    symbols: &BTreeMap<String, std::sync::Arc<MatrixSymbol>>,
    constants: &BTreeSet<String>,
    dims: &BTreeMap<String, usize>,
    opts: &VerifyOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Instance> {
    let mut inst = Instance { sizes: dims.clone(), ..Default::default() };
    for c in constants {
        inst.scalars.insert(c.clone(), rng.gen_range(opts.constant_range.0..opts.constant_range.1));
    }
    for s in symbols.values() {
        let (r, c) = (inst.size(&s.rows)?, inst.size(&s.cols)?);
        let m = if s.is_random() {
            gaussian(r, c, 1.0, rng)
        } else if r == c {
            random_spd(r, rng)
        } else {
            gaussian(r, c, 1.0 / (c as f64).sqrt(), rng)
        };
        inst.matrices.insert(s.name.clone(), m);
    }
    for rel in &opts.relations {
        let base = inst.matrix(&rel.base)?.clone();
        inst.matrices.insert(rel.target.clone(), matrix_power(&base, rel.power));
    }
    Ok(inst)
}

/// `u^T Q^{-1} v` for a numeric instance; `None` if `Q` is singular.
pub(crate) fn pencil_value(q: &Pencil, inst: &Instance) -> Result<Option<Mat<f64>>> {
    let (qm, off) = inst.assemble(&q.blocks, &q.dims)?;
    let Some(qi) = inverse(&qm) else { return Ok(None) };
    let mut acc: Option<Mat<f64>> = None;
    for (i, j, c) in q.terms()? {
        let c: f64 = num_traits::ToPrimitive::to_f64(&c).unwrap_or(f64::NAN);
        let blk = qi.as_ref().submatrix(off[i], off[j], off[i + 1] - off[i], off[j + 1] - off[j]);
        let term = blk * faer::Scale(c);
        acc = Some(match acc {
            None => term,
            Some(a) => {
                if a.nrows() != term.nrows() || a.ncols() != term.ncols() {
                    return Err(Error::shape("selection", "selected blocks differ in shape"));
                }
                &a + &term
            }
        });
    }
    Ok(acc)
}

pub fn verify_with(
    q: &Pencil,
    e: &MatrixExpr,
    dims: &BTreeMap<String, usize>,
    seed: u64,
    opts: &VerifyOptions,
) -> Result<f64> {
    let mut symbols = q.symbols();
    symbols.extend(e.symbols());
    let mut constants = BTreeSet::new();
    expr_constants(e, &mut constants);
    for b in q.blocks.iter().flatten() {
        scalar_constants(&b.identity, &mut constants);
        b.terms.iter().for_each(|(_, c)| scalar_constants(c, &mut constants));
    }
    let mut worst: f64 = 0.0;
    for idx in 0..opts.instantiations {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, idx as u64));
        let mut failures = 0;
        loop {
            let inst = draw_instance(&symbols, &constants, dims, opts, &mut rng)?;
            let want = match inst.eval(e) {
                Ok(m) => Some(m),
                Err(Error::SingularSubexpression) => None,
                Err(err) => return Err(err),
            };
            if let (Some(want), Some(got)) = (want, pencil_value(q, &inst)?) {
                if got.nrows() != want.nrows() || got.ncols() != want.ncols() {
                    return Err(Error::shape(
                        "verify",
                        format!(
                            "pencil gives {}x{}, expression {}x{}",
                            got.nrows(),
                            got.ncols(),
                            want.nrows(),
                            want.ncols()
                        ),
                    ));
                }
                worst = worst.max((&got - &want).norm_max());
                break;
            }
            failures += 1;
            if failures >= opts.max_failures {
                return Err(Error::Numeric(format!(
                    "pencil numerically singular in {failures} consecutive draws"
                )));
            }
        }
    }
    Ok(worst)
}
