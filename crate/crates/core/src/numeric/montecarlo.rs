//! Monte Carlo estimates of normalized block traces.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use faer::linalg::matmul::triangular::{matmul, BlockStructure};
use faer::linalg::solvers::DenseSolveCore;
use faer::linalg::triangular_inverse::invert_lower_triangular;
use faer::{Accum, Mat, Par, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::dense::{gaussian, inverse, Instance};
use super::spectrum::{derive_all, lookup, NumericBinding, SpectrumSpec};
use super::trial_seed;
use crate::dsl::Rewrite;
use crate::error::{Error, Result};
use crate::fptcore::VarianceSpec;
use crate::pencil::Pencil;
use crate::symcore::{MatrixExpr, MatrixSymbol};

/// Everything needed to draw numeric instances.
#[derive(Clone, Debug, Default)]
pub struct McSetup {
    pub sizes: BTreeMap<String, usize>,
    pub spectra: Vec<SpectrumSpec>,
    pub variances: VarianceSpec,
    pub binding: NumericBinding,
    /// Relations such as `Sigma_sqrt^2 = Sigma` used to complete spectra.
    pub rewrites: Vec<Rewrite>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    fn from_samples(xs: &[f64]) -> Estimate {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return Estimate { mean, stderr: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate { mean, stderr: (var / n).sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    /// Statistics of the target (`u^T Q^{-1} v` or the expression).
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub seed: u64,
    pub entries: BTreeMap<(usize, usize), Estimate>,
}

impl MonteCarloEstimate {
    pub fn to_json(&self) -> Value {
        json!({
            "mean": self.mean,
            "stderr": self.stderr,
            "trials": self.trials,
            "seed": self.seed,
            "entries": self.entries.iter().map(|(&(i, j), e)| json!({
                "entry": [i, j], "mean": e.mean, "stderr": e.stderr,
            })).collect::<Vec<_>>(),
        })
    }
}

impl McSetup {
    /// Numeric values of constants; dimensions come from `sizes`.
    fn scalars(&self) -> std::collections::HashMap<String, f64> {
        self.binding
            .values
            .iter()
            .filter(|(k, _)| !self.sizes.contains_key(*k))
            .map(|(k, v)| (k.clone(), *v))
            .collect()
    }

    fn draw(
        &self,
        symbols: &BTreeMap<String, Arc<MatrixSymbol>>,
        spectra: &[SpectrumSpec],
        rng: &mut ChaCha8Rng,
    ) -> Result<Instance> {
        let mut inst = Instance { sizes: self.sizes.clone(), scalars: self.scalars(), matrices: BTreeMap::new() };
        for s in symbols.values() {
            let (r, c) = (inst.size(&s.rows)?, inst.size(&s.cols)?);
            let m = if s.is_random() {
                let v = self.variances.get(&s.name).ok_or_else(|| Error::MissingVariance(s.name.clone()))?;
                let v = inst.scalar(v)?;
                if !(v >= 0.0) {
                    return Err(Error::Invalid(format!("variance of {} is {v}", s.name)));
                }
                gaussian(r, c, v.sqrt(), rng)
            } else {
                if s.rows != s.cols {
                    return Err(Error::Invalid(format!(
                        "deterministic matrix {} is rectangular; only diagonal spectra are supported",
                        s.name
                    )));
                }
                lookup(spectra, s.rows.name(), &s.name)
                    .and_then(|sp| sp.diagonal(&s.name, r))
                    .ok_or_else(|| Error::Unbound(format!("spectrum of {} (dimension {})", s.name, s.rows)))?
            };
            inst.matrices.insert(s.name.clone(), m);
        }
        Ok(inst)
    }
}

/// Runs `trial` with a fresh generator per trial index; a failed draw is
/// redrawn from the same stream, up to `max_failures` in a row.
fn run_trials<T>(
    trials: usize,
    seed: u64,
    max_failures: usize,
    mut trial: impl FnMut(&mut ChaCha8Rng) -> Result<Option<T>>,
) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(trials);
    for idx in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, idx as u64));
        let mut fails = 0;
        loop {
            match trial(&mut rng)? {
                Some(x) => {
                    out.push(x);
                    break;
                }
                None => {
                    fails += 1;
                    if fails >= max_failures {
                        return Err(Error::Numeric(format!("{fails} consecutive singular draws in trial {idx}")));
                    }
                }
            }
        }
    }
    Ok(out)
}

const MAX_FAILURES: usize = 5;

/// Monte Carlo of the normalized trace of a square expression.
pub fn monte_carlo_expr(e: &MatrixExpr, setup: &McSetup, trials: usize, seed: u64) -> Result<MonteCarloEstimate> {
    let (r, c) = e.shape()?;
    if r != c {
        return Err(Error::NonSquare);
    }
    if trials == 0 {
        return Err(Error::Invalid("at least one trial is needed".into()));
    }
    let spectra = derive_all(&setup.spectra, &setup.rewrites)?;
    let symbols = e.symbols();
    let samples = run_trials(trials, seed, MAX_FAILURES, |rng| {
        let inst = setup.draw(&symbols, &spectra, rng)?;
        match trace_of(&inst, e) {
            Ok(x) => Ok(Some(x)),
            Err(Error::SingularSubexpression) => Ok(None),
            Err(err) => Err(err),
        }
    })?;
    let est = Estimate::from_samples(&samples);
    Ok(MonteCarloEstimate { mean: est.mean, stderr: est.stderr, trials, seed, entries: BTreeMap::new() })
}

/// Normalized trace of `e`, with a Cholesky shortcut for inverses of
/// symmetric positive definite matrices.
pub fn trace_of(inst: &Instance, e: &MatrixExpr) -> Result<f64> {
    let m = match e {
        MatrixExpr::Inverse(x) => {
            let a = eval_fast(inst, x)?;
            if let Some(t) = spd_inverse_trace(&a) {
                return Ok(t / a.nrows() as f64);
            }
            inverse(&a).ok_or(Error::SingularSubexpression)?
        }
        _ => eval_fast(inst, e)?,
    };
    Ok(trace(&m) / m.nrows() as f64)
}

/// Like [`Instance::eval`] but forms `A^T A` with a symmetric product.
fn eval_fast(inst: &Instance, e: &MatrixExpr) -> Result<Mat<f64>> {
    use MatrixExpr as M;
    match e {
        M::Product(xs) if xs.len() == 2 && xs[0] == xs[1].clone().t() => {
            let a = eval_fast(inst, &xs[1])?;
            Ok(gram(&a))
        }
        M::Sum(xs) => {
            let mut acc = eval_fast(inst, &xs[0])?;
            for x in &xs[1..] {
                acc = &acc + &eval_fast(inst, x)?;
            }
            Ok(acc)
        }
        _ => inst.eval(e),
    }
}

/// `A^T A`, computing one triangle only.
fn gram(a: &Mat<f64>) -> Mat<f64> {
    let n = a.ncols();
    let mut g = Mat::<f64>::zeros(n, n);
    matmul(
        g.as_mut(),
        BlockStructure::TriangularLower,
        Accum::Replace,
        a.transpose(),
        BlockStructure::Rectangular,
        a.as_ref(),
        BlockStructure::Rectangular,
        1.0,
        Par::Seq,
    );
    for j in 0..n {
        for i in 0..j {
            g[(i, j)] = g[(j, i)];
        }
    }
    g
}

fn is_symmetric(a: &Mat<f64>) -> bool {
    let n = a.nrows();
    if n != a.ncols() {
        return false;
    }
    let scale = a.norm_max().max(1e-300);
    (0..n).all(|j| (0..j).all(|i| (a[(i, j)] - a[(j, i)]).abs() <= 1e-13 * scale))
}

/// `tr(A^{-1}) = |L^{-1}|_F^2` when `A = L L^T`.
fn spd_inverse_trace(a: &Mat<f64>) -> Option<f64> {
    if !is_symmetric(a) {
        return None;
    }
    let llt = a.llt(Side::Lower).ok()?;
    let n = a.nrows();
    let mut li = Mat::<f64>::zeros(n, n);
    invert_lower_triangular(li.as_mut(), llt.L(), Par::Seq);
    let t = li.squared_norm_l2();
    t.is_finite().then_some(t)
}

fn trace(m: &Mat<f64>) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

fn inverse_any(a: &Mat<f64>) -> Option<Mat<f64>> {
    if is_symmetric(a) {
        if let Ok(llt) = a.llt(Side::Lower) {
            let inv = llt.inverse();
            if inv.as_ref().is_all_finite() {
                return Some(inv);
            }
        }
    }
    inverse(a)
}

/// Normalized traces of the requested blocks of `Q^{-1}` (rectangular
/// blocks give 0).
///
/// Diagonal blocks that are exactly the identity and not coupled to each other
/// are eliminated first, so only the Schur complement on the remaining blocks
/// is inverted.
pub fn pencil_block_traces(
    q: &Pencil,
    inst: &Instance,
    want: &BTreeSet<(usize, usize)>,
) -> Result<Option<BTreeMap<(usize, usize), f64>>> {
    let p = q.size();
    let sizes: Vec<usize> = q.dims.iter().map(|d| inst.size(d)).collect::<Result<_>>()?;
    let mut blocks: Vec<Vec<Option<Mat<f64>>>> = vec![vec![None; p]; p];
    for i in 0..p {
        for j in 0..p {
            let b = q.block(i, j);
            if !b.is_zero() {
                blocks[i][j] = Some(inst.block(b, &q.dims[i], &q.dims[j])?);
            }
        }
    }
    let is_identity = |k: usize| {
        let b = q.block(k, k);
        b.terms.is_empty() && b.identity.is_one()
    };
    let coupled = |a: usize, b: usize| !q.block(a, b).is_zero() || !q.block(b, a).is_zero();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by_key(|&k| (std::cmp::Reverse(sizes[k]), k));
    let mut elim: Vec<usize> = Vec::new();
    for k in order {
        if is_identity(k) && elim.iter().all(|&a| !coupled(a, k)) {
            elim.push(k);
        }
    }
    elim.sort();
    let rest: Vec<usize> = (0..p).filter(|k| !elim.contains(k)).collect();
    let mut off = vec![0usize; p];
    let mut total = 0;
    for &r in &rest {
        off[r] = total;
        total += sizes[r];
    }
    let gather = |rows: &[usize], cols: &[usize]| {
        let nr: usize = rows.iter().map(|&r| sizes[r]).sum();
        let nc: usize = cols.iter().map(|&c| sizes[c]).sum();
        let mut m = Mat::<f64>::zeros(nr, nc);
        let mut ro = 0;
        for &r in rows {
            let mut co = 0;
            for &c in cols {
                if let Some(b) = &blocks[r][c] {
                    m.as_mut().submatrix_mut(ro, co, sizes[r], sizes[c]).copy_from(b);
                }
                co += sizes[c];
            }
            ro += sizes[r];
        }
        m
    };
    // B_a = Q[a, rest], C_a = Q[rest, a]
    let bs: BTreeMap<usize, Mat<f64>> = elim.iter().map(|&a| (a, gather(&[a], &rest))).collect();
    let cs: BTreeMap<usize, Mat<f64>> = elim.iter().map(|&a| (a, gather(&rest, &[a]))).collect();
    let mut s = gather(&rest, &rest);
    let mut products: BTreeMap<(usize, usize), Mat<f64>> = BTreeMap::new();
    for &a in &elim {
        let cb = &cs[&a] * &bs[&a];
        s = &s - &cb;
        products.insert((a, a), cb);
    }
    let sinv = if total == 0 {
        Mat::zeros(0, 0)
    } else {
        match inverse_any(&s) {
            Some(x) => x,
            None => return Ok(None),
        }
    };
    let mut out = BTreeMap::new();
    for &(i, j) in want {
        if i >= p || j >= p {
            return Err(Error::IndexOutOfRange(i, j, p));
        }
        if q.dims[i] != q.dims[j] {
            out.insert((i, j), 0.0);
            continue;
        }
        let n = sizes[i];
        let (ei, ej) = (elim.contains(&i), elim.contains(&j));
        let tr = match (ei, ej) {
            (false, false) => (0..n).map(|k| sinv[(off[i] + k, off[j] + k)]).sum::<f64>(),
            (true, true) => {
                // I + B_i S^{-1} C_j
                if !products.contains_key(&(j, i)) {
                    products.insert((j, i), &cs[&j] * &bs[&i]);
                }
                let cb = &products[&(j, i)];
                let mut t = if i == j { n as f64 } else { 0.0 };
                for c in 0..total {
                    for r in 0..total {
                        t += sinv[(r, c)] * cb[(c, r)];
                    }
                }
                t
            }
            (true, false) => {
                // -B_i S^{-1} restricted to block column j
                let b = &bs[&i];
                let mut t = 0.0;
                for k in 0..n {
                    for r in 0..total {
                        t -= b[(k, r)] * sinv[(r, off[j] + k)];
                    }
                }
                t
            }
            (false, true) => {
                // -S^{-1} C_j restricted to block row i
                let c = &cs[&j];
                let mut t = 0.0;
                for k in 0..n {
                    for r in 0..total {
                        t -= sinv[(off[i] + k, r)] * c[(r, k)];
                    }
                }
                t
            }
        };
        out.insert((i, j), tr / n as f64);
    }
    Ok(Some(out))
}

/// Monte Carlo of the block traces of `Q^{-1}` for `entries` plus the
/// selection `u^T Q^{-1} v`.
pub fn monte_carlo_pencil(
    q: &Pencil,
    entries: &[(usize, usize)],
    setup: &McSetup,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if trials == 0 {
        return Err(Error::Invalid("at least one trial is needed".into()));
    }
    let spectra = derive_all(&setup.spectra, &setup.rewrites)?;
    let terms = q.terms()?;
    let mut want: BTreeSet<(usize, usize)> = entries.iter().copied().collect();
    want.extend(terms.iter().map(|t| (t.0, t.1)));
    let symbols = q.symbols();
    let samples = run_trials(trials, seed, MAX_FAILURES, |rng| {
        let inst = setup.draw(&symbols, &spectra, rng)?;
        pencil_block_traces(q, &inst, &want)
    })?;
    let coeffs: Vec<((usize, usize), f64)> = terms
        .iter()
        .map(|(i, j, c)| ((*i, *j), num_traits::ToPrimitive::to_f64(c).unwrap_or(f64::NAN)))
        .collect();
    let targets: Vec<f64> = samples.iter().map(|s| coeffs.iter().map(|(e, c)| c * s[e]).sum()).collect();
    let est = Estimate::from_samples(&targets);
    let mut out = BTreeMap::new();
    for &e in entries {
        let xs: Vec<f64> = samples.iter().map(|s| s[&e]).collect();
        out.insert(e, Estimate::from_samples(&xs));
    }
    Ok(MonteCarloEstimate { mean: est.mean, stderr: est.stderr, trials, seed, entries: out })
}

/// Concrete sizes from a sample size and `dim = c * n` substitutions, where
/// `c` is evaluated with `binding` and rounded.
pub fn sizes_from_subs(
    n: usize,
    sample_dim: &str,
    subs: &[(crate::symcore::Var, crate::symcore::ScalarExpr)],
    binding: &NumericBinding,
) -> Result<BTreeMap<String, usize>> {
    let mut out = BTreeMap::from([(sample_dim.to_string(), n)]);
    for (v, e) in subs {
        for w in e.vars() {
            if w.name() != sample_dim && !out.contains_key(w.name()) && binding.get(w.name()).is_none() {
                return Err(Error::Unbound(w.name().to_string()));
            }
        }
        let x = e.eval_f64(&|w| match out.get(w.name()) {
            Some(&s) => s as f64,
            None => binding.get(w.name()).unwrap_or(f64::NAN),
        });
        if !(x >= 0.5) || !x.is_finite() {
            return Err(Error::Invalid(format!("{} evaluates to {x}", v.name())));
        }
        out.insert(v.name().to_string(), x.round() as usize);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::dense::random_spd;
    use crate::pencil::{from_json, load};

    fn mp() -> Pencil {
        load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/mp.json")).unwrap()
    }

    #[test]
    fn schur_traces_match_full_inverse() {
        for name in ["mp", "random_features", "ridge_bias", "subordination"] {
            let path = format!("{}/fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"));
            let q = load(&path).unwrap();
            let sizes: BTreeMap<String, usize> =
                q.dims.iter().map(|d| (d.name().to_string(), 3 + d.name().len() * 2)).collect();
            let mut setup = McSetup { sizes, ..Default::default() };
            for s in q.symbols().values() {
                setup.variances.insert(s.name.clone(), crate::symcore::ScalarExpr::ratio(1, 7));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut inst = Instance { sizes: setup.sizes.clone(), ..Default::default() };
            for s in q.symbols().values() {
                let (r, c) = (inst.size(&s.rows).unwrap(), inst.size(&s.cols).unwrap());
                let m = if s.is_random() { gaussian(r, c, 0.4, &mut rng) } else { random_spd(r, &mut rng) };
                inst.matrices.insert(s.name.clone(), m);
            }
            inst.scalars.insert("lambda".into(), 0.7);
            let p = q.size();
            let want: BTreeSet<(usize, usize)> = (0..p).flat_map(|i| (0..p).map(move |j| (i, j))).collect();
            let fast = pencil_block_traces(&q, &inst, &want).unwrap().unwrap();
            let (full, off) = inst.assemble(&q.blocks, &q.dims).unwrap();
            let inv = inverse(&full).unwrap();
            for (&(i, j), &t) in &fast {
                let n = off[i + 1] - off[i];
                let exact = if q.dims[i] == q.dims[j] {
                    (0..n).map(|k| inv[(off[i] + k, off[j] + k)]).sum::<f64>() / n as f64
                } else {
                    0.0
                };
                assert!((t - exact).abs() < 1e-10, "{name} ({i}, {j}): {t} vs {exact}");
            }
        }
    }

    #[test]
    fn deterministic_pencil_has_zero_stderr() {
        let src = serde_json::json!({
            "format": "freetrace-pencil", "version": 1, "dims": ["d"],
            "symbols": [{"name": "Sigma", "rows": "d", "cols": "d", "kind": "det"}],
            "blocks": [["I + Sigma"]], "selection": {"u": ["1"], "v": ["1"]}
        });
        let q = from_json(&src.to_string()).unwrap();
        let setup = McSetup {
            sizes: BTreeMap::from([("d".into(), 4)]),
            spectra: vec![SpectrumSpec::from_columns("d", &[("Sigma", vec![1.0, 3.0])]).unwrap()],
            ..Default::default()
        };
        let est = monte_carlo_pencil(&q, &[(0, 0)], &setup, 3, 9).unwrap();
        assert_eq!(est.stderr, 0.0);
        assert!((est.mean - (0.5 + 0.25) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn mp_small_is_reproducible() {
        let q = mp();
        let mut setup = McSetup {
            sizes: BTreeMap::from([("n".into(), 60), ("d".into(), 30)]),
            binding: NumericBinding::new().with("lambda", 1.0),
            ..Default::default()
        };
        setup.variances.insert("Z".into(), crate::symcore::ScalarExpr::ratio(1, 60));
        let a = monte_carlo_pencil(&q, &[(0, 0), (1, 1)], &setup, 4, 42).unwrap();
        let b = monte_carlo_pencil(&q, &[(0, 0), (1, 1)], &setup, 4, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.stderr > 0.0);
    }

    #[test]
    fn spd_trace_shortcut() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_spd(9, &mut rng);
        let t = spd_inverse_trace(&a).unwrap();
        assert!((t - trace(&inverse(&a).unwrap())).abs() < 1e-9);
        let z = gaussian(7, 5, 1.0, &mut rng);
        let g = gram(&z);
        let full = z.transpose() * &z;
        assert!((&g - &full).norm_max() < 1e-12);
    }
}
