//! Trace evaluation over spectra and the damped fixed-point solver.

use std::collections::{BTreeMap, HashMap};

use num_traits::ToPrimitive;
use serde_json::{json, Value};

use super::spectrum::{derive_all, lookup, NumericBinding, SpectrumSpec};
use crate::error::{Error, Result};
use crate::fptcore::{FixedPointSystem, TraceAtom};
use crate::symcore::{Poly, ScalarExpr, Var, VarKind};

/// Polynomial with variables resolved to slots of a value vector.
#[derive(Clone, Debug)]
struct CPoly(Vec<(f64, Vec<(usize, i32)>)>);

impl CPoly {
    fn new(p: &Poly, slot: &HashMap<Var, usize>) -> CPoly {
        CPoly(
            p.terms()
                .iter()
                .map(|t| {
                    let c = t.coeff.to_f64().unwrap_or(f64::NAN);
                    (c, t.mono.factors().iter().map(|(v, e)| (slot[v], *e as i32)).collect())
                })
                .collect(),
        )
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|(c, f)| f.iter().fold(*c, |acc, &(s, e)| acc * if e == 1 { x[s] } else { x[s].powi(e) }))
            .sum()
    }
}

#[derive(Clone, Debug)]
struct CFrac {
    num: CPoly,
    den: CPoly,
}

impl CFrac {
    fn new(e: &ScalarExpr, slot: &HashMap<Var, usize>) -> CFrac {
        CFrac { num: CPoly::new(e.num(), slot), den: CPoly::new(e.den(), slot) }
    }

    fn eval(&self, x: &[f64]) -> Option<f64> {
        let d = self.den.eval(x);
        let v = self.num.eval(x) / d;
        (d != 0.0 && v.is_finite()).then_some(v)
    }
}

struct CTrace {
    body: CFrac,
    /// `(slot, column)` for each deterministic matrix in the body.
    columns: Vec<(usize, usize)>,
    tuples: Vec<Vec<f64>>,
}

/// A system compiled against a binding and spectra. Slot layout: unknowns,
/// then constants, then trace atoms, then deterministic eigenvalues.
struct Compiled {
    unknowns: Vec<(usize, usize)>,
    values: Vec<f64>,
    trace_base: usize,
    rhs: Vec<CFrac>,
    traces: Vec<CTrace>,
}

fn det_name(v: &Var) -> Option<&str> {
    match v.kind() {
        VarKind::MatScalar { symbol, deterministic: true } => Some(symbol),
        _ => None,
    }
}

impl Compiled {
    fn new(sys: &FixedPointSystem, spectra: &[SpectrumSpec], binding: &NumericBinding) -> Result<Compiled> {
        let spectra = derive_all(spectra, &sys.rewrites)?;
        let unknowns: Vec<(usize, usize)> = sys.equations.iter().map(|e| e.lhs).collect();
        let mut slot: HashMap<Var, usize> = HashMap::new();
        let mut values = Vec::new();
        for &(i, j) in &unknowns {
            slot.insert(Var::g(i, j), values.len());
            values.push(0.0);
        }
        let mut all_vars = std::collections::BTreeSet::new();
        for e in &sys.equations {
            all_vars.extend(e.rhs.vars());
        }
        for t in &sys.traces {
            all_vars.extend(t.body.vars());
        }
        for v in &all_vars {
            if matches!(v.kind(), VarKind::Const | VarKind::Dim) {
                let x = binding.get(v.name()).ok_or_else(|| Error::Unbound(v.name().to_string()))?;
                slot.insert(v.clone(), values.len());
                values.push(x);
            }
            if let VarKind::GEntry(i, j) = v.kind() {
                if !slot.contains_key(v) {
                    return Err(Error::Invalid(format!("system is not closed: G_{{{i},{j}}} has no equation")));
                }
            }
        }
        let trace_base = values.len();
        for t in &sys.traces {
            slot.insert(Var::trace_atom(t.id), trace_base + t.id);
        }
        values.resize(trace_base + sys.traces.len(), 0.0);
        let mut traces = Vec::new();
        for t in &sys.traces {
            let mut columns = Vec::new();
            let mut spec: Option<&SpectrumSpec> = None;
            for v in t.body.vars() {
                let Some(name) = det_name(&v) else { continue };
                let s = lookup(&spectra, t.dim.name(), name)
                    .ok_or_else(|| Error::Unbound(format!("spectrum of {name} (dimension {})", t.dim)))?;
                if let Some(s0) = spec {
                    if s0 != s {
                        return Err(Error::Invalid(format!(
                            "matrices of trace T{} come from different spectra",
                            t.id
                        )));
                    }
                }
                spec = Some(s);
                if !slot.contains_key(&v) {
                    slot.insert(v.clone(), values.len());
                    values.push(0.0);
                }
                columns.push((slot[&v], s.column_index(name).unwrap()));
            }
            let tuples = spec.map(|s| s.tuples.clone()).unwrap_or_else(|| vec![vec![]]);
            traces.push(CTrace { body: CFrac::new(&t.body, &slot), columns, tuples });
        }
        let rhs = sys.equations.iter().map(|e| CFrac::new(&e.rhs, &slot)).collect();
        Ok(Compiled { unknowns, values, trace_base, rhs, traces })
    }

    /// `rhs(G)`; `Err(k)` names the trace atom with a pole, `Ok(None)` a
    /// pole in an equation.
    fn apply(&mut self, g: &[f64]) -> std::result::Result<Option<Vec<f64>>, usize> {
        self.values[..g.len()].copy_from_slice(g);
        for (k, t) in self.traces.iter().enumerate() {
            let mut acc = 0.0;
            for tuple in &t.tuples {
                for &(s, c) in &t.columns {
                    self.values[s] = tuple[c];
                }
                acc += t.body.eval(&self.values).ok_or(k)?;
            }
            self.values[self.trace_base + k] = acc / t.tuples.len() as f64;
        }
        Ok(self.rhs.iter().map(|r| r.eval(&self.values)).collect())
    }
}

/// Normalized trace of `atom` as the average over eigendirections of its
/// scalar body. `spectra` must already contain every matrix of the body.
pub fn eval_trace(
    atom: &TraceAtom,
    spectra: &[SpectrumSpec],
    gvals: &BTreeMap<(usize, usize), f64>,
    binding: &NumericBinding,
) -> Result<f64> {
    let vars = atom.body.vars();
    let mut spec: Option<&SpectrumSpec> = None;
    for v in &vars {
        match v.kind() {
            VarKind::MatScalar { symbol, deterministic: true } => {
                let s = lookup(spectra, atom.dim.name(), symbol)
                    .ok_or_else(|| Error::Unbound(format!("spectrum of {symbol} (dimension {})", atom.dim)))?;
                spec = Some(s);
            }
            VarKind::GEntry(i, j) => {
                if !gvals.contains_key(&(*i, *j)) {
                    return Err(Error::Unbound(v.name().to_string()));
                }
            }
            _ => {
                if binding.get(v.name()).is_none() {
                    return Err(Error::Unbound(v.name().to_string()));
                }
            }
        }
    }
    let tuples = spec.map(|s| s.tuples.as_slice()).unwrap_or(&[]);
    let count = tuples.len().max(1);
    let mut acc = 0.0;
    for k in 0..count {
        let value = |v: &Var| match v.kind() {
            VarKind::MatScalar { symbol, .. } => {
                let s = spec.unwrap();
                tuples[k][s.column_index(symbol).unwrap()]
            }
            VarKind::GEntry(i, j) => gvals[&(*i, *j)],
            _ => binding.get(v.name()).unwrap(),
        };
        let d = atom.body.den().eval_f64(&value);
        let x = atom.body.num().eval_f64(&value) / d;
        if d == 0.0 || !x.is_finite() {
            return Err(Error::TracePole(format!("T{} at eigendirection {k}", atom.id)));
        }
        acc += x;
    }
    Ok(acc / count as f64)
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Starting point; defaults to the right-hand sides at `G = 0`, which is
    /// the zero-variance solution `g = f^{-1}`.
    pub init: Option<BTreeMap<(usize, usize), f64>>,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { init: None, damping: 0.5, tol: 1e-12, max_iter: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub values: BTreeMap<(usize, usize), f64>,
    /// `max |G - rhs(G)|` at the returned values.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `sum coeff * G` over the system's targets.
    pub target: f64,
}

impl SolveResult {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(&(i, j)).copied().unwrap_or(f64::NAN)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "values": self.values.iter().map(|(&(i, j), x)| json!({"entry": [i, j], "value": x})).collect::<Vec<_>>(),
            "target": self.target,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
        })
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        for (&(i, j), x) in &self.values {
            out.push_str(&format!("G_{{{i},{j}}} = {x:.15}\n"));
        }
        out.push_str(&format!("target = {:.15}\n", self.target));
        out.push_str(&format!(
            "residual = {:.3e}, iterations = {}, converged = {}\n",
            self.residual, self.iterations, self.converged
        ));
        out
    }
}

fn target_value(sys: &FixedPointSystem, values: &BTreeMap<(usize, usize), f64>) -> f64 {
    sys.targets
        .iter()
        .map(|t| t.coeff.to_f64().unwrap_or(f64::NAN) * values.get(&t.rep).copied().unwrap_or(0.0))
        .sum()
}

/// Right-hand sides of every equation at `gvals`.
pub fn eval_rhs(
    sys: &FixedPointSystem,
    spectra: &[SpectrumSpec],
    gvals: &BTreeMap<(usize, usize), f64>,
    binding: &NumericBinding,
) -> Result<BTreeMap<(usize, usize), f64>> {
    let mut c = Compiled::new(sys, spectra, binding)?;
    let g: Vec<f64> = c.unknowns.iter().map(|e| gvals.get(e).copied().unwrap_or(0.0)).collect();
    let out = match c.apply(&g) {
        Ok(Some(v)) => v,
        Ok(None) => return Err(Error::Numeric("pole in an equation".into())),
        Err(k) => return Err(Error::TracePole(format!("T{k}"))),
    };
    Ok(c.unknowns.iter().copied().zip(out).collect())
}

/// Largest `|G - rhs(G)|`.
pub fn residual(
    sys: &FixedPointSystem,
    spectra: &[SpectrumSpec],
    gvals: &BTreeMap<(usize, usize), f64>,
    binding: &NumericBinding,
) -> Result<f64> {
    let r = eval_rhs(sys, spectra, gvals, binding)?;
    Ok(r.iter().map(|(e, x)| (x - gvals.get(e).copied().unwrap_or(0.0)).abs()).fold(0.0, f64::max))
}

/// Damped simultaneous iteration `G <- (1 - a) G + a rhs(G)`. Failing to
/// converge is reported through the result, not as an error.
pub fn solve_fixed_point(
    sys: &FixedPointSystem,
    spectra: &[SpectrumSpec],
    binding: &NumericBinding,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let mut c = Compiled::new(sys, spectra, binding)?;
    let n = c.unknowns.len();
    let pole = |k: usize| Error::TracePole(format!("T{k} at the initial point"));
    let mut g: Vec<f64> = match &opts.init {
        Some(init) => c.unknowns.iter().map(|e| init.get(e).copied().unwrap_or(0.0)).collect(),
        None => c
            .apply(&vec![0.0; n])
            .map_err(pole)?
            .ok_or_else(|| Error::Numeric("pole in an equation at G = 0".into()))?,
    };
    let a = opts.damping;
    let mut res = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations <= opts.max_iter {
        let Ok(Some(r)) = c.apply(&g) else {
            res = f64::NAN;
            break;
        };
        res = g.iter().zip(&r).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if !res.is_finite() {
            break;
        }
        if res < opts.tol {
            converged = true;
            break;
        }
        if iterations == opts.max_iter {
            break;
        }
        for (x, y) in g.iter_mut().zip(&r) {
            *x = (1.0 - a) * *x + a * y;
        }
        iterations += 1;
    }
    let values: BTreeMap<(usize, usize), f64> = c.unknowns.iter().copied().zip(g).collect();
    let target = target_value(sys, &values);
    Ok(SolveResult { values, residual: res, iterations, converged, target })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::DimSymbol;

    fn c(name: &str) -> ScalarExpr {
        ScalarExpr::var(Var::constant(name))
    }

    #[test]
    fn simple_trace() {
        let sigma = ScalarExpr::var(Var::mat_scalar("Sigma", true));
        let g = ScalarExpr::var(Var::g(0, 0));
        let lam = c("lambda");
        let body = lam.div(&lam.add(&sigma.mul(&g))).unwrap();
        let atom = TraceAtom { id: 0, dim: DimSymbol::new("d"), body };
        let spec = [SpectrumSpec::identity("d", &["Sigma"])];
        let gv = BTreeMap::from([((0, 0), 1.0)]);
        let b = NumericBinding::new().with("lambda", 1.0);
        assert!((eval_trace(&atom, &spec, &gv, &b).unwrap() - 0.5).abs() < 1e-15);
        let b = NumericBinding::new().with("lambda", 0.0);
        let gv = BTreeMap::from([((0, 0), 0.0)]);
        assert!(matches!(eval_trace(&atom, &spec, &gv, &b), Err(Error::TracePole(_))));
    }
}
