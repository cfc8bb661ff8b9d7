//! Fixed-point systems: closure, deduplication, matricization and output.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use num_traits::{One, Signed};
use serde_json::{json, Value};

use super::factor::{factor, Factored};
use super::inverse::{invert, sub, SMatrix};
use super::transform::ScalarizedPencil;
use crate::dsl::Rewrite;
use crate::error::{Error, Result};
use crate::symcore::render::{self, latex_with, var_latex};
use crate::symcore::{DimSymbol, Format, Monomial, Poly, Rational, ScalarExpr, SubstitutionMap, Term, Var, VarKind};

/// Entries of `q^{-1}` that are equal as rational functions, each class sorted
/// row-major. Structurally zero entries are not listed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EquivalenceClasses {
    pub classes: Vec<Vec<(usize, usize)>>,
}

impl EquivalenceClasses {
    pub fn class_of(&self, e: (usize, usize)) -> Option<&[(usize, usize)]> {
        self.classes.iter().find(|c| c.contains(&e)).map(Vec::as_slice)
    }

    /// Representative of every listed entry. Members are merged only when
    /// their blocks have the same shape; the row-major smallest wins.
    pub fn representatives(&self, dims: &[DimSymbol], dedup: bool) -> BTreeMap<(usize, usize), (usize, usize)> {
        let mut out = BTreeMap::new();
        for class in &self.classes {
            let mut first: HashMap<(&DimSymbol, &DimSymbol), (usize, usize)> = HashMap::new();
            for &(s, t) in class {
                let rep = if dedup { *first.entry((&dims[s], &dims[t])).or_insert((s, t)) } else { (s, t) };
                out.insert((s, t), rep);
            }
        }
        out
    }
}

/// Sparsity and equality structure of the scalarized inverse pencil.
#[derive(Clone, Debug)]
pub struct Structure {
    pub qinv: SMatrix,
    pub zero: Vec<Vec<bool>>,
    pub classes: EquivalenceClasses,
}

pub fn infer_structure(sp: &ScalarizedPencil) -> Result<Structure> {
    let qinv = invert(&sp.q).ok_or(Error::SingularPencil)?;
    let zero: Vec<Vec<bool>> = qinv.iter().map(|r| r.iter().map(ScalarExpr::is_zero).collect()).collect();
    let mut index: HashMap<&ScalarExpr, usize> = HashMap::new();
    let mut classes: Vec<Vec<(usize, usize)>> = Vec::new();
    for (i, row) in qinv.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            match index.get(x) {
                Some(&k) => classes[k].push((i, j)),
                None => {
                    index.insert(x, classes.len());
                    classes.push(vec![(i, j)]);
                }
            }
        }
    }
    Ok(Structure { qinv: qinv.clone(), zero, classes: EquivalenceClasses { classes } })
}

/// `g = (f - r)^{-1}` with structurally zero entries cleared.
pub fn invert_difference(f: &SMatrix, r: &SMatrix, zero: &[Vec<bool>]) -> Result<SMatrix> {
    let mut g = invert(&sub(f, r)).ok_or(Error::SingularDifference)?;
    for (i, row) in g.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            if zero[i][j] {
                *x = ScalarExpr::zero();
            }
        }
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equation {
    pub lhs: (usize, usize),
    pub rhs: ScalarExpr,
}

/// `T_k = trbar(body)` over the deterministic matrices in `body`, all of
/// dimension `dim`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceAtom {
    pub id: usize,
    pub dim: DimSymbol,
    pub body: ScalarExpr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetEntry {
    pub entry: (usize, usize),
    pub rep: (usize, usize),
    pub coeff: Rational,
}

/// Closed set of equations `G_{s,t} = rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedPointSystem {
    pub dims: Vec<DimSymbol>,
    pub equations: Vec<Equation>,
    pub targets: Vec<TargetEntry>,
    pub traces: Vec<TraceAtom>,
    pub subs: Vec<(Var, ScalarExpr)>,
    pub rewrites: Vec<Rewrite>,
    pub warnings: Vec<String>,
}

fn g_vars(e: &ScalarExpr) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = e.vars().iter().filter_map(Var::g_index).collect();
    out.sort();
    out
}

/// Breadth-first closure from the targets over referenced `G` entries.
pub fn construct_equations(
    g: &SMatrix,
    targets: &[(usize, usize, Rational)],
    subs: &[(Var, ScalarExpr)],
    reps: &BTreeMap<(usize, usize), (usize, usize)>,
    dims: &[DimSymbol],
) -> Result<FixedPointSystem> {
    let p = g.len();
    let map: SubstitutionMap = subs.iter().cloned().collect();
    let mut sys = FixedPointSystem {
        dims: dims.to_vec(),
        equations: Vec::new(),
        targets: Vec::new(),
        traces: Vec::new(),
        subs: subs.to_vec(),
        rewrites: Vec::new(),
        warnings: Vec::new(),
    };
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    for &(i, j, ref c) in targets {
        if i >= p || j >= p {
            return Err(Error::IndexOutOfRange(i, j, p));
        }
        let rep = reps.get(&(i, j)).copied();
        match rep {
            Some(rep) if dims[i] == dims[j] => {
                sys.targets.push(TargetEntry { entry: (i, j), rep, coeff: c.clone() });
                if seen.insert(rep) {
                    queue.push_back(rep);
                }
            }
            _ => {
                sys.warnings.push(format!(
                    "target ({i}, {j}) is a zero or non-square block; its trace is 0"
                ));
                sys.targets.push(TargetEntry { entry: (i, j), rep: (i, j), coeff: c.clone() });
                if seen.insert((i, j)) {
                    sys.equations.push(Equation { lhs: (i, j), rhs: ScalarExpr::zero() });
                }
            }
        }
    }
    while let Some((s, t)) = queue.pop_front() {
        let rhs = g[s][t].substitute(&map)?;
        for e in g_vars(&rhs) {
            if seen.insert(e) {
                queue.push_back(e);
            }
        }
        sys.equations.push(Equation { lhs: (s, t), rhs });
    }
    Ok(sys)
}

/// Value with every `G` set to the same number and other variables to a
/// number derived from their name; invariant under relabeling of `G`.
fn fingerprint(e: &ScalarExpr) -> f64 {
    e.eval_f64(&|v| {
        if v.is_g() {
            return 0.3718;
        }
        let h = v.name().bytes().fold(17u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64));
        0.5 + (h % 1000) as f64 / 997.0
    })
}

fn det_symbol(v: &Var) -> Option<&str> {
    match v.kind() {
        VarKind::MatScalar { symbol, deterministic: true } => Some(symbol),
        _ => None,
    }
}

/// Reduces `x_base^(k*power + r)` to `x_target^k x_base^r` term by term.
fn rewrite_poly(p: &Poly, rw: &Rewrite, base: &Var, target: &Var) -> Poly {
    let terms = p
        .terms()
        .iter()
        .map(|t| {
            let (e, rest) = t.mono.split_var(base);
            let (k, r) = (e / rw.power, e % rw.power);
            let mono = rest.mul(&Monomial::var(base.clone(), r)).mul(&Monomial::var(target.clone(), k));
            Term { mono, coeff: t.coeff.clone() }
        })
        .collect();
    Poly::from_terms(terms)
}

pub fn apply_rewrites(e: &ScalarExpr, rewrites: &[Rewrite]) -> Result<ScalarExpr> {
    let mut out = e.clone();
    for rw in rewrites {
        let base = Var::mat_scalar(&rw.base, true);
        let target = Var::mat_scalar(&rw.target, true);
        if !out.contains_var(&base) || rw.power == 0 {
            continue;
        }
        out = ScalarExpr::from_fraction(
            rewrite_poly(out.num(), rw, &base, &target),
            rewrite_poly(out.den(), rw, &base, &target),
        )?;
    }
    Ok(out)
}

/// Turns every right-hand side that involves deterministic matrices into a
/// normalized-trace atom. `symbol_dims` gives the size of each deterministic
/// symbol.
pub fn matricize(
    sys: &FixedPointSystem,
    symbol_dims: &BTreeMap<String, DimSymbol>,
    rewrites: &[Rewrite],
) -> Result<FixedPointSystem> {
    let mut out = sys.clone();
    out.rewrites = rewrites.to_vec();
    out.traces.clear();
    for eq in &mut out.equations {
        let names: Vec<String> = eq.rhs.vars().iter().filter_map(|v| det_symbol(v).map(str::to_string)).collect();
        if names.is_empty() {
            continue;
        }
        let mut dim: Option<DimSymbol> = None;
        for n in &names {
            let d = symbol_dims.get(n).ok_or_else(|| Error::Unbound(n.clone()))?;
            match &dim {
                None => dim = Some(d.clone()),
                Some(d0) if d0 != d => {
                    return Err(Error::shape(
                        format!("trace for G_{{{},{}}}", eq.lhs.0, eq.lhs.1),
                        format!("deterministic matrices of sizes {d0} and {d} in one trace"),
                    ))
                }
                _ => {}
            }
        }
        let id = out.traces.len();
        let body = apply_rewrites(&eq.rhs, rewrites)?;
        out.traces.push(TraceAtom { id, dim: dim.unwrap(), body });
        eq.rhs = ScalarExpr::var(Var::trace_atom(id));
    }
    Ok(out)
}

impl FixedPointSystem {
    pub fn lhs_set(&self) -> BTreeSet<(usize, usize)> {
        self.equations.iter().map(|e| e.lhs).collect()
    }

    /// Right-hand side with trace atoms expanded to their bodies.
    pub fn expanded_rhs(&self, eq: &Equation) -> ScalarExpr {
        match eq.rhs.vars().iter().find_map(|v| match v.kind() {
            VarKind::Trace(k) => Some(*k),
            _ => None,
        }) {
            Some(k) if eq.rhs == ScalarExpr::var(Var::trace_atom(k)) => self.traces[k].body.clone(),
            _ => eq.rhs.clone(),
        }
    }

    /// Every `G` referenced on a right-hand side (including inside traces).
    pub fn referenced(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for eq in &self.equations {
            out.extend(g_vars(&self.expanded_rhs(eq)));
        }
        out
    }

    /// Every referenced `G` has its own equation.
    pub fn is_closed(&self) -> bool {
        self.referenced().is_subset(&self.lhs_set())
    }

    /// Bijection of unknowns under which the equations of `self` become those
    /// of `other`, comparing right-hand sides (traces expanded) as rational
    /// functions.
    pub fn relabeling_to(&self, other: &FixedPointSystem) -> Option<BTreeMap<(usize, usize), (usize, usize)>> {
        if self.equations.len() != other.equations.len() {
            return None;
        }
        let a: Vec<((usize, usize), ScalarExpr)> =
            self.equations.iter().map(|e| (e.lhs, self.expanded_rhs(e))).collect();
        let b: Vec<((usize, usize), ScalarExpr)> =
            other.equations.iter().map(|e| (e.lhs, other.expanded_rhs(e))).collect();
        let fa: Vec<f64> = a.iter().map(|x| fingerprint(&x.1)).collect();
        let fb: Vec<f64> = b.iter().map(|x| fingerprint(&x.1)).collect();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs())) || (x.is_nan() && y.is_nan());
        let candidates: Vec<Vec<usize>> =
            fa.iter().map(|x| (0..b.len()).filter(|&k| close(*x, fb[k])).collect()).collect();
        let mut assign = vec![usize::MAX; a.len()];
        let mut used = vec![false; b.len()];
        fn search(
            k: usize,
            a: &[((usize, usize), ScalarExpr)],
            b: &[((usize, usize), ScalarExpr)],
            cand: &[Vec<usize>],
            assign: &mut [usize],
            used: &mut [bool],
        ) -> bool {
            if k == a.len() {
                let map: HashMap<(usize, usize), (usize, usize)> =
                    a.iter().zip(assign.iter()).map(|(x, &m)| (x.0, b[m].0)).collect();
                let rename = |v: &Var| match v.g_index() {
                    Some(e) => map.get(&e).map_or_else(|| v.clone(), |&(i, j)| Var::g(i, j)),
                    None => v.clone(),
                };
                return a.iter().zip(assign.iter()).all(|(x, &m)| x.1.rename(&rename) == b[m].1);
            }
            for &m in &cand[k] {
                if !used[m] {
                    used[m] = true;
                    assign[k] = m;
                    if search(k + 1, a, b, cand, assign, used) {
                        return true;
                    }
                    used[m] = false;
                }
            }
            false
        }
        if !search(0, &a, &b, &candidates, &mut assign, &mut used) {
            return None;
        }
        Some(a.iter().zip(assign).map(|(x, m)| (x.0, b[m].0)).collect())
    }

    pub fn equation(&self, lhs: (usize, usize)) -> Option<&Equation> {
        self.equations.iter().find(|e| e.lhs == lhs)
    }

    /// Constants (not dimensions or unknowns) that appear anywhere.
    pub fn constants(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for eq in &self.equations {
            for v in self.expanded_rhs(eq).vars() {
                if matches!(v.kind(), VarKind::Const | VarKind::Dim) {
                    out.insert(v.name().to_string());
                }
            }
        }
        out
    }

    /// Deterministic matrices used by trace atoms.
    pub fn deterministic_symbols(&self) -> BTreeSet<String> {
        self.traces
            .iter()
            .flat_map(|t| t.body.vars().into_iter().filter_map(|v| det_symbol(&v).map(str::to_string)))
            .collect()
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Latex => self.latex(),
            Format::Text => self.text(),
            Format::Json => serde_json::to_string_pretty(&self.to_json()).unwrap(),
        }
    }

    fn rhs_with(&self, eq: &Equation, style: &Style) -> String {
        if let [v] = eq.rhs.vars().into_iter().collect::<Vec<_>>().as_slice() {
            if let VarKind::Trace(k) = v.kind() {
                if eq.rhs == ScalarExpr::var(v.clone()) {
                    return trace_string(&self.traces[*k].body, style);
                }
            }
        }
        style.scalar(&eq.rhs)
    }

    pub fn latex(&self) -> String {
        let style = Style::latex();
        let lines: Vec<String> = self
            .equations
            .iter()
            .map(|eq| format!("{{G}}_{{{},{}}} = {}", eq.lhs.0, eq.lhs.1, self.rhs_with(eq, &style)))
            .collect();
        lines.join(",\\\\\n")
    }

    pub fn text(&self) -> String {
        let style = Style::text();
        let mut out = String::new();
        for eq in &self.equations {
            out.push_str(&format!("G_{{{},{}}} = {}\n", eq.lhs.0, eq.lhs.1, self.rhs_with(eq, &style)));
        }
        if self.targets.len() > 1 || self.targets.iter().any(|t| !t.coeff.is_one()) {
            let parts: Vec<String> = self
                .targets
                .iter()
                .map(|t| format!("({})*G_{{{},{}}}", t.coeff, t.rep.0, t.rep.1))
                .collect();
            out.push_str(&format!("target = {}\n", parts.join(" + ")));
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "format": "freetrace-system",
            "version": 1,
            "dims": self.dims.iter().map(|d| d.name()).collect::<Vec<_>>(),
            "targets": self.targets.iter().map(|t| json!({
                "entry": [t.entry.0, t.entry.1],
                "rep": [t.rep.0, t.rep.1],
                "coeff": t.coeff.to_string(),
            })).collect::<Vec<_>>(),
            "equations": self.equations.iter().map(|e| json!({
                "lhs": [e.lhs.0, e.lhs.1],
                "rhs": render::to_json(&e.rhs),
                "latex": self.rhs_with(e, &Style::latex()),
            })).collect::<Vec<_>>(),
            "traces": self.traces.iter().map(|t| json!({
                "id": t.id,
                "dim": t.dim.name(),
                "body": render::to_json(&t.body),
            })).collect::<Vec<_>>(),
            "subs": self.subs.iter().map(|(v, e)| json!({
                "var": v.name(),
                "kind": v.kind_tag(),
                "value": render::to_json(e),
            })).collect::<Vec<_>>(),
            "rewrites": self.rewrites.iter().map(|r| json!({
                "base": r.base, "power": r.power, "target": r.target,
            })).collect::<Vec<_>>(),
            "warnings": self.warnings,
        })
    }

    pub fn from_json(v: &Value) -> Result<FixedPointSystem> {
        let bad = |what: &str| Error::Invalid(format!("system json: bad {what}"));
        if v["format"] != "freetrace-system" {
            return Err(bad("format"));
        }
        let pair = |x: &Value| -> Result<(usize, usize)> {
            let a = x.as_array().filter(|a| a.len() == 2).ok_or_else(|| bad("index pair"))?;
            let f = |y: &Value| y.as_u64().map(|u| u as usize).ok_or_else(|| bad("index"));
            Ok((f(&a[0])?, f(&a[1])?))
        };
        let arr = |k: &str| v[k].as_array().cloned().unwrap_or_default();
        let dims = arr("dims")
            .iter()
            .map(|d| d.as_str().map(DimSymbol::new).ok_or_else(|| bad("dims")))
            .collect::<Result<_>>()?;
        let mut targets = Vec::new();
        for t in arr("targets") {
            targets.push(TargetEntry {
                entry: pair(&t["entry"])?,
                rep: pair(&t["rep"])?,
                coeff: render::parse_rational(t["coeff"].as_str().ok_or_else(|| bad("coeff"))?)?,
            });
        }
        let mut equations = Vec::new();
        for e in arr("equations") {
            equations.push(Equation { lhs: pair(&e["lhs"])?, rhs: render::from_json(&e["rhs"])? });
        }
        let mut traces = Vec::new();
        for t in arr("traces") {
            traces.push(TraceAtom {
                id: t["id"].as_u64().ok_or_else(|| bad("trace id"))? as usize,
                dim: DimSymbol::new(t["dim"].as_str().ok_or_else(|| bad("trace dim"))?),
                body: render::from_json(&t["body"])?,
            });
        }
        let mut subs = Vec::new();
        for s in arr("subs") {
            let name = s["var"].as_str().ok_or_else(|| bad("subs var"))?;
            let kind = s["kind"].as_str().unwrap_or("dim");
            let var = Var::from_tag(name, kind).ok_or_else(|| bad("subs kind"))?;
            subs.push((var, render::from_json(&s["value"])?));
        }
        let mut rewrites = Vec::new();
        for r in arr("rewrites") {
            rewrites.push(Rewrite {
                base: r["base"].as_str().ok_or_else(|| bad("rewrite"))?.to_string(),
                power: r["power"].as_u64().ok_or_else(|| bad("rewrite"))? as u32,
                target: r["target"].as_str().ok_or_else(|| bad("rewrite"))?.to_string(),
            });
        }
        let warnings = arr("warnings").iter().filter_map(|w| w.as_str().map(str::to_string)).collect();
        Ok(FixedPointSystem { dims, equations, targets, traces, subs, rewrites, warnings })
    }
}

// ------------------------------------------------------------ trace display

struct Style {
    latex: bool,
}

impl Style {
    fn latex() -> Style {
        Style { latex: true }
    }

    fn text() -> Style {
        Style { latex: false }
    }

    fn var(&self, v: &Var) -> String {
        if self.latex {
            var_latex(v)
        } else {
            match v.kind() {
                VarKind::MatScalar { symbol, .. } => symbol.clone(),
                _ => v.name().to_string(),
            }
        }
    }

    fn scalar(&self, e: &ScalarExpr) -> String {
        if self.latex {
            latex_with(e, &|v| self.var(v))
        } else {
            render::text(&e.rename(&|v| match v.kind() {
                VarKind::MatScalar { symbol, .. } => Var::mat_scalar(symbol, true),
                _ => v.clone(),
            }))
        }
    }

    fn identity(&self) -> &'static str {
        if self.latex {
            "\\mathbb{I}"
        } else {
            "I"
        }
    }

    fn sep(&self) -> &'static str {
        if self.latex {
            " "
        } else {
            "*"
        }
    }

    fn paren(&self, s: &str) -> String {
        if self.latex {
            format!("\\left({s}\\right)")
        } else {
            format!("({s})")
        }
    }

    fn pow(&self, base: String, e: i64) -> String {
        if e == 1 {
            base
        } else if self.latex {
            format!("{base}^{{{e}}}")
        } else {
            format!("{base}^{e}")
        }
    }

    fn rational(&self, q: &Rational) -> String {
        if self.latex && !q.is_integer() {
            format!("\\frac{{{}}}{{{}}}", q.numer(), q.denom())
        } else {
            q.to_string()
        }
    }
}

fn is_det(v: &Var) -> bool {
    det_symbol(v).is_some()
}

fn is_unknown(v: &Var) -> bool {
    matches!(v.kind(), VarKind::GEntry(..) | VarKind::Trace(_))
}

/// One term of a matrix polynomial: coefficient, known scalars, matrices (or
/// the identity), then unknowns.
fn term_string(coeff: &Rational, mono: &Monomial, style: &Style) -> String {
    let rank = |v: &Var| if is_unknown(v) { 2 } else if is_det(v) { 1 } else { 0 };
    let factors = mono.factors();
    let has_det = factors.iter().any(|(v, _)| is_det(v));
    let mut parts = Vec::new();
    let c = coeff.abs();
    if !c.is_one() {
        parts.push(style.rational(&c));
    }
    for r in 0..3 {
        if r == 1 && !has_det {
            parts.push(style.identity().to_string());
        }
        for (v, e) in factors.iter().filter(|(v, _)| rank(v) == r) {
            parts.push(style.pow(style.var(v), *e as i64));
        }
    }
    parts.join(style.sep())
}

/// A polynomial in deterministic matrices, scalars on the identity.
fn matrix_poly(p: &Poly, style: &Style) -> String {
    let mut terms: Vec<&Term> = p.terms().iter().collect();
    terms.sort_by_key(|t| {
        (
            t.mono.factors().iter().any(|(v, _)| is_unknown(v)),
            t.mono.factors().iter().any(|(v, _)| is_det(v)),
        )
    });
    let mut out = String::new();
    for (k, t) in terms.iter().enumerate() {
        let neg = t.coeff.is_negative();
        match (k, neg) {
            (0, true) => out.push_str("- "),
            (0, false) => {}
            (_, true) => out.push_str(" - "),
            (_, false) => out.push_str(" + "),
        }
        out.push_str(&term_string(&t.coeff, &t.mono, style));
    }
    out
}

fn has_det_var(p: &Poly) -> bool {
    p.vars().iter().any(is_det)
}

fn split_mono(m: &Monomial) -> (Monomial, Monomial) {
    let (det, sc): (Vec<_>, Vec<_>) = m.factors().iter().cloned().partition(|(v, _)| is_det(v));
    (Monomial::from_pairs(sc), Monomial::from_pairs(det))
}

/// `trbar(...)` of a rational function of commuting deterministic matrices.
fn trace_string(body: &ScalarExpr, style: &Style) -> String {
    let num: Factored = factor(body.num());
    let den: Factored = factor(body.den());
    let (num_sc, num_det) = split_mono(&num.mono);
    let (den_sc, den_det) = split_mono(&den.mono);
    // scalar prefix: everything free of deterministic matrices
    let mut pn = Poly::monomial(num_sc, num.coeff.clone());
    let mut pd = Poly::monomial(den_sc, den.coeff.clone());
    let mut mat_num = Vec::new();
    let mut mat_den = Vec::new();
    for (f, e) in &num.factors {
        if has_det_var(f) {
            mat_num.push((f, *e));
        } else {
            pn = pn.mul(&f.pow(*e));
        }
    }
    for (f, e) in &den.factors {
        if has_det_var(f) {
            mat_den.push((f, *e));
        } else {
            pd = pd.mul(&f.pow(*e));
        }
    }
    let prefix = ScalarExpr::from_fraction(pn, pd).expect("non-zero denominator");
    let mut parts: Vec<String> = Vec::new();
    let mut lead = String::new();
    let prefix_neg = prefix.num().len() == 1 && prefix.num().leading_coeff().is_negative();
    let prefix = if prefix_neg {
        lead.push_str(if style.latex { "- " } else { "-" });
        prefix.neg()
    } else {
        prefix
    };
    if !prefix.is_one() {
        let s = style.scalar(&prefix);
        if prefix.num().len() > 1 && prefix.den().is_one() {
            parts.push(style.paren(&s));
        } else {
            parts.push(s);
        }
    }
    for (v, e) in num_det.factors() {
        parts.push(style.pow(style.var(v), *e as i64));
    }
    for (v, e) in den_det.factors() {
        parts.push(style.pow(style.var(v), -(*e as i64)));
    }
    for (f, e) in mat_den {
        parts.push(style.pow(style.paren(&matrix_poly(f, style)), -(e as i64)));
    }
    for (f, e) in mat_num {
        parts.push(style.pow(style.paren(&matrix_poly(f, style)), e as i64));
    }
    if parts.is_empty() {
        parts.push(style.identity().to_string());
    }
    let inner = format!("{lead}{}", parts.join(style.sep()));
    if style.latex {
        format!("\\bar{{tr}}\\left({inner}\\right)")
    } else {
        format!("trbar({inner})")
    }
}
