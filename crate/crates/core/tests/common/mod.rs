#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use freetrace::dsl::{self, Rewrite, Scope};
use freetrace::fptcore::{apply_rewrites, aspect_ratio_subs, CalcOptions, Equation, FixedPointSystem, Normalization};
use freetrace::numeric::{NumericBinding, SpectrumSpec};
use freetrace::pencil::{self, Pencil};
use freetrace::symcore::{MatrixExpr, ScalarExpr, Var};

pub fn fixture(name: &str) -> Pencil {
    pencil::load(format!("{}/fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

pub const FIXTURES: [&str; 6] = ["mp", "anisotropic_mp", "ridge_bias", "ridge_variance", "subordination", "random_features"];

pub fn expr(decls: &str, e: &str) -> MatrixExpr {
    let src = dsl::parse(&format!("{decls} target I(d);")).unwrap();
    dsl::parse_matrix(e, &src.scope).unwrap()
}

pub fn sizes(pairs: &[(&str, usize)]) -> BTreeMap<String, usize> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn sqrt_rewrite() -> Vec<Rewrite> {
    vec![Rewrite { base: "Sigma_sqrt".into(), power: 2, target: "Sigma".into() }]
}

fn var(name: &str) -> ScalarExpr {
    ScalarExpr::var(Var::constant(name))
}

fn n() -> ScalarExpr {
    ScalarExpr::var(Var::dim("n"))
}

pub fn mp_opts() -> CalcOptions {
    CalcOptions { subs: aspect_ratio_subs(), ..Default::default() }
}

pub fn ridge_opts(dedup: bool) -> CalcOptions {
    CalcOptions { subs: aspect_ratio_subs(), rewrites: sqrt_rewrite(), dedup, ..Default::default() }
}

/// Groups `n_j = p_j n` for every dimension named `n1, n2, ...` in `q`.
pub fn groups_opts(q: &Pencil) -> CalcOptions {
    let mut opts = mp_opts();
    let names: BTreeSet<&str> = q.dims.iter().map(|d| d.name()).collect();
    for k in 1..10 {
        let dim = format!("n{k}");
        if names.contains(dim.as_str()) {
            opts.subs.push((Var::dim(&dim), n().mul(&var(&format!("p{k}")))));
        }
    }
    opts
}

/// `d = n phi`, `m = d / psi`, with `X`, `W0`, `Theta0` scaled as in the
/// random features model.
pub fn rf_opts() -> CalcOptions {
    let d = n().mul(&var("phi"));
    let m = d.div(&var("psi")).unwrap();
    let mut opts = mp_opts();
    opts.subs.push((Var::dim("m"), m.clone()));
    opts.normalize = Normalization::Custom;
    opts.variances.insert("X".into(), d.inv().unwrap());
    opts.variances.insert("W0".into(), var("zeta").div(&m.mul(&var("lambda"))).unwrap());
    opts.variances.insert("Theta0".into(), var("beta").div(&m.mul(&var("lambda"))).unwrap());
    opts
}

pub fn binding(pairs: &[(&str, f64)]) -> NumericBinding {
    pairs.iter().fold(NumericBinding::new(), |b, (k, v)| b.with(k, *v))
}

pub fn columns(dim: &str, cols: &[(&str, Vec<f64>)]) -> SpectrumSpec {
    SpectrumSpec::from_columns(dim, cols).unwrap()
}

/// A system typed in by hand: `G38` is the unknown `G_{3,8}`, names in
/// `dets` are deterministic matrices and everything else is a constant.
pub fn published_system(eqs: &[(&str, &str)], dets: &[&str], rewrites: &[Rewrite]) -> FixedPointSystem {
    let label = |s: &str| -> Option<(usize, usize)> {
        let b = s.as_bytes();
        (b.len() == 3 && b[0] == b'G' && b[1].is_ascii_digit() && b[2].is_ascii_digit())
            .then(|| ((b[1] - b'0') as usize, (b[2] - b'0') as usize))
    };
    let mut scope = Scope::default();
    for (_, rhs) in eqs {
        for word in rhs.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_')) {
            if word.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
                scope.consts.insert(word.to_string());
            }
        }
    }
    let rename = |v: &Var| {
        if let Some((i, j)) = label(v.name()) {
            Var::g(i, j)
        } else if dets.contains(&v.name()) {
            Var::mat_scalar(v.name(), true)
        } else {
            v.clone()
        }
    };
    let equations = eqs
        .iter()
        .map(|(lhs, rhs)| {
            let e = dsl::parse_scalar(rhs, &scope).unwrap().rename(&rename);
            Equation { lhs: label(lhs).unwrap(), rhs: apply_rewrites(&e, rewrites).unwrap() }
        })
        .collect();
    FixedPointSystem {
        dims: vec![],
        equations,
        targets: vec![],
        traces: vec![],
        subs: vec![],
        rewrites: vec![],
        warnings: vec![],
    }
}

/// Renames unknowns `from -> to` and drops the equations of `from`, checking
/// that each dropped equation coincides with the one it is merged into.
pub fn identify(sys: &FixedPointSystem, pairs: &[((usize, usize), (usize, usize))]) -> FixedPointSystem {
    let map: BTreeMap<(usize, usize), (usize, usize)> = pairs.iter().copied().collect();
    let rename = |v: &Var| match v.g_index().and_then(|e| map.get(&e)) {
        Some(&(i, j)) => Var::g(i, j),
        None => v.clone(),
    };
    let renamed: Vec<Equation> = sys
        .equations
        .iter()
        .map(|e| Equation { lhs: e.lhs, rhs: sys.expanded_rhs(e).rename(&rename) })
        .collect();
    for e in &renamed {
        if let Some(to) = map.get(&e.lhs) {
            let kept = renamed.iter().find(|k| k.lhs == *to).expect("merged entry has an equation");
            assert_eq!(e.rhs, kept.rhs, "G{:?} and G{:?} differ after identification", e.lhs, to);
        }
    }
    FixedPointSystem {
        equations: renamed.into_iter().filter(|e| !map.contains_key(&e.lhs)).collect(),
        traces: vec![],
        ..sys.clone()
    }
}

pub const RIDGE_BIAS: [(&str, &str); 7] = [
    ("G38", "-lambda*Sigma*(lambda + Sigma_sqrt^2*G11)^-2*(-lambda*Theta + Sigma_sqrt^2*G16)"),
    ("G25", "lambda*Sigma_sqrt^2*(lambda + Sigma_sqrt^2*G11)^-1*(lambda + Sigma_sqrt^2*G66)^-1*(-lambda*Theta + Sigma_sqrt^2*G16)"),
    ("G66", "-lambda/(phi*G75 - lambda)"),
    ("G20", "-lambda*Sigma_sqrt^2*(lambda + Sigma_sqrt^2*G11)^-1"),
    ("G11", "-lambda/(phi*G20 - lambda)"),
    ("G16", "phi*lambda*G25/((phi*G20 - lambda)*(phi*G75 - lambda))"),
    ("G75", "-lambda*Sigma_sqrt^2*(lambda + Sigma_sqrt^2*G66)^-1"),
];

pub const RIDGE_VARIANCE: [(&str, &str); 7] = [
    ("G38", "lambda*Sigma*Sigma_sqrt^2*(lambda + Sigma_sqrt^2*G11)^-2*(G11 - G15)"),
    ("G64", "-lambda*Sigma_sqrt^2*(lambda + Sigma_sqrt^2*G55)^-1"),
    ("G24", "lambda*Sigma_sqrt^2*(lambda + Sigma_sqrt^2*G11)^-1*(lambda + Sigma_sqrt^2*G55)^-1*(lambda + Sigma_sqrt^2*G15)"),
    ("G11", "-lambda/(phi*G20 - lambda)"),
    ("G15", "phi*lambda*G24/((phi*G20 - lambda)*(phi*G64 - lambda))"),
    ("G20", "-lambda*Sigma_sqrt^2*(lambda + Sigma_sqrt^2*G11)^-1"),
    ("G55", "-lambda/(phi*G64 - lambda)"),
];

pub const SUBORDINATION: [(&str, &str); 5] = [
    ("G33", "lambda*(lambda + p1*S1^2*G11 + p2*S2^2*G55)^-1"),
    ("G20", "-lambda*S1^2*(lambda + p1*S1^2*G11 + p2*S2^2*G55)^-1"),
    ("G64", "-lambda*S2^2*(lambda + p1*S1^2*G11 + p2*S2^2*G55)^-1"),
    ("G11", "-lambda/(-lambda + phi*G20)"),
    ("G55", "-lambda/(-lambda + phi*G64)"),
];

/// The random features display. It has no equation for `G22`; the entry it
/// stands for is `lambda tau_1`, so that label is used here, and `lambda
/// tau_2` gets the unused label `G99`.
pub const RANDOM_FEATURES: [(&str, &str); 6] = [
    ("G99", "lambda*G00/(beta*G44 + lambda*G30 + lambda)"),
    ("G30", "phi*zeta*G44/(lambda*phi + zeta*G22*G44)"),
    ("G22", "lambda/(beta*G44 + lambda*G30 + lambda)"),
    ("G44", "-lambda*phi/(-beta*psi*G22 - lambda*phi + phi*psi*zeta*G03)"),
    ("G03", "-lambda*G22/(lambda*phi + zeta*G22*G44)"),
    ("G00", "lambda*phi/(lambda*phi + zeta*G22*G44)"),
];

pub const MP: [(&str, &str); 2] = [("G11", "lambda/(lambda + G00)"), ("G00", "lambda/(lambda + phi*G11)")];

/// The two random features polynomials in `tau_1, tau_2`.
pub fn rf_polynomials(t1: f64, t2: f64, b: &NumericBinding) -> (f64, f64) {
    let g = |k: &str| b.get(k).unwrap();
    let (phi, psi, lambda, zeta, eta) = (g("phi"), g("psi"), g("lambda"), g("zeta"), g("eta"));
    let p1 = -eta * phi * t1 * t1 + eta * phi * t1 * t2 - lambda * t1 * t1 * t2 * zeta + phi * t1 * t1 * zeta
        - 2.0 * phi * t1 * t2 * zeta
        + phi * t2 * t2 * zeta
        + t1 * t2 * zeta;
    let p2 = lambda * psi * t1 * t1 * t2 * zeta - phi * phi * t1 + phi * phi * t2 + phi * t1 * t2 * zeta
        - psi * t1 * t2 * zeta;
    (p1, p2)
}

/// Positive root of `kappa^2 + (1 - lambda - phi) kappa - lambda = 0`.
pub fn ridge_kappa(lambda: f64, phi: f64) -> f64 {
    let b = 1.0 - lambda - phi;
    (-b + (b * b + 4.0 * lambda).sqrt()) / 2.0
}

/// Bias plus variance of isotropic ridge regression from `kappa`.
pub fn ridge_closed_form(lambda: f64, phi: f64, sigma2: f64) -> f64 {
    let k = ridge_kappa(lambda, phi);
    let df2 = phi / ((1.0 + k) * (1.0 + k));
    k * k / ((1.0 + k) * (1.0 + k)) / (1.0 - df2) + sigma2 * df2 / (1.0 - df2)
}
