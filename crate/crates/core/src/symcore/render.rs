//! Text, LaTeX and JSON renderings of scalar expressions.

use serde_json::{json, Map, Value};

use super::poly::{Monomial, Poly, Rational, Term};
use super::scalar::ScalarExpr;
use super::var::{Var, VarKind};
use crate::error::{Error, Result};
use num_traits::{One, Signed};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Latex,
    Text,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Format> {
        match s {
            "latex" => Ok(Format::Latex),
            "text" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            other => Err(Error::Invalid(format!("unknown format {other:?}"))),
        }
    }
}

pub fn render(e: &ScalarExpr, format: Format) -> String {
    match format {
        Format::Latex => latex(e),
        Format::Text => text(e),
        Format::Json => to_json(e).to_string(),
    }
}

// ---------------------------------------------------------------- text

fn rational_text(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

fn mono_text(m: &Monomial) -> String {
    m.factors()
        .iter()
        .map(|(v, e)| {
            if *e == 1 {
                v.name().to_string()
            } else {
                format!("{}^{}", v.name(), e)
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

pub fn poly_text(p: &Poly) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    for (k, t) in p.terms().iter().enumerate() {
        let neg = t.coeff.is_negative();
        let c = t.coeff.abs();
        if k == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        if t.mono.is_one() {
            out.push_str(&rational_text(&c));
        } else if c.is_one() {
            out.push_str(&mono_text(&t.mono));
        } else {
            out.push_str(&format!("{}*{}", rational_text(&c), mono_text(&t.mono)));
        }
    }
    out
}

fn is_atom(p: &Poly) -> bool {
    match p.terms() {
        [t] => {
            t.coeff.is_one() && t.mono.degree() <= 1
                || t.mono.is_one() && !t.coeff.is_negative() && t.coeff.is_integer()
        }
        _ => false,
    }
}

/// Plain text, e.g. `lambda/(G_{0,0} + lambda)`.
pub fn text(e: &ScalarExpr) -> String {
    let num = poly_text(e.num());
    if e.den().is_one() {
        return num;
    }
    let wrap = |p: &Poly, s: String| if is_atom(p) { s } else { format!("({s})") };
    format!(
        "{}/{}",
        wrap(e.num(), num),
        wrap(e.den(), poly_text(e.den()))
    )
}

// ---------------------------------------------------------------- latex

const GREEK: &[&str] = &[
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa",
    "lambda", "mu", "nu", "xi", "pi", "rho", "sigma", "tau", "upsilon", "phi", "chi", "psi",
    "omega", "Gamma", "Delta", "Theta", "Lambda", "Xi", "Pi", "Sigma", "Upsilon", "Phi", "Psi",
    "Omega",
];

fn base_latex(s: &str) -> String {
    if GREEK.contains(&s) {
        format!("\\{s}")
    } else {
        s.to_string()
    }
}

/// `Sigma_sqrt` -> `\Sigma_{sqrt}`, `p1` -> `p_{1}`, `lambda` -> `\lambda`.
pub fn name_latex(name: &str) -> String {
    if let Some((head, tail)) = name.split_once('_') {
        return format!("{}_{{{}}}", base_latex(head), tail.replace('_', ","));
    }
    let split = name.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    if split > 0 && split < name.len() {
        return format!("{}_{{{}}}", base_latex(&name[..split]), &name[split..]);
    }
    base_latex(name)
}

pub fn var_latex(v: &Var) -> String {
    match v.kind() {
        VarKind::GEntry(i, j) => format!("{{G}}_{{{i},{j}}}"),
        VarKind::Trace(k) => format!("{{T}}_{{{k}}}"),
        VarKind::MatScalar { symbol, .. } => name_latex(symbol),
        VarKind::Dim | VarKind::Const => name_latex(v.name()),
    }
}

fn is_unknown(v: &Var) -> bool {
    matches!(v.kind(), VarKind::GEntry(..) | VarKind::Trace(_))
}

/// Factors in display order: known quantities first, then unknowns.
pub fn display_factors(m: &Monomial) -> Vec<(Var, u32)> {
    let mut f: Vec<(Var, u32)> = m.factors().to_vec();
    f.sort_by_key(|(v, _)| is_unknown(v));
    f
}

/// Terms in display order: terms free of unknowns first.
pub fn display_terms(p: &Poly) -> Vec<&Term> {
    let mut t: Vec<&Term> = p.terms().iter().collect();
    t.sort_by_key(|t| t.mono.factors().iter().any(|(v, _)| is_unknown(v)));
    t
}

fn rational_latex(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("\\frac{{{}}}{{{}}}", q.numer(), q.denom())
    }
}

fn mono_latex_with(m: &Monomial, var: &dyn Fn(&Var) -> String) -> String {
    display_factors(m)
        .iter()
        .map(|(v, e)| {
            let s = var(v);
            if *e == 1 {
                s
            } else {
                format!("{s}^{{{e}}}")
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// LaTeX for a polynomial with a custom variable renderer.
pub fn poly_latex_with(p: &Poly, var: &dyn Fn(&Var) -> String) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    for (k, t) in display_terms(p).into_iter().enumerate() {
        let neg = t.coeff.is_negative();
        let c = t.coeff.abs();
        if k == 0 {
            if neg {
                out.push_str("- ");
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        if t.mono.is_one() {
            out.push_str(&rational_latex(&c));
        } else if c.is_one() {
            out.push_str(&mono_latex_with(&t.mono, var));
        } else {
            out.push_str(&format!("{} {}", rational_latex(&c), mono_latex_with(&t.mono, var)));
        }
    }
    out
}

/// LaTeX for a rational function with a custom variable renderer.
pub fn latex_with(e: &ScalarExpr, var: &dyn Fn(&Var) -> String) -> String {
    if e.den().is_one() {
        return poly_latex_with(e.num(), var);
    }
    let num = e.num();
    // pull a lone negative sign out of the fraction
    if num.len() == 1 && num.terms()[0].coeff.is_negative() {
        return format!(
            "- \\frac{{{}}}{{{}}}",
            poly_latex_with(&num.neg(), var),
            poly_latex_with(e.den(), var)
        );
    }
    format!(
        "\\frac{{{}}}{{{}}}",
        poly_latex_with(num, var),
        poly_latex_with(e.den(), var)
    )
}

pub fn latex(e: &ScalarExpr) -> String {
    latex_with(e, &var_latex)
}

// ---------------------------------------------------------------- json

fn poly_json(p: &Poly, vars: &mut Map<String, Value>) -> Value {
    Value::Array(
        p.terms()
            .iter()
            .map(|t| {
                let m: Vec<Value> = t
                    .mono
                    .factors()
                    .iter()
                    .map(|(v, e)| {
                        vars.insert(v.name().to_string(), json!(v.kind_tag()));
                        json!([v.name(), e])
                    })
                    .collect();
                json!({"c": rational_text(&t.coeff), "m": m})
            })
            .collect(),
    )
}

/// `{"num": [...], "den": [...], "vars": {name: kind}}`.
pub fn to_json(e: &ScalarExpr) -> Value {
    let mut vars = Map::new();
    let num = poly_json(e.num(), &mut vars);
    let den = poly_json(e.den(), &mut vars);
    json!({"num": num, "den": den, "vars": Value::Object(vars)})
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let (n, d) = s.split_once('/').unwrap_or((s, "1"));
    let n: num_bigint::BigInt = n.trim().parse().map_err(|_| bad(format!("bad rational {s:?}")))?;
    let d: num_bigint::BigInt = d.trim().parse().map_err(|_| bad(format!("bad rational {s:?}")))?;
    if d == num_bigint::BigInt::from(0) {
        return Err(Error::ZeroDenominator);
    }
    Ok(Rational::new(n, d))
}

fn poly_from_json(v: &Value, vars: &Map<String, Value>) -> Result<Poly> {
    let arr = v.as_array().ok_or_else(|| bad("polynomial must be an array"))?;
    let mut terms = Vec::with_capacity(arr.len());
    for t in arr {
        let c = t
            .get("c")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("term needs a string coefficient \"c\""))?;
        let coeff = parse_rational(c)?;
        let mut pairs = Vec::new();
        for f in t.get("m").and_then(Value::as_array).into_iter().flatten() {
            let name = f.get(0).and_then(Value::as_str).ok_or_else(|| bad("bad factor"))?;
            let exp = f.get(1).and_then(Value::as_u64).ok_or_else(|| bad("bad exponent"))?;
            let tag = vars.get(name).and_then(Value::as_str).unwrap_or("const");
            let var = Var::from_tag(name, tag)
                .ok_or_else(|| bad(format!("cannot read variable {name:?} of kind {tag:?}")))?;
            pairs.push((var, exp as u32));
        }
        terms.push(Term {
            mono: Monomial::from_pairs(pairs),
            coeff,
        });
    }
    Ok(Poly::from_terms(terms))
}

pub fn from_json(v: &Value) -> Result<ScalarExpr> {
    let empty = Map::new();
    let vars = v.get("vars").and_then(Value::as_object).unwrap_or(&empty);
    let num = poly_from_json(v.get("num").ok_or_else(|| bad("missing \"num\""))?, vars)?;
    let den = match v.get("den") {
        Some(d) => poly_from_json(d, vars)?,
        None => Poly::one(),
    };
    ScalarExpr::from_fraction(num, den)
}

pub fn parse_json(s: &str) -> Result<ScalarExpr> {
    from_json(&serde_json::from_str(s)?)
}
