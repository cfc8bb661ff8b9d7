//! Partial factorization used only for display.

use num_traits::{One, Signed};

use crate::symcore::gcd::{content_wrt, gcd};
use crate::symcore::{Monomial, Poly, Rational, Term, Var};

/// `p = coeff * mono * prod f_i^{e_i}`. Factors are found by content and
/// square-free splitting, which is enough to separate the resolvent factors
/// appearing in emitted equations; they are not guaranteed irreducible.
#[derive(Clone, Debug)]
pub struct Factored {
    pub coeff: Rational,
    pub mono: Monomial,
    pub factors: Vec<(Poly, u32)>,
}

pub fn derivative(p: &Poly, v: &Var) -> Poly {
    let c = p.to_univariate(v);
    let d: Vec<Poly> = c
        .iter()
        .enumerate()
        .skip(1)
        .map(|(e, ci)| ci.scale(&Rational::from_integer((e as i64).into())))
        .collect();
    Poly::from_univariate(&d, v)
}

fn split(p: Poly, out: &mut Vec<Poly>) {
    let deg = p.total_degree();
    for v in p.vars() {
        let c = content_wrt(&p, &v);
        if !c.is_constant() && c.total_degree() < deg {
            let rest = p.exact_div(&c).expect("content divides");
            split(c, out);
            split(rest, out);
            return;
        }
        let d = derivative(&p, &v);
        if !d.is_zero() {
            let g = gcd(&p, &d);
            if !g.is_constant() && g.total_degree() < deg {
                let rest = p.exact_div(&g).expect("gcd divides");
                split(g, out);
                split(rest, out);
                return;
            }
        }
    }
    out.push(p);
}

pub fn factor(p: &Poly) -> Factored {
    let mono = p.monomial_content();
    let rest = p.div_mono(&mono);
    let mut coeff = rest.rational_content();
    let mut parts = Vec::new();
    if !rest.is_constant() {
        split(rest.primitive(), &mut parts);
    }
    let mut factors: Vec<(Poly, u32)> = Vec::new();
    for f in parts {
        let f = if f.leading_coeff().is_negative() {
            coeff = -coeff;
            f.neg()
        } else {
            f
        };
        match factors.iter_mut().find(|(g, _)| *g == f) {
            Some((_, e)) => *e += 1,
            None => factors.push((f, 1)),
        }
    }
    // primitive parts have integer content 1; fold any leftover scale
    let mut check = Poly::monomial(mono.clone(), coeff.clone());
    for (f, e) in &factors {
        check = check.mul(&f.pow(*e));
    }
    if check != *p {
        let lead = p.leading_coeff() / check.leading_coeff();
        coeff *= lead;
    }
    Factored { coeff, mono, factors }
}

impl Factored {
    pub fn expand(&self) -> Poly {
        let mut out = Poly::from_terms(vec![Term { mono: self.mono.clone(), coeff: self.coeff.clone() }]);
        for (f, e) in &self.factors {
            out = out.mul(&f.pow(*e));
        }
        out
    }

    pub fn is_unit(&self) -> bool {
        self.mono.is_one() && self.factors.is_empty() && self.coeff.is_one()
    }
}
