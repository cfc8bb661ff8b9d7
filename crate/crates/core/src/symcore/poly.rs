//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! Terms are kept sorted in descending graded-lex order over the canonical
//! variable order (lexicographic by name), with no zero coefficients and no
//! repeated monomials. Two polynomials are equal iff their term vectors are.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::var::Var;

pub type Rational = BigRational;

/// Product of variable powers, sorted by variable, exponents non-zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Monomial {
        Monomial(Vec::new())
    }

    pub fn var(v: Var, exp: u32) -> Monomial {
        if exp == 0 {
            Monomial::one()
        } else {
            Monomial(vec![(v, exp)])
        }
    }

    pub fn from_pairs(mut pairs: Vec<(Var, u32)>) -> Monomial {
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(Var, u32)> = Vec::with_capacity(pairs.len());
        for (v, e) in pairs {
            match out.last_mut() {
                Some((lv, le)) if *lv == v => *le += e,
                _ => out.push((v, e)),
            }
        }
        out.retain(|(_, e)| *e > 0);
        Monomial(out)
    }

    pub fn factors(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn degree_in(&self, v: &Var) -> u32 {
        self.0
            .iter()
            .find(|(w, _)| w == v)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0.clone(), a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// `self / other` if `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for (v, e) in &self.0 {
            if j < other.0.len() && other.0[j].0 == *v {
                let oe = other.0[j].1;
                if oe > *e {
                    return None;
                }
                if oe < *e {
                    out.push((v.clone(), e - oe));
                }
                j += 1;
            } else if j < other.0.len() && other.0[j].0 < *v {
                return None;
            } else {
                out.push((v.clone(), *e));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(Monomial(out))
    }

    /// Componentwise minimum of exponents.
    pub fn gcd(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1.min(other.0[j].1)));
                    i += 1;
                    j += 1;
                }
            }
        }
        Monomial(out)
    }

    /// Removes `v` entirely, returning its exponent.
    pub fn split_var(&self, v: &Var) -> (u32, Monomial) {
        let mut e = 0;
        let rest = self
            .0
            .iter()
            .filter(|(w, we)| {
                if w == v {
                    e = *we;
                    false
                } else {
                    true
                }
            })
            .cloned()
            .collect();
        (e, Monomial(rest))
    }

    /// Graded-lex comparison.
    pub fn grlex_cmp(&self, other: &Monomial) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            o => return o,
        }
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            if a.0 != b.0 {
                // the monomial holding the earlier variable is larger
                return if a.0 < b.0 {
                    Ordering::Greater
                } else {
                    Ordering::Less
                };
            }
            match a.1.cmp(&b.1) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Term {
    pub mono: Monomial,
    pub coeff: Rational,
}

/// Multivariate polynomial over the rationals.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    terms: Vec<Term>,
}

fn q_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

impl Poly {
    pub fn zero() -> Poly {
        Poly { terms: Vec::new() }
    }

    pub fn one() -> Poly {
        Poly::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Poly {
        if c.is_zero() {
            Poly::zero()
        } else {
            Poly {
                terms: vec![Term {
                    mono: Monomial::one(),
                    coeff: c,
                }],
            }
        }
    }

    pub fn int(n: i64) -> Poly {
        Poly::constant(q_int(n))
    }

    pub fn var(v: Var) -> Poly {
        Poly::monomial(Monomial::var(v, 1), Rational::one())
    }

    pub fn monomial(mono: Monomial, coeff: Rational) -> Poly {
        Poly::constant(coeff).mul_mono(&mono)
    }

    /// Builds a polynomial from arbitrary (unsorted, possibly repeated) terms.
    pub fn from_terms(mut terms: Vec<Term>) -> Poly {
        terms.sort_by(|a, b| b.mono.grlex_cmp(&a.mono));
        let mut out: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match out.last_mut() {
                Some(last) if last.mono == t.mono => last.coeff += t.coeff,
                _ => out.push(t),
            }
        }
        out.retain(|t| !t.coeff.is_zero());
        Poly { terms: out }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms[0].mono.is_one())
    }

    pub fn constant_value(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 if self.terms[0].mono.is_one() => Some(self.terms[0].coeff.clone()),
            _ => None,
        }
    }

    pub fn is_one(&self) -> bool {
        self.constant_value().is_some_and(|c| c.is_one())
    }

    pub fn leading(&self) -> Option<&Term> {
        self.terms.first()
    }

    pub fn leading_coeff(&self) -> Rational {
        self.terms
            .first()
            .map(|t| t.coeff.clone())
            .unwrap_or_else(Rational::zero)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.iter().map(|t| t.mono.degree()).max().unwrap_or(0)
    }

    pub fn degree_in(&self, v: &Var) -> u32 {
        self.terms
            .iter()
            .map(|t| t.mono.degree_in(v))
            .max()
            .unwrap_or(0)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.terms
            .iter()
            .flat_map(|t| t.mono.factors().iter().map(|(v, _)| v.clone()))
            .collect()
    }

    pub fn contains_var(&self, v: &Var) -> bool {
        self.terms.iter().any(|t| t.mono.degree_in(v) > 0)
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    mono: t.mono.clone(),
                    coeff: -t.coeff.clone(),
                })
                .collect(),
        }
    }

    pub fn scale(&self, c: &Rational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    mono: t.mono.clone(),
                    coeff: &t.coeff * c,
                })
                .collect(),
        }
    }

    pub fn mul_mono(&self, m: &Monomial) -> Poly {
        // multiplying by a monomial preserves the term order
        Poly {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    mono: t.mono.mul(m),
                    coeff: t.coeff.clone(),
                })
                .collect(),
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let (a, b) = (&self.terms, &other.terms);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].mono.grlex_cmp(&b[j].mono) {
                Ordering::Greater => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Less => {
                    out.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    let c = &a[i].coeff + &b[j].coeff;
                    if !c.is_zero() {
                        out.push(Term {
                            mono: a[i].mono.clone(),
                            coeff: c,
                        });
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Poly { terms: out }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        if self.terms.len() == 1 {
            return other
                .mul_mono(&self.terms[0].mono)
                .scale(&self.terms[0].coeff);
        }
        if other.terms.len() == 1 {
            return self
                .mul_mono(&other.terms[0].mono)
                .scale(&other.terms[0].coeff);
        }
        let mut acc: HashMap<Monomial, Rational> =
            HashMap::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let m = a.mono.mul(&b.mono);
                let c = &a.coeff * &b.coeff;
                match acc.get_mut(&m) {
                    Some(e) => *e += c,
                    None => {
                        acc.insert(m, c);
                    }
                }
            }
        }
        Poly::from_terms(
            acc.into_iter()
                .map(|(mono, coeff)| Term { mono, coeff })
                .collect(),
        )
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut result = Poly::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Exact division; `None` when `d` does not divide `self`.
    pub fn exact_div(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if let Some(c) = d.constant_value() {
            return Some(self.scale(&c.recip()));
        }
        let lead = d.leading().unwrap().clone();
        let mut rem = self.clone();
        let mut quot = Vec::new();
        while let Some(lt) = rem.leading().cloned() {
            let m = lt.mono.div(&lead.mono)?;
            let c = &lt.coeff / &lead.coeff;
            let step = d.mul_mono(&m).scale(&c);
            rem = rem.sub(&step);
            quot.push(Term { mono: m, coeff: c });
        }
        Some(Poly::from_terms(quot))
    }

    /// Monomial content: the gcd of all term monomials.
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.iter();
        let Some(first) = it.next() else {
            return Monomial::one();
        };
        let mut g = first.mono.clone();
        for t in it {
            if g.is_one() {
                break;
            }
            g = g.gcd(&t.mono);
        }
        g
    }

    pub fn div_mono(&self, m: &Monomial) -> Poly {
        Poly::from_terms(
            self.terms
                .iter()
                .map(|t| Term {
                    mono: t.mono.div(m).expect("monomial divides every term"),
                    coeff: t.coeff.clone(),
                })
                .collect(),
        )
    }

    /// Rational content `c` with `self = c * p`, where `p` has coprime integer
    /// coefficients and positive leading coefficient.
    pub fn rational_content(&self) -> Rational {
        if self.is_zero() {
            return Rational::one();
        }
        let mut num = BigInt::zero();
        let mut den = BigInt::one();
        for t in &self.terms {
            num = num.gcd(t.coeff.numer());
            den = den.lcm(t.coeff.denom());
        }
        let c = Rational::new(num, den);
        if self.leading_coeff().is_negative() {
            -c
        } else {
            c
        }
    }

    /// Integer primitive part with positive leading coefficient.
    pub fn primitive(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        self.scale(&self.rational_content().recip())
    }

    /// Coefficients with respect to `v`, indexed by degree.
    pub fn to_univariate(&self, v: &Var) -> Vec<Poly> {
        let deg = self.degree_in(v) as usize;
        let mut buckets: Vec<Vec<Term>> = vec![Vec::new(); deg + 1];
        for t in &self.terms {
            let (e, rest) = t.mono.split_var(v);
            buckets[e as usize].push(Term {
                mono: rest,
                coeff: t.coeff.clone(),
            });
        }
        buckets.into_iter().map(Poly::from_terms).collect()
    }

    pub fn from_univariate(coeffs: &[Poly], v: &Var) -> Poly {
        let mut terms = Vec::new();
        for (e, c) in coeffs.iter().enumerate() {
            let m = Monomial::var(v.clone(), e as u32);
            for t in c.terms() {
                terms.push(Term {
                    mono: t.mono.mul(&m),
                    coeff: t.coeff.clone(),
                });
            }
        }
        Poly::from_terms(terms)
    }

    pub fn eval_f64(&self, value: &dyn Fn(&Var) -> f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let mut x = t.coeff.to_f64().unwrap_or(f64::NAN);
                for (v, e) in t.mono.factors() {
                    x *= value(v).powi(*e as i32);
                }
                x
            })
            .sum()
    }

    /// Exact evaluation at rational values; variables missing from `value`
    /// make the result `None`.
    pub fn eval_exact(&self, value: &dyn Fn(&Var) -> Option<Rational>) -> Option<Rational> {
        let mut acc = Rational::zero();
        for t in &self.terms {
            let mut x = t.coeff.clone();
            for (v, e) in t.mono.factors() {
                let val = value(v)?;
                x *= num_traits::pow(val, *e as usize);
            }
            acc += x;
        }
        Some(acc)
    }

    /// Maps every variable through `f` (which must be injective on the
    /// variables present for the result to stay reduced).
    pub fn rename(&self, f: &dyn Fn(&Var) -> Var) -> Poly {
        Poly::from_terms(
            self.terms
                .iter()
                .map(|t| Term {
                    mono: Monomial::from_pairs(
                        t.mono
                            .factors()
                            .iter()
                            .map(|(v, e)| (f(v), *e))
                            .collect(),
                    ),
                    coeff: t.coeff.clone(),
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Poly {
        Poly::var(Var::constant("px"))
    }
    fn y() -> Poly {
        Poly::var(Var::constant("py"))
    }

    #[test]
    fn arithmetic_basics() {
        let p = x().add(&y());
        let sq = p.mul(&p);
        let expect = x().mul(&x()).add(&x().mul(&y()).scale(&q_int(2))).add(&y().mul(&y()));
        assert_eq!(sq, expect);
        assert!(p.sub(&p).is_zero());
        assert_eq!(p.pow(3), sq.mul(&p));
    }

    #[test]
    fn exact_division() {
        let a = x().add(&y());
        let b = x().sub(&y()).add(&Poly::int(3));
        let prod = a.mul(&b);
        assert_eq!(prod.exact_div(&a), Some(b.clone()));
        assert_eq!(prod.exact_div(&b), Some(a));
        assert_eq!(x().exact_div(&y()), None);
    }

    #[test]
    fn leading_term_is_grlex_max() {
        let p = x().add(&y().mul(&y())).add(&Poly::int(1));
        assert_eq!(p.leading().unwrap().mono.degree(), 2);
        assert_eq!(p.terms().last().unwrap().mono, Monomial::one());
    }

    #[test]
    fn univariate_round_trip() {
        let v = Var::constant("px");
        let p = x().mul(&x()).mul(&y()).add(&x()).add(&y());
        let coeffs = p.to_univariate(&v);
        assert_eq!(coeffs.len(), 3);
        assert_eq!(Poly::from_univariate(&coeffs, &v), p);
    }

    #[test]
    fn primitive_part_is_integral() {
        let p = x().scale(&Rational::new(3.into(), 4.into())).sub(&Poly::constant(Rational::new(9.into(), 2.into())));
        let pp = p.primitive();
        assert_eq!(pp, x().sub(&Poly::int(6)));
    }
}
