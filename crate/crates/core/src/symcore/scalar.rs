//! Canonical rational functions.
//!
//! A [`ScalarExpr`] is `num / den` with `gcd(num, den) = 1` and the leading
//! coefficient of `den` (in graded-lex order) equal to `+1`. With that
//! normalization two expressions are equal as rational functions iff they are
//! structurally equal.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::gcd::gcd;
use super::poly::{Poly, Rational};
use super::var::Var;
use crate::error::{Error, Result};

#[derive(Debug, PartialEq, Eq, Hash)]
struct Frac {
    num: Poly,
    den: Poly,
}

/// Immutable canonical rational function. Cloning is cheap.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ScalarExpr(Arc<Frac>);

/// Simultaneous substitution of indeterminates.
pub type SubstitutionMap = HashMap<Var, ScalarExpr>;

impl ScalarExpr {
    fn raw(num: Poly, den: Poly) -> ScalarExpr {
        ScalarExpr(Arc::new(Frac { num, den }))
    }

    /// Builds `num / den` in canonical form.
    pub fn from_fraction(num: Poly, den: Poly) -> Result<ScalarExpr> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        if num.is_zero() {
            return Ok(ScalarExpr::zero());
        }
        let g = gcd(&num, &den);
        let (num, den) = if g.is_one() {
            (num, den)
        } else {
            (
                num.exact_div(&g).expect("gcd divides numerator"),
                den.exact_div(&g).expect("gcd divides denominator"),
            )
        };
        Ok(ScalarExpr::monic(num, den))
    }

    /// Scales so the denominator's leading coefficient is one. Assumes the
    /// pair is already coprime.
    fn monic(num: Poly, den: Poly) -> ScalarExpr {
        let lc = den.leading_coeff();
        if lc.is_one() {
            ScalarExpr::raw(num, den)
        } else {
            let inv = lc.recip();
            ScalarExpr::raw(num.scale(&inv), den.scale(&inv))
        }
    }

    pub fn from_poly(p: Poly) -> ScalarExpr {
        ScalarExpr::raw(p, Poly::one())
    }

    pub fn zero() -> ScalarExpr {
        ScalarExpr::from_poly(Poly::zero())
    }

    pub fn one() -> ScalarExpr {
        ScalarExpr::from_poly(Poly::one())
    }

    pub fn int(n: i64) -> ScalarExpr {
        ScalarExpr::from_poly(Poly::int(n))
    }

    pub fn rational(q: Rational) -> ScalarExpr {
        ScalarExpr::from_poly(Poly::constant(q))
    }

    /// `n / d` for integers; panics on `d == 0`.
    pub fn ratio(n: i64, d: i64) -> ScalarExpr {
        ScalarExpr::rational(Rational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn var(v: Var) -> ScalarExpr {
        ScalarExpr::from_poly(Poly::var(v))
    }

    pub fn num(&self) -> &Poly {
        &self.0.num
    }

    pub fn den(&self) -> &Poly {
        &self.0.den
    }

    pub fn is_zero(&self) -> bool {
        self.0.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.num.is_one() && self.0.den.is_one()
    }

    pub fn is_polynomial(&self) -> bool {
        self.0.den.is_one()
    }

    /// The value if this is a rational constant.
    pub fn constant_value(&self) -> Option<Rational> {
        if self.0.den.is_one() {
            self.0.num.constant_value()
        } else {
            None
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut s = self.0.num.vars();
        s.extend(self.0.den.vars());
        s
    }

    pub fn contains_var(&self, v: &Var) -> bool {
        self.0.num.contains_var(v) || self.0.den.contains_var(v)
    }

    pub fn any_var(&self, pred: impl Fn(&Var) -> bool) -> bool {
        self.vars().iter().any(pred)
    }

    pub fn neg(&self) -> ScalarExpr {
        ScalarExpr::raw(self.0.num.neg(), self.0.den.clone())
    }

    pub fn scale(&self, c: &Rational) -> ScalarExpr {
        if c.is_zero() {
            return ScalarExpr::zero();
        }
        ScalarExpr::raw(self.0.num.scale(c), self.0.den.clone())
    }

    pub fn add(&self, other: &ScalarExpr) -> ScalarExpr {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let (a, b) = (&self.0.num, &self.0.den);
        let (c, d) = (&other.0.num, &other.0.den);
        if b.is_one() && d.is_one() {
            return ScalarExpr::from_poly(a.add(c));
        }
        if b == d {
            let t = a.add(c);
            return ScalarExpr::from_fraction(t, b.clone()).expect("nonzero denominator");
        }
        // with g = gcd(b, d) any common factor of the new numerator and
        // denominator already divides g
        let g = gcd(b, d);
        let (b1, d1) = if g.is_one() {
            (b.clone(), d.clone())
        } else {
            (b.exact_div(&g).unwrap(), d.exact_div(&g).unwrap())
        };
        let t = a.mul(&d1).add(&c.mul(&b1));
        if t.is_zero() {
            return ScalarExpr::zero();
        }
        let den = b.mul(&d1);
        if g.is_one() {
            return ScalarExpr::monic(t, den);
        }
        let h = gcd(&t, &g);
        if h.is_one() {
            ScalarExpr::monic(t, den)
        } else {
            ScalarExpr::monic(t.exact_div(&h).unwrap(), den.exact_div(&h).unwrap())
        }
    }

    pub fn sub(&self, other: &ScalarExpr) -> ScalarExpr {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &ScalarExpr) -> ScalarExpr {
        if self.is_zero() || other.is_zero() {
            return ScalarExpr::zero();
        }
        if self.is_one() {
            return other.clone();
        }
        if other.is_one() {
            return self.clone();
        }
        let (a, b) = (&self.0.num, &self.0.den);
        let (c, d) = (&other.0.num, &other.0.den);
        let cross = |x: &Poly, y: &Poly| -> (Poly, Poly) {
            if y.is_one() || x.is_constant() {
                return (x.clone(), y.clone());
            }
            let g = gcd(x, y);
            if g.is_one() {
                (x.clone(), y.clone())
            } else {
                (x.exact_div(&g).unwrap(), y.exact_div(&g).unwrap())
            }
        };
        let (a1, d1) = cross(a, d);
        let (c1, b1) = cross(c, b);
        ScalarExpr::monic(a1.mul(&c1), b1.mul(&d1))
    }

    pub fn inv(&self) -> Result<ScalarExpr> {
        if self.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(ScalarExpr::monic(self.0.den.clone(), self.0.num.clone()))
    }

    pub fn div(&self, other: &ScalarExpr) -> Result<ScalarExpr> {
        Ok(self.mul(&other.inv()?))
    }

    pub fn pow(&self, e: i32) -> Result<ScalarExpr> {
        if e < 0 {
            return self.inv()?.pow(-e);
        }
        let e = e as u32;
        Ok(ScalarExpr::raw(self.0.num.pow(e), self.0.den.pow(e)).renormalize())
    }

    fn renormalize(self) -> ScalarExpr {
        // powers of a coprime pair stay coprime; only the scale can drift
        let (num, den) = (self.0.num.clone(), self.0.den.clone());
        ScalarExpr::monic(num, den)
    }

    /// Re-canonicalizes; a no-op on values produced by this module.
    pub fn normalize(&self) -> Result<ScalarExpr> {
        ScalarExpr::from_fraction(self.0.num.clone(), self.0.den.clone())
    }

    /// Simultaneous substitution followed by normalization.
    pub fn substitute(&self, map: &SubstitutionMap) -> Result<ScalarExpr> {
        if map.is_empty() || !self.vars().iter().any(|v| map.contains_key(v)) {
            return Ok(self.clone());
        }
        let num = subst_poly(&self.0.num, map)?;
        let den = subst_poly(&self.0.den, map)?;
        num.div(&den)
    }

    /// Renames variables through `f` (must be injective on present variables).
    pub fn rename(&self, f: &dyn Fn(&Var) -> Var) -> ScalarExpr {
        let num = self.0.num.rename(f);
        let den = self.0.den.rename(f);
        ScalarExpr::monic(num, den)
    }

    pub fn eval_f64(&self, value: &dyn Fn(&Var) -> f64) -> f64 {
        self.0.num.eval_f64(value) / self.0.den.eval_f64(value)
    }

    /// Exact evaluation; `None` for a missing variable or a vanishing
    /// denominator.
    pub fn eval_exact(&self, value: &dyn Fn(&Var) -> Option<Rational>) -> Option<Rational> {
        let d = self.0.den.eval_exact(value)?;
        if d.is_zero() {
            return None;
        }
        Some(self.0.num.eval_exact(value)? / d)
    }
}

fn subst_poly(p: &Poly, map: &SubstitutionMap) -> Result<ScalarExpr> {
    let mut cache: HashMap<(Var, u32), ScalarExpr> = HashMap::new();
    let mut acc = ScalarExpr::zero();
    // group the polynomial part of the result so we only pay for rational
    // additions when some image is a genuine fraction
    let mut poly_acc = Poly::zero();
    for t in p.terms() {
        let mut mono_poly = Poly::constant(t.coeff.clone());
        let mut frac = ScalarExpr::one();
        for (v, e) in t.mono.factors() {
            match map.get(v) {
                None => {
                    mono_poly = mono_poly.mul(&Poly::var(v.clone()).pow(*e));
                }
                Some(img) if img.is_polynomial() => {
                    mono_poly = mono_poly.mul(&img.num().pow(*e));
                }
                Some(img) => {
                    let key = (v.clone(), *e);
                    let pw = match cache.get(&key) {
                        Some(x) => x.clone(),
                        None => {
                            let x = img.pow(*e as i32)?;
                            cache.insert(key, x.clone());
                            x
                        }
                    };
                    frac = frac.mul(&pw);
                }
            }
        }
        if frac.is_one() {
            poly_acc = poly_acc.add(&mono_poly);
        } else {
            acc = acc.add(&frac.mul(&ScalarExpr::from_poly(mono_poly)));
        }
    }
    Ok(acc.add(&ScalarExpr::from_poly(poly_acc)))
}

impl Default for ScalarExpr {
    fn default() -> Self {
        ScalarExpr::zero()
    }
}

impl From<Var> for ScalarExpr {
    fn from(v: Var) -> Self {
        ScalarExpr::var(v)
    }
}

impl From<i64> for ScalarExpr {
    fn from(n: i64) -> Self {
        ScalarExpr::int(n)
    }
}

impl fmt::Debug for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", super::render::text(self))
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", super::render::text(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(name: &str) -> ScalarExpr {
        ScalarExpr::var(Var::constant(name))
    }

    #[test]
    fn commutativity_cancels() {
        let (x, y) = (v("sx"), v("sy"));
        assert!(x.mul(&y).sub(&y.mul(&x)).is_zero());
    }

    #[test]
    fn common_factor_cancellation() {
        let lam = v("lambda");
        let g = ScalarExpr::var(Var::g(0, 0));
        let s = lam.add(&g);
        let e = lam.mul(&s).div(&s.mul(&s)).unwrap();
        assert_eq!(e, lam.div(&s).unwrap());
    }

    #[test]
    fn ratio_substitution() {
        let d = ScalarExpr::var(Var::dim("d"));
        let n = ScalarExpr::var(Var::dim("n"));
        let phi = v("phi");
        let lam = v("lambda");
        let mut map = SubstitutionMap::new();
        map.insert(Var::dim("d"), n.mul(&phi));
        assert_eq!(d.div(&n).unwrap().substitute(&map).unwrap(), phi);
        let e = d.div(&lam.mul(&n)).unwrap();
        assert_eq!(e.substitute(&map).unwrap(), phi.div(&lam).unwrap());
    }

    #[test]
    fn denominator_is_monic() {
        let x = v("sx");
        let e = ScalarExpr::int(1).div(&x.scale(&Rational::from_integer(BigInt::from(-3)))).unwrap();
        assert!(e.den().leading_coeff().is_one());
        assert_eq!(e.mul(&x), ScalarExpr::ratio(-1, 3));
    }

    #[test]
    fn zero_denominator_is_an_error() {
        let x = v("sx");
        assert!(matches!(x.div(&x.sub(&x)), Err(Error::ZeroDenominator)));
    }

    #[test]
    fn fraction_substitution() {
        let (x, y) = (v("sx"), v("sy"));
        let e = x.mul(&x).add(&y).div(&x.add(&ScalarExpr::int(1))).unwrap();
        let mut map = SubstitutionMap::new();
        map.insert(Var::constant("sx"), ScalarExpr::int(1).div(&y).unwrap());
        map.insert(Var::constant("sy"), x.clone());
        // simultaneous: x -> 1/y, y -> x
        let got = e.substitute(&map).unwrap();
        let yi = ScalarExpr::int(1).div(&y).unwrap();
        let want = yi.mul(&yi).add(&x).div(&yi.add(&ScalarExpr::int(1))).unwrap();
        assert_eq!(got, want);
    }
}
