//! Multivariate polynomial GCD over the rationals.
//!
//! Recursive content/primitive-part decomposition with a primitive PRS in
//! the main variable. A modular image test short-circuits the common case
//! where the inputs are coprime in the main variable.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};

use super::poly::Poly;
use super::var::Var;

/// Greatest common divisor, normalized to an integer primitive polynomial with
/// positive leading coefficient. `gcd(0, 0) = 0`.
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.primitive();
    }
    if b.is_zero() {
        return a.primitive();
    }
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    let ma = a.monomial_content();
    let mb = b.monomial_content();
    let mg = ma.gcd(&mb);
    let a1 = if ma.is_one() { a.primitive() } else { a.div_mono(&ma).primitive() };
    let b1 = if mb.is_one() { b.primitive() } else { b.div_mono(&mb).primitive() };
    let g = gcd_core(a1, b1);
    if mg.is_one() {
        g
    } else {
        g.mul_mono(&mg).primitive()
    }
}

/// GCD of all coefficients of `p` viewed as a polynomial in `v`.
pub fn content_wrt(p: &Poly, v: &Var) -> Poly {
    let mut coeffs: Vec<Poly> = p
        .to_univariate(v)
        .into_iter()
        .filter(|c| !c.is_zero())
        .collect();
    // cheapest coefficients first so the running gcd collapses early
    coeffs.sort_by_key(|c| c.len());
    let mut acc = Poly::zero();
    for c in coeffs {
        acc = gcd(&acc, &c);
        if acc.is_constant() {
            return Poly::one();
        }
    }
    acc
}

fn gcd_core(mut a: Poly, mut b: Poly) -> Poly {
    loop {
        if a.is_constant() || b.is_constant() {
            return Poly::one();
        }
        if a == b {
            return a;
        }
        let va = a.vars();
        let vb = b.vars();
        if let Some(v) = va.difference(&vb).next() {
            a = content_wrt(&a, v);
            continue;
        }
        if let Some(v) = vb.difference(&va).next() {
            b = content_wrt(&b, v);
            continue;
        }
        let x = va
            .iter()
            .min_by_key(|v| (a.degree_in(v).max(b.degree_in(v)), a.degree_in(v) + b.degree_in(v)))
            .cloned()
            .expect("non-constant polynomial has a variable");
        return gcd_in(a, b, &x);
    }
}

fn gcd_in(a: Poly, b: Poly, x: &Var) -> Poly {
    let ca = content_wrt(&a, x);
    let cb = content_wrt(&b, x);
    let pa = if ca.is_one() { a } else { a.exact_div(&ca).expect("content divides") };
    let pb = if cb.is_one() { b } else { b.exact_div(&cb).expect("content divides") };
    let c = gcd(&ca, &cb);

    let g = match modular_image_degree(&pa, &pb, x) {
        Some(0) => Poly::one(),
        Some(k) => {
            // if the image gcd has the full degree of one input, try that input
            let (da, db) = (pa.degree_in(x), pb.degree_in(x));
            if k == db && pa.exact_div(&pb).is_some() {
                pb.primitive()
            } else if k == da && pb.exact_div(&pa).is_some() {
                pa.primitive()
            } else {
                primitive_prs(pa, pb, x)
            }
        }
        None => primitive_prs(pa, pb, x),
    };
    if c.is_one() {
        g
    } else {
        g.mul(&c).primitive()
    }
}

fn primitive_wrt(p: &Poly, x: &Var) -> Poly {
    let c = content_wrt(p, x);
    if c.is_one() {
        p.primitive()
    } else {
        p.exact_div(&c).expect("content divides").primitive()
    }
}

/// Sparse pseudo-remainder of `f` by `g` in `x`.
fn prem(f: &Poly, g: &Poly, x: &Var) -> Poly {
    let gc = g.to_univariate(x);
    let k = gc.len() - 1;
    let lc = gc[k].clone();
    let mut fc = f.to_univariate(x);
    while fc.len() > k && !fc.is_empty() {
        let deg = fc.len() - 1;
        let lf = fc[deg].clone();
        let shift = deg - k;
        for c in fc.iter_mut() {
            *c = c.mul(&lc);
        }
        for (i, gcoef) in gc.iter().enumerate() {
            if !gcoef.is_zero() {
                fc[i + shift] = fc[i + shift].sub(&gcoef.mul(&lf));
            }
        }
        debug_assert!(fc[deg].is_zero());
        while fc.last().is_some_and(|c| c.is_zero()) {
            fc.pop();
        }
    }
    Poly::from_univariate(&fc, x)
}

fn primitive_prs(a: Poly, b: Poly, x: &Var) -> Poly {
    let (mut f, mut g) = if a.degree_in(x) >= b.degree_in(x) { (a, b) } else { (b, a) };
    loop {
        let r = prem(&f, &g, x);
        if r.is_zero() {
            return primitive_wrt(&g, x);
        }
        if r.degree_in(x) == 0 {
            return Poly::one();
        }
        f = g;
        g = primitive_wrt(&r, x);
    }
}

const P: u64 = 2_305_843_009_213_693_951; // 2^61 - 1

fn mulmod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % P as u128) as u64
}

fn powmod(mut a: u64, mut e: u64) -> u64 {
    let mut r = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod(r, a);
        }
        a = mulmod(a, a);
        e >>= 1;
    }
    r
}

fn invmod(a: u64) -> u64 {
    powmod(a, P - 2)
}

fn bigint_mod(n: &BigInt) -> u64 {
    let p = BigInt::from(P);
    let mut r = n % &p;
    if r.is_negative() {
        r += &p;
    }
    r.to_u64().unwrap()
}

fn eval_point(v: &Var) -> u64 {
    let mut h = DefaultHasher::new();
    v.name().hash(&mut h);
    0xA5A5_1234u64.hash(&mut h);
    h.finish() % (P - 3) + 2
}

/// Image of `p` in `F_P[x]` after evaluating every other variable at a fixed
/// pseudo-random point. `None` if a coefficient denominator vanishes mod P.
fn image(p: &Poly, x: &Var) -> Option<Vec<u64>> {
    let deg = p.degree_in(x) as usize;
    let mut out = vec![0u64; deg + 1];
    for t in p.terms() {
        let den = bigint_mod(t.coeff.denom());
        if den == 0 {
            return None;
        }
        let mut c = mulmod(bigint_mod(t.coeff.numer()), invmod(den));
        let mut e_x = 0;
        for (v, e) in t.mono.factors() {
            if v == x {
                e_x = *e as usize;
            } else {
                c = mulmod(c, powmod(eval_point(v), *e as u64));
            }
        }
        out[e_x] = (out[e_x] + c) % P;
    }
    Some(out)
}

fn trim(v: &mut Vec<u64>) {
    while v.last() == Some(&0) {
        v.pop();
    }
}

fn uni_rem(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let inv = invmod(b[db]);
    while r.len() > db {
        let dr = r.len() - 1;
        let f = mulmod(r[dr], inv);
        for i in 0..=db {
            let s = mulmod(f, b[i]);
            r[dr - db + i] = (r[dr - db + i] + P - s) % P;
        }
        trim(&mut r);
    }
    r
}

/// Degree in `x` of the gcd of the modular images, when both images keep
/// their full degree (otherwise the test is inconclusive).
fn modular_image_degree(a: &Poly, b: &Poly, x: &Var) -> Option<u32> {
    let mut ia = image(a, x)?;
    let mut ib = image(b, x)?;
    let (da, db) = (a.degree_in(x) as usize, b.degree_in(x) as usize);
    trim(&mut ia);
    trim(&mut ib);
    if ia.len() != da + 1 || ib.len() != db + 1 {
        return None;
    }
    let (mut f, mut g) = (ia, ib);
    while !g.is_empty() {
        let r = uni_rem(&f, &g);
        f = g;
        g = r;
    }
    Some((f.len() - 1) as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(name: &str) -> Poly {
        Poly::var(Var::constant(name))
    }

    #[test]
    fn gcd_of_products_recovers_common_factor() {
        let (x, y, z) = (v("gx"), v("gy"), v("gz"));
        let common = x.mul(&y).add(&z.mul(&z)).sub(&Poly::int(3));
        let a = common.mul(&x.add(&Poly::int(1)));
        let b = common.mul(&y.sub(&z));
        assert_eq!(gcd(&a, &b), common.primitive());
    }

    #[test]
    fn coprime_inputs() {
        let (x, y) = (v("gx"), v("gy"));
        let a = x.mul(&x).add(&y);
        let b = x.add(&y.mul(&y));
        assert!(gcd(&a, &b).is_one());
    }

    #[test]
    fn monomial_contents_are_kept() {
        let (x, y) = (v("gx"), v("gy"));
        let a = x.mul(&x).mul(&y);
        let b = x.mul(&y).mul(&y).scale(&num_rational::BigRational::from_integer(6.into()));
        assert_eq!(gcd(&a, &b), x.mul(&y));
    }

    #[test]
    fn exclusive_variable_reduces_to_content() {
        let (x, y, z) = (v("gx"), v("gy"), v("gz"));
        let f = y.add(&Poly::int(2));
        let a = f.mul(&x.mul(&x).add(&x));
        let b = f.mul(&z.add(&Poly::int(5)));
        assert_eq!(gcd(&a, &b), f);
    }

    #[test]
    fn repeated_factor() {
        let (x, y) = (v("gx"), v("gy"));
        let f = x.add(&y);
        let a = f.pow(3).mul(&x);
        let b = f.pow(2).mul(&y.add(&Poly::int(1)));
        assert_eq!(gcd(&a, &b), f.pow(2).primitive());
    }
}
