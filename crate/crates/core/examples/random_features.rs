//! Linearized random features: the six-equation system of the stored pencil
//! and the training-resolvent traces tau_1, tau_2.
//!
//! ```bash
//! cargo run -p freetrace --example random_features
//! ```

use freetrace::fptcore::{aspect_ratio_subs, calc_selection, CalcOptions, Normalization};
use freetrace::numeric::{solve_fixed_point, NumericBinding, SolveOptions};
use freetrace::pencil;
use freetrace::symcore::{Format, ScalarExpr, Var};

fn main() -> freetrace::Result<()> {
    let q = pencil::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/random_features.json"))?;
    let c = |s: &str| ScalarExpr::var(Var::constant(s));
    let d = ScalarExpr::var(Var::dim("n")).mul(&c("phi"));
    let m = d.div(&c("psi"))?;

    let mut opts = CalcOptions { normalize: Normalization::Custom, subs: aspect_ratio_subs(), ..Default::default() };
    opts.subs.push((Var::dim("m"), m.clone()));
    opts.variances.insert("X".into(), d.inv()?);
    opts.variances.insert("W0".into(), c("zeta").div(&m.mul(&c("lambda")))?);
    opts.variances.insert("Theta0".into(), c("beta").div(&m.mul(&c("lambda")))?);
    let sys = calc_selection(&q, &opts)?;
    println!("{}\n", sys.render(Format::Latex));

    // tau_1 is G_{1,1}/lambda and tau_2 is G_{4,1}/lambda
    let (zeta, eta) = (1.0, 1.0);
    for psi in [0.25, 0.5, 1.0, 2.0] {
        let lambda = 0.1;
        let b = NumericBinding::new()
            .with("lambda", lambda)
            .with("phi", 0.5)
            .with("psi", psi)
            .with("zeta", zeta)
            .with("beta", eta - zeta);
        let r = solve_fixed_point(&sys, &[], &b, &SolveOptions::default())?;
        println!("psi = {psi:<4} tau_1 = {:.8} tau_2 = {:.8}", r.get(1, 1) / lambda, r.get(4, 1) / lambda);
    }
    Ok(())
}
