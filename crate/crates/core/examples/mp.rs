//! Marchenko-Pastur law: from a resolvent expression to its two fixed-point
//! equations, then numbers.
//!
//! ```bash
//! cargo run -p freetrace --example mp
//! ```

use freetrace::dsl::{self, Target};
use freetrace::fptcore::{calc_selection, CalcOptions};
use freetrace::numeric::{solve_fixed_point, NumericBinding, SolveOptions};
use freetrace::pencil::realize;
use freetrace::symcore::Format;

fn main() -> freetrace::Result<()> {
    let src = dsl::parse(include_str!("programs/mp.fpt"))?;
    let Target::Trace(e) = &src.target else { unreachable!() };
    let q = realize(e)?;
    println!("pencil:\n{q}");

    let opts = CalcOptions { variances: src.variances.clone(), subs: src.subs.clone(), ..Default::default() };
    let sys = calc_selection(&q, &opts)?;
    println!("{}\n", sys.render(Format::Latex));

    // the target is lambda times the Stieltjes transform at -lambda
    for lambda in [0.1, 0.5, 1.0, 2.0] {
        let b = NumericBinding::new().with("lambda", lambda).with("phi", 1.0);
        let r = solve_fixed_point(&sys, &[], &b, &SolveOptions::default())?;
        println!("lambda = {lambda:<4} trbar (Z'Z + lambda I)^-1 = {:.10}", r.target / lambda);
    }
    Ok(())
}
