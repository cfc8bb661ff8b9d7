//! Sample covariance with a non-trivial population covariance, solved for a
//! two-level spectrum read from CSV.
//!
//! ```bash
//! cargo run -p freetrace --example anisotropic_mp
//! ```

use freetrace::dsl::{self, Target};
use freetrace::fptcore::{calc_selection, CalcOptions};
use freetrace::numeric::{solve_fixed_point, NumericBinding, SolveOptions, SpectrumSpec};
use freetrace::pencil::realize;

const SPECTRUM: &str = "Sigma\n0.5\n0.5\n0.5\n2.0\n";

fn main() -> freetrace::Result<()> {
    let src = dsl::parse(include_str!("programs/anisotropic_mp.fpt"))?;
    let Target::Trace(e) = &src.target else { unreachable!() };
    let opts = CalcOptions {
        variances: src.variances.clone(),
        subs: src.subs.clone(),
        rewrites: src.rewrites.clone(),
        ..Default::default()
    };
    let sys = calc_selection(&realize(e)?, &opts)?;
    print!("{}", sys.text());

    // Sigma_sqrt follows from Sigma through the rewrite
    let spectrum = SpectrumSpec::from_csv_reader("d", SPECTRUM.as_bytes())?;
    for phi in [0.25, 0.5, 1.0, 2.0] {
        let b = NumericBinding::new().with("lambda", 0.1).with("phi", phi);
        let r = solve_fixed_point(&sys, &[spectrum.clone()], &b, &SolveOptions::default())?;
        println!("phi = {phi:<4} target = {:.10} ({} iterations)", r.target, r.iterations);
    }
    Ok(())
}
