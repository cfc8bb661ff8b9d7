//! Sum of two independent sample covariances with different population
//! covariances.
//!
//! ```bash
//! cargo run -p freetrace --example subordination
//! ```

use freetrace::dsl::{self, Target};
use freetrace::fptcore::{calc_selection, CalcOptions};
use freetrace::numeric::{solve_fixed_point, NumericBinding, SolveOptions, SpectrumSpec};
use freetrace::pencil::realize;

fn main() -> freetrace::Result<()> {
    let src = dsl::parse(include_str!("programs/subordination.fpt"))?;
    let Target::Trace(e) = &src.target else { unreachable!() };
    let q = realize(e)?;
    let opts = CalcOptions { variances: src.variances.clone(), subs: src.subs.clone(), ..Default::default() };
    let sys = calc_selection(&q, &opts)?;
    print!("{}", sys.text());

    // S1 and S2 are square roots, so their spectra are given directly
    let spectrum = SpectrumSpec::from_columns("d", &[("S1", vec![1.0, 1.0, 0.5, 0.5]), ("S2", vec![0.5, 1.5, 1.5, 1.0])])?;
    for p1 in [0.1, 0.5, 0.9] {
        let b = NumericBinding::new().with("lambda", 0.2).with("phi", 0.8).with("p1", p1).with("p2", 1.0 - p1);
        let r = solve_fixed_point(&sys, &[spectrum.clone()], &b, &SolveOptions::default())?;
        let groups: Vec<String> = q
            .dims
            .iter()
            .enumerate()
            .filter(|(_, d)| d.name().starts_with('n'))
            .filter_map(|(k, d)| r.values.get(&(k, k)).map(|x| format!("e[{d}] = {x:.6}")))
            .collect();
        println!("p1 = {p1}: trbar R = {:.8}, {}", r.target / 0.2, groups.join(", "));
    }
    Ok(())
}
