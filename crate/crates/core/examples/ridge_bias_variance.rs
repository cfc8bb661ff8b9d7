//! Test risk of ridge regression from the stored bias and variance pencils.
//!
//! ```bash
//! cargo run -p freetrace --example ridge_bias_variance
//! ```

use freetrace::dsl::Rewrite;
use freetrace::fptcore::{aspect_ratio_subs, calc, CalcOptions};
use freetrace::numeric::{solve_fixed_point, NumericBinding, SolveOptions, SpectrumSpec};
use freetrace::pencil;
use freetrace::symcore::Format;

fn main() -> freetrace::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let opts = CalcOptions {
        subs: aspect_ratio_subs(),
        rewrites: vec![Rewrite { base: "Sigma_sqrt".into(), power: 2, target: "Sigma".into() }],
        ..Default::default()
    };
    let bias = calc(&pencil::load(format!("{dir}/ridge_bias.json"))?, 3, 8, &opts)?;
    let var = calc(&pencil::load(format!("{dir}/ridge_variance.json"))?, 3, 8, &opts)?;
    println!("bias:\n{}\n\nvariance:\n{}\n", bias.render(Format::Latex), var.render(Format::Latex));

    // power-law covariance, signal aligned with it
    let d = 200;
    let sigma: Vec<f64> = (1..=d).map(|k| (k as f64).powf(-0.7)).collect();
    let spectrum = SpectrumSpec::from_columns(
        "d",
        &[("Sigma_sqrt", sigma.iter().map(|s| s.sqrt()).collect()), ("Theta", sigma.clone())],
    )?;
    let (phi, sigma2) = (0.5, 0.25);
    println!("{:>8} {:>12} {:>12} {:>12}", "lambda", "bias", "variance", "risk");
    for lambda in [1e-3, 1e-2, 1e-1, 1.0] {
        let b = NumericBinding::new().with("lambda", lambda).with("phi", phi);
        let rb = solve_fixed_point(&bias, &[spectrum.clone()], &b, &SolveOptions::default())?;
        let rv = solve_fixed_point(&var, &[spectrum.clone()], &b, &SolveOptions::default())?;
        let v = sigma2 * phi / lambda * rv.target;
        println!("{lambda:>8} {:>12.6} {:>12.6} {:>12.6}", rb.target, v, rb.target + v);
    }
    Ok(())
}
