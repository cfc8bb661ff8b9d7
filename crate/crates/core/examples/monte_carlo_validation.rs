//! Solver against simulation for the anisotropic ridge bias pencil.
//!
//! ```bash
//! cargo run --release -p freetrace --example monte_carlo_validation
//! ```

use freetrace::dsl::Rewrite;
use freetrace::fptcore::{aspect_ratio_subs, calc, CalcOptions};
use freetrace::numeric::{sizes_from_subs, validate, McSetup, NumericBinding, SpectrumSpec, ValidateOptions};
use freetrace::pencil;

fn main() -> freetrace::Result<()> {
    let q = pencil::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/ridge_bias.json"))?;
    let opts = CalcOptions {
        subs: aspect_ratio_subs(),
        rewrites: vec![Rewrite { base: "Sigma_sqrt".into(), power: 2, target: "Sigma".into() }],
        ..Default::default()
    };
    let sys = calc(&q, 3, 8, &opts)?;
    let binding = NumericBinding::parse("lambda=0.2,phi=0.5")?;
    let spectrum = SpectrumSpec::from_columns(
        "d",
        &[("Sigma_sqrt", vec![0.6, 0.8, 1.0, 1.4]), ("Theta", vec![2.0, 1.0, 0.5, 0.5])],
    )?;
    for n in [200, 400, 800] {
        let setup = McSetup {
            sizes: sizes_from_subs(n, "n", &opts.subs, &binding)?,
            spectra: vec![spectrum.clone()],
            variances: opts.variance_spec(&q)?,
            binding: binding.clone(),
            rewrites: opts.rewrites.clone(),
        };
        let report = validate(&sys, &q, &setup, &binding, &ValidateOptions { trials: 6, ..Default::default() })?;
        println!("{}", report.table());
    }
    Ok(())
}
