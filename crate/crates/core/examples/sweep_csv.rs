//! Writes a lambda sweep of the Marchenko-Pastur system as CSV.
//!
//! ```bash
//! cargo run -p freetrace --example sweep_csv > mp_sweep.csv
//! ```

use freetrace::fptcore::{aspect_ratio_subs, calc_selection, CalcOptions};
use freetrace::numeric::{parse_range, sweep, write_sweep_csv, NumericBinding, SolveOptions};
use freetrace::pencil;

fn main() -> freetrace::Result<()> {
    let q = pencil::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/mp.json"))?;
    let sys = calc_selection(&q, &CalcOptions { subs: aspect_ratio_subs(), ..Default::default() })?;
    let rows = sweep(&sys, &[], &NumericBinding::parse("phi=0.5")?, "lambda", &parse_range("0.01:2:25")?, &SolveOptions::default())?;
    write_sweep_csv(std::io::stdout().lock(), "lambda", &rows)
}
