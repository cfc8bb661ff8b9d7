//! Numeric evaluation, fixed-point solving and Monte Carlo validation.

pub mod dense;
mod montecarlo;
mod solve;
mod spectrum;
mod validate;

pub use montecarlo::{
    monte_carlo_expr, monte_carlo_pencil, pencil_block_traces, sizes_from_subs, trace_of, Estimate, McSetup,
    MonteCarloEstimate,
};
pub use solve::{eval_rhs, eval_trace, residual, solve_fixed_point, SolveOptions, SolveResult};
pub use spectrum::{derive_all, lookup, NumericBinding, SpectrumSpec};
pub use validate::{
    parse_range, sweep, validate, validate_expr, write_sweep_csv, Comparison, ValidateOptions, ValidationReport,
    Verdict,
};

/// Seed for trial `idx` of a run with master seed `master` (splitmix64 mix).
pub fn trial_seed(master: u64, idx: u64) -> u64 {
    let mut z = master ^ idx.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
