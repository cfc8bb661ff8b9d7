//! Solver versus Monte Carlo comparison, and parameter sweeps.

use std::io::Write;

use serde_json::{json, Value};

use super::montecarlo::{monte_carlo_expr, monte_carlo_pencil, McSetup, MonteCarloEstimate};
use super::solve::{solve_fixed_point, SolveOptions, SolveResult};
use super::spectrum::{NumericBinding, SpectrumSpec};
use crate::error::{Error, Result};
use crate::fptcore::FixedPointSystem;
use crate::pencil::Pencil;
use crate::symcore::MatrixExpr;

#[derive(Clone, Debug)]
pub struct ValidateOptions {
    pub trials: usize,
    pub seed: u64,
    /// Finite-size allowance `C` in `3 stderr + C/n`.
    pub finite_size: f64,
    /// Dimension whose size is the `n` of the allowance.
    pub sample_dim: String,
    pub solve: SolveOptions,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions { trials: 8, seed: 0, finite_size: 10.0, sample_dim: "n".into(), solve: SolveOptions::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// The solver did not converge, so nothing was compared.
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    /// `None` for the target.
    pub entry: Option<(usize, usize)>,
    pub solver: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub diff: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub n: usize,
    pub rows: Vec<Comparison>,
    pub solve: SolveResult,
    pub mc: MonteCarloEstimate,
    pub verdict: Verdict,
}

fn compare(entry: Option<(usize, usize)>, solver: f64, mean: f64, stderr: f64, allowance: f64) -> Comparison {
    let diff = (solver - mean).abs();
    let threshold = 3.0 * stderr + allowance;
    Comparison { entry, solver, mc_mean: mean, mc_stderr: stderr, diff, threshold, pass: diff <= threshold }
}

fn sample_size(setup: &McSetup, opts: &ValidateOptions) -> Result<usize> {
    setup
        .sizes
        .get(&opts.sample_dim)
        .copied()
        .ok_or_else(|| Error::Unbound(format!("size of {}", opts.sample_dim)))
}

fn finish(n: usize, rows: Vec<Comparison>, solve: SolveResult, mc: MonteCarloEstimate) -> ValidationReport {
    let verdict = if !solve.converged {
        Verdict::Inconclusive
    } else if rows.iter().all(|r| r.pass) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    ValidationReport { n, rows, solve, mc, verdict }
}

/// Solves `sys` and compares every square entry and the target against a
/// Monte Carlo of the pencil `q` it was computed from.
pub fn validate(
    sys: &FixedPointSystem,
    q: &Pencil,
    setup: &McSetup,
    binding: &NumericBinding,
    opts: &ValidateOptions,
) -> Result<ValidationReport> {
    let n = sample_size(setup, opts)?;
    let spectra: Vec<SpectrumSpec> = setup.spectra.clone();
    let solve = solve_fixed_point(sys, &spectra, binding, &opts.solve)?;
    let entries: Vec<(usize, usize)> =
        sys.equations.iter().map(|e| e.lhs).filter(|&(i, j)| i < q.size() && j < q.size()).collect();
    let mc = monte_carlo_pencil(q, &entries, setup, opts.trials, opts.seed)?;
    let allowance = opts.finite_size / n as f64;
    let mut rows = Vec::new();
    for (&e, est) in &mc.entries {
        rows.push(compare(Some(e), solve.get(e.0, e.1), est.mean, est.stderr, allowance));
    }
    rows.push(compare(None, solve.target, mc.mean, mc.stderr, allowance));
    Ok(finish(n, rows, solve, mc))
}

/// Like [`validate`] but the Monte Carlo side is the normalized trace of `e`,
/// compared with the system's target only.
pub fn validate_expr(
    sys: &FixedPointSystem,
    e: &MatrixExpr,
    setup: &McSetup,
    binding: &NumericBinding,
    opts: &ValidateOptions,
) -> Result<ValidationReport> {
    let n = sample_size(setup, opts)?;
    let solve = solve_fixed_point(sys, &setup.spectra, binding, &opts.solve)?;
    let mc = monte_carlo_expr(e, setup, opts.trials, opts.seed)?;
    let rows = vec![compare(None, solve.target, mc.mean, mc.stderr, opts.finite_size / n as f64)];
    Ok(finish(n, rows, solve, mc))
}

impl ValidationReport {
    pub fn to_json(&self) -> Value {
        json!({
            "verdict": self.verdict.as_str(),
            "n": self.n,
            "rows": self.rows.iter().map(|r| json!({
                "entry": r.entry.map(|(i, j)| json!([i, j])).unwrap_or(json!("target")),
                "solver": r.solver,
                "mc_mean": r.mc_mean,
                "mc_stderr": r.mc_stderr,
                "diff": r.diff,
                "threshold": r.threshold,
                "pass": r.pass,
            })).collect::<Vec<_>>(),
            "solve": self.solve.to_json(),
            "monte_carlo": self.mc.to_json(),
        })
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<10} {:>14} {:>14} {:>11} {:>11} {:>11}  ok\n",
            "entry", "solver", "mc mean", "mc stderr", "|diff|", "threshold"
        );
        for r in &self.rows {
            let name = r.entry.map_or("target".to_string(), |(i, j)| format!("G_{{{i},{j}}}"));
            out.push_str(&format!(
                "{:<10} {:>14.8} {:>14.8} {:>11.3e} {:>11.3e} {:>11.3e}  {}\n",
                name,
                r.solver,
                r.mc_mean,
                r.mc_stderr,
                r.diff,
                r.threshold,
                if r.pass { "yes" } else { "NO" }
            ));
        }
        out.push_str(&format!(
            "n = {}, trials = {}, seed = {}, solver residual = {:.2e} after {} iterations\nverdict: {}\n",
            self.n,
            self.mc.trials,
            self.mc.seed,
            self.solve.residual,
            self.solve.iterations,
            self.verdict.as_str()
        ));
        out
    }
}

/// Solves `sys` once per value of `param`.
pub fn sweep(
    sys: &FixedPointSystem,
    spectra: &[SpectrumSpec],
    binding: &NumericBinding,
    param: &str,
    values: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<(f64, SolveResult)>> {
    values
        .iter()
        .map(|&x| {
            let b = binding.clone().with(param, x);
            Ok((x, solve_fixed_point(sys, spectra, &b, opts)?))
        })
        .collect()
}

/// One row per sweep point: the parameter, the target, every unknown, and
/// the convergence flags.
pub fn write_sweep_csv<W: Write>(out: W, param: &str, rows: &[(f64, SolveResult)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let entries: Vec<(usize, usize)> = rows.first().map(|r| r.1.values.keys().copied().collect()).unwrap_or_default();
    let mut header = vec![param.to_string(), "target".into()];
    header.extend(entries.iter().map(|(i, j)| format!("G_{i}_{j}")));
    header.extend(["residual".into(), "iterations".into(), "converged".into()]);
    w.write_record(&header)?;
    for (x, r) in rows {
        let mut rec = vec![x.to_string(), r.target.to_string()];
        rec.extend(entries.iter().map(|&(i, j)| r.get(i, j).to_string()));
        rec.extend([r.residual.to_string(), r.iterations.to_string(), r.converged.to_string()]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `count` evenly spaced values from `start:stop:count`.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Invalid(format!("expected start:stop:count, got {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts.as_slice() else { return Err(bad()) };
    let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    let c: usize = c.trim().parse().map_err(|_| bad())?;
    Ok(match c {
        0 => vec![],
        1 => vec![a],
        _ => (0..c).map(|k| a + (b - a) * k as f64 / (c - 1) as f64).collect(),
    })
}
