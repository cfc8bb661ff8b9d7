//! Command-line driver: `realize`, `calc`, `solve` and `validate`.
//!
//! Block indices given with `--i`/`--j` are zero-based.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::dsl::{self, Rewrite, Scope, Target};
use crate::error::{Error, Result};
use crate::fptcore::{aspect_ratio_subs, calc, calc_selection, calc_stages, CalcOptions, FixedPointSystem, Normalization};
use crate::numeric::{
    parse_range, sizes_from_subs, solve_fixed_point, sweep, validate, validate_expr, write_sweep_csv, McSetup,
    NumericBinding, SolveOptions, SpectrumSpec, ValidateOptions, Verdict,
};
use crate::pencil::{self, Pencil};
use crate::symcore::{Format, MatrixExpr, ScalarExpr, Var};

#[derive(Parser, Debug)]
#[command(name = "freetrace", version, about = "Fixed-point equations for limiting traces of Gaussian random matrix expressions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a linear pencil for the trace target of a program.
    Realize(RealizeArgs),
    /// Derive the fixed-point system of a pencil entry.
    Calc(CalcArgs),
    /// Solve the fixed-point system numerically.
    Solve(SolveArgs),
    /// Compare the solved system with a Monte Carlo simulation.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
pub struct SourceArgs {
    /// Load the pencil from a JSON file instead of realizing an expression.
    #[arg(long)]
    pub pencil_file: Option<PathBuf>,
    /// Program file in the expression language.
    #[arg(long)]
    pub expr: Option<PathBuf>,
    /// Row of the target block of the inverse (zero-based).
    #[arg(long)]
    pub i: Option<usize>,
    /// Column of the target block of the inverse (zero-based).
    #[arg(long)]
    pub j: Option<usize>,
    /// Treat this matrix as random and every unlisted one as deterministic.
    #[arg(long = "random-matrix")]
    pub random_matrix: Vec<String>,
    /// Default entry variance of random matrices: full is 1/(n lambda),
    /// sample_size is 1/n, custom requires --variance for each.
    #[arg(long)]
    pub normalize: Option<String>,
    /// Entry variance of one random matrix, e.g. `X=1/d`.
    #[arg(long)]
    pub variance: Vec<String>,
    /// Dimension substitutions, e.g. `d=n*phi,m=n*phi/psi`. Defaults to
    /// `d=n*phi` when the pencil has both dimensions.
    #[arg(long)]
    pub subs: Option<String>,
    /// Do not apply any substitution.
    #[arg(long)]
    pub no_subs: bool,
    /// Relation between deterministic matrices, e.g. `Sigma_sqrt^2=Sigma`.
    #[arg(long)]
    pub rewrite: Vec<String>,
    /// Dimension that plays the role of `n`.
    #[arg(long, default_value = "n")]
    pub sample_dim: String,
    /// Keep every entry of the inverse as its own unknown.
    #[arg(long)]
    pub no_dedup: bool,
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// latex, text or json.
    #[arg(long)]
    pub format: Option<String>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// 1 echoes each random matrix's variance, 2 also prints the pencil.
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=2))]
    pub verbose: u8,
}

#[derive(Args, Debug)]
pub struct NumericArgs {
    /// Values of constants, e.g. `lambda=0.1,phi=1/2`.
    #[arg(long, default_value = "")]
    pub constants: String,
    /// Joint spectrum for one dimension: `d=spectrum.csv` (one column per
    /// matrix) or `d=identity:Sigma,Theta`.
    #[arg(long)]
    pub spectrum: Vec<String>,
    /// Weight of the new iterate in the damped update.
    #[arg(long, default_value_t = 0.5)]
    pub damping: f64,
    /// Stop once the largest change falls below this.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
}

#[derive(Args, Debug)]
pub struct RealizeArgs {
    /// Program file whose target is `trace_of`.
    #[arg(long)]
    pub expr: PathBuf,
    /// Skip the size reduction.
    #[arg(long)]
    pub unreduced: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct CalcArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Solve a system saved by `calc --format json` instead.
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[command(flatten)]
    pub numeric: NumericArgs,
    /// Solve along a grid, `param=start:stop:count`, and write CSV.
    #[arg(long)]
    pub sweep: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub numeric: NumericArgs,
    /// Concrete sizes, e.g. `n=2000`; the rest follow from the substitutions.
    #[arg(long)]
    pub dims: String,
    /// Independent draws to average.
    #[arg(long, default_value_t = 8)]
    pub trials: usize,
    /// Master seed; trial k uses a seed derived from it and k.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Constant C of the allowance 3 stderr + C/n.
    #[arg(long, default_value_t = 10.0)]
    pub finite_size: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit code: 0 on success, 2 when validation does not pass, 1
/// on any error.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let Error::Invalid(_) = e {
                let name = match cli.command {
                    Command::Realize(_) => "realize",
                    Command::Calc(_) => "calc",
                    Command::Solve(_) => "solve",
                    Command::Validate(_) => "validate",
                };
                if let Some(sub) = Cli::command().find_subcommand_mut(name) {
                    let _ = writeln!(err, "\n{}\n\nFor more information, try '--help'.", sub.render_usage());
                }
            }
            1
        }
    }
}

fn execute(cmd: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Realize(a) => {
            let src = read_program(&a.expr)?;
            let Target::Trace(e) = &src.target else {
                return Err(Error::Invalid("realize needs a `target trace_of ...` program".into()));
            };
            let q = if a.unreduced { pencil::realize_unreduced(e)? } else { pencil::realize(e)? };
            let text = match format(&a.output, Format::Json)? {
                Format::Json => pencil::to_json(&q),
                Format::Latex => q.latex(),
                Format::Text => q.to_string(),
            };
            emit(&a.output, out, &text)?;
            Ok(0)
        }
        Command::Calc(a) => {
            let loaded = load(&a.source)?;
            loaded.echo(a.output.verbose, err)?;
            let sys = loaded.system()?;
            emit(&a.output, out, &sys.render(format(&a.output, Format::Latex)?))?;
            Ok(0)
        }
        Command::Solve(a) => {
            let sys = match &a.system {
                Some(path) => {
                    let v: serde_json::Value = serde_json::from_str(&read(path)?)?;
                    FixedPointSystem::from_json(&v)?
                }
                None => {
                    let loaded = load(&a.source)?;
                    loaded.echo(a.output.verbose, err)?;
                    loaded.system()?
                }
            };
            let spectra = spectra(&a.numeric.spectrum)?;
            let binding = NumericBinding::parse(&a.numeric.constants)?;
            let opts = solve_options(&a.numeric);
            if let Some(spec) = &a.sweep {
                let (param, range) =
                    spec.split_once('=').ok_or_else(|| Error::Invalid(format!("expected param=a:b:count, got {spec:?}")))?;
                let rows = sweep(&sys, &spectra, &binding, param.trim(), &parse_range(range)?, &opts)?;
                let mut buf = Vec::new();
                write_sweep_csv(&mut buf, param.trim(), &rows)?;
                emit(&a.output, out, &String::from_utf8_lossy(&buf))?;
                return Ok(0);
            }
            let r = solve_fixed_point(&sys, &spectra, &binding, &opts)?;
            let text = match format(&a.output, Format::Text)? {
                Format::Json => serde_json::to_string_pretty(&r.to_json())?,
                _ => r.text(),
            };
            emit(&a.output, out, &text)?;
            Ok(0)
        }
        Command::Validate(a) => {
            let loaded = load(&a.source)?;
            loaded.echo(a.output.verbose, err)?;
            let sys = loaded.system()?;
            let binding = NumericBinding::parse(&a.numeric.constants)?;
            let setup = McSetup {
                sizes: concrete_sizes(&a.dims, &loaded.opts, &binding)?,
                spectra: spectra(&a.numeric.spectrum)?,
                variances: loaded.opts.variance_spec(&loaded.pencil)?,
                binding: binding.clone(),
                rewrites: loaded.opts.rewrites.clone(),
            };
            let opts = ValidateOptions {
                trials: a.trials,
                seed: a.seed,
                finite_size: a.finite_size,
                sample_dim: a.source.sample_dim.clone(),
                solve: solve_options(&a.numeric),
            };
            let report = match &loaded.expr {
                Some(e) if loaded.entry.is_none() => validate_expr(&sys, e, &setup, &binding, &opts)?,
                _ => validate(&sys, &loaded.pencil, &setup, &binding, &opts)?,
            };
            let text = match format(&a.output, Format::Text)? {
                Format::Json => serde_json::to_string_pretty(&report.to_json())?,
                _ => report.table(),
            };
            emit(&a.output, out, &text)?;
            Ok(if report.verdict == Verdict::Pass { 0 } else { 2 })
        }
    }
}

/// A pencil together with the options and target it should be solved for.
struct Loaded {
    pencil: Pencil,
    entry: Option<(usize, usize)>,
    expr: Option<MatrixExpr>,
    opts: CalcOptions,
}

impl Loaded {
    fn system(&self) -> Result<FixedPointSystem> {
        match self.entry {
            Some((i, j)) => calc(&self.pencil, i, j, &self.opts),
            None => calc_selection(&self.pencil, &self.opts),
        }
    }

    fn echo(&self, verbose: u8, err: &mut dyn Write) -> Result<()> {
        if verbose == 0 {
            return Ok(());
        }
        for (name, v) in self.opts.variance_spec(&self.pencil)? {
            writeln!(err, "variance of {name}: {}", crate::symcore::render::text(&v))?;
        }
        if verbose >= 2 {
            writeln!(err, "pencil:\n{}", self.pencil)?;
            let targets = match self.entry {
                Some((i, j)) => vec![(i, j, crate::symcore::Rational::from_integer(1.into()))],
                None => self.pencil.terms()?,
            };
            let st = calc_stages(&self.pencil, &targets, &self.opts)?;
            for class in st.structure.classes.classes.iter().filter(|c| c.len() > 1) {
                writeln!(err, "equal entries: {class:?}")?;
            }
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn load_pencil(path: &Path) -> Result<Pencil> {
    pencil::from_json(&read(path)?)
}

fn read_program(path: &Path) -> Result<dsl::ExpressionSource> {
    dsl::parse(&read(path)?)
}

fn load(a: &SourceArgs) -> Result<Loaded> {
    let (mut pencil, mut entry, mut expr) = (None, None, None);
    let mut variances = BTreeMap::new();
    let mut subs = Vec::new();
    let mut rewrites = Vec::new();
    if let Some(path) = &a.expr {
        let src = read_program(path)?;
        match &src.target {
            Target::Trace(e) => {
                pencil = Some(pencil::realize(e)?);
                expr = Some(e.clone());
            }
            Target::Pencil { path: p, i, j } => {
                let base = path.parent().unwrap_or(Path::new("."));
                pencil = Some(load_pencil(&base.join(p))?);
                entry = Some((*i, *j));
            }
        }
        variances = src.variances.clone();
        subs = src.subs.clone();
        rewrites = src.rewrites.clone();
    }
    if let Some(path) = &a.pencil_file {
        if pencil.is_some() {
            return Err(Error::Invalid("give either --pencil-file or an --expr program, not both".into()));
        }
        pencil = Some(load_pencil(path)?);
    }
    let mut pencil = pencil.ok_or_else(|| Error::Invalid("missing --pencil-file or --expr".into()))?;
    match (a.i, a.j) {
        (Some(i), Some(j)) => entry = Some((i, j)),
        (None, None) => {}
        _ => return Err(Error::Invalid("--i and --j go together".into())),
    }
    if !a.random_matrix.is_empty() {
        pencil = mark_random(&pencil, &a.random_matrix)?;
    }
    let mut dims: BTreeSet<String> = pencil.dims.iter().map(|d| d.name().to_string()).collect();
    dims.insert(a.sample_dim.clone());
    for spec in &a.variance {
        let (name, v) = split_pair(spec)?;
        variances.insert(name.to_string(), scalar(v, &dims)?);
    }
    if let Some(list) = &a.subs {
        for spec in list.split(',').filter(|s| !s.trim().is_empty()) {
            let (name, v) = split_pair(spec)?;
            subs.push((Var::dim(name), scalar(v, &dims)?));
        }
    }
    if a.no_subs {
        subs.clear();
    } else if subs.is_empty() && dims.contains("d") && a.sample_dim == "n" {
        subs = aspect_ratio_subs();
    }
    for spec in &a.rewrite {
        rewrites.push(parse_rewrite(spec)?);
    }
    let normalize = match &a.normalize {
        Some(s) => s.parse()?,
        None => Normalization::Full,
    };
    let opts = CalcOptions {
        normalize,
        variances,
        sample_dim: a.sample_dim.clone(),
        subs,
        rewrites,
        dedup: !a.no_dedup,
    };
    Ok(Loaded { pencil, entry, expr, opts })
}

fn mark_random(q: &Pencil, names: &[String]) -> Result<Pencil> {
    let mut v: serde_json::Value = serde_json::from_str(&pencil::to_json(q))?;
    let known: BTreeSet<String> = q.symbols().keys().cloned().collect();
    for n in names {
        if !known.contains(n) {
            return Err(Error::Unbound(format!("matrix {n} is not in the pencil")));
        }
    }
    for s in v["symbols"].as_array_mut().into_iter().flatten() {
        let random = names.iter().any(|n| s["name"] == n.as_str());
        s["kind"] = (if random { "rand" } else { "det" }).into();
    }
    pencil::from_json(&v.to_string())
}

fn split_pair(s: &str) -> Result<(&str, &str)> {
    s.split_once('=')
        .map(|(a, b)| (a.trim(), b.trim()))
        .ok_or_else(|| Error::Invalid(format!("expected name=value, got {s:?}")))
}

/// Parses a scalar where `dims` are dimensions and every other name is a
/// constant.
fn scalar(src: &str, dims: &BTreeSet<String>) -> Result<ScalarExpr> {
    let mut scope = Scope { dims: dims.clone(), ..Default::default() };
    for word in src.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_')) {
        if word.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) && !dims.contains(word) {
            scope.consts.insert(word.to_string());
        }
    }
    dsl::parse_scalar(src, &scope)
}

fn parse_rewrite(s: &str) -> Result<Rewrite> {
    let bad = || Error::Invalid(format!("expected base^power=target, got {s:?}"));
    let (lhs, target) = split_pair(s)?;
    let (base, power) = lhs.split_once('^').ok_or_else(bad)?;
    Ok(Rewrite {
        base: base.trim().to_string(),
        power: power.trim().parse().map_err(|_| bad())?,
        target: target.to_string(),
    })
}

fn spectra(specs: &[String]) -> Result<Vec<SpectrumSpec>> {
    specs
        .iter()
        .map(|s| {
            let (dim, rest) = split_pair(s)?;
            match rest.strip_prefix("identity:") {
                Some(names) => {
                    let names: Vec<&str> = names.split(',').map(str::trim).collect();
                    Ok(SpectrumSpec::identity(dim, &names))
                }
                None => SpectrumSpec::from_csv(dim, rest),
            }
        })
        .collect()
}

fn solve_options(a: &NumericArgs) -> SolveOptions {
    SolveOptions { init: None, damping: a.damping, tol: a.tol, max_iter: a.max_iter }
}

fn concrete_sizes(spec: &str, opts: &CalcOptions, binding: &NumericBinding) -> Result<BTreeMap<String, usize>> {
    let mut given = BTreeMap::new();
    for part in spec.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = split_pair(part)?;
        let v: usize = v.parse().map_err(|_| Error::Invalid(format!("bad size {v:?}")))?;
        given.insert(k.to_string(), v);
    }
    let n = *given
        .get(&opts.sample_dim)
        .ok_or_else(|| Error::Invalid(format!("--dims must give {}", opts.sample_dim)))?;
    let mut sizes = sizes_from_subs(n, &opts.sample_dim, &opts.subs, binding)?;
    sizes.extend(given);
    Ok(sizes)
}

fn format(a: &OutputArgs, default: Format) -> Result<Format> {
    a.format.as_deref().map_or(Ok(default), str::parse)
}

fn emit(a: &OutputArgs, out: &mut dyn Write, text: &str) -> Result<()> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &a.out {
        Some(path) => std::fs::write(path, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}
