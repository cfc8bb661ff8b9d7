use std::path::PathBuf;
use std::process::{Command, Output};

use freetrace::dsl::{self, Target};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freetrace")).current_dir(root()).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn calc_on_mp_fixture_gives_two_equations() {
    let o = run(&["calc", "--pencil-file", "fixtures/mp.json", "--i", "1", "--j", "1", "--format", "text"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 2, "{text}");
    assert!(text.contains("G_{1,1} = lambda/(G_{0,0} + lambda)"));
    assert!(text.contains("G_{0,0} = lambda/(G_{1,1}*phi + lambda)"));
}

#[test]
fn calc_on_bias_pencil_prints_latex() {
    let o = run(&[
        "calc", "--pencil-file", "fixtures/ridge_bias.json", "--i", "3", "--j", "8", "--random-matrix", "Z",
        "--normalize", "full",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("{G}_{3,8} = \\bar{tr}"), "{text}");
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn verbose_echoes_variances() {
    let o = run(&["calc", "--expr", "examples/programs/random_features.fpt", "--verbose", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let err = String::from_utf8_lossy(&o.stderr);
    for line in ["variance of X: 1/d", "variance of W0: zeta/(lambda*m)", "variance of Theta0: beta/(lambda*m)"] {
        assert!(err.contains(line), "{err}");
    }
}

#[test]
fn random_matrix_flag_turns_the_rest_deterministic() {
    let o = run(&["calc", "--pencil-file", "fixtures/mp.json", "--random-matrix", "Q"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let base = ["validate", "--expr", "examples/programs/mp.fpt", "--constants", "lambda=1,phi=1", "--dims", "n=400"];
    assert_eq!(run(&base).status.code(), Some(0));
    let mut strict = base.to_vec();
    strict.extend(["--trials", "1", "--finite-size", "0"]);
    assert_eq!(run(&strict).status.code(), Some(2));
    assert_eq!(run(&["calc"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--expr", "examples/programs/mp.fpt"]).status.code(), Some(1));
    assert_eq!(run(&["validate", "--expr", "examples/programs/mp.fpt"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn identical_flags_give_identical_output() {
    let args = [
        "validate", "--pencil-file", "fixtures/subordination.json", "--spectrum", "d=identity:S1,S2", "--subs",
        "d=n*phi,n1=p1*n,n2=p2*n", "--constants", "lambda=0.5,phi=0.5,p1=0.3,p2=0.7", "--dims", "n=300", "--trials",
        "3", "--seed", "9", "--format", "json",
    ];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let mut other = args.to_vec();
    let k = other.len() - 3;
    other[k] = "10";
    assert_ne!(run(&other).stdout, a.stdout);
}

#[test]
fn realize_then_calc_from_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.json");
    let o = run(&["realize", "--expr", "examples/programs/anisotropic_mp.fpt", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&[
        "solve", "--pencil-file", path.to_str().unwrap(), "--rewrite", "Sigma_sqrt^2=Sigma", "--spectrum",
        "d=identity:Sigma_sqrt", "--constants", "lambda=1,phi=1", "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let s = v["target"].as_f64().unwrap();
    assert!((s - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-10);
}

#[test]
fn solve_reads_a_saved_system_and_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("sys.json");
    let o = run(&["calc", "--expr", "examples/programs/mp.fpt", "--format", "json", "--out", sys.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["solve", "--system", sys.to_str().unwrap(), "--constants", "phi=1", "--sweep", "lambda=0.5:2:4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(&rdr.headers().unwrap()[0], "lambda");
    assert_eq!(rdr.records().count(), 4);
}

#[test]
fn programs_round_trip_through_rendering() {
    let dir = root().join("examples/programs");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let src = dsl::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
        if let Target::Trace(e) = &src.target {
            let again = dsl::parse_matrix(&e.to_dsl(), &src.scope).unwrap();
            assert_eq!(&again, e, "{}", path.display());
            let reparsed = dsl::parse(&dsl::render_program(&src)).unwrap();
            assert_eq!(reparsed.target, src.target, "{}", path.display());
            assert_eq!(reparsed.variances, src.variances);
            assert_eq!(reparsed.subs, src.subs);
        }
    }
}

#[test]
fn parse_errors_name_the_problem() {
    let err = dsl::parse("dim n, d;\nrand Z : n x d;\ntarget trace_of inv(Y' * Z + I(d));").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("Y") && msg.contains("line 3"), "{msg}");
}
