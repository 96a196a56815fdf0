use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::process::{Command, Output};

use num_complex::Complex64;
use qpseudo::interp::{measured_paths, Input, Inputs, RunOptions};
use qpseudo::lang::parse;
use qpseudo::stdlib::{self, oracle};
use serde_json::Value as Json;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn qps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qps"))
        .args(args)
        .current_dir(root())
        .output()
        .expect("qps runs")
}

fn records(out: &Output) -> Vec<Json> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("each line is JSON"))
        .collect()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn temp_program(name: &str, src: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qps-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, src).unwrap();
    p
}

fn parse_matrix(text: &str) -> Vec<Vec<Complex64>> {
    text.lines()
        .map(|l| {
            l.split('\t')
                .map(|e| {
                    let e = e.strip_suffix('i').unwrap();
                    // the imaginary part starts at the last sign not inside an exponent
                    let cut = e
                        .char_indices()
                        .skip(1)
                        .filter(|&(i, ch)| (ch == '+' || ch == '-') && &e[i - 1..i] != "e")
                        .last()
                        .unwrap()
                        .0;
                    Complex64::new(e[..cut].parse().unwrap(), e[cut..].parse().unwrap())
                })
                .collect()
        })
        .collect()
}

#[test]
fn check_exit_codes() {
    let ok = qps(&["check", "programs/fourier.qps"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    assert!(ok.stderr.is_empty());

    let bad = qps(&["check", "programs/reject/rule_i.qps"]);
    assert_eq!(bad.status.code(), Some(1));
    let line = stderr(&bad).lines().next().unwrap().to_string();
    let mut parts = line.splitn(3, ' ');
    let pos = parts.next().unwrap();
    assert!(pos.split(':').all(|n| n.parse::<u32>().is_ok()), "{line}");
    assert_eq!(parts.next(), Some("E_RULE_I"));

    assert_eq!(qps(&["check", "programs/no_such_file.qps"]).status.code(), Some(2));
}

#[test]
fn every_example_checks() {
    for (name, _) in stdlib::EXAMPLES {
        let out = qps(&["check", &format!("programs/{name}")]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", stderr(&out));
    }
}

#[test]
fn warnings_do_not_fail_check() {
    let p = temp_program(
        "warn.qps",
        "proc m(~a):\n    reverse:\n        t <- 0b0\n        ~t <- t\n        CNot(~a, ~t)\n        dissipate ~t reinit 0\n        H(~a)\n",
    );
    let out = qps(&["check", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("W_DISSIPATE_IN_REVERSE"), "{}", stderr(&out));
    let run = qps(&["run", p.to_str().unwrap(), "--shots", "2"]);
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
}

#[test]
fn measured_fourier_frequencies() {
    let out = qps(&["run", "programs/measured_fourier.qps", "d=3", "a=000", "--seed", "7", "--shots", "1000"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let recs = records(&out);
    assert_eq!(recs.len(), 1000);
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for (i, r) in recs.iter().enumerate() {
        assert_eq!(r["shot"], i);
        *counts.entry(r["outputs"]["a"].as_str().unwrap().to_string()).or_default() += 1;
    }
    let p = parse(stdlib::MEASURED_FOURIER_SRC).unwrap();
    let ins: Inputs = [("d".into(), Input::Int(3)), ("a".into(), Input::Text("000".into()))].into();
    let dist = measured_paths(&p, &ins, &RunOptions::default()).unwrap();
    // measurement keys are per-qubit in measurement order; the output is the register
    let mut by_output: BTreeMap<String, f64> = BTreeMap::new();
    for (k, pr) in dist {
        *by_output.entry(k.chars().rev().collect()).or_default() += pr;
    }
    for (k, pr) in &by_output {
        let f = *counts.get(k).unwrap_or(&0) as f64 / 1000.0;
        let sigma = (pr * (1.0 - pr) / 1000.0).sqrt();
        assert!((f - pr).abs() <= 3.0 * sigma, "{k}: {f} vs {pr}");
    }
}

#[test]
fn is_classical_example_outputs_zero() {
    let out = qps(&["run", "programs/is_classical_example.qps", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = &records(&out)[0];
    assert_eq!(r["outputs"]["b"], "0");
    let keys: Vec<&str> = r.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    assert_eq!(keys, ["shot", "outputs", "measurements", "seed"]);
}

#[test]
fn runs_are_byte_identical() {
    let args = ["run", "programs/measured_fourier.qps", "d=3", "a=101", "--seed", "11", "--shots", "300"];
    let a = qps(&args);
    let b = qps(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let few = qps(&["run", "programs/measured_fourier.qps", "d=3", "a=101", "--seed", "11", "--shots", "7"]);
    let head: Vec<&[u8]> = a.stdout.split(|&b| b == b'\n').take(7).collect();
    let short: Vec<&[u8]> = few.stdout.split(|&b| b == b'\n').take(7).collect();
    assert_eq!(head, short);
    let other = qps(&["run", "programs/measured_fourier.qps", "d=3", "a=101", "--seed", "12", "--shots", "300"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn in_flag_matches_positional() {
    let a = qps(&["run", "programs/measured_fourier.qps", "d=2", "a=10", "--shots", "5"]);
    let b = qps(&["run", "programs/measured_fourier.qps", "--in", "d=2", "--in", "a=10", "--shots", "5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn matrix_of_qif_is_cnot() {
    let p = temp_program("cnot.qps", "proc C(~b, ~a):\n    qif ~b: X(~a)\n");
    let out = qps(&["matrix", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let m = parse_matrix(&String::from_utf8_lossy(&out.stdout));
    let want = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]];
    for r in 0..4 {
        for c in 0..4 {
            assert_eq!(m[r][c], Complex64::new(want[r][c] as f64, 0.0));
        }
    }
}

#[test]
fn matrix_of_fourier_is_reversed_dft() {
    let out = qps(&["matrix", "programs/fourier.qps", "d=2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let m = parse_matrix(&String::from_utf8_lossy(&out.stdout));
    let dft = oracle::dft_matrix(2);
    for r in 0..4 {
        for c in 0..4 {
            let want = dft[oracle::bit_reverse(r, 2) * 4 + c];
            assert!((m[r][c] - want).norm() < 1e-9, "{r},{c}");
        }
    }
    let w = qps(&["matrix", "programs/fourier.qps", "d=2", "--width", "a=2"]);
    assert_eq!(w.stdout, out.stdout);
}

#[test]
fn matrix_refuses_measurement() {
    let p = temp_program("meas.qps", "proc M(~a) -> a:\n    H(~a)\n    a <- ~a\n");
    let out = qps(&["matrix", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(stderr(&out).contains("measures"));
}

#[test]
fn runtime_errors_are_records() {
    let p = temp_program(
        "assert.qps",
        "proc m():\n    b <- 0b0\n    ~b <- b\n    H(~b)\n    b <- assert_classical ~b proof \"nope\"\n",
    );
    let out = qps(&["run", p.to_str().unwrap(), "--shots", "3"]);
    assert_eq!(out.status.code(), Some(3));
    let recs = records(&out);
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0]["shot"], 0);
    assert_eq!(recs[0]["error"]["kind"], "assertion");
    assert_eq!(recs[0]["error"]["line"], 5);
    assert!(recs[0]["error"]["message"].as_str().unwrap().contains("nope"));
}

#[test]
fn bad_inputs_exit_two() {
    assert_eq!(qps(&["run", "programs/fourier.qps", "d=2", "a=01", "zz=3"]).status.code(), Some(2));
    assert_eq!(qps(&["run", "programs/fourier.qps", "d"]).status.code(), Some(2));
    assert_eq!(qps(&["run", "programs/coin.qps", "--shots", "0"]).status.code(), Some(2));
    assert_eq!(qps(&["run", "programs/coin.qps", "--max-qubits", "99"]).status.code(), Some(2));
    assert_eq!(qps(&["run", "programs/coin.qps", "--mode", "lenient"]).status.code(), Some(2));
    assert_eq!(qps(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn resource_limit_exits_three() {
    let out = qps(&["run", "programs/fourier.qps", "d=5", "a=00000", "--max-qubits", "4"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(records(&out)[0]["error"]["kind"], "resource");
}

#[test]
fn permissive_mode_flag() {
    let p = temp_program("perm.qps", "proc m() -> b:\n    b <- 0b0\n    ~b <- b\n    H(~b)\n    b <- 2 * ~b\n");
    let strict = qps(&["run", p.to_str().unwrap()]);
    assert_eq!(strict.status.code(), Some(1));
    assert!(strict.stdout.is_empty());
    let loose = qps(&["run", p.to_str().unwrap(), "--mode", "permissive", "--shots", "50"]);
    assert_eq!(loose.status.code(), Some(0), "{}", stderr(&loose));
    let seen: std::collections::BTreeSet<i64> =
        records(&loose).iter().map(|r| r["outputs"]["b"].as_i64().unwrap()).collect();
    assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![0, 2]);
}

#[test]
fn dump_and_trace_fields() {
    let out = qps(&["run", "programs/fourier.qps", "d=2", "a=01", "--dump-state", "--trace"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = &records(&out)[0];
    assert_eq!(r["state"].as_array().unwrap().len(), 4);
    let gates: Vec<&str> = r["trace"].as_array().unwrap().iter().map(|e| e["gate"].as_str().unwrap()).collect();
    assert_eq!(gates, ["H", "C(Phase(1.5707963267948966))", "H"]);
}

#[test]
fn in_process_driver_matches_binary() {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let path = root().join("programs/coin.qps");
    let code = qpseudo::cli::main_with(
        ["qps", "run", path.to_str().unwrap(), "--shots", "20", "--seed", "5"],
        &mut out,
        &mut err,
    );
    assert_eq!(code, 0);
    assert_eq!(out, qps(&["run", "programs/coin.qps", "--shots", "20", "--seed", "5"]).stdout);
}

/// Stdout of each shipped example against `tests/golden`. Set
/// `QPS_BLESS=1` to rewrite the files.
#[test]
fn golden_outputs() {
    let cases: &[(&str, &[&str])] = &[
        ("coin", &["run", "programs/coin.qps", "--shots", "4"]),
        ("fourier", &["run", "programs/fourier.qps", "d=2", "a=01", "--dump-state"]),
        ("fourier_matrix", &["matrix", "programs/fourier.qps", "d=2"]),
        ("measured_fourier", &["run", "programs/measured_fourier.qps", "d=3", "a=000", "--seed", "7", "--shots", "4"]),
        ("is_classical_example", &["run", "programs/is_classical_example.qps", "--seed", "1", "--dump-state"]),
        ("reversing_example", &["run", "programs/reversing_example.qps", "--seed", "3", "--dump-state"]),
        ("qintro_examples", &["run", "programs/qintro_examples.qps", "--seed", "2"]),
        ("qif_examples", &["matrix", "programs/qif_examples.qps", "--entry", "NestedToffoli"]),
        ("reversify_corpus", &["run", "programs/reversify_corpus.qps", "a=101", "--dump-state", "--trace"]),
    ];
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let bless = std::env::var_os("QPS_BLESS").is_some();
    let mut covered: HashMap<&str, bool> = stdlib::EXAMPLES.iter().map(|(n, _)| (*n, false)).collect();
    for (name, args) in cases {
        let out = qps(args);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", stderr(&out));
        let file = dir.join(format!("{name}.out"));
        if bless {
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(&file, &out.stdout).unwrap();
        } else {
            let want = std::fs::read(&file).unwrap_or_else(|_| panic!("missing {}", file.display()));
            assert_eq!(String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&want), "{name}");
        }
        let prog = args[1].trim_start_matches("programs/");
        covered.insert(prog, true);
    }
    assert!(covered.values().all(|c| *c), "{covered:?}");
}
