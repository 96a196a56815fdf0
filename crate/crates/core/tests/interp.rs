use std::collections::HashMap;

use num_complex::Complex64;
use qpseudo::interp::{
    measured_paths, run_program, run_to_state, unitary_of_proc, ErrorKind, ExecMode, Input, Inputs,
    RunOptions, Value,
};
use qpseudo::lang::{check_program, parse, Program};
use qpseudo::stdlib;

fn prog(src: &str) -> Program {
    let p = parse(src).unwrap_or_else(|d| panic!("{d}"));
    let diags = check_program(&p);
    assert!(diags.iter().all(|d| d.is_warning()), "{diags:?}");
    p
}

fn opts() -> RunOptions {
    RunOptions::default()
}

fn with_entry(name: &str) -> RunOptions {
    RunOptions {
        entry: Some(name.into()),
        ..RunOptions::default()
    }
}

fn ins(pairs: &[(&str, Input)]) -> Inputs {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn bits(s: &str) -> Value {
    Value::from_msb(&s.chars().map(|c| c == '1').collect::<Vec<_>>())
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn is_classical_example_leaves_b_zero() {
    let p = prog(stdlib::IS_CLASSICAL_SRC);
    for seed in 0..20 {
        let r = run_program(&p, &Inputs::new(), &RunOptions { seed, ..opts() }).unwrap();
        assert_eq!(r.outputs["b"], bits("0"));
        assert!(r.measurements.is_empty());
    }
}

#[test]
fn reversing_example_restores_b() {
    let p = prog(stdlib::REVERSING_SRC);
    for seed in 0..5 {
        let r = run_program(&p, &Inputs::new(), &RunOptions { seed, ..opts() }).unwrap();
        assert_eq!(r.outputs["b"], bits("000"));
        assert_eq!(r.outputs["c"], Value::Int(3));
    }
}

#[test]
fn add_adds_constants() {
    let src = format!(
        "{}\nproc T(~a: bits[3], c: int) -> b:\n    ~b <- Add(~a, c, 3)\n    b <- ~b\n",
        stdlib::REVERSING_SRC
    );
    let p = prog(&src);
    for a in 0..8i64 {
        for k in 0..8i64 {
            let r = run_program(
                &p,
                &ins(&[("a", Input::Int(a)), ("c", Input::Int(k))]),
                &with_entry("T"),
            )
            .unwrap();
            let want = (a + k) % 8;
            let got = qpseudo::interp::value::as_int(&r.outputs["b"]).unwrap();
            assert_eq!(got, want, "{a} + {k}");
            assert!((r.measurements[0].probability - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn qintro_examples_run() {
    let p = prog(stdlib::QINTRO_SRC);
    let r = run_program(&p, &Inputs::new(), &opts()).unwrap();
    assert_eq!(r.outputs["d"], Value::Int(4));
}

#[test]
fn multiply_entangles_b_and_c() {
    let src = format!(
        "{}\nproc T() -> b, c:\n    ~b <- UniformSuperposition(3)\n    ~c <- Multiply(~b, 3)\n    b <- ~b\n    c <- ~c\n",
        stdlib::QINTRO_SRC
    );
    let p = prog(&src);
    let dist = measured_paths(&p, &Inputs::new(), &with_entry("T")).unwrap();
    assert_eq!(dist.len(), 8);
    for (k, pr) in &dist {
        let b = usize::from_str_radix(&k[..3], 2).unwrap();
        let cc = usize::from_str_radix(&k[3..], 2).unwrap();
        assert_eq!(cc, (3 * b) % 8, "{k}");
        assert!((pr - 0.125).abs() < 1e-9);
    }
}

#[test]
fn promotion_keeps_basis_state() {
    let p = prog("proc m(a: bits[3]) -> a:\n    ~a <- a\n    a <- ~a\n");
    let r = run_program(&p, &ins(&[("a", Input::Text("101".into()))]), &opts()).unwrap();
    assert_eq!(r.outputs["a"], bits("101"));
    assert_eq!(r.measurements[0].outcome, "101");
    assert!((r.measurements[0].probability - 1.0).abs() < 1e-12);

    let p = prog("proc m(a: bits[3]):\n    ~a <- a\n");
    let o = RunOptions { dump_state: true, ..opts() };
    let r = run_program(&p, &ins(&[("a", Input::Text("110".into()))]), &o).unwrap();
    let state = r.state.unwrap();
    assert_eq!(state.len(), 1);
    assert!(state[0].starts_with("|110⟩ 1.0"), "{state:?}");
}

#[test]
fn fourier_d1_is_hadamard() {
    let p = prog(&stdlib::fourier_program(1));
    let m = unitary_of_proc(&p, &Inputs::new(), &HashMap::new(), &opts()).unwrap();
    let h = 1.0 / 2f64.sqrt();
    let want = [h, h, h, -h];
    for (a, w) in m.data.iter().zip(want) {
        assert!((a - c(w, 0.0)).norm() < 1e-12);
    }
    let src = format!("{}\nproc T(~a: bits[1]) -> a:\n    Fourier(~a, 1)\n    a <- ~a\n", stdlib::FOURIER_SRC);
    let dist = measured_paths(&prog(&src), &Inputs::new(), &with_entry("T")).unwrap();
    assert!((dist["0"] - 0.5).abs() < 1e-12 && (dist["1"] - 0.5).abs() < 1e-12);
}

#[test]
fn fourier_of_one_matches_oracle() {
    let p = prog(&stdlib::fourier_program(3));
    let (_, state) = run_to_state(&p, &ins(&[("a", Input::Text("001".into()))]), &opts()).unwrap();
    let mut e1 = vec![c(0.0, 0.0); 8];
    e1[1] = c(1.0, 0.0);
    let want = stdlib::oracle::dft_oracle(3, &e1).unwrap();
    for (k, w) in want.iter().enumerate() {
        let got = state[stdlib::oracle::bit_reverse(k, 3)];
        assert!((got - w).norm() < 1e-12, "{k}: {got} vs {w}");
    }
}

#[test]
fn qif_lowerings_are_exact() {
    let p = prog(stdlib::QIF_SRC);
    let run = |name: &str| unitary_of_proc(&p, &Inputs::new(), &HashMap::new(), &with_entry(name)).unwrap();
    let cnot = run("ControlledNot");
    let perm = |m: &qpseudo::interp::Matrix, f: &dyn Fn(usize) -> usize| {
        for col in 0..m.dim {
            for row in 0..m.dim {
                let want = if row == f(col) { 1.0 } else { 0.0 };
                assert!((m.get(row, col) - c(want, 0.0)).norm() <= 1e-12, "{row},{col}");
            }
        }
    };
    perm(&cnot, &|x| if x & 2 != 0 { x ^ 1 } else { x });
    let tof = |x: usize| if x & 6 == 6 { x ^ 1 } else { x };
    perm(&run("ControlledControlledNot"), &tof);
    perm(&run("NestedToffoli"), &tof);
}

#[test]
fn reverse_undoes_hadamard() {
    let p = prog("proc m(~a: bits[1]):\n    H(~a)\n    reverse:\n        H(~a)\n");
    let (_, s) = run_to_state(&p, &Inputs::new(), &opts()).unwrap();
    assert!((s[0] - c(1.0, 0.0)).norm() < 1e-12);
}

#[test]
fn reverse_of_reverse_is_forward() {
    let src = format!(
        "{}\nproc T(~a: bits[3]):\n    reverse:\n        reverse Fourier(~a, 3)\n\nproc U(~a: bits[3]):\n    Fourier(~a, 3)\n",
        stdlib::FOURIER_SRC
    );
    let p = prog(&src);
    let t = unitary_of_proc(&p, &Inputs::new(), &HashMap::new(), &with_entry("T")).unwrap();
    let u = unitary_of_proc(&p, &Inputs::new(), &HashMap::new(), &with_entry("U")).unwrap();
    for (a, b) in t.data.iter().zip(&u.data) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn reverse_inside_qif_is_controlled_inverse() {
    let p = prog("proc T(~c, ~a):\n    qif ~c:\n        reverse:\n            Phase(0.7, ~a)\n            H(~a)\n");
    let m = unitary_of_proc(&p, &Inputs::new(), &HashMap::new(), &opts()).unwrap();
    // control 0: identity on ~a; control 1: (H·P)^† = P(-0.7)·H
    let h = 1.0 / 2f64.sqrt();
    let ph = Complex64::from_polar(1.0, -0.7);
    let want = [
        [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        [c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0), c(h, 0.0)],
        [c(0.0, 0.0), c(0.0, 0.0), ph * h, -ph * h],
    ];
    for (r, row) in want.iter().enumerate() {
        for (col, w) in row.iter().enumerate() {
            assert!((m.get(r, col) - w).norm() < 1e-12, "{r},{col}");
        }
    }
}

#[test]
fn permissive_auto_measures() {
    let src = "proc m() -> b:\n    b <- 0b0\n    ~b <- b\n    H(~b)\n    b <- 2 * ~b\n";
    let p = parse(src).unwrap();
    assert!(qpseudo::lang::has_errors(&check_program(&p)));
    let strict = qpseudo::interp::blocking_diagnostics(&p, ExecMode::Strict);
    assert!(!strict.is_empty());
    assert!(qpseudo::interp::blocking_diagnostics(&p, ExecMode::Permissive).is_empty());
    let o = RunOptions { mode: ExecMode::Permissive, ..opts() };
    let dist = measured_paths(&p, &Inputs::new(), &o).unwrap();
    assert!((dist["0"] - 0.5).abs() < 1e-12 && (dist["1"] - 0.5).abs() < 1e-12);
    let mut seen = std::collections::BTreeSet::new();
    for seed in 0..40 {
        let r = run_program(&p, &Inputs::new(), &RunOptions { seed, ..o.clone() }).unwrap();
        seen.insert(qpseudo::interp::value::as_int(&r.outputs["b"]).unwrap());
    }
    assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![0, 2]);
    let e = run_program(&p, &Inputs::new(), &opts()).unwrap_err();
    assert_eq!(e.kind, ErrorKind::Mode);
}

#[test]
fn permissive_overwrite_dissipates() {
    let p = parse("proc m() -> b:\n    b <- 0b0\n    ~b <- b\n    H(~b)\n    b <- 7\n").unwrap();
    let o = RunOptions { mode: ExecMode::Permissive, dump_state: true, ..opts() };
    let r = run_program(&p, &Inputs::new(), &o).unwrap();
    assert_eq!(r.outputs["b"], Value::Int(7));
    assert!(r.measurements.is_empty());
    assert_eq!(r.state.unwrap().len(), 1);
}

#[test]
fn dissipate_shrinks_store() {
    let p = prog("proc m() -> b:\n    b <- 0b00\n    ~b <- b\n    dissipate ~b reinit 0\n");
    let o = RunOptions { dump_state: true, ..opts() };
    let r = run_program(&p, &Inputs::new(), &o).unwrap();
    assert_eq!(r.outputs["b"], Value::Int(0));
    assert_eq!(r.state.unwrap(), vec!["|⟩ 1.0000000000000000e0 0.0000000000000000e0".to_string()]);
}

#[test]
fn failed_assertion_names_proof() {
    let p = prog("proc m():\n    b <- 0b0\n    ~b <- b\n    H(~b)\n    b <- assert_classical ~b proof \"surely zero\"\n");
    let e = run_program(&p, &Inputs::new(), &opts()).unwrap_err();
    assert_eq!(e.kind, ErrorKind::Assertion);
    assert!(e.message.contains("surely zero"), "{}", e.message);
    assert_eq!(e.line, 5);
}

#[test]
fn reversify_in_the_interpreter() {
    let p = prog(stdlib::REVERSIFY_SRC);
    for x in 0..8usize {
        let a = format!("{:03b}", x);
        let src = format!(
            "{}\nproc T(~a: bits[3]) -> a, m, s, k:\n    ~m <- reversify Maj3(~a)\n    ~s, ~k <- reversify FullAdder(~a)\n    a <- ~a\n    m <- ~m\n    s <- ~s\n    k <- ~k\n",
            stdlib::REVERSIFY_SRC
        );
        let q = prog(&src);
        let r = run_program(&q, &ins(&[("a", Input::Text(a.clone()))]), &with_entry("T")).unwrap();
        let ones = x.count_ones();
        assert_eq!(r.outputs["a"], bits(&a));
        assert_eq!(r.outputs["m"], bits(if ones >= 2 { "1" } else { "0" }));
        assert_eq!(r.outputs["s"], bits(if ones % 2 == 1 { "1" } else { "0" }));
        assert_eq!(r.outputs["k"], bits(if ones >= 2 { "1" } else { "0" }));
    }
    let dist = measured_paths(&p, &Inputs::new(), &opts()).unwrap();
    let total: f64 = dist.values().sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn runs_are_deterministic() {
    let p = prog(stdlib::COIN_SRC);
    let a: Vec<_> = (0..30)
        .map(|s| run_program(&p, &Inputs::new(), &RunOptions { seed: s, ..opts() }).unwrap())
        .collect();
    let b: Vec<_> = (0..30)
        .map(|s| run_program(&p, &Inputs::new(), &RunOptions { seed: s, ..opts() }).unwrap())
        .collect();
    assert_eq!(a, b);
    let ones = a.iter().filter(|r| r.outputs["r"] == bits("1")).count();
    assert!(ones > 0 && ones < 30);
}

#[test]
fn capacity_is_a_resource_error() {
    let p = prog("proc m():\n    a <- zeros(30)\n    ~a <- a\n");
    let e = run_program(&p, &Inputs::new(), &opts()).unwrap_err();
    assert_eq!(e.kind, ErrorKind::Resource);
}

#[test]
fn measuring_proc_has_no_unitary() {
    let p = prog(stdlib::COIN_SRC);
    let e = unitary_of_proc(&p, &Inputs::new(), &HashMap::new(), &opts()).unwrap_err();
    assert_eq!(e.kind, ErrorKind::Unsupported);
}

#[test]
fn path_bound() {
    let p = prog("proc m(~a: bits[21]) -> a:\n    for i = 0 upto 20:\n        H(~a[i])\n        a[i] <- ~a[i]\n");
    let e = measured_paths(&p, &Inputs::new(), &opts()).unwrap_err();
    assert_eq!(e.kind, ErrorKind::Resource);
}

#[test]
fn missing_and_unknown_inputs() {
    let p = prog(stdlib::FOURIER_SRC);
    assert_eq!(run_program(&p, &Inputs::new(), &opts()).unwrap_err().kind, ErrorKind::Input);
    let e = run_program(&p, &ins(&[("d", Input::Int(2)), ("zz", Input::Int(1))]), &opts()).unwrap_err();
    assert_eq!(e.kind, ErrorKind::Input);
    let e = run_program(&p, &ins(&[("d", Input::Int(2)), ("a", Input::Text("101".into()))]), &opts()).unwrap_err();
    assert_eq!(e.kind, ErrorKind::Input);
}
