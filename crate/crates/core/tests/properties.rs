use std::collections::HashMap;

use num_complex::Complex64;
use proptest::prelude::*;
use qpseudo::gates::{self, GateSpec};
use qpseudo::interp::{
    reversify_compile, run_program, run_to_state, unitary_of_proc, ExecMode, Input, Inputs, RevArg,
    RunOptions, Wire,
};
use qpseudo::lang::{check_program, has_errors, parse, pretty_print};
use qpseudo::qstate::{QuantumStore, QubitId};
use qpseudo::stdlib::{self, oracle::fidelity};

type C = Complex64;

// ---- test-side dense simulator ----

/// Applies `g` to `targets` of an `n`-qubit vector; qubit 0 is the most
/// significant index bit, and so is the first target.
fn apply(state: &mut [C], n: usize, g: &GateSpec, targets: &[usize]) {
    let k = targets.len();
    let shift = |q: usize| n - 1 - q;
    let sub = |i: usize| targets.iter().fold(0, |acc, &q| (acc << 1) | ((i >> shift(q)) & 1));
    let with = |i: usize, s: usize| {
        targets.iter().enumerate().fold(i, |acc, (j, &q)| {
            let bit = (s >> (k - 1 - j)) & 1;
            (acc & !(1 << shift(q))) | (bit << shift(q))
        })
    };
    let old = state.to_vec();
    for (i, out) in state.iter_mut().enumerate() {
        let r = sub(i);
        *out = (0..1usize << k).map(|s| g.entry(r, s) * old[with(i, s)]).sum();
    }
}

#[derive(Debug, Clone)]
enum Op {
    H(usize),
    X(usize),
    Phase(f64, usize),
    CNot(usize, usize),
    Toffoli(usize, usize, usize),
}

impl Op {
    fn gate(&self) -> GateSpec {
        match self {
            Op::H(_) => gates::hadamard(),
            Op::X(_) => gates::pauli_x(),
            Op::Phase(t, _) => gates::phase(*t).unwrap(),
            Op::CNot(..) => gates::cnot(),
            Op::Toffoli(..) => gates::toffoli(),
        }
    }

    fn targets(&self) -> Vec<usize> {
        match *self {
            Op::H(a) | Op::X(a) | Op::Phase(_, a) => vec![a],
            Op::CNot(a, b) => vec![a, b],
            Op::Toffoli(a, b, c) => vec![a, b, c],
        }
    }

    /// The op as a statement on register `~a` of width `n`; qubit 0 is
    /// the register's top bit.
    fn source(&self, n: usize) -> String {
        let r = |q: usize| format!("~a[{}]", n - 1 - q);
        match *self {
            Op::H(a) => format!("H({})", r(a)),
            Op::X(a) => format!("X({})", r(a)),
            Op::Phase(t, a) => format!("Phase({t:?}, {})", r(a)),
            Op::CNot(a, b) => format!("CNot({}, {})", r(a), r(b)),
            Op::Toffoli(a, b, c) => format!("Toffoli({}, {}, {})", r(a), r(b), r(c)),
        }
    }
}

fn op(n: usize) -> impl Strategy<Value = Op> {
    let q = 0..n;
    let perm = Just((0..n).collect::<Vec<usize>>()).prop_shuffle();
    (0..5u8, perm, 0.0..std::f64::consts::TAU, q)
        .prop_map(move |(kind, perm, t, a)| match kind {
            0 => Op::H(a),
            1 => Op::X(a),
            2 => Op::Phase(t, a),
            3 if n >= 2 => Op::CNot(perm[0], perm[1]),
            4 if n >= 3 => Op::Toffoli(perm[0], perm[1], perm[2]),
            _ => Op::H(a),
        })
}

fn block(max_qubits: usize, max_ops: usize) -> impl Strategy<Value = (usize, Vec<Op>)> {
    (1..=max_qubits).prop_flat_map(move |n| (Just(n), prop::collection::vec(op(n), 1..=max_ops)))
}

fn state(n: usize) -> impl Strategy<Value = Vec<C>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1usize << n)
        .prop_filter("nonzero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3)
        .prop_map(|v| {
            let norm = v.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
            v.into_iter().map(|(a, b)| C::new(a / norm, b / norm)).collect()
        })
}

fn basis(n: usize, x: usize) -> Vec<C> {
    let mut v = vec![C::new(0.0, 0.0); 1 << n];
    v[x] = C::new(1.0, 0.0);
    v
}

fn max_diff(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn body(ops: &[Op], n: usize, indent: &str) -> String {
    ops.iter().map(|o| format!("{indent}{}\n", o.source(n))).collect()
}

fn entry(name: &str) -> RunOptions {
    RunOptions {
        entry: Some(name.into()),
        ..RunOptions::default()
    }
}

// ---- qstate ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn store_matches_dense_oracle((n, ops) in block(4, 10)) {
        let mut store = QuantumStore::new(8, 0);
        let ids: Vec<QubitId> = (0..n).map(|_| store.allocate_bits(&[false]).unwrap()[0]).collect();
        let mut want = basis(n, 0);
        for o in &ops {
            let t = o.targets();
            let qs: Vec<QubitId> = t.iter().map(|&q| ids[q]).collect();
            store.apply_unitary(&o.gate(), &qs).unwrap();
            apply(&mut want, n, &o.gate(), &t);
            store.check_invariants().unwrap();
            let norm: f64 = store.groups().map(|g| g.norm_sqr()).product();
            prop_assert!((norm - 1.0).abs() < 1e-9);
        }
        let got = store.joint_state(&ids).unwrap();
        prop_assert!(max_diff(&got, &want) < 1e-10);
    }

    #[test]
    fn gate_then_inverse_is_identity(
        (n, ops) in block(4, 6),
        which in 0..5usize,
        t in 0.0..std::f64::consts::TAU,
        pick in any::<u64>(),
    ) {
        let g = [gates::hadamard(), gates::pauli_x(), gates::phase(t).unwrap(), gates::cnot(), gates::toffoli()][which].clone();
        prop_assume!(g.arity() <= n);
        let mut store = QuantumStore::new(8, 1);
        let ids = store.allocate_bits(&vec![false; n]).unwrap();
        for o in &ops {
            let qs: Vec<QubitId> = o.targets().iter().map(|&q| ids[q]).collect();
            store.apply_unitary(&o.gate(), &qs).unwrap();
        }
        let before = store.joint_state(&ids).unwrap();
        let mut order = ids.clone();
        let mut r = pick;
        for i in (1..n).rev() {
            order.swap(i, (r % (i as u64 + 1)) as usize);
            r /= i as u64 + 1;
        }
        let targets = &order[..g.arity()];
        store.apply_unitary(&g, targets).unwrap();
        store.apply_unitary(&gates::inverse(&g), targets).unwrap();
        prop_assert!(max_diff(&store.joint_state(&ids).unwrap(), &before) < 1e-10);
    }

    #[test]
    fn merge_across_groups_matches_tensor(a in state(2), b in state(2), i in 0..2usize, j in 0..2usize, which in 0..2usize) {
        let g = if which == 0 { gates::cnot() } else { gates::controlled(&gates::phase(0.9).unwrap(), 1) };
        let mut split = QuantumStore::new(8, 0);
        let qa = split.prepare(&a).unwrap();
        let qb = split.prepare(&b).unwrap();
        split.apply_unitary(&g, &[qa[i], qb[j]]).unwrap();
        let all: Vec<QubitId> = qa.iter().chain(&qb).copied().collect();
        let got = split.joint_state(&all).unwrap();

        let mut tensor: Vec<C> = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
        let mut joint = QuantumStore::new(8, 0);
        let q = joint.prepare(&tensor).unwrap();
        joint.apply_unitary(&g, &[q[i], q[2 + j]]).unwrap();
        apply(&mut tensor, 4, &g, &[i, 2 + j]);
        prop_assert!(max_diff(&got, &joint.joint_state(&q).unwrap()) < 1e-12);
        prop_assert!(max_diff(&got, &tensor) < 1e-12);
    }
}

fn prepared(n: usize, ops: &[Op], seed: u64) -> (QuantumStore, Vec<QubitId>) {
    let mut store = QuantumStore::new(8, seed);
    let ids = store.allocate_bits(&vec![false; n]).unwrap();
    for o in ops {
        let qs: Vec<QubitId> = o.targets().iter().map(|&q| ids[q]).collect();
        store.apply_unitary(&o.gate(), &qs).unwrap();
    }
    (store, ids)
}

fn subset(ids: &[QubitId], mask: usize) -> Vec<QubitId> {
    ids.iter().enumerate().filter(|(q, _)| mask >> q & 1 == 1).map(|(_, id)| *id).collect()
}

// Many 3-sigma comparisons per case: fixed cases keep this reproducible.
proptest! {
    #![proptest_config(ProptestConfig {
        cases: 6,
        rng_seed: proptest::test_runner::RngSeed::Fixed(20),
        ..ProptestConfig::default()
    })]

    #[test]
    fn measurement_marginals((n, ops) in block(4, 10), mask in 1..16usize) {
        let (store, ids) = prepared(n, &ops, 0);
        let sel = subset(&ids, mask);
        prop_assume!(!sel.is_empty());
        let amps = store.joint_state(&ids).unwrap();
        let trials = 100_000u64;
        let mut counts: HashMap<String, u64> = HashMap::new();
        for seed in 0..trials {
            let mut s = QuantumStore::new(8, seed);
            let q = s.prepare(&amps).unwrap();
            let rec = s.measure(&subset(&q, mask)).unwrap();
            *counts.entry(rec.outcome).or_default() += 1;
        }
        for (outcome, p) in store.outcome_distribution(&sel).unwrap() {
            let f = *counts.get(&outcome).unwrap_or(&0) as f64 / trials as f64;
            let sigma = (p * (1.0 - p) / trials as f64).max(0.0).sqrt();
            prop_assert!((f - p).abs() <= 3.0 * sigma + 1e-9, "{}: {} vs {}", outcome, f, p);
        }
    }
}

proptest! {
    #[test]
    fn record_probability_is_prior_probability((n, ops) in block(4, 10), mask in 1..16usize, seed in any::<u64>()) {
        let (mut store, ids) = prepared(n, &ops, seed);
        let sel = subset(&ids, mask);
        prop_assume!(!sel.is_empty());
        let before = store.clone();
        let rec = store.measure(&sel).unwrap();
        let p = before.probability_of(&sel, &rec.outcome).unwrap();
        prop_assert!((rec.probability - p).abs() <= 1e-12);
        store.check_invariants().unwrap();
    }
}

// ---- gates ----

proptest! {
    #[test]
    fn control_distributes_over_inverse(which in 0..5usize, t in -10.0..10.0f64, k in 1..3usize) {
        let g = [gates::hadamard(), gates::pauli_x(), gates::phase(t).unwrap(), gates::cnot(), gates::toffoli()][which].clone();
        let a = gates::controlled(&gates::inverse(&g), k);
        let b = gates::inverse(&gates::controlled(&g, k));
        prop_assert!(a.max_distance(&b) < 1e-12);
    }

    #[test]
    fn controls_compose(which in 0..4usize, t in -10.0..10.0f64, j in 1..3usize, k in 1..3usize) {
        let g = [gates::hadamard(), gates::pauli_x(), gates::phase(t).unwrap(), gates::cnot()][which].clone();
        let a = gates::controlled(&g, j + k);
        let b = gates::controlled(&gates::controlled(&g, k), j);
        prop_assert!(a.max_distance(&b) < 1e-12);
    }
}

// ---- lang ----

fn token_soup() -> impl Strategy<Value = String> {
    let toks = prop::sample::select(vec![
        "proc", "main", "(", ")", ":", "~a", "a", "b", "<-", "qif", "reverse", "reversify", "for",
        "i", "=", "0", "upto", "downto", "1", "\n", "    ", "\n    ", "H", "X", "CNot", "[", "]",
        "+", "-", "*", "^", "and", "or", "not", "xor", "0b01", "\"s\"", "assert_classical", "proof",
        "dissipate", "reinit", "->", ",", "bits", "int", "real", "#c", "2.5e3", "pi", "\t", "\u{3b1}",
    ]);
    prop::collection::vec(toks, 0..60).prop_map(|v| v.concat())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn parser_is_total_on_bytes(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let s = String::from_utf8_lossy(&bytes);
        if let Ok(p) = parse(&s) {
            let _ = check_program(&p);
        }
    }

    #[test]
    fn parser_is_total_on_tokens(s in token_soup()) {
        if let Ok(p) = parse(&s) {
            let _ = check_program(&p);
            let again = parse(&pretty_print(&p)).expect("printed program parses");
            prop_assert_eq!(again, p);
        }
    }
}

#[test]
fn corpus_round_trips() {
    for (name, src) in stdlib::EXAMPLES {
        let p = parse(src).unwrap();
        let printed = pretty_print(&p);
        assert_eq!(parse(&printed).unwrap(), p, "{name}");
        assert_eq!(pretty_print(&parse(&printed).unwrap()), printed, "{name}");
    }
}

// ---- interp ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reversal_round_trip(
        (n, ops, states) in block(4, 10).prop_flat_map(|(n, ops)| {
            (Just(n), Just(ops), prop::collection::vec(state(n), 50))
        })
    ) {
        let src = format!(
            "proc T(~a: bits[{n}]):\n{}    reverse:\n{}",
            body(&ops, n, "    "),
            body(&ops, n, "        ")
        );
        let p = parse(&src).unwrap();
        prop_assert!(!has_errors(&check_program(&p)));
        for psi in states {
            let ins: Inputs = [("a".to_string(), Input::State(psi.clone()))].into();
            let (_, out) = run_to_state(&p, &ins, &RunOptions::default()).unwrap();
            prop_assert!(fidelity(&psi, &out) >= 1.0 - 1e-10);
        }
    }

    #[test]
    fn qif_is_controlled_body((n, ops) in block(3, 8), nested in any::<bool>()) {
        let src = if nested {
            format!(
                "proc B(~a: bits[{n}]):\n{}\nproc Q(~c: bits[2], ~a: bits[{n}]):\n    qif ~c[1]:\n        qif ~c[0]:\n{}",
                body(&ops, n, "    "),
                body(&ops, n, "            ")
            )
        } else {
            format!(
                "proc B(~a: bits[{n}]):\n{}\nproc Q(~c, ~a: bits[{n}]):\n    qif ~c:\n{}",
                body(&ops, n, "    "),
                body(&ops, n, "        ")
            )
        };
        let p = parse(&src).unwrap();
        prop_assert!(!has_errors(&check_program(&p)));
        let none = HashMap::new();
        let b = unitary_of_proc(&p, &Inputs::new(), &none, &entry("B")).unwrap();
        let q = unitary_of_proc(&p, &Inputs::new(), &none, &entry("Q")).unwrap();
        let g = GateSpec::new("B", n, b.data).unwrap();
        let want = gates::controlled(&g, if nested { 2 } else { 1 });
        prop_assert!(max_diff(&q.data, want.matrix()) < 1e-10);
    }
}

#[derive(Debug, Clone)]
enum BExp {
    Var(usize),
    Const(bool),
    Not(Box<BExp>),
    And(Box<BExp>, Box<BExp>),
    Or(Box<BExp>, Box<BExp>),
    Xor(Box<BExp>, Box<BExp>),
}

impl BExp {
    fn eval(&self, x: usize) -> bool {
        match self {
            BExp::Var(k) => x >> k & 1 == 1,
            BExp::Const(b) => *b,
            BExp::Not(a) => !a.eval(x),
            BExp::And(a, b) => a.eval(x) && b.eval(x),
            BExp::Or(a, b) => a.eval(x) || b.eval(x),
            BExp::Xor(a, b) => a.eval(x) ^ b.eval(x),
        }
    }

    fn source(&self) -> String {
        match self {
            BExp::Var(k) => format!("a[{k}]"),
            BExp::Const(b) => (*b as u8).to_string(),
            BExp::Not(a) => format!("not ({})", a.source()),
            BExp::And(a, b) => format!("({}) and ({})", a.source(), b.source()),
            BExp::Or(a, b) => format!("({}) or ({})", a.source(), b.source()),
            BExp::Xor(a, b) => format!("({}) xor ({})", a.source(), b.source()),
        }
    }
}

fn bexp(n: usize) -> impl Strategy<Value = BExp> {
    let leaf = prop_oneof![4 => (0..n).prop_map(BExp::Var), 1 => any::<bool>().prop_map(BExp::Const)];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| BExp::Not(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| BExp::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| BExp::Or(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| BExp::Xor(Box::new(a), Box::new(b))),
        ]
    })
}

/// Runs a circuit of permutation gates on a basis state of its wires.
fn simulate_basis(gates: &[(GateSpec, Vec<Wire>)], n_in: usize, n_out: usize, wires: &mut [bool]) {
    let pos = |w: &Wire| match *w {
        Wire::Input(k) => k,
        Wire::Output(k) => n_in + k,
        Wire::Ancilla(k) => n_in + n_out + k,
    };
    for (g, ws) in gates {
        let col = ws.iter().fold(0, |acc, w| (acc << 1) | wires[pos(w)] as usize);
        let row = (0..g.dim()).find(|&r| g.entry(r, col).norm() > 0.5).unwrap();
        assert!((g.entry(row, col).norm() - 1.0).abs() < 1e-12, "not a permutation");
        for (j, w) in ws.iter().enumerate() {
            wires[pos(w)] = row >> (ws.len() - 1 - j) & 1 == 1;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reversify_matches_evaluation(f in (1..=4usize).prop_flat_map(|n| (Just(n), bexp(n)))) {
        let (n, f) = f;
        let src = format!("proc F(a: bits[{n}]) -> r:\n    r <- {}\n", f.source());
        let p = parse(&src).unwrap();
        let c = reversify_compile(&p.procs[0], &[RevArg::Quantum(n)]).unwrap();
        prop_assert_eq!(c.inputs, n);
        prop_assert_eq!(&c.outputs, &vec![1]);
        for x in 0..1usize << n {
            let mut wires = vec![false; n + 1 + c.ancillas];
            for (k, w) in wires.iter_mut().enumerate().take(n) {
                *w = x >> k & 1 == 1;
            }
            simulate_basis(&c.gates, n, 1, &mut wires);
            prop_assert!(wires[..n].iter().enumerate().all(|(k, b)| *b == (x >> k & 1 == 1)));
            prop_assert_eq!(wires[n], f.eval(x), "{} at {:b}", f.source(), x);
            prop_assert!(wires[n + 1..].iter().all(|b| !b));
        }
    }
}

fn measuring_program(n: usize, ops: &[Op], mask: usize) -> String {
    let mut s = format!("proc T(~a: bits[{n}]) -> m:\n{}    m <- zeros({n})\n", body(ops, n, "    "));
    for q in 0..n {
        if mask >> q & 1 == 1 {
            s += &format!("    m[{q}] <- ~a[{q}]\n");
        }
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn runs_are_deterministic((n, ops) in block(4, 10), mask in 0..16usize, seed in any::<u64>()) {
        let p = parse(&measuring_program(n, &ops, mask)).unwrap();
        prop_assert!(!has_errors(&check_program(&p)));
        let o = RunOptions { seed, dump_state: true, trace: true, ..RunOptions::default() };
        let a = run_program(&p, &Inputs::new(), &o).unwrap();
        let b = run_program(&p, &Inputs::new(), &o).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn permissive_agrees_with_strict((n, ops) in block(4, 10), mask in 0..16usize, seed in any::<u64>()) {
        let p = parse(&measuring_program(n, &ops, mask)).unwrap();
        prop_assert!(!has_errors(&check_program(&p)));
        let strict = RunOptions { seed, dump_state: true, ..RunOptions::default() };
        let loose = RunOptions { mode: ExecMode::Permissive, ..strict.clone() };
        prop_assert_eq!(
            run_program(&p, &Inputs::new(), &strict).unwrap(),
            run_program(&p, &Inputs::new(), &loose).unwrap()
        );
    }
}
