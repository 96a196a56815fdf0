//! Shipped `.qps` programs, generators for the Fourier family and
//! reference oracles for testing them.

pub mod oracle;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write;

use num_complex::Complex64;

use crate::interp::{measured_paths, Inputs, RunOptions, RuntimeError};
use crate::lang::Program;

pub const FOURIER_SRC: &str = include_str!("../../../../programs/fourier.qps");
pub const MEASURED_FOURIER_SRC: &str = include_str!("../../../../programs/measured_fourier.qps");
pub const IS_CLASSICAL_SRC: &str = include_str!("../../../../programs/is_classical_example.qps");
pub const REVERSING_SRC: &str = include_str!("../../../../programs/reversing_example.qps");
pub const QINTRO_SRC: &str = include_str!("../../../../programs/qintro_examples.qps");
pub const QIF_SRC: &str = include_str!("../../../../programs/qif_examples.qps");
pub const COIN_SRC: &str = include_str!("../../../../programs/coin.qps");
pub const REVERSIFY_SRC: &str = include_str!("../../../../programs/reversify_corpus.qps");

/// Every shipped example as `(file name, source)`.
pub const EXAMPLES: &[(&str, &str)] = &[
    ("fourier.qps", FOURIER_SRC),
    ("measured_fourier.qps", MEASURED_FOURIER_SRC),
    ("is_classical_example.qps", IS_CLASSICAL_SRC),
    ("reversing_example.qps", REVERSING_SRC),
    ("qintro_examples.qps", QINTRO_SRC),
    ("qif_examples.qps", QIF_SRC),
    ("coin.qps", COIN_SRC),
    ("reversify_corpus.qps", REVERSIFY_SRC),
];

/// Functions in the reversify corpus: name, input width, output count.
pub const REVERSIFY_FUNCTIONS: &[(&str, usize, usize)] = &[
    ("Not1", 1, 1),
    ("Xor2", 2, 1),
    ("And2", 2, 1),
    ("Or2", 2, 1),
    ("Nand2", 2, 1),
    ("Nor2", 2, 1),
    ("Xnor2", 2, 1),
    ("And3", 3, 1),
    ("Or3", 3, 1),
    ("Maj3", 3, 1),
    ("Parity3", 3, 1),
    ("Mux3", 3, 1),
    ("FullAdder", 3, 2),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierParams {
    pub d: usize,
    /// `e^{2πi/2^d}`.
    pub omega: Complex64,
    /// Controlled phases with a smaller angle are dropped.
    pub precision: Option<f64>,
}

impl FourierParams {
    pub fn new(d: usize, precision: Option<f64>) -> Result<Self, String> {
        if d == 0 || d > 62 {
            return Err(format!("d = {d} out of range"));
        }
        if let Some(p) = precision {
            if !p.is_finite() || p < 0.0 {
                return Err(format!("precision {p} must be a finite non-negative number"));
            }
        }
        let n = (1u64 << d) as f64;
        Ok(FourierParams {
            d,
            omega: Complex64::from_polar(1.0, 2.0 * PI / n),
            precision,
        })
    }
}

fn wrap(src: &str, main: &str) -> String {
    let mut s = src.to_string();
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s.push('\n');
    s.push_str(main);
    s
}

/// `Fourier` plus `main(~a: bits[d])` calling it.
pub fn fourier_program(d: usize) -> String {
    wrap(FOURIER_SRC, &format!("proc main(~a: bits[{d}]):\n    Fourier(~a, {d})\n"))
}

/// Largest `m` with `π/2^m >= precision`, or -1 if even `π` is below it.
fn max_kept_distance(precision: f64) -> i64 {
    let mut m = -1;
    while m < 64 && PI / 2f64.powi((m + 1) as i32) >= precision {
        m += 1;
    }
    m
}

/// Fourier with every controlled phase of angle below `precision`
/// omitted. The phase between bits `j > i` has angle `π/2^(j-i)`, so only
/// pairs up to a fixed distance remain.
pub fn approx_fourier_program(d: usize, precision: f64) -> String {
    let bound = if precision <= 0.0 {
        "d - 1".to_string()
    } else {
        match max_kept_distance(precision) {
            -1 => "i - 1".to_string(),
            k => format!("min(d - 1, i + {k})"),
        }
    };
    let mut s = String::new();
    let _ = writeln!(s, "proc ApproxFourier(~a: bits[d], d: int):");
    let _ = writeln!(s, "    for i = d - 1 downto 0:");
    let _ = writeln!(s, "        for j = {bound} downto i + 1:");
    let _ = writeln!(s, "            qif ~a[j]: Phase(pi / 2 ^ (j - i), ~a[i])");
    let _ = writeln!(s, "        H(~a[i])");
    let _ = writeln!(s);
    let _ = writeln!(s, "proc main(~a: bits[{d}]):");
    let _ = writeln!(s, "    ApproxFourier(~a, {d})");
    s
}

/// `MeasuredFourier` plus `main(~a: bits[d]) -> a` calling it.
pub fn measured_fourier_program(d: usize) -> String {
    wrap(
        MEASURED_FOURIER_SRC,
        &format!("proc main(~a: bits[{d}]) -> a:\n    a <- MeasuredFourier(~a, {d})\n"),
    )
}

/// Exact outcome distribution of a program, following both branches of
/// every measurement and summing Born weights. Keys concatenate the
/// recorded outcomes in order.
pub fn measured_paths_distribution(
    program: &Program,
    inputs: &Inputs,
    opts: &RunOptions,
) -> Result<BTreeMap<String, f64>, RuntimeError> {
    measured_paths(program, inputs, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{check_program, parse};

    #[test]
    fn examples_check_clean() {
        for (name, src) in EXAMPLES {
            let p = parse(src).unwrap_or_else(|d| panic!("{name}: {d}"));
            let d = check_program(&p);
            assert!(d.is_empty(), "{name}: {:?}", d.iter().map(|d| d.to_string()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn generated_programs_check_clean() {
        for d in 1..=6 {
            for src in [
                fourier_program(d),
                measured_fourier_program(d),
                approx_fourier_program(d, 0.0),
                approx_fourier_program(d, 0.3),
                approx_fourier_program(d, 4.0),
            ] {
                let p = parse(&src).unwrap_or_else(|e| panic!("{e}\n{src}"));
                assert!(check_program(&p).is_empty(), "{src}");
            }
        }
    }

    #[test]
    fn kept_distance() {
        assert_eq!(max_kept_distance(PI), 0);
        assert_eq!(max_kept_distance(PI + 0.1), -1);
        assert_eq!(max_kept_distance(PI / 4.0), 2);
        assert_eq!(max_kept_distance(PI / 4.0 + 1e-9), 1);
    }

    #[test]
    fn params() {
        let f = FourierParams::new(3, None).unwrap();
        assert!((f.omega.norm() - 1.0).abs() < 1e-12);
        assert!((f.omega.powu(8) - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        assert!(FourierParams::new(0, None).is_err());
        assert!(FourierParams::new(2, Some(-1.0)).is_err());
    }
}
