//! Gate library: named unitaries and the controlled/inverse constructions.
//!
//! Matrices are dense and row-major. For a gate acting on targets
//! `[t0, t1, ..]`, `t0` is the most significant bit of the row/column index,
//! so controls listed first are the high bits.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// Maximum entrywise deviation of `U·U†` from the identity accepted at
/// construction.
pub const UNITARITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    #[error("gate `{name}` is not unitary (max |U·U† - I| = {deviation:e})")]
    NotUnitary { name: String, deviation: f64 },
    #[error("gate `{name}`: matrix has {len} entries, expected {expected}")]
    BadDimension {
        name: String,
        len: usize,
        expected: usize,
    },
    #[error("non-finite gate parameter {0}")]
    NonFinite(f64),
    #[error("gate arity must be at least 1")]
    ZeroArity,
}

/// A named unitary acting on `arity` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSpec {
    name: String,
    arity: usize,
    matrix: Vec<Complex64>,
}

impl GateSpec {
    /// Builds a gate, validating the matrix dimension and unitarity.
    pub fn new(
        name: impl Into<String>,
        arity: usize,
        matrix: Vec<Complex64>,
    ) -> Result<Self, GateError> {
        let name = name.into();
        if arity == 0 {
            return Err(GateError::ZeroArity);
        }
        let dim = 1usize << arity;
        if matrix.len() != dim * dim {
            return Err(GateError::BadDimension {
                name,
                len: matrix.len(),
                expected: dim * dim,
            });
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(GateError::NotUnitary {
                name,
                deviation: f64::INFINITY,
            });
        }
        let deviation = unitarity_deviation(&matrix, dim);
        if deviation > UNITARITY_TOL {
            return Err(GateError::NotUnitary { name, deviation });
        }
        Ok(GateSpec {
            name,
            arity,
            matrix,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        1 << self.arity
    }

    /// Row-major matrix entries.
    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[row * self.dim() + col]
    }

    /// Largest entrywise distance to another gate of the same arity.
    pub fn max_distance(&self, other: &GateSpec) -> f64 {
        assert_eq!(self.arity, other.arity, "arity mismatch");
        self.matrix
            .iter()
            .zip(&other.matrix)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for GateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

fn unitarity_deviation(m: &[Complex64], dim: usize) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..dim {
        for c in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..dim {
                acc += m[r * dim + k] * m[c * dim + k].conj();
            }
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((acc - target).norm());
        }
    }
    worst
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Hadamard with the 1/√2 normalization.
pub fn hadamard() -> GateSpec {
    let h = FRAC_1_SQRT_2;
    GateSpec::new("H", 1, vec![c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
        .expect("hadamard is unitary")
}

/// Bit flip.
pub fn pauli_x() -> GateSpec {
    GateSpec::new(
        "X",
        1,
        vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
    )
    .expect("X is unitary")
}

/// Phase shift of |1⟩ by `phi` radians: diag(1, e^{iφ}).
pub fn phase(phi: f64) -> Result<GateSpec, GateError> {
    if !phi.is_finite() {
        return Err(GateError::NonFinite(phi));
    }
    GateSpec::new(
        format!("Phase({phi})"),
        1,
        vec![
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            Complex64::from_polar(1.0, phi),
        ],
    )
}

/// Controlled-not, control first.
pub fn cnot() -> GateSpec {
    let mut g = controlled(&pauli_x(), 1);
    g.name = "CNot".into();
    g
}

/// Toffoli, two controls first.
pub fn toffoli() -> GateSpec {
    let mut g = controlled(&pauli_x(), 2);
    g.name = "Toffoli".into();
    g
}

/// Conditions `g` on `k` control qubits, which precede the targets.
///
/// The result is the identity except for the bottom-right block, which is
/// `g`'s matrix and is reached only when all controls read 1.
pub fn controlled(g: &GateSpec, k: usize) -> GateSpec {
    assert!(k >= 1, "controlled() needs at least one control");
    let inner = g.dim();
    let dim = inner << k;
    let offset = dim - inner;
    let mut m = vec![c(0.0, 0.0); dim * dim];
    for i in 0..offset {
        m[i * dim + i] = c(1.0, 0.0);
    }
    for r in 0..inner {
        for col in 0..inner {
            m[(offset + r) * dim + offset + col] = g.entry(r, col);
        }
    }
    let name = if k == 1 {
        format!("C({})", g.name)
    } else {
        format!("C{k}({})", g.name)
    };
    GateSpec {
        name,
        arity: g.arity + k,
        matrix: m,
    }
}

/// Conjugate transpose.
pub fn inverse(g: &GateSpec) -> GateSpec {
    let dim = g.dim();
    let mut m = vec![c(0.0, 0.0); dim * dim];
    for r in 0..dim {
        for col in 0..dim {
            m[col * dim + r] = g.entry(r, col).conj();
        }
    }
    let name = match g.name.strip_prefix("inv(").and_then(|s| s.strip_suffix(')')) {
        Some(inner) => inner.to_string(),
        None => format!("inv({})", g.name),
    };
    GateSpec {
        name,
        arity: g.arity,
        matrix: m,
    }
}

/// Looks up a builtin gate by its source-level name. `Phase` takes one real
/// parameter; the others take none.
pub fn builtin(name: &str, params: &[f64]) -> Option<Result<GateSpec, GateError>> {
    let g = match (name, params) {
        ("H", []) => Ok(hadamard()),
        ("X", []) => Ok(pauli_x()),
        ("CNot", []) => Ok(cnot()),
        ("Toffoli", []) => Ok(toffoli()),
        ("Phase", [phi]) => phase(*phi),
        _ => return None,
    };
    Some(g)
}

/// Source-level builtin gates: (name, number of real parameters, qubit arity).
pub const BUILTIN_GATES: &[(&str, usize, usize)] = &[
    ("H", 0, 1),
    ("X", 0, 1),
    ("Phase", 1, 1),
    ("CNot", 0, 2),
    ("Toffoli", 0, 3),
];

pub fn builtin_signature(name: &str) -> Option<(usize, usize)> {
    BUILTIN_GATES
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|&(_, p, a)| (p, a))
}
