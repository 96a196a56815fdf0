//! Reference computations that share no code with the simulator.

use std::f64::consts::PI;

use num_complex::Complex64;

/// `ω^{jk}/√N` summed directly, `N = 2^d`, `ω = e^{2πi/N}`.
pub fn dft_oracle(d: usize, input: &[Complex64]) -> Result<Vec<Complex64>, String> {
    let n = 1usize << d;
    if input.len() != n {
        return Err(format!("expected {n} amplitudes, got {}", input.len()));
    }
    let norm: f64 = input.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(format!("input is not normalized (norm² = {norm})"));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok((0..n)
        .map(|j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, x) in input.iter().enumerate() {
                acc += root(j * k % n, n) * x;
            }
            acc * scale
        })
        .collect())
}

/// `e^{2πi·m/n}`.
fn root(m: usize, n: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64)
}

/// The DFT matrix, row-major.
pub fn dft_matrix(d: usize) -> Vec<Complex64> {
    let n = 1usize << d;
    let scale = 1.0 / (n as f64).sqrt();
    let mut m = Vec::with_capacity(n * n);
    for j in 0..n {
        for k in 0..n {
            m.push(root(j * k % n, n) * scale);
        }
    }
    m
}

/// `x` with its lowest `d` bits in reverse order.
pub fn bit_reverse(x: usize, d: usize) -> usize {
    (0..d).fold(0, |acc, k| (acc << 1) | ((x >> k) & 1))
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn small_cases() {
        let h = 1.0 / 2f64.sqrt();
        let out = dft_oracle(1, &[c(1.0), c(0.0)]).unwrap();
        assert!((out[0] - c(h)).norm() < 1e-15 && (out[1] - c(h)).norm() < 1e-15);
        let out = dft_oracle(2, &[c(1.0), c(0.0), c(0.0), c(0.0)]).unwrap();
        assert!(out.iter().all(|a| (a - c(0.5)).norm() < 1e-15));
        assert!(dft_oracle(1, &[c(1.0), c(1.0)]).is_err());
        assert!(dft_oracle(2, &[c(1.0), c(0.0)]).is_err());
    }

    #[test]
    fn unitary() {
        for d in 0..=6 {
            let n = 1 << d;
            let m = dft_matrix(d);
            for r in 0..n {
                for s in 0..n {
                    let dot: Complex64 = (0..n).map(|k| m[k * n + r].conj() * m[k * n + s]).sum();
                    let want = if r == s { 1.0 } else { 0.0 };
                    assert!((dot - c(want)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn reversal() {
        assert_eq!(bit_reverse(0b001, 3), 0b100);
        assert_eq!(bit_reverse(0b110, 3), 0b011);
        assert_eq!(bit_reverse(5, 1), 1);
    }
}
