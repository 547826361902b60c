//! Dense state vectors, Pauli rotations and the exact imaginary-time oracle.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{PauliString, PauliSum, DEFAULT_ORACLE_CAP};

/// Rotations applied between two renormalisations.
const RENORM_INTERVAL: usize = 1000;
const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
    rotations: usize,
}

impl PartialEq for StateVector {
    fn eq(&self, other: &Self) -> bool {
        self.n_qubits == other.n_qubits && self.amps == other.amps
    }
}

impl StateVector {
    /// Computational basis state; character `q` of `occupation` is qubit `q`.
    pub fn from_bitstring(occupation: &str, n_qubits: usize) -> Result<Self> {
        if occupation.chars().count() != n_qubits {
            return Err(Error::Dimension {
                expected: n_qubits,
                found: occupation.chars().count(),
            });
        }
        if n_qubits == 0 || n_qubits > 30 {
            return Err(Error::QubitCount(n_qubits));
        }
        let mut index = 0usize;
        for (q, ch) in occupation.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => index |= 1 << q,
                _ => {
                    return Err(Error::Config(format!(
                        "occupation string may only contain 0/1, found `{ch}`"
                    )))
                }
            }
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amps,
            rotations: 0,
        })
    }

    /// Normalised copy of arbitrary amplitudes.
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1usize << n_qubits {
            return Err(Error::Dimension {
                expected: n_qubits,
                found: amps.len().trailing_zeros() as usize,
            });
        }
        let mut s = Self {
            n_qubits,
            amps,
            rotations: 0,
        };
        let norm = s.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Config("state has zero or non-finite norm".into()));
        }
        s.scale(1.0 / norm);
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn scale(&mut self, f: f64) {
        self.amps.iter_mut().for_each(|a| *a *= f);
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.n_qubits {
            Err(Error::Dimension {
                expected: self.n_qubits,
                found: n,
            })
        } else {
            Ok(())
        }
    }

    /// In-place `|ψ⟩ ← e^{iθP}|ψ⟩ = cos θ |ψ⟩ + i sin θ P|ψ⟩`.
    pub fn apply_pauli_rotation(&mut self, p: &PauliString, theta: f64) -> Result<()> {
        self.check(p.n_qubits())?;
        if !p.is_hermitian() {
            return Err(Error::NonHermitian(p.phase_exp()));
        }
        let (s, c) = theta.sin_cos();
        let is = Complex64::new(0.0, s);
        let x = p.x_mask() as usize;
        if x == 0 {
            for (k, a) in self.amps.iter_mut().enumerate() {
                *a *= c + is * p.action_phase(k);
            }
        } else {
            // visit each (k, k^x) pair once: k has a zero at the top bit of x
            let top = 1usize << (63 - (x as u64).leading_zeros());
            for k in 0..self.amps.len() {
                if k & top != 0 {
                    continue;
                }
                let j = k ^ x;
                let (ak, aj) = (self.amps[k], self.amps[j]);
                self.amps[j] = c * aj + is * p.action_phase(k) * ak;
                self.amps[k] = c * ak + is * p.action_phase(j) * aj;
            }
        }
        self.rotations += 1;
        if self.rotations.is_multiple_of(RENORM_INTERVAL) {
            let n = self.norm();
            if (n - 1.0).abs() > NORM_TOL {
                self.scale(1.0 / n);
            }
        }
        Ok(())
    }

    /// `P|ψ⟩` as raw amplitudes.
    pub fn apply_pauli(&self, p: &PauliString) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        let x = p.x_mask() as usize;
        for (k, a) in self.amps.iter().enumerate() {
            out[k ^ x] = p.action_phase(k) * a;
        }
        out
    }

    /// `⟨ψ|P|ψ⟩`, including the stored phase of `p`.
    pub fn expectation(&self, p: &PauliString) -> Result<Complex64> {
        self.check(p.n_qubits())?;
        Ok(self.expectation_unchecked(p))
    }

    pub(crate) fn expectation_unchecked(&self, p: &PauliString) -> Complex64 {
        let x = p.x_mask() as usize;
        self.amps
            .iter()
            .enumerate()
            .map(|(k, a)| self.amps[k ^ x].conj() * p.action_phase(k) * a)
            .sum()
    }

    /// `⟨ψ|H|ψ⟩` including the identity offset.
    pub fn expectation_sum(&self, h: &PauliSum) -> Result<f64> {
        self.check(h.n_qubits())?;
        let mut e = h.constant();
        for &(c, p) in h.terms() {
            e += c * self.expectation_unchecked(&p).re;
        }
        Ok(e)
    }

    /// Returns `e^{-(H - E₀)dt}|ψ⟩` (unnormalised, `E₀` the identity offset) and its squared norm.
    ///
    /// The exponential is summed as a Taylor series over sub-steps with
    /// `‖h‖₁·τ ≤ 1`; each series is truncated once the next term drops below 1e-15.
    pub fn imaginary_time_propagate(&self, h: &PauliSum, dt: f64) -> Result<(Vec<Complex64>, f64)> {
        self.check(h.n_qubits())?;
        let h = h.traceless();
        let n_sub = ((h.l1_norm() * dt.abs()).ceil() as usize).max(1);
        let tau = dt / n_sub as f64;
        let mut v = self.amps.clone();
        for _ in 0..n_sub {
            let mut term = v.clone();
            let mut acc = v.clone();
            let mut converged = false;
            let mut last = f64::INFINITY;
            for order in 1..=200 {
                term = h.apply(&term);
                let f = -tau / order as f64;
                term.iter_mut().for_each(|t| *t *= f);
                for (a, t) in acc.iter_mut().zip(&term) {
                    *a += t;
                }
                last = term.iter().map(|t| t.norm_sqr()).sum::<f64>().sqrt();
                if last < 1e-15 {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::SeriesNonConvergence(last));
            }
            v = acc;
        }
        let norm_sq = v.iter().map(|a| a.norm_sqr()).sum();
        Ok((v, norm_sq))
    }

    /// `c = ⟨ψ|e^{-2(H - E₀)dt}|ψ⟩` evaluated exactly.
    pub fn exact_normalization(&self, h: &PauliSum, dt: f64) -> Result<f64> {
        Ok(self.imaginary_time_propagate(h, dt)?.1)
    }

    /// One normalised exact imaginary-time step `e^{-H dt}|ψ⟩ / ‖·‖`.
    pub fn exact_ite_step(&self, h: &PauliSum, dt: f64) -> Result<StateVector> {
        self.exact_ite_step_capped(h, dt, DEFAULT_ORACLE_CAP)
    }

    pub fn exact_ite_step_capped(&self, h: &PauliSum, dt: f64, cap: usize) -> Result<StateVector> {
        if self.n_qubits > cap {
            return Err(Error::OracleSize {
                n_qubits: self.n_qubits,
                cap,
            });
        }
        let (v, _) = self.imaginary_time_propagate(h, dt)?;
        StateVector::from_amplitudes(self.n_qubits, v)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Ground energy and full ascending spectrum of `h` by dense diagonalisation.
pub fn exact_diagonalize(h: &PauliSum) -> Result<(f64, Vec<f64>)> {
    exact_diagonalize_capped(h, DEFAULT_ORACLE_CAP)
}

pub fn exact_diagonalize_capped(h: &PauliSum, cap: usize) -> Result<(f64, Vec<f64>)> {
    let mut spectrum: Vec<f64> = match h.to_dense_real_capped(cap)? {
        Some(m) => SymmetricEigen::new(m).eigenvalues.iter().copied().collect(),
        None => SymmetricEigen::new(h.to_dense_capped(cap)?)
            .eigenvalues
            .iter()
            .copied()
            .collect(),
    };
    spectrum.sort_by(f64::total_cmp);
    Ok((spectrum[0], spectrum))
}

/// Ground state vector of `h` by dense diagonalisation.
pub fn exact_ground_state(h: &PauliSum, cap: usize) -> Result<(f64, StateVector)> {
    let m: DMatrix<Complex64> = h.to_dense_capped(cap)?;
    let eig = SymmetricEigen::new(m);
    let (imin, &emin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let col: DVector<Complex64> = eig.eigenvectors.column(imin).into_owned();
    Ok((
        emin,
        StateVector::from_amplitudes(h.n_qubits(), col.iter().copied().collect())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str, n: usize) -> PauliString {
        PauliString::parse(s, n).unwrap()
    }

    fn plus() -> StateVector {
        let a = Complex64::new(1.0, 0.0);
        StateVector::from_amplitudes(1, vec![a, a]).unwrap()
    }

    #[test]
    fn bitstring_indexing() {
        let idx = |s: &str| {
            StateVector::from_bitstring(s, 2)
                .unwrap()
                .amplitudes()
                .iter()
                .position(|a| a.re == 1.0)
                .unwrap()
        };
        assert_eq!(idx("11"), 3);
        assert_eq!(idx("00"), 0);
        assert_eq!(idx("10"), 1);
        assert!(StateVector::from_bitstring("101", 2).is_err());
        assert!(StateVector::from_bitstring("1x", 2).is_err());
    }

    #[test]
    fn rotation_examples() {
        let z = p("Z0", 1);
        let mut s = StateVector::from_bitstring("0", 1).unwrap();
        s.apply_pauli_rotation(&z, 0.3).unwrap();
        assert!((s.amplitudes()[0] - Complex64::from_polar(1.0, 0.3)).norm() < 1e-15);
        assert!((s.expectation(&z).unwrap().re - 1.0).abs() < 1e-15);

        let mut s = StateVector::from_bitstring("0", 1).unwrap();
        s.apply_pauli_rotation(&p("X0", 1), 0.3).unwrap();
        assert!((s.expectation(&z).unwrap().re - (0.6f64).cos()).abs() < 1e-14);

        let s0 = plus();
        let mut s = s0.clone();
        s.apply_pauli_rotation(&p("Y0", 1), 0.0).unwrap();
        assert_eq!(s, s0);
    }

    #[test]
    fn rotation_rejects_anti_hermitian() {
        let mut s = plus();
        assert!(matches!(
            s.apply_pauli_rotation(&p("i X0", 1), 0.1),
            Err(Error::NonHermitian(1))
        ));
    }

    #[test]
    fn expectation_examples() {
        let zero = StateVector::from_bitstring("0", 1).unwrap();
        assert_eq!(
            zero.expectation(&p("Z0", 1)).unwrap(),
            Complex64::new(1.0, 0.0)
        );
        assert!((plus().expectation(&p("X0", 1)).unwrap().re - 1.0).abs() < 1e-15);
        assert!(plus().expectation(&p("i Z0", 1)).unwrap().norm() < 1e-15);
        let h = PauliSum::from_terms(1, 0.0, [(1.0, p("Z0", 1))]).unwrap();
        let one = StateVector::from_bitstring("1", 1).unwrap();
        assert_eq!(one.expectation_sum(&h).unwrap(), -1.0);
    }

    #[test]
    fn ite_on_diagonal_hamiltonian() {
        let h = PauliSum::from_terms(1, 0.0, [(1.0, p("Z0", 1))]).unwrap();
        let dt = 0.37;
        let s = plus().exact_ite_step(&h, dt).unwrap();
        let (a, b) = ((-dt).exp(), dt.exp());
        let n = (a * a + b * b).sqrt();
        assert!((s.amplitudes()[0].re - a / n).abs() < 1e-13);
        assert!((s.amplitudes()[1].re - b / n).abs() < 1e-13);
    }

    #[test]
    fn ite_fixed_point() {
        let h = PauliSum::from_terms(1, 2.0, [(0.5, p("Z0", 1))]).unwrap();
        let one = StateVector::from_bitstring("1", 1).unwrap();
        let s = one.exact_ite_step(&h, 1.0).unwrap();
        assert!((s.inner(&one).norm() - 1.0).abs() < 1e-14);
        assert!((s.expectation_sum(&h).unwrap() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn diagonalize_single_paulis() {
        for s in ["Z0", "X0"] {
            let h = PauliSum::from_terms(1, 0.0, [(1.0, p(s, 1))]).unwrap();
            let (e0, spec) = exact_diagonalize(&h).unwrap();
            assert!((e0 + 1.0).abs() < 1e-14);
            assert!((spec[1] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn oracle_cap() {
        let h = PauliSum::from_terms(11, 0.0, [(1.0, p("Z0", 11))]).unwrap();
        assert!(matches!(
            exact_diagonalize(&h),
            Err(Error::OracleSize { .. })
        ));
        let s = StateVector::from_bitstring(&"0".repeat(11), 11).unwrap();
        assert!(matches!(
            s.exact_ite_step(&h, 0.1),
            Err(Error::OracleSize { .. })
        ));
    }

    #[test]
    fn norm_guard_over_long_runs() {
        let mut s = plus();
        for k in 0..5000 {
            let q = if k % 2 == 0 { p("X0", 1) } else { p("Y0", 1) };
            s.apply_pauli_rotation(&q, 0.1234).unwrap();
        }
        assert!((s.norm() - 1.0).abs() < 1e-10);
    }
}
