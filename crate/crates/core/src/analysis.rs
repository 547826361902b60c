//! Diagnostics of the QITE linear systems: singular-value spectra, connected
//! correlations of the pool, sensitivity to perturbations, truncation sweeps and
//! the single-step error of the drift channel.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::pauli::{PauliString, PauliSum};
use crate::pool::OperatorPool;
use crate::qite::{self, LinearSystem, Method, QiteConfig, RunStatus};
use crate::statevector::{exact_diagonalize_capped, StateVector};

/// 1.6 mHa.
pub const CHEMICAL_ACCURACY: f64 = 1.6e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub step: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub kappa: f64,
}

impl SpectrumReport {
    pub fn count_above(&self, threshold: f64) -> usize {
        self.singular_values
            .iter()
            .filter(|s| **s > threshold)
            .count()
    }
}

pub fn spectrum_at_step(step: usize, sys: &LinearSystem) -> SpectrumReport {
    let singular_values = qite::singular_values(&sys.s);
    let kappa = match (singular_values.first(), singular_values.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    };
    SpectrumReport {
        step,
        singular_values,
        kappa,
    }
}

/// Runs the configured trajectory and returns the spectrum of `S` at the
/// final state, or at `at_step` when given.
pub fn spectrum_along_run(
    h: &PauliSum,
    pool: &OperatorPool,
    reference: &StateVector,
    config: &QiteConfig,
    at_step: Option<usize>,
) -> Result<SpectrumReport> {
    let mut cfg = config.clone();
    if let Some(k) = at_step {
        cfg.n_steps = k;
    }
    let run = qite::run_trajectory(h, pool, reference, &cfg)?;
    let step = run.records.last().map(|r| r.step).unwrap_or(0);
    let sys = qite::build_linear_system(&run.final_state, pool, h, cfg.dt, false)?;
    Ok(spectrum_at_step(step, &sys))
}

/// Minimum qubit-index gap between the supports; 0 when they overlap.
pub fn support_distance(p: &PauliString, q: &PauliString) -> usize {
    let (a, b) = (p.support(), q.support());
    if a & b != 0 || a == 0 || b == 0 {
        return 0;
    }
    let bits = |m: u64| (0..64usize).filter(move |i| m >> i & 1 == 1);
    let mut best = usize::MAX;
    for i in bits(a) {
        for j in bits(b) {
            best = best.min(i.abs_diff(j));
        }
    }
    best
}

/// `|S′| ≈ α (1 + d)^{-1/ξ}` fitted in log-log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationFit {
    pub alpha: f64,
    pub xi: f64,
    pub slope: f64,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    /// `S′_ij = Re⟨P_i P_j⟩ − ⟨P_i⟩⟨P_j⟩`.
    pub s_prime: DMatrix<f64>,
    pub expectations: Vec<f64>,
    pub distances: DMatrix<usize>,
    /// `None` when no pair has `d ≥ 1` and `|S′| > 1e-8`.
    pub fit: Option<CorrelationFit>,
}

impl CorrelationReport {
    /// Upper-triangle rows `(i, j, d, s′)`, `i ≤ j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        let n = self.s_prime.nrows();
        (0..n).flat_map(move |i| {
            (i..n).map(move |j| (i, j, self.distances[(i, j)], self.s_prime[(i, j)]))
        })
    }
}

const FIT_FLOOR: f64 = 1e-8;

pub fn correlation_matrix(state: &StateVector, pool: &OperatorPool) -> Result<CorrelationReport> {
    if pool.n_qubits() != state.n_qubits() {
        return Err(Error::Dimension {
            expected: state.n_qubits(),
            found: pool.n_qubits(),
        });
    }
    let images = qite::pool_images(state, pool);
    let s = qite::gram_matrix(&images);
    let ev: Vec<f64> = pool
        .paulis()
        .iter()
        .map(|p| state.expectation_unchecked(p).re)
        .collect();
    let nu = ev.len();
    let v = DVector::from_column_slice(&ev);
    let s_prime = s - &v * v.transpose();
    let ps = pool.paulis();
    let distances = DMatrix::from_fn(nu, nu, |i, j| support_distance(&ps[i], &ps[j]));

    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 0..nu {
        for j in i + 1..nu {
            let d = distances[(i, j)];
            let s = s_prime[(i, j)].abs();
            if d >= 1 && s > FIT_FLOOR {
                xs.push((1.0 + d as f64).ln());
                ys.push(s.ln());
            }
        }
    }
    let fit = linear_fit(&xs, &ys).map(|(slope, icpt)| CorrelationFit {
        alpha: icpt.exp(),
        xi: -1.0 / slope,
        slope,
        n_pairs: xs.len(),
    });
    Ok(CorrelationReport {
        s_prime,
        expectations: ev,
        distances,
        fit,
    })
}

/// Least-squares `(slope, intercept)`; `None` with fewer than two distinct abscissae.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityReport {
    pub kappa: f64,
    /// Largest `δ(a) / (δ(S) + δ(b))` over the random trials.
    pub max_random_ratio: f64,
    /// `δ(a) / δ(b)` for `b` perturbed along the weakest singular direction.
    pub adversarial_ratio: f64,
}

fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, l| a.max(l.abs()))
}

fn solve_full(s: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    s.clone()
        .lu()
        .solve(b)
        .unwrap_or_else(|| DVector::from_element(b.len(), f64::NAN))
}

/// Relative-error amplification of the untruncated solve under perturbations of
/// relative size `delta_s` (symmetric, spectral norm) and `delta_b` (Euclidean).
pub fn sensitivity_probe<R: Rng + ?Sized>(
    sys: &LinearSystem,
    delta_s: f64,
    delta_b: f64,
    n_trials: usize,
    rng: &mut R,
) -> Result<SensitivityReport> {
    if !(delta_s >= 0.0 && delta_b >= 0.0) {
        return Err(Error::Config("perturbations must be non-negative".into()));
    }
    let nu = sys.s.nrows();
    let eig = SymmetricEigen::new(sys.s.clone());
    let (mut imax, mut imin) = (0, 0);
    for k in 0..nu {
        if eig.eigenvalues[k].abs() > eig.eigenvalues[imax].abs() {
            imax = k;
        }
        if eig.eigenvalues[k].abs() < eig.eigenvalues[imin].abs() {
            imin = k;
        }
    }
    let (smax, smin) = (eig.eigenvalues[imax].abs(), eig.eigenvalues[imin].abs());
    let kappa = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    let a = solve_full(&sys.s, &sys.b);
    let (s_norm, b_norm, a_norm) = (smax, sys.b.norm(), a.norm());

    let mut max_random_ratio: f64 = 0.0;
    if delta_s + delta_b > 0.0 && a_norm > 0.0 {
        for _ in 0..n_trials {
            let g = DMatrix::<f64>::from_fn(nu, nu, |_, _| rng.sample(StandardNormal));
            let sym = &g + g.transpose();
            let ds = if delta_s > 0.0 {
                sym.clone() * (delta_s * s_norm / spectral_norm_sym(&sym))
            } else {
                DMatrix::zeros(nu, nu)
            };
            let gb = DVector::<f64>::from_fn(nu, |_, _| rng.sample(StandardNormal));
            let db = gb.clone() * (delta_b * b_norm / gb.norm());
            let a2 = solve_full(&(&sys.s + ds), &(&sys.b + db));
            let ratio = ((a2 - &a).norm() / a_norm) / (delta_s + delta_b);
            if ratio.is_finite() {
                max_random_ratio = max_random_ratio.max(ratio);
            }
        }
    }

    let adversarial_ratio = if delta_b > 0.0 && a_norm > 0.0 {
        let u = eig.eigenvectors.column(imin).into_owned();
        let db = u * (delta_b * b_norm);
        let a2 = solve_full(&sys.s, &(&sys.b + db));
        ((a2 - &a).norm() / a_norm) / delta_b
    } else {
        0.0
    };
    Ok(SensitivityReport {
        kappa,
        max_random_ratio,
        adversarial_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub threshold: f64,
    pub energy: f64,
    /// `NaN` when the register exceeds the oracle cap.
    pub error_vs_ed: f64,
    pub status: RunStatus,
}

/// Independent full-QITE runs, one per threshold.
pub fn truncation_sweep(
    h: &PauliSum,
    pool: &OperatorPool,
    reference: &StateVector,
    thresholds: &[f64],
    config: &QiteConfig,
) -> Result<Vec<SweepPoint>> {
    let e_ed = if h.n_qubits() <= config.oracle_cap {
        exact_diagonalize_capped(h, config.oracle_cap)?.0
    } else {
        f64::NAN
    };
    let run = |&threshold: &f64| -> Result<SweepPoint> {
        let cfg = QiteConfig {
            truncation_threshold: threshold,
            method: Method::FullQite,
            n_paths: 1,
            gamma: 0,
            ..config.clone()
        };
        let t = qite::run_trajectory(h, pool, reference, &cfg)?;
        let energy = t.final_energy();
        Ok(SweepPoint {
            threshold,
            energy,
            error_vs_ed: (energy - e_ed).abs(),
            status: t.status,
        })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        thresholds.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        thresholds.iter().map(run).collect()
    }
}

fn dense_rotation(p: &PauliString, theta: f64, cap: usize) -> Result<DMatrix<Complex64>> {
    let m = p.to_dense_capped(cap)?;
    let d = m.nrows();
    Ok(DMatrix::identity(d, d) * Complex64::new(theta.cos(), 0.0)
        + m * Complex64::new(0.0, theta.sin()))
}

/// `e^{iAΔt}` with `A = Σ a_i P_i`, through the eigenbasis of the Hermitian `A`.
pub fn exact_generator_unitary(
    a: &[f64],
    pool: &OperatorPool,
    dt: f64,
    cap: usize,
) -> Result<DMatrix<Complex64>> {
    let d = 1usize << pool.n_qubits();
    let mut gen = DMatrix::<Complex64>::zeros(d, d);
    for (&ai, p) in a.iter().zip(pool.paulis()) {
        gen += p.to_dense_capped(cap)? * Complex64::new(ai, 0.0);
    }
    let eig = SymmetricEigen::new(gen);
    let phases =
        DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, l * dt)));
    Ok(&eig.eigenvectors * phases * eig.eigenvectors.adjoint())
}

fn superoperator(u: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    // vec(U ρ U†) = (conj(U) ⊗ U) vec(ρ)
    u.conjugate().kronecker(u)
}

fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// Single-step errors of the drift channel against the exact rotation `e^{iAΔt}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelError {
    /// Spectral norm of the difference of the two channels' Liouville matrices.
    pub channel: f64,
    /// `‖Σ p_i V_i − U‖` for the averaged drift unitary.
    pub mean_unitary: f64,
    /// `(‖a‖₁ Δt)²`.
    pub bound: f64,
}

/// Dense evaluation of the drift channel `ρ ↦ Σ p_i V_i ρ V_i†` at one step.
pub fn drift_channel_error(
    a: &[f64],
    pool: &OperatorPool,
    dt: f64,
    cap: usize,
) -> Result<ChannelError> {
    if a.len() != pool.len() {
        return Err(Error::Config(
            "coefficient vector does not match the pool".into(),
        ));
    }
    let probs = qite::drift_probabilities(a)?;
    let u = exact_generator_unitary(a, pool, dt, cap)?;
    let d = u.nrows();
    let mut chan = DMatrix::<Complex64>::zeros(d * d, d * d);
    let mut mean = DMatrix::<Complex64>::zeros(d, d);
    for (i, p) in pool.paulis().iter().enumerate() {
        if probs[i] == 0.0 {
            continue;
        }
        let v = dense_rotation(p, qite::drift_angle(a, i, dt), cap)?;
        chan += superoperator(&v) * Complex64::new(probs[i], 0.0);
        mean += v * Complex64::new(probs[i], 0.0);
    }
    let l1: f64 = a.iter().map(|x| x.abs()).sum();
    Ok(ChannelError {
        channel: spectral_norm(&(chan - superoperator(&u))),
        mean_unitary: spectral_norm(&(mean - u)),
        bound: (l1 * dt).powi(2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pool::load_pool;
    use crate::qite::path_rng;

    fn p(s: &str, n: usize) -> PauliString {
        PauliString::parse(s, n).unwrap()
    }

    #[test]
    fn identity_spectrum() {
        let sys = LinearSystem::new(DMatrix::identity(4, 4), DVector::zeros(4), 1.0);
        let r = spectrum_at_step(3, &sys);
        assert_eq!(r.singular_values, vec![1.0; 4]);
        assert_eq!(r.kappa, 1.0);
        assert_eq!(r.count_above(0.05), 4);
    }

    #[test]
    fn distances() {
        assert_eq!(support_distance(&p("X0 Y1", 6), &p("Z1", 6)), 0);
        assert_eq!(support_distance(&p("X0 Y1", 6), &p("Z4 X5", 6)), 3);
        assert_eq!(support_distance(&p("X5", 6), &p("Y0 Y2", 6)), 3);
    }

    #[test]
    fn product_state_disjoint_pairs_decouple() {
        let mut s = StateVector::from_bitstring("0000", 4).unwrap();
        for (q, th) in [("Y0", 0.3), ("X1", 0.5), ("Y2", 0.2), ("X3", 0.9)] {
            s.apply_pauli_rotation(&p(q, 4), th).unwrap();
        }
        let pool = load_pool(4, &["X0", "Z0", "Y3", "Z2 X3"]).unwrap();
        let r = correlation_matrix(&s, &pool).unwrap();
        assert!(r.s_prime[(0, 2)].abs() < 1e-14);
        assert!(r.s_prime[(1, 2)].abs() < 1e-14);
        for i in 0..4 {
            let e = r.expectations[i];
            assert!((r.s_prime[(i, i)] - (1.0 - e * e)).abs() < 1e-14);
        }
    }

    #[test]
    fn no_fit_without_distance() {
        let s = StateVector::from_bitstring("10", 2).unwrap();
        let pool = load_pool(2, &["X0 Y1", "Y0 X1"]).unwrap();
        assert!(correlation_matrix(&s, &pool).unwrap().fit.is_none());
    }

    #[test]
    fn sensitivity_examples() {
        let mut rng = path_rng(11, 0);
        let sys = LinearSystem::new(
            DMatrix::identity(3, 3),
            DVector::from_vec(vec![1.0, -0.5, 0.2]),
            1.0,
        );
        let r = sensitivity_probe(&sys, 1e-6, 1e-6, 50, &mut rng).unwrap();
        assert_eq!(r.kappa, 1.0);
        assert!(r.max_random_ratio <= 1.2);
        let zero = sensitivity_probe(&sys, 0.0, 0.0, 5, &mut rng).unwrap();
        assert_eq!(zero.max_random_ratio, 0.0);

        let sys = LinearSystem::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.01])),
            DVector::from_vec(vec![1.0, 0.0]),
            1.0,
        );
        let r = sensitivity_probe(&sys, 1e-7, 1e-7, 50, &mut rng).unwrap();
        assert!((r.kappa - 100.0).abs() < 1e-9);
        assert!((r.adversarial_ratio - 100.0).abs() < 1e-3);
        assert!(r.max_random_ratio <= 1.2 * r.kappa);
    }

    #[test]
    fn channel_error_vanishes_for_one_term() {
        let pool = load_pool(2, &["X0 Y1", "Y0 X1"]).unwrap();
        let e = drift_channel_error(&[0.7, 0.0], &pool, 0.1, 4).unwrap();
        assert!(e.channel < 1e-12 && e.mean_unitary < 1e-12);
    }
}
