//! Linear-system assembly, truncated solves and the QITE step kernels.
//!
//! Sign convention: a step applies `U = e^{+iAΔt}` with `A = Σ a_i P_i`, and the
//! right-hand side is `b_j = +c^{-1/2} Im⟨ψ|H P_j|ψ⟩`. This is the ordering under
//! which the first-order fit to `c^{-1/2} e^{-HΔt}|ψ⟩` decreases the energy.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{self, ReducedObservableTracker, ShotSettings};
use crate::pauli::{PauliString, PauliSum, DEFAULT_ORACLE_CAP};
use crate::pool::OperatorPool;
use crate::statevector::StateVector;

/// Coefficients below this magnitude are skipped by the full Trotter product.
pub const SKIP_COEFF: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FullQite,
    DriftSinglePath,
    DriftChannel,
    Deterministic,
    ExactIte,
}

impl Method {
    /// Whether each step is a single Pauli rotation.
    pub fn is_single_rotation(self) -> bool {
        matches!(
            self,
            Method::DriftSinglePath | Method::DriftChannel | Method::Deterministic
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotMode {
    Exact,
    Sampled,
}

/// How the normalisation `c` entering `b` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `1 − 2Δt(⟨H⟩ − E₀)`.
    FirstOrder,
    /// `⟨e^{-2(H − E₀)Δt}⟩`, only within the oracle cap.
    Exact,
    /// Exact in exact-shot mode when the register fits the oracle cap, first order otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    /// Stop once `‖a‖₁` falls below this.
    pub a_l1_tol: f64,
    /// Stop once `|ΔE|` stays below this for `window` consecutive steps.
    pub energy_tol: f64,
    pub window: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            a_l1_tol: 1e-8,
            energy_tol: 1e-9,
            window: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QiteConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub truncation_threshold: f64,
    pub method: Method,
    pub n_paths: usize,
    pub seed: u64,
    pub shot_mode: ShotMode,
    pub shots: ShotSettings,
    /// Measurement-reduction ratio for the energy tracker; 0 disables it.
    pub gamma: usize,
    pub normalization: Normalization,
    pub oracle_cap: usize,
    pub stop: StopRule,
}

impl Default for QiteConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            n_steps: 100,
            truncation_threshold: 0.05,
            method: Method::FullQite,
            n_paths: 1,
            seed: 0,
            shot_mode: ShotMode::Exact,
            shots: ShotSettings::default(),
            gamma: 0,
            normalization: Normalization::Auto,
            oracle_cap: DEFAULT_ORACLE_CAP,
            stop: StopRule::default(),
        }
    }
}

impl QiteConfig {
    pub fn total_time(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.truncation_threshold >= 0.0) {
            return Err(Error::Config("truncation threshold must be >= 0".into()));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("need at least one path".into()));
        }
        if self.n_paths > 1 && self.method != Method::DriftChannel {
            return Err(Error::Config(
                "multiple paths only make sense for the drift channel".into(),
            ));
        }
        if self.gamma > 0 && !self.method.is_single_rotation() {
            return Err(Error::Config(
                "measurement reduction needs a single-rotation method (drift or deterministic)"
                    .into(),
            ));
        }
        if self.shot_mode == ShotMode::Sampled && self.method == Method::ExactIte {
            return Err(Error::Config("exact ITE has nothing to sample".into()));
        }
        Ok(())
    }

    fn uses_exact_c(&self, n_qubits: usize) -> bool {
        match self.normalization {
            Normalization::FirstOrder => false,
            Normalization::Exact => true,
            Normalization::Auto => self.shot_mode == ShotMode::Exact && n_qubits <= self.oracle_cap,
        }
    }
}

/// `S a = b` at one state, plus the normalisation `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub s: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: f64,
    /// Present for exactly evaluated systems; lets the solver resolve the
    /// near-null part of `S` without squaring its conditioning.
    pub factor: Option<Factor>,
}

impl LinearSystem {
    pub fn new(s: DMatrix<f64>, b: DVector<f64>, c: f64) -> Self {
        Self {
            s,
            b,
            c,
            factor: None,
        }
    }
}

/// `S = MᵀM` and `b = Mᵀw`, where column `i` of `M` stacks the real and
/// imaginary parts of `P_i|ψ⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub m: DMatrix<f64>,
    pub w: DVector<f64>,
}

/// Result of a truncated pseudo-inverse solve.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSolve {
    pub a: Vec<f64>,
    /// All singular values of `S`, descending.
    pub singular_values: Vec<f64>,
    /// `σ_max / σ_min` of the untruncated `S`.
    pub kappa: f64,
    pub n_truncated: usize,
}

impl TruncatedSolve {
    pub fn a_l1(&self) -> f64 {
        self.a.iter().map(|x| x.abs()).sum()
    }
}

/// `P_i|ψ⟩` for every pool string.
pub(crate) fn pool_images(state: &StateVector, pool: &OperatorPool) -> Vec<Vec<Complex64>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        pool.paulis()
            .par_iter()
            .map(|p| state.apply_pauli(p))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        pool.paulis().iter().map(|p| state.apply_pauli(p)).collect()
    }
}

fn stack_images(images: &[Vec<Complex64>]) -> DMatrix<f64> {
    let dim = images[0].len();
    DMatrix::<f64>::from_fn(2 * dim, images.len(), |r, i| {
        if r < dim {
            images[i][r].re
        } else {
            images[i][r - dim].im
        }
    })
}

fn gram_from_stacked(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = m.transpose() * m;
    let nu = s.nrows();
    for i in 0..nu {
        s[(i, i)] = 1.0;
        for j in 0..i {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// `S_ij = Re⟨P_iψ|P_jψ⟩` as one real Gram product.
pub(crate) fn gram_matrix(images: &[Vec<Complex64>]) -> DMatrix<f64> {
    gram_from_stacked(&stack_images(images))
}

/// `S_ij = Re⟨P_i P_j⟩` through explicit Pauli products, `ν(ν+1)/2` expectations.
pub fn s_matrix_pairwise(state: &StateVector, pool: &OperatorPool) -> Result<DMatrix<f64>> {
    let ps = pool.paulis();
    let nu = ps.len();
    let mut s = DMatrix::zeros(nu, nu);
    for i in 0..nu {
        for j in i..nu {
            let prod = ps[i].multiply(&ps[j])?;
            let v = state.expectation(&prod)?.re;
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(s)
}

/// `Im⟨ψ|H P_j|ψ⟩` through one product per pool string, identity offset dropped.
pub fn b_bar_pairwise(state: &StateVector, h: &PauliSum, pool: &OperatorPool) -> Result<Vec<f64>> {
    pool.paulis()
        .iter()
        .map(|pj| {
            let mut acc = 0.0;
            for &(c, hl) in h.terms() {
                acc += c * state.expectation(&hl.multiply(pj)?)?.im;
            }
            Ok(acc)
        })
        .collect()
}

/// First-order normalisation `1 − 2Δt(⟨H⟩ − E₀)`.
pub fn first_order_c(energy: f64, h: &PauliSum, dt: f64) -> f64 {
    1.0 - 2.0 * dt * (energy - h.constant())
}

/// Exact-expectation linear system.
pub fn build_linear_system(
    state: &StateVector,
    pool: &OperatorPool,
    h: &PauliSum,
    dt: f64,
    exact_c: bool,
) -> Result<LinearSystem> {
    if pool.n_qubits() != state.n_qubits() || h.n_qubits() != state.n_qubits() {
        return Err(Error::Dimension {
            expected: state.n_qubits(),
            found: if pool.n_qubits() != state.n_qubits() {
                pool.n_qubits()
            } else {
                h.n_qubits()
            },
        });
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let m = stack_images(&pool_images(state, pool));
    let s = gram_from_stacked(&m);
    let c = if exact_c {
        state.exact_normalization(h, dt)?
    } else {
        first_order_c(state.expectation_sum(h)?, h, dt)
    };
    // Im(conj(x)·y) = Re x·Im y − Im x·Re y, so b = Mᵀ[−Im Hψ; Re Hψ] / √c
    let h_psi = h.traceless().apply(state.amplitudes());
    let dim = h_psi.len();
    let scale = 1.0 / c.sqrt();
    let w = DVector::from_fn(2 * dim, |r, _| {
        if r < dim {
            -h_psi[r].im * scale
        } else {
            h_psi[r - dim].re * scale
        }
    });
    let b = m.tr_mul(&w);
    Ok(LinearSystem {
        s,
        b,
        c,
        factor: Some(Factor { m, w }),
    })
}

/// Eigenvalues of `S` below this are recomputed from the factor when the
/// threshold reaches into them.
const REFINE_BELOW: f64 = 1e-8;

/// One direction of the pseudo-inverse: singular value of `S`, unit vector in
/// coefficient space, and the component of the solution along it.
struct Mode {
    sigma: f64,
    v: DVector<f64>,
    x: f64,
}

fn modes(sys: &LinearSystem, threshold: f64) -> Vec<Mode> {
    let eig = SymmetricEigen::new(sys.s.clone());
    let nu = eig.eigenvalues.len();
    let refine = match &sys.factor {
        Some(f) if threshold < REFINE_BELOW => Some(f),
        _ => None,
    };
    let mut out = Vec::with_capacity(nu);
    let mut small = Vec::new();
    for k in 0..nu {
        let lambda = eig.eigenvalues[k];
        if refine.is_some() && lambda.abs() < REFINE_BELOW {
            small.push(k);
            continue;
        }
        let v = eig.eigenvectors.column(k).into_owned();
        let x = if lambda != 0.0 {
            v.dot(&sys.b) / lambda
        } else {
            0.0
        };
        out.push(Mode {
            sigma: lambda.abs(),
            v,
            x,
        });
    }
    if let (Some(f), false) = (refine, small.is_empty()) {
        // SVD of M restricted to the near-null eigenspace: singular values of S are
        // σ_M², and the solution components are (uᵀw)/σ_M.
        let basis = eig.eigenvectors.select_columns(&small);
        let svd = (&f.m * &basis).svd(true, true);
        let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
        for (j, &sm) in svd.singular_values.iter().enumerate() {
            let v = &basis * vt.row(j).transpose();
            let x = if sm > 0.0 {
                u.column(j).dot(&f.w) / sm
            } else {
                0.0
            };
            out.push(Mode {
                sigma: sm * sm,
                v,
                x,
            });
        }
        // directions the restricted SVD cannot see (more columns than rows)
        for _ in svd.singular_values.len()..small.len() {
            out.push(Mode {
                sigma: 0.0,
                v: DVector::zeros(nu),
                x: 0.0,
            });
        }
    }
    out
}

/// Singular values of `S`, descending.
pub fn singular_values(s: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = SymmetricEigen::new(s.clone())
        .eigenvalues
        .iter()
        .map(|l| l.abs())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Pseudo-inverse solve keeping singular values strictly above `threshold`.
pub fn solve_truncated(sys: &LinearSystem, threshold: f64) -> Result<TruncatedSolve> {
    if !(threshold >= 0.0) {
        return Err(Error::Config(format!(
            "truncation threshold must be >= 0, got {threshold}"
        )));
    }
    let modes = modes(sys, threshold);
    let nu = sys.s.nrows();
    let mut sv: Vec<f64> = modes.iter().map(|m| m.sigma).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = sv.last().copied().unwrap_or(0.0);
    let kappa = if sigma_min > 0.0 {
        sigma_max / sigma_min
    } else {
        f64::INFINITY
    };
    let mut a = DVector::<f64>::zeros(nu);
    let mut kept = 0;
    for m in &modes {
        if m.sigma > threshold {
            kept += 1;
            a.axpy(m.x, &m.v, 1.0);
        }
    }
    if kept == 0 {
        return Err(Error::SingularSystem {
            threshold,
            sigma_max,
        });
    }
    Ok(TruncatedSolve {
        a: a.iter().copied().collect(),
        singular_values: sv,
        kappa,
        n_truncated: nu - kept,
    })
}

fn check_coeffs(a: &[f64], pool: &OperatorPool, state: &StateVector) -> Result<()> {
    if a.len() != pool.len() {
        return Err(Error::Config(format!(
            "coefficient vector has {} entries for a pool of {}",
            a.len(),
            pool.len()
        )));
    }
    if pool.n_qubits() != state.n_qubits() {
        return Err(Error::Dimension {
            expected: state.n_qubits(),
            found: pool.n_qubits(),
        });
    }
    Ok(())
}

/// First-order Trotter product `Π_i e^{i a_i P_i Δt}` in pool order.
pub fn step_full_qite(
    state: &mut StateVector,
    a: &[f64],
    pool: &OperatorPool,
    dt: f64,
) -> Result<()> {
    check_coeffs(a, pool, state)?;
    for (&ai, p) in a.iter().zip(pool.paulis()) {
        if ai.abs() >= SKIP_COEFF {
            state.apply_pauli_rotation(p, ai * dt)?;
        }
    }
    Ok(())
}

/// Drift probabilities `|a_i| / ‖a‖₁`.
pub fn drift_probabilities(a: &[f64]) -> Result<Vec<f64>> {
    let l1: f64 = a.iter().map(|x| x.abs()).sum();
    if !(l1 > 0.0) {
        return Err(Error::FixedPoint);
    }
    Ok(a.iter().map(|x| x.abs() / l1).collect())
}

/// Index selected by a uniform draw `u ∈ [0, 1)` from the drift distribution.
pub fn drift_select(a: &[f64], u: f64) -> Result<usize> {
    let probs = drift_probabilities(a)?;
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_nonzero = i;
            acc += p;
            if u < acc {
                return Ok(i);
            }
        }
    }
    Ok(last_nonzero)
}

/// Rotation angle `sign(a_i)·‖a‖₁·Δt` used by both single-rotation variants.
pub fn drift_angle(a: &[f64], i: usize, dt: f64) -> f64 {
    let l1: f64 = a.iter().map(|x| x.abs()).sum();
    a[i].signum() * l1 * dt
}

/// One randomised drift step; returns the chosen pool index and angle.
pub fn step_drift<R: Rng + ?Sized>(
    state: &mut StateVector,
    a: &[f64],
    pool: &OperatorPool,
    dt: f64,
    rng: &mut R,
) -> Result<(usize, f64)> {
    check_coeffs(a, pool, state)?;
    let i = drift_select(a, rng.random::<f64>())?;
    let theta = drift_angle(a, i, dt);
    state.apply_pauli_rotation(&pool.paulis()[i], theta)?;
    Ok((i, theta))
}

/// `argmax_i |a_i|` with ties going to the lowest index.
pub fn deterministic_select(a: &[f64]) -> Result<usize> {
    drift_probabilities(a)?;
    let mut best = 0;
    for (i, x) in a.iter().enumerate() {
        if x.abs() > a[best].abs() {
            best = i;
        }
    }
    Ok(best)
}

pub fn step_deterministic(
    state: &mut StateVector,
    a: &[f64],
    pool: &OperatorPool,
    dt: f64,
) -> Result<(usize, f64)> {
    check_coeffs(a, pool, state)?;
    let i = deterministic_select(a)?;
    let theta = drift_angle(a, i, dt);
    state.apply_pauli_rotation(&pool.paulis()[i], theta)?;
    Ok((i, theta))
}

/// What was applied at a step.
#[derive(Debug, Clone, PartialEq)]
pub enum Applied {
    /// Initial state, nothing applied.
    Initial,
    /// Every pool rotation (full QITE).
    All,
    /// Exact non-unitary step.
    Exact,
    Pauli(PauliString),
}

impl std::fmt::Display for Applied {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Applied::Initial => f.write_str("none"),
            Applied::All => f.write_str("all"),
            Applied::Exact => f.write_str("exact"),
            Applied::Pauli(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub chosen: Applied,
    pub angle: f64,
    pub a_l1_norm: f64,
    pub c: f64,
    pub kappa: f64,
    pub n_truncated: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// All requested steps were taken.
    Completed,
    /// `‖a‖₁` vanished or the energy stalled.
    Converged,
    /// Every singular value was truncated.
    Singular,
}

/// One energy-tracker sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerRecord {
    pub step: usize,
    pub estimate: f64,
    pub exact: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub status: RunStatus,
    pub tracker: Vec<TrackerRecord>,
    /// Sampled-mode steps in which `c` hit the floor.
    pub c_floor_hits: usize,
    pub final_state: StateVector,
}

impl Trajectory {
    pub fn final_energy(&self) -> f64 {
        self.records.last().map(|r| r.energy).unwrap_or(f64::NAN)
    }

    /// First step whose energy lies within `tol` of `target`.
    pub fn steps_to_accuracy(&self, target: f64, tol: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| (r.energy - target).abs() < tol)
            .map(|r| r.step)
    }
}

fn check_inputs(h: &PauliSum, pool: &OperatorPool, reference: &StateVector) -> Result<()> {
    for n in [h.n_qubits(), pool.n_qubits()] {
        if n != reference.n_qubits() {
            return Err(Error::Dimension {
                expected: reference.n_qubits(),
                found: n,
            });
        }
    }
    Ok(())
}

/// Runs one trajectory; the RNG stream is derived from `(config.seed, path)`.
pub fn run_trajectory_path(
    h: &PauliSum,
    pool: &OperatorPool,
    reference: &StateVector,
    config: &QiteConfig,
    path: u64,
) -> Result<Trajectory> {
    config.validate()?;
    check_inputs(h, pool, reference)?;
    let mut rng = path_rng(config.seed, path);
    let exact_c = config.uses_exact_c(reference.n_qubits());
    let mut state = reference.clone();
    let mut energy = state.expectation_sum(h)?;
    let mut records = vec![TrajectoryRecord {
        step: 0,
        time: 0.0,
        energy,
        chosen: Applied::Initial,
        angle: 0.0,
        a_l1_norm: 0.0,
        c: 1.0,
        kappa: f64::NAN,
        n_truncated: 0,
    }];
    let mut tracker = if config.gamma > 0 {
        // one re-anchoring window shares the observable budget; ‖c‖∞ taken as 1
        let (n_base, n_corr) = measurement::allocate_observable_shots(
            config.gamma - 1,
            1.0,
            config.dt,
            config.shots.n_shots_observable.max(config.gamma as u64),
        )?;
        Some(
            ReducedObservableTracker::new(
                h.clone(),
                config.gamma,
                &state,
                config.shot_mode,
                n_base,
                &mut rng,
            )?
            .with_correction_shots(n_corr),
        )
    } else {
        None
    };
    let mut tracker_log = Vec::new();
    if let Some(t) = &tracker {
        tracker_log.push(TrackerRecord {
            step: 0,
            estimate: t.estimate(),
            exact: energy,
        });
    }
    let mut status = RunStatus::Completed;
    let mut stall = 0usize;
    let mut c_floor_hits = 0usize;

    for k in 1..=config.n_steps {
        let before = tracker.as_ref().map(|_| state.clone());
        let rec = if config.method == Method::ExactIte {
            let c = state.exact_normalization(h, config.dt)?;
            state = state.exact_ite_step_capped(h, config.dt, config.oracle_cap)?;
            (Applied::Exact, 0.0, 0.0, c, f64::NAN, 0)
        } else {
            let sys = match config.shot_mode {
                ShotMode::Exact => build_linear_system(&state, pool, h, config.dt, exact_c)?,
                ShotMode::Sampled => {
                    let (sys, clamped) = measurement::sample_linear_system(
                        &state,
                        pool,
                        h,
                        config.dt,
                        config.truncation_threshold,
                        &config.shots,
                        &mut rng,
                    )?;
                    c_floor_hits += clamped as usize;
                    sys
                }
            };
            let sol = match solve_truncated(&sys, config.truncation_threshold) {
                Ok(sol) => sol,
                Err(Error::SingularSystem { .. }) => {
                    status = RunStatus::Singular;
                    break;
                }
                Err(e) => return Err(e),
            };
            let l1 = sol.a_l1();
            if l1 < config.stop.a_l1_tol {
                status = RunStatus::Converged;
                break;
            }
            let (chosen, angle) = match config.method {
                Method::FullQite => {
                    step_full_qite(&mut state, &sol.a, pool, config.dt)?;
                    (Applied::All, 0.0)
                }
                Method::Deterministic => {
                    let (i, th) = step_deterministic(&mut state, &sol.a, pool, config.dt)?;
                    (Applied::Pauli(pool.paulis()[i]), th)
                }
                Method::DriftSinglePath | Method::DriftChannel => {
                    let (i, th) = step_drift(&mut state, &sol.a, pool, config.dt, &mut rng)?;
                    (Applied::Pauli(pool.paulis()[i]), th)
                }
                Method::ExactIte => unreachable!(),
            };
            (chosen, angle, l1, sys.c, sol.kappa, sol.n_truncated)
        };
        let new_energy = state.expectation_sum(h)?;
        if let (Some(t), Some(before), Applied::Pauli(p)) = (tracker.as_mut(), &before, &rec.0) {
            let est = t.update(k, before, &state, p, rec.1, &mut rng)?;
            tracker_log.push(TrackerRecord {
                step: k,
                estimate: est,
                exact: new_energy,
            });
        }
        records.push(TrajectoryRecord {
            step: k,
            time: k as f64 * config.dt,
            energy: new_energy,
            chosen: rec.0,
            angle: rec.1,
            a_l1_norm: rec.2,
            c: rec.3,
            kappa: rec.4,
            n_truncated: rec.5,
        });
        if (new_energy - energy).abs() < config.stop.energy_tol {
            stall += 1;
        } else {
            stall = 0;
        }
        energy = new_energy;
        if stall >= config.stop.window {
            status = RunStatus::Converged;
            break;
        }
    }
    Ok(Trajectory {
        records,
        status,
        tracker: tracker_log,
        c_floor_hits,
        final_state: state,
    })
}

/// Single trajectory (path 0).
pub fn run_trajectory(
    h: &PauliSum,
    pool: &OperatorPool,
    reference: &StateVector,
    config: &QiteConfig,
) -> Result<Trajectory> {
    run_trajectory_path(h, pool, reference, config, 0)
}

/// Independent RNG stream for one path.
pub fn path_rng(seed: u64, path: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPoint {
    pub step: usize,
    pub time: f64,
    pub mean_energy: f64,
    pub std_energy: f64,
}

#[derive(Debug, Clone)]
pub struct ChannelRun {
    pub paths: Vec<Trajectory>,
    pub summary: Vec<ChannelPoint>,
}

impl ChannelRun {
    pub fn final_mean_energy(&self) -> f64 {
        self.summary
            .last()
            .map(|p| p.mean_energy)
            .unwrap_or(f64::NAN)
    }
}

/// Per-step mean and sample standard deviation across paths; a path that stopped
/// early contributes its last energy to later steps.
pub fn channel_summary(paths: &[Trajectory], dt: f64) -> Vec<ChannelPoint> {
    let longest = paths.iter().map(|t| t.records.len()).max().unwrap_or(0);
    (0..longest)
        .map(|k| {
            let es: Vec<f64> = paths
                .iter()
                .map(|t| t.records[k.min(t.records.len() - 1)].energy)
                .collect();
            let n = es.len() as f64;
            let mean = es.iter().sum::<f64>() / n;
            let var = if es.len() > 1 {
                es.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            ChannelPoint {
                step: k,
                time: k as f64 * dt,
                mean_energy: mean,
                std_energy: var.sqrt(),
            }
        })
        .collect()
}

/// Runs `config.n_paths` independent drift trajectories.
pub fn run_channel(
    h: &PauliSum,
    pool: &OperatorPool,
    reference: &StateVector,
    config: &QiteConfig,
) -> Result<ChannelRun> {
    config.validate()?;
    let run = |p: u64| run_trajectory_path(h, pool, reference, config, p);
    #[cfg(feature = "parallel")]
    let paths: Vec<Trajectory> = {
        use rayon::prelude::*;
        (0..config.n_paths as u64)
            .into_par_iter()
            .map(run)
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let paths: Vec<Trajectory> = (0..config.n_paths as u64).map(run).collect::<Result<_>>()?;
    let summary = channel_summary(&paths, config.dt);
    Ok(ChannelRun { paths, summary })
}

/// `‖S̃⁻¹‖_F` of the truncated pseudo-inverse.
pub fn pseudo_inverse_frobenius(s: &DMatrix<f64>, threshold: f64) -> f64 {
    SymmetricEigen::new(s.clone())
        .eigenvalues
        .iter()
        .filter(|l| l.abs() > threshold)
        .map(|l| l.powi(-2))
        .sum::<f64>()
        .sqrt()
}
