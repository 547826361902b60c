//! Finite-shot estimation, shot budgets and the cross-step observable tracker.
//!
//! Outcomes are drawn binomially from exact expectations; the statevector is
//! never collapsed.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{PauliString, PauliSum};
use crate::pool::OperatorPool;
use crate::qite::{self, LinearSystem, ShotMode};
use crate::statevector::StateVector;

/// Sampled normalisations are clamped to at least this value.
pub const C_FLOOR: f64 = 0.1;

/// User-facing shot settings. With `epsilon` set, the budgets are derived per step
/// from the precision target; otherwise the fixed totals are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotSettings {
    pub epsilon: Option<f64>,
    pub n_shots_s: u64,
    pub n_shots_b: u64,
    pub n_shots_c: u64,
    pub n_shots_observable: u64,
}

impl Default for ShotSettings {
    fn default() -> Self {
        Self {
            epsilon: None,
            n_shots_s: 1_000_000,
            n_shots_b: 100_000,
            n_shots_c: 10_000,
            n_shots_observable: 10_000,
        }
    }
}

/// Shot totals for one linear-system estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotPlan {
    /// Total over all `ν²` entries of `S`.
    pub n_shots_s: u64,
    /// Total over all `ν` entries of `b̄`.
    pub n_shots_b: u64,
    pub n_shots_c: u64,
    pub n_shots_observable: u64,
    pub epsilon: f64,
}

impl ShotPlan {
    pub fn per_element_s(&self, nu: usize) -> u64 {
        self.n_shots_s.div_ceil((nu * nu) as u64).max(1)
    }

    pub fn per_element_b(&self, nu: usize) -> u64 {
        self.n_shots_b.div_ceil(nu as u64).max(1)
    }
}

/// Mean of `n` outcomes `±1` with `P(+1) = (1 + exact)/2`.
pub fn sample_from_expectation<R: Rng + ?Sized>(exact: f64, n_shots: u64, rng: &mut R) -> f64 {
    if n_shots == 0 {
        return exact;
    }
    let p = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
    let plus = Binomial::new(n_shots, p)
        .expect("p clamped to [0,1]")
        .sample(rng);
    2.0 * plus as f64 / n_shots as f64 - 1.0
}

/// Shot estimate of `⟨p⟩` for a Hermitian Pauli string.
pub fn sample_pauli_expectation<R: Rng + ?Sized>(
    state: &StateVector,
    p: &PauliString,
    n_shots: u64,
    rng: &mut R,
) -> Result<f64> {
    if !p.is_hermitian() {
        return Err(Error::NonHermitian(p.phase_exp()));
    }
    if n_shots == 0 {
        return Err(Error::Allocation("need at least one shot".into()));
    }
    let exact = state.expectation(p)?.re;
    Ok(sample_from_expectation(exact, n_shots, rng))
}

/// Importance-sampled estimate of `Σ_l w_l e_l` where each `e_l ∈ [-1, 1]` is the
/// exact expectation of a `±1`-valued measurement. Term `l` is drawn with
/// probability `|w_l|/‖w‖₁`; every outcome is rescaled by `sign(w_l)‖w‖₁`.
pub fn l1_sample<R: Rng + ?Sized>(terms: &[(f64, f64)], n_shots: u64, rng: &mut R) -> Result<f64> {
    let terms: Vec<(f64, Option<f64>)> = terms.iter().map(|&(w, e)| (w, Some(e))).collect();
    l1_sample_partial(&terms, n_shots, rng)
}

/// As [`l1_sample`], but a `None` value marks a term whose draws contribute exactly 0.
fn l1_sample_partial<R: Rng + ?Sized>(
    terms: &[(f64, Option<f64>)],
    n_shots: u64,
    rng: &mut R,
) -> Result<f64> {
    let l1: f64 = terms.iter().map(|(w, _)| w.abs()).sum();
    if !(l1 > 0.0) {
        return Err(Error::Config("l1 sampling needs a non-zero weight".into()));
    }
    if n_shots == 0 {
        return Err(Error::Allocation("need at least one shot".into()));
    }
    let mut remaining = n_shots;
    let mut mass = 1.0;
    let mut total = 0.0;
    for (w, e) in terms {
        if remaining == 0 {
            break;
        }
        let p = w.abs() / l1;
        let n_l = if mass <= p {
            remaining
        } else {
            Binomial::new(remaining, (p / mass).clamp(0.0, 1.0))
                .expect("probability clamped")
                .sample(rng)
        };
        mass -= p;
        remaining -= n_l;
        if let (true, Some(e)) = (n_l > 0, e) {
            let plus = Binomial::new(n_l, ((1.0 + e) / 2.0).clamp(0.0, 1.0))
                .expect("probability clamped")
                .sample(rng);
            total += w.signum() * (2.0 * plus as f64 - n_l as f64);
        }
    }
    Ok(l1 * total / n_shots as f64)
}

/// Per-term values `(h_l, Im⟨H_l P_j⟩)`; commuting terms are `None` and contribute 0.
fn hp_imag_terms(state: &StateVector, h: &PauliSum, p_j: &PauliString) -> Vec<(f64, Option<f64>)> {
    h.terms()
        .iter()
        .map(|&(c, hl)| {
            let e = (!hl.commutes_unchecked(p_j))
                .then(|| state.expectation_unchecked(&hl.mul_unchecked(p_j)).im);
            (c, e)
        })
        .collect()
}

/// l1-sampled estimate of `Im⟨ψ|H P_j|ψ⟩` (identity offset excluded).
pub fn l1_sample_hp_imag<R: Rng + ?Sized>(
    state: &StateVector,
    h: &PauliSum,
    p_j: &PauliString,
    n_shots: u64,
    rng: &mut R,
) -> Result<f64> {
    if h.n_qubits() != state.n_qubits() || p_j.n_qubits() != state.n_qubits() {
        return Err(Error::Dimension {
            expected: state.n_qubits(),
            found: if h.n_qubits() != state.n_qubits() {
                h.n_qubits()
            } else {
                p_j.n_qubits()
            },
        });
    }
    l1_sample_partial(&hp_imag_terms(state, h, p_j), n_shots, rng)
}

/// l1-sampled `⟨H⟩`, identity offset added back exactly.
pub fn l1_sample_energy<R: Rng + ?Sized>(
    state: &StateVector,
    h: &PauliSum,
    n_shots: u64,
    rng: &mut R,
) -> Result<f64> {
    if h.n_qubits() != state.n_qubits() {
        return Err(Error::Dimension {
            expected: state.n_qubits(),
            found: h.n_qubits(),
        });
    }
    if h.is_empty() {
        return Ok(h.constant());
    }
    let terms: Vec<(f64, f64)> = h
        .terms()
        .iter()
        .map(|&(c, p)| (c, state.expectation_unchecked(&p).re))
        .collect();
    Ok(h.constant() + l1_sample(&terms, n_shots, rng)?)
}

/// Sampled first-order normalisation `1 − 2Δt(⟨H⟩ − E₀)`, clamped at [`C_FLOOR`].
/// The flag reports whether the clamp fired.
pub fn estimate_c<R: Rng + ?Sized>(
    state: &StateVector,
    h: &PauliSum,
    dt: f64,
    n_shots: u64,
    rng: &mut R,
) -> Result<(f64, bool)> {
    if dt == 0.0 {
        return Ok((1.0, false));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let e = l1_sample_energy(state, h, n_shots, rng)?;
    let c = qite::first_order_c(e, h, dt);
    Ok(if c < C_FLOOR {
        (C_FLOOR, true)
    } else {
        (c, false)
    })
}

/// Optimal split of `total` shots between the initial measurement and `k`
/// commutator corrections. The rounding remainder goes to `n₀`.
pub fn allocate_observable_shots(k: usize, c_inf: f64, dt: f64, total: u64) -> Result<(u64, u64)> {
    if total < k as u64 + 1 {
        return Err(Error::Allocation(format!(
            "{total} shots cannot cover {} measurements",
            k + 1
        )));
    }
    if !(c_inf >= 0.0 && dt >= 0.0) {
        return Err(Error::Allocation("‖c‖∞ and dt must be non-negative".into()));
    }
    if k == 0 {
        return Ok((total, 0));
    }
    let x = c_inf * dt;
    let n_s = ((total as f64 * x / (k as f64 * x + 1.0)).floor() as u64).max(1);
    let n_0 = total - k as u64 * n_s;
    Ok((n_0, n_s))
}

/// Shot totals guaranteeing `Var(a) ≤ ε²` to leading order.
#[allow(clippy::too_many_arguments)]
pub fn allocate_linear_system_shots(
    nu: usize,
    b_inf: f64,
    s_tilde_inv_frobenius: f64,
    h_l1: f64,
    c: f64,
    dt: f64,
    epsilon: f64,
    n_shots_observable: u64,
) -> Result<ShotPlan> {
    if !(epsilon > 0.0) {
        return Err(Error::Allocation(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if nu == 0 || !(c > 0.0) {
        return Err(Error::Allocation("need ν ≥ 1 and c > 0".into()));
    }
    for v in [b_inf, s_tilde_inv_frobenius, h_l1, dt] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Allocation(format!("invalid budget input {v}")));
        }
    }
    let nu = nu as f64;
    let f2 = s_tilde_inv_frobenius.powi(2);
    let pre = 3.0 / (epsilon * epsilon);
    let count = |x: f64| (x.ceil() as u64).max(1);
    Ok(ShotPlan {
        n_shots_s: count(pre * nu * nu * b_inf * b_inf * f2 * f2),
        n_shots_b: count(pre * nu / c * h_l1 * h_l1 * f2),
        n_shots_c: count(pre * dt * dt / c.powi(3) * h_l1 * h_l1 * f2),
        n_shots_observable: n_shots_observable.max(1),
        epsilon,
    })
}

/// Shot plan for the current state: derived from `settings.epsilon` when set,
/// otherwise the fixed totals.
pub fn plan_for_state(
    exact: &LinearSystem,
    h: &PauliSum,
    dt: f64,
    threshold: f64,
    settings: &ShotSettings,
) -> Result<ShotPlan> {
    match settings.epsilon {
        Some(eps) => {
            let b_inf = exact.b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let pinv_f = qite::pseudo_inverse_frobenius(&exact.s, threshold);
            allocate_linear_system_shots(
                exact.s.nrows(),
                b_inf,
                pinv_f,
                h.l1_norm(),
                exact.c,
                dt,
                eps,
                settings.n_shots_observable,
            )
        }
        None => Ok(ShotPlan {
            n_shots_s: settings.n_shots_s.max(1),
            n_shots_b: settings.n_shots_b.max(1),
            n_shots_c: settings.n_shots_c.max(1),
            n_shots_observable: settings.n_shots_observable.max(1),
            epsilon: f64::NAN,
        }),
    }
}

/// Samples `S`, `b̄` and `c` under `plan`. Entries of `S` whose Pauli product is
/// anti-Hermitian have zero real part and are not measured.
pub fn sample_linear_system_with_plan<R: Rng + ?Sized>(
    state: &StateVector,
    pool: &OperatorPool,
    h: &PauliSum,
    dt: f64,
    plan: &ShotPlan,
    rng: &mut R,
) -> Result<(LinearSystem, bool)> {
    let nu = pool.len();
    let ps = pool.paulis();
    let images = qite::pool_images(state, pool);
    let s_exact = qite::gram_matrix(&images);
    let n_s = plan.per_element_s(nu);
    let mut s = DMatrix::identity(nu, nu);
    for i in 0..nu {
        for j in 0..i {
            if ps[i].commutes_unchecked(&ps[j]) {
                let v = sample_from_expectation(s_exact[(i, j)], n_s, rng);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
    }
    let (c, clamped) = if h.is_empty() {
        (1.0, false)
    } else {
        estimate_c(state, h, dt, plan.n_shots_c, rng)?
    };
    let n_b = plan.per_element_b(nu);
    let scale = 1.0 / c.sqrt();
    let mut b = DVector::zeros(nu);
    if !h.is_empty() {
        for (j, p) in ps.iter().enumerate() {
            b[j] = scale * l1_sample_partial(&hp_imag_terms(state, h, p), n_b, rng)?;
        }
    }
    Ok((LinearSystem::new(s, b, c), clamped))
}

/// Sampled linear system for a trajectory step; the boolean reports a clamped `c`.
pub fn sample_linear_system<R: Rng + ?Sized>(
    state: &StateVector,
    pool: &OperatorPool,
    h: &PauliSum,
    dt: f64,
    threshold: f64,
    settings: &ShotSettings,
    rng: &mut R,
) -> Result<(LinearSystem, bool)> {
    let plan = if settings.epsilon.is_some() {
        let exact = qite::build_linear_system(state, pool, h, dt, false)?;
        plan_for_state(&exact, h, dt, threshold, settings)?
    } else {
        plan_for_state(
            &LinearSystem::new(DMatrix::zeros(0, 0), DVector::zeros(0), 1.0),
            h,
            dt,
            threshold,
            settings,
        )?
    };
    sample_linear_system_with_plan(state, pool, h, dt, &plan, rng)
}

/// `Σ_l o_l Im⟨P O_l⟩` over the terms anticommuting with `P`, as `(o_l, Im⟨P O_l⟩)` pairs.
fn commutator_terms(state: &StateVector, o: &PauliSum, p: &PauliString) -> Vec<(f64, f64)> {
    o.terms()
        .iter()
        .filter(|(_, ol)| !p.commutes_unchecked(ol))
        .map(|&(c, ol)| (c, state.expectation_unchecked(&p.mul_unchecked(&ol)).im))
        .collect()
}

/// First-order change of `⟨O⟩` under `|ψ⟩ → e^{iθP}|ψ⟩`, i.e. `−iθ⟨[P, O]⟩`.
///
/// With `[P, O] = Σ 2 o_l P O_l` over anticommuting terms, this is
/// `2θ Σ o_l Im⟨P O_l⟩`. `n_shots = None` evaluates it exactly.
pub fn commutator_correction<R: Rng + ?Sized>(
    state: &StateVector,
    o: &PauliSum,
    p: &PauliString,
    theta: f64,
    n_shots: Option<u64>,
    rng: &mut R,
) -> Result<f64> {
    if o.n_qubits() != state.n_qubits() || p.n_qubits() != state.n_qubits() {
        return Err(Error::Dimension {
            expected: state.n_qubits(),
            found: p.n_qubits(),
        });
    }
    let terms = commutator_terms(state, o, p);
    if terms.is_empty() {
        return Ok(0.0);
    }
    let m = match n_shots {
        None => terms.iter().map(|(w, e)| w * e).sum(),
        Some(n) => l1_sample(&terms, n, rng)?,
    };
    Ok(2.0 * theta * m)
}

/// Estimates `⟨O⟩` along a single-rotation trajectory by accumulating commutator
/// corrections from the last full measurement, re-anchoring every `gamma` steps.
#[derive(Debug, Clone)]
pub struct ReducedObservableTracker {
    observable: PauliSum,
    base_estimate: f64,
    correction_sum: f64,
    gamma: usize,
    step: usize,
    mode: ShotMode,
    n_base: u64,
    n_correction: u64,
}

impl ReducedObservableTracker {
    /// Measures the initial value. In sampled mode `n_shots` serves both the base
    /// and the correction measurements unless [`Self::with_correction_shots`] is used.
    pub fn new<R: Rng + ?Sized>(
        observable: PauliSum,
        gamma: usize,
        state: &StateVector,
        mode: ShotMode,
        n_shots: u64,
        rng: &mut R,
    ) -> Result<Self> {
        if gamma == 0 {
            return Err(Error::Config("gamma must be at least 1".into()));
        }
        let mut t = Self {
            observable,
            base_estimate: 0.0,
            correction_sum: 0.0,
            gamma,
            step: 0,
            mode,
            n_base: n_shots.max(1),
            n_correction: n_shots.max(1),
        };
        t.base_estimate = t.measure(state, rng)?;
        Ok(t)
    }

    pub fn with_correction_shots(mut self, n: u64) -> Self {
        self.n_correction = n.max(1);
        self
    }

    pub fn gamma(&self) -> usize {
        self.gamma
    }

    pub fn base_estimate(&self) -> f64 {
        self.base_estimate
    }

    pub fn correction_sum(&self) -> f64 {
        self.correction_sum
    }

    pub fn estimate(&self) -> f64 {
        self.base_estimate + self.correction_sum
    }

    fn shots(&self, n: u64) -> Option<u64> {
        match self.mode {
            ShotMode::Exact => None,
            ShotMode::Sampled => Some(n),
        }
    }

    fn measure<R: Rng + ?Sized>(&self, state: &StateVector, rng: &mut R) -> Result<f64> {
        match self.shots(self.n_base) {
            None => state.expectation_sum(&self.observable),
            Some(n) => l1_sample_energy(state, &self.observable, n, rng),
        }
    }

    /// Records step `k`, which rotated `before` by `e^{iθP}` into `after`.
    /// Steps that are multiples of `gamma` re-measure on `after`.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        k: usize,
        before: &StateVector,
        after: &StateVector,
        p: &PauliString,
        theta: f64,
        rng: &mut R,
    ) -> Result<f64> {
        self.step = k;
        if k.is_multiple_of(self.gamma) {
            self.base_estimate = self.measure(after, rng)?;
            self.correction_sum = 0.0;
        } else {
            let n = self.shots(self.n_correction);
            self.correction_sum +=
                commutator_correction(before, &self.observable, p, theta, n, rng)?;
        }
        Ok(self.estimate())
    }
}
