//! WebAssembly bindings behind `www/index.html`.
//!
//! The three bundled problems are small enough to evolve interactively.

use qite_core::analysis::{drift_channel_error, spectrum_along_run};
use qite_core::ham_io::ProblemDocument;
use qite_core::qite::{build_linear_system, run_trajectory, solve_truncated};
use qite_core::statevector::exact_diagonalize;
use qite_core::{Method, OperatorPool, PauliSum, QiteConfig, StateVector};
use wasm_bindgen::prelude::*;

const PROBLEMS: [(&str, &str); 3] = [
    ("h2", include_str!("../../../fixtures/h2_0.74.json")),
    ("h4_1.00", include_str!("../../../fixtures/h4_1.00.json")),
    ("h4_2.00", include_str!("../../../fixtures/h4_2.00.json")),
];

const MAX_STEPS: usize = 2000;

struct Problem {
    h: PauliSum,
    pool: OperatorPool,
    reference: StateVector,
}

fn problem(name: &str) -> Result<Problem, String> {
    let (_, text) = PROBLEMS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| format!("unknown problem `{name}`"))?;
    let doc = ProblemDocument::parse(text).map_err(|e| e.to_string())?;
    Ok(Problem {
        h: doc.hamiltonian().map_err(|e| e.to_string())?,
        pool: doc
            .pool()
            .map_err(|e| e.to_string())?
            .ok_or("bundled problem has no pool")?,
        reference: doc.reference().map_err(|e| e.to_string())?,
    })
}

fn method(name: &str) -> Result<Method, String> {
    Ok(match name {
        "ite" => Method::ExactIte,
        "qite" => Method::FullQite,
        "drift" => Method::DriftSinglePath,
        "deterministic" => Method::Deterministic,
        _ => return Err(format!("unknown method `{name}`")),
    })
}

pub fn problem_names() -> Vec<&'static str> {
    PROBLEMS.iter().map(|(n, _)| *n).collect()
}

pub fn ground_energy(name: &str) -> Result<f64, String> {
    let p = problem(name)?;
    Ok(exact_diagonalize(&p.h).map_err(|e| e.to_string())?.0)
}

/// Energy after every step, starting from the reference state.
pub fn energy_curve(
    name: &str,
    method_name: &str,
    dt: f64,
    steps: usize,
    threshold: f64,
    seed: u64,
) -> Result<Vec<f64>, String> {
    if steps > MAX_STEPS {
        return Err(format!("at most {MAX_STEPS} steps in the browser"));
    }
    let p = problem(name)?;
    let cfg = QiteConfig {
        dt,
        n_steps: steps,
        truncation_threshold: threshold,
        method: method(method_name)?,
        seed,
        ..QiteConfig::default()
    };
    let run = run_trajectory(&p.h, &p.pool, &p.reference, &cfg).map_err(|e| e.to_string())?;
    Ok(run.records.iter().map(|r| r.energy).collect())
}

/// Singular values of `S` after `step` full-QITE steps, descending.
pub fn spectrum(name: &str, step: usize, dt: f64, threshold: f64) -> Result<Vec<f64>, String> {
    if step > MAX_STEPS {
        return Err(format!("at most {MAX_STEPS} steps in the browser"));
    }
    let p = problem(name)?;
    let cfg = QiteConfig {
        dt,
        n_steps: step,
        truncation_threshold: threshold,
        method: Method::FullQite,
        ..QiteConfig::default()
    };
    let rep = spectrum_along_run(&p.h, &p.pool, &p.reference, &cfg, Some(step))
        .map_err(|e| e.to_string())?;
    Ok(rep.singular_values)
}

/// For each `dt`: the drift channel's distance from the exact step on H₂, then the
/// `(‖a‖₁Δt)²` scale it should follow.
pub fn channel_error(dts: &[f64]) -> Result<Vec<f64>, String> {
    let p = problem("h2")?;
    let sys =
        build_linear_system(&p.reference, &p.pool, &p.h, 0.01, true).map_err(|e| e.to_string())?;
    let a = solve_truncated(&sys, 1e-12).map_err(|e| e.to_string())?.a;
    let mut out = Vec::with_capacity(2 * dts.len());
    for &dt in dts {
        let e = drift_channel_error(&a, &p.pool, dt, 4).map_err(|e| e.to_string())?;
        out.push(e.channel);
        out.push(e.bound);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = problemNames)]
pub fn problem_names_js() -> Vec<String> {
    problem_names().into_iter().map(String::from).collect()
}

#[wasm_bindgen(js_name = groundEnergy)]
pub fn ground_energy_js(name: &str) -> Result<f64, JsError> {
    ground_energy(name).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = energyCurve)]
pub fn energy_curve_js(
    name: &str,
    method_name: &str,
    dt: f64,
    steps: usize,
    threshold: f64,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    energy_curve(name, method_name, dt, steps, threshold, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = singularValues)]
pub fn spectrum_js(name: &str, step: usize, dt: f64, threshold: f64) -> Result<Vec<f64>, JsError> {
    spectrum(name, step, dt, threshold).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = channelError)]
pub fn channel_error_js(dts: Vec<f64>) -> Result<Vec<f64>, JsError> {
    channel_error(&dts).map_err(|e| JsError::new(&e))
}
