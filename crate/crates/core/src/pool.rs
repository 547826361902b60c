//! Operator pools: the Pauli strings allowed in the QITE generator.
//!
//! Generated pools are the Jordan–Wigner images of spin-conserving UCCSD
//! excitation generators `T − T†`. Spin orbitals are interleaved (α on even
//! qubits, β on odd) and the reference occupies the lowest `n_electrons` qubits.

use std::collections::{HashMap, HashSet};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{PauliString, COEFF_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolSource {
    File,
    UccsdGenerated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorPool {
    n_qubits: usize,
    paulis: Vec<PauliString>,
    source: PoolSource,
}

impl OperatorPool {
    /// Validates and deduplicates (first occurrence wins). Identity strings and
    /// strings carrying a phase are rejected.
    pub fn new(n_qubits: usize, paulis: Vec<PauliString>, source: PoolSource) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(paulis.len());
        for p in paulis {
            if p.n_qubits() != n_qubits {
                return Err(Error::Dimension {
                    expected: n_qubits,
                    found: p.n_qubits(),
                });
            }
            if p.phase_exp() != 0 {
                return Err(Error::NonHermitian(p.phase_exp()));
            }
            if p.is_identity() {
                return Err(Error::Config("identity string in operator pool".into()));
            }
            if seen.insert((p.x_mask(), p.z_mask())) {
                out.push(p);
            }
        }
        if out.is_empty() {
            return Err(Error::Config("operator pool is empty".into()));
        }
        Ok(Self {
            n_qubits,
            paulis: out,
            source,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn paulis(&self) -> &[PauliString] {
        &self.paulis
    }

    pub fn len(&self) -> usize {
        self.paulis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paulis.is_empty()
    }

    pub fn source(&self) -> PoolSource {
        self.source
    }
}

/// Parses a pool block (list of rendered Pauli strings).
pub fn load_pool<S: AsRef<str>>(n_qubits: usize, strings: &[S]) -> Result<OperatorPool> {
    let paulis = strings
        .iter()
        .map(|s| PauliString::parse(s.as_ref(), n_qubits))
        .collect::<Result<Vec<_>>>()?;
    OperatorPool::new(n_qubits, paulis, PoolSource::File)
}

/// Fermionic operator expanded into Pauli strings with complex weights.
type QubitOp = HashMap<(u64, u64), Complex64>;

fn ladder(n: usize, j: usize, dagger: bool) -> Vec<(Complex64, PauliString)> {
    let chain = (1u64 << j) - 1;
    let x = PauliString::from_masks(n, 1 << j, chain, 0).expect("index checked by caller");
    let y = PauliString::from_masks(n, 1 << j, chain | 1 << j, 0).expect("index checked");
    let yc = if dagger { -0.5 } else { 0.5 };
    vec![(Complex64::new(0.5, 0.0), x), (Complex64::new(0.0, yc), y)]
}

/// Jordan–Wigner image of a product of ladder operators `(mode, is_creation)`.
fn jordan_wigner_product(n: usize, ops: &[(usize, bool)]) -> QubitOp {
    let id = PauliString::identity(n).expect("valid register");
    let mut acc = vec![(Complex64::new(1.0, 0.0), id)];
    for &(j, dag) in ops {
        let l = ladder(n, j, dag);
        let mut next: HashMap<(u64, u64), (Complex64, PauliString)> = HashMap::new();
        for (ca, pa) in &acc {
            for (cb, pb) in &l {
                let r = pa.mul_unchecked(pb);
                let w = ca * cb * crate::pauli::i_pow(r.phase_exp() as u32);
                let e = next
                    .entry((r.x_mask(), r.z_mask()))
                    .or_insert((Complex64::new(0.0, 0.0), r.without_phase()));
                e.0 += w;
            }
        }
        acc = next
            .into_values()
            .filter(|(c, _)| c.norm() > COEFF_EPS)
            .collect();
    }
    acc.into_iter()
        .map(|(c, p)| ((p.x_mask(), p.z_mask()), c))
        .collect()
}

/// Pauli strings of the anti-Hermitian generator `T − T†`, sorted by rendering.
fn generator_strings(n: usize, excitation: &[(usize, bool)]) -> Vec<PauliString> {
    let t = jordan_wigner_product(n, excitation);
    let adjoint: Vec<(usize, bool)> = excitation.iter().rev().map(|&(j, d)| (j, !d)).collect();
    let td = jordan_wigner_product(n, &adjoint);
    let mut g = t;
    for (k, v) in td {
        *g.entry(k).or_insert(Complex64::new(0.0, 0.0)) -= v;
    }
    let mut out: Vec<PauliString> = g
        .into_iter()
        .filter(|(_, c)| c.norm() > 1e-12)
        .map(|((x, z), _)| PauliString::from_masks(n, x, z, 0).expect("masks within register"))
        .collect();
    out.sort_by_cached_key(|p| p.to_string());
    out
}

/// Spin-conserving UCCSD pool over `n_spin_orbitals` qubits with the lowest
/// `n_electrons` spin orbitals occupied.
pub fn build_uccsd_pool(n_spin_orbitals: usize, n_electrons: usize) -> Result<OperatorPool> {
    if n_electrons == 0 || n_electrons >= n_spin_orbitals {
        return Err(Error::Config(format!(
            "need 0 < n_electrons < n_spin_orbitals, got {n_electrons} electrons in {n_spin_orbitals} spin orbitals"
        )));
    }
    if n_spin_orbitals > 64 {
        return Err(Error::QubitCount(n_spin_orbitals));
    }
    let n = n_spin_orbitals;
    let spin = |k: usize| k % 2;
    let occ: Vec<usize> = (0..n_electrons).collect();
    let vir: Vec<usize> = (n_electrons..n).collect();
    let mut strings = Vec::new();
    for &i in &occ {
        for &a in &vir {
            if spin(i) == spin(a) {
                strings.extend(generator_strings(n, &[(a, true), (i, false)]));
            }
        }
    }
    for (ii, &i) in occ.iter().enumerate() {
        for &j in &occ[ii + 1..] {
            for (aa, &a) in vir.iter().enumerate() {
                for &b in &vir[aa + 1..] {
                    if spin(i) + spin(j) == spin(a) + spin(b) {
                        strings.extend(generator_strings(
                            n,
                            &[(b, true), (a, true), (j, false), (i, false)],
                        ));
                    }
                }
            }
        }
    }
    OperatorPool::new(n, strings, PoolSource::UccsdGenerated)
}
