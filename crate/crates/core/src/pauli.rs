//! Pauli strings in symplectic form and weighted sums of them.
//!
//! A [`PauliString`] stores an X mask, a Z mask and a quarter-phase exponent so
//! that the operator is `i^phase · ⊗_q σ(x_q, z_q)` with `σ(1,1) = Y`. Qubit 0 is
//! the least-significant bit of a basis-state index.
//!
//! Internally every product is evaluated through the factorisation
//! `σ(x, z) = i^{|x∧z|} X^x Z^z`, for which
//! `X^{x1} Z^{z1} X^{x2} Z^{z2} = (-1)^{|z1∧x2|} X^{x1⊕x2} Z^{z1⊕z2}`.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest register for which dense matrices are built unless a caller raises it.
pub const DEFAULT_ORACLE_CAP: usize = 10;

/// Coefficients below this magnitude are dropped when a [`PauliSum`] is canonicalised.
pub const COEFF_EPS: f64 = 1e-14;

const I_POW: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

/// `i^k` for any integer `k`.
#[inline]
pub fn i_pow(k: u32) -> Complex64 {
    I_POW[(k & 3) as usize]
}

/// Single-qubit Pauli label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
    phase: u8,
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > 64 {
        Err(Error::QubitCount(n))
    } else {
        Ok(())
    }
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Result<Self> {
        Self::from_masks(n_qubits, 0, 0, 0)
    }

    /// Builds a string from raw masks; bits above `n_qubits` are rejected.
    pub fn from_masks(n_qubits: usize, x: u64, z: u64, phase: u8) -> Result<Self> {
        check_qubits(n_qubits)?;
        let extra = (x | z) & !full_mask(n_qubits);
        if extra != 0 {
            return Err(Error::IndexOutOfRange {
                index: 63 - extra.leading_zeros() as usize,
                n_qubits,
            });
        }
        Ok(Self {
            n_qubits,
            x,
            z,
            phase: phase & 3,
        })
    }

    /// A single-qubit operator `pauli` acting on `qubit`.
    pub fn single(n_qubits: usize, qubit: usize, pauli: Pauli) -> Result<Self> {
        Self::from_paulis(n_qubits, &[(qubit, pauli)])
    }

    /// Builds a phase-free string from `(qubit, pauli)` pairs. Repeated qubits are an error.
    pub fn from_paulis(n_qubits: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        check_qubits(n_qubits)?;
        let (mut x, mut z, mut seen) = (0u64, 0u64, 0u64);
        for &(q, p) in ops {
            if q >= n_qubits {
                return Err(Error::IndexOutOfRange { index: q, n_qubits });
            }
            if seen >> q & 1 == 1 {
                return Err(Error::PauliToken {
                    token: format!("duplicate qubit {q}"),
                });
            }
            seen |= 1 << q;
            let (xb, zb) = p.bits();
            x |= (xb as u64) << q;
            z |= (zb as u64) << q;
        }
        Ok(Self {
            n_qubits,
            x,
            z,
            phase: 0,
        })
    }

    /// Parses the `"X0 Z2 Y5"` rendering. An optional leading phase token
    /// (`+`, `-`, `i`, `+i`, `-i`) is accepted, `"I"` is the identity.
    pub fn parse(text: &str, n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let mut tokens = text.split_whitespace().peekable();
        let mut phase = 0u8;
        if let Some(&first) = tokens.peek() {
            let p = match first {
                "+" => Some(0),
                "i" | "+i" => Some(1),
                "-" => Some(2),
                "-i" => Some(3),
                _ => None,
            };
            if let Some(p) = p {
                phase = p;
                tokens.next();
            }
        }
        let mut ops = Vec::new();
        let mut any = false;
        for tok in tokens {
            any = true;
            if tok == "I" {
                continue;
            }
            let mut chars = tok.chars();
            let bad = || Error::PauliToken {
                token: tok.to_string(),
            };
            let pauli = chars.next().and_then(Pauli::from_char).ok_or_else(bad)?;
            let digits = chars.as_str();
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let q: usize = digits.parse().map_err(|_| bad())?;
            if q >= n_qubits {
                return Err(Error::IndexOutOfRange { index: q, n_qubits });
            }
            if pauli != Pauli::I {
                ops.push((q, pauli));
            }
        }
        if !any {
            return Err(Error::PauliToken {
                token: text.to_string(),
            });
        }
        let mut p = Self::from_paulis(n_qubits, &ops)?;
        p.phase = phase;
        Ok(p)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn phase_exp(&self) -> u8 {
        self.phase
    }

    /// Qubits acted on non-trivially.
    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn weight(&self) -> u32 {
        self.support().count_ones()
    }

    pub fn is_identity(&self) -> bool {
        self.support() == 0
    }

    /// Hermitian iff the phase is real (±1).
    pub fn is_hermitian(&self) -> bool {
        self.phase.is_multiple_of(2)
    }

    /// Number of Y factors.
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Copy with the phase reset to `+1`.
    pub fn without_phase(&self) -> Self {
        Self { phase: 0, ..*self }
    }

    pub fn with_phase(&self, phase: u8) -> Self {
        Self {
            phase: phase & 3,
            ..*self
        }
    }

    pub fn pauli_at(&self, q: usize) -> Pauli {
        match (self.x >> q & 1, self.z >> q & 1) {
            (0, 0) => Pauli::I,
            (1, 0) => Pauli::X,
            (1, 1) => Pauli::Y,
            _ => Pauli::Z,
        }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            Err(Error::Dimension {
                expected: self.n_qubits,
                found: other.n_qubits,
            })
        } else {
            Ok(())
        }
    }

    /// Operator product `self · other`, phases included.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.mul_unchecked(other))
    }

    #[inline]
    pub(crate) fn mul_unchecked(&self, other: &Self) -> Self {
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let phase = self.phase as u32
            + other.phase as u32
            + self.y_count()
            + other.y_count()
            + 2 * (self.z & other.x).count_ones()
            + 4
            - (x & z).count_ones() % 4;
        Self {
            n_qubits: self.n_qubits,
            x,
            z,
            phase: (phase & 3) as u8,
        }
    }

    pub fn commutes(&self, other: &Self) -> Result<bool> {
        self.check_same(other)?;
        Ok(self.commutes_unchecked(other))
    }

    #[inline]
    pub(crate) fn commutes_unchecked(&self, other: &Self) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    /// Amplitude factor `f(k)` with `P|k⟩ = f(k)|k ⊕ x⟩`.
    #[inline]
    pub fn action_phase(&self, k: usize) -> Complex64 {
        let sign = 2 * ((self.z & k as u64).count_ones() & 1);
        i_pow(self.phase as u32 + self.y_count() + sign)
    }

    /// Dense `2^n × 2^n` matrix, refused above [`DEFAULT_ORACLE_CAP`] qubits.
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        self.to_dense_capped(DEFAULT_ORACLE_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<DMatrix<Complex64>> {
        if self.n_qubits > cap {
            return Err(Error::OracleSize {
                n_qubits: self.n_qubits,
                cap,
            });
        }
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            m[(k ^ self.x as usize, k)] = self.action_phase(k);
        }
        Ok(m)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = ["", "i ", "- ", "-i "][self.phase as usize];
        f.write_str(prefix)?;
        if self.is_identity() {
            return f.write_str("I");
        }
        let mut first = true;
        for q in 0..self.n_qubits {
            let c = match self.pauli_at(q) {
                Pauli::I => continue,
                Pauli::X => 'X',
                Pauli::Y => 'Y',
                Pauli::Z => 'Z',
            };
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{c}{q}")?;
        }
        Ok(())
    }
}

/// `constant · I + Σ_l h_l · H_l` with real coefficients and phase-free strings.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
    constant: f64,
}

impl PauliSum {
    pub fn new(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        Ok(Self {
            n_qubits,
            terms: Vec::new(),
            constant: 0.0,
        })
    }

    /// Builds a canonical sum from raw terms.
    pub fn from_terms(
        n_qubits: usize,
        constant: f64,
        terms: impl IntoIterator<Item = (f64, PauliString)>,
    ) -> Result<Self> {
        let mut s = Self::new(n_qubits)?;
        s.constant = constant;
        for (c, p) in terms {
            s.push(c, p)?;
        }
        s.canonicalize();
        Ok(s)
    }

    /// Appends a term without merging; call [`canonicalize`](Self::canonicalize) afterwards.
    /// A `-1` phase is folded into the coefficient and identity strings go to the constant.
    pub fn push(&mut self, coeff: f64, p: PauliString) -> Result<()> {
        if p.n_qubits() != self.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                found: p.n_qubits(),
            });
        }
        if !p.is_hermitian() {
            return Err(Error::NonHermitian(p.phase_exp()));
        }
        let c = if p.phase_exp() == 2 { -coeff } else { coeff };
        if p.is_identity() {
            self.constant += c;
        } else {
            self.terms.push((c, p.without_phase()));
        }
        Ok(())
    }

    /// Merges duplicate strings into their first occurrence and drops
    /// coefficients below [`COEFF_EPS`].
    pub fn canonicalize(&mut self) {
        let mut index: HashMap<(u64, u64), usize> = HashMap::with_capacity(self.terms.len());
        let mut merged: Vec<(f64, PauliString)> = Vec::with_capacity(self.terms.len());
        for &(c, p) in &self.terms {
            match index.get(&(p.x_mask(), p.z_mask())) {
                Some(&i) => merged[i].0 += c,
                None => {
                    index.insert((p.x_mask(), p.z_mask()), merged.len());
                    merged.push((c, p));
                }
            }
        }
        merged.retain(|(c, _)| c.abs() >= COEFF_EPS);
        self.terms = merged;
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Σ_l |h_l|`, identity offset excluded.
    pub fn l1_norm(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    /// Same operator without the identity offset.
    pub fn traceless(&self) -> Self {
        Self {
            constant: 0.0,
            ..self.clone()
        }
    }

    /// Whether every term is a real matrix (even number of Y factors).
    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|(_, p)| p.y_count() % 2 == 0)
    }

    /// `H|ψ⟩` for a raw amplitude slice of length `2^n`.
    pub fn apply(&self, amps: &[Complex64]) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = amps.iter().map(|a| a * self.constant).collect();
        for &(c, p) in &self.terms {
            let x = p.x_mask() as usize;
            for (k, a) in amps.iter().enumerate() {
                out[k ^ x] += *a * p.action_phase(k) * c;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        self.to_dense_capped(DEFAULT_ORACLE_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<DMatrix<Complex64>> {
        if self.n_qubits > cap {
            return Err(Error::OracleSize {
                n_qubits: self.n_qubits,
                cap,
            });
        }
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::<Complex64>::identity(dim, dim) * Complex64::from(self.constant);
        for &(c, p) in &self.terms {
            for k in 0..dim {
                m[(k ^ p.x_mask() as usize, k)] += p.action_phase(k) * c;
            }
        }
        Ok(m)
    }

    /// Real symmetric dense matrix; `None` when some term is imaginary.
    pub fn to_dense_real_capped(&self, cap: usize) -> Result<Option<DMatrix<f64>>> {
        if self.n_qubits > cap {
            return Err(Error::OracleSize {
                n_qubits: self.n_qubits,
                cap,
            });
        }
        if !self.is_real() {
            return Ok(None);
        }
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::<f64>::identity(dim, dim) * self.constant;
        for &(c, p) in &self.terms {
            for k in 0..dim {
                m[(k ^ p.x_mask() as usize, k)] += p.action_phase(k).re * c;
            }
        }
        Ok(Some(m))
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.constant)?;
        for (c, p) in &self.terms {
            write!(f, " + {c}·[{p}]")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str, n: usize) -> PauliString {
        PauliString::parse(s, n).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_qubit_table() {
        let x = p("X0", 1);
        assert_eq!(x.multiply(&x).unwrap(), PauliString::identity(1).unwrap());
        let r = x.multiply(&p("Y0", 1)).unwrap();
        assert_eq!(r.without_phase(), p("Z0", 1));
        assert_eq!(r.phase_exp(), 1);
        let r = p("Y0", 1).multiply(&x).unwrap();
        assert_eq!(r.phase_exp(), 3);
        let r = p("Z0", 1).multiply(&x).unwrap();
        assert_eq!((r.without_phase(), r.phase_exp()), (p("Y0", 1), 1));
    }

    #[test]
    fn two_qubit_product_matches_dense() {
        let a = p("X0 Z1", 2);
        let b = p("Y0 Z1", 2);
        let r = a.multiply(&b).unwrap();
        assert_eq!(r.without_phase(), p("Z0", 2));
        assert_eq!(r.phase_exp(), 1);
        let dense = a.to_dense().unwrap() * b.to_dense().unwrap();
        assert!((dense - r.to_dense().unwrap()).norm() < 1e-12);
    }

    #[test]
    fn commutation() {
        assert!(p("X0", 1).commutes(&p("X0", 1)).unwrap());
        assert!(!p("X0", 1).commutes(&p("Z0", 1)).unwrap());
        assert!(p("X0 X1", 2).commutes(&p("Z0 Z1", 2)).unwrap());
    }

    #[test]
    fn mismatched_dimensions() {
        let e = p("X0", 1).multiply(&p("X0", 2)).unwrap_err();
        assert!(matches!(e, Error::Dimension { .. }));
        assert!(p("X0", 1).commutes(&p("X0", 2)).is_err());
    }

    #[test]
    fn dense_basics() {
        let z = p("Z0", 1).to_dense().unwrap();
        assert_eq!(z[(0, 0)], c(1.0, 0.0));
        assert_eq!(z[(1, 1)], c(-1.0, 0.0));
        let id = p("I", 1).to_dense().unwrap();
        assert_eq!(id, DMatrix::identity(2, 2));
        let s = PauliSum::from_terms(1, 0.0, [(0.5, p("X0", 1)), (0.5, p("Z0", 1))]).unwrap();
        let m = s.to_dense().unwrap();
        let want =
            DMatrix::from_row_slice(2, 2, &[c(0.5, 0.), c(0.5, 0.), c(0.5, 0.), c(-0.5, 0.)]);
        assert!((m - want).norm() < 1e-15);
    }

    #[test]
    fn dense_cap_enforced() {
        let big = PauliString::identity(11).unwrap();
        assert!(matches!(big.to_dense(), Err(Error::OracleSize { .. })));
        assert!(big.to_dense_capped(11).is_ok());
    }

    #[test]
    fn render_and_parse_round_trip() {
        for s in ["X0 Z2 Y5", "I", "-i X1 Y3", "i Z0", "- Y2"] {
            let q = p(s, 6);
            assert_eq!(q.to_string(), s);
        }
        assert_eq!(p("+ Z0 I3", 4).to_string(), "Z0");
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            PauliString::parse("W3", 4),
            Err(Error::PauliToken { .. })
        ));
        assert!(matches!(
            PauliString::parse("X9", 4),
            Err(Error::IndexOutOfRange { index: 9, .. })
        ));
        assert!(PauliString::parse("X1 Z1", 4).is_err());
        assert!(PauliString::parse("X", 4).is_err());
        assert!(PauliString::parse("", 4).is_err());
    }

    #[test]
    fn sum_canonicalization() {
        let s = PauliSum::from_terms(
            2,
            1.0,
            [
                (0.25, p("X0", 2)),
                (0.5, p("Z1", 2)),
                (0.75, p("X0", 2)),
                (1e-16, p("Y1", 2)),
                (2.0, p("I", 2)),
                (0.5, p("- Z0", 2)),
            ],
        )
        .unwrap();
        assert_eq!(s.constant(), 3.0);
        assert_eq!(s.terms().len(), 3);
        assert_eq!(s.terms()[0], (1.0, p("X0", 2)));
        assert_eq!(s.terms()[2], (-0.5, p("Z0", 2)));
        assert!((s.l1_norm() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_hermitian_terms() {
        let mut s = PauliSum::new(1).unwrap();
        assert!(matches!(
            s.push(1.0, p("i Z0", 1)),
            Err(Error::NonHermitian(1))
        ));
    }

    #[test]
    fn apply_matches_dense() {
        let s = PauliSum::from_terms(
            2,
            0.3,
            [
                (0.7, p("X0 Y1", 2)),
                (-0.2, p("Z0", 2)),
                (0.1, p("Y0 Y1", 2)),
            ],
        )
        .unwrap();
        let v: Vec<Complex64> = (0..4).map(|k| c(k as f64 + 1.0, 0.5 - k as f64)).collect();
        let got = s.apply(&v);
        let want = s.to_dense().unwrap() * nalgebra::DVector::from_vec(v);
        for k in 0..4 {
            assert!((got[k] - want[k]).norm() < 1e-13);
        }
    }
}
