//! Minimal pure-state simulator for registers of one to three qubits.
//!
//! # Qubit ordering
//!
//! Amplitude indices are little-endian: qubit `k` is bit `k` of the index.
//! Kets are written with qubit 0 first, so in a two-qubit register the
//! amplitude at index `a + 2b` belongs to `|a b⟩`. The same convention holds
//! for the sub-index a [`Unitary`] sees on its target list: `targets[0]` is
//! the least significant bit. Every module in the crate follows it.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use thiserror::Error;

pub type Amplitude = Complex64;

pub const MAX_QUBITS: usize = 3;
/// Tolerance for validity checks (normalization, unitarity, hermiticity).
pub const VALIDITY_TOL: f64 = 1e-9;
/// Tolerance for exact-algebra comparisons.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QStateError {
    #[error("register of {0} qubits is outside the supported range 1..={MAX_QUBITS}")]
    QubitCount(usize),
    #[error("expected {expected} entries, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("qubit index {index} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { index: usize, num_qubits: usize },
    #[error("qubit index {0} listed more than once")]
    DuplicateQubit(usize),
    #[error("state norm {0} deviates from 1")]
    NotNormalized(f64),
    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("density matrix trace {0} differs from 1")]
    BadTrace(f64),
    #[error("density matrix has negative eigenvalue {0:e}")]
    NotPositive(f64),
    #[error("measurement selected a zero-probability branch")]
    ZeroProbabilityBranch,
    #[error("partial trace needs a register of at least two qubits")]
    NothingToTrace,
}

pub type Result<T, E = QStateError> = std::result::Result<T, E>;

/// The four Bell states of a qubit pair `(x, y)`:
/// `ψ± = (|01⟩ ± |10⟩)/√2` and `φ± = (|00⟩ ± |11⟩)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellOutcome {
    PsiPlus,
    PsiMinus,
    PhiPlus,
    PhiMinus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::PsiPlus,
        BellOutcome::PsiMinus,
        BellOutcome::PhiPlus,
        BellOutcome::PhiMinus,
    ];

    /// Amplitudes over the pair sub-index `x + 2y`.
    fn pair_amplitudes(self) -> [Amplitude; 4] {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        match self {
            // |01⟩ is x=0,y=1 (index 2); |10⟩ is x=1,y=0 (index 1)
            BellOutcome::PsiPlus => [z, h, h, z],
            BellOutcome::PsiMinus => [z, -h, h, z],
            BellOutcome::PhiPlus => [h, z, z, h],
            BellOutcome::PhiMinus => [h, z, z, -h],
        }
    }
}

impl fmt::Display for BellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BellOutcome::PsiPlus => "psi+",
            BellOutcome::PsiMinus => "psi-",
            BellOutcome::PhiPlus => "phi+",
            BellOutcome::PhiMinus => "phi-",
        };
        f.write_str(s)
    }
}

/// Returns the named two-qubit Bell state.
pub fn make_bell(kind: BellOutcome) -> StateVector {
    StateVector {
        num_qubits: 2,
        amps: kind.pair_amplitudes().to_vec(),
    }
}

fn check_qubit(index: usize, num_qubits: usize) -> Result<()> {
    if index >= num_qubits {
        return Err(QStateError::QubitOutOfRange { index, num_qubits });
    }
    Ok(())
}

fn check_distinct(qubits: &[usize], num_qubits: usize) -> Result<()> {
    for (k, &q) in qubits.iter().enumerate() {
        check_qubit(q, num_qubits)?;
        if qubits[..k].contains(&q) {
            return Err(QStateError::DuplicateQubit(q));
        }
    }
    Ok(())
}

/// Splits a register into the selected qubits and the rest and maps
/// `(sub, rest)` index pairs back to full register indices.
struct Embedding {
    selected: Vec<usize>,
    rest: Vec<usize>,
}

impl Embedding {
    fn new(num_qubits: usize, selected: &[usize]) -> Self {
        let rest = (0..num_qubits).filter(|q| !selected.contains(q)).collect();
        Embedding {
            selected: selected.to_vec(),
            rest,
        }
    }

    fn sub_dim(&self) -> usize {
        1 << self.selected.len()
    }

    fn rest_dim(&self) -> usize {
        1 << self.rest.len()
    }

    fn index(&self, sub: usize, rest: usize) -> usize {
        let mut idx = 0;
        for (bit, &q) in self.selected.iter().enumerate() {
            idx |= ((sub >> bit) & 1) << q;
        }
        for (bit, &q) in self.rest.iter().enumerate() {
            idx |= ((rest >> bit) & 1) << q;
        }
        idx
    }
}

/// Picks an index from a discrete distribution with `u` uniform in `[0, 1)`.
fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_nonzero = k;
        }
        acc += p;
        if u < acc && p > 0.0 {
            return k;
        }
    }
    // rounding left u above the accumulated total
    last_nonzero
}

/// A normalized pure state of 1..=3 qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Amplitude>,
}

impl StateVector {
    pub fn new(num_qubits: usize, amps: Vec<Amplitude>) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(QStateError::QubitCount(num_qubits));
        }
        let expected = 1 << num_qubits;
        if amps.len() != expected {
            return Err(QStateError::DimensionMismatch {
                expected,
                actual: amps.len(),
            });
        }
        let state = StateVector { num_qubits, amps };
        let norm = state.norm();
        if (norm - 1.0).abs() > VALIDITY_TOL || !norm.is_finite() {
            return Err(QStateError::NotNormalized(norm));
        }
        Ok(state)
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(QStateError::QubitCount(num_qubits));
        }
        let dim = 1 << num_qubits;
        if index >= dim {
            return Err(QStateError::DimensionMismatch {
                expected: dim,
                actual: index + 1,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { num_qubits, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Amplitude> {
        if self.dim() != other.dim() {
            return Err(QStateError::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Largest entrywise amplitude difference.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `self ⊗ other`, with `other`'s qubits appended after this register's.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let n = self.num_qubits + other.num_qubits;
        if n > MAX_QUBITS {
            return Err(QStateError::QubitCount(n));
        }
        let lo = self.dim();
        let mut amps = vec![Complex64::new(0.0, 0.0); lo * other.dim()];
        for (j, b) in other.amps.iter().enumerate() {
            for (i, a) in self.amps.iter().enumerate() {
                amps[i + lo * j] = a * b;
            }
        }
        Ok(StateVector {
            num_qubits: n,
            amps,
        })
    }

    fn ensure_normalized(&self) -> Result<()> {
        let norm = self.norm();
        if (norm - 1.0).abs() > VALIDITY_TOL {
            return Err(QStateError::NotNormalized(norm));
        }
        Ok(())
    }

    /// Applies `u` on its target qubits, identity elsewhere.
    pub fn apply_unitary(&self, u: &Unitary) -> Result<StateVector> {
        check_distinct(&u.targets, self.num_qubits)?;
        let emb = Embedding::new(self.num_qubits, &u.targets);
        let sub_dim = emb.sub_dim();
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        let mut local = vec![Complex64::new(0.0, 0.0); sub_dim];
        for rest in 0..emb.rest_dim() {
            for (sub, slot) in local.iter_mut().enumerate() {
                *slot = self.amps[emb.index(sub, rest)];
            }
            for row in 0..sub_dim {
                let acc: Amplitude = (0..sub_dim)
                    .map(|col| u.entries[row * sub_dim + col] * local[col])
                    .sum();
                out[emb.index(row, rest)] = acc;
            }
        }
        Ok(StateVector {
            num_qubits: self.num_qubits,
            amps: out,
        })
    }

    /// Probability that measuring `qubit` in the computational basis yields 1.
    pub fn prob_one(&self, qubit: usize) -> Result<f64> {
        check_qubit(qubit, self.num_qubits)?;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(idx, _)| (idx >> qubit) & 1 == 1)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Projective measurement of `qubit` in the basis `{|0⟩, |1⟩}`.
    pub fn measure_z<R: Rng + ?Sized>(
        &self,
        qubit: usize,
        rng: &mut R,
    ) -> Result<(u8, StateVector)> {
        self.ensure_normalized()?;
        let p1 = self.prob_one(qubit)?;
        let probs = [1.0 - p1, p1];
        let outcome = sample_index(&probs, rng.random::<f64>());
        let p = probs[outcome];
        if p <= 0.0 {
            return Err(QStateError::ZeroProbabilityBranch);
        }
        let scale = 1.0 / p.sqrt();
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(idx, a)| {
                if (idx >> qubit) & 1 == outcome {
                    a * scale
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        Ok((
            outcome as u8,
            StateVector {
                num_qubits: self.num_qubits,
                amps,
            },
        ))
    }

    /// Projections of the state onto each Bell state of `pair`, as
    /// (probability, residual amplitudes of the remaining qubits).
    fn bell_components(&self, pair: (usize, usize)) -> Result<Vec<(f64, Vec<Amplitude>)>> {
        check_distinct(&[pair.0, pair.1], self.num_qubits)?;
        let emb = Embedding::new(self.num_qubits, &[pair.0, pair.1]);
        Ok(BellOutcome::ALL
            .iter()
            .map(|kind| {
                let bell = kind.pair_amplitudes();
                let residual: Vec<Amplitude> = (0..emb.rest_dim())
                    .map(|rest| {
                        (0..4)
                            .map(|sub| bell[sub].conj() * self.amps[emb.index(sub, rest)])
                            .sum()
                    })
                    .collect();
                let p = residual.iter().map(|a| a.norm_sqr()).sum();
                (p, residual)
            })
            .collect())
    }

    /// Born probabilities of the four Bell outcomes on `pair`, in
    /// [`BellOutcome::ALL`] order.
    pub fn bell_probabilities(&self, pair: (usize, usize)) -> Result<[f64; 4]> {
        let comps = self.bell_components(pair)?;
        let mut out = [0.0; 4];
        for (slot, (p, _)) in out.iter_mut().zip(comps) {
            *slot = p;
        }
        Ok(out)
    }

    /// Projective measurement of `pair` in the full Bell basis. `pair.0`
    /// plays the role of the first qubit in the Bell-state kets.
    pub fn bell_measure<R: Rng + ?Sized>(
        &self,
        pair: (usize, usize),
        rng: &mut R,
    ) -> Result<(BellOutcome, StateVector)> {
        self.ensure_normalized()?;
        let comps = self.bell_components(pair)?;
        let probs: Vec<f64> = comps.iter().map(|(p, _)| *p).collect();
        let k = sample_index(&probs, rng.random::<f64>());
        let (p, residual) = &comps[k];
        if *p <= 0.0 {
            return Err(QStateError::ZeroProbabilityBranch);
        }
        let kind = BellOutcome::ALL[k];
        let bell = kind.pair_amplitudes();
        let emb = Embedding::new(self.num_qubits, &[pair.0, pair.1]);
        let scale = 1.0 / p.sqrt();
        let mut amps = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (rest, r) in residual.iter().enumerate() {
            for (sub, b) in bell.iter().enumerate() {
                amps[emb.index(sub, rest)] = b * r * scale;
            }
        }
        Ok((
            kind,
            StateVector {
                num_qubits: self.num_qubits,
                amps,
            },
        ))
    }

    /// Reduced state of qubit `keep`, tracing out every other qubit.
    pub fn reduced_density(&self, keep: usize) -> Result<DensityMatrix> {
        if self.num_qubits < 2 {
            return Err(QStateError::NothingToTrace);
        }
        check_qubit(keep, self.num_qubits)?;
        let emb = Embedding::new(self.num_qubits, &[keep]);
        let mut entries = vec![Complex64::new(0.0, 0.0); 4];
        for rest in 0..emb.rest_dim() {
            for r in 0..2 {
                for c in 0..2 {
                    entries[r * 2 + c] +=
                        self.amps[emb.index(r, rest)] * self.amps[emb.index(c, rest)].conj();
                }
            }
        }
        DensityMatrix::new(2, entries)
    }
}

/// Free-function form of [`StateVector::apply_unitary`].
pub fn apply_unitary(s: &StateVector, u: &Unitary) -> Result<StateVector> {
    s.apply_unitary(u)
}

/// A unitary acting on an ordered list of target qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    dim: usize,
    /// Row-major.
    entries: Vec<Amplitude>,
    targets: Vec<usize>,
}

impl Unitary {
    pub fn new(entries: Vec<Amplitude>, targets: Vec<usize>) -> Result<Self> {
        if targets.is_empty() || targets.len() > MAX_QUBITS {
            return Err(QStateError::QubitCount(targets.len()));
        }
        let dim = 1 << targets.len();
        if entries.len() != dim * dim {
            return Err(QStateError::DimensionMismatch {
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        for (k, q) in targets.iter().enumerate() {
            if targets[..k].contains(q) {
                return Err(QStateError::DuplicateQubit(*q));
            }
        }
        let u = Unitary {
            dim,
            entries,
            targets,
        };
        let dev = u.unitarity_deviation();
        if dev.is_nan() || dev > VALIDITY_TOL {
            return Err(QStateError::NotUnitary(dev));
        }
        Ok(u)
    }

    pub fn identity(target: usize) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Unitary {
            dim: 2,
            entries: vec![one, zero, zero, one],
            targets: vec![target],
        }
    }

    pub fn pauli_z(target: usize) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Unitary {
            dim: 2,
            entries: vec![one, zero, zero, -one],
            targets: vec![target],
        }
    }

    pub fn pauli_x(target: usize) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Unitary {
            dim: 2,
            entries: vec![zero, one, one, zero],
            targets: vec![target],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Amplitude] {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> Amplitude {
        self.entries[row * self.dim + col]
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// `max |(U†U − 𝟙)_{rc}|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                let dot: Amplitude = (0..n)
                    .map(|k| self.entries[k * n + r].conj() * self.entries[k * n + c])
                    .sum();
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    /// Row-major.
    entries: Vec<Amplitude>,
}

impl DensityMatrix {
    pub fn new(dim: usize, entries: Vec<Amplitude>) -> Result<Self> {
        if entries.len() != dim * dim || dim == 0 {
            return Err(QStateError::DimensionMismatch {
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        let rho = DensityMatrix { dim, entries };
        let herm = rho.hermiticity_deviation();
        if herm.is_nan() || herm > VALIDITY_TOL {
            return Err(QStateError::NotHermitian(herm));
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > VALIDITY_TOL {
            return Err(QStateError::BadTrace(tr));
        }
        if let Some(&min) = rho.eigenvalues().last() {
            if min < -VALIDITY_TOL {
                return Err(QStateError::NotPositive(min));
            }
        }
        Ok(rho)
    }

    /// `|s⟩⟨s|`.
    pub fn from_pure(s: &StateVector) -> Self {
        let n = s.dim();
        let a = s.amplitudes();
        let mut entries = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                entries.push(a[r] * a[c].conj());
            }
        }
        DensityMatrix { dim: n, entries }
    }

    /// `Σ w_k |s_k⟩⟨s_k|` for nonnegative weights summing to one.
    pub fn from_ensemble(ensemble: &[(f64, StateVector)]) -> Result<Self> {
        let dim = ensemble.first().map(|(_, s)| s.dim()).unwrap_or(0);
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (w, s) in ensemble {
            if s.dim() != dim {
                return Err(QStateError::DimensionMismatch {
                    expected: dim,
                    actual: s.dim(),
                });
            }
            let pure = DensityMatrix::from_pure(s);
            for (e, p) in entries.iter_mut().zip(pure.entries) {
                *e += p * *w;
            }
        }
        DensityMatrix::new(dim, entries)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for k in 0..dim {
            entries[k * dim + k] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        DensityMatrix { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Amplitude] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Amplitude {
        self.entries[row * self.dim + col]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|k| self.get(k, k).re).sum()
    }

    fn hermiticity_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for c in 0..self.dim {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues by numeric Hermitian decomposition, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.entries);
        let mut vals: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        vals
    }

    /// `S(ρ) = −Tr ρ log₂ ρ` in bits, with `0·log₂0 = 0`.
    pub fn von_neumann_entropy(&self) -> f64 {
        let s: f64 = self
            .eigenvalues()
            .into_iter()
            .filter(|&l| l > 0.0)
            .map(|l| -l * l.log2())
            .sum();
        s.clamp(0.0, (self.dim as f64).log2())
    }
}

/// Free-function form of [`DensityMatrix::von_neumann_entropy`].
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    rho.von_neumann_entropy()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::random_source;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn psi_plus_amplitudes() {
        let s = make_bell(BellOutcome::PsiPlus);
        let h = FRAC_1_SQRT_2;
        let expected = [0.0, h, h, 0.0];
        for (a, e) in s.amplitudes().iter().zip(expected) {
            assert!((a - c(e)).norm() < EXACT_TOL);
        }
    }

    #[test]
    fn bell_states_are_orthonormal() {
        for a in BellOutcome::ALL {
            let sa = make_bell(a);
            assert!((sa.norm() - 1.0).abs() < EXACT_TOL);
            for b in BellOutcome::ALL {
                let ip = sa.inner(&make_bell(b)).unwrap();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((ip - c(expected)).norm() < EXACT_TOL, "{a} {b}");
            }
        }
    }

    #[test]
    fn sigma_z_on_travel_flips_psi() {
        let plus = make_bell(BellOutcome::PsiPlus);
        let minus = make_bell(BellOutcome::PsiMinus);
        let z = Unitary::pauli_z(0);
        assert!(plus.apply_unitary(&z).unwrap().max_abs_diff(&minus) < EXACT_TOL);
        assert!(minus.apply_unitary(&z).unwrap().max_abs_diff(&plus) < EXACT_TOL);
        let twice = plus.apply_unitary(&z).unwrap().apply_unitary(&z).unwrap();
        assert!(twice.max_abs_diff(&plus) < EXACT_TOL);
        let id = plus.apply_unitary(&Unitary::identity(1)).unwrap();
        assert!(id.max_abs_diff(&plus) < EXACT_TOL);
    }

    #[test]
    fn apply_rejects_bad_targets() {
        let s = make_bell(BellOutcome::PsiPlus);
        assert_eq!(
            s.apply_unitary(&Unitary::pauli_z(2)),
            Err(QStateError::QubitOutOfRange {
                index: 2,
                num_qubits: 2
            })
        );
        let one = c(1.0);
        let zero = c(0.0);
        let mut id4 = vec![zero; 16];
        for k in 0..4 {
            id4[k * 5] = one;
        }
        assert_eq!(
            Unitary::new(id4, vec![1, 1]),
            Err(QStateError::DuplicateQubit(1))
        );
        assert!(matches!(
            Unitary::new(vec![one, one, zero, one], vec![0]),
            Err(QStateError::NotUnitary(_))
        ));
        assert!(matches!(
            Unitary::new(vec![one; 3], vec![0]),
            Err(QStateError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn state_constructor_validates() {
        assert!(matches!(
            StateVector::new(1, vec![c(1.0), c(1.0)]),
            Err(QStateError::NotNormalized(_))
        ));
        assert!(matches!(
            StateVector::new(4, vec![c(1.0); 16]),
            Err(QStateError::QubitCount(4))
        ));
        assert!(matches!(
            StateVector::new(2, vec![c(1.0)]),
            Err(QStateError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn measure_eigenstate_is_deterministic() {
        let zero = StateVector::basis(1, 0).unwrap();
        let mut rng = random_source(3);
        for _ in 0..100 {
            let (out, post) = zero.measure_z(0, &mut rng).unwrap();
            assert_eq!(out, 0);
            assert!(post.max_abs_diff(&zero) < EXACT_TOL);
        }
    }

    #[test]
    fn measure_psi_plus_projects_to_product() {
        let s = make_bell(BellOutcome::PsiPlus);
        assert!((s.prob_one(0).unwrap() - 0.5).abs() < EXACT_TOL);
        let mut rng = random_source(11);
        let mut seen = [false; 2];
        for _ in 0..64 {
            let (out, post) = s.measure_z(0, &mut rng).unwrap();
            seen[out as usize] = true;
            // qubit A = out forces qubit B = 1 - out: |01⟩ is index 2, |10⟩ is index 1
            let expected_index = if out == 0 { 2 } else { 1 };
            let expected = StateVector::basis(2, expected_index).unwrap();
            assert!(post.max_abs_diff(&expected) < EXACT_TOL);
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn measure_rejects_drifted_state() {
        let s = StateVector {
            num_qubits: 1,
            amps: vec![c(1.0), c(1e-3)],
        };
        let mut rng = random_source(0);
        assert!(matches!(
            s.measure_z(0, &mut rng),
            Err(QStateError::NotNormalized(_))
        ));
    }

    #[test]
    fn bell_measure_on_basis_states() {
        let mut rng = random_source(5);
        for kind in BellOutcome::ALL {
            let s = make_bell(kind);
            for _ in 0..16 {
                let (out, post) = s.bell_measure((0, 1), &mut rng).unwrap();
                assert_eq!(out, kind);
                assert!(post.max_abs_diff(&s) < EXACT_TOL);
            }
        }
    }

    #[test]
    fn bell_measure_superposition_by_inner_products() {
        // (|ψ⁺⟩ + |φ⁺⟩)/√2, expanded by brute-force overlaps
        let psi = make_bell(BellOutcome::PsiPlus);
        let phi = make_bell(BellOutcome::PhiPlus);
        let amps: Vec<Amplitude> = psi
            .amplitudes()
            .iter()
            .zip(phi.amplitudes())
            .map(|(a, b)| (a + b) * FRAC_1_SQRT_2)
            .collect();
        let s = StateVector::new(2, amps).unwrap();
        let oracle: Vec<f64> = BellOutcome::ALL
            .iter()
            .map(|k| make_bell(*k).inner(&s).unwrap().norm_sqr())
            .collect();
        assert!((oracle[0] - 0.5).abs() < EXACT_TOL);
        assert!((oracle[2] - 0.5).abs() < EXACT_TOL);
        let probs = s.bell_probabilities((0, 1)).unwrap();
        for (p, o) in probs.iter().zip(&oracle) {
            assert!((p - o).abs() < EXACT_TOL);
        }
    }

    #[test]
    fn bell_pair_order_matters_for_psi_minus() {
        // swapping the pair exchanges the roles of |01⟩ and |10⟩
        let s = make_bell(BellOutcome::PsiMinus);
        let p = s.bell_probabilities((1, 0)).unwrap();
        assert!((p[1] - 1.0).abs() < EXACT_TOL);
    }

    #[test]
    fn reduced_density_examples() {
        let half = DensityMatrix::maximally_mixed(2);
        for kind in [BellOutcome::PsiPlus, BellOutcome::PsiMinus] {
            let s = make_bell(kind);
            for keep in 0..2 {
                assert!(s.reduced_density(keep).unwrap().max_abs_diff(&half) < EXACT_TOL);
            }
        }
        // |0⟩⊗|1⟩
        let prod = StateVector::basis(1, 0)
            .unwrap()
            .tensor(&StateVector::basis(1, 1).unwrap())
            .unwrap();
        let rho = prod.reduced_density(0).unwrap();
        let proj = DensityMatrix::from_pure(&StateVector::basis(1, 0).unwrap());
        assert!(rho.max_abs_diff(&proj) < EXACT_TOL);

        let theta: f64 = 0.37;
        let s = StateVector::new(2, vec![c(theta.cos()), c(0.0), c(0.0), c(theta.sin())]).unwrap();
        let rho = s.reduced_density(0).unwrap();
        assert!((rho.get(0, 0).re - theta.cos().powi(2)).abs() < EXACT_TOL);
        assert!((rho.get(1, 1).re - theta.sin().powi(2)).abs() < EXACT_TOL);
        assert!(rho.get(0, 1).norm() < EXACT_TOL);
    }

    #[test]
    fn reduced_density_needs_two_qubits() {
        let s = StateVector::basis(1, 0).unwrap();
        assert_eq!(s.reduced_density(0), Err(QStateError::NothingToTrace));
        let s = make_bell(BellOutcome::PsiPlus);
        assert!(matches!(
            s.reduced_density(5),
            Err(QStateError::QubitOutOfRange { .. })
        ));
    }

    #[test]
    fn entropy_examples() {
        assert!((DensityMatrix::maximally_mixed(2).von_neumann_entropy() - 1.0).abs() < 1e-12);
        let pure = DensityMatrix::from_pure(&make_bell(BellOutcome::PhiMinus));
        assert!(pure.von_neumann_entropy().abs() < 1e-12);
        let rho = DensityMatrix::new(2, vec![c(0.25), c(0.0), c(0.0), c(0.75)]).unwrap();
        // −0.25 log₂ 0.25 − 0.75 log₂ 0.75, evaluated at 40 digits
        assert!((von_neumann_entropy(&rho) - 0.811_278_124_459_132_8).abs() < 1e-12);
    }

    #[test]
    fn density_constructor_rejects_invalid() {
        assert!(matches!(
            DensityMatrix::new(2, vec![c(0.5), c(0.3), c(0.0), c(0.5)]),
            Err(QStateError::NotHermitian(_))
        ));
        assert!(matches!(
            DensityMatrix::new(2, vec![c(0.5), c(0.0), c(0.0), c(0.6)]),
            Err(QStateError::BadTrace(_))
        ));
        assert!(matches!(
            DensityMatrix::new(2, vec![c(1.5), c(0.0), c(0.0), c(-0.5)]),
            Err(QStateError::NotPositive(_))
        ));
    }

    #[test]
    fn tensor_appends_high_qubits() {
        let one = StateVector::basis(1, 1).unwrap();
        let zero = StateVector::basis(1, 0).unwrap();
        // qubit 0 = 1, qubit 1 = 0 → index 1
        let s = one.tensor(&zero).unwrap();
        assert_eq!(s.amplitudes()[1], c(1.0));
        let three = make_bell(BellOutcome::PsiPlus).tensor(&zero).unwrap();
        assert_eq!(three.num_qubits(), 3);
        assert!(three.tensor(&zero).is_err());
    }
}
