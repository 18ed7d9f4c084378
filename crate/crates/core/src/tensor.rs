//! Correlation tensors T_μ = Tr[ρ σ_μ1 ⊗ … ⊗ σ_μN] and local averages.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{PauliAxis, PauliString};
use crate::state::QuantumState;

/// Allowed overshoot of |T| beyond 1 from rounding or noisy input.
pub const VALUE_TOL: f64 = 1e-9;

fn i_pow(k: u32) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// Exact expectation of a Pauli word, using the action of the word on basis states.
pub fn correlation(state: &QuantumState, setting: &PauliString) -> Result<f64> {
    if setting.len() != state.n_qubits() {
        return Err(Error::DimensionMismatch { expected: state.n_qubits(), got: setting.len() });
    }
    Ok(correlation_unchecked(state, setting))
}

pub(crate) fn correlation_unchecked(state: &QuantumState, setting: &PauliString) -> f64 {
    let (flip, zmask, ny) = setting.vector_masks();
    let global = i_pow(ny);
    let sign = |j: usize| if (j & zmask).count_ones() & 1 == 1 { -1.0 } else { 1.0 };
    let mut acc = C64::new(0.0, 0.0);
    if let Some(psi) = state.ket() {
        for j in 0..psi.len() {
            acc += psi[j ^ flip].conj() * psi[j] * sign(j);
        }
    } else {
        let rho = state.density();
        for j in 0..rho.nrows() {
            acc += rho[(j, j ^ flip)] * sign(j);
        }
    }
    (acc * global).re
}

/// All 4^N components; entry 0 (the all-identity word) is the trace.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTensor {
    n: usize,
    entries: Vec<f64>,
}

impl CorrelationTensor {
    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn get(&self, s: &PauliString) -> Result<f64> {
        if s.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: s.len() });
        }
        Ok(self.entries[s.index()])
    }

    /// (word, value) for every index, alphabetical order.
    pub fn iter(&self) -> impl Iterator<Item = (PauliString, f64)> + '_ {
        self.entries.iter().enumerate().map(|(i, &v)| (PauliString::from_index(i, self.n), v))
    }

    pub fn full_weight(&self) -> impl Iterator<Item = (PauliString, f64)> + '_ {
        self.iter().filter(|(s, _)| s.is_full_weight())
    }

    pub fn full_weight_square_sum(&self) -> f64 {
        self.full_weight().map(|(_, v)| v * v).sum()
    }

    /// ρ = 2^-N Σ_μ T_μ σ_μ1 ⊗ … ⊗ σ_μN.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let d = 1usize << self.n;
        let mut rho = DMatrix::zeros(d, d);
        for (s, t) in self.iter() {
            if t == 0.0 {
                continue;
            }
            let (flip, zmask, ny) = s.vector_masks();
            let g = i_pow(ny) * t;
            for j in 0..d {
                let sign = if (j & zmask).count_ones() & 1 == 1 { -1.0 } else { 1.0 };
                rho[(j ^ flip, j)] += g * sign;
            }
        }
        rho / C64::from(d as f64)
    }

    pub fn to_json(&self) -> TensorJson {
        TensorJson { n: self.n, entries: self.iter().map(|(s, v)| (s.to_string(), v)).collect() }
    }

    /// Missing words are taken as zero; the all-identity entry defaults to 1.
    pub fn from_json(json: &TensorJson) -> Result<Self> {
        let n = json.n;
        if n == 0 || n > crate::state::MAX_QUBITS {
            return Err(Error::OutOfRange(format!("n={n}")));
        }
        let mut entries = vec![0.0; 1 << (2 * n)];
        entries[0] = 1.0;
        for (k, &v) in &json.entries {
            let s: PauliString = k.parse()?;
            if s.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: s.len() });
            }
            if v.is_nan() || v.abs() > 1.0 + VALUE_TOL {
                return Err(Error::ValueOutOfRange(v));
            }
            entries[s.index()] = v;
        }
        Ok(CorrelationTensor { n, entries })
    }
}

/// `{"n": N, "entries": {"XYZ": value, …}}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TensorJson {
    pub n: usize,
    pub entries: BTreeMap<String, f64>,
}

/// Every entry of the correlation tensor. O(8^N); fine up to N≈10.
pub fn full_tensor(state: &QuantumState) -> CorrelationTensor {
    let n = state.n_qubits();
    let entries = (0..1usize << (2 * n))
        .map(|i| correlation_unchecked(state, &PauliString::from_index(i, n)))
        .collect();
    CorrelationTensor { n, entries }
}

/// The 3^N full-weight entries, indexed like [`PauliString::full_index`].
pub fn full_weight_tensor(state: &QuantumState) -> Vec<f64> {
    let n = state.n_qubits();
    (0..3usize.pow(n as u32))
        .map(|i| correlation_unchecked(state, &PauliString::from_full_index(i, n)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        BlochVector { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn unit(&self) -> Option<BlochVector> {
        let r = self.norm();
        (r > 0.0).then(|| BlochVector::new(self.x / r, self.y / r, self.z / r))
    }

    /// n·σ.
    pub fn observable(&self) -> Matrix2<C64> {
        pauli_matrix(PauliAxis::X) * C64::from(self.x)
            + pauli_matrix(PauliAxis::Y) * C64::from(self.y)
            + pauli_matrix(PauliAxis::Z) * C64::from(self.z)
    }
}

pub fn bloch_vector(state: &QuantumState, party: usize) -> Result<BlochVector> {
    let n = state.n_qubits();
    if party >= n {
        return Err(Error::PartyOutOfRange { party, n });
    }
    let t = |a| correlation_unchecked(state, &PauliString::single(n, party, a));
    Ok(BlochVector::new(t(PauliAxis::X), t(PauliAxis::Y), t(PauliAxis::Z)))
}

pub fn pauli_matrix(a: PauliAxis) -> Matrix2<C64> {
    let (o, l, i) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0));
    match a {
        PauliAxis::I => Matrix2::new(l, o, o, l),
        PauliAxis::X => Matrix2::new(o, l, l, o),
        PauliAxis::Y => Matrix2::new(o, -i, i, o),
        PauliAxis::Z => Matrix2::new(l, o, o, -l),
    }
}

/// ⟨O_0 ⊗ … ⊗ O_{N-1}⟩ for arbitrary single-qubit observables.
pub fn local_expectation(state: &QuantumState, ops: &[Matrix2<C64>]) -> Result<f64> {
    let n = state.n_qubits();
    if ops.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: ops.len() });
    }
    if let Some(psi) = state.ket() {
        let mut v = psi.clone();
        for (k, op) in ops.iter().enumerate() {
            let bit = 1usize << (n - 1 - k);
            for i in 0..v.len() {
                if i & bit == 0 {
                    let (a0, a1) = (v[i], v[i | bit]);
                    v[i] = op[(0, 0)] * a0 + op[(0, 1)] * a1;
                    v[i | bit] = op[(1, 0)] * a0 + op[(1, 1)] * a1;
                }
            }
        }
        return Ok(psi.dotc(&v).re);
    }
    let rho = state.density();
    let d = rho.nrows();
    // Tr[ρ O] = Σ_{i,j} ρ_{ji} O_{ij}, with O_{ij} a product of single-qubit entries.
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            let mut o = C64::new(1.0, 0.0);
            for (k, op) in ops.iter().enumerate() {
                let s = n - 1 - k;
                o *= op[((i >> s) & 1, (j >> s) & 1)];
                if o == C64::new(0.0, 0.0) {
                    break;
                }
            }
            acc += rho[(j, i)] * o;
        }
    }
    Ok(acc.re)
}

/// Mean of `shots` ±1 outcomes drawn with P(+1) = (1+t)/2.
pub fn sample_from_value<R: Rng + ?Sized>(t: f64, shots: u64, rng: &mut R) -> f64 {
    assert!(shots >= 1, "need at least one shot");
    let p = ((1.0 + t.clamp(-1.0, 1.0)) / 2.0).clamp(0.0, 1.0);
    let plus = Binomial::new(shots, p).expect("p in [0, 1]").sample(rng);
    2.0 * plus as f64 / shots as f64 - 1.0
}

/// Finite-statistics estimate of a correlation.
pub fn sample_correlation<R: Rng + ?Sized>(
    state: &QuantumState,
    setting: &PauliString,
    shots: u64,
    rng: &mut R,
) -> Result<f64> {
    if shots == 0 {
        return Err(Error::OutOfRange("shots must be >= 1".into()));
    }
    Ok(sample_from_value(correlation(state, setting)?, shots, rng))
}

/// Standard error of a ±1 mean with value `t` over `shots` trials.
pub fn shot_stderr(t: f64, shots: u64) -> f64 {
    ((1.0 - t * t).max(0.0) / shots as f64).sqrt()
}
