//! N-qubit density matrices, named state families and random ensembles.
//!
//! Basis index bit (N-1-k) belongs to party k, so party 0 is the leftmost
//! label in a ket like |HHV⟩. H and 0 are the same state, as are V and 1.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense matrices grow as 4^N; beyond this the tensor routines stop being practical.
pub const MAX_QUBITS: usize = 10;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = -1e-9;

#[derive(Clone, Debug)]
pub struct QuantumState {
    n: usize,
    rho: DMatrix<C64>,
    // Kept when the state is known to be pure; lets correlations skip the O(4^N) path.
    ket: Option<DVector<C64>>,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::InvalidState(format!("dimension {dim} is not 2^N with N >= 1")));
    }
    let n = dim.trailing_zeros() as usize;
    if n > MAX_QUBITS {
        return Err(Error::OutOfRange(format!("{n} qubits (at most {MAX_QUBITS})")));
    }
    Ok(n)
}

impl QuantumState {
    /// Pure state from a ket; normalizes, rejects the zero vector.
    pub fn from_ket(ket: DVector<C64>) -> Result<Self> {
        let n = qubits_for_dim(ket.len())?;
        let norm = ket.norm();
        if !norm.is_finite() || norm <= 1e-12 {
            return Err(Error::InvalidState("zero or non-finite ket".into()));
        }
        let ket = ket / C64::from(norm);
        let rho = &ket * ket.adjoint();
        Ok(QuantumState { n, rho, ket: Some(ket) })
    }

    /// Validates hermiticity, unit trace and positivity (eigenvalues down to -1e-9).
    pub fn from_density(rho: DMatrix<C64>) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::InvalidState("matrix is not square".into()));
        }
        let n = qubits_for_dim(rho.nrows())?;
        let herm_err = (&rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_err.is_nan() || herm_err > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm_err:.2e})")));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min_eig = hermitian_eigenvalues(&rho).into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(QuantumState { n, rho, ket: None })
    }

    /// Skips validation; for matrices that are density matrices by construction.
    pub(crate) fn from_density_unchecked(rho: DMatrix<C64>) -> Self {
        let n = rho.nrows().trailing_zeros() as usize;
        QuantumState { n, rho, ket: None }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn density(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub fn ket(&self) -> Option<&DVector<C64>> {
        self.ket.as_ref()
    }

    /// Tr ρ².
    pub fn purity(&self) -> f64 {
        if self.ket.is_some() {
            return 1.0;
        }
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    fn check_party(&self, party: usize) -> Result<()> {
        if party >= self.n {
            return Err(Error::PartyOutOfRange { party, n: self.n });
        }
        Ok(())
    }

    fn party_mask(&self, parties: &[usize]) -> Result<usize> {
        let mut mask = 0usize;
        for &p in parties {
            self.check_party(p)?;
            mask |= 1 << (self.n - 1 - p);
        }
        Ok(mask)
    }

    /// Reduced density matrix of `keep` (in increasing party order).
    pub fn reduced(&self, keep: &[usize]) -> Result<DMatrix<C64>> {
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let keep_mask = self.party_mask(&keep)?;
        let traced: Vec<usize> = (0..self.n).map(|k| 1 << k).filter(|b| keep_mask & b == 0).collect();
        let kept: Vec<usize> = keep.iter().map(|&p| 1 << (self.n - 1 - p)).collect();
        let spread = |a: usize, bits: &[usize]| -> usize {
            // bits[0] is the most significant position of `a`.
            let m = bits.len();
            bits.iter().enumerate().fold(0, |acc, (i, &b)| if a >> (m - 1 - i) & 1 == 1 { acc | b } else { acc })
        };
        let dk = 1 << kept.len();
        let de = 1 << traced.len();
        let traced_rev: Vec<usize> = traced.iter().rev().copied().collect();
        let mut out = DMatrix::zeros(dk, dk);
        for a in 0..dk {
            let ia = spread(a, &kept);
            for b in 0..dk {
                let ib = spread(b, &kept);
                let mut acc = C64::new(0.0, 0.0);
                for e in 0..de {
                    let ie = spread(e, &traced_rev);
                    acc += self.rho[(ia | ie, ib | ie)];
                }
                out[(a, b)] = acc;
            }
        }
        Ok(out)
    }

    /// Partial transpose on the parties in `subset`.
    pub fn partial_transpose(&self, subset: &[usize]) -> Result<DMatrix<C64>> {
        let m = self.party_mask(subset)?;
        let d = self.dim();
        Ok(DMatrix::from_fn(d, d, |i, j| {
            let i2 = (i & !m) | (j & m);
            let j2 = (j & !m) | (i & m);
            self.rho[(i2, j2)]
        }))
    }

    /// (‖ρ^{T_A}‖₁ − 1)/2, i.e. the summed magnitude of negative eigenvalues.
    pub fn negativity(&self, subset: &[usize]) -> Result<f64> {
        let mut parties = subset.to_vec();
        parties.sort_unstable();
        parties.dedup();
        if parties.is_empty() || parties.len() >= self.n {
            return Err(Error::TrivialBipartition);
        }
        let pt = self.partial_transpose(&parties)?;
        let neg: f64 = hermitian_eigenvalues(&pt).into_iter().filter(|&l| l < 0.0).map(|l| -l).sum();
        Ok(neg)
    }

    /// Applies `ops[k]` on party k (a product operator) to both sides: O ρ O†.
    /// Returns the unnormalized result.
    fn conjugate_product(&self, ops: &[Matrix2<C64>]) -> (DMatrix<C64>, Option<DVector<C64>>) {
        let mut rho = self.rho.clone();
        let mut ket = self.ket.clone();
        for (k, op) in ops.iter().enumerate() {
            if *op == Matrix2::identity() {
                continue;
            }
            let bit = 1usize << (self.n - 1 - k);
            rho = apply_left(&rho, bit, op);
            rho = apply_left(&rho.adjoint(), bit, op).adjoint();
            if let Some(v) = ket.as_mut() {
                apply_left_vec(v, bit, op);
            }
        }
        (rho, ket)
    }

    /// (U_0 ⊗ … ⊗ U_{N-1}) ρ (…)†.
    pub fn apply_local_unitaries(&self, unitaries: &[Matrix2<C64>]) -> Result<QuantumState> {
        if unitaries.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: unitaries.len() });
        }
        let (rho, ket) = self.conjugate_product(unitaries);
        Ok(QuantumState { n: self.n, rho, ket })
    }

    /// Applies a local operator `f` on `party`, renormalizes, and returns the
    /// success probability Tr[(F†F ⊗ 1)ρ].
    pub fn apply_local_operator(&self, party: usize, f: &Matrix2<C64>) -> Result<(QuantumState, f64)> {
        self.check_party(party)?;
        let mut ops = vec![Matrix2::identity(); self.n];
        ops[party] = *f;
        let (rho, ket) = self.conjugate_product(&ops);
        let p = rho.trace().re;
        if p.is_nan() || p < 1e-12 {
            return Err(Error::FilterAnnihilated(p.max(0.0)));
        }
        let rho = rho / C64::from(p);
        let ket = ket.map(|v| {
            let nrm = v.norm();
            v / C64::from(nrm)
        });
        Ok((QuantumState { n: self.n, rho, ket }, p))
    }

    pub fn to_json(&self) -> StateJson {
        let d = self.dim();
        StateJson {
            n: self.n,
            rho: (0..d).map(|i| (0..d).map(|j| [self.rho[(i, j)].re, self.rho[(i, j)].im]).collect()).collect(),
        }
    }

    pub fn from_json(json: &StateJson) -> Result<Self> {
        let d = json.rho.len();
        if json.rho.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidState("ragged matrix".into()));
        }
        let rho = DMatrix::from_fn(d, d, |i, j| c(json.rho[i][j][0], json.rho[i][j][1]));
        let s = Self::from_density(rho)?;
        if s.n != json.n {
            return Err(Error::DimensionMismatch { expected: json.n, got: s.n });
        }
        Ok(s)
    }
}

/// Row-major complex pairs: `{"n": N, "rho": [[[re, im], …], …]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StateJson {
    pub n: usize,
    pub rho: Vec<Vec<[f64; 2]>>,
}

pub(crate) fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    // Symmetrize first; SymmetricEigen only reads one triangle.
    let h = (m + m.adjoint()) * C64::from(0.5);
    SymmetricEigen::new(h).eigenvalues.iter().copied().collect()
}

fn apply_left(rho: &DMatrix<C64>, bit: usize, op: &Matrix2<C64>) -> DMatrix<C64> {
    let d = rho.nrows();
    let mut out = DMatrix::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            if i & bit != 0 {
                continue;
            }
            let (a0, a1) = (rho[(i, j)], rho[(i | bit, j)]);
            out[(i, j)] = op[(0, 0)] * a0 + op[(0, 1)] * a1;
            out[(i | bit, j)] = op[(1, 0)] * a0 + op[(1, 1)] * a1;
        }
    }
    out
}

fn apply_left_vec(v: &mut DVector<C64>, bit: usize, op: &Matrix2<C64>) {
    for i in 0..v.len() {
        if i & bit != 0 {
            continue;
        }
        let (a0, a1) = (v[i], v[i | bit]);
        v[i] = op[(0, 0)] * a0 + op[(0, 1)] * a1;
        v[i | bit] = op[(1, 0)] * a0 + op[(1, 1)] * a1;
    }
}

// --- named families -------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BellKind {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

pub fn bell(kind: BellKind) -> QuantumState {
    let h = FRAC_1_SQRT_2;
    let amps = match kind {
        BellKind::PhiPlus => [h, 0.0, 0.0, h],
        BellKind::PhiMinus => [h, 0.0, 0.0, -h],
        BellKind::PsiPlus => [0.0, h, h, 0.0],
        BellKind::PsiMinus => [0.0, h, -h, 0.0],
    };
    QuantumState::from_ket(DVector::from_iterator(4, amps.iter().map(|&a| c(a, 0.0)))).unwrap()
}

/// |ψ−⟩ = (|01⟩ − |10⟩)/√2.
pub fn singlet() -> QuantumState {
    bell(BellKind::PsiMinus)
}

fn check_prob(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("{what} p={p} not in [0, 1]")));
    }
    Ok(())
}

/// p|ψ−⟩⟨ψ−| + (1−p)·1/4.
pub fn werner(p: f64) -> Result<QuantumState> {
    check_prob(p, "werner")?;
    let s = singlet();
    let rho = s.rho * C64::from(p) + DMatrix::identity(4, 4) * C64::from((1.0 - p) / 4.0);
    Ok(QuantumState::from_density_unchecked(rho))
}

/// Singlet mixed with the classically anticorrelated noise (|01⟩⟨01| + |10⟩⟨10|)/2.
pub fn colored_noise(p: f64) -> Result<QuantumState> {
    check_prob(p, "colored noise")?;
    let mut rho = singlet().rho * C64::from(p);
    rho[(1, 1)] += C64::from((1.0 - p) / 2.0);
    rho[(2, 2)] += C64::from((1.0 - p) / 2.0);
    Ok(QuantumState::from_density_unchecked(rho))
}

fn check_n(n: usize, min: usize) -> Result<()> {
    if n < min || n > MAX_QUBITS {
        return Err(Error::OutOfRange(format!("N={n} not in {min}..={MAX_QUBITS}")));
    }
    Ok(())
}

pub fn ghz(n: usize) -> Result<QuantumState> {
    check_n(n, 2)?;
    let mut v = DVector::zeros(1 << n);
    v[0] = c(1.0, 0.0);
    v[(1 << n) - 1] = c(1.0, 0.0);
    QuantumState::from_ket(v)
}

/// Equal superposition of all basis states with `k` ones.
pub fn dicke(n: usize, k: usize) -> Result<QuantumState> {
    check_n(n, 1)?;
    if k > n {
        return Err(Error::OutOfRange(format!("{k} excitations in {n} qubits")));
    }
    let v = DVector::from_fn(1 << n, |i, _| if i.count_ones() as usize == k { c(1.0, 0.0) } else { c(0.0, 0.0) });
    QuantumState::from_ket(v)
}

/// W state: one excitation shared by all parties.
pub fn w(n: usize) -> Result<QuantumState> {
    check_n(n, 2)?;
    dicke(n, 1)
}

/// cos α |W⟩ + sin α |W̄⟩ on three qubits, W̄ being W with 0 and 1 exchanged.
pub fn g_state(alpha: f64) -> Result<QuantumState> {
    if !alpha.is_finite() {
        return Err(Error::OutOfRange(format!("alpha={alpha}")));
    }
    let s = 1.0 / 3f64.sqrt();
    let v = DVector::from_fn(8, |i, _| match i.count_ones() {
        1 => c(alpha.cos() * s, 0.0),
        2 => c(alpha.sin() * s, 0.0),
        _ => c(0.0, 0.0),
    });
    QuantumState::from_ket(v)
}

/// Single-qubit ket for a polarization or basis label.
/// H/V (or 0/1) are σ_z eigenstates, R/L are σ_y eigenstates (+/−), P/M are σ_x eigenstates.
pub fn qubit_label(label: char) -> Option<[C64; 2]> {
    let h = FRAC_1_SQRT_2;
    Some(match label.to_ascii_uppercase() {
        'H' | '0' => [c(1.0, 0.0), c(0.0, 0.0)],
        'V' | '1' => [c(0.0, 0.0), c(1.0, 0.0)],
        'R' => [c(h, 0.0), c(0.0, h)],
        'L' => [c(h, 0.0), c(0.0, -h)],
        'P' | 'D' => [c(h, 0.0), c(h, 0.0)],
        'M' | 'A' => [c(h, 0.0), c(-h, 0.0)],
        _ => return None,
    })
}

fn product_ket(labels: &str) -> Result<DVector<C64>> {
    let bad = || Error::InvalidSpec(labels.to_string(), "expected letters from 01HVRLPM".into());
    let qubits: Vec<[C64; 2]> = labels.chars().map(qubit_label).collect::<Option<_>>().ok_or_else(bad)?;
    if qubits.is_empty() {
        return Err(bad());
    }
    check_n(qubits.len(), 1)?;
    let n = qubits.len();
    Ok(DVector::from_fn(1 << n, |i, _| {
        qubits.iter().enumerate().fold(c(1.0, 0.0), |acc, (k, q)| acc * q[(i >> (n - 1 - k)) & 1])
    }))
}

/// Product of single-qubit labels, e.g. `"HV"`, `"0101"`, `"RP"`.
pub fn product(labels: &str) -> Result<QuantumState> {
    QuantumState::from_ket(product_ket(labels)?)
}

/// Parses a superposition such as `RR+LL`, `RP+iLM`, `00-11` or `0.83LH+0.56iRV`
/// and normalizes it. Integer coefficients need a `*` (`2*HV`).
pub fn ket_expression(expr: &str) -> Result<QuantumState> {
    let err = |msg: &str| Error::InvalidSpec(expr.to_string(), msg.to_string());
    let s: String = expr.chars().filter(|c| !c.is_whitespace()).collect();
    let mut terms: Vec<(C64, String)> = Vec::new();
    let mut rest = s.as_str();
    let mut first = true;
    while !rest.is_empty() {
        let mut sign = 1.0;
        if let Some(r) = rest.strip_prefix('+') {
            rest = r;
        } else if let Some(r) = rest.strip_prefix('-') {
            sign = -1.0;
            rest = r;
        } else if !first {
            return Err(err("terms must be joined by + or -"));
        }
        first = false;
        // A digit run is a coefficient only with a decimal point or a following `i`/`*`;
        // otherwise it belongs to a label such as `01`.
        let mut num_len = rest.find(|ch: char| !(ch.is_ascii_digit() || ch == '.')).unwrap_or(rest.len());
        if !(rest[..num_len].contains('.') || rest[num_len..].starts_with(['i', '*'])) {
            num_len = 0;
        }
        let mut coef = if num_len > 0 {
            c(rest[..num_len].parse::<f64>().map_err(|_| err("bad coefficient"))?, 0.0)
        } else {
            c(1.0, 0.0)
        };
        rest = &rest[num_len..];
        if let Some(r) = rest.strip_prefix('i') {
            coef *= c(0.0, 1.0);
            rest = r;
        }
        rest = rest.strip_prefix('*').unwrap_or(rest);
        let label_len = rest.find(['+', '-']).unwrap_or(rest.len());
        if label_len == 0 {
            return Err(err("missing ket label"));
        }
        terms.push((coef * sign, rest[..label_len].to_string()));
        rest = &rest[label_len..];
    }
    if terms.is_empty() {
        return Err(err("empty expression"));
    }
    let n = terms[0].1.chars().count();
    let mut v = DVector::zeros(1 << n.min(MAX_QUBITS));
    for (coef, label) in &terms {
        if label.chars().count() != n {
            return Err(err("terms have different lengths"));
        }
        v += product_ket(label)? * *coef;
    }
    QuantumState::from_ket(v).map_err(|_| err("superposition vanishes"))
}

/// Accepts `1.2`, `pi`, `pi/4`, `3pi/8`.
fn parse_angle(s: &str) -> Option<f64> {
    let s = s.trim().to_ascii_lowercase();
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.to_string(), b.parse::<f64>().ok()?),
        None => (s.clone(), 1.0),
    };
    let factor = match num.strip_suffix("pi")? {
        "" => 1.0,
        "-" => -1.0,
        f => f.trim_end_matches('*').parse::<f64>().ok()?,
    };
    Some(factor * PI / den)
}

/// Builds a state from a short textual description.
///
/// `bell[:phi+|phi-|psi+|psi-]`, `singlet`, `werner:P`, `colored:P`,
/// `ghz:N`, `w:N`, `g:ALPHA` (radians, `pi/4` allowed), `dicke[:N:K]`,
/// `product:LABELS`, `ket:EXPR`, and a bare label word such as `HV`.
pub fn from_spec(spec: &str) -> Result<QuantumState> {
    let spec = spec.trim();
    let bad = |msg: &str| Error::InvalidSpec(spec.to_string(), msg.to_string());
    let (family, arg) = match spec.split_once(':') {
        Some((f, a)) => (f.to_ascii_lowercase(), Some(a)),
        None => (spec.to_ascii_lowercase(), None),
    };
    let prob = |a: Option<&str>| -> Result<f64> {
        a.and_then(|s| s.trim().parse::<f64>().ok()).ok_or_else(|| bad("expected a probability"))
    };
    let count = |a: Option<&str>, default: Option<usize>| -> Result<usize> {
        match a {
            Some(s) => s.trim().parse::<usize>().map_err(|_| bad("expected a qubit count")),
            None => default.ok_or_else(|| bad("missing qubit count")),
        }
    };
    match family.as_str() {
        "bell" => {
            let kind = match arg.map(|a| a.to_ascii_lowercase()) {
                None => BellKind::PsiMinus,
                Some(a) => match a.as_str() {
                    "phi+" => BellKind::PhiPlus,
                    "phi-" => BellKind::PhiMinus,
                    "psi+" => BellKind::PsiPlus,
                    "psi-" => BellKind::PsiMinus,
                    _ => return Err(bad("unknown Bell state")),
                },
            };
            Ok(bell(kind))
        }
        "singlet" => Ok(singlet()),
        "werner" => werner(prob(arg)?),
        "colored" | "colored_noise" | "colored-noise" => colored_noise(prob(arg)?),
        "ghz" => ghz(count(arg, Some(3))?),
        "w" => w(count(arg, Some(3))?),
        "g" => g_state(arg.and_then(parse_angle).ok_or_else(|| bad("expected an angle"))?),
        "dicke" => match arg {
            None => dicke(4, 2),
            Some(a) => {
                let (n, k) = a.split_once(':').ok_or_else(|| bad("expected dicke:N:K"))?;
                dicke(count(Some(n), None)?, count(Some(k), None)?)
            }
        },
        "product" => product(arg.ok_or_else(|| bad("missing labels"))?),
        "ket" => ket_expression(arg.ok_or_else(|| bad("missing expression"))?),
        _ if arg.is_none() && spec.chars().all(|ch| qubit_label(ch).is_some()) => product(spec),
        _ => Err(bad("unknown family")),
    }
}

// --- random ensembles ----------------------------------------------------

fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random pure state: a normalized complex Gaussian vector.
pub fn random_pure<R: Rng + ?Sized>(n: usize, rng: &mut R) -> QuantumState {
    assert!((1..=MAX_QUBITS).contains(&n));
    let v = DVector::from_fn(1 << n, |_, _| gaussian_c64(rng));
    QuantumState::from_ket(v).expect("Gaussian vector is nonzero")
}

/// Induced measure: reduce a Haar-random pure state on N qubits ⊗ C^ancilla_dim.
/// Sampled as GG†/Tr with G a dim × ancilla_dim Ginibre matrix, which is the same law.
pub fn random_mixed<R: Rng + ?Sized>(n: usize, ancilla_dim: usize, rng: &mut R) -> QuantumState {
    assert!((1..=MAX_QUBITS).contains(&n) && ancilla_dim >= 1);
    let d = 1 << n;
    let g = DMatrix::from_fn(d, ancilla_dim, |_, _| gaussian_c64(rng));
    let rho = &g * g.adjoint();
    let tr = rho.trace().re;
    let rho = rho / C64::from(tr);
    if ancilla_dim == 1 {
        return QuantumState::from_ket(g.column(0).into_owned()).expect("nonzero");
    }
    QuantumState::from_density_unchecked(rho)
}

/// Haar-random single-qubit unitary (uniform unit quaternion).
pub fn random_unitary_2<R: Rng + ?Sized>(rng: &mut R) -> Matrix2<C64> {
    let mut q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let nrm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    q.iter_mut().for_each(|x| *x /= nrm);
    Matrix2::new(c(q[0], q[1]), c(q[2], q[3]), c(-q[2], q[3]), c(q[0], -q[1]))
}
