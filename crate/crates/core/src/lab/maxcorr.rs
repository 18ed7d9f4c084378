//! Largest correlation over all local measurement directions.
//!
//! Alternating maximization of the full-weight tensor contracted with one
//! unit vector per party (a rank-one power iteration), with restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::state::QuantumState;
use crate::tensor::{bloch_vector, full_weight_tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxCorrelationOptions {
    pub restarts: usize,
    pub iterations: usize,
    pub tolerance: f64,
    pub rng_seed: u64,
}

impl Default for MaxCorrelationOptions {
    fn default() -> Self {
        MaxCorrelationOptions { restarts: 20, iterations: 200, tolerance: 1e-9, rng_seed: 0x5eed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxCorrelation {
    pub value: f64,
    pub directions: Vec<[f64; 3]>,
    /// False if the best restart hit the iteration cap.
    pub converged: bool,
}

/// Σ_idx T[idx] Π_{j≠skip} u_j[digit_j]; with `skip` = None, the full contraction.
fn contract(t: &[f64], n: usize, u: &[[f64; 3]], skip: Option<usize>) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (idx, &v) in t.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let mut rest = idx;
        let mut w = v;
        let mut slot = 0;
        for k in (0..n).rev() {
            let d = rest % 3;
            rest /= 3;
            if Some(k) == skip {
                slot = d;
            } else {
                w *= u[k][d];
            }
        }
        out[slot] += w;
    }
    out
}

fn normalize(v: [f64; 3]) -> Option<[f64; 3]> {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (r > 1e-300).then(|| [v[0] / r, v[1] / r, v[2] / r])
}

fn value_of(t: &[f64], n: usize, u: &[[f64; 3]]) -> f64 {
    contract(t, n, u, None)[0]
}

/// Returns (|value|, directions, converged) for one start.
fn climb(t: &[f64], n: usize, mut u: Vec<[f64; 3]>, opts: &MaxCorrelationOptions) -> (f64, Vec<[f64; 3]>, bool) {
    let mut prev = value_of(t, n, &u).abs();
    for _ in 0..opts.iterations {
        for k in 0..n {
            if let Some(v) = normalize(contract(t, n, &u, Some(k))) {
                u[k] = v;
            }
        }
        let val = value_of(t, n, &u).abs();
        if (val - prev).abs() < opts.tolerance {
            return (val, u, true);
        }
        prev = val;
    }
    (prev, u, false)
}

fn random_unit<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        if let Some(v) = normalize([rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)]) {
            return v;
        }
    }
}

/// max over unit vectors u_k of |Σ T_{i1…iN} u_1[i1] ⋯ u_N[iN]|.
///
/// The first start is the largest canonical entry, so the result never falls
/// below max |T_s| over full-weight s; the second start uses the Bloch
/// directions; the rest are random.
pub fn max_correlation_with(state: &QuantumState, opts: &MaxCorrelationOptions) -> MaxCorrelation {
    let n = state.n_qubits();
    let t = full_weight_tensor(state);
    let mut starts: Vec<Vec<[f64; 3]>> = Vec::new();

    let (arg, _) = t.iter().enumerate().fold((0, -1.0), |acc, (i, &v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
    let mut canonical = vec![[0.0; 3]; n];
    let mut rest = arg;
    for k in (0..n).rev() {
        canonical[k][rest % 3] = 1.0;
        rest /= 3;
    }
    starts.push(canonical);

    let bloch: Option<Vec<[f64; 3]>> = (0..n).map(|k| normalize(bloch_vector(state, k).unwrap().to_array())).collect();
    if let Some(b) = bloch {
        starts.push(b);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    while starts.len() < opts.restarts.max(1) {
        starts.push((0..n).map(|_| random_unit(&mut rng)).collect());
    }

    let mut best = MaxCorrelation { value: -1.0, directions: Vec::new(), converged: false };
    for u in starts {
        let (v, dirs, conv) = climb(&t, n, u, opts);
        if v > best.value {
            best = MaxCorrelation { value: v, directions: dirs, converged: conv };
        }
    }
    best
}

pub fn max_correlation(state: &QuantumState) -> MaxCorrelation {
    max_correlation_with(state, &MaxCorrelationOptions::default())
}
