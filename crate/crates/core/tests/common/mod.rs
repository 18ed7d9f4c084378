//! Brute-force oracles shared by the integration tests. The oracles avoid the
//! library's numerics and work from explicit Kronecker products and index
//! loops; only the sampler at the bottom borrows library state constructors.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn pauli(letter: char) -> DMatrix<C> {
    let (o, l, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
    let v = match letter.to_ascii_uppercase() {
        'I' => [l, o, o, l],
        'X' => [o, l, l, o],
        'Y' => [o, -i, i, o],
        'Z' => [l, o, o, -l],
        other => panic!("bad letter {other}"),
    };
    DMatrix::from_row_slice(2, 2, &v)
}

/// σ_{w0} ⊗ σ_{w1} ⊗ …, leftmost letter is the most significant tensor factor.
pub fn kron_word(word: &str) -> DMatrix<C> {
    word.chars().fold(DMatrix::from_element(1, 1, c(1.0, 0.0)), |acc, ch| acc.kronecker(&pauli(ch)))
}

/// Tr[ρ P] by dense multiplication.
pub fn trace_oracle(rho: &DMatrix<C>, word: &str) -> f64 {
    let t = (rho * kron_word(word)).trace();
    assert!(t.im.abs() < 1e-9, "imaginary trace {t}");
    t.re
}

pub fn density_of(ket: &DVector<C>) -> DMatrix<C> {
    let k = ket / c(ket.norm(), 0.0);
    &k * k.adjoint()
}

pub fn ket(amps: &[(f64, f64)]) -> DVector<C> {
    let v = DVector::from_iterator(amps.len(), amps.iter().map(|&(a, b)| c(a, b)));
    &v / c(v.norm(), 0.0)
}

/// 2×2 reduced state of `party` by summing over every other bit.
pub fn reduced_one(rho: &DMatrix<C>, n: usize, party: usize) -> DMatrix<C> {
    let shift = n - 1 - party;
    let mut out = DMatrix::zeros(2, 2);
    for i in 0..rho.nrows() {
        for j in 0..rho.ncols() {
            if (i & !(1 << shift)) == (j & !(1 << shift)) {
                out[((i >> shift) & 1, (j >> shift) & 1)] += rho[(i, j)];
            }
        }
    }
    out
}

/// Bloch vector by Tr[ρ_k σ].
pub fn bloch_oracle(rho: &DMatrix<C>, n: usize, party: usize) -> [f64; 3] {
    let r = reduced_one(rho, n, party);
    ['X', 'Y', 'Z'].map(|a| (&r * pauli(a)).trace().re)
}

/// Partial transpose on the first qubit of a 4×4 matrix.
pub fn pt_first(rho: &DMatrix<C>) -> DMatrix<C> {
    let mut out = DMatrix::zeros(4, 4);
    for a in 0..2 {
        for b in 0..2 {
            for ap in 0..2 {
                for bp in 0..2 {
                    out[(ap * 2 + b, a * 2 + bp)] = rho[(a * 2 + b, ap * 2 + bp)];
                }
            }
        }
    }
    out
}

/// Eigenvalues of a Hermitian matrix via the real 2d×2d embedding [[A, −B], [B, A]]
/// (each eigenvalue appears twice there; every other one is kept).
pub fn hermitian_spectrum(m: &DMatrix<C>) -> Vec<f64> {
    let d = m.nrows();
    let mut big = DMatrix::<f64>::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            big[(i, j)] = z.re;
            big[(i + d, j + d)] = z.re;
            big[(i, j + d)] = -z.im;
            big[(i + d, j)] = z.im;
        }
    }
    let mut ev: Vec<f64> = big.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev.into_iter().step_by(2).collect()
}

pub fn negativity_oracle(rho: &DMatrix<C>) -> f64 {
    hermitian_spectrum(&pt_first(rho)).iter().filter(|&&e| e < 0.0).map(|e| -e).sum()
}

pub fn is_ppt(rho: &DMatrix<C>) -> bool {
    hermitian_spectrum(&pt_first(rho))[0] > -1e-12
}

/// All 3^n full-weight words in alphabetical order.
pub fn full_words(n: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    for _ in 0..n {
        out = out.iter().flat_map(|w| ['X', 'Y', 'Z'].map(|a| format!("{w}{a}"))).collect();
    }
    out
}

/// Two words commute iff they differ (both non-I) at an even number of positions.
pub fn commute_oracle(p: &str, q: &str) -> bool {
    p.chars().zip(q.chars()).filter(|&(a, b)| a != 'I' && b != 'I' && a != b).count() % 2 == 0
}

/// Goes straight to stdout so the line shows up even when the harness captures output.
pub fn pass_line(name: &str, ok: bool, detail: impl std::fmt::Display) {
    use std::io::Write;
    let line = format!("[{}] {name}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
}

/// Convex mixture of one to four random product states.
pub fn random_separable<R: rand::Rng>(rng: &mut R) -> entdetect_core::QuantumState {
    let terms = rng.random_range(1..=4);
    let mut rho = DMatrix::<C>::zeros(4, 4);
    let mut total = 0.0;
    for _ in 0..terms {
        let w: f64 = rng.random();
        let a = entdetect_core::state::random_pure(1, rng);
        let b = entdetect_core::state::random_pure(1, rng);
        rho += a.density().kronecker(b.density()) * C::from(w);
        total += w;
    }
    entdetect_core::QuantumState::from_density(rho / C::from(total)).unwrap()
}
