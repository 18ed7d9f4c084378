mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};

use entdetect_core::schmidt::{
    angles_from_bloch, apply_filter, primed_frame, schmidt_protocol, FilterOperation, PrimedFrame, ProtocolOptions,
    SchmidtTranscript, TranscriptStep,
};
use entdetect_core::state::{product, random_pure, random_unitary_2, singlet, QuantumState};
use entdetect_core::tensor::{bloch_vector, local_expectation, pauli_matrix, BlochVector};
use entdetect_core::{Error, PauliAxis};
use nalgebra::{DVector, Matrix2};
use num_complex::Complex64 as C;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn theta_state(theta: f64, delta: f64) -> QuantumState {
    QuantumState::from_ket(DVector::from_vec(vec![
        C::new(theta.cos(), 0.0),
        C::new(0.0, 0.0),
        C::new(0.0, 0.0),
        C::from_polar(theta.sin(), delta),
    ]))
    .unwrap()
}

fn run(state: &QuantumState) -> SchmidtTranscript {
    schmidt_protocol(state, &ProtocolOptions::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
}

fn frames(state: &QuantumState) -> [PrimedFrame; 2] {
    [0, 1].map(|k| primed_frame(&bloch_vector(state, k).unwrap(), 1e-7).unwrap())
}

fn primed(state: &QuantumState, f: &[PrimedFrame; 2], a: char, b: char) -> f64 {
    local_expectation(state, &[f[0].axis(a).unwrap().observable(), f[1].axis(b).unwrap().observable()]).unwrap()
}

fn mat_close(a: &Matrix2<C>, b: &Matrix2<C>, tol: f64) -> bool {
    (a - b).iter().all(|z| z.norm() < tol)
}

#[test]
fn angles_examples() {
    let a = angles_from_bloch(&BlochVector::new(0.0, 0.0, 1.0), 1e-7).unwrap();
    assert_eq!((a.xi, a.phi), (0.0, 0.0));
    let a = angles_from_bloch(&BlochVector::new(0.0, 0.0, -0.4), 1e-7).unwrap();
    assert!((a.xi - FRAC_PI_2).abs() < 1e-12 && a.phi == 0.0);
    let a = angles_from_bloch(&BlochVector::new(1.0, 0.0, 0.0), 1e-7).unwrap();
    assert!((a.xi - FRAC_PI_4).abs() < 1e-12 && a.phi.abs() < 1e-12);
    // U maps the Bloch direction onto +z: U (α·σ) U† = σ_z.
    let u = a.unitary();
    assert!(mat_close(&(u * pauli_matrix(PauliAxis::X) * u.adjoint()), &pauli_matrix(PauliAxis::Z), 1e-12));
    assert!(matches!(angles_from_bloch(&BlochVector::new(1e-8, 0.0, 0.0), 1e-7), Err(Error::VanishingBloch(_))));
}

#[test]
fn angles_for_filtered_measured_vector() {
    let b = BlochVector::new(0.338, -0.186, -0.136);
    let a = angles_from_bloch(&b, 0.05).unwrap();
    assert!((0.0..=FRAC_PI_2).contains(&a.xi) && (0.0..2.0 * std::f64::consts::PI).contains(&a.phi));
    // The qubit with this Bloch vector has ⟨σ_z'⟩ = |b|.
    let rho = (Matrix2::identity() + b.observable()) * C::new(0.5, 0.0);
    let z = primed_frame(&b, 0.05).unwrap().z.observable();
    assert!(((rho * z).trace().re - b.norm()).abs() < 1e-12);
    // |a⟩ from the angles is the +1 eigenvector of α·σ.
    let [ka, kp] = a.basis();
    let ka = nalgebra::Vector2::new(ka[0], ka[1]);
    let kp = nalgebra::Vector2::new(kp[0], kp[1]);
    assert!(((z * ka) - ka).norm() < 1e-12);
    assert!(((z * kp) + kp).norm() < 1e-12);
    assert!(ka.dotc(&kp).norm() < 1e-12);
}

#[test]
fn frame_examples() {
    assert_eq!(primed_frame(&BlochVector::new(0.0, 0.0, 0.3), 1e-7).unwrap(), PrimedFrame::standard());
    let f = primed_frame(&BlochVector::new(1.0, 0.0, 0.0), 1e-7).unwrap();
    let close = |v: BlochVector, w: [f64; 3]| (v.x - w[0]).abs() < 1e-12 && (v.y - w[1]).abs() < 1e-12 && (v.z - w[2]).abs() < 1e-12;
    assert!(close(f.z, [1.0, 0.0, 0.0]));
    assert!(close(f.x, [0.0, 0.0, 1.0]));
    // U†σ_yU for this U is −σ_y; the frame stays right-handed.
    assert!(close(f.y, [0.0, -1.0, 0.0]));
    let down = primed_frame(&BlochVector::new(0.0, 0.0, -1.0), 1e-7).unwrap();
    assert!(close(down.z, [0.0, 0.0, -1.0]));
    assert!(matches!(primed_frame(&BlochVector::new(0.0, 0.0, 0.0), 1e-7), Err(Error::VanishingBloch(_))));
}

fn cross(a: BlochVector, b: BlochVector) -> [f64; 3] {
    [a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn frames_are_pauli_like(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
        let b = BlochVector::new(x, y, z);
        prop_assume!(b.norm() > 1e-3);
        let f = primed_frame(&b, 1e-7).unwrap();
        let ops = f.operators();
        let id = Matrix2::<C>::identity();
        for i in 0..3 {
            prop_assert!(mat_close(&(ops[i] * ops[i]), &id, 1e-10));
            for j in 0..i {
                prop_assert!(mat_close(&(ops[i] * ops[j] + ops[j] * ops[i]), &Matrix2::zeros(), 1e-10));
            }
        }
        let xy = cross(f.x, f.y);
        prop_assert!((xy[0] - f.z.x).abs() < 1e-10 && (xy[1] - f.z.y).abs() < 1e-10 && (xy[2] - f.z.z).abs() < 1e-10);
        // Matches U†σU built from the angles.
        let u = angles_from_bloch(&b, 1e-7).unwrap().unitary();
        for (axis, op) in [PauliAxis::X, PauliAxis::Y, PauliAxis::Z].iter().zip(ops.iter()) {
            prop_assert!(mat_close(&(u.adjoint() * pauli_matrix(*axis) * u), op, 1e-10));
        }
    }

    #[test]
    fn schmidt_frame_correlations(seed in any::<u64>()) {
        let st = random_pure(2, &mut ChaCha8Rng::seed_from_u64(seed));
        let f = frames(&st);
        prop_assert!((primed(&st, &f, 'z', 'z') - 1.0).abs() < 1e-9);
        prop_assert!((primed(&st, &f, 'x', 'x') + primed(&st, &f, 'y', 'y')).abs() < 1e-9);
        prop_assert!((primed(&st, &f, 'x', 'y') - primed(&st, &f, 'y', 'x')).abs() < 1e-9);
    }
}

#[test]
fn filter_examples() {
    let s = singlet();
    for eps in [0.0, 0.2, 0.5, 0.9] {
        let (f, p) = apply_filter(&s, &FilterOperation::standard(0, eps)).unwrap();
        assert!((p - (1.0 + eps * eps) / 2.0).abs() < 1e-12);
        let bob = common::bloch_oracle(f.density(), 2, 1);
        let len = bob.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((len - (1.0 - eps * eps) / (1.0 + eps * eps)).abs() < 1e-12);
    }
    // ε = 0 projects Alice onto |1⟩: product output.
    let (f, _) = apply_filter(&s, &FilterOperation::standard(0, 0.0)).unwrap();
    assert!(f.negativity(&[0]).unwrap() < 1e-12);
    assert!((bloch_vector(&f, 0).unwrap().z + 1.0).abs() < 1e-12);
    // Eigenstate of F: unchanged, probability ε².
    let st = product("0P").unwrap();
    let (f, p) = apply_filter(&st, &FilterOperation::standard(0, 0.5)).unwrap();
    assert!((p - 0.25).abs() < 1e-12);
    assert!((f.density() - st.density()).iter().all(|z| z.norm() < 1e-12));
    assert!(apply_filter(&s, &FilterOperation::standard(0, 1.0)).is_err());
    assert!(matches!(
        apply_filter(&product("0P").unwrap(), &FilterOperation::standard(0, 0.0)),
        Err(Error::FilterAnnihilated(_))
    ));
}

#[test]
fn protocol_two_steps_on_real_schmidt_state() {
    let t = run(&theta_state(FRAC_PI_8, 0.0));
    let c = t.correlations();
    assert_eq!(c.len(), 2);
    assert_eq!(c[0].0, "z'z'");
    assert!((c[0].1 - 1.0).abs() < 1e-9);
    assert!((c[1].1.abs() - FRAC_PI_4.sin()).abs() < 1e-9);
    assert!((t.sum() - 1.5).abs() < 1e-9 && t.entangled() && !t.filtered());
}

#[test]
fn protocol_needs_third_setting_for_imaginary_phase() {
    let th = 0.4;
    let t = run(&theta_state(th, FRAC_PI_2));
    let c = t.correlations();
    assert_eq!(c.iter().map(|(s, _)| s.as_str()).collect::<Vec<_>>(), ["z'z'", "y'y'", "x'y'"]);
    assert!(c[1].1.abs() < 1e-9);
    assert!((c[2].1.abs() - (2.0 * th).sin()).abs() < 1e-9);
    assert!((t.sum() - (1.0 + (2.0 * th).sin().powi(2))).abs() < 1e-9);
}

#[test]
fn singlet_takes_filter_branch() {
    let t = run(&singlet());
    assert!(t.filtered());
    assert_eq!(t.correlations().len(), 2);
    assert!((t.sum() - 2.0).abs() < 1e-9);
    let kinds: Vec<&str> = t
        .steps
        .iter()
        .map(|s| match s {
            TranscriptStep::Bloch { .. } => "bloch",
            TranscriptStep::Filter { .. } => "filter",
            TranscriptStep::Frame { .. } => "frame",
            TranscriptStep::Correlation { .. } => "correlation",
            TranscriptStep::Verdict { .. } => "verdict",
        })
        .collect();
    assert_eq!(kinds, ["bloch", "bloch", "filter", "bloch", "bloch", "frame", "frame", "correlation", "correlation", "verdict"]);
    match &t.steps[2] {
        TranscriptStep::Filter { success_probability, epsilon, .. } => {
            assert_eq!(*epsilon, 0.5);
            assert!((success_probability - 0.625).abs() < 1e-12);
        }
        _ => unreachable!(),
    }
}

#[test]
fn maximally_entangled_under_local_unitaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let us = [random_unitary_2(&mut rng), random_unitary_2(&mut rng)];
        let st = singlet().apply_local_unitaries(&us).unwrap();
        let t = run(&st);
        assert!(t.filtered() && t.entangled());
        assert!(t.correlations().len() <= 3);
    }
}

#[test]
fn product_states_are_not_flagged() {
    for labels in ["00", "HV", "RP", "LM"] {
        let t = run(&product(labels).unwrap());
        assert!(!t.entangled(), "{labels}");
        assert_eq!(t.correlations().len(), 3);
        assert!((t.sum() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn transcript_json_lines() {
    let t = run(&singlet());
    let text = t.to_json_lines();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["step"], "bloch");
    let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(last["step"], "verdict");
    assert_eq!(last["entangled"], true);
    assert_eq!(SchmidtTranscript::from_json_lines(&text).unwrap(), t);
    // Transcript invariant: verdict sum equals the recorded correlations.
    match t.steps.last().unwrap() {
        TranscriptStep::Verdict { sum, correlations, .. } => {
            assert_eq!(*sum, t.sum());
            assert_eq!(*correlations, 2);
        }
        _ => unreachable!(),
    }
}

#[test]
fn shots_mode() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let opts = ProtocolOptions { shots: Some(2000), ..Default::default() };
    let (mut detected, mut filtered) = (0, 0);
    for _ in 0..50 {
        let t = schmidt_protocol(&singlet(), &opts, &mut rng).unwrap();
        filtered += t.filtered() as usize;
        for s in &t.steps {
            if let TranscriptStep::Correlation { stderr, .. } = s {
                assert!(stderr.is_some());
            }
        }
        detected += t.entangled() as usize;
    }
    eprintln!("singlet at 2000 shots: filtered {filtered}/50, detected {detected}/50");
    assert!(filtered >= 25, "shot noise is mostly below the 0.05 vanishing threshold");
    assert!(detected >= 45);
    assert!(schmidt_protocol(&product("000").unwrap(), &opts, &mut rng).is_err());
}

#[test]
fn completeness_on_random_pure_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..2000 {
        let st = random_pure(2, &mut rng);
        let t = run(&st);
        assert!(t.entangled() && t.correlations().len() <= 3);
    }
}
