//! Two-qubit detection in the Schmidt frame.
//!
//! Local Bloch vectors fix each party's Schmidt basis. Measuring z'z' and
//! y'y' in those bases (plus x'y' when the unknown relative phase hides y'y')
//! is enough for every pure entangled state. Maximally entangled states have
//! no Bloch vectors, so Alice filters first to make them appear.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::criterion::exceeds;
use crate::error::{Error, Result};
use crate::state::QuantumState;
use crate::tensor::{bloch_vector, local_expectation, sample_from_value, shot_stderr, BlochVector};

/// |b| below this counts as vanishing in exact mode.
pub const EXACT_VANISHING: f64 = 1e-7;
/// Same, for finite-shot estimates.
pub const SHOTS_VANISHING: f64 = 0.05;
pub const DEFAULT_EPSILON: f64 = 0.5;

const DEGENERATE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchmidtAngles {
    pub xi: f64,
    pub phi: f64,
}

impl SchmidtAngles {
    /// (|a⟩, |a⊥⟩) = (cos ξ|0⟩ + e^{iφ} sin ξ|1⟩, sin ξ|0⟩ − e^{iφ} cos ξ|1⟩).
    pub fn basis(&self) -> [[C64; 2]; 2] {
        let e = C64::from_polar(1.0, self.phi);
        let (c, s) = (self.xi.cos(), self.xi.sin());
        [[C64::from(c), e * s], [C64::from(s), -e * c]]
    }

    /// U = |0⟩⟨a| + |1⟩⟨a⊥|, which rotates the Schmidt basis onto the standard one.
    pub fn unitary(&self) -> Matrix2<C64> {
        let [a, ap] = self.basis();
        Matrix2::new(a[0].conj(), a[1].conj(), ap[0].conj(), ap[1].conj())
    }
}

fn unit_or_vanishing(b: &BlochVector, threshold: f64) -> Result<BlochVector> {
    let r = b.norm();
    if r.is_nan() || r <= threshold {
        return Err(Error::VanishingBloch(r));
    }
    Ok(b.unit().unwrap())
}

/// ξ ∈ [0, π/2], φ ∈ [0, 2π) with α = (sin2ξ cosφ, sin2ξ sinφ, cos2ξ).
pub fn angles_from_bloch(b: &BlochVector, threshold: f64) -> Result<SchmidtAngles> {
    let a = unit_or_vanishing(b, threshold)?;
    if a.z >= 1.0 - DEGENERATE_TOL {
        return Ok(SchmidtAngles { xi: 0.0, phi: 0.0 });
    }
    if a.z <= -1.0 + DEGENERATE_TOL {
        return Ok(SchmidtAngles { xi: PI / 2.0, phi: 0.0 });
    }
    let xi = ((1.0 + a.z) / 2.0).sqrt().clamp(0.0, 1.0).acos();
    let phi = a.y.atan2(a.x).rem_euclid(2.0 * PI);
    Ok(SchmidtAngles { xi, phi })
}

/// Measurement directions σ_x', σ_y', σ_z' (each is n·σ for the stored n).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimedFrame {
    pub x: BlochVector,
    pub y: BlochVector,
    pub z: BlochVector,
}

impl PrimedFrame {
    pub fn standard() -> Self {
        PrimedFrame {
            x: BlochVector::new(1.0, 0.0, 0.0),
            y: BlochVector::new(0.0, 1.0, 0.0),
            z: BlochVector::new(0.0, 0.0, 1.0),
        }
    }

    pub fn operators(&self) -> [Matrix2<C64>; 3] {
        [self.x.observable(), self.y.observable(), self.z.observable()]
    }

    pub fn axis(&self, label: char) -> Option<BlochVector> {
        match label {
            'x' | 'X' => Some(self.x),
            'y' | 'Y' => Some(self.y),
            'z' | 'Z' => Some(self.z),
            _ => None,
        }
    }
}

/// U†σ_nU with U from [`angles_from_bloch`]. At the poles the formulas are 0/0:
/// a Bloch vector along +z keeps the standard frame, one along −z uses
/// (σ_x, −σ_y, −σ_z) so that σ_z' still points along the Bloch vector.
pub fn primed_frame(b: &BlochVector, threshold: f64) -> Result<PrimedFrame> {
    let a = unit_or_vanishing(b, threshold)?;
    if a.z >= 1.0 - DEGENERATE_TOL {
        return Ok(PrimedFrame::standard());
    }
    if a.z <= -1.0 + DEGENERATE_TOL {
        return Ok(PrimedFrame {
            x: BlochVector::new(1.0, 0.0, 0.0),
            y: BlochVector::new(0.0, -1.0, 0.0),
            z: BlochVector::new(0.0, 0.0, -1.0),
        });
    }
    let s = (1.0 - a.z * a.z).sqrt();
    Ok(PrimedFrame {
        x: BlochVector::new(-a.x * a.z / s, -a.y * a.z / s, (1.0 - a.z * a.z) / s),
        y: BlochVector::new(a.y / s, -a.x / s, 0.0),
        z: a,
    })
}

/// F = ε|b0⟩⟨b0| + |b1⟩⟨b1| on one party.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterOperation {
    pub epsilon: f64,
    pub party: usize,
    pub basis: [[C64; 2]; 2],
}

impl FilterOperation {
    pub fn standard(party: usize, epsilon: f64) -> Self {
        let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        FilterOperation { epsilon, party, basis: [[l, o], [o, l]] }
    }

    pub fn operator(&self) -> Matrix2<C64> {
        let proj = |v: &[C64; 2]| Matrix2::new(v[0] * v[0].conj(), v[0] * v[1].conj(), v[1] * v[0].conj(), v[1] * v[1].conj());
        proj(&self.basis[0]) * C64::from(self.epsilon) + proj(&self.basis[1])
    }
}

/// Filters `party` and renormalizes; returns the state and Tr[(F†F ⊗ 1)ρ].
pub fn apply_filter(state: &QuantumState, filter: &FilterOperation) -> Result<(QuantumState, f64)> {
    if !(0.0..1.0).contains(&filter.epsilon) {
        return Err(Error::OutOfRange(format!("epsilon={} not in [0, 1)", filter.epsilon)));
    }
    let [b0, b1] = filter.basis;
    let dot = b0[0].conj() * b1[0] + b0[1].conj() * b1[1];
    let n0 = b0[0].norm_sqr() + b0[1].norm_sqr();
    let n1 = b1[0].norm_sqr() + b1[1].norm_sqr();
    if dot.norm() > 1e-10 || (n0 - 1.0).abs() > 1e-10 || (n1 - 1.0).abs() > 1e-10 {
        return Err(Error::OutOfRange("filter basis is not orthonormal".into()));
    }
    state.apply_local_operator(filter.party, &filter.operator())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "lowercase")]
pub enum TranscriptStep {
    Bloch {
        party: usize,
        filtered: bool,
        vector: BlochVector,
        norm: f64,
    },
    Filter {
        party: usize,
        epsilon: f64,
        basis: String,
        success_probability: f64,
    },
    Frame {
        party: usize,
        xi: f64,
        phi: f64,
        x: BlochVector,
        y: BlochVector,
        z: BlochVector,
    },
    Correlation {
        setting: String,
        value: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        stderr: Option<f64>,
    },
    Verdict {
        sum: f64,
        entangled: bool,
        correlations: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchmidtTranscript {
    pub steps: Vec<TranscriptStep>,
}

impl SchmidtTranscript {
    pub fn correlations(&self) -> Vec<(String, f64)> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                TranscriptStep::Correlation { setting, value, .. } => Some((setting.clone(), *value)),
                _ => None,
            })
            .collect()
    }

    pub fn sum(&self) -> f64 {
        self.correlations().iter().map(|(_, v)| v * v).sum()
    }

    pub fn entangled(&self) -> bool {
        exceeds(self.sum())
    }

    pub fn filtered(&self) -> bool {
        self.steps.iter().any(|s| matches!(s, TranscriptStep::Filter { .. }))
    }

    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        self.steps.iter().map(|s| serde_json::to_string(s).expect("serializable") + "\n").collect()
    }

    pub fn from_json_lines(text: &str) -> Result<Self> {
        let steps = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(SchmidtTranscript { steps })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolOptions {
    pub epsilon: f64,
    /// `None` for exact expectation values.
    pub shots: Option<u64>,
    /// Defaults to [`EXACT_VANISHING`] or [`SHOTS_VANISHING`] by mode.
    pub vanishing_threshold: Option<f64>,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        ProtocolOptions { epsilon: DEFAULT_EPSILON, shots: None, vanishing_threshold: None }
    }
}

struct Meter<'a, R: Rng + ?Sized> {
    shots: Option<u64>,
    rng: &'a mut R,
}

impl<R: Rng + ?Sized> Meter<'_, R> {
    fn measure(&mut self, exact: f64) -> (f64, Option<f64>) {
        match self.shots {
            None => (exact, None),
            Some(m) => {
                let v = sample_from_value(exact, m, self.rng);
                (v, Some(shot_stderr(v, m)))
            }
        }
    }

    fn bloch(&mut self, state: &QuantumState, party: usize) -> Result<BlochVector> {
        let b = bloch_vector(state, party)?;
        Ok(BlochVector::new(self.measure(b.x).0, self.measure(b.y).0, self.measure(b.z).0))
    }
}

/// Runs the full two-qubit procedure and records every step.
pub fn schmidt_protocol<R: Rng + ?Sized>(
    state: &QuantumState,
    opts: &ProtocolOptions,
    rng: &mut R,
) -> Result<SchmidtTranscript> {
    if state.n_qubits() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: state.n_qubits() });
    }
    let threshold = opts
        .vanishing_threshold
        .unwrap_or(if opts.shots.is_some() { SHOTS_VANISHING } else { EXACT_VANISHING });
    let mut meter = Meter { shots: opts.shots, rng };
    let mut steps = Vec::new();

    let mut blochs = [meter.bloch(state, 0)?, meter.bloch(state, 1)?];
    for (party, b) in blochs.iter().enumerate() {
        steps.push(TranscriptStep::Bloch { party, filtered: false, vector: *b, norm: b.norm() });
    }

    if blochs.iter().any(|b| b.norm() <= threshold) {
        let filter = FilterOperation::standard(0, opts.epsilon);
        let (filtered, p) = apply_filter(state, &filter)?;
        steps.push(TranscriptStep::Filter {
            party: 0,
            epsilon: opts.epsilon,
            basis: "standard".into(),
            success_probability: p,
        });
        blochs = [meter.bloch(&filtered, 0)?, meter.bloch(&filtered, 1)?];
        for (party, b) in blochs.iter().enumerate() {
            steps.push(TranscriptStep::Bloch { party, filtered: true, vector: *b, norm: b.norm() });
        }
    }

    let mut frames = [PrimedFrame::standard(); 2];
    for (party, b) in blochs.iter().enumerate() {
        let angles = angles_from_bloch(b, threshold)?;
        frames[party] = primed_frame(b, threshold)?;
        let f = frames[party];
        steps.push(TranscriptStep::Frame { party, xi: angles.xi, phi: angles.phi, x: f.x, y: f.y, z: f.z });
    }

    let mut sum = 0.0;
    let mut count = 0;
    for (a, b) in [('z', 'z'), ('y', 'y'), ('x', 'y')] {
        if count == 2 && exceeds(sum) {
            break;
        }
        let ops = [frames[0].axis(a).unwrap().observable(), frames[1].axis(b).unwrap().observable()];
        let (value, stderr) = meter.measure(local_expectation(state, &ops)?);
        sum += value * value;
        count += 1;
        steps.push(TranscriptStep::Correlation { setting: format!("{a}'{b}'"), value, stderr });
    }
    steps.push(TranscriptStep::Verdict { sum, entangled: exceeds(sum), correlations: count });
    Ok(SchmidtTranscript { steps })
}
