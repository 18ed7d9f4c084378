//! Monte-Carlo studies of how quickly each strategy detects entanglement.
//!
//! Sample i always draws from stream i of a ChaCha generator keyed by the
//! run seed, so results do not depend on how rayon splits the work.

pub mod config;
pub mod maxcorr;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decision::{run_auto, DecisionPolicy, MeasureMode, Strategy};
use crate::error::{Error, Result};
use crate::state::{random_mixed, random_pure, QuantumState};
use crate::tensor::{bloch_vector, local_expectation};

pub use config::{load_config, run_experiment, LabConfig};
pub use maxcorr::{max_correlation, max_correlation_with, MaxCorrelation, MaxCorrelationOptions};

/// Pure states count as entangled when some single-party reduction is mixed by more than this.
const PURE_PRODUCT_TOL: f64 = 1e-10;
/// Mixed two-qubit states count as entangled above this negativity.
const NEGATIVITY_TOL: f64 = 1e-12;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ensemble {
    /// Haar-random pure states.
    Pure { n: usize },
    /// Induced measure: trace out a `ancilla_dim`-level ancilla from a Haar-random pure state.
    Mixed { n: usize, ancilla_dim: Option<usize> },
}

impl Ensemble {
    pub fn n_qubits(&self) -> usize {
        match *self {
            Ensemble::Pure { n } | Ensemble::Mixed { n, .. } => n,
        }
    }

    pub fn ancilla_dim(&self) -> Option<usize> {
        match *self {
            Ensemble::Pure { .. } => None,
            Ensemble::Mixed { n, ancilla_dim } => Some(ancilla_dim.unwrap_or(1 << n)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> QuantumState {
        match *self {
            Ensemble::Pure { n } => random_pure(n, rng),
            Ensemble::Mixed { n, .. } => random_mixed(n, self.ancilla_dim().unwrap(), rng),
        }
    }

    /// Human-readable name of the sampling measure, for experiment outputs.
    pub fn measure(&self) -> String {
        match *self {
            Ensemble::Pure { n } => format!("Haar-random pure states of {n} qubits (normalized complex Gaussian vectors)"),
            Ensemble::Mixed { n, .. } => format!(
                "induced measure: partial trace over a {}-dimensional ancilla of a Haar-random pure state of {n} qubits plus ancilla",
                self.ancilla_dim().unwrap()
            ),
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_qubits();
        match self {
            Ensemble::Pure { .. } if (2..=8).contains(&n) => Ok(()),
            Ensemble::Mixed { ancilla_dim, .. } if n == 2 && ancilla_dim.is_none_or(|k| k >= 1) => Ok(()),
            Ensemble::Mixed { .. } => Err(Error::Config("mixed ensembles need N=2 (no entanglement oracle beyond)".into())),
            _ => Err(Error::Config(format!("N={n} not in 2..=8"))),
        }
    }

    /// Pure: not a product of single-qubit states. Mixed (N=2): nonzero negativity.
    pub fn is_entangled(&self, state: &QuantumState) -> bool {
        match self {
            Ensemble::Pure { .. } => (0..state.n_qubits()).any(|k| {
                let r = state.reduced(&[k]).unwrap();
                r.iter().map(|z| z.norm_sqr()).sum::<f64>() < 1.0 - PURE_PRODUCT_TOL
            }),
            Ensemble::Mixed { .. } => state.negativity(&[0]).unwrap() > NEGATIVITY_TOL,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyTag {
    Tree,
    Random,
}

/// Outcome for one sampled state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub entangled: bool,
    /// Settings measured when the sum crossed 1.
    pub step: Option<usize>,
    pub purity: f64,
    pub negativity: Option<f64>,
}

/// Samples `samples` states and runs the strategy on each in exact mode.
pub fn detection_runs(
    ensemble: &Ensemble,
    strategy: StrategyTag,
    threshold: Option<f64>,
    samples: usize,
    seed: u64,
) -> Result<Vec<Run>> {
    ensemble.validate()?;
    let n = ensemble.n_qubits();
    let tree = match strategy {
        StrategyTag::Tree => Some(Arc::new(DecisionPolicy::new(n, threshold, Strategy::default())?)),
        StrategyTag::Random => None,
    };
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let state = ensemble.sample(&mut rng);
            let entangled = ensemble.is_entangled(&state);
            let negativity = matches!(ensemble, Ensemble::Mixed { .. }).then(|| state.negativity(&[0]).unwrap());
            let policy = match &tree {
                Some(p) => p.clone(),
                None => Arc::new(DecisionPolicy::new(n, threshold, Strategy::Random { rng_seed: rng.random() })?),
            };
            let session = run_auto(&state, policy, MeasureMode::Exact, &mut rng)?;
            Ok(Run { entangled, step: session.detection_step(), purity: state.purity(), negativity })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCurve {
    pub ensemble: Ensemble,
    pub strategy: StrategyTag,
    pub samples: usize,
    pub entangled: usize,
    pub steps: Vec<usize>,
    pub fraction_detected: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl EfficiencyCurve {
    /// Fraction of entangled runs detected within k settings, k = 1..=max_steps.
    pub fn from_runs(ensemble: Ensemble, strategy: StrategyTag, runs: &[Run], max_steps: usize) -> Self {
        let ent: Vec<&Run> = runs.iter().filter(|r| r.entangled).collect();
        let m = ent.len().max(1) as f64;
        let steps: Vec<usize> = (1..=max_steps).collect();
        let fraction: Vec<f64> =
            steps.iter().map(|&k| ent.iter().filter(|r| r.step.is_some_and(|s| s <= k)).count() as f64 / m).collect();
        let stderr = fraction.iter().map(|f| (f * (1.0 - f) / m).sqrt()).collect();
        EfficiencyCurve {
            ensemble,
            strategy,
            samples: runs.len(),
            entangled: ent.len(),
            steps,
            fraction_detected: fraction,
            stderr,
        }
    }

    pub fn at(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.fraction_detected.get(k - 1).copied().unwrap_or(*self.fraction_detected.last().unwrap_or(&0.0))
    }

    /// Smallest (interpolated) step count reaching fraction `f`; `None` if never reached.
    pub fn steps_for(&self, f: f64) -> Option<f64> {
        let mut prev = 0.0;
        for (i, &cur) in self.fraction_detected.iter().enumerate() {
            if cur >= f {
                let k = i as f64;
                return Some(if cur > prev { k + (f - prev) / (cur - prev) } else { k + 1.0 });
            }
            prev = cur;
        }
        None
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["step", "fraction", "stderr"]).map_err(csv_err)?;
        for i in 0..self.steps.len() {
            w.serialize((self.steps[i], self.fraction_detected[i], self.stderr[i])).map_err(csv_err)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Config(e.to_string()))?).unwrap())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

pub fn full_setting_count(n: usize) -> usize {
    3usize.pow(n as u32)
}

pub fn efficiency(
    ensemble: &Ensemble,
    strategy: StrategyTag,
    max_steps: usize,
    samples: usize,
    seed: u64,
) -> Result<EfficiencyCurve> {
    if samples == 0 {
        return Err(Error::Config("samples must be >= 1".into()));
    }
    let runs = detection_runs(ensemble, strategy, None, samples, seed)?;
    Ok(EfficiencyCurve::from_runs(*ensemble, strategy, &runs, max_steps))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stratify {
    Purity,
    Negativity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub lo: f64,
    pub hi: f64,
    pub curve: EfficiencyCurve,
}

/// Splits entangled runs into equally populated bins of purity or negativity.
pub fn stratify(ensemble: Ensemble, strategy: StrategyTag, runs: &[Run], by: Stratify, bins: usize, max_steps: usize) -> Vec<Stratum> {
    let key = |r: &Run| match by {
        Stratify::Purity => r.purity,
        Stratify::Negativity => r.negativity.unwrap_or(0.0),
    };
    let mut ent: Vec<Run> = runs.iter().filter(|r| r.entangled).copied().collect();
    ent.sort_by(|a, b| key(a).total_cmp(&key(b)));
    let bins = bins.max(1).min(ent.len().max(1));
    (0..bins)
        .filter_map(|b| {
            let chunk = &ent[b * ent.len() / bins..(b + 1) * ent.len() / bins];
            let (first, last) = (chunk.first()?, chunk.last()?);
            Some(Stratum { lo: key(first), hi: key(last), curve: EfficiencyCurve::from_runs(ensemble, strategy, chunk, max_steps) })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainEntry {
    pub n: usize,
    /// max over detection fractions of (steps_random − steps_tree).
    pub gain: f64,
    /// Batch-means standard error.
    pub stderr: f64,
    pub at_fraction: f64,
    pub mean_steps_tree: f64,
    pub mean_steps_random: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub samples: usize,
    pub seed: u64,
    pub entries: Vec<GainEntry>,
}

const GAIN_BATCHES: usize = 10;

/// Largest horizontal gap between the random and tree curves over
/// fractions 0.01..0.99, along with the fraction where it occurs.
pub fn max_gap(tree: &EfficiencyCurve, random: &EfficiencyCurve) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 1..100 {
        let f = i as f64 / 100.0;
        if let (Some(kt), Some(kr)) = (tree.steps_for(f), random.steps_for(f)) {
            if kr - kt > best.0 {
                best = (kr - kt, f);
            }
        }
    }
    if best.0 == f64::NEG_INFINITY {
        (0.0, 0.0)
    } else {
        best
    }
}

fn mean_step(runs: &[Run]) -> f64 {
    let steps: Vec<f64> = runs.iter().filter(|r| r.entangled).filter_map(|r| r.step.map(|s| s as f64)).collect();
    steps.iter().sum::<f64>() / steps.len().max(1) as f64
}

/// Largest step advantage of the tree over random order for one ensemble,
/// with σ from interleaved batches.
pub fn gain_for(ensemble: &Ensemble, samples: usize, seed: u64) -> Result<GainEntry> {
    let ens = *ensemble;
    let n = ens.n_qubits();
    let max_steps = full_setting_count(n);
    let tree_runs = detection_runs(&ens, StrategyTag::Tree, None, samples, seed)?;
    let rand_runs = detection_runs(&ens, StrategyTag::Random, None, samples, seed)?;
    let curve = |runs: &[Run], s| EfficiencyCurve::from_runs(ens, s, runs, max_steps);
    let (g, at) = max_gap(&curve(&tree_runs, StrategyTag::Tree), &curve(&rand_runs, StrategyTag::Random));
    let batch: Vec<f64> = (0..GAIN_BATCHES)
        .map(|b| {
            let pick = |runs: &[Run]| runs.iter().skip(b).step_by(GAIN_BATCHES).copied().collect::<Vec<_>>();
            max_gap(&curve(&pick(&tree_runs), StrategyTag::Tree), &curve(&pick(&rand_runs), StrategyTag::Random)).0
        })
        .collect();
    let mean = batch.iter().sum::<f64>() / GAIN_BATCHES as f64;
    let var = batch.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (GAIN_BATCHES - 1) as f64;
    Ok(GainEntry {
        n,
        gain: g,
        stderr: (var / GAIN_BATCHES as f64).sqrt(),
        at_fraction: at,
        mean_steps_tree: mean_step(&tree_runs),
        mean_steps_random: mean_step(&rand_runs),
    })
}

/// Pure-state gain for each N in the range.
pub fn gain(n_range: std::ops::RangeInclusive<usize>, samples: usize, seed: u64) -> Result<GainReport> {
    let entries = n_range.map(|n| gain_for(&Ensemble::Pure { n }, samples, seed)).collect::<Result<Vec<_>>>()?;
    Ok(GainReport { samples, seed, entries })
}

pub const BLOCH_RATIO: f64 = 0.75;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochStats {
    pub n: usize,
    pub samples: usize,
    pub fraction: f64,
    pub stderr: f64,
    /// Mean of (Bloch correlation / maximal correlation).
    pub mean_ratio: f64,
}

/// Correlation measured along every party's Bloch direction, or `None` if some vector vanishes.
pub fn bloch_correlation(state: &QuantumState) -> Option<f64> {
    let mut ops = Vec::with_capacity(state.n_qubits());
    for k in 0..state.n_qubits() {
        let b = bloch_vector(state, k).ok()?;
        if b.norm() <= 1e-12 {
            return None;
        }
        ops.push(b.unit()?.observable());
    }
    local_expectation(state, &ops).ok()
}

/// Fraction of Haar-random pure states whose Bloch correlation exceeds ¾ of
/// their maximal correlation (in magnitude).
pub fn bloch_correlation_stats(n: usize, samples: usize, seed: u64) -> Result<BlochStats> {
    if !(2..=5).contains(&n) || samples == 0 {
        return Err(Error::Config(format!("bloch statistics need N in 2..=5 and samples >= 1 (got N={n}, {samples})")));
    }
    let ratios: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            loop {
                let state = random_pure(n, &mut rng);
                if let Some(tb) = bloch_correlation(&state) {
                    return tb.abs() / max_correlation(&state).value;
                }
            }
        })
        .collect();
    let hits = ratios.iter().filter(|&&r| r > BLOCH_RATIO).count() as f64;
    let f = hits / samples as f64;
    Ok(BlochStats {
        n,
        samples,
        fraction: f,
        stderr: (f * (1.0 - f) / samples as f64).sqrt(),
        mean_ratio: ratios.iter().sum::<f64>() / samples as f64,
    })
}
