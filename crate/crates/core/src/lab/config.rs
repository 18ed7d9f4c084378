//! Experiment configs (TOML or JSON) and their CSV + summary outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    bloch_correlation_stats, csv_err, detection_runs, full_setting_count, gain, stratify, EfficiencyCurve, Ensemble,
    StrategyTag, Stratify,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    #[default]
    Efficiency,
    Gain,
    BlochStats,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    #[default]
    Pure,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub experiment: Experiment,
    #[serde(default)]
    pub ensemble: EnsembleKind,
    #[serde(alias = "N")]
    pub n: usize,
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_strategy")]
    pub strategy: StrategyTag,
    /// Defaults to every full-weight setting.
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Mixed ensembles only; defaults to 2^N.
    #[serde(default)]
    pub ancilla_dim: Option<usize>,
    #[serde(default)]
    pub stratify_by: Option<Stratify>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Gain runs cover n..=n_max.
    #[serde(default)]
    pub n_max: Option<usize>,
}

fn default_strategy() -> StrategyTag {
    StrategyTag::Tree
}

fn default_bins() -> usize {
    4
}

impl LabConfig {
    pub fn ensemble(&self) -> Ensemble {
        match self.ensemble {
            EnsembleKind::Pure => Ensemble::Pure { n: self.n },
            EnsembleKind::Mixed => Ensemble::Mixed { n: self.n, ancilla_dim: self.ancilla_dim },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("samples must be >= 1".into()));
        }
        if !(2..=8).contains(&self.n) {
            return Err(Error::Config(format!("n={} not in 2..=8", self.n)));
        }
        if self.ancilla_dim == Some(0) {
            return Err(Error::Config("ancilla_dim must be >= 1".into()));
        }
        if self.ancilla_dim.is_some() && self.ensemble == EnsembleKind::Pure {
            return Err(Error::Config("ancilla_dim only applies to mixed ensembles".into()));
        }
        if let Some(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("threshold {t} not in [0,1]")));
            }
        }
        if self.max_steps == Some(0) {
            return Err(Error::Config("max_steps must be >= 1".into()));
        }
        if let Some(m) = self.n_max {
            if m < self.n || m > 8 {
                return Err(Error::Config(format!("n_max={m} must be in n..=8")));
            }
        }
        Ok(())
    }
}

/// Parses by extension; unknown extensions try TOML then JSON.
pub fn parse_config(text: &str, ext: Option<&str>) -> Result<LabConfig> {
    let toml_err = |e: toml::de::Error| Error::Config(format!("toml: {}", e.message()));
    let cfg: LabConfig = match ext {
        Some("json") => serde_json::from_str(text).map_err(|e| Error::Config(format!("json: {e}")))?,
        Some("toml") => toml::from_str(text).map_err(toml_err)?,
        _ => match toml::from_str(text) {
            Ok(c) => c,
            Err(e) => serde_json::from_str(text).map_err(|_| toml_err(e))?,
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<LabConfig> {
    let text = fs::read_to_string(path)?;
    parse_config(&text, path.extension().and_then(|e| e.to_str()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: serde_json::Value,
}

fn write_csv<S: Serialize>(header: &[&str], rows: impl IntoIterator<Item = S>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Config(e.to_string()))?).unwrap())
}

/// Runs the experiment and writes `<stem>.csv` and `<stem>.summary.json` into `out_dir`.
pub fn run_experiment(cfg: &LabConfig, out_dir: &Path) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let stem = cfg.name.clone().unwrap_or_else(|| {
        let kind = match cfg.experiment {
            Experiment::Efficiency => "efficiency",
            Experiment::Gain => "gain",
            Experiment::BlochStats => "bloch_stats",
        };
        format!("{kind}_n{}_s{}", cfg.n, cfg.seed)
    });
    let mut summary = json!({ "v": 1, "config": cfg });
    let csv = match cfg.experiment {
        Experiment::Efficiency => {
            let ens = cfg.ensemble();
            let max_steps = cfg.max_steps.unwrap_or(full_setting_count(cfg.n));
            let runs = detection_runs(&ens, cfg.strategy, cfg.threshold, cfg.samples, cfg.seed)?;
            let curve = EfficiencyCurve::from_runs(ens, cfg.strategy, &runs, max_steps);
            summary["measure"] = json!(ens.measure());
            summary["entangled"] = json!(curve.entangled);
            summary["final_fraction"] = json!(curve.fraction_detected.last());
            match cfg.stratify_by {
                None => curve.to_csv()?,
                Some(by) => {
                    let strata = stratify(ens, cfg.strategy, &runs, by, cfg.bins, max_steps);
                    summary["strata"] =
                        json!(strata.iter().map(|s| json!({"lo": s.lo, "hi": s.hi, "entangled": s.curve.entangled})).collect::<Vec<_>>());
                    let rows = strata.iter().enumerate().flat_map(|(b, s)| {
                        (0..s.curve.steps.len())
                            .map(move |i| (b, s.lo, s.hi, s.curve.steps[i], s.curve.fraction_detected[i], s.curve.stderr[i]))
                    });
                    write_csv(&["bin", "lo", "hi", "step", "fraction", "stderr"], rows)?
                }
            }
        }
        Experiment::Gain => {
            if cfg.ensemble != EnsembleKind::Pure {
                return Err(Error::Config("gain runs use pure states".into()));
            }
            let report = gain(cfg.n..=cfg.n_max.unwrap_or(cfg.n), cfg.samples, cfg.seed)?;
            summary["measure"] = json!(Ensemble::Pure { n: cfg.n }.measure());
            summary["gain"] = json!(report.entries);
            write_csv(
                &["n", "gain", "stderr", "at_fraction", "mean_steps_tree", "mean_steps_random"],
                report.entries.iter().map(|e| (e.n, e.gain, e.stderr, e.at_fraction, e.mean_steps_tree, e.mean_steps_random)),
            )?
        }
        Experiment::BlochStats => {
            let stats = bloch_correlation_stats(cfg.n, cfg.samples, cfg.seed)?;
            summary["measure"] = json!(Ensemble::Pure { n: cfg.n }.measure());
            summary["bloch"] = json!(stats);
            write_csv(&["n", "fraction", "stderr", "mean_ratio"], [(stats.n, stats.fraction, stats.stderr, stats.mean_ratio)])?
        }
    };
    fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let summary_path = out_dir.join(format!("{stem}.summary.json"));
    fs::write(&csv_path, csv)?;
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    Ok(ExperimentOutput { csv_path, summary_path, summary })
}
