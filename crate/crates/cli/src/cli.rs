//! Command-line front end. Output goes to a caller-supplied writer so the
//! commands can be exercised without spawning a process.

use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use entdetect_core::decision::{run_auto, MeasureMode, SessionStatus};
use entdetect_core::lab::{load_config, run_experiment};
use entdetect_core::schmidt::{schmidt_protocol, ProtocolOptions};
use entdetect_core::state::from_spec;
use entdetect_core::{full_tensor, AxisPermutation, DecisionPolicy, PauliString, Strategy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::store::{Store, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "entdetect", version, about = "Detect entanglement from a few correlation measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Tree,
    Random,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the correlation tensor of a state.
    Tensor {
        /// e.g. `bell:psi-`, `werner:0.8`, `ket:0.6HH+0.8VV`, `ghz:3`
        state: String,
        /// Only settings with no identity factor.
        #[arg(long)]
        full_weight: bool,
        /// JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run the two-qubit Schmidt-frame protocol and print its transcript as JSON lines.
    Schmidt {
        state: String,
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Filter strength used when a Bloch vector vanishes.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Print the decision-tree branch for N qubits as JSON.
    Tree {
        n: usize,
        /// Root setting, e.g. ZZZ.
        #[arg(long)]
        seed: Option<String>,
        /// Axis relabeling as the images of X, Y, Z, e.g. ZXY.
        #[arg(long)]
        relabel: Option<String>,
    },
    /// Simulate an adaptive session against a known state.
    Detect {
        state: String,
        /// Finite-shot estimates instead of exact values.
        #[arg(long)]
        shots: Option<u64>,
        /// RNG seed for shot noise and random ordering.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, value_enum, default_value_t = StrategyArg::Tree)]
        strategy: StrategyArg,
        #[arg(long)]
        tree_seed: Option<String>,
        #[arg(long)]
        relabel: Option<String>,
        /// Print each recorded entry as a JSON line before the verdict.
        #[arg(long)]
        log: bool,
    },
    /// Monte-Carlo experiments.
    Lab {
        #[command(subcommand)]
        command: LabCommand,
    },
    /// Serve the session API over HTTP.
    Serve {
        #[arg(long, env = "ENTDETECT_HOST", default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "ENTDETECT_PORT", default_value_t = 8080)]
        port: u16,
        /// Session journals live here; without it sessions are kept in memory only.
        #[arg(long, env = "ENTDETECT_DATA_DIR")]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum LabCommand {
    /// Run an experiment described by a TOML or JSON config.
    Run {
        config: PathBuf,
        /// Directory for the CSV and summary files.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn invalid(message: impl ToString) -> Self {
        CliError { code: EXIT_INVALID, message: message.to_string() }
    }

    fn internal(message: impl ToString) -> Self {
        CliError { code: EXIT_INTERNAL, message: message.to_string() }
    }
}

impl From<entdetect_core::Error> for CliError {
    fn from(e: entdetect_core::Error) -> Self {
        use entdetect_core::Error as E;
        match e {
            E::Io(_) | E::Json(_) | E::StringSearch { .. } => CliError::internal(e),
            _ => CliError::invalid(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::internal(e)
    }
}

type CliResult = Result<(), CliError>;

fn pauli(s: &str) -> Result<PauliString, CliError> {
    s.parse().map_err(CliError::from)
}

fn perm(s: &str) -> Result<AxisPermutation, CliError> {
    s.parse().map_err(CliError::from)
}

fn fmt_value(v: f64) -> String {
    // Avoid printing -0.000000.
    let v = if v.abs() < 5e-13 { 0.0 } else { v };
    format!("{v:+.6}")
}

/// Runs one command. `serve` blocks until the server stops.
pub fn execute(cli: Cli, out: &mut dyn Write) -> CliResult {
    match cli.command {
        Command::Tensor { state, full_weight, json } => {
            let st = from_spec(&state)?;
            let t = full_tensor(&st);
            if json {
                let mut j = serde_json::to_value(t.to_json()).map_err(CliError::internal)?;
                j["v"] = json!(SCHEMA_VERSION);
                writeln!(out, "{j}")?;
            } else {
                for (s, v) in t.iter() {
                    if s.weight() == 0 || (full_weight && !s.is_full_weight()) {
                        continue;
                    }
                    writeln!(out, "{s}\t{}", fmt_value(v))?;
                }
            }
        }
        Command::Schmidt { state, shots, seed, epsilon } => {
            let st = from_spec(&state)?;
            let mut opts = ProtocolOptions { shots, ..Default::default() };
            if let Some(e) = epsilon {
                opts.epsilon = e;
            }
            let t = schmidt_protocol(&st, &opts, &mut ChaCha8Rng::seed_from_u64(seed))?;
            write!(out, "{}", t.to_json_lines())?;
        }
        Command::Tree { n, seed, relabel } => {
            let seed = seed.as_deref().map(pauli).transpose()?;
            let relabel = relabel.as_deref().map(perm).transpose()?;
            let policy = DecisionPolicy::new(n, None, Strategy::Tree { seed, relabel })?;
            let b = policy.tree().expect("tree strategy").to_json();
            let j = json!({
                "v": SCHEMA_VERSION,
                "n": b.n,
                "threshold": policy.threshold(),
                "nodes": b.nodes,
                "solid": b.solid,
                "dashed": b.dashed,
            });
            writeln!(out, "{j}")?;
        }
        Command::Detect { state, shots, seed, threshold, strategy, tree_seed, relabel, log } => {
            let st = from_spec(&state)?;
            let strategy = match strategy {
                StrategyArg::Tree => Strategy::Tree {
                    seed: tree_seed.as_deref().map(pauli).transpose()?,
                    relabel: relabel.as_deref().map(perm).transpose()?,
                },
                StrategyArg::Random if tree_seed.is_some() || relabel.is_some() => {
                    return Err(CliError::invalid("--tree-seed/--relabel only apply to --strategy tree"))
                }
                StrategyArg::Random => Strategy::Random { rng_seed: seed },
            };
            let policy = Arc::new(DecisionPolicy::new(st.n_qubits(), threshold, strategy)?);
            let mode = match shots {
                Some(0) => return Err(CliError::invalid("--shots must be at least 1")),
                Some(m) => MeasureMode::Shots(m),
                None => MeasureMode::Exact,
            };
            let session = run_auto(&st, policy, mode, &mut ChaCha8Rng::seed_from_u64(seed))?;
            if log {
                for e in session.log() {
                    writeln!(out, "{}", serde_json::to_string(e).map_err(CliError::internal)?)?;
                }
            }
            let verdict = match session.status() {
                SessionStatus::Entangled => "ENTANGLED",
                _ => "UNDETERMINED",
            };
            let err = session.sum_stderr().map(|e| format!(" ± {e:.3}")).unwrap_or_default();
            writeln!(out, "{verdict} after {} settings (sum={:.3}{err})", session.log().len(), session.sum())?;
        }
        Command::Lab { command: LabCommand::Run { config, out: dir } } => {
            let mut cfg = load_config(&config)?;
            if cfg.name.is_none() {
                cfg.name = config.file_stem().map(|s| s.to_string_lossy().into_owned());
            }
            std::fs::create_dir_all(&dir)?;
            let res = run_experiment(&cfg, &dir)?;
            writeln!(out, "wrote {}", res.csv_path.display())?;
            writeln!(out, "wrote {}", res.summary_path.display())?;
        }
        Command::Serve { host, port, data_dir } => {
            let addr: SocketAddr =
                format!("{host}:{port}").parse().map_err(|e| CliError::invalid(format!("bad address: {e}")))?;
            let store = match data_dir {
                Some(dir) => {
                    let (store, report) = Store::open(dir).map_err(CliError::internal)?;
                    tracing::info!(sessions = report.sessions, events = report.events, "replayed journals");
                    store
                }
                None => {
                    tracing::warn!("no --data-dir; sessions are not persisted");
                    Store::in_memory()
                }
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(Arc::new(store), addr))?;
        }
    }
    Ok(())
}

async fn serve(store: Arc<Store>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, crate::api::router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Parses `args`, runs the command, prints errors to stderr, returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
