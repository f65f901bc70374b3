//! `hvacsim`: data preparation, training, evaluation, experiment matrices and the live service.
//!
//! Every command that takes `--seed` lets `HVACSIM_SEED` override it.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hvac_core::controllers::{MpcConfig, MpcController, Policy, RuleBasedController};
use hvac_core::domain::{seed_from_env, ScenarioId, SimConfig};
use hvac_core::env::OccupancyForecasts;
use hvac_core::ingest::{
    align, load_hourly_csv, load_occupancy_csv, resample_15min, synth_traces, write_dataset, SeriesKind, SynthProfile,
};
use hvac_harness::{
    compute_metrics, curve_csv, emit_report, evaluate, prepare_data, run_matrix, sensitivity_sweep, sim_config,
    split_forecasts, train_hitl, train_predictor, write_atomic, ControllerKind, DataSource, DataSpec, ExperimentPlan,
    PreparedData, ResultsStore, DEFAULT_P_MAX_GRID,
};
use hvac_nn::Checkpoint;
use hvac_ppo::{ActMode, PolicyNet, PpoConfig, RlPolicy};
use hvac_predictor::{PredictorConfig, PredictorModel};

#[derive(Parser)]
#[command(name = "hvacsim", version, about = "Occupant-feedback HVAC simulation and control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resample occupancy, weather and price CSVs to 15 minutes and write a dataset.
    Ingest {
        #[arg(long)]
        occupancy: PathBuf,
        #[arg(long)]
        weather: PathBuf,
        #[arg(long)]
        price: PathBuf,
        #[arg(long, default_value_t = 1)]
        residents: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic dataset.
    Synth {
        #[arg(long, default_value_t = 30)]
        days: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the occupancy predictor on the training split.
    TrainPredictor {
        #[command(flatten)]
        data: DataArgs,
        /// TOML predictor configuration; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a HITL policy with PPO.
    TrainRl {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// TOML PPO configuration; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        updates: Option<usize>,
        /// Predictor checkpoint for scenario S4.
        #[arg(long)]
        predictor: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Training curve CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Evaluate one controller on the test days and print metrics as JSON.
    Run {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value = "rule")]
        controller: ControllerKind,
        /// Policy checkpoint for the learned controller.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        predictor: Option<PathBuf>,
        /// Directory for one line-delimited record file per day.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Run every cell of an experiment plan, reusing completed cells in the store.
    Matrix {
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        store: PathBuf,
    },
    /// Evaluate the plan's policies across override caps.
    Sweep {
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Write CSV tables and a summary from a results store.
    Report {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Start the live-session service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8787")]
        addr: std::net::SocketAddr,
        #[arg(long)]
        records: Option<PathBuf>,
        /// Built dashboard bundle to serve.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset written by `ingest` or `synth`; the bundled generator otherwise.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    synth_days: usize,
    #[arg(long, default_value_t = 0)]
    synth_seed: u64,
    #[arg(long, default_value_t = 23)]
    train_days: usize,
    #[arg(long, default_value_t = 7)]
    test_days: usize,
}

impl DataArgs {
    fn spec(&self) -> DataSpec {
        let source = match &self.dataset {
            Some(path) => DataSource::Dataset { path: path.clone() },
            None => DataSource::Synth {
                days: self.synth_days,
                seed: self.synth_seed,
            },
        };
        DataSpec {
            source,
            train_days: self.train_days,
            test_days: self.test_days,
        }
    }
}

#[derive(Args, Clone)]
struct SimArgs {
    #[arg(long, default_value = "S1")]
    scenario: ScenarioId,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    p_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Full simulation configuration in TOML; overrides the flags above.
    #[arg(long)]
    sim_config: Option<PathBuf>,
}

impl SimArgs {
    fn config(&self) -> Result<SimConfig> {
        let mut cfg = match &self.sim_config {
            Some(p) => SimConfig::load(p)?,
            None => sim_config(self.scenario, self.beta, self.p_max, self.seed),
        };
        cfg.scenario.seed = seed_from_env(cfg.scenario.seed);
        Ok(cfg)
    }
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn forecasts_for(scenario: ScenarioId, predictor: Option<&Path>, data: &PreparedData) -> Result<Option<(Arc<OccupancyForecasts>, Arc<OccupancyForecasts>)>> {
    if scenario != ScenarioId::S4 {
        return Ok(None);
    }
    let Some(path) = predictor else { bail!("scenario S4 needs --predictor") };
    let f = split_forecasts(&PredictorModel::load(path)?, data)?;
    Ok(Some((f.train, f.test)))
}

fn load_plan(path: Option<&Path>) -> Result<ExperimentPlan> {
    let mut plan = match path {
        Some(p) => ExperimentPlan::load(p)?,
        None => ExperimentPlan::default(),
    };
    if let Ok(v) = std::env::var("HVACSIM_SEED") {
        let s: u64 = v.parse().context("HVACSIM_SEED must be an integer")?;
        plan.seeds = vec![s];
    }
    Ok(plan)
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Ingest {
            occupancy,
            weather,
            price,
            residents,
            out,
        } => {
            let occ = resample_15min(&load_occupancy_csv(&occupancy, residents)?)?;
            let temp = resample_15min(&load_hourly_csv(&weather, SeriesKind::Temperature)?)?;
            let rho = resample_15min(&load_hourly_csv(&price, SeriesKind::Price)?)?;
            let traces = align(&occ, &temp, &rho, 96)?;
            write_dataset(&traces, &out)?;
            println!("{} steps written to {}", traces.len(), out.display());
        }
        Command::Synth { days, seed, out } => {
            let traces = synth_traces(days, seed_from_env(seed), &SynthProfile::default())?;
            write_dataset(&traces, &out)?;
            println!("{} steps written to {}", traces.len(), out.display());
        }
        Command::TrainPredictor {
            data,
            config,
            epochs,
            seed,
            out,
        } => {
            let mut cfg: PredictorConfig = match config {
                Some(p) => read_toml(&p)?,
                None => PredictorConfig::default(),
            };
            cfg.seed = seed_from_env(seed.unwrap_or(cfg.seed));
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            let d = prepare_data(&data.spec())?;
            let model = train_predictor(&cfg, &d.train)?;
            model.save(&out)?;
            println!("predictor written to {}", out.display());
        }
        Command::TrainRl {
            data,
            sim,
            config,
            updates,
            predictor,
            out,
            curve,
        } => {
            let sim_cfg = sim.config()?;
            let mut cfg: PpoConfig = match config {
                Some(p) => read_toml(&p)?,
                None => PpoConfig::default(),
            };
            cfg.seed = sim_cfg.scenario.seed;
            if let Some(u) = updates {
                cfg.updates = u;
            }
            let d = prepare_data(&data.spec())?;
            let f = forecasts_for(sim_cfg.scenario.id, predictor.as_deref(), &d)?;
            let outcome = train_hitl(&sim_cfg, &cfg, d.train.clone(), f.map(|f| f.0), &mut |s| {
                tracing::info!(update = s.update, cost = ?s.mean_episode_cost, validation = ?s.validation_cost, "update");
            })?;
            write_atomic(&out, &outcome.best.to_run_checkpoint(&cfg, &sim_cfg).to_bytes())?;
            if let Some(c) = curve {
                write_atomic(&c, curve_csv(&outcome.curve).as_bytes())?;
            }
            println!("policy written to {}", out.display());
        }
        Command::Run {
            data,
            sim,
            controller,
            checkpoint,
            predictor,
            records,
        } => {
            let sim_cfg = sim.config()?;
            let d = prepare_data(&data.spec())?;
            let f = forecasts_for(sim_cfg.scenario.id, predictor.as_deref(), &d)?;
            let mut policy: Box<dyn Policy> = match controller {
                ControllerKind::Hitl => {
                    let Some(p) = checkpoint else { bail!("the hitl controller needs --checkpoint") };
                    let net = PolicyNet::from_checkpoint(&Checkpoint::load(&p)?)?;
                    Box::new(RlPolicy::new(Arc::new(net), ActMode::Greedy))
                }
                ControllerKind::Rule => Box::new(RuleBasedController::default()),
                ControllerKind::Mpc => Box::new(MpcController::new(MpcConfig::default())?),
            };
            let recs = evaluate(policy.as_mut(), &sim_cfg, d.test.clone(), f.map(|f| f.1), sim_cfg.scenario.seed, 0)?;
            if let Some(dir) = records {
                std::fs::create_dir_all(&dir)?;
                for (i, r) in recs.iter().enumerate() {
                    write_atomic(&dir.join(format!("day{i:02}.ndjson")), r.to_ndjson_string().as_bytes())?;
                }
            }
            let m = compute_metrics(&recs, &sim_cfg.comfort_model())?;
            println!("{}", serde_json::to_string_pretty(&m)?);
        }
        Command::Matrix { plan, store } => {
            let plan = load_plan(plan.as_deref())?;
            let out = run_matrix(&plan, &ResultsStore::open(&store)?)?;
            let failed = out.results.iter().filter(|r| !r.is_ok()).count();
            println!("{} cells: {} computed, {} reused, {failed} failed", out.results.len(), out.computed, out.reused);
        }
        Command::Sweep { plan, store, grid } => {
            let plan = load_plan(plan.as_deref())?;
            let grid = grid.unwrap_or_else(|| DEFAULT_P_MAX_GRID.to_vec());
            let out = sensitivity_sweep(&plan, &grid, &ResultsStore::open(&store)?)?;
            println!("{} cells: {} computed, {} reused", out.results.len(), out.computed, out.reused);
        }
        Command::Report { store, out } => {
            let files = emit_report(&ResultsStore::open(&store)?, &out)?;
            println!("{}", std::fs::read_to_string(&files.summary)?);
        }
        Command::Serve {
            addr,
            records,
            static_dir,
        } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(hvac_bridge::serve(hvac_bridge::ServeConfig {
                addr,
                records_dir: records,
                static_dir,
            }))?;
        }
    }
    Ok(())
}
