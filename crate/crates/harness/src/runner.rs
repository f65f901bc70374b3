//! Data preparation, policy and predictor training, and matrix execution.
//!
//! Evaluation runs one episode per test day. Day `d` of a cell with seed `s`
//! draws simulated feedback from `Feedback` stream `d` of `s`; validation during
//! training uses streams offset by [`VALIDATION_STREAM_OFFSET`] on the training days.

use std::collections::BTreeMap;
use std::sync::Arc;

use hvac_core::controllers::{MpcController, Policy, RuleBasedController};
use hvac_core::domain::{substream, ExogenousTraces, ScenarioId, SimConfig, Substream};
use hvac_core::env::{run_episode, Env, EpisodeRecord, OccupancyForecaster, OccupancyForecasts, SimulatedFeedback};
use hvac_core::ingest::{read_dataset, split_train_test, synth_traces, SynthProfile};
use hvac_nn::Checkpoint;
use hvac_ppo::{
    train, ActMode, HvacTrainEnv, NormalizationMode, PolicyNet, PpoConfig, RlPolicy, TrainOutcome, UpdateStats,
    VecEnv,
};
use hvac_predictor::{build_training_windows, PredictorConfig, PredictorModel};
use rayon::prelude::*;
use tracing::info;

use crate::error::{HarnessError, Result};
use crate::metrics::compute_metrics;
use crate::plan::{Cell, ControllerKind, DataSource, DataSpec, ExperimentPlan};
use crate::store::{write_atomic, CellOutcome, CellResult, ResultsStore};

pub const VALIDATION_STREAM_OFFSET: u32 = 2_000;
pub const ACTION_STREAM_OFFSET: u32 = 10_000;

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub all: Arc<ExogenousTraces>,
    pub train: Arc<ExogenousTraces>,
    pub test: Arc<ExogenousTraces>,
}

pub fn load_traces(source: &DataSource) -> Result<ExogenousTraces> {
    Ok(match source {
        DataSource::Synth { days, seed } => synth_traces(*days, *seed, &SynthProfile::default())?,
        DataSource::Dataset { path } => read_dataset(path)?,
    })
}

pub fn prepare_data(spec: &DataSpec) -> Result<PreparedData> {
    let all = load_traces(&spec.source)?;
    let (train, test) = split_train_test(&all, spec.train_days, spec.test_days)?;
    Ok(PreparedData {
        all: Arc::new(all),
        train: Arc::new(train),
        test: Arc::new(test),
    })
}

/// Forecasts for the training and test splits.
#[derive(Debug, Clone)]
pub struct SplitForecasts {
    pub train: Arc<OccupancyForecasts>,
    pub test: Arc<OccupancyForecasts>,
}

/// Forecasts are computed over the whole trace so test windows see real history.
pub fn split_forecasts(model: &dyn OccupancyForecaster, data: &PreparedData) -> Result<SplitForecasts> {
    let f = OccupancyForecasts::compute(model, &data.all)?;
    let slice = |start: usize, len: usize| -> Result<Arc<OccupancyForecasts>> {
        let rows = (start..start + len).map(|i| f.at(i).to_vec()).collect();
        Ok(Arc::new(OccupancyForecasts::new(f.horizon(), rows)?))
    };
    Ok(SplitForecasts {
        train: slice(0, data.train.len())?,
        test: slice(data.train.len(), data.test.len())?,
    })
}

pub fn train_predictor(cfg: &PredictorConfig, train: &ExogenousTraces) -> Result<PredictorModel> {
    let windows = build_training_windows(
        &train.occupancy,
        train.clock_index(0),
        train.cycle_steps,
        cfg.past_horizon,
        cfg.future_horizon,
    )?;
    let mut model = PredictorModel::new(cfg.clone())?;
    hvac_predictor::train(&mut model, &windows)?;
    Ok(model)
}

/// One episode per whole day of `traces`.
pub fn evaluate(
    policy: &mut dyn Policy,
    sim: &SimConfig,
    traces: Arc<ExogenousTraces>,
    forecasts: Option<Arc<OccupancyForecasts>>,
    seed: u64,
    stream_offset: u32,
) -> hvac_core::Result<Vec<EpisodeRecord>> {
    let mut env = Env::new(sim.clone(), traces, forecasts)?;
    let len = sim.episode.steps;
    env.episode_starts()
        .into_iter()
        .enumerate()
        .map(|(d, start)| {
            let stream = stream_offset + d as u32;
            let mut feedback = SimulatedFeedback::new(substream(seed, Substream::Feedback, stream));
            let mut rng = substream(seed, Substream::ActionSampling, ACTION_STREAM_OFFSET + stream);
            run_episode(&mut env, start, len, policy, &mut feedback, &mut rng)
        })
        .collect()
}

/// Train a HITL policy with `cfg.seed`. Validation picks the policy with the lowest
/// greedy total cost over the training days.
pub fn train_hitl(
    sim: &SimConfig,
    cfg: &PpoConfig,
    train_traces: Arc<ExogenousTraces>,
    forecasts: Option<Arc<OccupancyForecasts>>,
    on_update: &mut dyn FnMut(&UpdateStats),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let seed = cfg.seed;
    let envs = (0..cfg.num_envs as u32)
        .map(|i| HvacTrainEnv::new(sim.clone(), train_traces.clone(), forecasts.clone(), seed, i))
        .collect::<hvac_ppo::Result<Vec<_>>>()?;
    let mask = envs[0].mask();
    let normalize = cfg.normalization == NormalizationMode::Running;
    let net = PolicyNet::new(mask, &cfg.hidden, normalize, &mut substream(seed, Substream::PolicyInit, 0))?;
    let mut workers = VecEnv::new(envs, seed);
    let mut validate = |n: &PolicyNet| -> hvac_ppo::Result<f64> {
        let mut policy = RlPolicy::new(Arc::new(n.clone()), ActMode::Greedy);
        let records = evaluate(&mut policy, sim, train_traces.clone(), forecasts.clone(), seed, VALIDATION_STREAM_OFFSET)?;
        Ok(records.iter().map(EpisodeRecord::total_cost).sum())
    };
    Ok(train(cfg, net, &mut workers, &mut validate, on_update)?)
}

/// Training curve as CSV, one row per update.
pub fn curve_csv(curve: &[UpdateStats]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let opt = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), |v| v.to_string());
    w.write_record([
        "update",
        "mean_episode_cost",
        "policy_objective",
        "value_loss",
        "entropy",
        "clip_fraction",
        "validation_cost",
    ])
    .expect("in-memory write");
    for s in curve {
        w.write_record([
            s.update.to_string(),
            opt(s.mean_episode_cost),
            s.policy_objective.to_string(),
            s.value_loss.to_string(),
            s.entropy.to_string(),
            s.clip_fraction.to_string(),
            opt(s.validation_cost),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

#[derive(Debug, Clone)]
pub struct MatrixOutcome {
    /// One result per plan cell, in [`Cell::order`].
    pub results: Vec<CellResult>,
    pub computed: usize,
    pub reused: usize,
}

/// Run every cell of `plan` that has no successful result in `store` yet.
pub fn run_matrix(plan: &ExperimentPlan, store: &ResultsStore) -> Result<MatrixOutcome> {
    plan.validate()?;
    let cells = plan.cells();
    let keys: Vec<String> = cells.iter().map(|c| plan.cell_key(c)).collect();
    let mut slots: Vec<Option<CellResult>> = keys
        .iter()
        .map(|k| Ok(store.load_cell(k)?.filter(CellResult::is_ok)))
        .collect::<Result<_>>()?;
    let pending: Vec<usize> = (0..cells.len()).filter(|&i| slots[i].is_none()).collect();
    let reused = cells.len() - pending.len();
    info!(cells = cells.len(), pending = pending.len(), "matrix");
    if !pending.is_empty() {
        let data = prepare_data(&plan.data)?;
        let needs_forecasts = pending.iter().any(|&i| cells[i].scenario == ScenarioId::S4);
        let forecasts = needs_forecasts.then(|| predictor_forecasts(plan, store, &data).map_err(|e| e.to_string()));

        let mut wanted: BTreeMap<String, Cell> = BTreeMap::new();
        for &i in &pending {
            if cells[i].controller == ControllerKind::Hitl {
                wanted.entry(plan.policy_key(&cells[i])).or_insert(cells[i]);
            }
        }
        let wanted: Vec<(String, Cell)> = wanted.into_iter().collect();
        let policies: BTreeMap<String, std::result::Result<Arc<PolicyNet>, String>> = wanted
            .par_iter()
            .map(|(key, cell)| {
                let f = cell_forecasts(cell, forecasts.as_ref());
                let p = f.and_then(|f| policy_for(plan, store, &data, f.map(|f| f.train.clone()), key, cell).map_err(|e| e.to_string()));
                (key.clone(), p)
            })
            .collect();

        let computed = pending
            .par_iter()
            .map(|&i| {
                let cell = &cells[i];
                let outcome = run_cell(plan, store, &data, forecasts.as_ref(), &policies, cell, &keys[i]);
                let result = CellResult {
                    key: keys[i].clone(),
                    cell: *cell,
                    outcome,
                };
                store.save_cell(&result)?;
                Ok((i, result))
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, r) in computed {
            slots[i] = Some(r);
        }
    }
    Ok(MatrixOutcome {
        results: slots.into_iter().map(|r| r.expect("every cell resolved")).collect(),
        computed: cells.len() - reused,
        reused,
    })
}

/// Evaluate the plan's policies (trained at `plan.train_p_max`) at every cap in `grid`.
/// No policy is retrained for a cap other than the training one.
pub fn sensitivity_sweep(plan: &ExperimentPlan, grid: &[f64], store: &ResultsStore) -> Result<MatrixOutcome> {
    let sweep = ExperimentPlan {
        eval_p_max: grid.to_vec(),
        ..plan.clone()
    };
    run_matrix(&sweep, store)
}

type ForecastSlot = std::result::Result<SplitForecasts, String>;

fn cell_forecasts<'a>(cell: &Cell, forecasts: Option<&'a ForecastSlot>) -> std::result::Result<Option<&'a SplitForecasts>, String> {
    if cell.scenario != ScenarioId::S4 {
        return Ok(None);
    }
    match forecasts {
        Some(Ok(f)) => Ok(Some(f)),
        Some(Err(e)) => Err(format!("occupancy predictor unavailable: {e}")),
        None => Err("occupancy predictor unavailable".into()),
    }
}

fn predictor_forecasts(plan: &ExperimentPlan, store: &ResultsStore, data: &PreparedData) -> Result<SplitForecasts> {
    let path = store.predictor_path(&plan.predictor_key());
    let model = if path.exists() {
        PredictorModel::load(&path)?
    } else if plan.train_missing {
        info!("training occupancy predictor");
        let model = train_predictor(&plan.predictor, &data.train)?;
        write_atomic(&path, &model.to_checkpoint().to_bytes())?;
        model
    } else {
        return Err(HarnessError::MissingArtifact(path));
    };
    split_forecasts(&model, data)
}

fn policy_for(
    plan: &ExperimentPlan,
    store: &ResultsStore,
    data: &PreparedData,
    forecasts: Option<Arc<OccupancyForecasts>>,
    key: &str,
    cell: &Cell,
) -> Result<Arc<PolicyNet>> {
    let path = store.policy_path(key);
    if path.exists() {
        return Ok(Arc::new(PolicyNet::from_checkpoint(&Checkpoint::load(&path)?)?));
    }
    if !plan.train_missing {
        return Err(HarnessError::MissingArtifact(path));
    }
    let sim = cell.train_config();
    let cfg = PpoConfig {
        seed: cell.seed,
        ..plan.ppo.clone()
    };
    info!(scenario = %cell.scenario, beta = cell.beta, seed = cell.seed, "training policy");
    let outcome = train_hitl(&sim, &cfg, data.train.clone(), forecasts, &mut |_| {})?;
    write_atomic(&store.curve_path(key), curve_csv(&outcome.curve).as_bytes())?;
    write_atomic(&path, &outcome.best.to_run_checkpoint(&cfg, &sim).to_bytes())?;
    Ok(Arc::new(outcome.best))
}

fn run_cell(
    plan: &ExperimentPlan,
    store: &ResultsStore,
    data: &PreparedData,
    forecasts: Option<&ForecastSlot>,
    policies: &BTreeMap<String, std::result::Result<Arc<PolicyNet>, String>>,
    cell: &Cell,
    key: &str,
) -> CellOutcome {
    let attempt = || -> std::result::Result<CellOutcome, String> {
        let f = cell_forecasts(cell, forecasts)?;
        let mut policy: Box<dyn Policy> = match cell.controller {
            ControllerKind::Hitl => {
                let net = policies
                    .get(&plan.policy_key(cell))
                    .ok_or_else(|| "policy was not prepared".to_string())?
                    .clone()?;
                Box::new(RlPolicy::new(net, ActMode::Greedy))
            }
            ControllerKind::Rule => Box::new(RuleBasedController::default()),
            ControllerKind::Mpc => Box::new(MpcController::new(plan.mpc).map_err(|e| e.to_string())?),
        };
        let sim = cell.eval_config();
        let records = evaluate(policy.as_mut(), &sim, data.test.clone(), f.map(|f| f.test.clone()), cell.seed, 0)
            .map_err(|e| e.to_string())?;
        let metrics = compute_metrics(&records, &sim.comfort_model()).map_err(|e| e.to_string())?;
        store.save_records(key, &records).map_err(|e| e.to_string())?;
        Ok(CellOutcome::Ok { metrics })
    };
    attempt().unwrap_or_else(|reason| CellOutcome::Failed { reason })
}
