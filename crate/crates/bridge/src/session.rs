//! One live episode. [`Session`] is plain synchronous state; [`spawn_session`]
//! wraps it in the owner task that serializes every mutation.
//!
//! Feedback contract: a person may send any number of feedback messages while a
//! step is open; the last one wins and is consumed by the next step only. The
//! occupancy gate still applies, so feedback for an unoccupied step is rejected
//! with a `rejected` event and f_t = 0.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use hvac_core::controllers::{MpcConfig, MpcController, Policy, RuleBasedController};
use hvac_core::domain::{substream, Feedback, RunRng, ScenarioId, SimConfig, Substream};
use hvac_core::env::{
    Env, EpisodeRecord, FeedbackContext, FeedbackDecision, FeedbackOrigin, FeedbackSource, OccupancyForecasts,
    SimulatedFeedback,
};
use hvac_harness::{prepare_data, sim_config, split_forecasts, ControllerKind, ACTION_STREAM_OFFSET};
use hvac_nn::Checkpoint;
use hvac_ppo::{ActMode, PolicyNet, RlPolicy};
use hvac_predictor::PredictorModel;
use tokio::sync::{broadcast, mpsc, oneshot};
use tracing::debug;

use crate::error::{BridgeError, Result};
use crate::protocol::{
    parse_feedback, Cumulative, Event, EventBody, FeedbackMode, SessionRequest, SessionStatus, StepEvent,
};

pub struct Session {
    id: String,
    request: SessionRequest,
    sim: SimConfig,
    env: Env,
    policy: Box<dyn Policy + Send>,
    simulated: SimulatedFeedback,
    rng: RunRng,
    pending: Option<Feedback>,
    record: EpisodeRecord,
    cumulative: Cumulative,
    log: Vec<Event>,
    last_acked: Option<usize>,
}

/// Per-step source: the person's value if any, else the mode's fallback. In hybrid
/// mode the simulator draws every step so its stream stays aligned with a headless run.
struct StepSource<'a> {
    human: Option<Feedback>,
    mode: FeedbackMode,
    simulated: &'a mut SimulatedFeedback,
}

impl FeedbackSource for StepSource<'_> {
    fn feedback(&mut self, ctx: &FeedbackContext) -> hvac_core::Result<FeedbackDecision> {
        let fallback = match self.mode {
            FeedbackMode::Manual => FeedbackDecision::none(),
            FeedbackMode::Hybrid => self.simulated.feedback(ctx)?,
        };
        Ok(match self.human {
            Some(value) => FeedbackDecision {
                value,
                origin: FeedbackOrigin::Human,
            },
            None => fallback,
        })
    }
}

fn build_policy(req: &SessionRequest) -> Result<Box<dyn Policy + Send>> {
    Ok(match req.controller {
        ControllerKind::Hitl => {
            let path = req
                .checkpoint
                .as_ref()
                .ok_or_else(|| BridgeError::InvalidRequest("the hitl controller needs a policy checkpoint".into()))?;
            let net = PolicyNet::from_checkpoint(&Checkpoint::load(path)?)?;
            Box::new(RlPolicy::new(Arc::new(net), ActMode::Greedy))
        }
        ControllerKind::Rule => Box::new(RuleBasedController::default()),
        ControllerKind::Mpc => Box::new(MpcController::new(MpcConfig::default())?),
    })
}

impl Session {
    /// Loads data, forecasts and controller, then resets the environment to the
    /// requested test day. Streams match a headless evaluation of that day.
    pub fn new(id: impl Into<String>, request: SessionRequest) -> Result<Self> {
        crate::protocol::check_version(request.version)?;
        if let Some(r) = request.steps_per_second {
            if !(r.is_finite() && r > 0.0) {
                return Err(BridgeError::InvalidRequest(format!("steps_per_second {r}")));
            }
        }
        let data = prepare_data(&request.data)?;
        let forecasts: Option<Arc<OccupancyForecasts>> = if request.scenario == ScenarioId::S4 {
            let path = request
                .predictor
                .as_ref()
                .ok_or_else(|| BridgeError::InvalidRequest("scenario S4 needs a predictor checkpoint".into()))?;
            let model = PredictorModel::load(path)?;
            Some(split_forecasts(&model, &data)?.test)
        } else {
            None
        };
        let sim = sim_config(request.scenario, request.beta, request.p_max, request.seed);
        let mut env = Env::new(sim.clone(), data.test.clone(), forecasts)?;
        let starts = env.episode_starts();
        let start = *starts.get(request.day).ok_or_else(|| {
            BridgeError::InvalidRequest(format!("day {} outside the {} test days", request.day, starts.len()))
        })?;
        env.reset(start, sim.episode.steps)?;
        let mut policy = build_policy(&request)?;
        policy.reset();
        let stream = request.day as u32;
        Ok(Self {
            id: id.into(),
            simulated: SimulatedFeedback::new(substream(request.seed, Substream::Feedback, stream)),
            rng: substream(request.seed, Substream::ActionSampling, ACTION_STREAM_OFFSET + stream),
            record: EpisodeRecord::new(sim.episode.gamma),
            request,
            sim,
            env,
            policy,
            pending: None,
            cumulative: Cumulative::default(),
            log: Vec::new(),
            last_acked: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SimConfig {
        &self.sim
    }

    pub fn is_done(&self) -> bool {
        self.env.is_done()
    }

    pub fn record(&self) -> &EpisodeRecord {
        &self.record
    }

    /// Logged events (step, rejected, finished) from `step` onward.
    pub fn events_from(&self, step: usize) -> Vec<Event> {
        self.log.iter().filter(|e| e.step().is_some_and(|s| s >= step)).cloned().collect()
    }

    /// Queue feedback for the current step, replacing any earlier value.
    pub fn submit_feedback(&mut self, value: i64) -> Result<Event> {
        let feedback = parse_feedback(value)?;
        if self.is_done() {
            return Err(BridgeError::SessionFinished(self.id.clone()));
        }
        let replaced = self.pending.replace(feedback);
        Ok(Event::new(
            &self.id,
            EventBody::FeedbackQueued {
                step: self.env.episode_step(),
                feedback,
                replaced,
            },
        ))
    }

    pub fn ack(&mut self, step: usize) {
        self.last_acked = Some(self.last_acked.map_or(step, |a| a.max(step)));
    }

    /// First step a reconnecting client without an explicit position should receive.
    pub fn resume_point(&self) -> usize {
        self.last_acked.map_or(0, |a| a + 1)
    }

    /// Play one step. Returns the events it produced, which are also logged.
    pub fn step(&mut self) -> Result<Vec<Event>> {
        if self.is_done() {
            return Err(BridgeError::SessionFinished(self.id.clone()));
        }
        let action = self.policy.act(&self.env.decision_context(), &mut self.rng)?;
        let mut source = StepSource {
            human: self.pending.take(),
            mode: self.request.mode,
            simulated: &mut self.simulated,
        };
        let outcome = self.env.step(action, &mut source)?;
        let r = outcome.record;
        self.record.steps.push(r);
        self.cumulative.discomfort += r.discomfort;
        self.cumulative.energy += r.energy;
        self.cumulative.total += r.total;

        let mut events = Vec::new();
        if let Some(feedback) = outcome.rejected_feedback {
            events.push(Event::new(
                &self.id,
                EventBody::Rejected {
                    step: r.step,
                    feedback,
                    reason: "unoccupied".into(),
                },
            ));
        }
        events.push(Event::new(
            &self.id,
            EventBody::Step(StepEvent {
                record: r,
                feedback_origin: outcome.feedback_origin,
                cumulative: self.cumulative,
                done: outcome.done,
            }),
        ));
        if outcome.done {
            events.push(Event::new(&self.id, EventBody::Finished { step: r.step + 1 }));
        }
        self.log.extend(events.iter().cloned());
        Ok(events)
    }

    pub fn status(&self, clients: usize, steps_per_second: Option<f64>) -> SessionStatus {
        let done = self.is_done();
        SessionStatus {
            version: crate::PROTOCOL_VERSION,
            session: self.id.clone(),
            scenario: self.request.scenario,
            controller: self.request.controller,
            mode: self.request.mode,
            beta: self.request.beta,
            step: self.env.episode_step(),
            episode_len: self.env.episode_len(),
            done,
            occupied_now: (!done).then(|| self.env.occupied_now()),
            pending_feedback: self.pending,
            steps_per_second,
            clients,
            last_acked: self.last_acked,
        }
    }
}

pub(crate) enum Command {
    Feedback {
        value: i64,
        reply: oneshot::Sender<Result<Event>>,
    },
    Step {
        count: usize,
        reply: oneshot::Sender<Result<Vec<Event>>>,
    },
    Pace {
        steps_per_second: Option<f64>,
        reply: oneshot::Sender<Result<()>>,
    },
    Ack {
        step: usize,
    },
    /// Replay from `from` (or the last acknowledged step) plus a live receiver
    /// created at the same point, so nothing is missed or repeated.
    Subscribe {
        from: Option<usize>,
        reply: oneshot::Sender<(Vec<Event>, broadcast::Receiver<Event>)>,
    },
    Status {
        reply: oneshot::Sender<SessionStatus>,
    },
    Report {
        reply: oneshot::Sender<EpisodeRecord>,
    },
    Shutdown {
        reply: oneshot::Sender<EpisodeRecord>,
    },
}

/// Cheap cloneable handle to a running session task.
#[derive(Clone)]
pub struct SessionHandle {
    pub id: String,
    tx: mpsc::Sender<Command>,
    clients: Arc<AtomicUsize>,
}

impl SessionHandle {
    async fn call<T>(&self, make: impl FnOnce(oneshot::Sender<T>) -> Command) -> Result<T> {
        let (tx, rx) = oneshot::channel();
        self.tx.send(make(tx)).await.map_err(|_| BridgeError::Closed)?;
        rx.await.map_err(|_| BridgeError::Closed)
    }

    pub async fn feedback(&self, value: i64) -> Result<Event> {
        self.call(|reply| Command::Feedback { value, reply }).await?
    }

    pub async fn step(&self, count: usize) -> Result<Vec<Event>> {
        self.call(|reply| Command::Step { count, reply }).await?
    }

    pub async fn pace(&self, steps_per_second: Option<f64>) -> Result<()> {
        self.call(|reply| Command::Pace { steps_per_second, reply }).await?
    }

    pub async fn ack(&self, step: usize) -> Result<()> {
        self.tx.send(Command::Ack { step }).await.map_err(|_| BridgeError::Closed)
    }

    pub async fn subscribe(&self, from: Option<usize>) -> Result<(Vec<Event>, broadcast::Receiver<Event>)> {
        self.call(|reply| Command::Subscribe { from, reply }).await
    }

    pub async fn status(&self) -> Result<SessionStatus> {
        self.call(|reply| Command::Status { reply }).await
    }

    pub async fn report(&self) -> Result<EpisodeRecord> {
        self.call(|reply| Command::Report { reply }).await
    }

    pub async fn shutdown(&self) -> Result<EpisodeRecord> {
        self.call(|reply| Command::Shutdown { reply }).await
    }

    /// Counts a connected client until the guard drops.
    pub fn client_guard(&self) -> ClientGuard {
        self.clients.fetch_add(1, Ordering::SeqCst);
        ClientGuard(self.clients.clone())
    }
}

pub struct ClientGuard(Arc<AtomicUsize>);

impl Drop for ClientGuard {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

fn interval_for(steps_per_second: Option<f64>) -> Option<tokio::time::Interval> {
    steps_per_second.map(|r| {
        let mut iv = tokio::time::interval(Duration::from_secs_f64(1.0 / r));
        iv.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        iv.reset();
        iv
    })
}

fn step_and_publish(session: &mut Session, events: &broadcast::Sender<Event>) -> Result<Vec<Event>> {
    let out = session.step()?;
    for e in &out {
        // no subscribers is fine
        let _ = events.send(e.clone());
    }
    Ok(out)
}

/// Start the owner task for `session`.
pub fn spawn_session(session: Session) -> SessionHandle {
    let (tx, mut rx) = mpsc::channel::<Command>(64);
    let clients = Arc::new(AtomicUsize::new(0));
    let handle = SessionHandle {
        id: session.id.clone(),
        tx,
        clients: clients.clone(),
    };
    let mut pace = session.request.steps_per_second;
    let mut session = session;
    tokio::spawn(async move {
        let (events, _) = broadcast::channel::<Event>(1024);
        let mut ticker = interval_for(pace);
        loop {
            let cmd = tokio::select! {
                cmd = rx.recv() => match cmd {
                    Some(c) => c,
                    None => break,
                },
                _ = async { ticker.as_mut().expect("guarded").tick().await }, if ticker.is_some() => {
                    if session.is_done() || step_and_publish(&mut session, &events).is_err() {
                        ticker = None;
                        pace = None;
                    }
                    continue;
                }
            };
            match cmd {
                Command::Feedback { value, reply } => {
                    let _ = reply.send(session.submit_feedback(value));
                }
                Command::Step { count, reply } => {
                    let mut out = Vec::new();
                    let mut res = Ok(());
                    for _ in 0..count {
                        match step_and_publish(&mut session, &events) {
                            Ok(e) => out.extend(e),
                            Err(e) => {
                                res = Err(e);
                                break;
                            }
                        }
                    }
                    let _ = reply.send(match res {
                        Err(e) if out.is_empty() => Err(e),
                        _ => Ok(out),
                    });
                }
                Command::Pace { steps_per_second, reply } => {
                    let ok = match steps_per_second {
                        Some(r) if !(r.is_finite() && r > 0.0) => {
                            Err(BridgeError::Protocol(format!("steps_per_second {r}")))
                        }
                        _ => Ok(()),
                    };
                    if ok.is_ok() {
                        pace = steps_per_second;
                        ticker = interval_for(pace);
                    }
                    let _ = reply.send(ok);
                }
                Command::Ack { step } => session.ack(step),
                Command::Subscribe { from, reply } => {
                    let from = from.unwrap_or_else(|| session.resume_point());
                    let _ = reply.send((session.events_from(from), events.subscribe()));
                }
                Command::Status { reply } => {
                    let _ = reply.send(session.status(clients.load(Ordering::SeqCst), pace));
                }
                Command::Report { reply } => {
                    let _ = reply.send(session.record().clone());
                }
                Command::Shutdown { reply } => {
                    let _ = reply.send(session.record().clone());
                    break;
                }
            }
        }
        debug!(session = %session.id, "session task stopped");
    });
    handle
}
