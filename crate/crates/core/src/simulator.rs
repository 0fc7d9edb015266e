//! Deterministic discrete-event execution of a workflow DAG on a cluster.
//!
//! One run owns all mutable state. At every decision point the ready set
//! is computed, each pending task is priced by the sizer (attempt 1) or
//! the retry ladder (later attempts), the scheduler orders the queue,
//! and every task that fits is placed first-fit. Sizing happens at
//! placement time: a task that waits is re-priced on the next pass, so
//! its allocation reflects everything learned up to the moment it
//! actually starts. An attempt's outcome is
//! fixed at placement: it succeeds after its full runtime when the
//! allocation covers the effective peak, and otherwise fails partway
//! through. Randomness comes from per-concern, per-instance streams so
//! results do not depend on event interleaving.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{ClusterSpec, ClusterState};
use crate::predictors::{
    predict_user, Prediction, PredictionPath, PredictorState, SizerBank, SizerKind, SizingConfig,
};
use crate::schedulers::{order_ready, SchedulerContext, SchedulerKind};
use crate::units::{MemBytes, Millis};
use crate::workflow::{
    compute_ranks, ready_set, validate_dag, AbstractTaskId, DagError, Observation,
    PhysicalTaskSpec, WorkflowDag,
};

const FAILURE_SALT: u64 = 0x9E37_79B9_7F4A_7C15;
const NOISE_SALT: u64 = 0xC2B2_AE3D_27D4_EB4F;

/// How the failure time of an underallocated attempt is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureMode {
    /// Fails at a fixed fraction of the runtime.
    ConstantFraction,
    /// Fails at a uniformly drawn fraction of the runtime.
    UniformFraction,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FailureModel {
    pub mode: FailureMode,
    /// Fraction of the runtime after which a doomed attempt dies
    /// (constant mode only); must lie in (0, 1].
    pub fraction: f64,
    pub seed: u64,
}

impl Default for FailureModel {
    fn default() -> Self {
        FailureModel {
            mode: FailureMode::ConstantFraction,
            fraction: 0.5,
            seed: 0,
        }
    }
}

impl FailureModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err("failure fraction must lie in (0, 1]".to_owned());
        }
        Ok(())
    }
}

/// Per-attempt perturbation of a task's true peak.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    None,
    /// Peak shifted by a uniform draw from [-half_width, +half_width].
    AdditiveUniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub mode: NoiseMode,
    pub half_width: MemBytes,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            mode: NoiseMode::None,
            half_width: MemBytes::ZERO,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), String> {
        if self.half_width.as_u64() > i64::MAX as u64 {
            return Err("noise half width is too large".to_owned());
        }
        Ok(())
    }
}

/// Where attempt n takes its allocation from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetryRung {
    /// The configured sizer's prediction.
    PredictorValue,
    /// The user-requested memory, clamped to bounds.
    UserValue,
    /// The configured upper bound.
    UpperBound,
}

/// Allocation sources across a task's attempts; must end with the upper
/// bound so the ladder cannot loop on a value known to be too small.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub ladder: Vec<RetryRung>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            ladder: vec![
                RetryRung::PredictorValue,
                RetryRung::UserValue,
                RetryRung::UpperBound,
            ],
        }
    }
}

impl RetryPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.ladder.is_empty() {
            return Err("retry ladder must not be empty".to_owned());
        }
        if *self.ladder.last().expect("non-empty") != RetryRung::UpperBound {
            return Err("retry ladder must end with the upper bound".to_owned());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    TaskFinished,
    TaskFailed,
}

/// A completion event. Events are processed in nondecreasing time order
/// with ties broken by (instance_id, attempt_no); the derived ordering
/// follows field order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SimEvent {
    pub time: Millis,
    pub instance_id: String,
    pub attempt_no: u32,
    pub kind: EventKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttemptOutcome {
    Success,
    MemoryFailure,
}

/// One placed attempt, the unit every metric is computed from.
///
/// On success `observed_peak` is the effective peak the attempt reached;
/// on a memory failure the peak is censored at the allocation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub instance_id: String,
    pub attempt_no: u32,
    pub node_id: String,
    pub allocated_mem: MemBytes,
    pub cores: u32,
    pub start_ms: Millis,
    pub end_ms: Millis,
    pub outcome: AttemptOutcome,
    pub observed_peak: MemBytes,
    pub predictor_path: String,
}

/// The inputs a run was produced from, echoed into its report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub scheduler: SchedulerKind,
    pub sizer: SizerKind,
    pub seed: u64,
    pub cluster: ClusterSpec,
    pub sizing: SizingConfig,
    pub failure: FailureModel,
    pub noise: NoiseModel,
    pub retry: RetryPolicy,
}

impl Default for ConfigEcho {
    fn default() -> Self {
        ConfigEcho {
            scheduler: SchedulerKind::Original,
            sizer: SizerKind::User,
            seed: 0,
            cluster: ClusterSpec { nodes: vec![] },
            sizing: SizingConfig::default(),
            failure: FailureModel::default(),
            noise: NoiseModel::default(),
            retry: RetryPolicy::default(),
        }
    }
}

/// Full outcome of one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ConfigEcho,
    /// All attempts, ordered by (start time, instance id, attempt number).
    pub attempts: Vec<AttemptRecord>,
    /// Last attempt end minus first attempt start; 0 for an empty run.
    pub makespan: Millis,
    /// Busy core-milliseconds per node over all attempts.
    pub node_busy_core_time: BTreeMap<String, u64>,
    /// True when some task exhausted its retry ladder; the run then
    /// drained running attempts and stopped placing new ones.
    pub aborted: bool,
}

/// The non-identity knobs of a run, bundled.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub sizing: SizingConfig,
    pub failure: FailureModel,
    pub noise: NoiseModel,
    pub retry: RetryPolicy,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid workflow: {0}")]
    InvalidWorkflow(#[from] DagError),
    #[error("no node can host task '{instance}' needing {cores} cores")]
    InfeasibleTask { instance: String, cores: u32 },
    #[error("invalid configuration: {0}")]
    ConfigError(String),
}

/// Milliseconds into an attempt at which an underallocated task dies.
pub fn time_to_failure(model: &FailureModel, runtime_ms: Millis, rng: &mut impl Rng) -> Millis {
    let fraction = match model.mode {
        FailureMode::ConstantFraction => model.fraction,
        // 1 - [0,1) keeps the draw in (0,1], so the result is never 0.
        FailureMode::UniformFraction => 1.0 - rng.random::<f64>(),
    };
    let t = (fraction * runtime_ms as f64).ceil() as u64;
    t.clamp(1, runtime_ms)
}

/// The peak an attempt actually reaches, after noise.
fn effective_peak(model: &NoiseModel, rng: &mut impl Rng, true_peak: MemBytes) -> MemBytes {
    match model.mode {
        NoiseMode::None => true_peak,
        NoiseMode::AdditiveUniform => {
            let hw = model.half_width.as_u64() as i64;
            let delta = rng.random_range(-hw..=hw);
            let shifted = i128::from(true_peak.as_u64()) + i128::from(delta);
            MemBytes(shifted.max(1) as u64)
        }
    }
}

struct Sim<'a> {
    dag: &'a WorkflowDag,
    cfg: &'a RunConfig,
    scheduler: SchedulerKind,
    bank: SizerBank,
    state: ClusterState,
    ranks: BTreeMap<String, u32>,
    /// Largest allocation each task can ever get: the most memory on any
    /// node with enough cores for it. Capping requests here guarantees a
    /// lone task always fits an idle cluster, so the run cannot wedge.
    mem_cap: BTreeMap<String, MemBytes>,
    failure_streams: BTreeMap<String, ChaCha8Rng>,
    noise_streams: BTreeMap<String, ChaCha8Rng>,
    finished: BTreeSet<String>,
    running: BTreeSet<String>,
    next_attempt: BTreeMap<String, u32>,
    submission_seq: BTreeMap<String, u64>,
    next_seq: u64,
    finished_per_abstract: BTreeMap<AbstractTaskId, usize>,
    attempts: Vec<AttemptRecord>,
    events: BinaryHeap<Reverse<SimEvent>>,
    pending: BTreeMap<(String, u32), AttemptRecord>,
    aborted: bool,
}

impl Sim<'_> {
    fn schedule_pass(&mut self, now: Millis) {
        let dag = self.dag;
        let ready = ready_set(dag, &self.finished, &self.running);
        for id in &ready {
            if !self.submission_seq.contains_key(id) {
                self.submission_seq.insert(id.clone(), self.next_seq);
                self.next_seq += 1;
            }
        }
        // Price every pending task afresh each pass: a task that had to
        // wait is sized with whatever the predictor has learned since,
        // so only the prediction in force at placement time counts.
        let mut sized: BTreeMap<&str, Prediction> = BTreeMap::new();
        for id in &ready {
            let task = dag.get(id).expect("ready task exists");
            let attempt = self.next_attempt[id.as_str()];
            let rung = self.cfg.retry.ladder[(attempt - 1) as usize];
            let pred = match rung {
                RetryRung::PredictorValue => self.bank.predict_for(task),
                RetryRung::UserValue => predict_user(
                    &PredictorState::new(),
                    task.input_size,
                    task.user_mem,
                    &self.cfg.sizing,
                ),
                RetryRung::UpperBound => Prediction {
                    value: self.cfg.sizing.upper_bound,
                    path: PredictionPath::UpperBound,
                    clamped: None,
                },
            };
            sized.insert(task.instance_id.as_str(), pred);
        }

        let ready_specs: Vec<&PhysicalTaskSpec> = ready
            .iter()
            .map(|id| dag.get(id).expect("ready task exists"))
            .collect();
        let ordered = {
            let ctx = SchedulerContext {
                ranks: &self.ranks,
                finished_per_abstract: &self.finished_per_abstract,
                submission_seq: &self.submission_seq,
            };
            order_ready(self.scheduler, ready_specs, &ctx)
        };

        for task in ordered {
            let pred = sized[task.instance_id.as_str()].clone();
            let alloc = pred.value.min(self.mem_cap[task.instance_id.as_str()]);
            let Some(node) = self.state.first_fit(task.cores, alloc) else {
                continue;
            };
            let node = node.to_owned();
            self.state
                .allocate(&node, task.cores, alloc)
                .expect("first-fit node has capacity");
            self.place(task, node, alloc, &pred, now);
        }
    }

    fn place(
        &mut self,
        task: &PhysicalTaskSpec,
        node_id: String,
        alloc: MemBytes,
        pred: &Prediction,
        now: Millis,
    ) {
        let id = &task.instance_id;
        let attempt_no = self.next_attempt[id.as_str()];
        let noise_rng = self.noise_streams.get_mut(id).expect("stream exists");
        let eff_peak = effective_peak(&self.cfg.noise, noise_rng, task.true_peak);
        let success = alloc >= eff_peak;
        let (end, kind, outcome, observed) = if success {
            (
                now + task.runtime_ms,
                EventKind::TaskFinished,
                AttemptOutcome::Success,
                eff_peak,
            )
        } else {
            let failure_rng = self.failure_streams.get_mut(id).expect("stream exists");
            let ttf = time_to_failure(&self.cfg.failure, task.runtime_ms, failure_rng);
            (
                now + ttf,
                EventKind::TaskFailed,
                AttemptOutcome::MemoryFailure,
                alloc,
            )
        };
        let record = AttemptRecord {
            instance_id: id.clone(),
            attempt_no,
            node_id,
            allocated_mem: alloc,
            cores: task.cores,
            start_ms: now,
            end_ms: end,
            outcome,
            observed_peak: observed,
            predictor_path: pred.label(),
        };
        self.running.insert(id.clone());
        self.pending.insert((id.clone(), attempt_no), record);
        self.events.push(Reverse(SimEvent {
            time: end,
            instance_id: id.clone(),
            attempt_no,
            kind,
        }));
    }

    fn complete(&mut self, ev: SimEvent) {
        let record = self
            .pending
            .remove(&(ev.instance_id.clone(), ev.attempt_no))
            .expect("event has a pending record");
        self.state
            .release(&record.node_id, record.cores, record.allocated_mem)
            .expect("release mirrors the allocation");
        self.running.remove(&ev.instance_id);
        let task = self.dag.get(&ev.instance_id).expect("task exists");
        match ev.kind {
            EventKind::TaskFinished => {
                self.finished.insert(ev.instance_id.clone());
                *self
                    .finished_per_abstract
                    .entry(task.abstract_id.clone())
                    .or_insert(0) += 1;
                self.bank.observe(&Observation {
                    abstract_id: task.abstract_id.clone(),
                    input_size: task.input_size,
                    peak_mem: record.observed_peak,
                    runtime_ms: task.runtime_ms,
                    success: true,
                });
            }
            EventKind::TaskFailed => {
                self.bank.observe(&Observation {
                    abstract_id: task.abstract_id.clone(),
                    input_size: task.input_size,
                    peak_mem: record.observed_peak,
                    runtime_ms: task.runtime_ms,
                    success: false,
                });
                if (record.attempt_no as usize) >= self.cfg.retry.ladder.len() {
                    log::warn!(
                        "task '{}' exhausted its retry ladder; aborting new placements",
                        ev.instance_id
                    );
                    self.aborted = true;
                } else {
                    self.next_attempt
                        .insert(ev.instance_id.clone(), record.attempt_no + 1);
                }
            }
        }
        self.attempts.push(record);
    }
}

/// Executes one workflow run and returns its full attempt ledger.
pub fn run(
    dag: &WorkflowDag,
    cluster: &ClusterSpec,
    scheduler: SchedulerKind,
    sizer: SizerKind,
    cfg: &RunConfig,
    seed: u64,
) -> Result<RunReport, SimError> {
    validate_dag(dag)?;
    cluster
        .validate()
        .map_err(|e| SimError::ConfigError(e.to_string()))?;
    cfg.sizing.validate().map_err(SimError::ConfigError)?;
    cfg.failure.validate().map_err(SimError::ConfigError)?;
    cfg.noise.validate().map_err(SimError::ConfigError)?;
    cfg.retry.validate().map_err(SimError::ConfigError)?;
    if cfg.sizing.lower_bound > cluster.max_node_memory() {
        return Err(SimError::ConfigError(format!(
            "sizing lower bound {} exceeds every node's memory",
            cfg.sizing.lower_bound
        )));
    }
    let mut mem_cap = BTreeMap::new();
    for (id, task) in dag.tasks() {
        match cluster.max_memory_with_cores(task.cores) {
            Some(cap) => {
                mem_cap.insert(id.clone(), cap);
            }
            None => {
                return Err(SimError::InfeasibleTask {
                    instance: id.clone(),
                    cores: task.cores,
                })
            }
        }
    }

    // Sub-seed one stream per concern per instance, in instance-id order,
    // so draws do not depend on scheduling order.
    let mut failure_base = ChaCha8Rng::seed_from_u64(seed ^ FAILURE_SALT ^ cfg.failure.seed);
    let mut noise_base = ChaCha8Rng::seed_from_u64(seed ^ NOISE_SALT ^ cfg.noise.seed);
    let mut failure_streams = BTreeMap::new();
    let mut noise_streams = BTreeMap::new();
    for id in dag.tasks().keys() {
        failure_streams.insert(
            id.clone(),
            ChaCha8Rng::seed_from_u64(failure_base.random::<u64>()),
        );
        noise_streams.insert(
            id.clone(),
            ChaCha8Rng::seed_from_u64(noise_base.random::<u64>()),
        );
    }

    let mut sim = Sim {
        dag,
        cfg,
        scheduler,
        bank: SizerBank::new(sizer, cfg.sizing.clone()),
        state: ClusterState::new(cluster),
        ranks: compute_ranks(dag),
        mem_cap,
        failure_streams,
        noise_streams,
        finished: BTreeSet::new(),
        running: BTreeSet::new(),
        next_attempt: dag.tasks().keys().map(|id| (id.clone(), 1)).collect(),
        submission_seq: BTreeMap::new(),
        next_seq: 0,
        finished_per_abstract: BTreeMap::new(),
        attempts: Vec::new(),
        events: BinaryHeap::new(),
        pending: BTreeMap::new(),
        aborted: false,
    };

    sim.schedule_pass(0);
    while let Some(Reverse(head)) = sim.events.pop() {
        let now = head.time;
        // Process every event at this timestamp, then schedule once.
        sim.complete(head);
        while let Some(Reverse(next)) = sim.events.peek() {
            if next.time != now {
                break;
            }
            let ev = sim.events.pop().expect("peeked event").0;
            sim.complete(ev);
        }
        if !sim.aborted {
            sim.schedule_pass(now);
        }
    }

    let mut attempts = sim.attempts;
    attempts.sort_by(|a, b| {
        (a.start_ms, &a.instance_id, a.attempt_no).cmp(&(b.start_ms, &b.instance_id, b.attempt_no))
    });
    let makespan = match (
        attempts.iter().map(|a| a.start_ms).min(),
        attempts.iter().map(|a| a.end_ms).max(),
    ) {
        (Some(first), Some(last)) => last - first,
        _ => 0,
    };
    let mut node_busy_core_time: BTreeMap<String, u64> = cluster
        .nodes
        .iter()
        .map(|n| (n.node_id.clone(), 0))
        .collect();
    for a in &attempts {
        *node_busy_core_time
            .get_mut(&a.node_id)
            .expect("node exists") += u64::from(a.cores) * (a.end_ms - a.start_ms);
    }

    Ok(RunReport {
        config: ConfigEcho {
            scheduler,
            sizer,
            seed,
            cluster: cluster.clone(),
            sizing: cfg.sizing.clone(),
            failure: cfg.failure,
            noise: cfg.noise,
            retry: cfg.retry.clone(),
        },
        attempts,
        makespan,
        node_busy_core_time,
        aborted: sim.aborted,
    })
}
