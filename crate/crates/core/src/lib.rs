//! Online peak-memory sizing for workflow tasks, evaluated with a
//! deterministic discrete-event cluster simulator.
//!
//! The crate is organised in layers:
//!
//! * [`units`], [`workflow`], [`cluster`]: integer byte/time units, the
//!   workflow DAG domain model, and cluster resource bookkeeping.
//! * [`stats`]: correlation, least squares, asymmetric-loss regression,
//!   the weighted residual-spread offset, and percentiles.
//! * [`predictors`]: online per-abstract-task sizers (user default,
//!   95th percentile, regression plus residual stddev, and the rule-based
//!   regression sizer with safeguards).
//! * [`schedulers`]: ready-queue ordering strategies.
//! * [`simulator`]: the event loop with memory-failure semantics and a
//!   retry ladder, producing a full attempt ledger.
//! * [`metrics`]: allocation-quality and utilisation figures from ledgers
//!   and traces.
//! * [`traceio`]: CSV trace parsing/writing, synthetic workload
//!   generation, and JSON report serialization.
//!
//! Everything is deterministic under a seed: identical inputs produce
//! byte-identical reports.

pub mod cluster;
pub mod metrics;
pub mod predictors;
pub mod schedulers;
pub mod simulator;
pub mod stats;
pub mod traceio;
pub mod units;
pub mod workflow;

pub use cluster::{ClusterError, ClusterSpec, ClusterState, NodeSpec};
pub use metrics::{
    compute_maq, compute_wastage, cpu_utilization, mem_per_core_distribution, path_counts,
    pattern_report, peak_diff_between_runs, summarize, MemKind, MemPerCoreSource, MetricsError,
    MetricsSummary, PatternReport, PeakDiffReport,
};
pub use predictors::{
    predict_percentile, predict_ponder, predict_user, predict_witt_lr, replay_dag, ClampSide,
    Prediction, PredictionPath, PredictorState, ReplayRow, SizerBank, SizerKind, SizingConfig,
    UnknownSizer,
};
pub use schedulers::{
    order_ready, SchedulerContext, SchedulerKind, UnknownStrategy, GS_WARMUP_THRESHOLD,
};
pub use simulator::{
    run, time_to_failure, AttemptOutcome, AttemptRecord, ConfigEcho, EventKind, FailureMode,
    FailureModel, NoiseMode, NoiseModel, RetryPolicy, RetryRung, RunConfig, RunReport, SimError,
    SimEvent,
};
pub use stats::{
    asymmetric_fit, ols_fit, pearson, percentile, sample_stddev, weighted_offset, FitConfig,
    FitResult, LinearModel, StatsError,
};
pub use traceio::{
    generate_synthetic, parse_trace, write_report, write_trace, SynthError, SyntheticPattern,
    SyntheticSpec, TraceError, TraceRecord, Workload,
};
pub use units::{InputBytes, MemBytes, Millis, GIB, MIB};
pub use workflow::{
    compute_ranks, ready_set, validate_dag, AbstractTaskId, DagError, Observation,
    PhysicalTaskSpec, WorkflowDag,
};
