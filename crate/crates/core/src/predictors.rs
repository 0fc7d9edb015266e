//! Online per-abstract-task memory sizing.
//!
//! Four sizers share one contract: given the history of finished instances
//! of an abstract task, an input size, and the user's default request,
//! produce a whole-byte allocation clamped into configured bounds. An
//! extra oracle sizer (allocation = true peak) exists for experiments.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::stats::{self, FitConfig};
use crate::units::{InputBytes, MemBytes};
use crate::workflow::{AbstractTaskId, Observation, PhysicalTaskSpec, WorkflowDag};

/// Percentile used by the percentile sizer.
pub const PERCENTILE_P: f64 = 95.0;

/// Tuning knobs shared by all sizers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizingConfig {
    /// Smallest allocation ever returned.
    pub lower_bound: MemBytes,
    /// Largest allocation ever returned.
    pub upper_bound: MemBytes,
    /// Flat safety buffer and the floor under the weighted offset.
    pub static_offset: MemBytes,
    /// Overprediction weight of the asymmetric regression loss.
    pub lambda: f64,
    /// Correlation below this routes to the max-plus-offset branch.
    pub pearson_gate: f64,
    /// History size required before regression is considered.
    pub min_samples: usize,
    /// History size required before the regression baseline fits a line.
    pub witt_min_samples: usize,
    /// Admit failed attempts (with their censored peak) into training data.
    pub train_on_failures: bool,
}

impl Default for SizingConfig {
    fn default() -> Self {
        SizingConfig {
            lower_bound: MemBytes::from_mib(128),
            upper_bound: MemBytes::from_gib(64),
            static_offset: MemBytes::from_mib(128),
            lambda: 1.0 / 50.0,
            pearson_gate: 0.3,
            min_samples: 5,
            witt_min_samples: 2,
            train_on_failures: false,
        }
    }
}

impl SizingConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.lower_bound > self.upper_bound {
            return Err("lower_bound exceeds upper_bound".to_owned());
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err("lambda must lie in (0, 1]".to_owned());
        }
        if !self.pearson_gate.is_finite() {
            return Err("pearson_gate must be finite".to_owned());
        }
        if self.witt_min_samples < 2 {
            return Err("witt_min_samples must be at least 2".to_owned());
        }
        Ok(())
    }
}

/// Training history of one abstract task plus running summaries.
#[derive(Clone, Debug, Default)]
pub struct PredictorState {
    observations: Vec<Observation>,
    min_peak: MemBytes,
    max_peak: MemBytes,
    min_input: InputBytes,
    max_input: InputBytes,
    count_success: usize,
}

impl PredictorState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of observations admitted to training.
    pub fn count(&self) -> usize {
        self.count_success
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn min_peak(&self) -> Option<MemBytes> {
        (self.count_success > 0).then_some(self.min_peak)
    }

    pub fn max_peak(&self) -> Option<MemBytes> {
        (self.count_success > 0).then_some(self.max_peak)
    }

    pub fn min_input(&self) -> Option<InputBytes> {
        (self.count_success > 0).then_some(self.min_input)
    }

    pub fn max_input(&self) -> Option<InputBytes> {
        (self.count_success > 0).then_some(self.max_input)
    }

    /// Training pairs in bytes, sorted by (input, peak, runtime) so every
    /// downstream computation is independent of arrival order.
    fn training_pairs(&self) -> (Vec<f64>, Vec<f64>) {
        let mut rows: Vec<(u64, u64, u64)> = self
            .observations
            .iter()
            .map(|o| (o.input_size.0, o.peak_mem.0, o.runtime_ms))
            .collect();
        rows.sort_unstable();
        let xs = rows.iter().map(|r| r.0 as f64).collect();
        let ys = rows.iter().map(|r| r.1 as f64).collect();
        (xs, ys)
    }

    fn peaks(&self) -> Vec<MemBytes> {
        self.observations.iter().map(|o| o.peak_mem).collect()
    }
}

/// Adds an observation to the training history; failed attempts are
/// dropped unless `train_on_failures` is set.
pub fn observe(state: &mut PredictorState, obs: &Observation, cfg: &SizingConfig) {
    if !obs.success && !cfg.train_on_failures {
        return;
    }
    if state.count_success == 0 {
        state.min_peak = obs.peak_mem;
        state.max_peak = obs.peak_mem;
        state.min_input = obs.input_size;
        state.max_input = obs.input_size;
    } else {
        state.min_peak = state.min_peak.min(obs.peak_mem);
        state.max_peak = state.max_peak.max(obs.peak_mem);
        state.min_input = state.min_input.min(obs.input_size);
        state.max_input = state.max_input.max(obs.input_size);
    }
    state.observations.push(obs.clone());
    state.count_success += 1;
}

/// Which rule produced a prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionPath {
    UserDefault,
    MaxPlusStatic,
    RegressionPlusOffset,
    PercentileValue,
    WittRegression,
    /// Experiment-only: allocation equals the true peak.
    Oracle,
    /// Retry-ladder rung that allocates the configured upper bound.
    UpperBound,
}

impl PredictionPath {
    pub fn label(self) -> &'static str {
        match self {
            PredictionPath::UserDefault => "user-default",
            PredictionPath::MaxPlusStatic => "max-plus-static",
            PredictionPath::RegressionPlusOffset => "regression-plus-offset",
            PredictionPath::PercentileValue => "percentile-value",
            PredictionPath::WittRegression => "witt-regression",
            PredictionPath::Oracle => "oracle",
            PredictionPath::UpperBound => "upper-bound",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClampSide {
    Low,
    High,
}

/// A sized allocation with diagnostics about how it was produced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: MemBytes,
    pub path: PredictionPath,
    pub clamped: Option<ClampSide>,
}

impl Prediction {
    /// Diagnostic label, e.g. `regression-plus-offset+clamp-high`.
    pub fn label(&self) -> String {
        match self.clamped {
            None => self.path.label().to_owned(),
            Some(ClampSide::Low) => format!("{}+clamp-low", self.path.label()),
            Some(ClampSide::High) => format!("{}+clamp-high", self.path.label()),
        }
    }
}

fn clamp_into(value: MemBytes, path: PredictionPath, cfg: &SizingConfig) -> Prediction {
    if value < cfg.lower_bound {
        Prediction { value: cfg.lower_bound, path, clamped: Some(ClampSide::Low) }
    } else if value > cfg.upper_bound {
        Prediction { value: cfg.upper_bound, path, clamped: Some(ClampSide::High) }
    } else {
        Prediction { value, path, clamped: None }
    }
}

fn max_plus_static(state: &PredictorState, cfg: &SizingConfig) -> Prediction {
    let max_peak = state.max_peak().expect("history is non-empty");
    clamp_into(
        max_peak.saturating_add(cfg.static_offset),
        PredictionPath::MaxPlusStatic,
        cfg,
    )
}

/// The rule-based sizer: a warm-up rule on sparse history, a correlation
/// gate, an asymmetric-loss regression with three history-derived
/// safeguards, and an adaptive offset floored at `static_offset`.
// Two safeguards share an action but are distinct rules with a fixed
// precedence; keep them as separate arms.
#[allow(clippy::if_same_then_else)]
pub fn predict_ponder(
    state: &PredictorState,
    x_n: InputBytes,
    y_user: MemBytes,
    cfg: &SizingConfig,
) -> Prediction {
    let count = state.count();
    if count < cfg.min_samples {
        return match state.max_input() {
            Some(max_input) if max_input.0 > x_n.0 => max_plus_static(state, cfg),
            _ => clamp_into(y_user, PredictionPath::UserDefault, cfg),
        };
    }

    let (xs, ys) = state.training_pairs();
    let r = stats::pearson(&xs, &ys).unwrap_or(0.0);
    if r < cfg.pearson_gate {
        return max_plus_static(state, cfg);
    }

    let fit_cfg = FitConfig { lambda: cfg.lambda, ..FitConfig::default() };
    let fit = match stats::asymmetric_fit(&xs, &ys, &fit_cfg) {
        Ok(fit) => fit,
        // The gate guarantees nondegenerate inputs; fall back defensively.
        Err(_) => return max_plus_static(state, cfg),
    };
    if !fit.converged {
        log::warn!(
            "asymmetric fit hit the iteration cap ({} iterations); using best iterate",
            fit.iterations
        );
    }

    let min_peak = state.min_peak().expect("history is non-empty");
    let max_peak = state.max_peak().expect("history is non-empty");
    let max_input = state.max_input().expect("history is non-empty");

    let mut y_star = fit.model.eval(x_n.as_f64());
    if y_star < min_peak.as_f64() {
        y_star = min_peak.as_f64();
    } else if y_star > max_peak.as_f64() && max_input.0 > x_n.0 {
        y_star = max_peak.as_f64();
    } else if x_n.0 > max_input.0 && y_star < max_peak.as_f64() {
        y_star = max_peak.as_f64();
    }

    let adaptive = stats::weighted_offset(&xs, &ys, &fit.model, x_n.as_f64())
        .unwrap_or(MemBytes::ZERO);
    let offset = adaptive.max(cfg.static_offset);
    let value = MemBytes::from_f64_ceil(y_star).saturating_add(offset);
    clamp_into(value, PredictionPath::RegressionPlusOffset, cfg)
}

/// Least squares plus the unweighted residual standard deviation.
pub fn predict_witt_lr(
    state: &PredictorState,
    x_n: InputBytes,
    y_user: MemBytes,
    cfg: &SizingConfig,
) -> Prediction {
    if state.count() < cfg.witt_min_samples {
        return clamp_into(y_user, PredictionPath::UserDefault, cfg);
    }
    let (xs, ys) = state.training_pairs();
    let model = match stats::ols_fit(&xs, &ys) {
        Ok(model) => model,
        Err(_) => return clamp_into(y_user, PredictionPath::UserDefault, cfg),
    };
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - model.eval(*x)).collect();
    let sd = stats::sample_stddev(&residuals).expect("at least two samples");
    let value = MemBytes::from_f64_ceil(model.eval(x_n.as_f64()) + sd);
    clamp_into(value, PredictionPath::WittRegression, cfg)
}

/// 95th percentile of the peaks seen so far.
pub fn predict_percentile(
    state: &PredictorState,
    _x_n: InputBytes,
    y_user: MemBytes,
    cfg: &SizingConfig,
) -> Prediction {
    if state.count() == 0 {
        return clamp_into(y_user, PredictionPath::UserDefault, cfg);
    }
    let peaks = state.peaks();
    let value = stats::percentile(&peaks, PERCENTILE_P).expect("history is non-empty");
    clamp_into(value, PredictionPath::PercentileValue, cfg)
}

/// The user's own request, clamped.
pub fn predict_user(
    _state: &PredictorState,
    _x_n: InputBytes,
    y_user: MemBytes,
    cfg: &SizingConfig,
) -> Prediction {
    clamp_into(y_user, PredictionPath::UserDefault, cfg)
}

/// Selectable sizing strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizerKind {
    User,
    WittLr,
    Percentile,
    Ponder,
    /// Experiment-only: allocates exactly the true peak.
    Oracle,
}

impl SizerKind {
    pub fn id(self) -> &'static str {
        match self {
            SizerKind::User => "user",
            SizerKind::WittLr => "witt-lr",
            SizerKind::Percentile => "percentile",
            SizerKind::Ponder => "ponder",
            SizerKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for SizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
#[error("unknown sizer '{0}'")]
pub struct UnknownSizer(pub String);

impl FromStr for SizerKind {
    type Err = UnknownSizer;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "user" => Ok(SizerKind::User),
            "witt-lr" => Ok(SizerKind::WittLr),
            "percentile" => Ok(SizerKind::Percentile),
            "ponder" => Ok(SizerKind::Ponder),
            "oracle" => Ok(SizerKind::Oracle),
            other => Err(UnknownSizer(other.to_owned())),
        }
    }
}

/// Per-abstract-task predictor states behind one sizer choice.
#[derive(Clone, Debug)]
pub struct SizerBank {
    kind: SizerKind,
    cfg: SizingConfig,
    states: BTreeMap<AbstractTaskId, PredictorState>,
}

impl SizerBank {
    pub fn new(kind: SizerKind, cfg: SizingConfig) -> Self {
        SizerBank { kind, cfg, states: BTreeMap::new() }
    }

    pub fn kind(&self) -> SizerKind {
        self.kind
    }

    pub fn cfg(&self) -> &SizingConfig {
        &self.cfg
    }

    pub fn state(&self, abstract_id: &AbstractTaskId) -> Option<&PredictorState> {
        self.states.get(abstract_id)
    }

    pub fn predict_for(&self, task: &PhysicalTaskSpec) -> Prediction {
        if self.kind == SizerKind::Oracle {
            return Prediction {
                value: task.true_peak,
                path: PredictionPath::Oracle,
                clamped: None,
            };
        }
        let empty = PredictorState::new();
        let state = self.states.get(&task.abstract_id).unwrap_or(&empty);
        let predict = match self.kind {
            SizerKind::User => predict_user,
            SizerKind::WittLr => predict_witt_lr,
            SizerKind::Percentile => predict_percentile,
            SizerKind::Ponder => predict_ponder,
            SizerKind::Oracle => unreachable!("handled above"),
        };
        predict(state, task.input_size, task.user_mem, &self.cfg)
    }

    pub fn observe(&mut self, obs: &Observation) {
        let state = self.states.entry(obs.abstract_id.clone()).or_default();
        observe(state, obs, &self.cfg);
    }
}

/// One row of a predictor replay over a trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayRow {
    pub instance_id: String,
    pub predicted_bytes: u64,
    pub actual_bytes: u64,
    pub path: String,
    pub would_fail: bool,
}

/// Replays the online predictor over a workload in instance-id order,
/// without any cluster: predict, record, then observe the true peak.
pub fn replay_dag(dag: &WorkflowDag, kind: SizerKind, cfg: &SizingConfig) -> Vec<ReplayRow> {
    let mut bank = SizerBank::new(kind, cfg.clone());
    let mut rows = Vec::with_capacity(dag.len());
    for (id, task) in dag.tasks() {
        let pred = bank.predict_for(task);
        rows.push(ReplayRow {
            instance_id: id.clone(),
            predicted_bytes: pred.value.as_u64(),
            actual_bytes: task.true_peak.as_u64(),
            path: pred.label(),
            would_fail: pred.value < task.true_peak,
        });
        bank.observe(&Observation {
            abstract_id: task.abstract_id.clone(),
            input_size: task.input_size,
            peak_mem: task.true_peak,
            runtime_ms: task.runtime_ms,
            success: true,
        });
    }
    rows
}

/// Test helper: a state preloaded with successful observations.
pub fn state_from_pairs(pairs: &[(u64, u64)], cfg: &SizingConfig) -> PredictorState {
    let mut state = PredictorState::new();
    for (input, peak) in pairs {
        observe(
            &mut state,
            &Observation {
                abstract_id: AbstractTaskId::new("t"),
                input_size: InputBytes(*input),
                peak_mem: MemBytes(*peak),
                runtime_ms: 1000,
                success: true,
            },
            cfg,
        );
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{GIB, MIB};

    fn cfg() -> SizingConfig {
        SizingConfig::default()
    }

    fn obs(input: u64, peak: u64, success: bool) -> Observation {
        Observation {
            abstract_id: AbstractTaskId::new("t"),
            input_size: InputBytes(input),
            peak_mem: MemBytes(peak),
            runtime_ms: 1000,
            success,
        }
    }

    #[test]
    fn observe_tracks_summaries() {
        let mut state = PredictorState::new();
        observe(&mut state, &obs(5, GIB, true), &cfg());
        assert_eq!(state.count(), 1);
        assert_eq!(state.max_peak(), Some(MemBytes(GIB)));
        observe(&mut state, &obs(9, 2 * GIB, true), &cfg());
        observe(&mut state, &obs(2, GIB / 2, true), &cfg());
        assert_eq!(state.min_peak(), Some(MemBytes(GIB / 2)));
        assert_eq!(state.max_peak(), Some(MemBytes(2 * GIB)));
        assert_eq!(state.min_input(), Some(InputBytes(2)));
        assert_eq!(state.max_input(), Some(InputBytes(9)));
        // Brute-force re-scan agrees with the summaries.
        let peaks: Vec<u64> = state.observations().iter().map(|o| o.peak_mem.0).collect();
        assert_eq!(peaks.iter().min(), Some(&(GIB / 2)));
        assert_eq!(peaks.iter().max(), Some(&(2 * GIB)));
    }

    #[test]
    fn failed_observations_are_dropped_by_default() {
        let mut state = PredictorState::new();
        observe(&mut state, &obs(5, GIB, false), &cfg());
        assert_eq!(state.count(), 0);
        let mut train = cfg();
        train.train_on_failures = true;
        observe(&mut state, &obs(5, GIB, false), &train);
        assert_eq!(state.count(), 1);
    }

    #[test]
    fn empty_history_returns_user_default() {
        let state = PredictorState::new();
        let p = predict_ponder(&state, InputBytes(10), MemBytes::from_gib(4), &cfg());
        assert_eq!(p.value, MemBytes::from_gib(4));
        assert_eq!(p.path, PredictionPath::UserDefault);
        assert_eq!(p.clamped, None);
    }

    #[test]
    fn sparse_history_uses_max_plus_offset_for_smaller_inputs() {
        let pairs = [(10, GIB), (20, 2 * GIB), (30, 3 * GIB / 2)];
        let state = state_from_pairs(&pairs, &cfg());
        let p = predict_ponder(&state, InputBytes(15), MemBytes::from_gib(4), &cfg());
        assert_eq!(p.value.as_u64(), 2_281_701_376);
        assert_eq!(p.path, PredictionPath::MaxPlusStatic);
    }

    #[test]
    fn sparse_history_falls_back_to_user_for_larger_inputs() {
        let pairs = [(10, GIB), (20, 2 * GIB), (30, 3 * GIB / 2)];
        let state = state_from_pairs(&pairs, &cfg());
        // Equal to the maximum input: not strictly smaller, so user value.
        let p = predict_ponder(&state, InputBytes(30), MemBytes::from_gib(4), &cfg());
        assert_eq!(p.value, MemBytes::from_gib(4));
        assert_eq!(p.path, PredictionPath::UserDefault);
        let p = predict_ponder(&state, InputBytes(35), MemBytes::from_gib(4), &cfg());
        assert_eq!(p.path, PredictionPath::UserDefault);
    }

    #[test]
    fn weak_correlation_uses_max_plus_offset() {
        let pairs: Vec<(u64, u64)> = vec![
            (10 * MIB, 100 * MIB),
            (20 * MIB, 180 * MIB),
            (30 * MIB, 100 * MIB),
            (40 * MIB, 180 * MIB),
            (50 * MIB, 100 * MIB),
            (60 * MIB, 180 * MIB),
        ];
        let state = state_from_pairs(&pairs, &cfg());
        let p = predict_ponder(&state, InputBytes(25 * MIB), MemBytes::from_gib(4), &cfg());
        assert_eq!(p.value.as_u64(), (180 + 128) * MIB);
        assert_eq!(p.path, PredictionPath::MaxPlusStatic);
    }

    #[test]
    fn exact_line_gets_model_value_plus_static_floor() {
        let pairs: Vec<(u64, u64)> = (1..=6)
            .map(|k| (10 * k * MIB, (2 * 10 * k + 64) * MIB))
            .collect();
        let state = state_from_pairs(&pairs, &cfg());
        let p = predict_ponder(&state, InputBytes(25 * MIB), MemBytes::from_gib(4), &cfg());
        assert_eq!(p.value.as_u64(), (2 * 25 + 64 + 128) * MIB);
        assert_eq!(p.path, PredictionPath::RegressionPlusOffset);
    }

    #[test]
    fn prediction_is_permutation_invariant() {
        let pairs: Vec<(u64, u64)> = vec![
            (10 * MIB, 90 * MIB),
            (20 * MIB, 130 * MIB),
            (30 * MIB, 120 * MIB),
            (40 * MIB, 180 * MIB),
            (50 * MIB, 170 * MIB),
            (60 * MIB, 220 * MIB),
        ];
        let forward = state_from_pairs(&pairs, &cfg());
        let mut shuffled = pairs.clone();
        shuffled.reverse();
        shuffled.swap(0, 3);
        let backward = state_from_pairs(&shuffled, &cfg());
        for x in [5, 25, 45, 70] {
            let a = predict_ponder(&forward, InputBytes(x * MIB), MemBytes(GIB), &cfg());
            let b = predict_ponder(&backward, InputBytes(x * MIB), MemBytes(GIB), &cfg());
            assert_eq!(a, b, "x = {x} MiB");
        }
    }

    #[test]
    fn witt_cold_start_returns_user() {
        let state = PredictorState::new();
        let p = predict_witt_lr(&state, InputBytes(5), MemBytes::from_gib(4), &cfg());
        assert_eq!(p.value, MemBytes::from_gib(4));
        assert_eq!(p.path, PredictionPath::UserDefault);
    }

    #[test]
    fn witt_exact_line_adds_zero_stddev() {
        let mut wide = cfg();
        wide.lower_bound = MemBytes(1);
        let pairs: Vec<(u64, u64)> = (1..=5)
            .map(|k| (k * MIB, (3 * k + 7) * MIB))
            .collect();
        let state = state_from_pairs(&pairs, &wide);
        let p = predict_witt_lr(&state, InputBytes(2 * MIB), MemBytes::from_gib(4), &wide);
        assert_eq!(p.value.as_u64(), 13 * MIB);
        assert_eq!(p.path, PredictionPath::WittRegression);
        assert_eq!(p.clamped, None);
    }

    #[test]
    fn witt_noisy_matches_closed_form_oracle() {
        let pairs: Vec<(u64, u64)> =
            vec![(1, 10), (2, 13), (3, 14), (4, 18), (5, 19)];
        let mut wide = cfg();
        wide.lower_bound = MemBytes(1);
        let state = state_from_pairs(&pairs, &wide);
        let p = predict_witt_lr(&state, InputBytes(6), MemBytes(100), &wide);
        // Closed form: a = 2.3, b = 7.9, residual stddev = 0.6892...
        assert_eq!(p.value.as_u64(), 23);
    }

    #[test]
    fn percentile_sizer_matches_nearest_rank() {
        let mut wide = cfg();
        wide.lower_bound = MemBytes(1);
        let pairs: Vec<(u64, u64)> = (1..=100).map(|k| (k, k * MIB)).collect();
        let state = state_from_pairs(&pairs, &wide);
        let p = predict_percentile(&state, InputBytes(1), MemBytes::from_gib(4), &wide);
        assert_eq!(p.value.as_u64(), 95 * MIB);
        assert_eq!(p.path, PredictionPath::PercentileValue);
    }

    #[test]
    fn user_sizer_clamps_both_sides() {
        let state = PredictorState::new();
        let p = predict_user(&state, InputBytes(1), MemBytes::from_gib(100), &cfg());
        assert_eq!(p.value, MemBytes::from_gib(64));
        assert_eq!(p.clamped, Some(ClampSide::High));
        let p = predict_user(&state, InputBytes(1), MemBytes::from_mib(1), &cfg());
        assert_eq!(p.value, MemBytes::from_mib(128));
        assert_eq!(p.clamped, Some(ClampSide::Low));
        assert_eq!(p.label(), "user-default+clamp-low");
        let p = predict_user(&state, InputBytes(1), MemBytes::from_gib(4), &cfg());
        assert_eq!(p.value, MemBytes::from_gib(4));
        assert_eq!(p.clamped, None);
    }

    #[test]
    fn sizer_ids_round_trip() {
        for kind in [
            SizerKind::User,
            SizerKind::WittLr,
            SizerKind::Percentile,
            SizerKind::Ponder,
            SizerKind::Oracle,
        ] {
            assert_eq!(kind.id().parse::<SizerKind>().unwrap(), kind);
        }
        assert!("nonsense".parse::<SizerKind>().is_err());
    }

    #[test]
    fn bank_oracle_allocates_true_peak() {
        let bank = SizerBank::new(SizerKind::Oracle, cfg());
        let task = crate::workflow::PhysicalTaskSpec {
            instance_id: "i".to_owned(),
            abstract_id: AbstractTaskId::new("t"),
            input_size: InputBytes(10),
            true_peak: MemBytes(12345),
            runtime_ms: 1,
            cores: 1,
            user_mem: MemBytes(99999),
            depends_on: vec![],
        };
        let p = bank.predict_for(&task);
        assert_eq!(p.value, MemBytes(12345));
        assert_eq!(p.path, PredictionPath::Oracle);
    }
}
