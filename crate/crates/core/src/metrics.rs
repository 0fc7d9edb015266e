//! Evaluation quantities computed from run reports and workload traces.
//!
//! The central number is the memory allocation quality: used memory-time
//! divided by used plus over- plus under-allocation wastage. Successful
//! attempts contribute peak-times-duration as "used" and the allocation
//! surplus as over-wastage; failed attempts burn their whole allocation
//! for the time they ran, which counts as under-wastage. Byte-millisecond
//! products are accumulated in 128-bit integers so large clusters cannot
//! overflow them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::ClusterSpec;
use crate::simulator::{AttemptOutcome, RunReport};
use crate::stats::{self, LinearModel};
use crate::units::{MemBytes, Millis, GIB};
use crate::workflow::{AbstractTaskId, WorkflowDag};

/// Headline numbers of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    /// Memory allocation quality in [0, 1]; 1 when nothing was wasted.
    pub maq: f64,
    pub used_mem_time: u128,
    pub over_wastage: u128,
    pub under_wastage: u128,
    pub makespan: Millis,
    pub failed_attempts: u64,
    pub cpu_utilization: f64,
    pub allocated_mem_time: u128,
    pub allocated_cpu_time: u64,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("the two workloads share no instance ids")]
    NoOverlap,
    #[error("abstract task '{abstract_id}' has {got} instances, need at least 2")]
    TooFewSamples { abstract_id: String, got: usize },
}

/// Sums (used, over, under) memory-time over the attempt ledger.
pub fn compute_wastage(report: &RunReport) -> (u128, u128, u128) {
    let mut used = 0u128;
    let mut over = 0u128;
    let mut under = 0u128;
    for a in &report.attempts {
        let dur = u128::from(a.end_ms - a.start_ms);
        match a.outcome {
            AttemptOutcome::Success => {
                let peak = u128::from(a.observed_peak.as_u64());
                let alloc = u128::from(a.allocated_mem.as_u64());
                used += peak * dur;
                over += (alloc - peak) * dur;
            }
            AttemptOutcome::MemoryFailure => {
                under += u128::from(a.allocated_mem.as_u64()) * dur;
            }
        }
    }
    (used, over, under)
}

fn maq_from_parts(used: u128, over: u128, under: u128) -> f64 {
    let denom = used + over + under;
    if denom == 0 {
        log::warn!("allocation quality over an empty ledger defaults to 1.0");
        return 1.0;
    }
    used as f64 / denom as f64
}

/// Memory allocation quality of a run; 1.0 for an empty ledger.
pub fn compute_maq(report: &RunReport) -> f64 {
    let (used, over, under) = compute_wastage(report);
    maq_from_parts(used, over, under)
}

/// Fraction of total core capacity busy over the makespan; 0 when either
/// the makespan or the cluster is empty.
pub fn cpu_utilization(report: &RunReport, cluster: &ClusterSpec) -> f64 {
    let busy: u128 = report
        .attempts
        .iter()
        .map(|a| u128::from(a.cores) * u128::from(a.end_ms - a.start_ms))
        .sum();
    let capacity = u128::from(cluster.total_cores()) * u128::from(report.makespan);
    if capacity == 0 {
        return 0.0;
    }
    busy as f64 / capacity as f64
}

/// Bundles every headline metric of a run.
pub fn summarize(report: &RunReport, cluster: &ClusterSpec) -> MetricsSummary {
    let (used, over, under) = compute_wastage(report);
    let mut allocated_mem_time = 0u128;
    let mut allocated_cpu_time = 0u64;
    let mut failed_attempts = 0u64;
    for a in &report.attempts {
        let dur = a.end_ms - a.start_ms;
        allocated_mem_time += u128::from(a.allocated_mem.as_u64()) * u128::from(dur);
        allocated_cpu_time += u64::from(a.cores) * dur;
        if a.outcome == AttemptOutcome::MemoryFailure {
            failed_attempts += 1;
        }
    }
    MetricsSummary {
        maq: maq_from_parts(used, over, under),
        used_mem_time: used,
        over_wastage: over,
        under_wastage: under,
        makespan: report.makespan,
        failed_attempts,
        cpu_utilization: cpu_utilization(report, cluster),
        allocated_mem_time,
        allocated_cpu_time,
    }
}

/// What to read memory-per-core ratios from.
#[derive(Clone, Copy, Debug)]
pub enum MemPerCoreSource<'a> {
    /// Static workload data: one point per task.
    Trace(&'a WorkflowDag),
    /// Simulated ledger: one point per attempt.
    Report(&'a RunReport),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MemKind {
    /// What was asked for: user request (trace) or allocation (report).
    Requested,
    /// What was actually consumed at peak.
    Used,
}

/// Turns sorted sample values into collapsed cumulative points: one
/// (value, fraction ≤ value) pair per distinct value, ending at 1.0.
fn cumulative_points(mut values: Vec<f64>) -> Vec<(f64, f64)> {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, v) in values.into_iter().enumerate() {
        let frac = (i + 1) as f64 / n as f64;
        match points.last_mut() {
            Some(last) if last.0 == v => last.1 = frac,
            _ => points.push((v, frac)),
        }
    }
    points
}

/// Cumulative distribution of GiB-per-core ratios, smallest ratio first.
pub fn mem_per_core_distribution(source: MemPerCoreSource<'_>, kind: MemKind) -> Vec<(f64, f64)> {
    let ratio = |mem: MemBytes, cores: u32| mem.as_f64() / GIB as f64 / f64::from(cores);
    let values: Vec<f64> = match source {
        MemPerCoreSource::Trace(dag) => dag
            .tasks()
            .values()
            .map(|t| match kind {
                MemKind::Requested => ratio(t.user_mem, t.cores),
                MemKind::Used => ratio(t.true_peak, t.cores),
            })
            .collect(),
        MemPerCoreSource::Report(report) => report
            .attempts
            .iter()
            .map(|a| match kind {
                MemKind::Requested => ratio(a.allocated_mem, a.cores),
                MemKind::Used => ratio(a.observed_peak, a.cores),
            })
            .collect(),
    };
    cumulative_points(values)
}

/// Peak-memory deltas between two workloads describing the same tasks.
#[derive(Clone, Debug, PartialEq)]
pub struct PeakDiffReport {
    /// |peak_a - peak_b| per shared instance id, in id order.
    pub diffs: Vec<(String, MemBytes)>,
    /// Cumulative distribution of the differences in bytes.
    pub cdf: Vec<(f64, f64)>,
    /// Instance ids only present in the first workload.
    pub unmatched_a: Vec<String>,
    /// Instance ids only present in the second workload.
    pub unmatched_b: Vec<String>,
}

/// Joins two workloads on instance id and reports per-task peak deltas.
pub fn peak_diff_between_runs(
    a: &WorkflowDag,
    b: &WorkflowDag,
) -> Result<PeakDiffReport, MetricsError> {
    let mut diffs = Vec::new();
    let mut unmatched_a = Vec::new();
    for (id, ta) in a.tasks() {
        match b.get(id) {
            Some(tb) => {
                let d = ta.true_peak.as_u64().abs_diff(tb.true_peak.as_u64());
                diffs.push((id.clone(), MemBytes(d)));
            }
            None => unmatched_a.push(id.clone()),
        }
    }
    let unmatched_b: Vec<String> = b
        .tasks()
        .keys()
        .filter(|id| a.get(id).is_none())
        .cloned()
        .collect();
    if diffs.is_empty() {
        return Err(MetricsError::NoOverlap);
    }
    let cdf = cumulative_points(diffs.iter().map(|(_, d)| d.as_f64()).collect());
    Ok(PeakDiffReport {
        diffs,
        cdf,
        unmatched_a,
        unmatched_b,
    })
}

/// Offline description of one abstract task's input-to-peak relationship:
/// the fitted lines and how many instances each line would underpredict.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternReport {
    pub n: usize,
    /// Sample correlation; 0.0 when either variable has no variance.
    pub pearson_r: Option<f64>,
    pub ols: Option<LinearModel>,
    /// Least-squares line shifted up by the residual standard deviation.
    pub witt: Option<LinearModel>,
    /// Nearest-rank 95th percentile of the observed peaks.
    pub p95: MemBytes,
    pub ols_underpredictions: Option<usize>,
    pub witt_underpredictions: Option<usize>,
    pub p95_underpredictions: usize,
}

/// Fits every sizing line over all instances of one abstract task.
pub fn pattern_report(
    dag: &WorkflowDag,
    abstract_id: &AbstractTaskId,
) -> Result<PatternReport, MetricsError> {
    let instances: Vec<_> = dag
        .tasks()
        .values()
        .filter(|t| &t.abstract_id == abstract_id)
        .collect();
    let n = instances.len();
    if n < 2 {
        return Err(MetricsError::TooFewSamples {
            abstract_id: abstract_id.as_str().to_owned(),
            got: n,
        });
    }
    let xs: Vec<f64> = instances.iter().map(|t| t.input_size.as_f64()).collect();
    let ys: Vec<f64> = instances.iter().map(|t| t.true_peak.as_f64()).collect();
    let peaks: Vec<MemBytes> = instances.iter().map(|t| t.true_peak).collect();

    let pearson_r = stats::pearson(&xs, &ys).ok();
    let ols = stats::ols_fit(&xs, &ys).ok();
    let witt = ols.as_ref().and_then(|model| {
        let residuals: Vec<f64> = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| y - model.eval(x))
            .collect();
        let sd = stats::sample_stddev(&residuals).ok()?;
        Some(LinearModel {
            a: model.a,
            b: model.b + sd,
        })
    });
    let p95 = stats::percentile(&peaks, 95.0).expect("n >= 2 peaks");

    let count_under = |line: &LinearModel| {
        xs.iter()
            .zip(&ys)
            .filter(|&(&x, &y)| y > line.eval(x))
            .count()
    };
    let ols_underpredictions = ols.as_ref().map(count_under);
    let witt_underpredictions = witt.as_ref().map(count_under);
    let p95_underpredictions = peaks.iter().filter(|p| **p > p95).count();

    Ok(PatternReport {
        n,
        pearson_r,
        ols,
        witt,
        p95,
        ols_underpredictions,
        witt_underpredictions,
        p95_underpredictions,
    })
}

/// Counts how often each prediction branch label occurs in a ledger.
pub fn path_counts(report: &RunReport) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for a in &report.attempts {
        *counts.entry(a.predictor_path.clone()).or_insert(0) += 1;
    }
    counts
}
