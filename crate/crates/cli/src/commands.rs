//! The four subcommands: simulate, replay, analyze, generate.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use memsizer_core::cluster::ClusterSpec;
use memsizer_core::metrics::{
    mem_per_core_distribution, pattern_report, peak_diff_between_runs, summarize, MemKind,
    MemPerCoreSource, MetricsError,
};
use memsizer_core::predictors::{replay_dag, SizerKind, SizingConfig};
use memsizer_core::schedulers::SchedulerKind;
use memsizer_core::simulator::{run, RunConfig, SimError};
use memsizer_core::traceio::{
    generate_synthetic, parse_trace, write_report, write_trace, SynthError, SyntheticSpec,
    Workload,
};

use crate::config::{usage, UsageError};

/// Whether the command finished cleanly or some run aborted; aborted
/// commands still write all their outputs but exit with status 3.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Aborted,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating directory '{}'", parent.display()))?;
        }
    }
    std::fs::write(path, bytes).with_context(|| format!("writing '{}'", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Reads a workload from a trace file path.
pub fn load_trace(path: &Path) -> Result<Workload> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading trace '{}'", path.display()))?;
    parse_trace(&bytes).with_context(|| format!("parsing trace '{}'", path.display()))
}

fn classify_synth(err: SynthError) -> anyhow::Error {
    match err {
        SynthError::SpecError(msg) => usage(format!("synthetic spec: {msg}")),
        other => anyhow::Error::new(other),
    }
}

pub fn build_synthetic(spec: &SyntheticSpec) -> Result<Workload> {
    generate_synthetic(spec).map_err(classify_synth)
}

fn classify_sim(err: SimError) -> anyhow::Error {
    match err {
        SimError::ConfigError(msg) => anyhow::Error::new(UsageError(msg)),
        other => anyhow::Error::new(other),
    }
}

#[derive(Serialize)]
struct SimSummary {
    repetitions: u32,
    seeds: Vec<u64>,
    makespans: Vec<u64>,
    maqs: Vec<f64>,
    aborted: Vec<bool>,
    median_rep: usize,
    median_makespan: u64,
    median_report: String,
}

/// Runs `repetitions` seeded simulations (seed + repetition index each),
/// writes one JSON report per run, and a summary pointing at the run
/// with the median makespan.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    workload: &Workload,
    cluster: &ClusterSpec,
    scheduler: SchedulerKind,
    sizer: SizerKind,
    cfg: &RunConfig,
    base_seed: u64,
    repetitions: u32,
    out: &Path,
) -> Result<Outcome> {
    if repetitions == 0 {
        return Err(usage("repetitions must be at least 1"));
    }
    let mut seeds = Vec::new();
    let mut makespans = Vec::new();
    let mut maqs = Vec::new();
    let mut aborted = Vec::new();
    for rep in 0..repetitions {
        let seed = base_seed.wrapping_add(u64::from(rep));
        let report = run(&workload.dag, cluster, scheduler, sizer, cfg, seed)
            .map_err(classify_sim)?;
        let summary = summarize(&report, cluster);
        write_file(
            &out.join(format!("run-{rep:02}.json")),
            &write_report(&report, &summary),
        )?;
        seeds.push(seed);
        makespans.push(report.makespan);
        maqs.push(summary.maq);
        aborted.push(report.aborted);
    }
    let mut order: Vec<usize> = (0..makespans.len()).collect();
    order.sort_by_key(|&i| (makespans[i], i));
    let median_rep = order[(order.len() - 1) / 2];
    let any_aborted = aborted.iter().any(|a| *a);
    let summary = SimSummary {
        repetitions,
        seeds,
        median_makespan: makespans[median_rep],
        makespans,
        maqs,
        aborted,
        median_rep,
        median_report: format!("run-{median_rep:02}.json"),
    };
    let mut bytes = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    bytes.push(b'\n');
    write_file(&out.join("summary.json"), &bytes)?;
    println!(
        "median repetition {} (makespan {} ms)",
        median_rep, summary.median_makespan
    );
    Ok(if any_aborted {
        Outcome::Aborted
    } else {
        Outcome::Clean
    })
}

/// Replays the online sizer over the workload in instance order, with no
/// cluster, and writes predicted vs actual peaks per task.
pub fn replay(
    workload: &Workload,
    sizer: SizerKind,
    sizing: &SizingConfig,
    out: &Path,
) -> Result<()> {
    let rows = replay_dag(&workload.dag, sizer, sizing);
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["instance_id", "predicted_bytes", "actual_bytes", "path", "would_fail"])
        .expect("write to vec");
    for row in rows {
        writer
            .write_record([
                row.instance_id.as_str(),
                &row.predicted_bytes.to_string(),
                &row.actual_bytes.to_string(),
                &row.path,
                if row.would_fail { "true" } else { "false" },
            ])
            .expect("write to vec");
    }
    write_file(&out.join("replay.csv"), &writer.into_inner().expect("flush"))
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn fmt_opt_usize(v: Option<usize>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Writes per-abstract-task fit reports and memory-per-core
/// distributions; with a second trace, also the per-instance peak
/// differences between the two.
pub fn analyze(workload: &Workload, second: Option<&Workload>, out: &Path) -> Result<()> {
    let abstracts: BTreeSet<_> = workload
        .dag
        .tasks()
        .values()
        .map(|t| t.abstract_id.clone())
        .collect();
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "task",
            "n",
            "pearson_r",
            "ols_slope",
            "ols_intercept",
            "witt_slope",
            "witt_intercept",
            "p95_bytes",
            "ols_underpredictions",
            "witt_underpredictions",
            "p95_underpredictions",
        ])
        .expect("write to vec");
    for abstract_id in abstracts {
        let report = match pattern_report(&workload.dag, &abstract_id) {
            Ok(r) => r,
            Err(MetricsError::TooFewSamples { abstract_id, got }) => {
                log::warn!("skipping '{abstract_id}': only {got} instance(s)");
                continue;
            }
            Err(other) => return Err(other.into()),
        };
        writer
            .write_record([
                abstract_id.as_str().to_owned(),
                report.n.to_string(),
                fmt_opt_f64(report.pearson_r),
                fmt_opt_f64(report.ols.as_ref().map(|m| m.a)),
                fmt_opt_f64(report.ols.as_ref().map(|m| m.b)),
                fmt_opt_f64(report.witt.as_ref().map(|m| m.a)),
                fmt_opt_f64(report.witt.as_ref().map(|m| m.b)),
                report.p95.as_u64().to_string(),
                fmt_opt_usize(report.ols_underpredictions),
                fmt_opt_usize(report.witt_underpredictions),
                report.p95_underpredictions.to_string(),
            ])
            .expect("write to vec");
    }
    write_file(
        &out.join("pattern_report.csv"),
        &writer.into_inner().expect("flush"),
    )?;

    for (kind, name) in [
        (MemKind::Requested, "mem_per_core_requested.csv"),
        (MemKind::Used, "mem_per_core_used.csv"),
    ] {
        let dist = mem_per_core_distribution(MemPerCoreSource::Trace(&workload.dag), kind);
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["ratio_gib_per_core", "cumulative_fraction"])
            .expect("write to vec");
        for (ratio, frac) in dist {
            writer
                .write_record([ratio.to_string(), frac.to_string()])
                .expect("write to vec");
        }
        write_file(&out.join(name), &writer.into_inner().expect("flush"))?;
    }

    if let Some(other) = second {
        let diff = peak_diff_between_runs(&workload.dag, &other.dag)?;
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["instance_id", "diff_bytes"])
            .expect("write to vec");
        for (id, delta) in &diff.diffs {
            writer
                .write_record([id.as_str(), &delta.as_u64().to_string()])
                .expect("write to vec");
        }
        write_file(
            &out.join("peak_diff.csv"),
            &writer.into_inner().expect("flush"),
        )?;

        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["diff_bytes", "cumulative_fraction"])
            .expect("write to vec");
        for (bytes, frac) in &diff.cdf {
            writer
                .write_record([bytes.to_string(), frac.to_string()])
                .expect("write to vec");
        }
        write_file(
            &out.join("peak_diff_cdf.csv"),
            &writer.into_inner().expect("flush"),
        )?;

        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["side", "instance_id"])
            .expect("write to vec");
        for id in &diff.unmatched_a {
            writer.write_record(["a", id]).expect("write to vec");
        }
        for id in &diff.unmatched_b {
            writer.write_record(["b", id]).expect("write to vec");
        }
        write_file(
            &out.join("peak_diff_unmatched.csv"),
            &writer.into_inner().expect("flush"),
        )?;
    }
    Ok(())
}

/// Generates a synthetic workload and writes it as a trace.
pub fn generate(spec: &SyntheticSpec, out: &Path) -> Result<()> {
    let workload = build_synthetic(spec)?;
    write_file(&out.join("trace.csv"), &write_trace(&workload))
}
