//! TOML configuration parsing and merging with command-line overrides.
//!
//! Every value has a default, so an absent config file is valid. Memory
//! quantities accept either a plain byte integer or a string with a
//! binary-unit suffix ("128MiB", "96 GiB"). Flags always win over the
//! file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

use memsizer_core::cluster::ClusterSpec;
use memsizer_core::predictors::{SizerKind, SizingConfig};
use memsizer_core::schedulers::SchedulerKind;
use memsizer_core::simulator::{
    FailureMode, FailureModel, NoiseMode, NoiseModel, RetryPolicy, RetryRung, RunConfig,
};
use memsizer_core::traceio::{SyntheticPattern, SyntheticSpec};
use memsizer_core::units::{InputBytes, MemBytes};

/// Errors the user can fix by changing flags or the config file; they
/// map to exit status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// Parses "123", "123B", "7KiB", "128MiB", "96 GiB", or "2TiB" to bytes.
pub fn parse_mem_str(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let digits_end = t
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(t.len());
    let (digits, suffix) = t.split_at(digits_end);
    if digits.is_empty() {
        return Err(format!("'{s}' has no leading digits"));
    }
    let mult: u64 = match suffix.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1,
        "kib" => 1 << 10,
        "mib" => 1 << 20,
        "gib" => 1 << 30,
        "tib" => 1 << 40,
        other => return Err(format!("unknown memory unit '{other}' in '{s}'")),
    };
    let n: u64 = digits
        .parse()
        .map_err(|_| format!("'{digits}' is not a valid integer"))?;
    n.checked_mul(mult)
        .ok_or_else(|| format!("'{s}' overflows a 64-bit byte count"))
}

/// A memory quantity from TOML: plain bytes or a suffixed string.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MemValue {
    Int(u64),
    Text(String),
}

impl MemValue {
    pub fn bytes(&self) -> Result<u64> {
        match self {
            MemValue::Int(v) => Ok(*v),
            MemValue::Text(t) => parse_mem_str(t).map_err(usage),
        }
    }

    pub fn mem(&self) -> Result<MemBytes> {
        self.bytes().map(MemBytes)
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub workload: WorkloadSection,
    pub cluster: ClusterSection,
    pub run: RunSection,
    pub sizing: SizingSection,
    pub failure: FailureSection,
    pub noise: NoiseSection,
    pub retry: RetrySection,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSection {
    /// Path to a CSV trace; relative paths resolve against the cwd.
    pub trace: Option<PathBuf>,
    pub synthetic: Option<SyntheticSection>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    pub pattern: Option<SyntheticPattern>,
    pub n: Option<usize>,
    pub slope: Option<f64>,
    pub intercept: Option<MemValue>,
    pub noise_sigma: Option<MemValue>,
    pub cluster_fraction: Option<f64>,
    pub low_center: Option<MemValue>,
    pub low_half_width: Option<MemValue>,
    pub input_min: Option<MemValue>,
    pub input_max: Option<MemValue>,
    pub runtime_ms_per_mib: Option<f64>,
    pub seed: Option<u64>,
    pub workflow: Option<String>,
    pub task_name: Option<String>,
}

impl SyntheticSection {
    pub fn to_spec(&self) -> Result<SyntheticSpec> {
        let mut spec = SyntheticSpec::default();
        if let Some(p) = self.pattern {
            spec.pattern = p;
        }
        if let Some(n) = self.n {
            spec.n = n;
        }
        if let Some(s) = self.slope {
            spec.slope = s;
        }
        if let Some(v) = &self.intercept {
            spec.intercept = v.mem()?;
        }
        if let Some(v) = &self.noise_sigma {
            spec.noise_sigma = v.mem()?;
        }
        if let Some(f) = self.cluster_fraction {
            spec.cluster_fraction = f;
        }
        if let Some(v) = &self.low_center {
            spec.low_center = v.mem()?;
        }
        if let Some(v) = &self.low_half_width {
            spec.low_half_width = v.mem()?;
        }
        if let Some(v) = &self.input_min {
            spec.input_min = InputBytes(v.bytes()?);
        }
        if let Some(v) = &self.input_max {
            spec.input_max = InputBytes(v.bytes()?);
        }
        if let Some(r) = self.runtime_ms_per_mib {
            spec.runtime_ms_per_mib = r;
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(w) = &self.workflow {
            spec.workflow = w.clone();
        }
        if let Some(t) = &self.task_name {
            spec.task_name = t.clone();
        }
        Ok(spec)
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub nodes: Option<u32>,
    pub cores: Option<u32>,
    pub memory: Option<MemValue>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub scheduler: Option<String>,
    pub sizer: Option<String>,
    pub seed: Option<u64>,
    pub repetitions: Option<u32>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SizingSection {
    pub lower_bound: Option<MemValue>,
    pub upper_bound: Option<MemValue>,
    pub static_offset: Option<MemValue>,
    pub lambda: Option<f64>,
    pub pearson_gate: Option<f64>,
    pub min_samples: Option<usize>,
    pub witt_min_samples: Option<usize>,
    pub train_on_failures: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FailureSection {
    pub mode: Option<FailureMode>,
    pub fraction: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub mode: Option<NoiseMode>,
    pub half_width: Option<MemValue>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrySection {
    pub ladder: Option<Vec<RetryRung>>,
}

/// Loads the config file, or defaults when no path is given.
pub fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file '{}'", path.display()))?;
    toml::from_str(&text)
        .map_err(|e| usage(format!("config file '{}': {e}", path.display())))
}

/// Default cluster when neither file nor flags say otherwise:
/// 8 nodes, 32 cores, 96 GiB each.
pub fn cluster_spec(
    section: &ClusterSection,
    nodes: Option<u32>,
    cores: Option<u32>,
    memory: Option<&str>,
) -> Result<ClusterSpec> {
    let mem = match memory {
        Some(text) => MemBytes(parse_mem_str(text).map_err(usage)?),
        None => match &section.memory {
            Some(v) => v.mem()?,
            None => MemBytes::from_gib(96),
        },
    };
    let spec = ClusterSpec::uniform(
        nodes.or(section.nodes).unwrap_or(8),
        cores.or(section.cores).unwrap_or(32),
        mem,
    );
    spec.validate().map_err(|e| usage(e.to_string()))?;
    Ok(spec)
}

pub fn sizing_config(section: &SizingSection) -> Result<SizingConfig> {
    let mut cfg = SizingConfig::default();
    if let Some(v) = &section.lower_bound {
        cfg.lower_bound = v.mem()?;
    }
    if let Some(v) = &section.upper_bound {
        cfg.upper_bound = v.mem()?;
    }
    if let Some(v) = &section.static_offset {
        cfg.static_offset = v.mem()?;
    }
    if let Some(l) = section.lambda {
        cfg.lambda = l;
    }
    if let Some(g) = section.pearson_gate {
        cfg.pearson_gate = g;
    }
    if let Some(m) = section.min_samples {
        cfg.min_samples = m;
    }
    if let Some(m) = section.witt_min_samples {
        cfg.witt_min_samples = m;
    }
    if let Some(t) = section.train_on_failures {
        cfg.train_on_failures = t;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

pub fn run_config(cfg: &FileConfig) -> Result<RunConfig> {
    let mut failure = FailureModel::default();
    if let Some(m) = cfg.failure.mode {
        failure.mode = m;
    }
    if let Some(f) = cfg.failure.fraction {
        failure.fraction = f;
    }
    if let Some(s) = cfg.failure.seed {
        failure.seed = s;
    }
    let mut noise = NoiseModel::default();
    if let Some(m) = cfg.noise.mode {
        noise.mode = m;
    }
    if let Some(v) = &cfg.noise.half_width {
        noise.half_width = v.mem()?;
    }
    if let Some(s) = cfg.noise.seed {
        noise.seed = s;
    }
    let retry = match &cfg.retry.ladder {
        Some(ladder) => RetryPolicy {
            ladder: ladder.clone(),
        },
        None => RetryPolicy::default(),
    };
    Ok(RunConfig {
        sizing: sizing_config(&cfg.sizing)?,
        failure,
        noise,
        retry,
    })
}

/// Sizer names accepted on the command line; the perfect-information
/// sizer is a library-only measurement device and is rejected here.
pub fn parse_sizer(name: &str) -> Result<SizerKind> {
    let kind: SizerKind = name
        .parse()
        .map_err(|e: memsizer_core::predictors::UnknownSizer| usage(e.to_string()))?;
    if kind == SizerKind::Oracle {
        return Err(usage(
            "sizer 'oracle' is not available from the command line; choose one of \
             user, witt-lr, percentile, ponder",
        ));
    }
    Ok(kind)
}

pub fn parse_scheduler(name: &str) -> Result<SchedulerKind> {
    name.parse()
        .map_err(|e: memsizer_core::schedulers::UnknownStrategy| usage(e.to_string()))
}

pub fn parse_pattern(name: &str) -> Result<SyntheticPattern> {
    match name {
        "linear" => Ok(SyntheticPattern::Linear),
        "noisy-weak" => Ok(SyntheticPattern::NoisyWeak),
        "bimodal" => Ok(SyntheticPattern::Bimodal),
        "uncorrelated" => Ok(SyntheticPattern::Uncorrelated),
        other => Err(usage(format!(
            "unknown pattern '{other}'; choose one of linear, noisy-weak, bimodal, uncorrelated"
        ))),
    }
}
