//! Workflow domain model: abstract tasks, physical task instances, DAG
//! validation, ranks, and ready sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{InputBytes, MemBytes, Millis};

/// Name of an abstract task, the blueprint its physical instances share.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AbstractTaskId(pub String);

impl AbstractTaskId {
    pub fn new(name: impl Into<String>) -> Self {
        AbstractTaskId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AbstractTaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AbstractTaskId {
    fn from(s: &str) -> Self {
        AbstractTaskId(s.to_owned())
    }
}

/// One concrete execution of an abstract task over specific input data.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhysicalTaskSpec {
    pub instance_id: String,
    pub abstract_id: AbstractTaskId,
    pub input_size: InputBytes,
    pub true_peak: MemBytes,
    pub runtime_ms: Millis,
    pub cores: u32,
    pub user_mem: MemBytes,
    pub depends_on: Vec<String>,
}

/// A finished (or failed) task execution as seen by the predictors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub abstract_id: AbstractTaskId,
    pub input_size: InputBytes,
    pub peak_mem: MemBytes,
    pub runtime_ms: Millis,
    pub success: bool,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum DagError {
    #[error("dependency cycle through task '{0}'")]
    CycleDetected(String),
    #[error("task '{instance}' depends on unknown task '{missing}'")]
    UnknownDependency { instance: String, missing: String },
    #[error("duplicate instance id '{0}'")]
    DuplicateInstance(String),
    #[error("invalid task '{instance}': {reason}")]
    InvalidTask { instance: String, reason: String },
}

/// A validated, acyclic set of physical tasks keyed by instance id.
///
/// Construction through [`WorkflowDag::from_tasks`] checks per-task field
/// invariants, dependency resolution, and acyclicity, so every value of
/// this type is a valid DAG.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowDag {
    tasks: BTreeMap<String, PhysicalTaskSpec>,
    successors: BTreeMap<String, Vec<String>>,
}

impl WorkflowDag {
    pub fn from_tasks(
        tasks: impl IntoIterator<Item = PhysicalTaskSpec>,
    ) -> Result<Self, DagError> {
        let mut map = BTreeMap::new();
        for task in tasks {
            check_task_fields(&task)?;
            let id = task.instance_id.clone();
            if map.insert(id.clone(), task).is_some() {
                return Err(DagError::DuplicateInstance(id));
            }
        }

        let mut successors: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (id, task) in &map {
            for dep in &task.depends_on {
                if !map.contains_key(dep) {
                    return Err(DagError::UnknownDependency {
                        instance: id.clone(),
                        missing: dep.clone(),
                    });
                }
                successors.entry(dep.clone()).or_default().push(id.clone());
            }
        }

        let dag = WorkflowDag { tasks: map, successors };
        dag.check_acyclic()?;
        Ok(dag)
    }

    pub fn tasks(&self) -> &BTreeMap<String, PhysicalTaskSpec> {
        &self.tasks
    }

    pub fn get(&self, instance_id: &str) -> Option<&PhysicalTaskSpec> {
        self.tasks.get(instance_id)
    }

    pub fn successors(&self, instance_id: &str) -> &[String] {
        self.successors
            .get(instance_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    fn check_acyclic(&self) -> Result<(), DagError> {
        // Kahn's algorithm over in-degrees; anything left over sits on a cycle.
        let mut in_deg: BTreeMap<&str, usize> = self
            .tasks
            .iter()
            .map(|(id, t)| (id.as_str(), t.depends_on.len()))
            .collect();
        let mut queue: Vec<&str> = in_deg
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(id, _)| *id)
            .collect();
        let mut seen = 0usize;
        while let Some(id) = queue.pop() {
            seen += 1;
            for succ in self.successors(id) {
                let d = in_deg.get_mut(succ.as_str()).expect("successor exists");
                *d -= 1;
                if *d == 0 {
                    queue.push(succ);
                }
            }
        }
        if seen == self.tasks.len() {
            Ok(())
        } else {
            let first_on_cycle = in_deg
                .iter()
                .find(|(_, d)| **d > 0)
                .map(|(id, _)| (*id).to_owned())
                .expect("leftover node exists");
            Err(DagError::CycleDetected(first_on_cycle))
        }
    }
}

fn check_task_fields(task: &PhysicalTaskSpec) -> Result<(), DagError> {
    let fail = |reason: &str| {
        Err(DagError::InvalidTask {
            instance: task.instance_id.clone(),
            reason: reason.to_owned(),
        })
    };
    if task.instance_id.is_empty() {
        return fail("empty instance id");
    }
    if task.abstract_id.as_str().is_empty() {
        return fail("empty abstract task name");
    }
    if task.runtime_ms == 0 {
        return fail("runtime must be positive");
    }
    if task.cores == 0 {
        return fail("cores must be at least 1");
    }
    if task.true_peak == MemBytes::ZERO {
        return fail("true peak must be positive");
    }
    if task.user_mem == MemBytes::ZERO {
        return fail("user memory must be positive");
    }
    Ok(())
}

/// Re-checks the invariants a constructed DAG already guarantees.
pub fn validate_dag(dag: &WorkflowDag) -> Result<(), DagError> {
    for (id, task) in dag.tasks() {
        check_task_fields(task)?;
        for dep in &task.depends_on {
            if dag.get(dep).is_none() {
                return Err(DagError::UnknownDependency {
                    instance: id.clone(),
                    missing: dep.clone(),
                });
            }
        }
    }
    dag.check_acyclic()
}

/// Longest-path-to-an-end-task length for every instance.
///
/// A task with no successors has rank 0; otherwise the rank is one more
/// than the largest successor rank.
pub fn compute_ranks(dag: &WorkflowDag) -> BTreeMap<String, u32> {
    let mut ranks: BTreeMap<String, u32> =
        dag.tasks().keys().map(|id| (id.clone(), 0)).collect();
    let mut out_deg: BTreeMap<&str, usize> = dag
        .tasks()
        .keys()
        .map(|id| (id.as_str(), dag.successors(id).len()))
        .collect();
    let mut queue: Vec<&str> = out_deg
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(id, _)| *id)
        .collect();
    while let Some(id) = queue.pop() {
        let through = ranks[id] + 1;
        let task = dag.get(id).expect("task exists");
        for dep in &task.depends_on {
            let r = ranks.get_mut(dep).expect("dependency exists");
            if through > *r {
                *r = through;
            }
            let d = out_deg.get_mut(dep.as_str()).expect("dependency exists");
            *d -= 1;
            if *d == 0 {
                queue.push(dep);
            }
        }
    }
    ranks
}

/// Instances that have not started and whose dependencies are all finished.
pub fn ready_set(
    dag: &WorkflowDag,
    finished: &BTreeSet<String>,
    running: &BTreeSet<String>,
) -> BTreeSet<String> {
    dag.tasks()
        .iter()
        .filter(|(id, task)| {
            !finished.contains(*id)
                && !running.contains(*id)
                && task.depends_on.iter().all(|d| finished.contains(d))
        })
        .map(|(id, _)| id.clone())
        .collect()
}

#[cfg(test)]
pub(crate) fn task(
    id: &str,
    abstract_id: &str,
    input: u64,
    peak: u64,
    deps: &[&str],
) -> PhysicalTaskSpec {
    PhysicalTaskSpec {
        instance_id: id.to_owned(),
        abstract_id: AbstractTaskId::new(abstract_id),
        input_size: InputBytes(input),
        true_peak: MemBytes(peak),
        runtime_ms: 1000,
        cores: 1,
        user_mem: MemBytes::from_gib(4),
        depends_on: deps.iter().map(|d| (*d).to_owned()).collect(),
    }
}
