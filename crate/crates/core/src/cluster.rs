//! Cluster description and per-node resource bookkeeping.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::MemBytes;

/// A single node's capacity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub node_id: String,
    pub cores: u32,
    pub memory: MemBytes,
}

/// The whole cluster as configured.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub nodes: Vec<NodeSpec>,
}

impl ClusterSpec {
    /// A cluster of `count` identical nodes named `node-00`, `node-01`, ...
    pub fn uniform(count: u32, cores: u32, memory: MemBytes) -> Self {
        let nodes = (0..count)
            .map(|i| NodeSpec {
                node_id: format!("node-{i:02}"),
                cores,
                memory,
            })
            .collect();
        ClusterSpec { nodes }
    }

    pub fn total_cores(&self) -> u64 {
        self.nodes.iter().map(|n| u64::from(n.cores)).sum()
    }

    pub fn max_node_memory(&self) -> MemBytes {
        self.nodes
            .iter()
            .map(|n| n.memory)
            .max()
            .unwrap_or(MemBytes::ZERO)
    }

    pub fn max_node_cores(&self) -> u32 {
        self.nodes.iter().map(|n| n.cores).max().unwrap_or(0)
    }

    /// Largest memory among nodes that can host `cores` at all.
    pub fn max_memory_with_cores(&self, cores: u32) -> Option<MemBytes> {
        self.nodes
            .iter()
            .filter(|n| n.cores >= cores)
            .map(|n| n.memory)
            .max()
    }

    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.nodes.is_empty() {
            return Err(ClusterError::EmptyCluster);
        }
        let mut seen = std::collections::BTreeSet::new();
        for node in &self.nodes {
            if node.node_id.is_empty() || node.cores == 0 || node.memory == MemBytes::ZERO {
                return Err(ClusterError::InvalidNode {
                    node: node.node_id.clone(),
                });
            }
            if !seen.insert(node.node_id.as_str()) {
                return Err(ClusterError::DuplicateNode(node.node_id.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ClusterError {
    #[error("cluster has no nodes")]
    EmptyCluster,
    #[error("duplicate node id '{0}'")]
    DuplicateNode(String),
    #[error("node '{node}' has an empty id, zero cores, or zero memory")]
    InvalidNode { node: String },
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("node '{node}' cannot fit {cores} cores / {mem} (free: {free_cores} cores / {free_mem})")]
    InsufficientResources {
        node: String,
        cores: u32,
        mem: MemBytes,
        free_cores: u32,
        free_mem: MemBytes,
    },
    #[error("release on node '{node}' exceeds what was allocated")]
    ReleaseOverflow { node: String },
}

#[derive(Clone, Debug)]
struct NodeState {
    spec: NodeSpec,
    free_cores: u32,
    free_mem: MemBytes,
}

/// Mutable free-capacity tracking over a cluster.
///
/// Nodes are kept sorted by id so first-fit scans are deterministic.
#[derive(Clone, Debug)]
pub struct ClusterState {
    nodes: Vec<NodeState>,
}

impl ClusterState {
    pub fn new(spec: &ClusterSpec) -> Self {
        let mut nodes: Vec<NodeState> = spec
            .nodes
            .iter()
            .map(|n| NodeState {
                spec: n.clone(),
                free_cores: n.cores,
                free_mem: n.memory,
            })
            .collect();
        nodes.sort_by(|a, b| a.spec.node_id.cmp(&b.spec.node_id));
        ClusterState { nodes }
    }

    fn node_mut(&mut self, node_id: &str) -> Result<&mut NodeState, ClusterError> {
        self.nodes
            .iter_mut()
            .find(|n| n.spec.node_id == node_id)
            .ok_or_else(|| ClusterError::UnknownNode(node_id.to_owned()))
    }

    pub fn allocate(
        &mut self,
        node_id: &str,
        cores: u32,
        mem: MemBytes,
    ) -> Result<(), ClusterError> {
        let node = self.node_mut(node_id)?;
        if node.free_cores < cores || node.free_mem < mem {
            return Err(ClusterError::InsufficientResources {
                node: node_id.to_owned(),
                cores,
                mem,
                free_cores: node.free_cores,
                free_mem: node.free_mem,
            });
        }
        node.free_cores -= cores;
        node.free_mem = MemBytes(node.free_mem.0 - mem.0);
        Ok(())
    }

    pub fn release(
        &mut self,
        node_id: &str,
        cores: u32,
        mem: MemBytes,
    ) -> Result<(), ClusterError> {
        let node = self.node_mut(node_id)?;
        let new_cores = node.free_cores.checked_add(cores);
        let new_mem = node.free_mem.checked_add(mem);
        match (new_cores, new_mem) {
            (Some(c), Some(m)) if c <= node.spec.cores && m <= node.spec.memory => {
                node.free_cores = c;
                node.free_mem = m;
                Ok(())
            }
            _ => Err(ClusterError::ReleaseOverflow {
                node: node_id.to_owned(),
            }),
        }
    }

    /// First node in id order with enough free cores and memory.
    pub fn first_fit(&self, cores: u32, mem: MemBytes) -> Option<&str> {
        self.nodes
            .iter()
            .find(|n| n.free_cores >= cores && n.free_mem >= mem)
            .map(|n| n.spec.node_id.as_str())
    }

    pub fn free_of(&self, node_id: &str) -> Option<(u32, MemBytes)> {
        self.nodes
            .iter()
            .find(|n| n.spec.node_id == node_id)
            .map(|n| (n.free_cores, n.free_mem))
    }

    pub fn is_idle(&self) -> bool {
        self.nodes
            .iter()
            .all(|n| n.free_cores == n.spec.cores && n.free_mem == n.spec.memory)
    }
}
