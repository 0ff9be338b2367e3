//! Reference interpreter over a simulated host/device machine.
//!
//! Parallel loops run sequentially in ascending lexicographic order and
//! reductions fold in that same order, so results are deterministic.

mod diff;
mod exec;
mod memory;
mod value;

use std::collections::BTreeMap;

pub use diff::{diff_outputs, DiffReport};
pub use exec::{run, run_eager_baseline};
pub use memory::{row_major_strides, MemHandle, SimBuffer, Space, TraceEvent, TransferTrace};
pub use value::{parse_scalar, RtValue, Scalar, Tensor};

use crate::ir::OpPath;

/// Iteration cap for a single loop launch.
pub const MAX_TRIPS: u64 = 1 << 31;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecConfig {
    /// League size the fixtures use for team-level loops. The interpreter
    /// takes the actual league from each team loop's bound; this only has
    /// to be positive.
    pub league_size_for_sim: usize,
    pub strict_stale_checking: bool,
    pub seed: u64,
    /// When false, host and device share one array and every sync is a no-op.
    pub separate_device_memory: bool,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            league_size_for_sim: 4,
            strict_stale_checking: true,
            seed: 0,
            separate_device_memory: true,
        }
    }
}

/// Execution counts gathered during a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    /// Stores, copies, calls and `kokkos.single` bodies, by op path.
    pub op_executions: BTreeMap<OpPath, u64>,
    pub barriers: u64,
    /// League iterations of `kokkos.team_parallel`.
    pub teams: u64,
    pub kernel_launches: u64,
    /// Vector-length hint values seen at each team/thread launch.
    pub vector_length_hints: Vec<(OpPath, i64)>,
}

impl Counters {
    pub fn count(&self, path: &OpPath) -> u64 {
        self.op_executions.get(path).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Values returned by the entry function.
    pub returns: Vec<RtValue>,
    /// Final contents of every memref argument, in parameter order.
    pub arguments: Vec<RtValue>,
    pub trace: TransferTrace,
    pub counters: Counters,
}

impl RunResult {
    /// Returns followed by the memref arguments; the unit compared by
    /// equivalence checks.
    pub fn outputs(&self) -> Vec<RtValue> {
        self.returns
            .iter()
            .chain(&self.arguments)
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InterpError {
    #[error("no function @{0}")]
    UnknownFunction(String),
    #[error("argument mismatch: {0}")]
    Signature(String),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("op {path}: index {index} out of bounds on axis {axis} (extent {extent})")]
    OutOfBounds {
        path: OpPath,
        axis: usize,
        index: i64,
        extent: usize,
    },
    #[error("op {path}: division by zero")]
    DivisionByZero { path: OpPath },
    #[error("op {path}: stale {space} access to {root}")]
    StaleAccess {
        root: String,
        space: Space,
        path: OpPath,
    },
    #[error("op {path}: trip count {trips} exceeds the iteration guard")]
    TripCount { path: OpPath, trips: u64 },
    #[error("op {path}: loop step must be positive")]
    BadStep { path: OpPath },
    #[error("op {path}: access to deallocated buffer {root}")]
    UseAfterFree { root: String, path: OpPath },
    #[error("op {path}: {message}")]
    Invalid { path: OpPath, message: String },
}

impl InterpError {
    pub fn path(&self) -> Option<&OpPath> {
        match self {
            InterpError::UnknownFunction(_)
            | InterpError::Signature(_)
            | InterpError::Config(_) => None,
            InterpError::OutOfBounds { path, .. }
            | InterpError::DivisionByZero { path }
            | InterpError::StaleAccess { path, .. }
            | InterpError::TripCount { path, .. }
            | InterpError::BadStep { path }
            | InterpError::UseAfterFree { path, .. }
            | InterpError::Invalid { path, .. } => Some(path),
        }
    }
}
