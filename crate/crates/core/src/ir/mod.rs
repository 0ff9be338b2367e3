//! In-memory IR: types, ops, single-block regions, SSA values, the
//! traversal every pass shares, and the structural verifier.

pub mod analysis;
pub mod builder;
mod diag;
mod iso;
mod ops;
mod program;
mod types;
mod verify;
mod walk;

pub use diag::Diagnostic;
pub use iso::structurally_equal;
pub use ops::{
    Attr, CmpPredicate, CombinerKind, DenseData, ExecSpace, OpKind, ParallelLevel, SingleLevel,
};
pub use program::{
    classify_combiner, func_results_attr, segments_attr, LoopLayout, Operation, Program, Region,
    ValueId, ValueTable, SEGMENTS_ATTR,
};
pub use types::{Dim, MemRefType, MemorySpace, ScalarType, Type};
pub use verify::{reduce_dims, verify};
pub use walk::{op_at, op_at_mut, op_paths, value_numbering, walk, walk_op, walk_region, OpPath};
