//! The lowering pipeline from linalg/sparse ops down to kokkos loops with
//! explicit host/device synchronization.

mod dualview;
mod estimate;
mod linalg;
mod map_loops;
mod normalize;
mod pipeline;
mod spmv;

use std::collections::HashMap;

pub use dualview::manage_dualviews;
pub use estimate::{estimate_parallelism, ParallelismEstimate};
pub use linalg::{lower_dense_linalg, lower_linalg_to_kernels};
pub use map_loops::map_loops;
pub use normalize::normalize_loops;
pub use pipeline::{
    apply_options, run_pipeline, PassKind, PassPipeline, PipelineError, PipelineFailure,
    PipelineOutput, PRESET_NAME,
};
pub use spmv::lower_spmv_csr;

use crate::ir::builder::combiner_region;
use crate::ir::{Attr, CombinerKind, Diagnostic, OpKind, Operation, Region, ValueId, ValueTable};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetConfig {
    /// Cap on vector-length hints; a power of two in [1, 1024].
    pub max_vector_length: i64,
    pub separate_device_memory: bool,
    pub kernel_library_calls: bool,
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig {
            max_vector_length: 32,
            separate_device_memory: true,
            kernel_library_calls: false,
        }
    }
}

impl TargetConfig {
    pub fn validate(&self) -> Result<(), String> {
        let v = self.max_vector_length;
        if !(1..=1024).contains(&v) || v & (v - 1) != 0 {
            return Err(format!(
                "max-vector-length must be a power of two in [1, 1024], got {v}"
            ));
        }
        Ok(())
    }
}

pub type PassResult = Result<(), Vec<Diagnostic>>;

/// Integer constants defined anywhere inside `ops`, by result value.
pub(crate) fn int_constants(ops: &[Operation]) -> HashMap<ValueId, i64> {
    fn collect(ops: &[Operation], out: &mut HashMap<ValueId, i64>) {
        for op in ops {
            if op.kind == OpKind::Constant {
                if let Some(Attr::Int(v)) = op.attr("value") {
                    out.insert(op.results[0], *v);
                }
            }
            for r in &op.regions {
                collect(&r.ops, out);
            }
        }
    }
    let mut out = HashMap::new();
    collect(ops, &mut out);
    out
}

/// `scf.parallel` with the given bounds, reduction inits and body.
pub(crate) fn parallel_op(
    lbs: &[ValueId],
    ubs: &[ValueId],
    steps: &[ValueId],
    inits: &[ValueId],
    results: &[ValueId],
    body: Region,
) -> Operation {
    Operation::new(OpKind::Parallel)
        .with_operands(lbs.iter().chain(ubs).chain(steps).chain(inits).copied())
        .with_results(results.iter().copied())
        .with_region(body)
}

/// `scf.reduce(vals)` with one fresh combiner region per value.
pub(crate) fn reduce_op(
    values: &mut ValueTable,
    vals: &[ValueId],
    kinds: &[CombinerKind],
) -> Operation {
    let mut op = Operation::new(OpKind::Reduce).with_operands(vals.iter().copied());
    for (&v, &k) in vals.iter().zip(kinds) {
        let ty = values.ty(v).as_scalar().expect("scalar reduction");
        op = op.with_region(combiner_region(values, k, ty));
    }
    op
}

/// Apply `f` to every region's op list, innermost regions first.
pub(crate) fn for_each_block(ops: &mut Vec<Operation>, f: &mut impl FnMut(&mut Vec<Operation>)) {
    for op in ops.iter_mut() {
        for r in &mut op.regions {
            for_each_block(&mut r.ops, f);
        }
    }
    f(ops);
}

pub(crate) fn next_pow2(n: i64) -> i64 {
    if n <= 1 {
        1
    } else {
        (n as u64).next_power_of_two() as i64
    }
}
