use std::collections::HashMap;

use super::{int_constants, next_pow2, TargetConfig};
use crate::ir::builder::OpBuilder;
use crate::ir::{
    op_at, op_at_mut, CmpPredicate, OpKind, OpPath, Operation, Program, ScalarType, ValueId,
    ValueTable,
};

/// How much inner-loop parallelism a loop exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParallelismEstimate {
    Constant(i64),
    /// Index value, computed before the enclosing nest, holding the hint.
    Runtime(ValueId),
    Unknown,
}

/// What the inner loop's bound looks like.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Shape {
    Constant(i64),
    /// `P[i+1] - P[i]` over a rank-1 index buffer defined outside the nest.
    Csr(ValueId),
    Unknown,
}

fn defs<'a>(op: &'a Operation, out: &mut HashMap<ValueId, &'a Operation>, ivs: &mut Vec<ValueId>) {
    for &r in &op.results {
        out.insert(r, op);
    }
    for region in &op.regions {
        if op.kind == OpKind::Parallel {
            ivs.extend(&region.args);
        }
        for inner in &region.ops {
            defs(inner, out, ivs);
        }
    }
}

/// Classify the bound of `inner`, a normalized loop somewhere in `nest`.
pub(crate) fn classify(
    inner: &Operation,
    nest: &Operation,
    consts: &HashMap<ValueId, i64>,
    values: &ValueTable,
) -> Shape {
    let ubs = inner.upper_bounds();
    if let Some(n) = ubs.iter().try_fold(1i64, |acc, ub| {
        consts.get(ub).map(|&n| acc.saturating_mul(n.max(0)))
    }) {
        return Shape::Constant(n.max(1));
    }
    let [ub] = ubs.as_slice() else {
        return Shape::Unknown;
    };
    let mut table = HashMap::new();
    let mut ivs = Vec::new();
    defs(nest, &mut table, &mut ivs);
    let def = |v: &ValueId, kind: OpKind| table.get(v).copied().filter(|op| op.kind == kind);
    let csr = || {
        let len = def(ub, OpKind::SubI)?;
        let end = def(&len.operands[0], OpKind::Load)?;
        let begin = def(&len.operands[1], OpKind::Load)?;
        let ptr = end.operands[0];
        if begin.operands[0] != ptr || end.operands.len() != 2 || begin.operands.len() != 2 {
            return None;
        }
        let rank1_index = values
            .memref(ptr)
            .is_some_and(|m| m.rank() == 1 && m.element == ScalarType::Index);
        if !rank1_index || table.contains_key(&ptr) {
            return None;
        }
        let i = begin.operands[1];
        if !ivs.contains(&i) {
            return None;
        }
        let next = def(&end.operands[1], OpKind::AddI)?;
        let one = |v: &ValueId| consts.get(v) == Some(&1);
        let ok = (next.operands[0] == i && one(&next.operands[1]))
            || (next.operands[1] == i && one(&next.operands[0]));
        ok.then_some(Shape::Csr(ptr))
    };
    csr().unwrap_or(Shape::Unknown)
}

/// Emit the hint computation for `shape`; `None` when nothing is known.
///
/// For the CSR pattern: `n_rows = dim(P, 0) - 1`, `nnz = P[n_rows]`,
/// `k = ceildiv(nnz, max(n_rows, 1))` and the hint is
/// `min(nextPow2(k), max_vector_length)`, expanded as a select chain.
pub(crate) fn build_hint(
    b: &mut OpBuilder,
    shape: Shape,
    max_vector_length: i64,
) -> Option<ValueId> {
    match shape {
        Shape::Constant(n) => Some(b.const_index(next_pow2(n).min(max_vector_length))),
        Shape::Unknown => None,
        Shape::Csr(ptr) => {
            let c0 = b.const_index(0);
            let c1 = b.const_index(1);
            let n = b.op1(
                Operation::new(OpKind::Dim).with_operands([ptr, c0]),
                ScalarType::Index,
            );
            let rows = b.binary(OpKind::SubI, n, c1);
            let nnz = b.load(ptr, &[rows]);
            let denom = b.binary(OpKind::MaxSI, rows, c1);
            let k = b.binary(OpKind::CeilDivSI, nnz, denom);
            let mut hint = c1;
            let mut half = c1;
            let mut p = 2;
            while p <= max_vector_length {
                let pv = b.const_index(p);
                let gt = b.cmpi(CmpPredicate::Sgt, k, half);
                hint = b.select(gt, pv, hint);
                half = pv;
                p *= 2;
            }
            Some(hint)
        }
    }
}

/// Estimate the parallelism of the `scf.parallel` at `loop_path`. A runtime
/// estimate is materialized immediately before the outermost enclosing
/// `scf.parallel`.
pub fn estimate_parallelism(
    program: &mut Program,
    loop_path: &OpPath,
    config: &TargetConfig,
) -> ParallelismEstimate {
    let Some(inner) = op_at(program, loop_path).filter(|op| op.kind == OpKind::Parallel) else {
        return ParallelismEstimate::Unknown;
    };
    let mut nest_path = loop_path.clone();
    for depth in 1..=loop_path.steps.len() {
        let p = OpPath {
            top: loop_path.top,
            steps: loop_path.steps[..depth].to_vec(),
        };
        if op_at(program, &p).is_some_and(|op| op.kind == OpKind::Parallel) {
            nest_path = p;
            break;
        }
    }
    let consts = int_constants(&program.ops);
    let nest = op_at(program, &nest_path).expect("nest path resolves");
    let shape = classify(inner, nest, &consts, &program.values);
    match shape {
        Shape::Constant(n) => ParallelismEstimate::Constant(n),
        Shape::Unknown => ParallelismEstimate::Unknown,
        Shape::Csr(_) => {
            let mut b = OpBuilder::new(&mut program.values);
            let hint = build_hint(&mut b, shape, config.max_vector_length).expect("csr hint");
            let ops = b.finish();
            let (&(r, o), parent_steps) = nest_path
                .steps
                .split_last()
                .expect("nest inside a function");
            let parent = OpPath {
                top: nest_path.top,
                steps: parent_steps.to_vec(),
            };
            let parent = op_at_mut(program, &parent).expect("parent resolves");
            parent.regions[r].ops.splice(o..o, ops);
            ParallelismEstimate::Runtime(hint)
        }
    }
}
