use super::{for_each_block, int_constants, PassResult};
use crate::ir::builder::OpBuilder;
use crate::ir::{Diagnostic, OpKind, Operation, Program, ScalarType};

/// Rewrite every `scf.parallel` to run from 0 with step 1. The original
/// induction value is rebuilt at the top of the body as `lo + i * step`.
pub fn normalize_loops(program: &mut Program) -> PassResult {
    let consts = int_constants(&program.ops);
    let mut diags = Vec::new();
    let Program { ops, values } = program;
    for_each_block(ops, &mut |block: &mut Vec<Operation>| {
        if !block.iter().any(|op| op.kind == OpKind::Parallel) {
            return;
        }
        let mut out = Vec::with_capacity(block.len());
        for mut op in block.drain(..) {
            if op.kind != OpKind::Parallel {
                out.push(op);
                continue;
            }
            let (lbs, ubs, steps) = (op.lower_bounds(), op.upper_bounds(), op.steps());
            let is = |v, n| consts.get(&v) == Some(&n);
            if (0..lbs.len()).all(|d| is(lbs[d], 0) && is(steps[d], 1)) {
                out.push(op);
                continue;
            }
            if let Some(&s) = steps
                .iter()
                .filter_map(|s| consts.get(s))
                .find(|&&s| s <= 0)
            {
                diags.push(Diagnostic {
                    path: None,
                    span: op.span,
                    message: format!("scf.parallel step must be positive, got {s}"),
                });
                out.push(op);
                continue;
            }
            let mut pre = OpBuilder::new(values);
            let c0 = pre.const_index(0);
            let c1 = pre.const_index(1);
            let mut new_ubs = Vec::new();
            for d in 0..lbs.len() {
                let (lo, hi, st) = (lbs[d], ubs[d], steps[d]);
                let ub = match (consts.get(&lo), consts.get(&hi), consts.get(&st)) {
                    (Some(&l), Some(&h), Some(&s)) => {
                        let trips = if h <= l {
                            0
                        } else {
                            ((h as i128 - l as i128 + s as i128 - 1) / s as i128) as i64
                        };
                        pre.const_index(trips)
                    }
                    _ => {
                        let span = if is(lo, 0) {
                            hi
                        } else {
                            pre.binary(OpKind::SubI, hi, lo)
                        };
                        if is(st, 1) {
                            span
                        } else {
                            pre.binary(OpKind::CeilDivSI, span, st)
                        }
                    }
                };
                new_ubs.push(ub);
            }
            let mut head = Vec::new();
            let region = &mut op.regions[0];
            for d in 0..lbs.len() {
                let (lo, st) = (lbs[d], steps[d]);
                if is(lo, 0) && is(st, 1) {
                    continue;
                }
                let old = region.args[d];
                let fresh = pre.values.new_value(ScalarType::Index);
                region.args[d] = fresh;
                let scaled = if is(st, 1) {
                    fresh
                } else if is(lo, 0) {
                    head.push(
                        Operation::new(OpKind::MulI)
                            .with_operands([fresh, st])
                            .with_results([old]),
                    );
                    continue;
                } else {
                    let t = pre.values.new_value(ScalarType::Index);
                    head.push(
                        Operation::new(OpKind::MulI)
                            .with_operands([fresh, st])
                            .with_results([t]),
                    );
                    t
                };
                head.push(
                    Operation::new(OpKind::AddI)
                        .with_operands([lo, scaled])
                        .with_results([old]),
                );
            }
            region.ops.splice(0..0, head);
            let n = lbs.len();
            let inits = op.loop_inits();
            op.operands = std::iter::repeat_n(c0, n)
                .chain(new_ubs)
                .chain(std::iter::repeat_n(c1, n))
                .chain(inits)
                .collect();
            out.extend(pre.finish());
            out.push(op);
        }
        *block = out;
    });
    if diags.is_empty() {
        Ok(())
    } else {
        Err(diags)
    }
}
