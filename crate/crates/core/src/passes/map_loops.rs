use std::collections::HashMap;

use super::estimate::{build_hint, classify};
use super::{int_constants, PassResult, TargetConfig};
use crate::ir::builder::{clone_ops, OpBuilder};
use crate::ir::{
    segments_attr, Diagnostic, ExecSpace, OpKind, Operation, ParallelLevel, Program, Region,
    ScalarType, SingleLevel, Type, ValueId, ValueTable, SEGMENTS_ATTR,
};

/// Replace every `scf.parallel` nest with kokkos loops according to its
/// depth: 1 gives a top-level range loop, 2 a thread loop with an inner
/// vector loop, 3 or more a team loop with team-thread, sequential and
/// vector levels.
pub fn map_loops(program: &mut Program, config: &TargetConfig) -> PassResult {
    let mut high_level = Vec::new();
    crate::ir::walk(program, |path, op| {
        if op.kind.is_linalg() || op.kind == OpKind::SpmvCsr {
            high_level.push(Diagnostic::at(
                path,
                op.span,
                format!("linalg ops present: {}", op.kind),
            ));
        }
    });
    if !high_level.is_empty() {
        return Err(high_level);
    }
    let consts = int_constants(&program.ops);
    let Program { ops, values } = program;
    let mut m = Mapper {
        values,
        consts,
        config,
        diags: Vec::new(),
    };
    for op in ops.iter_mut().filter(|op| op.kind == OpKind::Func) {
        for r in &mut op.regions {
            let block = std::mem::take(&mut r.ops);
            r.ops = m.host_block(block);
        }
    }
    if m.diags.is_empty() {
        Ok(())
    } else {
        Err(m.diags)
    }
}

/// Deepest chain of nested `scf.parallel` ops; other region-holding ops
/// are transparent.
fn depth(op: &Operation) -> usize {
    let inner = op
        .regions
        .iter()
        .flat_map(|r| r.ops.iter())
        .map(depth)
        .max()
        .unwrap_or(0);
    inner + (op.kind == OpKind::Parallel) as usize
}

fn has_host_only(op: &Operation) -> bool {
    op.kind.is_host_only()
        || op
            .regions
            .iter()
            .flat_map(|r| r.ops.iter())
            .any(has_host_only)
}

/// First loop at nesting level `target` (the nest root is level 1).
fn find_level(op: &Operation, level: usize, target: usize) -> Option<&Operation> {
    let level = level + (op.kind == OpKind::Parallel) as usize;
    if op.kind == OpKind::Parallel && level == target {
        return Some(op);
    }
    op.regions
        .iter()
        .flat_map(|r| r.ops.iter())
        .find_map(|o| find_level(o, level, target))
}

fn is_side_effect(kind: OpKind) -> bool {
    matches!(kind, OpKind::Store | OpKind::Call | OpKind::Copy)
}

#[derive(Clone, Copy)]
struct Ctx {
    /// Nesting level of the innermost enclosing parallel loop.
    level: usize,
    max_depth: usize,
    team: bool,
    vector: bool,
}

struct Mapper<'a> {
    values: &'a mut ValueTable,
    consts: HashMap<ValueId, i64>,
    config: &'a TargetConfig,
    diags: Vec<Diagnostic>,
}

impl Mapper<'_> {
    fn host_block(&mut self, block: Vec<Operation>) -> Vec<Operation> {
        let mut out = Vec::with_capacity(block.len());
        for mut op in block {
            if op.kind == OpKind::Parallel {
                self.map_nest(op, &mut out);
                continue;
            }
            for r in &mut op.regions {
                let inner = std::mem::take(&mut r.ops);
                r.ops = self.host_block(inner);
            }
            out.push(op);
        }
        out
    }

    fn is_const(&self, v: ValueId, n: i64) -> bool {
        self.consts.get(&v) == Some(&n)
    }

    fn check_normalized(&mut self, op: &Operation) -> bool {
        let ok = op.lower_bounds().iter().all(|&v| self.is_const(v, 0))
            && op.steps().iter().all(|&v| self.is_const(v, 1));
        if !ok {
            self.diags.push(Diagnostic::new(
                "scf.parallel is not normalized; run normalize-loops first",
            ));
        }
        let combiners_ok = op.reduction_combiners().iter().all(Option::is_some);
        if !combiners_ok {
            self.diags.push(Diagnostic::new("malformed reduce region"));
        }
        ok && combiners_ok
    }

    /// Collapse a multi-dimensional loop to one flat index. Returns the
    /// flat trip count; the region's args are replaced by the flat index
    /// and the original indices are recomputed at the top of the body.
    fn flatten(
        &mut self,
        pre: &mut Vec<Operation>,
        ubs: &[ValueId],
        region: &mut Region,
    ) -> ValueId {
        if ubs.len() == 1 {
            return ubs[0];
        }
        let mut b = OpBuilder::new(self.values);
        let known: Option<i64> = ubs.iter().try_fold(1i64, |acc, v| {
            self.consts.get(v).map(|&n| acc.saturating_mul(n.max(0)))
        });
        let flat = match known {
            Some(n) => b.const_index(n),
            None => {
                let mut acc = ubs[0];
                for &u in &ubs[1..] {
                    acc = b.binary(OpKind::MulI, acc, u);
                }
                acc
            }
        };
        pre.extend(b.finish());
        let f = self.values.new_value(ScalarType::Index);
        let old = std::mem::replace(&mut region.args, vec![f]);
        let mut head = Vec::new();
        let mut rem = f;
        for d in (1..ubs.len()).rev() {
            head.push(
                Operation::new(OpKind::RemI)
                    .with_operands([rem, ubs[d]])
                    .with_results([old[d]]),
            );
            let q = if d == 1 {
                old[0]
            } else {
                self.values.new_value(ScalarType::Index)
            };
            head.push(
                Operation::new(OpKind::DivI)
                    .with_operands([rem, ubs[d]])
                    .with_results([q]),
            );
            rem = q;
        }
        region.ops.splice(0..0, head);
        flat
    }

    fn map_nest(&mut self, mut op: Operation, out: &mut Vec<Operation>) {
        if !self.check_normalized(&op) {
            out.push(op);
            return;
        }
        let max_depth = depth(&op);
        let space = if has_host_only(&op) {
            ExecSpace::Host
        } else {
            ExecSpace::Device
        };
        let mut pre = Vec::new();
        let hint = if max_depth >= 2 {
            let inner = find_level(&op, 0, max_depth).expect("deepest loop exists");
            let shape = classify(inner, &op, &self.consts, self.values);
            let mut b = OpBuilder::new(self.values);
            let h = build_hint(&mut b, shape, self.config.max_vector_length);
            pre.extend(b.finish());
            h
        } else {
            None
        };
        let ubs = op.upper_bounds();
        let inits = op.loop_inits();
        let mut region = op.regions.remove(0);
        let kind = match max_depth {
            1 => OpKind::RangeParallel,
            2 => OpKind::ThreadParallel,
            _ => OpKind::TeamParallel,
        };
        let ctx = Ctx {
            level: 1,
            max_depth,
            team: kind == OpKind::TeamParallel,
            vector: max_depth == 1,
        };
        let mut new = Operation::new(kind)
            .with_results(op.results.clone())
            .with_attr("executionSpace", space.attr());
        match kind {
            OpKind::RangeParallel => {
                let level = if ubs.len() == 1 {
                    ParallelLevel::TopRange
                } else {
                    ParallelLevel::TopMdRange
                };
                new = new
                    .with_attr("parallelLevel", level.attr())
                    .with_operands(ubs.iter().chain(&inits).copied());
            }
            _ => {
                let flat = self.flatten(&mut pre, &ubs, &mut region);
                let mut operands = vec![flat];
                operands.extend(hint);
                operands.extend(&inits);
                let segs = if kind == OpKind::TeamParallel {
                    region.args.push(self.values.new_value(Type::Team));
                    vec![1, 0, hint.is_some() as usize, inits.len()]
                } else {
                    vec![1, hint.is_some() as usize, inits.len()]
                };
                new = new
                    .with_operands(operands)
                    .with_attr(SEGMENTS_ATTR, segments_attr(&segs));
            }
        }
        region.ops = self.body(std::mem::take(&mut region.ops), ctx);
        to_kokkos_terminator(&mut region);
        out.extend(pre);
        out.push(new.with_region(region));
    }

    /// Map loops nested inside a kokkos loop body and guard side effects.
    fn body(&mut self, ops: Vec<Operation>, ctx: Ctx) -> Vec<Operation> {
        let mut out = Vec::with_capacity(ops.len());
        for mut op in ops {
            if op.kind == OpKind::Parallel {
                if !self.check_normalized(&op) {
                    out.push(op);
                    continue;
                }
                let level = ctx.level + 1;
                let inner = Ctx {
                    level,
                    vector: level == ctx.max_depth,
                    ..ctx
                };
                let ubs = op.upper_bounds();
                let inits = op.loop_inits();
                let mut region = op.regions.remove(0);
                let flat = self.flatten(&mut out, &ubs, &mut region);
                region.ops = self.body(std::mem::take(&mut region.ops), inner);
                if inner.vector || level == 2 {
                    let lvl = if inner.vector {
                        ParallelLevel::ThreadVector
                    } else {
                        ParallelLevel::TeamThread
                    };
                    to_kokkos_terminator(&mut region);
                    let reducing = !op.results.is_empty();
                    out.push(
                        Operation::new(OpKind::RangeParallel)
                            .with_operands(std::iter::once(flat).chain(inits))
                            .with_results(op.results)
                            .with_attr("parallelLevel", lvl.attr())
                            .with_region(region),
                    );
                    if lvl == ParallelLevel::TeamThread && !reducing {
                        out.push(Operation::new(OpKind::TeamBarrier));
                    }
                } else {
                    self.sequential(&mut out, flat, inits, op.results, region);
                }
                continue;
            }
            if is_side_effect(op.kind) && !ctx.vector {
                let level = if ctx.team && ctx.level == 1 {
                    SingleLevel::PerTeam
                } else {
                    SingleLevel::PerThread
                };
                if op.results.iter().any(|&r| self.values.memref(r).is_some()) {
                    self.diags.push(Diagnostic {
                        path: None,
                        span: op.span,
                        message: format!(
                            "{} returns a memref and cannot be guarded by kokkos.single",
                            op.kind
                        ),
                    });
                }
                out.push(self.single(op, level));
                continue;
            }
            for r in &mut op.regions {
                let inner = std::mem::take(&mut r.ops);
                r.ops = self.body(inner, ctx);
            }
            out.push(op);
        }
        out
    }

    fn single(&mut self, mut op: Operation, level: SingleLevel) -> Operation {
        let outer = std::mem::take(&mut op.results);
        op.results = outer
            .iter()
            .map(|&r| self.values.new_value(self.values.ty(r).clone()))
            .collect();
        let yielded = op.results.clone();
        Operation::new(OpKind::Single)
            .with_results(outer)
            .with_attr("level", level.attr())
            .with_region(Region::new(
                Vec::new(),
                vec![
                    op,
                    Operation::new(OpKind::KokkosYield).with_operands(yielded),
                ],
            ))
    }

    /// Turn a (flattened) parallel loop into `scf.for`, folding any
    /// reductions through loop-carried values in iteration order.
    fn sequential(
        &mut self,
        out: &mut Vec<Operation>,
        ub: ValueId,
        inits: Vec<ValueId>,
        results: Vec<ValueId>,
        mut region: Region,
    ) {
        let mut b = OpBuilder::new(self.values);
        let c0 = b.const_index(0);
        let c1 = b.const_index(1);
        out.extend(b.finish());
        let accs: Vec<ValueId> = results
            .iter()
            .map(|&r| self.values.new_value(self.values.ty(r).clone()))
            .collect();
        let term = region.ops.pop();
        let mut next = Vec::new();
        if let Some(term) = term.filter(|t| t.kind == OpKind::Reduce) {
            for ((&acc, &v), combiner) in accs.iter().zip(&term.operands).zip(&term.regions) {
                let mut map = HashMap::from([(combiner.args[0], acc), (combiner.args[1], v)]);
                let body = &combiner.ops[..combiner.ops.len() - 1];
                region.ops.extend(clone_ops(body, self.values, &mut map));
                let ret = combiner.ops.last().expect("reduce.return").operands[0];
                next.push(*map.get(&ret).unwrap_or(&ret));
            }
        }
        region
            .ops
            .push(Operation::new(OpKind::Yield).with_operands(next));
        region.args.extend(&accs);
        out.push(
            Operation::new(OpKind::For)
                .with_operands([c0, ub, c1].into_iter().chain(inits))
                .with_results(results)
                .with_region(region),
        );
    }
}

fn to_kokkos_terminator(region: &mut Region) {
    if let Some(t) = region.terminator_mut() {
        if t.kind == OpKind::Yield {
            t.kind = OpKind::KokkosYield;
        }
    }
}
