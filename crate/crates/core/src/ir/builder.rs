//! Helper for emitting straight-line op sequences with fresh values.

use super::ops::{Attr, CmpPredicate, CombinerKind, OpKind};
use super::program::{Operation, Region, ValueId, ValueTable};
use super::types::{ScalarType, Type};

pub struct OpBuilder<'v> {
    pub values: &'v mut ValueTable,
    pub ops: Vec<Operation>,
}

impl<'v> OpBuilder<'v> {
    pub fn new(values: &'v mut ValueTable) -> Self {
        OpBuilder {
            values,
            ops: Vec::new(),
        }
    }

    pub fn finish(self) -> Vec<Operation> {
        self.ops
    }

    pub fn push(&mut self, op: Operation) {
        self.ops.push(op);
    }

    pub fn value(&mut self, ty: impl Into<Type>) -> ValueId {
        self.values.new_value(ty)
    }

    pub fn ty(&self, v: ValueId) -> &Type {
        self.values.ty(v)
    }

    /// Push an op with one fresh result of type `ty`.
    pub fn op1(&mut self, op: Operation, ty: impl Into<Type>) -> ValueId {
        let r = self.value(ty);
        self.ops.push(op.with_results([r]));
        r
    }

    pub fn const_int(&mut self, ty: ScalarType, v: i64) -> ValueId {
        self.op1(
            Operation::new(OpKind::Constant).with_attr("value", Attr::Int(v)),
            ty,
        )
    }

    pub fn const_index(&mut self, v: i64) -> ValueId {
        self.const_int(ScalarType::Index, v)
    }

    pub fn const_float(&mut self, ty: ScalarType, v: f64) -> ValueId {
        self.op1(
            Operation::new(OpKind::Constant).with_attr("value", Attr::Float(v)),
            ty,
        )
    }

    /// Binary op whose result type equals the lhs type.
    pub fn binary(&mut self, kind: OpKind, a: ValueId, b: ValueId) -> ValueId {
        let ty = self.ty(a).clone();
        self.op1(Operation::new(kind).with_operands([a, b]), ty)
    }

    pub fn cmpi(&mut self, pred: CmpPredicate, a: ValueId, b: ValueId) -> ValueId {
        self.op1(
            Operation::new(OpKind::CmpI)
                .with_operands([a, b])
                .with_attr("predicate", pred.attr()),
            ScalarType::I1,
        )
    }

    pub fn select(&mut self, c: ValueId, a: ValueId, b: ValueId) -> ValueId {
        let ty = self.ty(a).clone();
        self.op1(Operation::new(OpKind::Select).with_operands([c, a, b]), ty)
    }

    pub fn load(&mut self, mem: ValueId, idx: &[ValueId]) -> ValueId {
        let elem = self.values.memref(mem).expect("load from memref").element;
        self.op1(
            Operation::new(OpKind::Load)
                .with_operands(std::iter::once(mem).chain(idx.iter().copied())),
            elem,
        )
    }

    pub fn store(&mut self, value: ValueId, mem: ValueId, idx: &[ValueId]) {
        self.ops.push(
            Operation::new(OpKind::Store)
                .with_operands([value, mem].into_iter().chain(idx.iter().copied())),
        );
    }

    pub fn dim(&mut self, mem: ValueId, axis: usize) -> ValueId {
        let c = self.const_index(axis as i64);
        self.op1(
            Operation::new(OpKind::Dim).with_operands([mem, c]),
            ScalarType::Index,
        )
    }

    /// Extent of `mem` along `axis`: a constant when static.
    pub fn extent(&mut self, mem: ValueId, axis: usize) -> ValueId {
        let static_dim = self
            .values
            .memref(mem)
            .and_then(|m| m.shape.get(axis).copied())
            .and_then(|d| d.as_static());
        match static_dim {
            Some(n) => self.const_index(n as i64),
            None => self.dim(mem, axis),
        }
    }
}

/// Build `^(%a, %b): %c = combine(%a, %b); scf.reduce.return(%c)`.
pub fn combiner_region(values: &mut ValueTable, kind: CombinerKind, ty: ScalarType) -> Region {
    let a = values.new_value(ty);
    let b = values.new_value(ty);
    let c = values.new_value(ty);
    let op = Operation::new(kind.op_for(ty))
        .with_operands([a, b])
        .with_results([c]);
    let ret = Operation::new(OpKind::ReduceReturn).with_operands([c]);
    Region::new(vec![a, b], vec![op, ret])
}

/// Deep-copy `region`'s ops with fresh result values, remapping operands
/// through `map` (which is extended with every cloned definition).
pub fn clone_ops(
    ops: &[Operation],
    values: &mut ValueTable,
    map: &mut std::collections::HashMap<ValueId, ValueId>,
) -> Vec<Operation> {
    ops.iter().map(|op| clone_op(op, values, map)).collect()
}

pub fn clone_op(
    op: &Operation,
    values: &mut ValueTable,
    map: &mut std::collections::HashMap<ValueId, ValueId>,
) -> Operation {
    let fresh = |v: ValueId,
                 values: &mut ValueTable,
                 map: &mut std::collections::HashMap<ValueId, ValueId>| {
        let n = values.new_value(values.ty(v).clone());
        map.insert(v, n);
        n
    };
    let operands = op
        .operands
        .iter()
        .map(|v| *map.get(v).unwrap_or(v))
        .collect::<Vec<_>>();
    let results = op
        .results
        .iter()
        .map(|&r| fresh(r, values, map))
        .collect::<Vec<_>>();
    let regions = op
        .regions
        .iter()
        .map(|r| {
            let args = r.args.iter().map(|&a| fresh(a, values, map)).collect();
            let ops = clone_ops(&r.ops, values, map);
            Region::new(args, ops)
        })
        .collect();
    Operation {
        kind: op.kind,
        operands,
        results,
        attrs: op.attrs.clone(),
        regions,
        span: op.span,
    }
}

/// Rewrite every use of a key of `map` inside `ops` (recursively).
pub fn replace_uses(ops: &mut [Operation], map: &std::collections::HashMap<ValueId, ValueId>) {
    for op in ops {
        for v in &mut op.operands {
            if let Some(&n) = map.get(v) {
                *v = n;
            }
        }
        for r in &mut op.regions {
            replace_uses(&mut r.ops, map);
        }
    }
}
