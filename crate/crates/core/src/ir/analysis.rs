//! Buffer aliasing roots and memref read/write effects.

use std::collections::HashMap;

use super::ops::{Attr, OpKind};
use super::program::{Operation, ValueId, ValueTable};
use super::walk::walk_region;

/// Identity of an underlying allocation. Subviews and casts share their
/// source's root; every `memref.get_global` of one symbol shares a root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RootKey {
    Value(ValueId),
    Global(String),
}

/// Map every memref value defined in `func` (arguments included) to its root.
pub fn memref_roots(func: &Operation, values: &ValueTable) -> HashMap<ValueId, RootKey> {
    let mut roots = HashMap::new();
    for region in &func.regions {
        for &a in &region.args {
            if values.memref(a).is_some() {
                roots.insert(a, RootKey::Value(a));
            }
        }
        walk_region(region, &mut |op: &Operation| {
            for region in &op.regions {
                for &a in &region.args {
                    if values.memref(a).is_some() {
                        roots.insert(a, RootKey::Value(a));
                    }
                }
            }
            for &r in &op.results {
                if values.memref(r).is_none() {
                    continue;
                }
                let key = match op.kind {
                    OpKind::SubView | OpKind::Cast => roots
                        .get(&op.operands[0])
                        .cloned()
                        .unwrap_or(RootKey::Value(op.operands[0])),
                    OpKind::GetGlobal => match op.attr("name") {
                        Some(Attr::Symbol(s)) => RootKey::Global(s.clone()),
                        _ => RootKey::Value(r),
                    },
                    _ => RootKey::Value(r),
                };
                roots.insert(r, key);
            }
        });
    }
    roots
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Effects {
    pub reads: Vec<ValueId>,
    pub writes: Vec<ValueId>,
}

impl Effects {
    fn read(&mut self, v: ValueId) {
        if !self.reads.contains(&v) {
            self.reads.push(v);
        }
    }

    fn write(&mut self, v: ValueId) {
        if !self.writes.contains(&v) {
            self.writes.push(v);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.reads.is_empty() && self.writes.is_empty()
    }
}

/// Direct data accesses of a single op (not descending into regions).
pub fn direct_effects(op: &Operation, values: &ValueTable, fx: &mut Effects) {
    let ops = &op.operands;
    match op.kind {
        OpKind::Load => fx.read(ops[0]),
        OpKind::Store => fx.write(ops[1]),
        OpKind::Copy => {
            fx.read(ops[0]);
            fx.write(ops[1]);
        }
        OpKind::Matmul | OpKind::Matvec | OpKind::BatchMatmul | OpKind::Gemm | OpKind::Gemv => {
            ops.iter().for_each(|&v| fx.read(v));
            fx.write(ops[2]);
        }
        OpKind::Fill => fx.write(ops[1]),
        OpKind::Elementwise => {
            ops.iter().for_each(|&v| fx.read(v));
            if let Some(&out) = ops.last() {
                fx.write(out);
            }
        }
        OpKind::LinalgReduce => {
            fx.read(ops[0]);
            fx.read(ops[1]);
            fx.write(ops[1]);
        }
        OpKind::SpmvCsr => {
            ops[..4].iter().for_each(|&v| fx.read(v));
            fx.write(ops[4]);
        }
        OpKind::Call => {
            for &v in ops {
                if values.memref(v).is_some() {
                    fx.read(v);
                    fx.write(v);
                }
            }
        }
        _ => {}
    }
}

/// Every memref read or written by `op` or anything nested in it.
pub fn deep_effects(op: &Operation, values: &ValueTable) -> Effects {
    let mut fx = Effects::default();
    direct_effects(op, values, &mut fx);
    for region in &op.regions {
        walk_region(region, &mut |inner: &Operation| {
            direct_effects(inner, values, &mut fx)
        });
    }
    fx
}
