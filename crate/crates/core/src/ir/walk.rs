//! Deterministic pre-order traversal and canonical value numbering.

use std::collections::HashMap;
use std::fmt;

use super::program::{Operation, Program, Region, ValueId};

/// Position of an op: top-level index followed by (region, op) steps.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct OpPath {
    pub top: usize,
    pub steps: Vec<(usize, usize)>,
}

impl OpPath {
    pub fn top(index: usize) -> Self {
        OpPath {
            top: index,
            steps: Vec::new(),
        }
    }

    pub fn child(&self, region: usize, op: usize) -> Self {
        let mut steps = self.steps.clone();
        steps.push((region, op));
        OpPath {
            top: self.top,
            steps,
        }
    }

    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    /// True if `self` is `other` or nested inside it.
    pub fn starts_with(&self, other: &OpPath) -> bool {
        self.top == other.top && self.steps.starts_with(&other.steps)
    }
}

impl fmt::Display for OpPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.top)?;
        for (r, o) in &self.steps {
            write!(f, "/{r}:{o}")?;
        }
        Ok(())
    }
}

/// Visit every op pre-order, depth-first through regions in order.
pub fn walk<'a>(program: &'a Program, mut visit: impl FnMut(&OpPath, &'a Operation)) {
    for (i, op) in program.ops.iter().enumerate() {
        walk_op(op, &OpPath::top(i), &mut visit);
    }
}

/// Walk a single op and everything nested in it.
pub fn walk_op<'a>(
    op: &'a Operation,
    path: &OpPath,
    visit: &mut impl FnMut(&OpPath, &'a Operation),
) {
    visit(path, op);
    for (ri, region) in op.regions.iter().enumerate() {
        for (oi, child) in region.ops.iter().enumerate() {
            walk_op(child, &path.child(ri, oi), visit);
        }
    }
}

/// Walk the ops nested inside `region` (not including any parent).
pub fn walk_region<'a>(region: &'a Region, visit: &mut impl FnMut(&'a Operation)) {
    for op in &region.ops {
        visit(op);
        for r in &op.regions {
            walk_region(r, visit);
        }
    }
}

/// Ops visited in walk order along with their paths.
pub fn op_paths(program: &Program) -> Vec<(OpPath, &Operation)> {
    let mut out = Vec::new();
    walk(program, |p, op| out.push((p.clone(), op)));
    out
}

pub fn op_at<'a>(program: &'a Program, path: &OpPath) -> Option<&'a Operation> {
    let mut op = program.ops.get(path.top)?;
    for &(r, o) in &path.steps {
        op = op.regions.get(r)?.ops.get(o)?;
    }
    Some(op)
}

pub fn op_at_mut<'a>(program: &'a mut Program, path: &OpPath) -> Option<&'a mut Operation> {
    let mut op = program.ops.get_mut(path.top)?;
    for &(r, o) in &path.steps {
        op = op.regions.get_mut(r)?.ops.get_mut(o)?;
    }
    Some(op)
}

/// Canonical per-function numbering: results at their op, then each
/// region's arguments before its body, in walk order.
pub fn value_numbering(func: &Operation) -> HashMap<ValueId, usize> {
    fn visit(op: &Operation, map: &mut HashMap<ValueId, usize>) {
        for &r in &op.results {
            let n = map.len();
            map.entry(r).or_insert(n);
        }
        for region in &op.regions {
            for &a in &region.args {
                let n = map.len();
                map.entry(a).or_insert(n);
            }
            for child in &region.ops {
                visit(child, map);
            }
        }
    }
    let mut map = HashMap::new();
    visit(func, &mut map);
    map
}
