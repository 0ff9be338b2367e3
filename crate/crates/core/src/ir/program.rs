//! Program graph: values, operations and single-block regions.

use std::collections::BTreeMap;
use std::fmt;

use super::ops::{Attr, CombinerKind, ExecSpace, OpKind, ParallelLevel, SingleLevel};
use super::types::{MemRefType, Type};
use crate::textio::SourceSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValueId(pub u32);

impl fmt::Display for ValueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "%v{}", self.0)
    }
}

/// Type table for every SSA value in a program.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValueTable {
    types: Vec<Type>,
}

impl ValueTable {
    pub fn new_value(&mut self, ty: impl Into<Type>) -> ValueId {
        let id = ValueId(self.types.len() as u32);
        self.types.push(ty.into());
        id
    }

    pub fn ty(&self, v: ValueId) -> &Type {
        &self.types[v.0 as usize]
    }

    pub fn get(&self, v: ValueId) -> Option<&Type> {
        self.types.get(v.0 as usize)
    }

    pub fn set_ty(&mut self, v: ValueId, ty: Type) {
        self.types[v.0 as usize] = ty;
    }

    pub fn memref(&self, v: ValueId) -> Option<&MemRefType> {
        self.get(v).and_then(Type::as_memref)
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }
}

/// A single-block region. The last op is the terminator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Region {
    pub args: Vec<ValueId>,
    pub ops: Vec<Operation>,
}

impl Region {
    pub fn new(args: Vec<ValueId>, ops: Vec<Operation>) -> Self {
        Region { args, ops }
    }

    pub fn terminator(&self) -> Option<&Operation> {
        self.ops.last().filter(|op| op.kind.is_terminator())
    }

    pub fn terminator_mut(&mut self) -> Option<&mut Operation> {
        self.ops.last_mut().filter(|op| op.kind.is_terminator())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operation {
    pub kind: OpKind,
    pub operands: Vec<ValueId>,
    pub results: Vec<ValueId>,
    pub attrs: BTreeMap<String, Attr>,
    pub regions: Vec<Region>,
    pub span: Option<SourceSpan>,
}

/// Name of the attribute splitting kokkos team/thread loop operands into
/// bounds, hints and reduction inits.
pub const SEGMENTS_ATTR: &str = "operandSegmentSizes";

impl Operation {
    pub fn new(kind: OpKind) -> Self {
        Operation {
            kind,
            operands: Vec::new(),
            results: Vec::new(),
            attrs: BTreeMap::new(),
            regions: Vec::new(),
            span: None,
        }
    }

    pub fn with_operands(mut self, operands: impl IntoIterator<Item = ValueId>) -> Self {
        self.operands = operands.into_iter().collect();
        self
    }

    pub fn with_results(mut self, results: impl IntoIterator<Item = ValueId>) -> Self {
        self.results = results.into_iter().collect();
        self
    }

    pub fn with_attr(mut self, name: &str, value: Attr) -> Self {
        self.attrs.insert(name.to_string(), value);
        self
    }

    pub fn with_region(mut self, region: Region) -> Self {
        self.regions.push(region);
        self
    }

    pub fn attr(&self, name: &str) -> Option<&Attr> {
        self.attrs.get(name)
    }

    pub fn result(&self) -> ValueId {
        self.results[0]
    }

    pub fn sym_name(&self) -> Option<&str> {
        self.attr("sym_name").and_then(Attr::as_str)
    }

    pub fn exec_space(&self) -> Option<ExecSpace> {
        self.attr("executionSpace")
            .and_then(Attr::as_ident)
            .and_then(ExecSpace::from_keyword)
    }

    pub fn parallel_level(&self) -> Option<ParallelLevel> {
        self.attr("parallelLevel")
            .and_then(Attr::as_ident)
            .and_then(ParallelLevel::from_keyword)
    }

    pub fn single_level(&self) -> Option<SingleLevel> {
        self.attr("level")
            .and_then(Attr::as_ident)
            .and_then(SingleLevel::from_keyword)
    }

    /// Space operand of `kokkos.sync` / `kokkos.modify`.
    pub fn target_space(&self) -> Option<ExecSpace> {
        self.attr("space")
            .and_then(Attr::as_ident)
            .and_then(ExecSpace::from_keyword)
    }

    /// Result types recorded on a `func.func`.
    pub fn func_result_types(&self) -> Vec<Type> {
        match self.attr("results") {
            Some(Attr::Array(items)) => items
                .iter()
                .filter_map(|a| match a {
                    Attr::Type(t) => Some(t.clone()),
                    _ => None,
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Operand/region layout of a loop op, if this is one.
    pub fn loop_layout(&self) -> Option<LoopLayout> {
        let n_res = self.results.len();
        let n_ops = self.operands.len();
        let region_args = self.regions.first().map_or(0, |r| r.args.len());
        match self.kind {
            OpKind::Parallel => {
                let rank = region_args;
                if n_ops != 3 * rank + n_res {
                    return None;
                }
                Some(LoopLayout {
                    rank,
                    lower: Some(0),
                    upper: rank,
                    step: Some(2 * rank),
                    team_size: None,
                    vector_length: None,
                    inits: 3 * rank,
                    n_inits: n_res,
                })
            }
            OpKind::For => {
                if n_ops != 3 + n_res || region_args != 1 + n_res {
                    return None;
                }
                Some(LoopLayout {
                    rank: 1,
                    lower: Some(0),
                    upper: 1,
                    step: Some(2),
                    team_size: None,
                    vector_length: None,
                    inits: 3,
                    n_inits: n_res,
                })
            }
            OpKind::RangeParallel => {
                let rank = region_args;
                if n_ops != rank + n_res {
                    return None;
                }
                Some(LoopLayout {
                    rank,
                    lower: None,
                    upper: 0,
                    step: None,
                    team_size: None,
                    vector_length: None,
                    inits: rank,
                    n_inits: n_res,
                })
            }
            OpKind::TeamParallel | OpKind::ThreadParallel => {
                let segs = self.segments()?;
                let (ts, vl, inits) = match (self.kind, segs.as_slice()) {
                    (OpKind::TeamParallel, [1, ts, vl, n]) => (*ts, *vl, *n),
                    (OpKind::ThreadParallel, [1, vl, n]) => (0, *vl, *n),
                    _ => return None,
                };
                if ts > 1 || vl > 1 || inits != n_res || 1 + ts + vl + inits != n_ops {
                    return None;
                }
                Some(LoopLayout {
                    rank: 1,
                    lower: None,
                    upper: 0,
                    step: None,
                    team_size: (ts == 1).then_some(1),
                    vector_length: (vl == 1).then_some(1 + ts),
                    inits: 1 + ts + vl,
                    n_inits: n_res,
                })
            }
            _ => None,
        }
    }

    fn segments(&self) -> Option<Vec<usize>> {
        match self.attr(SEGMENTS_ATTR)? {
            Attr::Array(items) => items
                .iter()
                .map(|a| a.as_int().and_then(|v| usize::try_from(v).ok()))
                .collect(),
            _ => None,
        }
    }

    pub fn lower_bounds(&self) -> Vec<ValueId> {
        self.loop_layout()
            .and_then(|l| l.lower.map(|s| self.operands[s..s + l.rank].to_vec()))
            .unwrap_or_default()
    }

    pub fn upper_bounds(&self) -> Vec<ValueId> {
        self.loop_layout()
            .map(|l| self.operands[l.upper..l.upper + l.rank].to_vec())
            .unwrap_or_default()
    }

    pub fn steps(&self) -> Vec<ValueId> {
        self.loop_layout()
            .and_then(|l| l.step.map(|s| self.operands[s..s + l.rank].to_vec()))
            .unwrap_or_default()
    }

    pub fn loop_inits(&self) -> Vec<ValueId> {
        self.loop_layout()
            .map(|l| self.operands[l.inits..l.inits + l.n_inits].to_vec())
            .unwrap_or_default()
    }

    pub fn vector_length_hint(&self) -> Option<ValueId> {
        self.loop_layout()?.vector_length.map(|i| self.operands[i])
    }

    pub fn team_size_hint(&self) -> Option<ValueId> {
        self.loop_layout()?.team_size.map(|i| self.operands[i])
    }

    /// Reduction combiners carried by the terminator of a parallel loop.
    pub fn reduction_combiners(&self) -> Vec<Option<CombinerKind>> {
        match self.regions.first().and_then(Region::terminator) {
            Some(term) if term.kind == OpKind::Reduce => {
                term.regions.iter().map(classify_combiner).collect()
            }
            _ => Vec::new(),
        }
    }

    pub fn has_reductions(&self) -> bool {
        !self.results.is_empty()
            && matches!(
                self.kind,
                OpKind::Parallel
                    | OpKind::RangeParallel
                    | OpKind::TeamParallel
                    | OpKind::ThreadParallel
            )
    }
}

/// Operand index layout of loop ops. Offsets index into `operands`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoopLayout {
    pub rank: usize,
    pub lower: Option<usize>,
    pub upper: usize,
    pub step: Option<usize>,
    pub team_size: Option<usize>,
    pub vector_length: Option<usize>,
    pub inits: usize,
    pub n_inits: usize,
}

/// Recognize a reduction region of the form
/// `^(%a, %b): %c = <combiner>(%a, %b); scf.reduce.return(%c)`.
pub fn classify_combiner(region: &Region) -> Option<CombinerKind> {
    let [lhs, rhs] = region.args.as_slice() else {
        return None;
    };
    let [op, ret] = region.ops.as_slice() else {
        return None;
    };
    if ret.kind != OpKind::ReduceReturn || ret.operands.len() != 1 || op.results.len() != 1 {
        return None;
    }
    if ret.operands[0] != op.results[0] {
        return None;
    }
    let kind = CombinerKind::from_op(op.kind)?;
    let ordered = op.operands == [*lhs, *rhs] || op.operands == [*rhs, *lhs];
    ordered.then_some(kind)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Program {
    /// Top-level `func.func` and `memref.global` ops.
    pub ops: Vec<Operation>,
    pub values: ValueTable,
}

impl Program {
    pub fn new_value(&mut self, ty: impl Into<Type>) -> ValueId {
        self.values.new_value(ty)
    }

    pub fn ty(&self, v: ValueId) -> &Type {
        self.values.ty(v)
    }

    pub fn funcs(&self) -> impl Iterator<Item = &Operation> {
        self.ops.iter().filter(|op| op.kind == OpKind::Func)
    }

    pub fn func(&self, name: &str) -> Option<&Operation> {
        self.funcs().find(|f| f.sym_name() == Some(name))
    }

    pub fn global(&self, name: &str) -> Option<&Operation> {
        self.ops
            .iter()
            .find(|op| op.kind == OpKind::Global && op.sym_name() == Some(name))
    }
}

/// Attribute payload of a `func.func` signature.
pub fn func_results_attr(types: &[Type]) -> Attr {
    Attr::Array(types.iter().cloned().map(Attr::Type).collect())
}

pub fn segments_attr(segments: &[usize]) -> Attr {
    Attr::Array(segments.iter().map(|&s| Attr::Int(s as i64)).collect())
}
