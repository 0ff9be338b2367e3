use std::collections::HashMap;
use std::rc::Rc;

use super::memory::{MemHandle, SimBuffer, Space, TraceEvent, TransferTrace};
use super::value::{RtValue, Scalar, Tensor};
use super::{Counters, ExecConfig, InterpError, RunResult, MAX_TRIPS};
use crate::ir::analysis::deep_effects;
use crate::ir::{
    classify_combiner, reduce_dims, walk, Attr, CmpPredicate, CombinerKind, DenseData, ExecSpace,
    MemorySpace, OpKind, OpPath, Operation, Program, Region, ScalarType, Type, ValueId,
};

type R<T> = Result<T, InterpError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Lazy,
    Eager,
}

#[derive(Debug, Clone)]
enum V {
    S(Scalar),
    M(Rc<MemHandle>),
    Team,
}

struct Frame {
    vals: Vec<Option<V>>,
}

/// Execute `entry` with the given inputs. Memref inputs start out valid on
/// the host only (modifiedHost set). Programs whose memrefs still carry no
/// memory space run against a single shared memory.
pub fn run(
    program: &Program,
    entry: &str,
    inputs: &[RtValue],
    config: &ExecConfig,
) -> R<RunResult> {
    execute(program, entry, inputs, config, Mode::Lazy)
}

/// The copy-everything policy: before each device kernel, every buffer it
/// touches is copied host to device; afterwards every buffer it may write
/// is copied back.
pub fn run_eager_baseline(
    program: &Program,
    entry: &str,
    inputs: &[RtValue],
    config: &ExecConfig,
) -> R<RunResult> {
    execute(program, entry, inputs, config, Mode::Eager)
}

fn has_unassigned_memrefs(program: &Program) -> bool {
    let mut found = false;
    walk(program, |_, op| {
        if let Some(Attr::Type(Type::MemRef(m))) = op.attr("type") {
            found |= m.space == MemorySpace::Unassigned;
        }
        for t in op.func_result_types() {
            if let Type::MemRef(m) = t {
                found |= m.space == MemorySpace::Unassigned;
            }
        }
        let region_args = op.regions.iter().flat_map(|r| r.args.iter());
        for &v in op.results.iter().chain(region_args) {
            if let Some(m) = program.values.memref(v) {
                found |= m.space == MemorySpace::Unassigned;
            }
        }
    });
    found
}

fn execute(
    program: &Program,
    entry: &str,
    inputs: &[RtValue],
    config: &ExecConfig,
    mode: Mode,
) -> R<RunResult> {
    if config.league_size_for_sim == 0 {
        return Err(InterpError::Config(
            "league_size_for_sim must be at least 1".into(),
        ));
    }
    let unified =
        !config.separate_device_memory || (mode == Mode::Lazy && has_unassigned_memrefs(program));
    let fi = program
        .ops
        .iter()
        .position(|op| op.kind == OpKind::Func && op.sym_name() == Some(entry))
        .ok_or_else(|| InterpError::UnknownFunction(entry.to_string()))?;
    let func = &program.ops[fi];
    let params = &func.regions[0].args;
    if params.len() != inputs.len() {
        return Err(InterpError::Signature(format!(
            "@{entry} takes {} arguments, {} given",
            params.len(),
            inputs.len()
        )));
    }
    let mut m = Machine {
        prog: program,
        config,
        mode,
        unified,
        buffers: Vec::new(),
        globals: HashMap::new(),
        allocs: 0,
        trace: TransferTrace::default(),
        counters: Counters::default(),
        top: fi,
        stack: Vec::new(),
    };
    let mut args = Vec::new();
    for (i, (&p, input)) in params.iter().zip(inputs).enumerate() {
        args.push(m.bind_input(i, program.values.ty(p), input)?);
    }
    let rets = m.call(fi, args.clone())?;
    let result_types = func.func_result_types();
    let mut returns = Vec::new();
    for (v, ty) in rets.iter().zip(&result_types) {
        returns.push(m.readback(v, ty)?);
    }
    let mut arguments = Vec::new();
    for (v, &p) in args.iter().zip(params) {
        if matches!(v, V::M(_)) {
            arguments.push(m.readback(v, program.values.ty(p))?);
        }
    }
    Ok(RunResult {
        returns,
        arguments,
        trace: m.trace,
        counters: m.counters,
    })
}

struct Machine<'p> {
    prog: &'p Program,
    config: &'p ExecConfig,
    mode: Mode,
    unified: bool,
    buffers: Vec<SimBuffer>,
    globals: HashMap<String, usize>,
    allocs: usize,
    trace: TransferTrace,
    counters: Counters,
    top: usize,
    stack: Vec<(usize, usize)>,
}

fn int_bits(ty: ScalarType) -> u32 {
    match ty {
        ScalarType::I1 => 1,
        ScalarType::I32 => 32,
        _ => 64,
    }
}

fn unsigned(v: i64, ty: ScalarType) -> u64 {
    match ty {
        ScalarType::I1 => (v & 1) as u64,
        ScalarType::I32 => v as u32 as u64,
        _ => v as u64,
    }
}

fn minimumf(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else if a == b {
        if a.is_sign_negative() {
            a
        } else {
            b
        }
    } else {
        a.min(b)
    }
}

fn maximumf(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else if a == b {
        if a.is_sign_positive() {
            a
        } else {
            b
        }
    } else {
        a.max(b)
    }
}

/// Binary arithmetic. `None` means integer division by zero.
fn arith(kind: OpKind, a: Scalar, b: Scalar, ty: ScalarType) -> Option<Scalar> {
    use OpKind::*;
    let r = if ty.is_float() {
        let (x, y) = (a.as_float(), b.as_float());
        Scalar::Float(match kind {
            AddF => x + y,
            SubF => x - y,
            MulF => x * y,
            DivF => x / y,
            MinimumF => minimumf(x, y),
            MaximumF => maximumf(x, y),
            _ => return None,
        })
    } else {
        let (x, y) = (a.as_int(), b.as_int());
        Scalar::Int(match kind {
            AddI => x.wrapping_add(y),
            SubI => x.wrapping_sub(y),
            MulI => x.wrapping_mul(y),
            DivI if y == 0 => return None,
            DivI => x.wrapping_div(y),
            RemI if y == 0 => return None,
            RemI => x.wrapping_rem(y),
            CeilDivSI if y == 0 => return None,
            CeilDivSI => {
                let q = x.wrapping_div(y);
                let r = x.wrapping_rem(y);
                if r != 0 && ((r < 0) == (y < 0)) {
                    q.wrapping_add(1)
                } else {
                    q
                }
            }
            MinSI => x.min(y),
            MaxSI => x.max(y),
            MinUI => {
                if unsigned(x, ty) <= unsigned(y, ty) {
                    x
                } else {
                    y
                }
            }
            MaxUI => {
                if unsigned(x, ty) >= unsigned(y, ty) {
                    x
                } else {
                    y
                }
            }
            ShLI => {
                if y < 0 || y >= int_bits(ty) as i64 {
                    0
                } else {
                    x.wrapping_shl(y as u32)
                }
            }
            _ => return None,
        })
    };
    Some(r.normalize(ty))
}

fn compare(pred: CmpPredicate, a: Scalar, b: Scalar, ty: ScalarType) -> bool {
    use CmpPredicate::*;
    match pred {
        Oeq | One | Olt | Ole | Ogt | Oge => {
            let (x, y) = (a.as_float(), b.as_float());
            match pred {
                Oeq => x == y,
                One => !x.is_nan() && !y.is_nan() && x != y,
                Olt => x < y,
                Ole => x <= y,
                Ogt => x > y,
                _ => x >= y,
            }
        }
        _ => {
            let (x, y) = (a.as_int(), b.as_int());
            let (ux, uy) = (unsigned(x, ty), unsigned(y, ty));
            match pred {
                Eq => x == y,
                Ne => x != y,
                Slt => x < y,
                Sle => x <= y,
                Sgt => x > y,
                Sge => x >= y,
                Ult => ux < uy,
                Ule => ux <= uy,
                Ugt => ux > uy,
                _ => ux >= uy,
            }
        }
    }
}

/// Advance a lexicographic multi-index; false once exhausted.
fn next_index(idx: &mut [i64], shape: &[usize]) -> bool {
    for d in (0..idx.len()).rev() {
        idx[d] += 1;
        if (idx[d] as u64) < shape[d] as u64 {
            return true;
        }
        idx[d] = 0;
    }
    false
}

fn all_indices(shape: &[usize]) -> Vec<Vec<i64>> {
    if shape.contains(&0) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx = vec![0i64; shape.len()];
    loop {
        out.push(idx.clone());
        if !next_index(&mut idx, shape) {
            return out;
        }
    }
}

impl<'p> Machine<'p> {
    fn path(&self) -> OpPath {
        OpPath {
            top: self.top,
            steps: self.stack.clone(),
        }
    }

    fn invalid(&self, message: impl Into<String>) -> InterpError {
        InterpError::Invalid {
            path: self.path(),
            message: message.into(),
        }
    }

    fn copy_index(&self, space: Space) -> usize {
        if self.unified {
            0
        } else {
            space.index()
        }
    }

    fn new_buffer(
        &mut self,
        name: String,
        element: ScalarType,
        shape: Vec<usize>,
        data: Vec<Scalar>,
    ) -> usize {
        self.buffers
            .push(SimBuffer::new(name, element, shape, data));
        self.buffers.len() - 1
    }

    fn bind_input(&mut self, i: usize, ty: &Type, input: &RtValue) -> R<V> {
        match (ty, input) {
            (Type::Scalar(st), RtValue::Scalar(it, s)) if st == it => Ok(V::S(s.normalize(*st))),
            (Type::MemRef(mt), RtValue::Tensor(t)) => {
                let dims_ok = mt.shape.len() == t.shape.len()
                    && mt
                        .shape
                        .iter()
                        .zip(&t.shape)
                        .all(|(d, &n)| d.as_static().is_none_or(|s| s as usize == n));
                if mt.element != t.element || !dims_ok {
                    return Err(InterpError::Signature(format!(
                        "argument {i}: expected {mt}, got {}{:?}",
                        t.element, t.shape
                    )));
                }
                let root = self.new_buffer(
                    format!("arg{i}"),
                    t.element,
                    t.shape.clone(),
                    t.data.clone(),
                );
                if !self.unified {
                    self.buffers[root].modified[Space::Host.index()] = true;
                }
                Ok(V::M(Rc::new(MemHandle::whole(root, t.shape.clone()))))
            }
            _ => Err(InterpError::Signature(format!(
                "argument {i}: expected {ty}"
            ))),
        }
    }

    /// Host-side view of a result, copying back from the device if needed.
    fn readback(&mut self, v: &V, ty: &Type) -> R<RtValue> {
        match v {
            V::S(s) => Ok(RtValue::Scalar(
                ty.as_scalar().unwrap_or(ScalarType::I64),
                *s,
            )),
            V::Team => Err(self.invalid("team handle cannot be returned")),
            V::M(h) => {
                let root = h.root;
                if !self.unified && self.buffers[root].stale_in(Space::Host) {
                    let b = &mut self.buffers[root];
                    if b.modified[Space::Device.index()] {
                        let event = TraceEvent::D2H {
                            root: b.name.clone(),
                            bytes: b.bytes(),
                        };
                        b.transfer_into(Space::Host);
                        self.trace.events.push(event);
                    }
                }
                let element = self.buffers[root].element;
                let mut data = Vec::new();
                for idx in all_indices(&h.shape) {
                    data.push(self.read(h, &idx, Space::Host)?);
                }
                Ok(RtValue::Tensor(Tensor {
                    element,
                    shape: h.shape.clone(),
                    data,
                }))
            }
        }
    }

    fn get(&self, f: &Frame, v: ValueId) -> R<V> {
        f.vals
            .get(v.0 as usize)
            .cloned()
            .flatten()
            .ok_or_else(|| self.invalid(format!("value {v} has no runtime value")))
    }

    fn scalar(&self, f: &Frame, v: ValueId) -> R<Scalar> {
        match self.get(f, v)? {
            V::S(s) => Ok(s),
            _ => Err(self.invalid(format!("value {v} is not a scalar"))),
        }
    }

    fn int(&self, f: &Frame, v: ValueId) -> R<i64> {
        Ok(self.scalar(f, v)?.as_int())
    }

    fn mem(&self, f: &Frame, v: ValueId) -> R<Rc<MemHandle>> {
        match self.get(f, v)? {
            V::M(h) => Ok(h),
            _ => Err(self.invalid(format!("value {v} is not a memref"))),
        }
    }

    fn set(f: &mut Frame, v: ValueId, val: V) {
        let i = v.0 as usize;
        if i >= f.vals.len() {
            f.vals.resize(i + 1, None);
        }
        f.vals[i] = Some(val);
    }

    fn stype(&self, v: ValueId) -> ScalarType {
        self.prog
            .values
            .ty(v)
            .as_scalar()
            .unwrap_or(ScalarType::I64)
    }

    fn check_access(&mut self, root: usize, space: Space) -> R<()> {
        let b = &self.buffers[root];
        if b.refcount == 0 {
            return Err(InterpError::UseAfterFree {
                root: b.name.clone(),
                path: self.path(),
            });
        }
        if !self.unified && b.stale_in(space) {
            let event = TraceEvent::StaleAccess {
                root: b.name.clone(),
                space,
                path: self.path(),
            };
            if self.trace.events.last() != Some(&event) {
                self.trace.events.push(event);
            }
            if self.config.strict_stale_checking {
                return Err(InterpError::StaleAccess {
                    root: self.buffers[root].name.clone(),
                    space,
                    path: self.path(),
                });
            }
        }
        Ok(())
    }

    fn locate(&self, h: &MemHandle, idx: &[i64]) -> R<usize> {
        h.linear(idx)
            .map_err(|(axis, index)| InterpError::OutOfBounds {
                path: self.path(),
                axis,
                index,
                extent: h.shape[axis],
            })
    }

    fn read(&mut self, h: &MemHandle, idx: &[i64], space: Space) -> R<Scalar> {
        self.check_access(h.root, space)?;
        let at = self.locate(h, idx)?;
        let ci = self.copy_index(space);
        Ok(self.buffers[h.root].copies[ci][at])
    }

    fn write(&mut self, h: &MemHandle, idx: &[i64], val: Scalar, space: Space) -> R<()> {
        self.check_access(h.root, space)?;
        let at = self.locate(h, idx)?;
        let ci = self.copy_index(space);
        let b = &mut self.buffers[h.root];
        b.copies[ci][at] = val.normalize(b.element);
        if !self.unified {
            b.dirty[space.index()] = true;
        }
        Ok(())
    }

    fn count(&mut self) {
        *self.counters.op_executions.entry(self.path()).or_insert(0) += 1;
    }

    fn call(&mut self, fi: usize, args: Vec<V>) -> R<Vec<V>> {
        let func = &self.prog.ops[fi];
        let region = func
            .regions
            .first()
            .ok_or_else(|| self.invalid("function without a body"))?;
        let mut frame = Frame {
            vals: vec![None; self.prog.values.len()],
        };
        for (&a, v) in region.args.iter().zip(args) {
            Self::set(&mut frame, a, v);
        }
        let saved = (self.top, std::mem::take(&mut self.stack));
        self.top = fi;
        let out = self.block(&mut frame, region, 0, Space::Host)?;
        self.top = saved.0;
        self.stack = saved.1;
        Ok(out)
    }

    /// Run a region; returns the terminator's operand values.
    fn block(&mut self, f: &mut Frame, region: &Region, ri: usize, space: Space) -> R<Vec<V>> {
        for (oi, op) in region.ops.iter().enumerate() {
            self.stack.push((ri, oi));
            if op.kind.is_terminator() {
                let vals = op
                    .operands
                    .iter()
                    .map(|&v| self.get(f, v))
                    .collect::<R<Vec<_>>>()?;
                self.stack.pop();
                return Ok(vals);
            }
            self.op(f, op, space)?;
            self.stack.pop();
        }
        Ok(Vec::new())
    }

    fn combine(&mut self, f: &mut Frame, region: &Region, acc: V, v: V, ty: ScalarType) -> R<V> {
        if let (Some(kind), V::S(a), V::S(b)) = (classify_combiner(region), &acc, &v) {
            return Ok(V::S(self.combine_kind(kind, *a, *b, ty)?));
        }
        Self::set(f, region.args[0], acc);
        Self::set(f, region.args[1], v);
        let out = self.block(f, region, 0, Space::Host)?;
        out.into_iter()
            .next()
            .ok_or_else(|| self.invalid("reduction region returned nothing"))
    }

    fn combine_kind(&self, kind: CombinerKind, a: Scalar, b: Scalar, ty: ScalarType) -> R<Scalar> {
        arith(kind.op_for(ty), a, b, ty).ok_or_else(|| self.invalid("bad combiner"))
    }

    fn trips(&self, lo: i64, hi: i64, step: i64) -> R<u64> {
        if step <= 0 {
            return Err(InterpError::BadStep { path: self.path() });
        }
        if hi <= lo {
            return Ok(0);
        }
        let span = (hi as i128 - lo as i128) as u128;
        Ok(span.div_ceil(step as u128).min(u64::MAX as u128) as u64)
    }

    /// Iterate a (possibly multi-dimensional, possibly reducing) loop.
    /// `dims` holds (lower, step, trips) per dimension.
    fn iterate(
        &mut self,
        f: &mut Frame,
        op: &Operation,
        dims: &[(i64, i64, u64)],
        space: Space,
        team: bool,
    ) -> R<()> {
        let total = dims
            .iter()
            .try_fold(1u64, |acc, d| acc.checked_mul(d.2))
            .unwrap_or(u64::MAX);
        if total > MAX_TRIPS {
            return Err(InterpError::TripCount {
                path: self.path(),
                trips: total,
            });
        }
        let region = &op.regions[0];
        let mut acc: Vec<V> = op
            .loop_inits()
            .iter()
            .map(|&v| self.get(f, v))
            .collect::<R<_>>()?;
        let result_types: Vec<ScalarType> = op.results.iter().map(|&r| self.stype(r)).collect();
        if total > 0 {
            let shape: Vec<usize> = dims.iter().map(|d| d.2 as usize).collect();
            let mut k = vec![0i64; dims.len()];
            loop {
                if team {
                    Self::set(f, region.args[0], V::S(Scalar::Int(k[0])));
                    Self::set(f, region.args[1], V::Team);
                    self.counters.teams += 1;
                } else {
                    for (d, &(lo, step, _)) in dims.iter().enumerate() {
                        let iv = lo.wrapping_add(k[d].wrapping_mul(step));
                        Self::set(f, region.args[d], V::S(Scalar::Int(iv)));
                    }
                }
                let vals = self.block(f, region, 0, space)?;
                if !acc.is_empty() {
                    let term = region
                        .terminator()
                        .ok_or_else(|| self.invalid("loop region lacks a terminator"))?;
                    self.stack.push((0, region.ops.len() - 1));
                    for (i, v) in vals.into_iter().enumerate() {
                        let combiner = term
                            .regions
                            .get(i)
                            .ok_or_else(|| self.invalid("missing combiner region"))?;
                        let cur = acc[i].clone();
                        acc[i] = self.combine(f, combiner, cur, v, result_types[i])?;
                    }
                    self.stack.pop();
                }
                if !next_index(&mut k, &shape) {
                    break;
                }
            }
        }
        for (&r, v) in op.results.iter().zip(acc) {
            Self::set(f, r, v);
        }
        Ok(())
    }

    fn is_kernel(&self, op: &Operation, space: Space) -> bool {
        if space != Space::Host {
            return false;
        }
        match op.kind {
            OpKind::Gemm | OpKind::Gemv => true,
            k if k.is_kokkos_loop() => op.exec_space() == Some(ExecSpace::Device),
            _ => false,
        }
    }

    fn kernel_roots(&self, f: &Frame, vals: &[ValueId]) -> Vec<usize> {
        let mut roots = Vec::new();
        for &v in vals {
            if let Some(Some(V::M(h))) = f.vals.get(v.0 as usize) {
                if !roots.contains(&h.root) {
                    roots.push(h.root);
                }
            }
        }
        roots
    }

    fn eager_copy(&mut self, roots: &[usize], into: Space) {
        if self.unified {
            return;
        }
        for &root in roots {
            let b = &mut self.buffers[root];
            let event = match into {
                Space::Device => TraceEvent::H2D {
                    root: b.name.clone(),
                    bytes: b.bytes(),
                },
                Space::Host => TraceEvent::D2H {
                    root: b.name.clone(),
                    bytes: b.bytes(),
                },
            };
            b.transfer_into(into);
            self.trace.events.push(event);
        }
    }

    fn op(&mut self, f: &mut Frame, op: &Operation, space: Space) -> R<()> {
        if self.is_kernel(op, space) {
            self.counters.kernel_launches += 1;
            let fx = deep_effects(op, &self.prog.values);
            let eager = self.mode == Mode::Eager;
            if eager {
                let all: Vec<ValueId> = fx.reads.iter().chain(&fx.writes).copied().collect();
                let roots = self.kernel_roots(f, &all);
                self.eager_copy(&roots, Space::Device);
            }
            self.op_in(f, op, Space::Device)?;
            if eager {
                let roots = self.kernel_roots(f, &fx.writes);
                self.eager_copy(&roots, Space::Host);
            }
            return Ok(());
        }
        self.op_in(f, op, space)
    }

    fn op_in(&mut self, f: &mut Frame, op: &Operation, space: Space) -> R<()> {
        use OpKind::*;
        match op.kind {
            Constant => {
                let ty = self.stype(op.results[0]);
                let v = match op.attr("value") {
                    Some(Attr::Int(v)) => Scalar::Int(*v),
                    Some(Attr::Float(v)) => Scalar::Float(*v),
                    _ => return Err(self.invalid("constant without value")),
                };
                Self::set(f, op.results[0], V::S(v.normalize(ty)));
            }
            k if k.is_binary_arith() => {
                let ty = self.stype(op.results[0]);
                let a = self.scalar(f, op.operands[0])?;
                let b = self.scalar(f, op.operands[1])?;
                let r = arith(k, a, b, ty)
                    .ok_or_else(|| InterpError::DivisionByZero { path: self.path() })?;
                Self::set(f, op.results[0], V::S(r));
            }
            NegF => {
                let ty = self.stype(op.results[0]);
                let a = self.scalar(f, op.operands[0])?;
                Self::set(
                    f,
                    op.results[0],
                    V::S(Scalar::Float(-a.as_float()).normalize(ty)),
                );
            }
            CmpI | CmpF => {
                let pred = op
                    .attr("predicate")
                    .and_then(Attr::as_ident)
                    .and_then(CmpPredicate::from_keyword)
                    .ok_or_else(|| self.invalid("missing predicate"))?;
                let ty = self.stype(op.operands[0]);
                let a = self.scalar(f, op.operands[0])?;
                let b = self.scalar(f, op.operands[1])?;
                let r = compare(pred, a, b, ty) as i64;
                Self::set(f, op.results[0], V::S(Scalar::Int(r)));
            }
            Select => {
                let c = self.int(f, op.operands[0])?;
                let v = self.get(f, op.operands[if c & 1 == 1 { 1 } else { 2 }])?;
                Self::set(f, op.results[0], v);
            }
            IndexCast => {
                let ty = self.stype(op.results[0]);
                let a = self.scalar(f, op.operands[0])?;
                Self::set(f, op.results[0], V::S(a.normalize(ty)));
            }
            GetGlobal => {
                let name = op
                    .attr("name")
                    .and_then(Attr::as_symbol)
                    .ok_or_else(|| self.invalid("get_global without name"))?
                    .to_string();
                let root = self.global_root(&name)?;
                let shape = self.buffers[root].extents.clone();
                Self::set(
                    f,
                    op.results[0],
                    V::M(Rc::new(MemHandle::whole(root, shape))),
                );
            }
            Alloc => {
                let mt = self
                    .prog
                    .values
                    .memref(op.results[0])
                    .ok_or_else(|| self.invalid("alloc of non-memref"))?
                    .clone();
                let mut dyn_sizes = op.operands.iter();
                let mut shape = Vec::new();
                for d in &mt.shape {
                    let n = match d.as_static() {
                        Some(n) => n as i64,
                        None => {
                            let v = dyn_sizes
                                .next()
                                .ok_or_else(|| self.invalid("missing size"))?;
                            self.int(f, *v)?
                        }
                    };
                    if n < 0 || n as u64 > MAX_TRIPS {
                        return Err(self.invalid(format!("invalid allocation extent {n}")));
                    }
                    shape.push(n as usize);
                }
                let len: usize = shape.iter().product();
                if len as u64 > MAX_TRIPS {
                    return Err(self.invalid("allocation too large"));
                }
                let name = format!("alloc{}", self.allocs);
                self.allocs += 1;
                let root = self.new_buffer(
                    name,
                    mt.element,
                    shape.clone(),
                    vec![Scalar::zero(mt.element); len],
                );
                Self::set(
                    f,
                    op.results[0],
                    V::M(Rc::new(MemHandle::whole(root, shape))),
                );
            }
            Dealloc => {
                let h = self.mem(f, op.operands[0])?;
                let b = &mut self.buffers[h.root];
                b.refcount = b.refcount.saturating_sub(1);
            }
            Load => {
                let h = self.mem(f, op.operands[0])?;
                let idx = op.operands[1..]
                    .iter()
                    .map(|&v| self.int(f, v))
                    .collect::<R<Vec<_>>>()?;
                let v = self.read(&h, &idx, space)?;
                Self::set(f, op.results[0], V::S(v));
            }
            Store => {
                let v = self.scalar(f, op.operands[0])?;
                let h = self.mem(f, op.operands[1])?;
                let idx = op.operands[2..]
                    .iter()
                    .map(|&v| self.int(f, v))
                    .collect::<R<Vec<_>>>()?;
                self.write(&h, &idx, v, space)?;
                self.count();
            }
            Dim => {
                let h = self.mem(f, op.operands[0])?;
                let axis = self.int(f, op.operands[1])?;
                let n = usize::try_from(axis)
                    .ok()
                    .and_then(|a| h.shape.get(a))
                    .ok_or_else(|| self.invalid(format!("memref.dim axis {axis} out of range")))?;
                Self::set(f, op.results[0], V::S(Scalar::Int(*n as i64)));
            }
            SubView => {
                let h = self.mem(f, op.operands[0])?;
                let rank = h.shape.len();
                let vals = op.operands[1..]
                    .iter()
                    .map(|&v| self.int(f, v))
                    .collect::<R<Vec<_>>>()?;
                let (offs, sizes) = vals.split_at(rank);
                let mut offset = h.offset;
                for d in 0..rank {
                    let (o, s) = (offs[d], sizes[d]);
                    if o < 0 || s < 0 || (o as u64).saturating_add(s as u64) > h.shape[d] as u64 {
                        return Err(self.invalid(format!(
                            "subview [{o}, +{s}) exceeds extent {}",
                            h.shape[d]
                        )));
                    }
                    offset += o as usize * h.strides[d];
                }
                let view = MemHandle {
                    root: h.root,
                    offset,
                    shape: sizes.iter().map(|&s| s as usize).collect(),
                    strides: h.strides.clone(),
                };
                self.buffers[h.root].refcount += 1;
                Self::set(f, op.results[0], V::M(Rc::new(view)));
            }
            Cast => {
                let h = self.mem(f, op.operands[0])?;
                if let Some(mt) = self.prog.values.memref(op.results[0]) {
                    let ok = mt
                        .shape
                        .iter()
                        .zip(&h.shape)
                        .all(|(d, &n)| d.as_static().is_none_or(|s| s as usize == n));
                    if !ok {
                        return Err(self.invalid("memref.cast to an incompatible static shape"));
                    }
                }
                Self::set(f, op.results[0], V::M(h));
            }
            Copy => {
                let src = self.mem(f, op.operands[0])?;
                let dst = self.mem(f, op.operands[1])?;
                if src.shape != dst.shape {
                    return Err(self.invalid("memref.copy shape mismatch"));
                }
                for idx in all_indices(&src.shape) {
                    let v = self.read(&src, &idx, space)?;
                    self.write(&dst, &idx, v, space)?;
                }
                self.count();
            }
            Call => {
                let callee = op
                    .attr("callee")
                    .and_then(Attr::as_symbol)
                    .ok_or_else(|| self.invalid("call without callee"))?;
                let fi = self
                    .prog
                    .ops
                    .iter()
                    .position(|o| o.kind == Func && o.sym_name() == Some(callee))
                    .ok_or_else(|| InterpError::UnknownFunction(callee.to_string()))?;
                let args = op
                    .operands
                    .iter()
                    .map(|&v| self.get(f, v))
                    .collect::<R<Vec<_>>>()?;
                self.count();
                if self.stack.len() > 256 {
                    return Err(self.invalid("call depth limit exceeded"));
                }
                let rets = self.call(fi, args)?;
                for (&r, v) in op.results.iter().zip(rets) {
                    Self::set(f, r, v);
                }
            }
            Parallel => {
                let (lbs, ubs, steps) = (op.lower_bounds(), op.upper_bounds(), op.steps());
                let mut dims = Vec::new();
                for d in 0..lbs.len() {
                    let (lo, hi, st) = (
                        self.int(f, lbs[d])?,
                        self.int(f, ubs[d])?,
                        self.int(f, steps[d])?,
                    );
                    dims.push((lo, st, self.trips(lo, hi, st)?));
                }
                self.iterate(f, op, &dims, space, false)?;
            }
            RangeParallel | ThreadParallel => {
                let mut dims = Vec::new();
                for &ub in &op.upper_bounds() {
                    let hi = self.int(f, ub)?;
                    dims.push((0, 1, self.trips(0, hi, 1)?));
                }
                self.record_hints(f, op)?;
                self.iterate(f, op, &dims, space, false)?;
            }
            TeamParallel => {
                let league = self.int(f, op.upper_bounds()[0])?;
                let dims = [(0, 1, self.trips(0, league, 1)?)];
                self.record_hints(f, op)?;
                self.iterate(f, op, &dims, space, true)?;
            }
            For => {
                let lo = self.int(f, op.operands[0])?;
                let hi = self.int(f, op.operands[1])?;
                let step = self.int(f, op.operands[2])?;
                let trips = self.trips(lo, hi, step)?;
                if trips > MAX_TRIPS {
                    return Err(InterpError::TripCount {
                        path: self.path(),
                        trips,
                    });
                }
                let region = &op.regions[0];
                let mut carried = op.operands[3..]
                    .iter()
                    .map(|&v| self.get(f, v))
                    .collect::<R<Vec<_>>>()?;
                for k in 0..trips as i64 {
                    Self::set(f, region.args[0], V::S(Scalar::Int(lo + k * step)));
                    for (&a, v) in region.args[1..].iter().zip(carried) {
                        Self::set(f, a, v);
                    }
                    carried = self.block(f, region, 0, space)?;
                }
                for (&r, v) in op.results.iter().zip(carried) {
                    Self::set(f, r, v);
                }
            }
            If => {
                let c = self.int(f, op.operands[0])?;
                let ri = if c & 1 == 1 { 0 } else { 1 };
                let vals = self.block(f, &op.regions[ri], ri, space)?;
                for (&r, v) in op.results.iter().zip(vals) {
                    Self::set(f, r, v);
                }
            }
            Single => {
                self.count();
                let vals = self.block(f, &op.regions[0], 0, space)?;
                for (&r, v) in op.results.iter().zip(vals) {
                    Self::set(f, r, v);
                }
            }
            TeamBarrier => self.counters.barriers += 1,
            Sync => {
                let h = self.mem(f, op.operands[0])?;
                let target = match op.target_space() {
                    Some(ExecSpace::Device) => Space::Device,
                    _ => Space::Host,
                };
                self.sync(h.root, target);
            }
            Modify => {
                let h = self.mem(f, op.operands[0])?;
                if !self.unified {
                    let s = match op.target_space() {
                        Some(ExecSpace::Device) => Space::Device,
                        _ => Space::Host,
                    };
                    let b = &mut self.buffers[h.root];
                    b.modified[s.index()] = true;
                    b.dirty[s.index()] = false;
                }
            }
            Matmul | Gemm => self.matmul(f, op, space, false)?,
            BatchMatmul => self.matmul(f, op, space, true)?,
            Matvec | Gemv => {
                let a = self.mem(f, op.operands[0])?;
                let x = self.mem(f, op.operands[1])?;
                let y = self.mem(f, op.operands[2])?;
                let ty = self.buffers[a.root].element;
                let (m, n) = (a.shape[0], a.shape[1]);
                if x.shape[0] != n || y.shape[0] != m {
                    return Err(self.invalid("matvec shape mismatch"));
                }
                for i in 0..m as i64 {
                    let mut acc = self.read(&y, &[i], space)?;
                    for j in 0..n as i64 {
                        let p = arith(
                            CombinerKind::Mul.op_for(ty),
                            self.read(&a, &[i, j], space)?,
                            self.read(&x, &[j], space)?,
                            ty,
                        );
                        acc = self.combine_kind(CombinerKind::Add, acc, p.unwrap_or(acc), ty)?;
                    }
                    self.write(&y, &[i], acc, space)?;
                }
            }
            Fill => {
                let v = self.scalar(f, op.operands[0])?;
                let out = self.mem(f, op.operands[1])?;
                for idx in all_indices(&out.shape) {
                    self.write(&out, &idx, v, space)?;
                }
            }
            Elementwise => {
                let mems = op
                    .operands
                    .iter()
                    .map(|&v| self.mem(f, v))
                    .collect::<R<Vec<_>>>()?;
                let out = mems
                    .last()
                    .cloned()
                    .ok_or_else(|| self.invalid("no operands"))?;
                if mems.iter().any(|m| m.shape != out.shape) {
                    return Err(self.invalid("elementwise shape mismatch"));
                }
                let region = &op.regions[0];
                for idx in all_indices(&out.shape) {
                    for (m, &a) in mems.iter().zip(&region.args) {
                        let v = self.read(m, &idx, space)?;
                        Self::set(f, a, V::S(v));
                    }
                    let vals = self.block(f, region, 0, space)?;
                    match vals.first() {
                        Some(V::S(v)) => self.write(&out, &idx, *v, space)?,
                        _ => return Err(self.invalid("elementwise body must yield a scalar")),
                    }
                }
            }
            LinalgReduce => {
                let input = self.mem(f, op.operands[0])?;
                let out = self.mem(f, op.operands[1])?;
                let dims = reduce_dims(op).ok_or_else(|| self.invalid("missing dimensions"))?;
                let kept: Vec<usize> = (0..input.shape.len())
                    .filter(|d| !dims.contains(d))
                    .collect();
                let kept_shape: Vec<usize> = kept.iter().map(|&d| input.shape[d]).collect();
                let red_shape: Vec<usize> = dims.iter().map(|&d| input.shape[d]).collect();
                if kept_shape != out.shape {
                    return Err(self.invalid("reduce output shape mismatch"));
                }
                let ty = self.buffers[input.root].element;
                let region = &op.regions[0];
                let reduced = all_indices(&red_shape);
                for oidx in all_indices(&out.shape) {
                    let mut acc = V::S(self.read(&out, &oidx, space)?);
                    for ridx in &reduced {
                        let mut full = vec![0i64; input.shape.len()];
                        for (k, &d) in kept.iter().enumerate() {
                            full[d] = oidx[k];
                        }
                        for (k, &d) in dims.iter().enumerate() {
                            full[d] = ridx[k];
                        }
                        let v = V::S(self.read(&input, &full, space)?);
                        acc = self.combine(f, region, acc, v, ty)?;
                    }
                    match acc {
                        V::S(s) => self.write(&out, &oidx, s, space)?,
                        _ => return Err(self.invalid("reduce produced a non-scalar")),
                    }
                }
            }
            SpmvCsr => {
                let h: Vec<_> = op
                    .operands
                    .iter()
                    .map(|&v| self.mem(f, v))
                    .collect::<R<_>>()?;
                let ty = self.buffers[h[2].root].element;
                let rows = h[0].shape[0].saturating_sub(1) as i64;
                for i in 0..rows {
                    let begin = self.read(&h[0], &[i], space)?.as_int();
                    let end = self.read(&h[0], &[i + 1], space)?.as_int();
                    let mut acc = Scalar::zero(ty);
                    let trips = self.trips(0, end.wrapping_sub(begin), 1)?;
                    for jj in 0..trips as i64 {
                        let j = begin + jj;
                        let v = self.read(&h[2], &[j], space)?;
                        let col = self.read(&h[1], &[j], space)?.as_int();
                        let xv = self.read(&h[3], &[col], space)?;
                        let p = arith(CombinerKind::Mul.op_for(ty), v, xv, ty).unwrap_or(v);
                        acc = self.combine_kind(CombinerKind::Add, acc, p, ty)?;
                    }
                    self.write(&h[4], &[i], acc, space)?;
                }
            }
            Func | Global => return Err(self.invalid(format!("{} cannot be executed", op.kind))),
            _ => return Err(self.invalid(format!("no interpreter rule for {}", op.kind))),
        }
        Ok(())
    }

    fn record_hints(&mut self, f: &Frame, op: &Operation) -> R<()> {
        if let Some(v) = op.vector_length_hint() {
            let n = self.int(f, v)?;
            let path = self.path();
            self.counters.vector_length_hints.push((path, n));
        }
        Ok(())
    }

    fn sync(&mut self, root: usize, target: Space) {
        let b = &mut self.buffers[root];
        let noop = TraceEvent::SyncNoop {
            root: b.name.clone(),
            space: target,
        };
        if self.unified || !b.modified[target.other().index()] {
            self.trace.events.push(noop);
            return;
        }
        let event = match target {
            Space::Device => TraceEvent::H2D {
                root: b.name.clone(),
                bytes: b.bytes(),
            },
            Space::Host => TraceEvent::D2H {
                root: b.name.clone(),
                bytes: b.bytes(),
            },
        };
        b.transfer_into(target);
        self.trace.events.push(event);
    }

    fn global_root(&mut self, name: &str) -> R<usize> {
        if let Some(&r) = self.globals.get(name) {
            return Ok(r);
        }
        let g = self
            .prog
            .global(name)
            .ok_or_else(|| self.invalid(format!("unknown global @{name}")))?;
        let Some(Attr::Type(Type::MemRef(mt))) = g.attr("type") else {
            return Err(self.invalid(format!("global @{name} has no memref type")));
        };
        let shape: Vec<usize> = mt
            .shape
            .iter()
            .map(|d| d.as_static().map(|n| n as usize))
            .collect::<Option<_>>()
            .ok_or_else(|| self.invalid(format!("global @{name} has a dynamic shape")))?;
        let len: usize = shape.iter().product();
        let data = match g.attr("value") {
            Some(Attr::Dense { data, .. }) => Tensor::from_dense(mt.element, &shape, data).data,
            _ => Tensor::from_dense(mt.element, &shape, &DenseData::Int(vec![0; len])).data,
        };
        let root = self.new_buffer(format!("@{name}"), mt.element, shape, data);
        if !self.unified {
            self.buffers[root].modified[Space::Host.index()] = true;
        }
        self.globals.insert(name.to_string(), root);
        Ok(root)
    }

    fn matmul(&mut self, f: &Frame, op: &Operation, space: Space, batched: bool) -> R<()> {
        let a = self.mem(f, op.operands[0])?;
        let b = self.mem(f, op.operands[1])?;
        let c = self.mem(f, op.operands[2])?;
        let ty = self.buffers[a.root].element;
        let o = batched as usize;
        let batches = if batched { a.shape[0] } else { 1 };
        let (m, k, n) = (a.shape[o], a.shape[o + 1], b.shape[o + 1]);
        if b.shape[o] != k || c.shape[o] != m || c.shape[o + 1] != n {
            return Err(self.invalid("matmul shape mismatch"));
        }
        let at = |bi: i64, i: i64, j: i64| if batched { vec![bi, i, j] } else { vec![i, j] };
        for bi in 0..batches as i64 {
            for i in 0..m as i64 {
                for j in 0..n as i64 {
                    let mut acc = self.read(&c, &at(bi, i, j), space)?;
                    for kk in 0..k as i64 {
                        let x = self.read(&a, &at(bi, i, kk), space)?;
                        let y = self.read(&b, &at(bi, kk, j), space)?;
                        let p = arith(CombinerKind::Mul.op_for(ty), x, y, ty).unwrap_or(x);
                        acc = self.combine_kind(CombinerKind::Add, acc, p, ty)?;
                    }
                    self.write(&c, &at(bi, i, j), acc, space)?;
                }
            }
        }
        Ok(())
    }
}
