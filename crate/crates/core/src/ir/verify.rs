//! Structural verifier: SSA dominance, per-op schemas, region shape and
//! kokkos nesting rules.

use std::collections::{HashMap, HashSet};

use super::diag::Diagnostic;
use super::ops::{Attr, CmpPredicate, ExecSpace, OpKind, ParallelLevel};
use super::program::{classify_combiner, Operation, Program, Region, ValueId};
use super::types::{MemRefType, ScalarType, Type};
use super::walk::OpPath;

/// Returns every violation found; an empty list means the program is valid.
pub fn verify(program: &Program) -> Vec<Diagnostic> {
    let mut v = Verifier {
        prog: program,
        diags: Vec::new(),
        defined: HashSet::new(),
        scopes: Vec::new(),
        ancestors: Vec::new(),
        funcs: HashMap::new(),
        globals: HashMap::new(),
    };
    v.run();
    v.diags
}

struct Verifier<'a> {
    prog: &'a Program,
    diags: Vec<Diagnostic>,
    defined: HashSet<ValueId>,
    scopes: Vec<HashSet<ValueId>>,
    ancestors: Vec<&'a Operation>,
    funcs: HashMap<&'a str, &'a Operation>,
    globals: HashMap<&'a str, &'a Operation>,
}

impl<'a> Verifier<'a> {
    fn run(&mut self) {
        for (i, op) in self.prog.ops.iter().enumerate() {
            let path = OpPath::top(i);
            let table = match op.kind {
                OpKind::Func => &mut self.funcs,
                OpKind::Global => &mut self.globals,
                _ => {
                    self.err(&path, op, format!("{} not allowed at top level", op.kind));
                    continue;
                }
            };
            match op.sym_name() {
                Some(name) => {
                    if table.insert(name, op).is_some() {
                        self.err(&path, op, format!("duplicate symbol @{name}"));
                    }
                }
                None => self.err(&path, op, "missing sym_name"),
            }
        }
        for (i, op) in self.prog.ops.iter().enumerate() {
            let path = OpPath::top(i);
            match op.kind {
                OpKind::Func => self.verify_func(op, &path),
                OpKind::Global => self.verify_global(op, &path),
                _ => {}
            }
        }
    }

    fn err(&mut self, path: &OpPath, op: &Operation, msg: impl Into<String>) {
        self.diags.push(Diagnostic::at(path, op.span, msg));
    }

    fn ty(&self, v: ValueId) -> Option<&'a Type> {
        self.prog.values.get(v)
    }

    fn scalar(&self, v: ValueId) -> Option<ScalarType> {
        self.ty(v).and_then(Type::as_scalar)
    }

    fn memref(&self, v: ValueId) -> Option<&'a MemRefType> {
        self.ty(v).and_then(Type::as_memref)
    }

    fn define(&mut self, path: &OpPath, op: &Operation, v: ValueId) {
        if self.ty(v).is_none() {
            self.err(path, op, format!("value {v} has no type entry"));
            return;
        }
        if !self.defined.insert(v) {
            self.err(path, op, format!("value {v} defined more than once"));
        }
        if let Some(scope) = self.scopes.last_mut() {
            scope.insert(v);
        }
    }

    fn visible(&self, v: ValueId) -> bool {
        self.scopes.iter().any(|s| s.contains(&v))
    }

    fn verify_global(&mut self, op: &Operation, path: &OpPath) {
        if !op.operands.is_empty() || !op.results.is_empty() || !op.regions.is_empty() {
            self.err(
                path,
                op,
                "memref.global takes no operands, results or regions",
            );
        }
        let Some(Attr::Type(Type::MemRef(ty))) = op.attr("type") else {
            self.err(path, op, "memref.global requires a memref `type` attribute");
            return;
        };
        match op.attr("value") {
            None => {}
            Some(Attr::Dense { data, .. }) => match ty.static_len() {
                Some(n) if n as usize == data.len() => {
                    let float_data = matches!(data, super::ops::DenseData::Float(_));
                    if float_data != ty.element.is_float() {
                        self.err(path, op, "dense element kind does not match global type");
                    }
                }
                Some(n) => self.err(
                    path,
                    op,
                    format!(
                        "dense initializer has {} elements, type needs {n}",
                        data.len()
                    ),
                ),
                None => self.err(path, op, "initialized global must have a static shape"),
            },
            Some(_) => self.err(path, op, "global initializer must be dense"),
        }
    }

    fn verify_func(&mut self, op: &'a Operation, path: &OpPath) {
        if op.regions.len() != 1 || !op.operands.is_empty() || !op.results.is_empty() {
            self.err(
                path,
                op,
                "func.func must have exactly one region and no operands/results",
            );
            return;
        }
        self.ancestors.push(op);
        self.verify_region(&op.regions[0], path, 0);
        self.ancestors.pop();
        let results = op.func_result_types();
        if let Some(ret) = op.regions[0].terminator() {
            if ret.kind == OpKind::Return {
                let got: Vec<_> = ret.operands.iter().map(|&v| self.ty(v).cloned()).collect();
                if !types_match(&got, &results) {
                    let rp = path.child(0, op.regions[0].ops.len() - 1);
                    self.err(
                        &rp,
                        ret,
                        "func.return operand types do not match function results",
                    );
                }
            }
        }
    }

    fn verify_region(&mut self, region: &'a Region, parent_path: &OpPath, index: usize) {
        self.scopes.push(HashSet::new());
        let parent = *self.ancestors.last().expect("region has a parent op");
        for &a in &region.args {
            self.define(parent_path, parent, a);
        }
        if region.ops.is_empty() {
            self.err(
                parent_path,
                parent,
                format!("region {index} of {} is empty", parent.kind),
            );
        }
        let n = region.ops.len();
        for (i, op) in region.ops.iter().enumerate() {
            let path = parent_path.child(index, i);
            let is_last = i + 1 == n;
            if op.kind.is_terminator() && !is_last {
                self.err(
                    &path,
                    op,
                    format!("terminator {} must be last in its region", op.kind),
                );
            }
            if is_last && !op.kind.is_terminator() {
                self.err(
                    &path,
                    op,
                    format!("region of {} lacks a terminator", parent.kind),
                );
            }
            if is_last && op.kind.is_terminator() && !terminator_allowed(parent.kind, op.kind) {
                self.err(
                    &path,
                    op,
                    format!("{} cannot terminate a region of {}", op.kind, parent.kind),
                );
            }
            self.verify_op(op, &path);
        }
        self.scopes.pop();
    }

    fn verify_op(&mut self, op: &'a Operation, path: &OpPath) {
        for &v in &op.operands {
            if self.ty(v).is_none() {
                self.err(path, op, format!("operand {v} has no type entry"));
                return;
            }
            if !self.visible(v) {
                self.err(path, op, format!("use before definition of {v}"));
            }
        }
        if matches!(op.kind, OpKind::Func | OpKind::Global) {
            self.err(path, op, format!("{} only allowed at top level", op.kind));
            return;
        }
        if let Err(msg) = self.check_schema(op) {
            self.err(path, op, msg);
        }
        self.check_nesting(op, path);
        for &r in &op.results {
            self.define(path, op, r);
        }
        self.ancestors.push(op);
        for (ri, region) in op.regions.iter().enumerate() {
            self.verify_region(region, path, ri);
        }
        self.ancestors.pop();
    }

    fn check_nesting(&mut self, op: &Operation, path: &OpPath) {
        let enclosing_kokkos = self
            .ancestors
            .iter()
            .rev()
            .find(|a| a.kind.is_kokkos_loop() || a.kind == OpKind::Single)
            .copied();
        let enclosing_loop = self
            .ancestors
            .iter()
            .rev()
            .find(|a| a.kind.is_kokkos_loop())
            .copied();
        let device_kernel = self
            .ancestors
            .iter()
            .any(|a| a.kind.is_kokkos_loop() && a.exec_space() == Some(ExecSpace::Device));
        let in_any_parallel = self
            .ancestors
            .iter()
            .any(|a| a.kind.is_kokkos_loop() || a.kind == OpKind::Parallel);

        if device_kernel && op.kind.is_host_only() {
            self.err(
                path,
                op,
                format!("host-only op {} inside device kernel", op.kind),
            );
        }
        match op.kind {
            OpKind::RangeParallel => {
                let level = op.parallel_level();
                match level {
                    Some(ParallelLevel::TopRange | ParallelLevel::TopMdRange) => {
                        if enclosing_loop.is_some() {
                            self.err(path, op, "top-level range_parallel nested in a kokkos loop");
                        }
                        if op.exec_space().is_none() {
                            self.err(path, op, "top-level range_parallel requires executionSpace");
                        }
                        let rank = op.regions.first().map_or(0, |r| r.args.len());
                        if level == Some(ParallelLevel::TopRange) && rank != 1 {
                            self.err(path, op, "toprange range_parallel must be one-dimensional");
                        }
                    }
                    Some(ParallelLevel::TeamThread) => {
                        if enclosing_loop.map(|a| a.kind) != Some(OpKind::TeamParallel) {
                            self.err(path, op, "teamthread range_parallel outside team_parallel");
                        }
                    }
                    Some(ParallelLevel::ThreadVector) => {
                        let ok = match enclosing_loop {
                            Some(a) => match a.kind {
                                OpKind::TeamParallel | OpKind::ThreadParallel => true,
                                OpKind::RangeParallel => {
                                    a.parallel_level() == Some(ParallelLevel::TeamThread)
                                }
                                _ => false,
                            },
                            None => false,
                        };
                        if !ok {
                            self.err(
                                path,
                                op,
                                "threadvector range_parallel outside team_parallel/thread_parallel",
                            );
                        }
                    }
                    None => self.err(path, op, "range_parallel requires parallelLevel"),
                }
                if matches!(
                    level,
                    Some(ParallelLevel::TeamThread | ParallelLevel::ThreadVector)
                ) && op.attr("executionSpace").is_some()
                {
                    self.err(
                        path,
                        op,
                        "executionSpace only allowed on top-level parallel ops",
                    );
                }
            }
            OpKind::TeamParallel | OpKind::ThreadParallel => {
                if enclosing_loop.is_some() {
                    self.err(path, op, format!("{} must be top-level", op.kind));
                }
                if op.exec_space().is_none() {
                    self.err(path, op, format!("{} requires executionSpace", op.kind));
                }
            }
            OpKind::Single => {
                let inside = self
                    .ancestors
                    .iter()
                    .any(|a| matches!(a.kind, OpKind::TeamParallel | OpKind::ThreadParallel));
                if !inside {
                    self.err(path, op, "single outside team_parallel/thread_parallel");
                }
            }
            OpKind::TeamBarrier => {
                if enclosing_kokkos.map(|a| a.kind) != Some(OpKind::TeamParallel) {
                    self.err(path, op, "team_barrier outside team_parallel");
                }
            }
            OpKind::Gemm | OpKind::Gemv | OpKind::Sync | OpKind::Modify if in_any_parallel => {
                self.err(path, op, format!("{} inside a parallel loop", op.kind));
            }
            _ => {}
        }
    }

    fn check_schema(&self, op: &Operation) -> Result<(), String> {
        use OpKind::*;
        let nops = op.operands.len();
        let nres = op.results.len();
        let arity = |o: usize, r: usize, g: usize| -> Result<(), String> {
            if nops != o || nres != r || op.regions.len() != g {
                Err(format!(
                    "{} expects {o} operands, {r} results, {g} regions; got {nops}, {nres}, {}",
                    op.kind,
                    op.regions.len()
                ))
            } else {
                Ok(())
            }
        };
        let operand_scalar = |i: usize| -> Result<ScalarType, String> {
            self.scalar(op.operands[i])
                .ok_or_else(|| format!("{} operand #{i} must be scalar", op.kind))
        };
        let operand_memref = |i: usize| -> Result<&MemRefType, String> {
            self.memref(op.operands[i])
                .ok_or_else(|| format!("{} operand #{i} must be a memref", op.kind))
        };
        let result_scalar = |i: usize| -> Result<ScalarType, String> {
            self.scalar(op.results[i])
                .ok_or_else(|| format!("{} result #{i} must be scalar", op.kind))
        };
        let result_memref = |i: usize| -> Result<&MemRefType, String> {
            self.memref(op.results[i])
                .ok_or_else(|| format!("{} result #{i} must be a memref", op.kind))
        };
        let all_index = |vals: &[ValueId]| -> Result<(), String> {
            if vals
                .iter()
                .all(|&v| self.scalar(v) == Some(ScalarType::Index))
            {
                Ok(())
            } else {
                Err(format!(
                    "{} indices and bounds must be index-typed",
                    op.kind
                ))
            }
        };

        match op.kind {
            Constant => {
                arity(0, 1, 0)?;
                let t = result_scalar(0)?;
                match (op.attr("value"), t.is_float()) {
                    (Some(Attr::Int(_)), false) | (Some(Attr::Float(_)), true) => Ok(()),
                    (Some(_), _) => Err("constant value kind does not match result type".into()),
                    (None, _) => Err("arith.constant requires a value".into()),
                }
            }
            k if k.is_binary_arith() => {
                arity(2, 1, 0)?;
                let (a, b, r) = (operand_scalar(0)?, operand_scalar(1)?, result_scalar(0)?);
                if a != b || a != r {
                    return Err(format!("{k} operand and result types must agree"));
                }
                if k.is_float_arith() != a.is_float() {
                    return Err(format!("{k} is not defined on {a}"));
                }
                Ok(())
            }
            NegF => {
                arity(1, 1, 0)?;
                let (a, r) = (operand_scalar(0)?, result_scalar(0)?);
                if a != r || !a.is_float() {
                    return Err("arith.negf takes and returns one float type".into());
                }
                Ok(())
            }
            CmpI | CmpF => {
                arity(2, 1, 0)?;
                let (a, b) = (operand_scalar(0)?, operand_scalar(1)?);
                if a != b || result_scalar(0)? != ScalarType::I1 {
                    return Err(format!("{} compares equal types and returns i1", op.kind));
                }
                let pred = op
                    .attr("predicate")
                    .and_then(Attr::as_ident)
                    .and_then(CmpPredicate::from_keyword)
                    .ok_or_else(|| format!("{} requires a predicate", op.kind))?;
                let float = op.kind == CmpF;
                if pred.is_float() != float || a.is_float() != float {
                    return Err(format!("predicate {pred} invalid for {}", op.kind));
                }
                Ok(())
            }
            Select => {
                arity(3, 1, 0)?;
                let c = operand_scalar(0)?;
                let (a, b, r) = (operand_scalar(1)?, operand_scalar(2)?, result_scalar(0)?);
                if c != ScalarType::I1 || a != b || a != r {
                    return Err("arith.select takes (i1, T, T) -> T".into());
                }
                Ok(())
            }
            IndexCast => {
                arity(1, 1, 0)?;
                let (a, r) = (operand_scalar(0)?, result_scalar(0)?);
                if a.is_float()
                    || r.is_float()
                    || (a != ScalarType::Index && r != ScalarType::Index)
                {
                    return Err(
                        "arith.index_cast converts between index and an integer type".into(),
                    );
                }
                Ok(())
            }
            Alloc => {
                if nres != 1 || !op.regions.is_empty() {
                    return Err("memref.alloc has one result and no regions".into());
                }
                let t = result_memref(0)?;
                let dynamic = t.shape.iter().filter(|d| d.as_static().is_none()).count();
                if dynamic != nops {
                    return Err(format!(
                        "memref.alloc needs {dynamic} dynamic size operands, got {nops}"
                    ));
                }
                all_index(&op.operands)
            }
            Dealloc => {
                arity(1, 0, 0)?;
                operand_memref(0).map(|_| ())
            }
            Load => {
                if nops < 1 || nres != 1 || !op.regions.is_empty() {
                    return Err("memref.load takes a memref and indices".into());
                }
                let m = operand_memref(0)?;
                if nops != 1 + m.rank() {
                    return Err(format!("memref.load needs {} indices", m.rank()));
                }
                all_index(&op.operands[1..])?;
                if result_scalar(0)? != m.element {
                    return Err("memref.load result type must equal element type".into());
                }
                Ok(())
            }
            Store => {
                if nops < 2 || nres != 0 || !op.regions.is_empty() {
                    return Err("memref.store takes a value, a memref and indices".into());
                }
                let v = operand_scalar(0)?;
                let m = operand_memref(1)?;
                if nops != 2 + m.rank() {
                    return Err(format!("memref.store needs {} indices", m.rank()));
                }
                all_index(&op.operands[2..])?;
                if v != m.element {
                    return Err("memref.store value type must equal element type".into());
                }
                Ok(())
            }
            Dim => {
                arity(2, 1, 0)?;
                operand_memref(0)?;
                all_index(&op.operands[1..])?;
                if result_scalar(0)? != ScalarType::Index {
                    return Err("memref.dim returns index".into());
                }
                Ok(())
            }
            SubView => {
                if nops < 1 || nres != 1 || !op.regions.is_empty() {
                    return Err("memref.subview takes a memref, offsets and sizes".into());
                }
                let m = operand_memref(0)?;
                if nops != 1 + 2 * m.rank() {
                    return Err(format!(
                        "memref.subview needs {} offsets and sizes",
                        m.rank()
                    ));
                }
                all_index(&op.operands[1..])?;
                let r = result_memref(0)?;
                if r.element != m.element || r.rank() != m.rank() || r.space != m.space {
                    return Err("memref.subview result must keep element, rank and space".into());
                }
                Ok(())
            }
            Cast => {
                arity(1, 1, 0)?;
                let (m, r) = (operand_memref(0)?, result_memref(0)?);
                if !m.compatible(r) || m.space != r.space {
                    return Err("memref.cast between incompatible types".into());
                }
                Ok(())
            }
            Copy => {
                arity(2, 0, 0)?;
                let (a, b) = (operand_memref(0)?, operand_memref(1)?);
                if a.element != b.element || a.rank() != b.rank() {
                    return Err("memref.copy requires matching element type and rank".into());
                }
                Ok(())
            }
            GetGlobal => {
                arity(0, 1, 0)?;
                let name = op
                    .attr("name")
                    .and_then(Attr::as_symbol)
                    .ok_or("memref.get_global requires a symbol `name`")?;
                let global = self
                    .globals
                    .get(name)
                    .ok_or_else(|| format!("unknown global @{name}"))?;
                let r = result_memref(0)?;
                match global.attr("type") {
                    Some(Attr::Type(Type::MemRef(g))) if g.compatible(r) => Ok(()),
                    _ => Err(format!("memref.get_global type does not match @{name}")),
                }
            }
            Parallel | RangeParallel | TeamParallel | ThreadParallel => self.check_parallel(op),
            For => {
                let layout = op.loop_layout().ok_or("malformed scf.for operands")?;
                if op.regions.len() != 1 {
                    return Err("scf.for has one region".into());
                }
                all_index(&op.operands[..3])?;
                let region = &op.regions[0];
                if self.scalar(region.args[0]) != Some(ScalarType::Index) {
                    return Err("scf.for induction variable must be index".into());
                }
                let inits = &op.operands[layout.inits..];
                let iter = &region.args[1..];
                let init_t: Vec<_> = inits.iter().map(|&v| self.ty(v).cloned()).collect();
                let iter_t: Vec<_> = iter.iter().map(|&v| self.ty(v).cloned()).collect();
                let res_t: Vec<_> = op.results.iter().map(|&v| self.ty(v).cloned()).collect();
                if init_t != iter_t || init_t != res_t {
                    return Err("scf.for iter_args, inits and results must agree".into());
                }
                self.no_memref_results(op)?;
                self.check_yield(region, &res_t, Yield)
            }
            If => {
                if nops != 1 || op.regions.len() != 2 {
                    return Err("scf.if takes a condition and two regions".into());
                }
                if operand_scalar(0)? != ScalarType::I1 {
                    return Err("scf.if condition must be i1".into());
                }
                if op.regions.iter().any(|r| !r.args.is_empty()) {
                    return Err("scf.if regions take no arguments".into());
                }
                self.no_memref_results(op)?;
                let res_t: Vec<_> = op.results.iter().map(|&v| self.ty(v).cloned()).collect();
                self.check_yield(&op.regions[0], &res_t, Yield)?;
                self.check_yield(&op.regions[1], &res_t, Yield)
            }
            Single => {
                if nops != 0 || op.regions.len() != 1 || !op.regions[0].args.is_empty() {
                    return Err("kokkos.single takes one region and no operands".into());
                }
                if op.single_level().is_none() {
                    return Err("kokkos.single requires level = perTeam|perThread".into());
                }
                self.no_memref_results(op)?;
                let res_t: Vec<_> = op.results.iter().map(|&v| self.ty(v).cloned()).collect();
                self.check_yield(&op.regions[0], &res_t, KokkosYield)
            }
            TeamBarrier => arity(0, 0, 0),
            Sync | Modify => {
                arity(1, 0, 0)?;
                operand_memref(0)?;
                if op.target_space().is_none() {
                    return Err(format!("{} requires space = host|device", op.kind));
                }
                Ok(())
            }
            Call => {
                if !op.regions.is_empty() {
                    return Err("func.call has no regions".into());
                }
                let callee = op
                    .attr("callee")
                    .and_then(Attr::as_symbol)
                    .ok_or("func.call requires a callee symbol")?;
                let f = self
                    .funcs
                    .get(callee)
                    .ok_or_else(|| format!("call to unknown function @{callee}"))?;
                let params: Vec<_> = f
                    .regions
                    .first()
                    .map(|r| r.args.iter().map(|&a| self.ty(a).cloned()).collect())
                    .unwrap_or_default();
                let args: Vec<_> = op.operands.iter().map(|&v| self.ty(v).cloned()).collect();
                let results: Vec<_> = op.results.iter().map(|&v| self.ty(v).cloned()).collect();
                let expect_res: Vec<_> = f.func_result_types().into_iter().map(Some).collect();
                if !types_compatible(&args, &params) || !types_compatible(&results, &expect_res) {
                    return Err(format!("call signature does not match @{callee}"));
                }
                Ok(())
            }
            Matmul | Gemm => {
                arity(3, 0, 0)?;
                let (a, b, c) = (operand_memref(0)?, operand_memref(1)?, operand_memref(2)?);
                check_same_element(op.kind, &[a, b, c])?;
                if a.rank() != 2 || b.rank() != 2 || c.rank() != 2 {
                    return Err(format!("{} operands must be rank 2", op.kind));
                }
                dims_agree(op.kind, &[(a, 0, c, 0), (b, 1, c, 1), (a, 1, b, 0)])
            }
            Matvec | Gemv => {
                arity(3, 0, 0)?;
                let (a, x, y) = (operand_memref(0)?, operand_memref(1)?, operand_memref(2)?);
                check_same_element(op.kind, &[a, x, y])?;
                if a.rank() != 2 || x.rank() != 1 || y.rank() != 1 {
                    return Err(format!(
                        "{} takes (rank-2, rank-1, rank-1) operands",
                        op.kind
                    ));
                }
                dims_agree(op.kind, &[(a, 0, y, 0), (a, 1, x, 0)])
            }
            BatchMatmul => {
                arity(3, 0, 0)?;
                let (a, b, c) = (operand_memref(0)?, operand_memref(1)?, operand_memref(2)?);
                check_same_element(op.kind, &[a, b, c])?;
                if a.rank() != 3 || b.rank() != 3 || c.rank() != 3 {
                    return Err("linalg.batch_matmul operands must be rank 3".into());
                }
                dims_agree(
                    op.kind,
                    &[
                        (a, 0, b, 0),
                        (a, 0, c, 0),
                        (a, 1, c, 1),
                        (b, 2, c, 2),
                        (a, 2, b, 1),
                    ],
                )
            }
            Fill => {
                arity(2, 0, 0)?;
                let v = operand_scalar(0)?;
                if operand_memref(1)?.element != v {
                    return Err("linalg.fill value type must equal element type".into());
                }
                Ok(())
            }
            Elementwise => {
                if nops < 1 || nres != 0 || op.regions.len() != 1 {
                    return Err("linalg.elementwise takes memrefs and one region".into());
                }
                let mems: Vec<_> = (0..nops).map(operand_memref).collect::<Result<_, _>>()?;
                let out = mems[nops - 1];
                for m in &mems {
                    let same_shape = m.rank() == out.rank()
                        && m.shape.iter().zip(&out.shape).all(|(a, b)| match (a, b) {
                            (super::types::Dim::Static(x), super::types::Dim::Static(y)) => x == y,
                            _ => true,
                        });
                    if !same_shape {
                        return Err("linalg.elementwise operands must share a shape".into());
                    }
                }
                let region = &op.regions[0];
                let arg_t: Vec<_> = region.args.iter().map(|&a| self.scalar(a)).collect();
                let want: Vec<_> = mems.iter().map(|m| Some(m.element)).collect();
                if arg_t != want {
                    return Err(
                        "linalg.elementwise block args must match operand element types".into(),
                    );
                }
                self.check_yield(region, &[Some(Type::Scalar(out.element))], Yield)
            }
            LinalgReduce => {
                if nops != 2 || nres != 0 || op.regions.len() != 1 {
                    return Err("linalg.reduce takes (input, output) and a combiner region".into());
                }
                let (input, out) = (operand_memref(0)?, operand_memref(1)?);
                let dims = reduce_dims(op).ok_or("linalg.reduce requires `dimensions` array")?;
                if dims.is_empty()
                    || dims.windows(2).any(|w| w[0] >= w[1])
                    || dims.iter().any(|&d| d >= input.rank())
                {
                    return Err(
                        "linalg.reduce dimensions must be sorted, unique and in range".into(),
                    );
                }
                if input.element != out.element || out.rank() + dims.len() != input.rank() {
                    return Err("linalg.reduce output must drop exactly the reduced axes".into());
                }
                let region = &op.regions[0];
                let ok = region.args.len() == 2
                    && region
                        .args
                        .iter()
                        .all(|&a| self.scalar(a) == Some(input.element))
                    && classify_combiner(region).is_some();
                if !ok {
                    return Err("malformed reduce region".into());
                }
                Ok(())
            }
            SpmvCsr => {
                arity(5, 0, 0)?;
                let mems: Vec<_> = (0..5).map(operand_memref).collect::<Result<_, _>>()?;
                if mems.iter().any(|m| m.rank() != 1) {
                    return Err("sparse.spmv_csr operands must be rank 1".into());
                }
                if mems[0].element.is_float() || mems[1].element.is_float() {
                    return Err("sparse.spmv_csr rowptr/colind must be integer".into());
                }
                if mems[2].element != mems[3].element || mems[2].element != mems[4].element {
                    return Err("sparse.spmv_csr values, x and y must share an element type".into());
                }
                Ok(())
            }
            Yield | Reduce | ReduceReturn | Return | KokkosYield => {
                if !op.results.is_empty() {
                    return Err(format!("terminator {} has no results", op.kind));
                }
                if op.kind != Reduce && !op.regions.is_empty() {
                    return Err(format!("terminator {} has no regions", op.kind));
                }
                Ok(())
            }
            Func | Global => Ok(()),
            _ => Err(format!("no schema for {}", op.kind)),
        }
    }

    fn no_memref_results(&self, op: &Operation) -> Result<(), String> {
        if op.results.iter().any(|&r| self.memref(r).is_some()) {
            Err(format!("{} cannot produce memref results", op.kind))
        } else {
            Ok(())
        }
    }

    fn check_yield(
        &self,
        region: &Region,
        types: &[Option<Type>],
        kind: OpKind,
    ) -> Result<(), String> {
        let Some(term) = region.terminator() else {
            return Ok(());
        };
        if term.kind != kind {
            return Ok(());
        }
        let got: Vec<_> = term.operands.iter().map(|&v| self.ty(v).cloned()).collect();
        if got != types {
            return Err(format!("{} operand types do not match", term.kind));
        }
        Ok(())
    }

    fn check_parallel(&self, op: &Operation) -> Result<(), String> {
        let layout = op
            .loop_layout()
            .ok_or_else(|| format!("malformed {} operand layout", op.kind))?;
        if op.regions.len() != 1 {
            return Err(format!("{} has one region", op.kind));
        }
        let region = &op.regions[0];
        if layout.rank == 0 {
            return Err(format!("{} needs at least one dimension", op.kind));
        }
        let bounds: Vec<ValueId> = op.operands[..layout.inits].to_vec();
        if !bounds
            .iter()
            .all(|&v| self.scalar(v) == Some(ScalarType::Index))
        {
            return Err(format!("{} bounds and hints must be index-typed", op.kind));
        }
        let args_ok = match op.kind {
            OpKind::TeamParallel => {
                region.args.len() == 2
                    && self.scalar(region.args[0]) == Some(ScalarType::Index)
                    && self.ty(region.args[1]) == Some(&Type::Team)
            }
            _ => region
                .args
                .iter()
                .all(|&a| self.scalar(a) == Some(ScalarType::Index)),
        };
        if !args_ok {
            return Err(format!("{} region arguments have the wrong types", op.kind));
        }
        self.no_memref_results(op)?;
        let inits: Vec<_> = op
            .loop_inits()
            .iter()
            .map(|&v| self.ty(v).cloned())
            .collect();
        let res: Vec<_> = op.results.iter().map(|&v| self.ty(v).cloned()).collect();
        if inits != res {
            return Err(format!(
                "{} reduction inits must match result types",
                op.kind
            ));
        }
        let Some(term) = region.terminator() else {
            return Ok(());
        };
        if res.is_empty() {
            if term.kind == OpKind::Reduce && !term.operands.is_empty() {
                return Err(format!("{} without results cannot reduce values", op.kind));
            }
            if term.kind != OpKind::Reduce && !term.operands.is_empty() {
                return Err(format!("{} terminator takes no operands", term.kind));
            }
            return Ok(());
        }
        if term.kind != OpKind::Reduce {
            return Err(format!("{} with results must end in scf.reduce", op.kind));
        }
        let vals: Vec<_> = term.operands.iter().map(|&v| self.ty(v).cloned()).collect();
        if vals != res || term.regions.len() != res.len() {
            return Err("scf.reduce operands must match loop results".into());
        }
        for (combiner, ty) in term.regions.iter().zip(&res) {
            let ok = combiner.args.len() == 2
                && combiner.args.iter().all(|&a| self.ty(a) == ty.as_ref())
                && classify_combiner(combiner).is_some();
            if !ok {
                return Err("malformed reduce region".into());
            }
        }
        Ok(())
    }
}

fn terminator_allowed(parent: OpKind, term: OpKind) -> bool {
    use OpKind::*;
    match parent {
        Func => term == Return,
        Parallel => matches!(term, Yield | Reduce),
        For | If | Elementwise => term == Yield,
        RangeParallel | TeamParallel | ThreadParallel => matches!(term, KokkosYield | Reduce),
        Single => term == KokkosYield,
        Reduce | LinalgReduce => term == ReduceReturn,
        _ => false,
    }
}

fn types_match(got: &[Option<Type>], want: &[Type]) -> bool {
    got.len() == want.len()
        && got.iter().zip(want).all(|(g, w)| match (g, w) {
            (Some(Type::MemRef(a)), Type::MemRef(b)) => a.compatible(b),
            (Some(a), b) => a == b,
            (None, _) => false,
        })
}

fn types_compatible(got: &[Option<Type>], want: &[Option<Type>]) -> bool {
    got.len() == want.len()
        && got.iter().zip(want).all(|(g, w)| match (g, w) {
            (Some(Type::MemRef(a)), Some(Type::MemRef(b))) => a.compatible(b),
            (Some(a), Some(b)) => a == b,
            _ => false,
        })
}

fn check_same_element(kind: OpKind, mems: &[&MemRefType]) -> Result<(), String> {
    if mems.windows(2).all(|w| w[0].element == w[1].element) {
        Ok(())
    } else {
        Err(format!("{kind} operands must share an element type"))
    }
}

fn dims_agree(
    kind: OpKind,
    pairs: &[(&MemRefType, usize, &MemRefType, usize)],
) -> Result<(), String> {
    for (a, i, b, j) in pairs {
        if let (Some(x), Some(y)) = (a.shape[*i].as_static(), b.shape[*j].as_static()) {
            if x != y {
                return Err(format!("{kind} operand shapes are inconsistent"));
            }
        }
    }
    Ok(())
}

/// Reduced axes of a `linalg.reduce`.
pub fn reduce_dims(op: &Operation) -> Option<Vec<usize>> {
    match op.attr("dimensions")? {
        Attr::Array(items) => items
            .iter()
            .map(|a| a.as_int().and_then(|v| usize::try_from(v).ok()))
            .collect(),
        _ => None,
    }
}
