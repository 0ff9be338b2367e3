use std::collections::{HashMap, HashSet};

use super::{PassResult, TargetConfig};
use crate::ir::analysis::{deep_effects, direct_effects, memref_roots, Effects, RootKey};
use crate::ir::{
    func_results_attr, walk, walk_op, Attr, Diagnostic, ExecSpace, MemorySpace, OpKind, OpPath,
    Operation, Program, Type, ValueId, ValueTable,
};

/// Assign a memory space to every memref and, when host and device memory
/// are separate, insert `kokkos.sync` before stale uses and
/// `kokkos.modify` after writes.
///
/// Function arguments and results are always dualview. Syncs are placed
/// per kernel and per maximal run of host ops; a root is synced to a space
/// only when the other space may hold newer data.
pub fn manage_dualviews(program: &mut Program, config: &TargetConfig) -> PassResult {
    let mut diags = Vec::new();
    walk(program, |path, op| {
        if op.kind == OpKind::Parallel || op.kind.is_linalg() || op.kind == OpKind::SpmvCsr {
            diags.push(Diagnostic::at(
                path,
                op.span,
                format!("unlowered op {} before dualview management", op.kind),
            ));
        }
    });
    let mut assigned = false;
    walk(program, |_, op| {
        let vals = op
            .results
            .iter()
            .chain(op.regions.iter().flat_map(|r| r.args.iter()));
        for &v in vals {
            if program
                .values
                .memref(v)
                .is_some_and(|m| m.space != MemorySpace::Unassigned)
            {
                assigned = true;
            }
        }
    });
    if assigned {
        diags.push(Diagnostic::new("memory spaces are already assigned"));
    }
    if !diags.is_empty() {
        return Err(diags);
    }

    let global_spaces = global_spaces(program);
    for op in program
        .ops
        .iter_mut()
        .filter(|op| op.kind == OpKind::Global)
    {
        let name = op.sym_name().unwrap_or_default().to_string();
        let space = global_spaces
            .get(&name)
            .copied()
            .unwrap_or(MemorySpace::Host);
        if let Some(Attr::Type(Type::MemRef(m))) = op.attrs.get_mut("type") {
            m.space = space;
        }
    }
    let globals: HashMap<String, Type> = program
        .ops
        .iter()
        .filter(|op| op.kind == OpKind::Global)
        .filter_map(|op| {
            Some((
                op.sym_name()?.to_string(),
                match op.attr("type")? {
                    Attr::Type(t) => t.clone(),
                    _ => return None,
                },
            ))
        })
        .collect();

    let Program { ops, values } = program;
    for func in ops.iter_mut().filter(|op| op.kind == OpKind::Func) {
        let roots = memref_roots(func, values);
        let spaces = assign_spaces(func, &roots, values, &global_spaces);
        for (&v, key) in &roots {
            if let Some(&space) = spaces.get(key) {
                if let Some(Type::MemRef(m)) = values.get(v).cloned() {
                    values.set_ty(v, Type::MemRef(m.with_space(space)));
                }
            }
        }
        let results: Vec<Type> = func
            .func_result_types()
            .into_iter()
            .map(|t| match t {
                Type::MemRef(m) => Type::MemRef(m.with_space(MemorySpace::DualView)),
                t => t,
            })
            .collect();
        func.attrs
            .insert("results".into(), func_results_attr(&results));
        if !config.separate_device_memory {
            continue;
        }
        let dual: HashSet<RootKey> = spaces
            .iter()
            .filter(|(_, &s)| s == MemorySpace::DualView)
            .map(|(k, _)| k.clone())
            .collect();
        let mut boundary: Vec<RootKey> = Vec::new();
        for &a in &func.regions[0].args {
            if let Some(k) = roots.get(&a) {
                boundary.push(k.clone());
            }
        }
        let mut state = State::default();
        for k in &dual {
            if boundary.contains(k) || matches!(k, RootKey::Global(_)) {
                state.insert(
                    k.clone(),
                    Valid {
                        host: true,
                        device: false,
                    },
                );
            }
        }
        for k in &dual {
            if matches!(k, RootKey::Global(_)) && !boundary.contains(k) {
                boundary.push(k.clone());
            }
        }
        let mut visible: HashSet<ValueId> = func.regions[0].args.iter().copied().collect();
        let mut ins = Inserter {
            values,
            roots: &roots,
            dual: &dual,
            globals: &globals,
            boundary: &boundary,
        };
        let body = std::mem::take(&mut func.regions[0].ops);
        let (body, _) = ins.block(body, state, &mut visible);
        func.regions[0].ops = body;
    }
    Ok(())
}

fn is_kernel(op: &Operation) -> bool {
    matches!(op.kind, OpKind::Gemm | OpKind::Gemv)
        || (op.kind.is_kokkos_loop() && op.exec_space() == Some(ExecSpace::Device))
}

fn contains_kernel(op: &Operation) -> bool {
    op.regions
        .iter()
        .flat_map(|r| r.ops.iter())
        .any(|o| is_kernel(o) || contains_kernel(o))
}

/// Where each root is touched: (host, device).
fn uses(
    func: &Operation,
    values: &ValueTable,
    map: &HashMap<ValueId, RootKey>,
) -> HashMap<RootKey, (bool, bool)> {
    let mut out: HashMap<RootKey, (bool, bool)> = HashMap::new();
    fn visit(
        op: &Operation,
        device: bool,
        values: &ValueTable,
        map: &HashMap<ValueId, RootKey>,
        out: &mut HashMap<RootKey, (bool, bool)>,
    ) {
        let device = device || is_kernel(op);
        let mut fx = Effects::default();
        direct_effects(op, values, &mut fx);
        for v in fx.reads.iter().chain(&fx.writes) {
            if let Some(k) = map.get(v) {
                let e = out.entry(k.clone()).or_default();
                if device {
                    e.1 = true;
                } else {
                    e.0 = true;
                }
            }
        }
        for r in &op.regions {
            for o in &r.ops {
                visit(o, device, values, map, out);
            }
        }
    }
    for r in &func.regions {
        for o in &r.ops {
            visit(o, false, values, map, &mut out);
        }
    }
    out
}

fn global_spaces(program: &Program) -> HashMap<String, MemorySpace> {
    let mut out = HashMap::new();
    for func in program.funcs() {
        let roots = memref_roots(func, &program.values);
        for (k, (_, device)) in uses(func, &program.values, &roots) {
            if let RootKey::Global(name) = k {
                let e = out.entry(name).or_insert(MemorySpace::Host);
                if device {
                    *e = MemorySpace::DualView;
                }
            }
        }
        // Globals crossing a call or return take the boundary convention.
        walk_op(func, &OpPath::default(), &mut |_, op| {
            if matches!(op.kind, OpKind::Call | OpKind::Return) {
                for v in &op.operands {
                    if let Some(RootKey::Global(name)) = roots.get(v) {
                        out.insert(name.clone(), MemorySpace::DualView);
                    }
                }
            }
        });
    }
    out
}

fn assign_spaces(
    func: &Operation,
    roots: &HashMap<ValueId, RootKey>,
    values: &ValueTable,
    global_spaces: &HashMap<String, MemorySpace>,
) -> HashMap<RootKey, MemorySpace> {
    let mut forced: HashSet<RootKey> = HashSet::new();
    for &a in &func.regions[0].args {
        if let Some(k) = roots.get(&a) {
            forced.insert(k.clone());
        }
    }
    walk_op(func, &OpPath::default(), &mut |_, op| {
        let boundary = match op.kind {
            OpKind::Return | OpKind::Call => {
                op.operands.iter().chain(&op.results).collect::<Vec<_>>()
            }
            _ => Vec::new(),
        };
        for v in boundary {
            if let Some(k) = roots.get(v) {
                forced.insert(k.clone());
            }
        }
    });
    let used = uses(func, values, roots);
    let mut out = HashMap::new();
    for k in roots.values() {
        let space = match k {
            RootKey::Global(name) => global_spaces
                .get(name)
                .copied()
                .unwrap_or(MemorySpace::Host),
            _ if forced.contains(k) => MemorySpace::DualView,
            _ => match used.get(k).copied().unwrap_or_default() {
                (true, true) => MemorySpace::DualView,
                (false, true) => MemorySpace::Device,
                _ => MemorySpace::Host,
            },
        };
        out.insert(k.clone(), space);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Valid {
    host: bool,
    device: bool,
}

type State = HashMap<RootKey, Valid>;

/// Keep `a`'s roots; a copy is valid only if valid on both paths.
fn meet(a: &State, b: &State) -> State {
    a.iter()
        .map(|(k, &v)| {
            let w = b.get(k).copied().unwrap_or(v);
            (
                k.clone(),
                Valid {
                    host: v.host && w.host,
                    device: v.device && w.device,
                },
            )
        })
        .collect()
}

struct Inserter<'a> {
    values: &'a mut ValueTable,
    roots: &'a HashMap<ValueId, RootKey>,
    dual: &'a HashSet<RootKey>,
    globals: &'a HashMap<String, Type>,
    boundary: &'a [RootKey],
}

impl Inserter<'_> {
    /// Dual roots touched by `op`, in first-touch order, and the written subset.
    fn touched(&self, op: &Operation) -> (Vec<RootKey>, Vec<RootKey>) {
        let fx = deep_effects(op, self.values);
        let mut all = Vec::new();
        let mut written = Vec::new();
        for (v, w) in fx
            .reads
            .iter()
            .map(|v| (v, false))
            .chain(fx.writes.iter().map(|v| (v, true)))
        {
            let Some(k) = self.roots.get(v).filter(|k| self.dual.contains(k)) else {
                continue;
            };
            if !all.contains(k) {
                all.push(k.clone());
            }
            if w && !written.contains(k) {
                written.push(k.clone());
            }
        }
        (all, written)
    }

    /// A value naming `root` that is usable at the current point, plus any
    /// op needed to produce it.
    fn handle(
        &mut self,
        root: &RootKey,
        visible: &HashSet<ValueId>,
        out: &mut Vec<Operation>,
    ) -> Option<ValueId> {
        match root {
            RootKey::Value(v) => visible.contains(v).then_some(*v),
            RootKey::Global(name) => {
                let ty = self.globals.get(name)?.clone();
                let v = self.values.new_value(ty);
                out.push(
                    Operation::new(OpKind::GetGlobal)
                        .with_attr("name", Attr::Symbol(name.clone()))
                        .with_results([v]),
                );
                Some(v)
            }
        }
    }

    fn emit(
        &mut self,
        kind: OpKind,
        space: ExecSpace,
        root: &RootKey,
        visible: &HashSet<ValueId>,
        out: &mut Vec<Operation>,
    ) {
        if let Some(h) = self.handle(root, visible, out) {
            out.push(
                Operation::new(kind)
                    .with_operands([h])
                    .with_attr("space", space.attr()),
            );
        }
    }

    fn flush(
        &mut self,
        pending: &mut Vec<RootKey>,
        visible: &HashSet<ValueId>,
        out: &mut Vec<Operation>,
    ) {
        for k in std::mem::take(pending) {
            self.emit(OpKind::Modify, ExecSpace::Host, &k, visible, out);
        }
    }

    fn block(
        &mut self,
        ops: Vec<Operation>,
        mut state: State,
        visible: &mut HashSet<ValueId>,
    ) -> (Vec<Operation>, State) {
        let mut out = Vec::with_capacity(ops.len());
        let mut pending: Vec<RootKey> = Vec::new();
        for mut op in ops {
            if op.kind.is_terminator() && op.kind != OpKind::Return {
                self.flush(&mut pending, visible, &mut out);
                out.push(op);
                continue;
            }
            if op.kind == OpKind::Return {
                self.flush(&mut pending, visible, &mut out);
                for k in self
                    .boundary
                    .iter()
                    .chain(op.operands.iter().filter_map(|v| self.roots.get(v)))
                {
                    let stale = self.dual.contains(k) && state.get(k).is_some_and(|s| !s.host);
                    if stale {
                        self.emit(OpKind::Sync, ExecSpace::Host, k, visible, &mut out);
                        state.insert(
                            k.clone(),
                            Valid {
                                host: true,
                                device: true,
                            },
                        );
                    }
                }
                out.push(op);
                continue;
            }
            if is_kernel(&op) {
                self.flush(&mut pending, visible, &mut out);
                let (all, written) = self.touched(&op);
                for k in &all {
                    let s = state.entry(k.clone()).or_insert(Valid {
                        host: true,
                        device: false,
                    });
                    if !s.device {
                        s.device = true;
                        self.emit(OpKind::Sync, ExecSpace::Device, k, visible, &mut out);
                    }
                }
                visible.extend(&op.results);
                out.push(op);
                for k in &written {
                    state.insert(
                        k.clone(),
                        Valid {
                            host: false,
                            device: true,
                        },
                    );
                    self.emit(OpKind::Modify, ExecSpace::Device, k, visible, &mut out);
                }
                continue;
            }
            if contains_kernel(&op) && matches!(op.kind, OpKind::For | OpKind::If) {
                self.flush(&mut pending, visible, &mut out);
                state = if op.kind == OpKind::If {
                    let mut ends = Vec::new();
                    for r in &mut op.regions {
                        let mut vis = visible.clone();
                        vis.extend(&r.args);
                        let (body, end) =
                            self.block(std::mem::take(&mut r.ops), state.clone(), &mut vis);
                        r.ops = body;
                        ends.push(end);
                    }
                    ends.iter()
                        .skip(1)
                        .fold(meet(&state, &ends[0]), |acc, e| meet(&acc, e))
                } else {
                    let mut vis = visible.clone();
                    vis.extend(&op.regions[0].args);
                    let mut entry = state.clone();
                    for _ in 0..=self.dual.len() + 1 {
                        let (_, end) =
                            self.block(op.regions[0].ops.clone(), entry.clone(), &mut vis.clone());
                        let next = meet(&entry, &end);
                        if next == entry {
                            break;
                        }
                        entry = next;
                    }
                    let (body, end) = self.block(
                        std::mem::take(&mut op.regions[0].ops),
                        entry.clone(),
                        &mut vis,
                    );
                    op.regions[0].ops = body;
                    meet(&entry, &end)
                };
                visible.extend(&op.results);
                out.push(op);
                continue;
            }
            let (all, written) = self.touched(&op);
            for k in &all {
                let s = state.entry(k.clone()).or_insert(Valid {
                    host: true,
                    device: false,
                });
                if !s.host {
                    s.host = true;
                    self.emit(OpKind::Sync, ExecSpace::Host, k, visible, &mut out);
                }
            }
            if op.kind == OpKind::Alloc {
                if let Some(k) = self
                    .roots
                    .get(&op.results[0])
                    .filter(|k| self.dual.contains(*k))
                {
                    state.insert(
                        k.clone(),
                        Valid {
                            host: true,
                            device: true,
                        },
                    );
                }
            }
            if op.kind == OpKind::Call {
                for r in &op.results {
                    if let Some(k) = self.roots.get(r).filter(|k| self.dual.contains(*k)) {
                        state.insert(
                            k.clone(),
                            Valid {
                                host: true,
                                device: false,
                            },
                        );
                    }
                }
            }
            visible.extend(&op.results);
            out.push(op);
            for k in written {
                state.insert(
                    k.clone(),
                    Valid {
                        host: true,
                        device: false,
                    },
                );
                if !pending.contains(&k) {
                    pending.push(k);
                }
            }
        }
        self.flush(&mut pending, visible, &mut out);
        (out, state)
    }
}
