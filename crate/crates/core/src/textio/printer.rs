//! Canonical printer. Values are renumbered `%0, %1, ...` per function in
//! walk order, attributes are sorted, one op per line, two spaces of
//! indentation per region level.

use std::collections::HashMap;
use std::fmt::Write;

use crate::ir::{
    value_numbering, Attr, DenseData, OpKind, Operation, Program, Region, ScalarType, Type,
    ValueId, SEGMENTS_ATTR,
};

pub fn print(program: &Program) -> String {
    let mut out = String::new();
    for (i, op) in program.ops.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        match op.kind {
            OpKind::Global => print_global(op, &mut out),
            _ => {
                let names = value_numbering(op);
                let mut p = Printer {
                    prog: program,
                    names: &names,
                    out: &mut out,
                };
                p.func(op);
            }
        }
    }
    out
}

/// Render a float so that parsing it back yields the same value of `ty`.
pub fn format_float(v: f64, ty: Option<ScalarType>) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    match ty {
        Some(ScalarType::F32) | Some(ScalarType::F16) => format!("{:?}", v as f32),
        _ => format!("{v:?}"),
    }
}

fn print_global(op: &Operation, out: &mut String) {
    let name = op.sym_name().unwrap_or("?");
    let ty = match op.attr("type") {
        Some(Attr::Type(t)) => t.clone(),
        _ => Type::Team,
    };
    let elem = ty.as_memref().map(|m| m.element);
    write!(out, "memref.global @{name} : {ty}").unwrap();
    match op.attr("value") {
        Some(Attr::Dense {
            file: Some(file), ..
        }) => write!(out, " = @file({})", quote(file)).unwrap(),
        Some(Attr::Dense { data, file: None }) => {
            write!(out, " = {}", dense_text(data, elem)).unwrap()
        }
        _ => {}
    }
    let extra: Vec<_> = op
        .attrs
        .iter()
        .filter(|(k, _)| !matches!(k.as_str(), "sym_name" | "type" | "value"))
        .collect();
    if !extra.is_empty() {
        out.push(' ');
        out.push_str(&attr_dict(extra.into_iter()));
    }
    out.push('\n');
}

fn dense_text(data: &DenseData, elem: Option<ScalarType>) -> String {
    let items: Vec<String> = match data {
        DenseData::Int(v) => v.iter().map(|x| x.to_string()).collect(),
        DenseData::Float(v) => v.iter().map(|x| format_float(*x, elem)).collect(),
    };
    format!("dense<[{}]>", items.join(", "))
}

pub(crate) fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            '\t' => q.push_str("\\t"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

pub(crate) fn attr_text(a: &Attr) -> String {
    match a {
        Attr::Int(v) => v.to_string(),
        Attr::Float(v) => format_float(*v, None),
        Attr::Str(s) => quote(s),
        Attr::Ident(s) => s.clone(),
        Attr::Symbol(s) => format!("@{s}"),
        Attr::Type(t) => t.to_string(),
        Attr::Array(items) => {
            let parts: Vec<_> = items.iter().map(attr_text).collect();
            format!("[{}]", parts.join(", "))
        }
        Attr::Dense {
            file: Some(file), ..
        } => format!("@file({})", quote(file)),
        Attr::Dense { data, file: None } => dense_text(data, None),
    }
}

fn attr_dict<'a>(attrs: impl Iterator<Item = (&'a String, &'a Attr)>) -> String {
    let parts: Vec<_> = attrs
        .map(|(k, v)| format!("{k} = {}", attr_text(v)))
        .collect();
    format!("{{{}}}", parts.join(", "))
}

struct Printer<'a> {
    prog: &'a Program,
    names: &'a HashMap<ValueId, usize>,
    out: &'a mut String,
}

impl Printer<'_> {
    fn v(&self, v: ValueId) -> String {
        match self.names.get(&v) {
            Some(n) => format!("%{n}"),
            None => format!("%u{}", v.0),
        }
    }

    fn vs(&self, vals: &[ValueId]) -> String {
        vals.iter()
            .map(|&v| self.v(v))
            .collect::<Vec<_>>()
            .join(", ")
    }

    fn ty(&self, v: ValueId) -> String {
        self.prog
            .values
            .get(v)
            .map_or_else(|| "<?>".to_string(), |t| t.to_string())
    }

    fn types_suffix(&self, vals: &[ValueId]) -> String {
        match vals {
            [] => String::new(),
            [one] => format!(" : {}", self.ty(*one)),
            many => {
                let ts: Vec<_> = many.iter().map(|&v| self.ty(v)).collect();
                format!(" : ({})", ts.join(", "))
            }
        }
    }

    fn indent(&mut self, depth: usize) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
    }

    fn func(&mut self, op: &Operation) {
        let name = op.sym_name().unwrap_or("?").to_string();
        let region = op.regions.first();
        let params: Vec<String> = region
            .map(|r| {
                r.args
                    .iter()
                    .map(|&a| format!("{}: {}", self.v(a), self.ty(a)))
                    .collect()
            })
            .unwrap_or_default();
        write!(self.out, "func @{name}({})", params.join(", ")).unwrap();
        let results = op.func_result_types();
        match results.as_slice() {
            [] => {}
            [one] => write!(self.out, " -> {one}").unwrap(),
            many => {
                let ts: Vec<_> = many.iter().map(|t| t.to_string()).collect();
                write!(self.out, " -> ({})", ts.join(", ")).unwrap()
            }
        }
        let extra: Vec<_> = op
            .attrs
            .iter()
            .filter(|(k, _)| !matches!(k.as_str(), "sym_name" | "results"))
            .collect();
        if !extra.is_empty() {
            write!(self.out, " {}", attr_dict(extra.into_iter())).unwrap();
        }
        match region {
            Some(r) => self.region_body(r, 0, false),
            None => self.out.push_str(" {\n}"),
        }
        self.out.push('\n');
    }

    /// Prints ` {` ... `}` (no trailing newline).
    fn region_body(&mut self, region: &Region, depth: usize, show_args: bool) {
        self.out.push_str(" {\n");
        if show_args && !region.args.is_empty() {
            self.indent(depth + 1);
            let args: Vec<_> = region
                .args
                .iter()
                .map(|&a| format!("{}: {}", self.v(a), self.ty(a)))
                .collect();
            writeln!(self.out, "^bb({}):", args.join(", ")).unwrap();
        }
        for op in &region.ops {
            self.op(op, depth + 1);
        }
        self.indent(depth);
        self.out.push('}');
    }

    fn attrs_except(&self, op: &Operation, skip: &[&str]) -> String {
        let kept: Vec<_> = op
            .attrs
            .iter()
            .filter(|(k, _)| !skip.contains(&k.as_str()))
            .collect();
        if kept.is_empty() {
            String::new()
        } else {
            format!(" {}", attr_dict(kept.into_iter()))
        }
    }

    fn op(&mut self, op: &Operation, depth: usize) {
        self.indent(depth);
        if !op.results.is_empty() {
            let rs = self.vs(&op.results);
            write!(self.out, "{rs} = ").unwrap();
        }
        let sugared = self.sugar(op, depth);
        if !sugared {
            self.generic(op, depth);
        }
        self.out.push('\n');
    }

    fn generic(&mut self, op: &Operation, depth: usize) {
        let operands = if op.operands.is_empty() {
            String::new()
        } else {
            format!("({})", self.vs(&op.operands))
        };
        let head = format!(
            "{}{operands}{}{}",
            op.kind.name(),
            self.attrs_except(op, &[]),
            self.types_suffix(&op.results)
        );
        self.out.push_str(&head);
        for r in &op.regions {
            self.region_body(r, depth, true);
        }
    }

    /// Returns false when `op` has no sugared form (or doesn't fit it).
    fn sugar(&mut self, op: &Operation, depth: usize) -> bool {
        match op.kind {
            OpKind::Constant => {
                if op.attrs.len() != 1 || op.results.len() != 1 {
                    return false;
                }
                let ty = self
                    .prog
                    .values
                    .get(op.results[0])
                    .and_then(Type::as_scalar);
                let lit = match op.attr("value") {
                    Some(Attr::Int(v)) => v.to_string(),
                    Some(Attr::Float(v)) => format_float(*v, ty),
                    _ => return false,
                };
                let s = format!("arith.constant {lit}{}", self.types_suffix(&op.results));
                self.out.push_str(&s);
                true
            }
            OpKind::Load if !op.operands.is_empty() && op.attrs.is_empty() => {
                let s = format!(
                    "memref.load {}[{}]{}",
                    self.v(op.operands[0]),
                    self.vs(&op.operands[1..]),
                    self.types_suffix(&op.results)
                );
                self.out.push_str(&s);
                true
            }
            OpKind::Store if op.operands.len() >= 2 && op.attrs.is_empty() => {
                let s = format!(
                    "memref.store {}, {}[{}]",
                    self.v(op.operands[0]),
                    self.v(op.operands[1]),
                    self.vs(&op.operands[2..])
                );
                self.out.push_str(&s);
                true
            }
            OpKind::Sync | OpKind::Modify if op.operands.len() == 1 && op.attrs.len() == 1 => {
                let Some(space) = op.target_space() else {
                    return false;
                };
                let s = format!("{} {} {space}", op.kind.name(), self.v(op.operands[0]));
                self.out.push_str(&s);
                true
            }
            OpKind::Call => {
                let Some(callee) = op.attr("callee").and_then(Attr::as_symbol) else {
                    return false;
                };
                let s = format!(
                    "func.call @{callee}({}){}{}",
                    self.vs(&op.operands),
                    self.attrs_except(op, &["callee"]),
                    self.types_suffix(&op.results)
                );
                self.out.push_str(&s);
                true
            }
            OpKind::GetGlobal if op.operands.is_empty() => {
                let Some(name) = op.attr("name").and_then(Attr::as_symbol) else {
                    return false;
                };
                let s = format!(
                    "memref.get_global @{name}{}{}",
                    self.attrs_except(op, &["name"]),
                    self.types_suffix(&op.results)
                );
                self.out.push_str(&s);
                true
            }
            OpKind::If if op.operands.len() == 1 && op.regions.len() == 2 => {
                let s = format!(
                    "scf.if {}{}{}",
                    self.v(op.operands[0]),
                    self.attrs_except(op, &[]),
                    self.types_suffix(&op.results)
                );
                self.out.push_str(&s);
                self.region_body(&op.regions[0], depth, false);
                let else_trivial = op.results.is_empty()
                    && op.regions[1].ops.len() == 1
                    && op.regions[1].ops[0].kind == OpKind::Yield
                    && op.regions[1].ops[0].operands.is_empty();
                if !else_trivial {
                    self.out.push_str(" else");
                    self.region_body(&op.regions[1], depth, false);
                }
                true
            }
            OpKind::Parallel | OpKind::For => {
                let Some(layout) = op.loop_layout() else {
                    return false;
                };
                let region = &op.regions[0];
                let rank = layout.rank;
                let ivs = &region.args[..rank];
                let lo = &op.operands[..rank];
                let hi = &op.operands[rank..2 * rank];
                let st = &op.operands[2 * rank..3 * rank];
                let group = |p: &Self, vals: &[ValueId]| {
                    if rank == 1 {
                        p.v(vals[0])
                    } else {
                        format!("({})", p.vs(vals))
                    }
                };
                let mut s = format!(
                    "{} {} = {} to {} step {}",
                    op.kind.name(),
                    group(self, ivs),
                    group(self, lo),
                    group(self, hi),
                    group(self, st)
                );
                let inits = &op.operands[layout.inits..];
                if op.kind == OpKind::For {
                    if !inits.is_empty() {
                        let pairs: Vec<_> = region.args[1..]
                            .iter()
                            .zip(inits)
                            .map(|(&a, &i)| format!("{} = {}", self.v(a), self.v(i)))
                            .collect();
                        write!(s, " iter_args({})", pairs.join(", ")).unwrap();
                    }
                } else if !inits.is_empty() {
                    write!(s, " init({})", self.vs(inits)).unwrap();
                }
                s.push_str(&self.attrs_except(op, &[]));
                s.push_str(&self.types_suffix(&op.results));
                self.out.push_str(&s);
                self.region_body(region, depth, false);
                true
            }
            OpKind::RangeParallel | OpKind::TeamParallel | OpKind::ThreadParallel => {
                let Some(layout) = op.loop_layout() else {
                    return false;
                };
                let region = &op.regions[0];
                let bounds = &op.operands[layout.upper..layout.upper + layout.rank];
                let mut s = format!(
                    "{} ({}) -> ({})",
                    op.kind.name(),
                    self.vs(&region.args),
                    self.vs(bounds)
                );
                if let Some(i) = layout.team_size {
                    write!(s, " team_size({})", self.v(op.operands[i])).unwrap();
                }
                if let Some(i) = layout.vector_length {
                    write!(s, " vector_length({})", self.v(op.operands[i])).unwrap();
                }
                let inits = &op.operands[layout.inits..];
                if !inits.is_empty() {
                    write!(s, " init({})", self.vs(inits)).unwrap();
                }
                s.push_str(&self.attrs_except(op, &[SEGMENTS_ATTR]));
                s.push_str(&self.types_suffix(&op.results));
                self.out.push_str(&s);
                self.region_body(region, depth, false);
                true
            }
            _ => false,
        }
    }
}
