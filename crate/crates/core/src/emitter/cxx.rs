use std::collections::{HashMap, HashSet};
use std::fmt::Write;

use super::{EmitError, EmitOptions, EmitResult, Sidecar, RUNTIME_HEADER_NAME};
use crate::ir::{
    value_numbering, walk_region, Attr, CmpPredicate, CombinerKind, DenseData, ExecSpace,
    MemRefType, MemorySpace, OpKind, OpPath, Operation, ParallelLevel, Program, Region, ScalarType,
    SingleLevel, Type, ValueId,
};
use crate::textio::format_float;

type R<T> = Result<T, EmitError>;

fn unsupported(path: &OpPath, message: impl Into<String>) -> EmitError {
    EmitError::Unsupported {
        path: path.clone(),
        message: message.into(),
    }
}

pub(super) fn emit_program(prog: &Program, opts: &EmitOptions) -> R<EmitResult> {
    let mut e = Emitter {
        prog,
        names: HashMap::new(),
        plain: HashSet::new(),
        kernel: None,
        depth: 0,
        policies: 0,
        indent: 0,
        body: String::new(),
    };
    let mut signatures = Vec::new();
    let mut sidecars = Vec::new();
    let mut globals = String::new();
    let mut init = Vec::new();
    let mut fini = Vec::new();

    for (i, op) in prog.ops.iter().enumerate() {
        if op.kind == OpKind::Global {
            e.global(
                op,
                &OpPath::top(i),
                opts,
                &mut globals,
                &mut init,
                &mut fini,
                &mut sidecars,
            )?;
        }
    }
    let funcs: Vec<_> = prog
        .ops
        .iter()
        .enumerate()
        .filter(|(_, op)| op.kind == OpKind::Func)
        .collect();
    let mut protos = Vec::new();
    for &(i, op) in &funcs {
        protos.push(e.signature(op, &OpPath::top(i))?);
    }
    for (&(i, op), sig) in funcs.iter().zip(&protos) {
        e.func(op, &OpPath::top(i), sig)?;
        signatures.push(sig.clone());
    }

    let mut uses_blas = false;
    let mut has_calls = false;
    crate::ir::walk(prog, |_, op| {
        uses_blas |= matches!(op.kind, OpKind::Gemm | OpKind::Gemv);
        has_calls |= op.kind == OpKind::Call;
    });

    let mut out = String::new();
    writeln!(out, "// {}.hpp", opts.header_name).unwrap();
    out.push_str("#pragma once\n\n");
    if opts.kernel_library_headers && uses_blas {
        out.push_str("#define LAPIS_HAS_KOKKOS_KERNELS\n");
        out.push_str("#include <KokkosBlas2_gemv.hpp>\n#include <KokkosBlas3_gemm.hpp>\n");
    }
    writeln!(out, "#include \"{RUNTIME_HEADER_NAME}\"").unwrap();
    out.push_str("\n#include <cstdint>\n#include <limits>\n#include <tuple>\n");
    if opts.kernel_library_headers && uses_blas {
        out.push_str(KERNEL_LIBRARY_WRAPPERS);
    }
    if !globals.is_empty() {
        out.push('\n');
        out.push_str(&globals);
    }
    if has_calls && protos.len() > 1 {
        out.push('\n');
        for p in &protos {
            writeln!(out, "inline {p};").unwrap();
        }
    }
    out.push_str(&e.body);
    if opts.emit_init_finalize {
        out.push_str("\ninline void lapis_initialize() {\n");
        for l in &init {
            writeln!(out, "  {l}").unwrap();
        }
        out.push_str("}\n\ninline void lapis_finalize() {\n");
        for l in &fini {
            writeln!(out, "  {l}").unwrap();
        }
        out.push_str("}\n");
    }
    Ok(EmitResult {
        source: out,
        signatures,
        sidecars,
    })
}

const KERNEL_LIBRARY_WRAPPERS: &str = r#"
template <typename A, typename B, typename C>
inline void lapis_gemm(const A& a, const B& b, const C& c) {
  auto cv = LAPIS::device_view(c);
  using T = typename decltype(cv)::non_const_value_type;
  KokkosBlas::gemm("N", "N", T(1), LAPIS::device_view(a), LAPIS::device_view(b), T(1), cv);
}

template <typename A, typename X, typename Y>
inline void lapis_gemv(const A& a, const X& x, const Y& y) {
  auto yv = LAPIS::device_view(y);
  using T = typename decltype(yv)::non_const_value_type;
  KokkosBlas::gemv("N", T(1), LAPIS::device_view(a), LAPIS::device_view(x), T(1), yv);
}
"#;

fn scalar_cty(t: ScalarType) -> &'static str {
    match t {
        ScalarType::F16 => "LAPIS::half",
        ScalarType::F32 => "float",
        ScalarType::F64 => "double",
        ScalarType::I1 => "bool",
        ScalarType::I32 => "int32_t",
        ScalarType::I64 | ScalarType::Index => "int64_t",
    }
}

fn unsigned_cty(t: ScalarType) -> &'static str {
    match t {
        ScalarType::I32 => "uint32_t",
        ScalarType::I1 => "bool",
        _ => "uint64_t",
    }
}

/// `double**` style data type; every extent is dynamic.
fn data_type(m: &MemRefType) -> String {
    format!("{}{}", scalar_cty(m.element), "*".repeat(m.rank()))
}

fn memref_cty(m: &MemRefType, path: &OpPath) -> R<String> {
    let wrapper = match m.space {
        MemorySpace::DualView => "LAPIS::DualView",
        MemorySpace::Host => "LAPIS::HostView",
        MemorySpace::Device => "LAPIS::DeviceView",
        MemorySpace::Unassigned => {
            return Err(unsupported(path, format!("memref {m} has no memory space")))
        }
    };
    Ok(format!("{wrapper}<{}>", data_type(m)))
}

fn int_literal(v: i64) -> String {
    if v == i64::MIN {
        "INT64_MIN".into()
    } else if i32::try_from(v).is_ok() {
        if v < 0 {
            format!("({v})")
        } else {
            v.to_string()
        }
    } else if v < 0 {
        format!("(INT64_C({v}))")
    } else {
        format!("INT64_C({v})")
    }
}

fn float_literal(v: f64, t: ScalarType) -> String {
    let base = if t == ScalarType::F64 {
        "double"
    } else {
        "float"
    };
    let core = if v.is_nan() {
        format!("std::numeric_limits<{base}>::quiet_NaN()")
    } else if v.is_infinite() {
        let s = format!("std::numeric_limits<{base}>::infinity()");
        if v < 0.0 {
            format!("(-{s})")
        } else {
            s
        }
    } else {
        let mut s = format_float(v, Some(t));
        if t != ScalarType::F64 {
            s.push('f');
        }
        if v.is_sign_negative() {
            format!("({s})")
        } else {
            s
        }
    };
    if t == ScalarType::F16 {
        format!("LAPIS::half({core})")
    } else {
        core
    }
}

fn scalar_literal(attr: &Attr, t: ScalarType) -> Option<String> {
    match (attr, t) {
        (Attr::Int(v), ScalarType::I1) => Some(if *v & 1 == 1 { "true" } else { "false" }.into()),
        (Attr::Int(v), t) if !t.is_float() => Some(int_literal(*v)),
        (Attr::Float(v), t) if t.is_float() => Some(float_literal(*v, t)),
        (Attr::Int(v), t) => Some(float_literal(*v as f64, t)),
        _ => None,
    }
}

fn sanitize(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.chars().next().is_none_or(|c| c.is_ascii_digit()) {
        s.insert(0, '_');
    }
    s
}

fn global_var(name: &str) -> String {
    format!("g_{}", sanitize(name))
}

fn reducer(kind: CombinerKind) -> &'static str {
    match kind {
        CombinerKind::Add => "Kokkos::Sum",
        CombinerKind::Mul => "Kokkos::Prod",
        CombinerKind::Min => "Kokkos::Min",
        CombinerKind::Max => "Kokkos::Max",
    }
}

/// Statement folding `val` into the accumulator `acc`.
fn update(kind: CombinerKind, acc: &str, val: &str) -> String {
    match kind {
        CombinerKind::Add => format!("{acc} += {val};"),
        CombinerKind::Mul => format!("{acc} *= {val};"),
        CombinerKind::Min => format!("if ({val} < {acc}) {acc} = {val};"),
        CombinerKind::Max => format!("if ({acc} < {val}) {acc} = {val};"),
    }
}

/// How a block's terminator is rendered.
enum Term {
    /// Function body: `func.return`.
    Return,
    /// Assign yielded values to these variables.
    Assign(Vec<String>),
    /// Fold `scf.reduce` operands into these accumulators.
    Reduce(Vec<(String, CombinerKind)>),
    None,
}

struct Emitter<'a> {
    prog: &'a Program,
    /// C++ expression for each value: variable name or inlined literal.
    names: HashMap<ValueId, String>,
    /// Memrefs defined inside a kernel; these are bare Kokkos views.
    plain: HashSet<ValueId>,
    /// Inside a top-level parallel loop: true when it runs on the device.
    kernel: Option<bool>,
    /// Number of enclosing loop induction variables.
    depth: usize,
    /// Counter naming the policy objects of one function.
    policies: usize,
    indent: usize,
    body: String,
}

impl Emitter<'_> {
    fn line(&mut self, s: impl AsRef<str>) {
        for _ in 0..self.indent {
            self.body.push_str("  ");
        }
        self.body.push_str(s.as_ref());
        self.body.push('\n');
    }

    fn n(&self, v: ValueId) -> String {
        self.names
            .get(&v)
            .cloned()
            .unwrap_or_else(|| format!("u{}", v.0))
    }

    fn ns(&self, vs: &[ValueId]) -> Vec<String> {
        vs.iter().map(|&v| self.n(v)).collect()
    }

    fn ty(&self, v: ValueId) -> &Type {
        self.prog.ty(v)
    }

    fn scalar(&self, v: ValueId) -> ScalarType {
        self.ty(v).as_scalar().unwrap_or(ScalarType::Index)
    }

    fn cty(&self, v: ValueId, path: &OpPath) -> R<String> {
        match self.ty(v) {
            Type::Scalar(s) => Ok(scalar_cty(*s).into()),
            Type::MemRef(m) => memref_cty(m, path),
            Type::Team => Err(unsupported(path, "team handle used as a value")),
        }
    }

    fn is_dual(&self, v: ValueId) -> bool {
        !self.plain.contains(&v)
            && matches!(self.ty(v), Type::MemRef(m) if m.space == MemorySpace::DualView)
    }

    /// The view expression used for element access and extents.
    fn view(&self, v: ValueId) -> String {
        let name = self.n(v);
        if !self.is_dual(v) {
            return name;
        }
        match self.kernel {
            Some(true) => format!("{name}_d"),
            Some(false) => format!("{name}_h"),
            None => format!("{name}.h_view"),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn global(
        &mut self,
        op: &Operation,
        path: &OpPath,
        opts: &EmitOptions,
        decls: &mut String,
        init: &mut Vec<String>,
        fini: &mut Vec<String>,
        sidecars: &mut Vec<Sidecar>,
    ) -> R<()> {
        let name = op.sym_name().unwrap_or("global");
        let Some(Attr::Type(Type::MemRef(m))) = op.attr("type") else {
            return Err(unsupported(path, "memref.global without a memref type"));
        };
        let cty = memref_cty(m, path)?;
        let var = global_var(name);
        let extents: Option<Vec<u64>> = m.shape.iter().map(|d| d.as_static()).collect();
        let Some(extents) = extents else {
            return Err(unsupported(path, "memref.global with dynamic extents"));
        };
        writeln!(decls, "inline {cty} {var};").unwrap();
        let mut ctor = format!("{var} = {cty}(\"{name}\"");
        for e in &extents {
            write!(ctor, ", {e}").unwrap();
        }
        ctor.push_str(");");
        init.push(ctor);
        if let Some(Attr::Dense { data, file }) = op.attr("value") {
            if m.space == MemorySpace::Device {
                return Err(unsupported(path, "initialized global in device memory"));
            }
            let bytes = data.len() * m.element.byte_width();
            if file.is_some() || bytes > opts.sidecar_threshold {
                let blob = file
                    .clone()
                    .unwrap_or_else(|| format!("{}.bin", sanitize(name)));
                init.push(format!("LAPIS::load_sidecar({var}, \"{blob}\");"));
                sidecars.push(Sidecar {
                    name: blob,
                    bytes: data.to_le_bytes(m.element),
                });
            } else if !data.is_empty() {
                let store = match m.element {
                    ScalarType::F16 => "float",
                    t => scalar_cty(t),
                };
                let items: Vec<String> = match data {
                    DenseData::Int(v) => v
                        .iter()
                        .map(|&x| scalar_literal(&Attr::Int(x), m.element).unwrap_or_default())
                        .collect(),
                    DenseData::Float(v) => v
                        .iter()
                        .map(|&x| {
                            let t = if m.element == ScalarType::F16 {
                                ScalarType::F32
                            } else {
                                m.element
                            };
                            scalar_literal(&Attr::Float(x), t).unwrap_or_default()
                        })
                        .collect(),
                };
                writeln!(
                    decls,
                    "inline const {store} {var}_data[{}] = {{{}}};",
                    data.len(),
                    items.join(", ")
                )
                .unwrap();
                init.push(format!("LAPIS::fill_host({var}, {var}_data);"));
            }
        }
        fini.push(format!("{var} = {cty}();"));
        Ok(())
    }

    fn signature(&self, op: &Operation, path: &OpPath) -> R<String> {
        let region = op
            .regions
            .first()
            .ok_or_else(|| unsupported(path, "function without a body"))?;
        let names = value_numbering(op);
        let mut params = Vec::new();
        for &a in &region.args {
            params.push(format!("{} v{}", self.cty(a, path)?, names[&a]));
        }
        let mut results = Vec::new();
        for t in op.func_result_types() {
            results.push(match &t {
                Type::Scalar(s) => scalar_cty(*s).to_string(),
                Type::MemRef(m) => memref_cty(m, path)?,
                Type::Team => return Err(unsupported(path, "team handle returned")),
            });
        }
        let ret = match results.len() {
            0 => "void".to_string(),
            1 => results.pop().unwrap(),
            _ => format!("std::tuple<{}>", results.join(", ")),
        };
        let name = sanitize(op.sym_name().unwrap_or("f"));
        Ok(format!("{ret} {name}({})", params.join(", ")))
    }

    fn func(&mut self, op: &Operation, path: &OpPath, sig: &str) -> R<()> {
        self.names = value_numbering(op)
            .into_iter()
            .map(|(v, n)| (v, format!("v{n}")))
            .collect();
        self.plain.clear();
        self.kernel = None;
        self.depth = 0;
        self.policies = 0;
        // Scalar constants are inlined at their uses.
        for region in &op.regions {
            walk_region(region, &mut |o| {
                if o.kind == OpKind::Constant && o.results.len() == 1 {
                    if let (Some(a), Some(t)) =
                        (o.attr("value"), self.prog.ty(o.results[0]).as_scalar())
                    {
                        if let Some(lit) = scalar_literal(a, t) {
                            self.names.insert(o.results[0], lit);
                        }
                    }
                }
            });
        }
        self.body.push('\n');
        self.line(format!("inline {sig} {{"));
        self.indent += 1;
        self.block(&op.regions[0], path, 0, &Term::Return)?;
        self.indent -= 1;
        self.line("}");
        Ok(())
    }

    fn block(&mut self, region: &Region, path: &OpPath, ri: usize, term: &Term) -> R<()> {
        for (i, op) in region.ops.iter().enumerate() {
            let p = path.child(ri, i);
            if op.kind.is_terminator() {
                self.terminator(op, &p, term)?;
            } else {
                self.op(op, &p)?;
            }
        }
        Ok(())
    }

    fn terminator(&mut self, op: &Operation, path: &OpPath, term: &Term) -> R<()> {
        let vals = self.ns(&op.operands);
        match (op.kind, term) {
            (OpKind::Return, Term::Return) => match vals.len() {
                0 => {}
                1 => self.line(format!("return {};", vals[0])),
                _ => self.line(format!("return std::make_tuple({});", vals.join(", "))),
            },
            (OpKind::Yield | OpKind::KokkosYield, Term::Assign(dst)) if dst.len() == vals.len() => {
                for (d, v) in dst.iter().zip(&vals) {
                    self.line(format!("{d} = {v};"));
                }
            }
            (OpKind::Yield | OpKind::KokkosYield, Term::None) if vals.is_empty() => {}
            (OpKind::Reduce, Term::Reduce(accs)) if accs.len() == vals.len() => {
                for ((acc, kind), v) in accs.iter().zip(&vals) {
                    self.line(update(*kind, acc, v));
                }
            }
            _ => {
                return Err(unsupported(
                    path,
                    format!("unexpected terminator {}", op.kind),
                ))
            }
        }
        Ok(())
    }

    fn def(&mut self, op: &Operation, path: &OpPath, expr: String) -> R<()> {
        let r = op.results[0];
        let t = self.cty(r, path)?;
        self.line(format!("const {t} {} = {expr};", self.n(r)));
        Ok(())
    }

    fn op(&mut self, op: &Operation, path: &OpPath) -> R<()> {
        use OpKind::*;
        let o = self.ns(&op.operands);
        match op.kind {
            Constant => {
                if !self
                    .names
                    .get(&op.results[0])
                    .is_some_and(|n| !n.starts_with('v'))
                {
                    return Err(unsupported(path, "constant without a scalar literal"));
                }
            }
            AddI | AddF => self.def(op, path, format!("{} + {}", o[0], o[1]))?,
            SubI | SubF => self.def(op, path, format!("{} - {}", o[0], o[1]))?,
            MulI | MulF => self.def(op, path, format!("{} * {}", o[0], o[1]))?,
            DivI | DivF => self.def(op, path, format!("{} / {}", o[0], o[1]))?,
            RemI => self.def(op, path, format!("{} % {}", o[0], o[1]))?,
            NegF => self.def(op, path, format!("-{}", o[0]))?,
            MinSI | MaxSI => {
                let f = if op.kind == MinSI { "min" } else { "max" };
                let t = scalar_cty(self.scalar(op.results[0]));
                self.def(op, path, format!("Kokkos::{f}<{t}>({}, {})", o[0], o[1]))?
            }
            MinUI | MaxUI | MinimumF | MaximumF | CeilDivSI | ShLI => {
                let f = match op.kind {
                    MinUI => "minui",
                    MaxUI => "maxui",
                    MinimumF => "minimumf",
                    MaximumF => "maximumf",
                    CeilDivSI => "ceildivsi",
                    _ => "shli",
                };
                let t = scalar_cty(self.scalar(op.results[0]));
                self.def(op, path, format!("LAPIS::{f}<{t}>({}, {})", o[0], o[1]))?
            }
            CmpI | CmpF => {
                let pred = op
                    .attr("predicate")
                    .and_then(Attr::as_ident)
                    .and_then(CmpPredicate::from_keyword)
                    .ok_or_else(|| unsupported(path, "comparison without a predicate"))?;
                let (x, y) = (&o[0], &o[1]);
                let ut = unsigned_cty(self.scalar(op.operands[0]));
                let uc = |s: &str| format!("static_cast<{ut}>({s})");
                use CmpPredicate::*;
                let expr = match pred {
                    Eq | Oeq => format!("{x} == {y}"),
                    Ne => format!("{x} != {y}"),
                    One => format!("({x} < {y} || {x} > {y})"),
                    Slt | Olt => format!("{x} < {y}"),
                    Sle | Ole => format!("{x} <= {y}"),
                    Sgt | Ogt => format!("{x} > {y}"),
                    Sge | Oge => format!("{x} >= {y}"),
                    Ult => format!("{} < {}", uc(x), uc(y)),
                    Ule => format!("{} <= {}", uc(x), uc(y)),
                    Ugt => format!("{} > {}", uc(x), uc(y)),
                    Uge => format!("{} >= {}", uc(x), uc(y)),
                };
                self.def(op, path, expr)?
            }
            Select => self.def(op, path, format!("{} ? {} : {}", o[0], o[1], o[2]))?,
            IndexCast => {
                let t = scalar_cty(self.scalar(op.results[0]));
                self.def(op, path, format!("static_cast<{t}>({})", o[0]))?
            }
            Dim => {
                let v = self.view(op.operands[0]);
                self.def(
                    op,
                    path,
                    format!("static_cast<int64_t>({v}.extent({}))", o[1]),
                )?
            }
            Load => {
                let idx = self.ns(&op.operands[1..]).join(", ");
                let v = self.view(op.operands[0]);
                self.def(op, path, format!("{v}({idx})"))?
            }
            Store => {
                let idx = self.ns(&op.operands[2..]).join(", ");
                let v = self.view(op.operands[1]);
                self.line(format!("{v}({idx}) = {};", o[0]));
            }
            Alloc => {
                if self.kernel == Some(true) {
                    return Err(unsupported(path, "memref.alloc inside a device kernel"));
                }
                let r = op.results[0];
                let Type::MemRef(m) = self.ty(r).clone() else {
                    return Err(unsupported(path, "memref.alloc without a memref result"));
                };
                let name = self.n(r);
                let mut dynamic = op.operands.iter();
                let extents: Vec<String> = m
                    .shape
                    .iter()
                    .map(|d| match d {
                        crate::ir::Dim::Static(n) => n.to_string(),
                        crate::ir::Dim::Dynamic => {
                            self.n(*dynamic.next().expect("verified alloc operands"))
                        }
                    })
                    .collect();
                if self.kernel.is_some() {
                    // Views cannot be allocated inside a parallel region, so
                    // host-kernel scratch wraps a plain heap buffer.
                    let elem = scalar_cty(m.element);
                    let count = if extents.is_empty() {
                        "1".to_string()
                    } else {
                        extents.join(" * ")
                    };
                    self.line(format!(
                        "auto {name}_buf = std::make_unique<{elem}[]>({count});"
                    ));
                    let mut args = format!("{name}_buf.get()");
                    for e in &extents {
                        write!(args, ", {e}").unwrap();
                    }
                    self.line(format!(
                        "Kokkos::View<{}, Kokkos::LayoutRight, Kokkos::HostSpace, Kokkos::MemoryUnmanaged> {name}({args});",
                        data_type(&m)
                    ));
                    self.plain.insert(r);
                } else {
                    let t = memref_cty(&m, path)?;
                    let mut args = format!("\"{name}\"");
                    for e in &extents {
                        write!(args, ", {e}").unwrap();
                    }
                    self.line(format!("{t} {name}({args});"));
                }
            }
            Dealloc => {
                if self.kernel == Some(true) {
                    return Err(unsupported(path, "memref.dealloc inside a device kernel"));
                }
                let v = &o[0];
                self.line(format!("{v} = decltype({v})();"));
            }
            SubView => {
                let rank = (op.operands.len() - 1) / 2;
                let offs = &op.operands[1..1 + rank];
                let sizes = &op.operands[1 + rank..];
                let ranges: Vec<_> = offs
                    .iter()
                    .zip(sizes)
                    .map(|(&o, &s)| {
                        let o = self.n(o);
                        format!("Kokkos::pair<int64_t, int64_t>({o}, {o} + {})", self.n(s))
                    })
                    .collect();
                let src = op.operands[0];
                let r = op.results[0];
                let expr = if self.is_dual(src) && self.kernel.is_none() {
                    format!("{}.subview({})", self.n(src), ranges.join(", "))
                } else {
                    format!("Kokkos::subview({}, {})", self.view(src), ranges.join(", "))
                };
                if self.kernel.is_some() {
                    self.plain.insert(r);
                }
                self.line(format!("auto {} = {expr};", self.n(r)));
            }
            Cast | GetGlobal => {
                let r = op.results[0];
                let src = if op.kind == Cast {
                    let s = op.operands[0];
                    if self.kernel.is_some() {
                        self.plain.insert(r);
                        self.view(s)
                    } else {
                        self.n(s)
                    }
                } else {
                    let g = op.attr("name").and_then(Attr::as_symbol).unwrap_or("?");
                    global_var(g)
                };
                self.line(format!("auto {} = {src};", self.n(r)));
            }
            Copy => {
                if self.kernel == Some(true) {
                    return Err(unsupported(path, "memref.copy inside a device kernel"));
                }
                let (src, dst) = (self.view(op.operands[0]), self.view(op.operands[1]));
                self.line(format!("Kokkos::deep_copy({dst}, {src});"));
            }
            Call => {
                let callee = op.attr("callee").and_then(Attr::as_symbol).unwrap_or("?");
                let call = format!("{}({})", sanitize(callee), self.ns(&op.operands).join(", "));
                match op.results.len() {
                    0 => self.line(format!("{call};")),
                    1 => self.line(format!("auto {} = {call};", self.n(op.results[0]))),
                    _ => self.line(format!(
                        "auto [{}] = {call};",
                        self.ns(&op.results).join(", ")
                    )),
                }
            }
            For => self.for_loop(op, path)?,
            If => self.if_op(op, path)?,
            RangeParallel | TeamParallel | ThreadParallel => self.kokkos_loop(op, path)?,
            Single => {
                let level = match op.single_level() {
                    Some(SingleLevel::PerThread) => "Kokkos::PerThread(team)",
                    _ => "Kokkos::PerTeam(team)",
                };
                match op.results.as_slice() {
                    [] => {
                        self.line(format!("Kokkos::single({level}, [&]() {{"));
                        self.nested(&op.regions[0], path, &Term::None)?;
                        self.line("});");
                    }
                    [r] => {
                        let t = self.cty(*r, path)?;
                        let name = self.n(*r);
                        self.line(format!("{t} {name};"));
                        self.line(format!("Kokkos::single({level}, [&]({t}& out) {{"));
                        self.nested(&op.regions[0], path, &Term::Assign(vec!["out".into()]))?;
                        self.line(format!("}}, {name});"));
                    }
                    rs => {
                        // Broadcast through a plain aggregate.
                        let name = self.n(rs[0]);
                        let mut fields = Vec::new();
                        for (k, &r) in rs.iter().enumerate() {
                            fields.push(format!("{} r{k};", self.cty(r, path)?));
                        }
                        self.line(format!("struct {name}_t {{ {} }};", fields.join(" ")));
                        self.line(format!("{name}_t {name}_s;"));
                        self.line(format!("Kokkos::single({level}, [&]({name}_t& out) {{"));
                        let outs = (0..rs.len()).map(|k| format!("out.r{k}")).collect();
                        self.nested(&op.regions[0], path, &Term::Assign(outs))?;
                        self.line(format!("}}, {name}_s);"));
                        for (k, &r) in rs.iter().enumerate() {
                            let t = self.cty(r, path)?;
                            self.line(format!("const {t} {} = {name}_s.r{k};", self.n(r)));
                        }
                    }
                }
            }
            TeamBarrier => self.line("team.team_barrier();"),
            Sync | Modify => {
                let m = op.operands[0];
                if !self.is_dual(m) {
                    return Err(unsupported(
                        path,
                        format!("{} on a memref that is not a dualview", op.kind),
                    ));
                }
                let call = match (op.kind, op.target_space()) {
                    (Sync, Some(ExecSpace::Device)) => "syncDevice",
                    (Sync, _) => "syncHost",
                    (_, Some(ExecSpace::Device)) => "modifyDevice",
                    _ => "modifyHost",
                };
                self.line(format!("{}.{call}();", self.n(m)));
            }
            Gemm | Gemv => {
                let f = if op.kind == Gemm {
                    "lapis_gemm"
                } else {
                    "lapis_gemv"
                };
                self.line(format!("{f}({});", self.ns(&op.operands).join(", ")));
            }
            Parallel | Matmul | Matvec | BatchMatmul | Fill | Elementwise | LinalgReduce
            | SpmvCsr => return Err(unsupported(path, format!("unlowered op {}", op.kind))),
            Global | Func | Yield | Reduce | ReduceReturn | Return | KokkosYield => {
                return Err(unsupported(path, format!("misplaced op {}", op.kind)))
            }
        }
        Ok(())
    }

    /// Body of an op's first region, one level deeper.
    fn nested(&mut self, region: &Region, path: &OpPath, term: &Term) -> R<()> {
        self.indent += 1;
        self.block(region, path, 0, term)?;
        self.indent -= 1;
        Ok(())
    }

    /// Bind a policy object to a fresh name.
    fn policy(&mut self, expr: &str) -> String {
        let name = format!("policy{}", self.policies);
        self.policies += 1;
        self.line(format!("const auto {name} = {expr};"));
        name
    }

    fn iv(&mut self, v: ValueId) -> String {
        let name = format!("i{}", self.depth);
        self.depth += 1;
        self.names.insert(v, name.clone());
        name
    }

    fn for_loop(&mut self, op: &Operation, path: &OpPath) -> R<()> {
        let region = &op.regions[0];
        let (lo, hi, st) = (
            self.n(op.operands[0]),
            self.n(op.operands[1]),
            self.n(op.operands[2]),
        );
        let results = self.ns(&op.results);
        for (&r, init) in op.results.iter().zip(&op.operands[3..]) {
            let t = self.cty(r, path)?;
            self.line(format!("{t} {} = {};", self.n(r), self.n(*init)));
        }
        let saved = self.depth;
        let i = self.iv(region.args[0]);
        self.line(format!(
            "for (int64_t {i} = {lo}; {i} < {hi}; {i} += {st}) {{"
        ));
        self.indent += 1;
        for (&arg, res) in region.args[1..].iter().zip(&results) {
            let t = self.cty(arg, path)?;
            self.line(format!("const {t} {} = {res};", self.n(arg)));
        }
        self.block(region, path, 0, &Term::Assign(results))?;
        self.indent -= 1;
        self.line("}");
        self.depth = saved;
        Ok(())
    }

    fn if_op(&mut self, op: &Operation, path: &OpPath) -> R<()> {
        let results = self.ns(&op.results);
        for &r in &op.results {
            let t = self.cty(r, path)?;
            self.line(format!("{t} {};", self.n(r)));
        }
        let term = Term::Assign(results);
        self.line(format!("if ({}) {{", self.n(op.operands[0])));
        self.indent += 1;
        self.block(&op.regions[0], path, 0, &term)?;
        self.indent -= 1;
        let else_region = &op.regions[1];
        let trivial = op.results.is_empty()
            && else_region.ops.len() == 1
            && else_region.ops[0].operands.is_empty();
        if !trivial {
            self.line("} else {");
            self.indent += 1;
            self.block(else_region, path, 1, &term)?;
            self.indent -= 1;
        }
        self.line("}");
        Ok(())
    }

    /// Dual views used inside `op` but defined outside it, in first-use order.
    fn captured_duals(&self, op: &Operation) -> Vec<ValueId> {
        let mut inside = HashSet::new();
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for region in &op.regions {
            walk_region(region, &mut |o| {
                inside.extend(o.results.iter().copied());
                for r in &o.regions {
                    inside.extend(r.args.iter().copied());
                }
            });
            inside.extend(region.args.iter().copied());
        }
        for region in &op.regions {
            walk_region(region, &mut |o| {
                for &v in &o.operands {
                    if !inside.contains(&v) && self.is_dual(v) && seen.insert(v) {
                        out.push(v);
                    }
                }
            });
        }
        out
    }

    fn kokkos_loop(&mut self, op: &Operation, path: &OpPath) -> R<()> {
        let layout = op
            .loop_layout()
            .ok_or_else(|| unsupported(path, format!("malformed {}", op.kind)))?;
        let region = &op.regions[0];
        let top = self.kernel.is_none();
        let device = match self.kernel {
            Some(d) => d,
            None => op.exec_space() != Some(ExecSpace::Host),
        };
        let mut kinds = Vec::new();
        for k in op.reduction_combiners() {
            kinds.push(k.ok_or_else(|| unsupported(path, "unrecognized reduction combiner"))?);
        }
        if kinds.len() != op.results.len() {
            return Err(unsupported(
                path,
                "reduction results and combiners disagree",
            ));
        }
        let nested_reduce = !top || op.kind == OpKind::ThreadParallel;
        if nested_reduce && kinds.len() > 1 {
            return Err(unsupported(path, "nested loop with several reductions"));
        }
        let mut reducers = Vec::new();
        for (&r, kind) in op.results.iter().zip(&kinds) {
            let t = self.cty(r, path)?;
            let name = self.n(r);
            self.line(format!("{t} {name};"));
            reducers.push(format!("{}<{t}>({name})", reducer(*kind)));
        }
        if top {
            // Scope the view aliases to this launch.
            self.line("{");
            self.indent += 1;
            for v in self.captured_duals(op) {
                let (name, side) = (self.n(v), if device { "d" } else { "h" });
                self.line(format!("auto {name}_{side} = {name}.{side}_view;"));
            }
            self.kernel = Some(device);
        }
        let saved = self.depth;
        let d = self.depth;
        let acc_types: Vec<String> = op
            .results
            .iter()
            .map(|&r| scalar_cty(self.scalar(r)).to_string())
            .collect();
        let accs: Vec<String> = (0..kinds.len()).map(|k| format!("r{d}_{k}")).collect();
        let acc_params: String = acc_types
            .iter()
            .zip(&accs)
            .map(|(t, a)| format!(", {t}& {a}"))
            .collect();
        let launch = if kinds.is_empty() {
            "parallel_for"
        } else {
            "parallel_reduce"
        };
        let closing = if reducers.is_empty() {
            "});".to_string()
        } else {
            format!("}}, {});", reducers.join(", "))
        };
        let space = if device {
            "LAPIS::ExecSpace"
        } else {
            "LAPIS::HostExecSpace"
        };
        let member = if device {
            "LAPIS::TeamMember"
        } else {
            "LAPIS::HostTeamMember"
        };
        let ubs = self.ns(&op.operands[layout.upper..layout.upper + layout.rank]);
        let term_accs = if kinds.is_empty() {
            Term::None
        } else {
            Term::Reduce(accs.iter().cloned().zip(kinds.iter().copied()).collect())
        };

        match op.kind {
            OpKind::RangeParallel => {
                let level = op.parallel_level().unwrap_or(ParallelLevel::TopRange);
                let ivs: Vec<String> = region.args.iter().map(|&a| self.iv(a)).collect();
                let params: Vec<String> =
                    ivs.iter().map(|i| format!("const int64_t {i}")).collect();
                let params = params.join(", ");
                let (policy, lambda) = match level {
                    ParallelLevel::TopRange | ParallelLevel::TopMdRange if ubs.len() == 1 => (
                        format!("Kokkos::RangePolicy<{space}>(0, {})", ubs[0]),
                        "KOKKOS_LAMBDA",
                    ),
                    ParallelLevel::TopRange | ParallelLevel::TopMdRange => (
                        format!(
                            "Kokkos::MDRangePolicy<{space}, Kokkos::Rank<{}>, Kokkos::IndexType<int64_t>>({{{}}}, {{{}}})",
                            ubs.len(),
                            vec!["0"; ubs.len()].join(", "),
                            ubs.join(", ")
                        ),
                        "KOKKOS_LAMBDA",
                    ),
                    ParallelLevel::TeamThread | ParallelLevel::ThreadVector => {
                        if ubs.len() != 1 {
                            return Err(unsupported(path, "multi-dimensional nested range"));
                        }
                        let range = if level == ParallelLevel::TeamThread {
                            "TeamThreadRange"
                        } else {
                            "ThreadVectorRange"
                        };
                        (format!("Kokkos::{range}(team, {})", ubs[0]), "[&]")
                    }
                };
                let pv = self.policy(&policy);
                self.line(format!(
                    "Kokkos::{launch}({pv}, {lambda}({params}{acc_params}) {{"
                ));
                self.nested(region, path, &term_accs)?;
                self.line(closing);
            }
            OpKind::TeamParallel => {
                let league = self.iv(region.args[0]);
                self.names.insert(region.args[1], "team".into());
                let ts = match op.team_size_hint() {
                    Some(v) => self.n(v),
                    None => "Kokkos::AUTO()".into(),
                };
                let vl = op
                    .vector_length_hint()
                    .map(|v| format!(", {}", self.n(v)))
                    .unwrap_or_default();
                let pv = self.policy(&format!(
                    "Kokkos::TeamPolicy<{space}>({}, {ts}{vl})",
                    ubs[0]
                ));
                self.line(format!(
                    "Kokkos::{launch}({pv}, KOKKOS_LAMBDA(const {member}& team{acc_params}) {{"
                ));
                self.indent += 1;
                self.line(format!("const int64_t {league} = team.league_rank();"));
                self.block(region, path, 0, &term_accs)?;
                self.indent -= 1;
                self.line(closing);
            }
            OpKind::ThreadParallel => {
                let vl = op.vector_length_hint().map(|v| self.n(v));
                let i = self.iv(region.args[0]);
                self.line(format!("const int64_t n{d} = {};", ubs[0]));
                self.line(format!(
                    "const int64_t ts{d} = LAPIS::thread_team_size({});",
                    vl.as_deref().unwrap_or("1")
                ));
                let vl_arg = vl.map(|v| format!(", {v}")).unwrap_or_default();
                let pv = self.policy(&format!(
                    "Kokkos::TeamPolicy<{space}>((n{d} + ts{d} - 1) / ts{d}, ts{d}{vl_arg})"
                ));
                self.line(format!(
                    "Kokkos::{launch}({pv}, KOKKOS_LAMBDA(const {member}& team{acc_params}) {{"
                ));
                self.indent += 1;
                let term = if kinds.is_empty() {
                    self.line(format!(
                        "Kokkos::parallel_for(Kokkos::TeamThreadRange(team, ts{d}), [&](const int64_t t{d}) {{"
                    ));
                    Term::None
                } else {
                    let t = &acc_types[0];
                    self.line(format!("{t} p{d};"));
                    self.line(format!(
                        "Kokkos::parallel_reduce(Kokkos::TeamThreadRange(team, ts{d}), [&](const int64_t t{d}, {t}& q{d}) {{"
                    ));
                    Term::Reduce(vec![(format!("q{d}"), kinds[0])])
                };
                self.indent += 1;
                self.line(format!(
                    "const int64_t {i} = team.league_rank() * ts{d} + t{d};"
                ));
                self.line(format!("if ({i} < n{d}) {{"));
                self.nested(region, path, &term)?;
                self.line("}");
                self.indent -= 1;
                if kinds.is_empty() {
                    self.line("});");
                } else {
                    let t = &acc_types[0];
                    self.line(format!("}}, {}<{t}>(p{d}));", reducer(kinds[0])));
                    let fold = update(kinds[0], &accs[0], &format!("p{d}"));
                    self.line(format!(
                        "Kokkos::single(Kokkos::PerTeam(team), [&]() {{ {fold} }});"
                    ));
                }
                self.indent -= 1;
                self.line(closing);
            }
            _ => unreachable!("kokkos_loop called on {}", op.kind),
        }
        self.depth = saved;
        if top {
            self.kernel = None;
            self.indent -= 1;
            self.line("}");
        }
        // Kokkos reducers start from the identity; fold in the init values.
        let inits = &op.operands[layout.inits..layout.inits + layout.n_inits];
        for ((&r, &init), kind) in op.results.iter().zip(inits).zip(&kinds) {
            if self.is_identity(init, *kind) {
                continue;
            }
            let (name, iv) = (self.n(r), self.n(init));
            let s = match kind {
                CombinerKind::Add => format!("{name} = {iv} + {name};"),
                CombinerKind::Mul => format!("{name} = {iv} * {name};"),
                CombinerKind::Min => format!("if ({iv} < {name}) {name} = {iv};"),
                CombinerKind::Max => format!("if ({name} < {iv}) {name} = {iv};"),
            };
            self.line(s);
        }
        Ok(())
    }

    fn is_identity(&self, v: ValueId, kind: CombinerKind) -> bool {
        let lit = self.n(v);
        let t = self.scalar(v);
        let want = match kind {
            CombinerKind::Add => 0.0,
            CombinerKind::Mul => 1.0,
            _ => return false,
        };
        lit == scalar_literal(&Attr::Float(want), t).unwrap_or_default()
            || lit == scalar_literal(&Attr::Int(want as i64), t).unwrap_or_default()
    }
}
