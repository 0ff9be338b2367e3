//! `lapis`: optimizer, translator and interpreter front end.
//!
//! Invoked as `lapis-opt` or `lapis-translate` (by symlink or copy) the
//! matching subcommand is implied.

use std::io::{IsTerminal, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lapis_core::emitter::{emit, emit_runtime_header, EmitOptions};
use lapis_core::interp::{diff_outputs, run, ExecConfig, InterpError, RtValue, Tensor};
use lapis_core::ir::{Program, Type};
use lapis_core::passes::{run_pipeline, PassPipeline, TargetConfig};
use lapis_core::textio::{parse_with, print, ParseOptions};

#[derive(Parser)]
#[command(name = "lapis", version, about = "Lower linalg/scf IR to Kokkos C++")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a pass pipeline and print canonical IR.
    #[command(alias = "lapis-opt")]
    Opt(OptArgs),
    /// Emit C++ from fully lowered IR.
    #[command(alias = "lapis-translate")]
    Translate(TranslateArgs),
    /// Interpret a function on tensor arguments.
    Run(RunArgs),
}

#[derive(Args)]
struct Target {
    #[arg(long, value_name = "N")]
    max_vector_length: Option<i64>,
    #[arg(long)]
    kernel_library_calls: bool,
    /// Host and device share memory: no syncs are inserted or performed.
    #[arg(long)]
    single_memory_space: bool,
}

impl Target {
    fn config(&self) -> Result<TargetConfig, CliError> {
        let mut c = TargetConfig::default();
        if let Some(n) = self.max_vector_length {
            c.max_vector_length = n;
        }
        c.kernel_library_calls = self.kernel_library_calls;
        c.separate_device_memory = !self.single_memory_space;
        c.validate().map_err(CliError::Usage)?;
        Ok(c)
    }
}

#[derive(Args)]
struct OptArgs {
    input: Option<PathBuf>,
    #[arg(short, value_name = "PATH")]
    o: Option<PathBuf>,
    /// Comma-separated passes, each with optional `{key=value}` options.
    #[arg(long, value_name = "SPEC", conflicts_with = "sparse_compiler_kokkos")]
    pipeline: Option<String>,
    /// The full lowering preset.
    #[arg(long)]
    sparse_compiler_kokkos: bool,
    #[arg(long)]
    print_after_each: bool,
    #[command(flatten)]
    target: Target,
}

#[derive(Args)]
struct TranslateArgs {
    input: Option<PathBuf>,
    #[arg(short, value_name = "PATH")]
    o: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    emit_runtime_header: Option<PathBuf>,
    /// Call the kernel library for gemm/gemv instead of the bundled fallbacks.
    #[arg(long)]
    kernel_library_calls: bool,
    /// Skip `lapis_initialize`/`lapis_finalize`.
    #[arg(long)]
    no_init_finalize: bool,
}

#[derive(Args)]
struct RunArgs {
    input: Option<PathBuf>,
    #[arg(short, value_name = "PATH")]
    o: Option<PathBuf>,
    #[arg(long)]
    entry: Option<String>,
    /// One `shape: [..] data: [..]` line per parameter; `#` starts a comment.
    #[arg(long, value_name = "PATH")]
    args: Option<PathBuf>,
    #[arg(long)]
    trace: bool,
    /// Run this program too and report whether the outputs agree.
    #[arg(long, value_name = "PATH")]
    compare_against: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-12)]
    rel_tol: f64,
    #[arg(long)]
    single_memory_space: bool,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    /// Already formatted, one per line.
    #[error("{}", .0.join("\n"))]
    Diagnostics(Vec<String>),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Diagnostics(_) | CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

type R<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let mut argv: Vec<String> = std::env::args().collect();
    let invoked = argv
        .first()
        .and_then(|a| Path::new(a).file_stem())
        .and_then(|s| s.to_str())
        .unwrap_or("");
    match invoked {
        "lapis-opt" => argv.insert(1, "opt".into()),
        "lapis-translate" => argv.insert(1, "translate".into()),
        _ => {}
    }
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Opt(a) => opt(a),
        Command::Translate(a) => translate(a),
        Command::Run(a) => run_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            if let CliError::Usage(_) = e {
                eprintln!("run `lapis --help` for usage");
            }
            ExitCode::from(e.code())
        }
    }
}

fn read_input(path: &Option<PathBuf>) -> R<String> {
    match path {
        Some(p) => {
            std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
        }
        None => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| CliError::Io(format!("<stdin>: {e}")))?;
            Ok(s)
        }
    }
}

fn load(path: &Option<PathBuf>) -> R<Program> {
    let text = read_input(path)?;
    let base_dir = path
        .as_ref()
        .and_then(|p| p.parent())
        .map(Path::to_path_buf);
    parse_with(&text, &ParseOptions { base_dir })
        .map_err(|errs| CliError::Diagnostics(errs.iter().map(ToString::to_string).collect()))
}

fn write_output(path: &Option<PathBuf>, text: &str) -> R<()> {
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(format!("<stdout>: {e}")))
        }
    }
}

fn opt(a: OptArgs) -> R<()> {
    let pipeline = if a.sparse_compiler_kokkos {
        PassPipeline::preset()
    } else {
        match &a.pipeline {
            Some(spec) => PassPipeline::parse(spec).map_err(|e| CliError::Usage(e.to_string()))?,
            None => PassPipeline::default(),
        }
    };
    let config = a.target.config()?;
    let program = load(&a.input)?;
    let snapshots_text = |snaps: &[(String, String)]| -> String {
        snaps
            .iter()
            .map(|(pass, text)| format!("// ----- after {pass}\n{text}"))
            .collect()
    };
    match run_pipeline(&program, &pipeline, &config) {
        Ok(out) => {
            let text = if a.print_after_each {
                snapshots_text(&out.snapshots)
            } else {
                print(&out.program)
            };
            write_output(&a.o, &text)
        }
        Err(fail) => {
            if a.print_after_each {
                write_output(&a.o, &snapshots_text(&fail.snapshots))?;
            }
            let lines = fail
                .diagnostics
                .iter()
                .map(|d| format!("{d} [{}]", fail.pass))
                .collect();
            Err(CliError::Diagnostics(lines))
        }
    }
}

/// Header stem from the output path; `lapis_module` for stdout.
fn header_name(o: &Option<PathBuf>) -> String {
    let Some(stem) = o
        .as_ref()
        .and_then(|p| p.file_stem())
        .and_then(|s| s.to_str())
    else {
        return "lapis_module".into();
    };
    let mut name: String = stem
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if !name.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') {
        name.insert(0, '_');
    }
    name
}

fn translate(a: TranslateArgs) -> R<()> {
    let options = EmitOptions {
        emit_init_finalize: !a.no_init_finalize,
        header_name: header_name(&a.o),
        kernel_library_headers: a.kernel_library_calls,
        ..Default::default()
    };
    if let Some(path) = &a.emit_runtime_header {
        write_output(&Some(path.clone()), &emit_runtime_header(&options))?;
        if a.input.is_none() && std::io::stdin().is_terminal() {
            return Ok(());
        }
    }
    let program = load(&a.input)?;
    let out = emit(&program, &options).map_err(|e| CliError::Diagnostics(vec![e.to_string()]))?;
    let dir =
        a.o.as_ref()
            .and_then(|p| p.parent())
            .map(Path::to_path_buf)
            .unwrap_or_default();
    for s in &out.sidecars {
        let p = dir.join(&s.name);
        std::fs::write(&p, &s.bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    }
    write_output(&a.o, &out.source)
}

/// One value per non-comment line, typed by the entry's parameters.
fn parse_args(text: &str, params: &[Type]) -> R<Vec<RtValue>> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if lines.len() != params.len() {
        return Err(CliError::Usage(format!(
            "entry takes {} arguments but the args file has {}",
            params.len(),
            lines.len()
        )));
    }
    lines
        .iter()
        .zip(params)
        .map(|(&(line, l), ty)| {
            let bad = |m: String| CliError::Usage(format!("args line {line}: {m}"));
            match ty {
                Type::Scalar(s) => {
                    let t = Tensor::parse_text(*s, l).map_err(bad)?;
                    if !t.shape.is_empty() {
                        return Err(bad("scalar parameter needs `shape: []`".into()));
                    }
                    Ok(RtValue::Scalar(*s, t.data[0]))
                }
                Type::MemRef(m) => Ok(RtValue::Tensor(
                    Tensor::parse_text(m.element, l).map_err(bad)?,
                )),
                Type::Team => Err(bad("team handles cannot be passed".into())),
            }
        })
        .collect()
}

fn entry_name(program: &Program, entry: &Option<String>) -> R<String> {
    if let Some(e) = entry {
        return Ok(e.clone());
    }
    let names: Vec<&str> = program.funcs().filter_map(|f| f.sym_name()).collect();
    match names.as_slice() {
        [one] => Ok(one.to_string()),
        _ => Err(CliError::Usage(format!(
            "--entry is required when the module has {} functions",
            names.len()
        ))),
    }
}

fn interp_error(e: InterpError) -> CliError {
    match e {
        InterpError::UnknownFunction(_) | InterpError::Signature(_) => {
            CliError::Usage(e.to_string())
        }
        _ => CliError::Diagnostics(vec![e.to_string()]),
    }
}

fn run_cmd(a: RunArgs) -> R<()> {
    let program = load(&a.input)?;
    let entry = entry_name(&program, &a.entry)?;
    let func = program
        .func(&entry)
        .ok_or_else(|| CliError::Usage(format!("no function @{entry}")))?;
    let params: Vec<Type> = func.regions[0]
        .args
        .iter()
        .map(|&v| program.ty(v).clone())
        .collect();
    let args_text = match &a.args {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let args = parse_args(&args_text, &params)?;
    let config = ExecConfig {
        separate_device_memory: !a.single_memory_space,
        ..Default::default()
    };
    let result = run(&program, &entry, &args, &config).map_err(interp_error)?;

    let mut text = String::new();
    for (i, v) in result.returns.iter().enumerate() {
        text += &format!("# result {i}\n{v}\n");
    }
    let memref_params = params
        .iter()
        .enumerate()
        .filter(|(_, t)| matches!(t, Type::MemRef(_)));
    for ((i, _), v) in memref_params.zip(&result.arguments) {
        text += &format!("# argument {i}\n{v}\n");
    }
    if a.trace {
        text += "# trace\n";
        text += &result.trace.to_text();
    }
    let mut mismatch = None;
    if let Some(other_path) = &a.compare_against {
        let other = load(&Some(other_path.clone()))?;
        let reference = run(&other, &entry, &args, &config).map_err(interp_error)?;
        let report = diff_outputs(&reference.outputs(), &result.outputs(), a.rel_tol);
        text += &format!("# compare: {report}\n");
        if !report.is_match() {
            mismatch = Some(report.to_string());
        }
    }
    write_output(&a.o, &text)?;
    match mismatch {
        Some(m) => Err(CliError::Diagnostics(vec![m])),
        None => Ok(()),
    }
}
