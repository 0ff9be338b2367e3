use std::collections::BTreeMap;
use std::fmt;

use super::{
    lower_dense_linalg, lower_linalg_to_kernels, lower_spmv_csr, manage_dualviews, map_loops,
    normalize_loops, PassResult, TargetConfig,
};
use crate::ir::{verify, Diagnostic, Program};
use crate::textio::print;

pub const PRESET_NAME: &str = "sparse-compiler-kokkos";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassKind {
    LowerSpmvCsr,
    LowerLinalgToKernels,
    LowerDenseLinalg,
    NormalizeLoops,
    MapLoops,
    ManageDualviews,
}

impl PassKind {
    pub const PRESET: [PassKind; 6] = [
        PassKind::LowerSpmvCsr,
        PassKind::LowerLinalgToKernels,
        PassKind::LowerDenseLinalg,
        PassKind::NormalizeLoops,
        PassKind::MapLoops,
        PassKind::ManageDualviews,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PassKind::LowerSpmvCsr => "lower-spmv-csr",
            PassKind::LowerLinalgToKernels => "linalg-to-kokkoskernels",
            PassKind::LowerDenseLinalg => "dense-linalg-to-parallel-loops",
            PassKind::NormalizeLoops => "normalize-loops",
            PassKind::MapLoops => "kokkos-loop-mapping",
            PassKind::ManageDualviews => "kokkos-dualview-management",
        }
    }

    /// Accepts the dashed names and the snake_case function names.
    pub fn from_name(s: &str) -> Option<PassKind> {
        Some(match s {
            "lower-spmv-csr" | "lower_spmv_csr" => PassKind::LowerSpmvCsr,
            "linalg-to-kokkoskernels" | "lower_linalg_to_kernels" => PassKind::LowerLinalgToKernels,
            "dense-linalg-to-parallel-loops" | "lower_dense_linalg" => PassKind::LowerDenseLinalg,
            "normalize-loops" | "normalize_loops" => PassKind::NormalizeLoops,
            "kokkos-loop-mapping" | "map_loops" => PassKind::MapLoops,
            "kokkos-dualview-management" | "manage_dualviews" => PassKind::ManageDualviews,
            _ => return None,
        })
    }

    pub fn run(self, program: &mut Program, config: &TargetConfig) -> PassResult {
        match self {
            PassKind::LowerSpmvCsr => lower_spmv_csr(program),
            PassKind::LowerLinalgToKernels => lower_linalg_to_kernels(program, config),
            PassKind::LowerDenseLinalg => lower_dense_linalg(program),
            PassKind::NormalizeLoops => normalize_loops(program),
            PassKind::MapLoops => map_loops(program, config),
            PassKind::ManageDualviews => manage_dualviews(program, config),
        }
    }
}

impl fmt::Display for PassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError {
    #[error("unknown pass `{0}`")]
    UnknownPass(String),
    #[error("unknown option `{option}` for `{pass}`")]
    UnknownOption { pass: String, option: String },
    #[error("bad value `{value}` for option `{option}`")]
    BadValue { option: String, value: String },
    #[error("malformed pipeline: {0}")]
    Syntax(String),
}

/// Ordered passes, each with `name{opt=val}` options.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PassPipeline {
    pub passes: Vec<(PassKind, BTreeMap<String, String>)>,
}

const OPTIONS: [&str; 3] = [
    "max-vector-length",
    "kernel-library-calls",
    "single-memory-space",
];

impl PassPipeline {
    pub fn preset() -> Self {
        PassPipeline {
            passes: PassKind::PRESET
                .iter()
                .map(|&k| (k, BTreeMap::new()))
                .collect(),
        }
    }

    pub fn parse(spec: &str) -> Result<Self, PipelineError> {
        let mut passes = Vec::new();
        for item in split_top(spec)? {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            let (name, opts) = match item.find('{') {
                Some(i) => {
                    let body = item[i + 1..].strip_suffix('}').ok_or_else(|| {
                        PipelineError::Syntax(format!("unclosed options in `{item}`"))
                    })?;
                    (item[..i].trim(), parse_options(item[..i].trim(), body)?)
                }
                None => (item, BTreeMap::new()),
            };
            if name == PRESET_NAME {
                passes.extend(PassKind::PRESET.iter().map(|&k| (k, opts.clone())));
            } else {
                let kind = PassKind::from_name(name)
                    .ok_or_else(|| PipelineError::UnknownPass(name.to_string()))?;
                passes.push((kind, opts));
            }
        }
        Ok(PassPipeline { passes })
    }

    pub fn to_spec(&self) -> String {
        let items: Vec<String> = self
            .passes
            .iter()
            .map(|(k, opts)| {
                if opts.is_empty() {
                    k.name().to_string()
                } else {
                    let o: Vec<String> = opts.iter().map(|(a, b)| format!("{a}={b}")).collect();
                    format!("{}{{{}}}", k.name(), o.join(","))
                }
            })
            .collect();
        items.join(",")
    }
}

fn split_top(spec: &str) -> Result<Vec<&str>, PipelineError> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in spec.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth < 0 {
                    return Err(PipelineError::Syntax("unbalanced `}`".into()));
                }
            }
            ',' if depth == 0 => {
                out.push(&spec[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(PipelineError::Syntax("unbalanced `{`".into()));
    }
    out.push(&spec[start..]);
    Ok(out)
}

fn parse_options(pass: &str, body: &str) -> Result<BTreeMap<String, String>, PipelineError> {
    let mut out = BTreeMap::new();
    for kv in body
        .split([',', ' '])
        .map(str::trim)
        .filter(|s| !s.is_empty())
    {
        let (k, v) = kv.split_once('=').unwrap_or((kv, "true"));
        if !OPTIONS.contains(&k) {
            return Err(PipelineError::UnknownOption {
                pass: pass.to_string(),
                option: k.to_string(),
            });
        }
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

fn parse_bool(option: &str, v: &str) -> Result<bool, PipelineError> {
    match v {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(PipelineError::BadValue {
            option: option.to_string(),
            value: v.to_string(),
        }),
    }
}

/// Overlay pass options onto a base configuration.
pub fn apply_options(
    base: &TargetConfig,
    opts: &BTreeMap<String, String>,
) -> Result<TargetConfig, PipelineError> {
    let mut c = base.clone();
    for (k, v) in opts {
        match k.as_str() {
            "max-vector-length" => {
                c.max_vector_length = v.parse().map_err(|_| PipelineError::BadValue {
                    option: k.clone(),
                    value: v.clone(),
                })?;
            }
            "kernel-library-calls" => c.kernel_library_calls = parse_bool(k, v)?,
            "single-memory-space" => c.separate_device_memory = !parse_bool(k, v)?,
            _ => {
                return Err(PipelineError::UnknownOption {
                    pass: String::new(),
                    option: k.clone(),
                })
            }
        }
    }
    c.validate().map_err(|msg| PipelineError::BadValue {
        option: "max-vector-length".into(),
        value: msg,
    })?;
    Ok(c)
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub program: Program,
    /// (pass name, canonical print after that pass).
    pub snapshots: Vec<(String, String)>,
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("pass {pass} failed: {}", .diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
pub struct PipelineFailure {
    pub pass: String,
    pub diagnostics: Vec<Diagnostic>,
    pub snapshots: Vec<(String, String)>,
}

/// Run each pass in order, verifying after each one.
pub fn run_pipeline(
    program: &Program,
    pipeline: &PassPipeline,
    config: &TargetConfig,
) -> Result<PipelineOutput, PipelineFailure> {
    let mut program = program.clone();
    let mut snapshots = Vec::new();
    for (kind, opts) in &pipeline.passes {
        let fail =
            |diagnostics: Vec<Diagnostic>, snapshots: &Vec<(String, String)>| PipelineFailure {
                pass: kind.name().to_string(),
                diagnostics,
                snapshots: snapshots.clone(),
            };
        let cfg = apply_options(config, opts)
            .map_err(|e| fail(vec![Diagnostic::new(e.to_string())], &snapshots))?;
        kind.run(&mut program, &cfg)
            .map_err(|d| fail(d, &snapshots))?;
        let diags = verify(&program);
        if !diags.is_empty() {
            return Err(fail(diags, &snapshots));
        }
        snapshots.push((kind.name().to_string(), print(&program)));
    }
    Ok(PipelineOutput { program, snapshots })
}
