//! Kokkos C++ emission for fully lowered programs, plus the fixed
//! dual-view runtime header the generated code includes.

mod cxx;

use crate::ir::{OpKind, OpPath, Program};

/// File name the generated source includes.
pub const RUNTIME_HEADER_NAME: &str = "lapis_dualview_runtime.hpp";

const RUNTIME_HEADER: &str = include_str!("lapis_dualview_runtime.hpp");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmitOptions {
    pub emit_init_finalize: bool,
    /// Stem of the generated header, e.g. `spmv` for `spmv.hpp`.
    pub header_name: String,
    /// Route gemm/gemv through the kernel library instead of the
    /// portable fallbacks in the runtime header.
    pub kernel_library_headers: bool,
    /// Globals with more payload bytes than this are written as sidecar
    /// blobs and loaded at initialization.
    pub sidecar_threshold: usize,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions {
            emit_init_finalize: true,
            header_name: "lapis_module".into(),
            kernel_library_headers: false,
            sidecar_threshold: 64 * 1024,
        }
    }
}

impl EmitOptions {
    pub fn validate(&self) -> Result<(), EmitError> {
        let mut chars = self.header_name.chars();
        let ok = chars
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if ok {
            Ok(())
        } else {
            Err(EmitError::BadHeaderName(self.header_name.clone()))
        }
    }
}

/// Constant payload moved out of the generated source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sidecar {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmitResult {
    pub source: String,
    /// C++ signatures of the emitted functions, in program order.
    pub signatures: Vec<String>,
    pub sidecars: Vec<Sidecar>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmitError {
    #[error("invalid header name `{0}`")]
    BadHeaderName(String),
    #[error("program does not verify: {0}")]
    Invalid(String),
    #[error("op {path}: {message}")]
    Unsupported { path: OpPath, message: String },
}

impl EmitError {
    pub fn path(&self) -> Option<&OpPath> {
        match self {
            EmitError::Unsupported { path, .. } => Some(path),
            _ => None,
        }
    }
}

pub fn emit(program: &Program, options: &EmitOptions) -> Result<EmitResult, EmitError> {
    options.validate()?;
    if let Some(d) = crate::ir::verify(program).into_iter().next() {
        return Err(EmitError::Invalid(d.to_string()));
    }
    let mut residual = None;
    crate::ir::walk(program, |path, op| {
        let high_level =
            op.kind == OpKind::Parallel || op.kind.is_linalg() || op.kind == OpKind::SpmvCsr;
        if high_level && residual.is_none() {
            residual = Some(EmitError::Unsupported {
                path: path.clone(),
                message: format!("unlowered op {}", op.kind),
            });
        }
    });
    if let Some(e) = residual {
        return Err(e);
    }
    cxx::emit_program(program, options)
}

/// The support header. It does not depend on the options.
pub fn emit_runtime_header(_options: &EmitOptions) -> String {
    RUNTIME_HEADER.to_string()
}
