#![allow(dead_code)]

pub mod cxx;
pub mod gen;

use std::path::PathBuf;

use lapis_core::interp::{RtValue, Scalar, Tensor};
use lapis_core::ir::{Program, ScalarType};
use lapis_core::passes::{run_pipeline, PassPipeline, TargetConfig};
use lapis_core::textio::parse;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn golden_dir() -> PathBuf {
    fixtures_dir().join("golden")
}

/// Stems of every `.mlir` fixture, sorted.
pub fn fixture_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(fixtures_dir())
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "mlir")
                .then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    names
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixtures_dir().join(format!("{name}.mlir"))).unwrap()
}

pub fn fixture(name: &str) -> Program {
    parse(&fixture_text(name)).unwrap_or_else(|e| panic!("{name}: {e:?}"))
}

pub fn lower_with(p: &Program, config: &TargetConfig) -> Program {
    run_pipeline(p, &PassPipeline::preset(), config)
        .unwrap_or_else(|e| panic!("{e}"))
        .program
}

pub fn lower(p: &Program) -> Program {
    lower_with(p, &TargetConfig::default())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tensor(v: &RtValue) -> &Tensor {
    match v {
        RtValue::Tensor(t) => t,
        other => panic!("expected a tensor, got {other}"),
    }
}

pub fn index_tensor(data: &[i64]) -> RtValue {
    RtValue::Tensor(Tensor::from_ints(ScalarType::Index, &[data.len()], data))
}

pub fn f64_tensor(shape: &[usize], data: &[f64]) -> RtValue {
    RtValue::Tensor(Tensor::from_floats(ScalarType::F64, shape, data))
}

pub fn random(ty: ScalarType, shape: &[usize], rng: &mut impl Rng) -> RtValue {
    RtValue::Tensor(Tensor::random(ty, shape, rng))
}

/// CSR arrays of a random `rows x cols` matrix with roughly `density`
/// of its entries set, columns sorted within each row.
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub rowptr: Vec<i64>,
    pub colind: Vec<i64>,
    pub values: Vec<f64>,
}

impl Csr {
    pub fn random(rows: usize, cols: usize, density: f64, rng: &mut impl Rng) -> Csr {
        let mut rowptr = vec![0];
        let mut colind = Vec::new();
        let mut values = Vec::new();
        for _ in 0..rows {
            for c in 0..cols {
                if rng.gen_bool(density) {
                    colind.push(c as i64);
                    values.push(rng.gen_range(-1.0..1.0));
                }
            }
            rowptr.push(colind.len() as i64);
        }
        Csr {
            rows,
            cols,
            rowptr,
            colind,
            values,
        }
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.cols]; self.rows];
        for (i, row) in a.iter_mut().enumerate() {
            for j in self.rowptr[i] as usize..self.rowptr[i + 1] as usize {
                row[self.colind[j] as usize] += self.values[j];
            }
        }
        a
    }

    pub fn args(&self, x: &[f64]) -> Vec<RtValue> {
        vec![
            index_tensor(&self.rowptr),
            index_tensor(&self.colind),
            f64_tensor(&[self.values.len()], &self.values),
            f64_tensor(&[x.len()], x),
        ]
    }
}

/// The 4x4 matrix used throughout: rows {0,1}, {2}, {}, {0,3}.
pub fn csr4() -> Csr {
    Csr {
        rows: 4,
        cols: 4,
        rowptr: vec![0, 2, 3, 3, 5],
        colind: vec![0, 1, 2, 0, 3],
        values: vec![1.0, 2.0, 3.0, 4.0, 5.0],
    }
}

/// Entry name and random arguments for a fixture, or None when the
/// fixture has no meaningful inputs.
pub fn fixture_inputs(name: &str, seed: u64) -> Option<(&'static str, Vec<RtValue>)> {
    let mut r = rng(seed);
    let r = &mut r;
    let (entry, args) = match name {
        "spmv" => {
            let a = Csr::random(100, 100, 0.05, r);
            let x: Vec<f64> = (0..100).map(|_| r.gen_range(-1.0..1.0)).collect();
            ("spmv", a.args(&x))
        }
        "spmv_loops" => {
            let a = Csr::random(20, 20, 0.2, r);
            let x: Vec<f64> = (0..20).map(|_| r.gen_range(-1.0..1.0)).collect();
            let mut args = a.args(&x);
            args.push(f64_tensor(&[20], &[0.0; 20]));
            ("spmv", args)
        }
        "matmul_f64" => (
            "matmul",
            (0..3)
                .map(|_| random(ScalarType::F64, &[32, 32], r))
                .collect(),
        ),
        "matmul_i32" => (
            "matmul",
            (0..3)
                .map(|_| random(ScalarType::I32, &[16, 16], r))
                .collect(),
        ),
        "matvec" => (
            "matvec",
            vec![
                random(ScalarType::F64, &[64, 64], r),
                random(ScalarType::F64, &[64], r),
                random(ScalarType::F64, &[64], r),
            ],
        ),
        "batch_matmul" => (
            "batch_matmul",
            (0..3)
                .map(|_| random(ScalarType::F32, &[4, 8, 8], r))
                .collect(),
        ),
        "elementwise_chain" => (
            "chain",
            (0..3)
                .map(|_| random(ScalarType::F64, &[6, 7], r))
                .collect(),
        ),
        "axis_reduce" => (
            "reduce",
            vec![
                random(ScalarType::F64, &[5, 9], r),
                random(ScalarType::F64, &[5], r),
                random(ScalarType::F64, &[9], r),
            ],
        ),
        "two_kernels" => ("two_kernels", vec![random(ScalarType::F64, &[33], r)]),
        "host_alloc" => (
            "host_alloc",
            vec![
                random(ScalarType::F64, &[10], r),
                random(ScalarType::F64, &[10], r),
            ],
        ),
        "depth1" => (
            "scale",
            vec![
                random(ScalarType::F64, &[17], r),
                RtValue::Scalar(ScalarType::F64, Scalar::Float(r.gen_range(-2.0..2.0))),
            ],
        ),
        "depth2" => (
            "add_bias",
            vec![
                random(ScalarType::F32, &[5, 6], r),
                random(ScalarType::F32, &[6], r),
                random(ScalarType::F32, &[5, 6], r),
            ],
        ),
        "depth4" => (
            "sum_inner",
            vec![
                random(ScalarType::I64, &[3, 5, 4, 6], r),
                random(ScalarType::I64, &[3, 5], r),
            ],
        ),
        "team_single" => (
            "rows",
            vec![
                random(ScalarType::I32, &[4], r),
                random(ScalarType::I32, &[4, 8, 16], r),
            ],
        ),
        "global_weights" => ("apply", vec![random(ScalarType::F64, &[2], r)]),
        "control_flow" => (
            "prefix",
            vec![
                random(ScalarType::I64, &[4, 7], r),
                random(ScalarType::I64, &[4, 7], r),
                RtValue::Scalar(ScalarType::I64, Scalar::Int(r.gen_range(0..20))),
            ],
        ),
        "empty" => ("empty", vec![]),
        _ => return None,
    };
    Some((entry, args))
}

/// Compare `actual` with the golden file, or rewrite it when
/// `UPDATE_GOLDENS` is set.
pub fn check_golden(file: &str, actual: &str) -> Result<(), String> {
    let path = golden_dir().join(file);
    if std::env::var_os("UPDATE_GOLDENS").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return Ok(());
    }
    let expected =
        std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        return Ok(());
    }
    let line = expected
        .lines()
        .zip(actual.lines())
        .position(|(a, b)| a != b)
        .unwrap_or_else(|| expected.lines().count().min(actual.lines().count()));
    Err(format!("{file} differs from golden at line {}", line + 1))
}

pub fn emit_named(p: &Program, name: &str) -> lapis_core::emitter::EmitResult {
    let opts = lapis_core::emitter::EmitOptions {
        header_name: name.to_string(),
        ..Default::default()
    };
    lapis_core::emitter::emit(p, &opts).unwrap_or_else(|e| panic!("{name}: {e}"))
}
