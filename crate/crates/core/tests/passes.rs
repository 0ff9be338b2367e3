mod common;

use common::Csr;
use lapis_core::interp::{
    diff_outputs, run, run_eager_baseline, ExecConfig, RtValue, Scalar, Tensor,
};
use lapis_core::ir::{
    walk, Attr, MemorySpace, OpKind, OpPath, Operation, ParallelLevel, Program, Region, ScalarType,
    Type,
};
use lapis_core::passes::*;
use lapis_core::textio::{parse, print};

fn count(p: &Program, kind: OpKind) -> usize {
    let mut n = 0;
    walk(p, |_, op| n += (op.kind == kind) as usize);
    n
}

fn kinds(p: &Program) -> Vec<OpKind> {
    let mut out = Vec::new();
    walk(p, |_, op| out.push(op.kind));
    out
}

fn apply(p: &Program, passes: &[PassKind], config: &TargetConfig) -> Program {
    let pipeline = PassPipeline {
        passes: passes.iter().map(|&k| (k, Default::default())).collect(),
    };
    run_pipeline(p, &pipeline, config)
        .unwrap_or_else(|e| panic!("{e}"))
        .program
}

fn outputs(p: &Program, entry: &str, args: &[RtValue]) -> Vec<RtValue> {
    run(p, entry, args, &ExecConfig::default())
        .unwrap_or_else(|e| panic!("{e}"))
        .outputs()
}

fn loops_at_level(p: &Program, level: ParallelLevel) -> Vec<Operation> {
    let mut out = Vec::new();
    walk(p, |_, op| {
        if op.kind == OpKind::RangeParallel && op.parallel_level() == Some(level) {
            out.push(op.clone());
        }
    });
    out
}

#[test]
fn lowered_ir_goldens() {
    let mut failures = Vec::new();
    for name in common::fixture_names() {
        let text = print(&common::lower(&common::fixture(&name)));
        if let Err(e) = common::check_golden(&format!("{name}.mlir"), &text) {
            failures.push(e);
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn preset_snapshots_on_spmv() {
    let out = run_pipeline(
        &common::fixture("spmv"),
        &PassPipeline::preset(),
        &TargetConfig::default(),
    )
    .unwrap();
    let names: Vec<&str> = out.snapshots.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "lower-spmv-csr",
            "linalg-to-kokkoskernels",
            "dense-linalg-to-parallel-loops",
            "normalize-loops",
            "kokkos-loop-mapping",
            "kokkos-dualview-management"
        ]
    );
    assert_eq!(out.snapshots.last().unwrap().1, print(&out.program));
    assert!(count(&out.program, OpKind::ThreadParallel) == 1);
    assert!(count(&out.program, OpKind::Sync) > 0 && count(&out.program, OpKind::Modify) > 0);
}

#[test]
fn empty_pipeline_is_identity() {
    let p = common::fixture("matvec");
    let out = run_pipeline(&p, &PassPipeline::default(), &TargetConfig::default()).unwrap();
    assert_eq!(print(&out.program), print(&p));
    assert!(out.snapshots.is_empty());
}

#[test]
fn mapping_rejects_linalg() {
    let pipeline = PassPipeline::parse("kokkos-loop-mapping").unwrap();
    let err = run_pipeline(
        &common::fixture("matvec"),
        &pipeline,
        &TargetConfig::default(),
    )
    .unwrap_err();
    assert_eq!(err.pass, "kokkos-loop-mapping");
    assert!(err.diagnostics[0].message.contains("linalg ops present"));
    assert!(err.snapshots.is_empty());
}

#[test]
fn pipeline_specs() {
    let p = PassPipeline::parse("sparse-compiler-kokkos{max-vector-length=64}").unwrap();
    assert_eq!(p.passes.len(), 6);
    assert!(p
        .passes
        .iter()
        .all(|(_, o)| o.get("max-vector-length").map(String::as_str) == Some("64")));
    assert_eq!(PassPipeline::parse(&p.to_spec()).unwrap(), p);
    assert_eq!(
        PassPipeline::parse("normalize_loops, kokkos-loop-mapping")
            .unwrap()
            .passes
            .len(),
        2
    );
    assert!(matches!(
        PassPipeline::parse("bogus"),
        Err(PipelineError::UnknownPass(_))
    ));
    assert!(PassPipeline::parse("normalize-loops{colour=red}").is_err());
    let bad = PassPipeline::parse("kokkos-loop-mapping{max-vector-length=48}").unwrap();
    assert!(run_pipeline(&common::fixture("depth1"), &bad, &TargetConfig::default()).is_err());
}

#[test]
fn target_config_bounds() {
    for (v, ok) in [
        (1, true),
        (32, true),
        (1024, true),
        (0, false),
        (48, false),
        (2048, false),
    ] {
        let c = TargetConfig {
            max_vector_length: v,
            ..Default::default()
        };
        assert_eq!(c.validate().is_ok(), ok, "{v}");
    }
}

const DENSE: [PassKind; 1] = [PassKind::LowerDenseLinalg];

#[test]
fn matvec_becomes_a_reducing_nest() {
    let p = parse(
        "func @mv(%a: memref<4x4xf64>, %x: memref<4xf64>, %y: memref<4xf64>) {\n  linalg.matvec(%a, %x, %y)\n  func.return\n}",
    )
    .unwrap();
    let q = apply(&p, &DENSE, &TargetConfig::default());
    let f = q.func("mv").unwrap();
    let outer = f.regions[0]
        .ops
        .iter()
        .find(|o| o.kind == OpKind::Parallel)
        .unwrap();
    assert!(outer.results.is_empty());
    let inner = outer.regions[0]
        .ops
        .iter()
        .find(|o| o.kind == OpKind::Parallel)
        .unwrap();
    assert_eq!(inner.results.len(), 1);
    assert_eq!(inner.regions[0].terminator().unwrap().kind, OpKind::Reduce);
    assert_eq!(count(&q, OpKind::Parallel), 2);
}

#[test]
fn rank0_fill_is_a_single_store() {
    let p = parse(
        "func @f(%m: memref<f64>) {\n  %z = arith.constant 2.5 : f64\n  linalg.fill(%z, %m)\n  func.return\n}",
    )
    .unwrap();
    let q = apply(&p, &DENSE, &TargetConfig::default());
    assert_eq!(count(&q, OpKind::Parallel), 0);
    assert_eq!(count(&q, OpKind::Store), 1);
    let out = outputs(
        &q,
        "f",
        &[RtValue::Tensor(Tensor::zeros(ScalarType::F64, &[]))],
    );
    assert_eq!(common::tensor(&out[0]).floats(), vec![2.5]);
}

/// Plain triple loop with wrapping i32 arithmetic.
fn matmul_oracle(a: &[i64], b: &[i64], c: &[i64], n: usize) -> Vec<i64> {
    let mut out = c.to_vec();
    for i in 0..n {
        for j in 0..n {
            let mut acc = c[i * n + j] as i32;
            for k in 0..n {
                acc = acc.wrapping_add((a[i * n + k] as i32).wrapping_mul(b[k * n + j] as i32));
            }
            out[i * n + j] = acc as i64;
        }
    }
    out
}

#[test]
fn matmul_matches_triple_loop() {
    let p = parse(
        "func @mm(%a: memref<8x8xi32>, %b: memref<8x8xi32>, %c: memref<8x8xi32>) {\n  linalg.matmul(%a, %b, %c)\n  func.return\n}",
    )
    .unwrap();
    let q = apply(&p, &DENSE, &TargetConfig::default());
    assert_eq!(count(&q, OpKind::Matmul), 0);
    let mut rng = common::rng(5);
    let args: Vec<RtValue> = (0..3)
        .map(|_| common::random(ScalarType::I32, &[8, 8], &mut rng))
        .collect();
    let ints: Vec<Vec<i64>> = args.iter().map(|a| common::tensor(a).ints()).collect();
    let out = outputs(&q, "mm", &args);
    assert_eq!(
        common::tensor(&out[2]).ints(),
        matmul_oracle(&ints[0], &ints[1], &ints[2], 8)
    );
}

#[test]
fn unsupported_linalg_leaves_program_unchanged() {
    let p = parse(
        "func @f(%a: memref<4x4xf64>, %o: memref<4xf64>) {\n  linalg.reduce(%a, %o) {dimensions = [0, 1]} {\n    ^bb(%x: f64, %acc: f64):\n    %s = arith.addf(%x, %acc) : f64\n    scf.reduce.return(%s)\n  }\n  func.return\n}",
    );
    // Either the verifier rejects this shape or the lowering does.
    if let Ok(p) = p {
        let mut q = p.clone();
        if lower_dense_linalg(&mut q).is_err() {
            assert_eq!(print(&q), print(&p));
        }
    }
}

fn kernel_config() -> TargetConfig {
    TargetConfig {
        kernel_library_calls: true,
        ..Default::default()
    }
}

const KERNELS: [PassKind; 1] = [PassKind::LowerLinalgToKernels];

#[test]
fn matmul_becomes_gemm() {
    let p = parse(
        "func @mm(%a: memref<4x4xf32>, %b: memref<4x4xf32>, %c: memref<4x4xf32>) {\n  linalg.matmul(%a, %b, %c)\n  func.return\n}",
    )
    .unwrap();
    let q = apply(&p, &KERNELS, &kernel_config());
    let f = q.func("mm").unwrap();
    let gemm = &f.regions[0].ops[0];
    assert_eq!(gemm.kind, OpKind::Gemm);
    assert_eq!(
        gemm.operands,
        p.func("mm").unwrap().regions[0].ops[0].operands
    );
    assert_eq!(
        q.ty(gemm.operands[0]).as_memref().unwrap().element,
        ScalarType::F32
    );
    // Flag off: nothing happens.
    let r = apply(&p, &KERNELS, &TargetConfig::default());
    assert_eq!(print(&r), print(&p));
}

#[test]
fn kernel_rewrite_ignores_other_ops() {
    let p = common::fixture("depth4");
    assert_eq!(print(&apply(&p, &KERNELS, &kernel_config())), print(&p));
}

#[test]
fn gemv_matches_loops_exactly() {
    let p = parse(
        "func @mv(%a: memref<16x16xf64>, %x: memref<16xf64>, %y: memref<16xf64>) {\n  linalg.matvec(%a, %x, %y)\n  func.return\n}",
    )
    .unwrap();
    let q = apply(&p, &KERNELS, &kernel_config());
    assert_eq!(count(&q, OpKind::Gemv), 1);
    let mut rng = common::rng(9);
    let args = vec![
        common::random(ScalarType::F64, &[16, 16], &mut rng),
        common::random(ScalarType::F64, &[16], &mut rng),
        common::random(ScalarType::F64, &[16], &mut rng),
    ];
    let before = outputs(&p, "mv", &args);
    let after = outputs(&q, "mv", &args);
    assert!(diff_outputs(&before, &after, 0.0).is_match());
}

#[test]
fn csr_lowering_structure() {
    let p = apply(
        &common::fixture("spmv"),
        &[PassKind::LowerSpmvCsr],
        &TargetConfig::default(),
    );
    assert_eq!(count(&p, OpKind::SpmvCsr), 0);
    let f = p.func("spmv").unwrap();
    let outer = f.regions[0]
        .ops
        .iter()
        .find(|o| o.kind == OpKind::Parallel)
        .unwrap();
    let body = &outer.regions[0].ops;
    let inner = body.iter().find(|o| o.kind == OpKind::Parallel).unwrap();
    // Inner bound is rowptr[i + 1] - rowptr[i].
    let ub = inner.upper_bounds()[0];
    let len = body
        .iter()
        .find(|o| o.results.first() == Some(&ub))
        .unwrap();
    assert_eq!(len.kind, OpKind::SubI);
    let loads: Vec<&Operation> = len
        .operands
        .iter()
        .map(|v| body.iter().find(|o| o.results.first() == Some(v)).unwrap())
        .collect();
    assert!(loads
        .iter()
        .all(|l| l.kind == OpKind::Load && l.operands[0] == f.regions[0].args[0]));
    assert_eq!(inner.reduction_combiners().len(), 1);

    let csr = common::csr4();
    let trips: Vec<i64> = csr.rowptr.windows(2).map(|w| w[1] - w[0]).collect();
    assert_eq!(trips, [2, 1, 0, 2]);
    let out = outputs(&p, "spmv", &csr.args(&[1.0; 4]));
    assert_eq!(common::tensor(&out[0]).floats(), [3.0, 3.0, 0.0, 9.0]);
}

#[test]
fn csr_identity() {
    let p = apply(
        &common::fixture("spmv"),
        &[PassKind::LowerSpmvCsr],
        &TargetConfig::default(),
    );
    let id = Csr {
        rows: 3,
        cols: 3,
        rowptr: vec![0, 1, 2, 3],
        colind: vec![0, 1, 2],
        values: vec![1.0; 3],
    };
    let out = outputs(&p, "spmv", &id.args(&[1.0, 2.0, 3.0]));
    assert_eq!(common::tensor(&out[0]).floats(), [1.0, 2.0, 3.0]);
}

#[test]
fn csr_random_matches_dense() {
    let p = common::lower(&common::fixture("spmv"));
    let mut rng = common::rng(21);
    let a = Csr::random(100, 100, 0.05, &mut rng);
    let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
    let y = common::tensor(&outputs(&p, "spmv", &a.args(&x))[0]).floats();
    let dense = a.dense();
    for i in 0..100 {
        let expect: f64 = (0..100).map(|j| dense[i][j] * x[j]).sum();
        assert!(
            (y[i] - expect).abs() <= 1e-13 * expect.abs().max(y[i].abs()).max(1.0),
            "row {i}"
        );
    }
}

#[test]
fn normalize_rebases_loops() {
    let p = parse(
        "func @f(%m: memref<16xi64>) {\n  %c3 = arith.constant 3 : index\n  %c11 = arith.constant 11 : index\n  %c2 = arith.constant 2 : index\n  scf.parallel %i = %c3 to %c11 step %c2 {\n    %v = arith.index_cast(%i) : i64\n    memref.store %v, %m[%i]\n    scf.yield\n  }\n  func.return\n}",
    )
    .unwrap();
    let q = apply(&p, &[PassKind::NormalizeLoops], &TargetConfig::default());
    let f = q.func("f").unwrap();
    let lp = f.regions[0]
        .ops
        .iter()
        .find(|o| o.kind == OpKind::Parallel)
        .unwrap();
    let konst = |v| {
        f.regions[0]
            .ops
            .iter()
            .find(|o| o.results.first() == Some(&v))
            .and_then(|o| o.attr("value"))
            .and_then(Attr::as_int)
    };
    // ceil((11 - 3) / 2) = 4
    assert_eq!(konst(lp.lower_bounds()[0]), Some(0));
    assert_eq!(konst(lp.upper_bounds()[0]), Some(4));
    assert_eq!(konst(lp.steps()[0]), Some(1));
    let args = [RtValue::Tensor(Tensor::zeros(ScalarType::I64, &[16]))];
    assert_eq!(outputs(&p, "f", &args), outputs(&q, "f", &args));
    // Already normalized: fixpoint.
    assert_eq!(
        print(&apply(
            &q,
            &[PassKind::NormalizeLoops],
            &TargetConfig::default()
        )),
        print(&q)
    );
}

#[test]
fn normalize_nested_pair() {
    let p = parse(
        "func @f(%m: memref<10x12xi64>, %lo: index) {\n  %c1 = arith.constant 1 : index\n  %c2 = arith.constant 2 : index\n  %c3 = arith.constant 3 : index\n  %c10 = arith.constant 10 : index\n  %c12 = arith.constant 12 : index\n  scf.parallel %i = %c1 to %c10 step %c3 {\n    scf.parallel %j = %lo to %c12 step %c2 {\n      %a = arith.muli(%i, %c12) : index\n      %b = arith.addi(%a, %j) : index\n      %v = arith.index_cast(%b) : i64\n      memref.store %v, %m[%i, %j]\n      scf.yield\n    }\n    scf.yield\n  }\n  func.return\n}",
    )
    .unwrap();
    let q = apply(&p, &[PassKind::NormalizeLoops], &TargetConfig::default());
    let mut normalized = 0;
    walk(&q, |_, op| {
        if op.kind == OpKind::Parallel {
            normalized += 1;
        }
    });
    assert_eq!(normalized, 2);
    let mut rng = common::rng(4);
    for lo in [0, 1, 5, 12] {
        let m = common::random(ScalarType::I64, &[10, 12], &mut rng);
        let args = [m, RtValue::Scalar(ScalarType::Index, Scalar::Int(lo))];
        assert_eq!(
            outputs(&p, "f", &args),
            outputs(&q, "f", &args),
            "lo = {lo}"
        );
    }
}

#[test]
fn normalize_rejects_bad_steps() {
    let p = parse(
        "func @f() {\n  %c0 = arith.constant 0 : index\n  %c4 = arith.constant 4 : index\n  %s = arith.constant -1 : index\n  scf.parallel %i = %c0 to %c4 step %s {\n    scf.yield\n  }\n  func.return\n}",
    )
    .unwrap();
    let mut q = p.clone();
    let err = normalize_loops(&mut q).unwrap_err();
    assert!(err[0].message.contains("step must be positive"));
    assert_eq!(err[0].span.unwrap().line, 5);
}

#[test]
fn estimate_constant_bound() {
    let mut p = parse(
        "func @f(%m: memref<4x128xf64>) {\n  %c0 = arith.constant 0 : index\n  %c1 = arith.constant 1 : index\n  %c4 = arith.constant 4 : index\n  %c128 = arith.constant 128 : index\n  scf.parallel %i = %c0 to %c4 step %c1 {\n    scf.parallel %j = %c0 to %c128 step %c1 {\n      scf.yield\n    }\n    scf.yield\n  }\n  func.return\n}",
    )
    .unwrap();
    let inner = OpPath::top(0).child(0, 4).child(0, 0);
    assert_eq!(
        estimate_parallelism(&mut p, &inner, &TargetConfig::default()),
        ParallelismEstimate::Constant(128)
    );
    let outer = OpPath::top(0).child(0, 4);
    assert_eq!(
        estimate_parallelism(&mut p, &outer, &TargetConfig::default()),
        ParallelismEstimate::Constant(4)
    );
}

/// Hint values seen at launch when running the lowered SpMV.
fn spmv_hints(csr: &Csr, config: &TargetConfig) -> Vec<i64> {
    let p = common::lower_with(&common::fixture("spmv"), config);
    let x = vec![1.0; csr.cols];
    let r = run(&p, "spmv", &csr.args(&x), &ExecConfig::default()).unwrap();
    r.counters
        .vector_length_hints
        .iter()
        .map(|(_, h)| *h)
        .collect()
}

/// Independent statement of the hint rule: ceil(nnz / rows), rounded up
/// to a power of two, capped.
fn hint_oracle(nnz: i64, rows: i64, cap: i64) -> i64 {
    let k = (nnz + rows - 1) / rows;
    let mut p = 1;
    while p < k {
        p *= 2;
    }
    p.min(cap)
}

#[test]
fn csr_hint_on_four_rows() {
    assert_eq!(hint_oracle(5, 4, 32), 2);
    assert_eq!(spmv_hints(&common::csr4(), &TargetConfig::default()), [2]);

    let mut p = apply(
        &common::fixture("spmv"),
        &[PassKind::LowerSpmvCsr, PassKind::NormalizeLoops],
        &TargetConfig::default(),
    );
    let f = p.func("spmv").unwrap();
    let at = f.regions[0]
        .ops
        .iter()
        .position(|o| o.kind == OpKind::Parallel)
        .unwrap();
    let inner_at = f.regions[0].ops[at].regions[0]
        .ops
        .iter()
        .position(|o| o.kind == OpKind::Parallel)
        .unwrap();
    let path = OpPath::top(0).child(0, at).child(0, inner_at);
    assert!(matches!(
        estimate_parallelism(&mut p, &path, &TargetConfig::default()),
        ParallelismEstimate::Runtime(_)
    ));
}

/// Rows whose lengths average `nnz / rows` exactly.
fn csr_with(rows: usize, nnz: usize, cols: usize) -> Csr {
    let mut rowptr = vec![0i64];
    let mut colind = Vec::new();
    for i in 0..rows {
        let len = nnz / rows + usize::from(i < nnz % rows);
        colind.extend((0..len).map(|c| c as i64));
        rowptr.push(colind.len() as i64);
    }
    Csr {
        rows,
        cols,
        values: vec![1.0; colind.len()],
        rowptr,
        colind,
    }
}

#[test]
fn csr_hint_for_mean_14_34() {
    let a = csr_with(100, 1434, 32);
    assert_eq!(*a.rowptr.last().unwrap(), 1434);
    assert_eq!(hint_oracle(1434, 100, 32), 16);
    assert_eq!(spmv_hints(&a, &TargetConfig::default()), [16]);
    // Dense rows hit the cap; a larger cap lets them through.
    let wide = csr_with(4, 400, 128);
    assert_eq!(spmv_hints(&wide, &TargetConfig::default()), [32]);
    let cap64 = TargetConfig {
        max_vector_length: 64,
        ..Default::default()
    };
    assert_eq!(spmv_hints(&wide, &cap64), [64]);
    assert_eq!(hint_oracle(400, 4, 64), 64);
    // Empty matrix: the row guard keeps the division defined.
    let empty = csr_with(0, 0, 1);
    assert_eq!(spmv_hints(&empty, &TargetConfig::default()), [1]);
}

#[test]
fn constant_hints_are_capped_powers_of_two() {
    for (name, expect) in [
        ("matmul_i32", 16),
        ("matmul_f64", 32),
        ("batch_matmul", 8),
        ("depth4", 8),
        ("team_single", 16),
    ] {
        let p = common::lower(&common::fixture(name));
        let (entry, args) = common::fixture_inputs(name, 0).unwrap();
        let r = run(&p, entry, &args, &ExecConfig::default()).unwrap();
        let hints: Vec<i64> = r
            .counters
            .vector_length_hints
            .iter()
            .map(|(_, h)| *h)
            .collect();
        assert!(!hints.is_empty(), "{name}");
        assert!(hints.iter().all(|&h| h == expect), "{name}: {hints:?}");
    }
}

fn loop_kinds(name: &str) -> std::collections::BTreeSet<String> {
    let p = common::lower(&common::fixture(name));
    let mut out = std::collections::BTreeSet::new();
    walk(&p, |_, op| match op.kind {
        OpKind::RangeParallel => {
            out.insert(format!("range_parallel/{}", op.parallel_level().unwrap()));
        }
        OpKind::TeamParallel | OpKind::ThreadParallel | OpKind::For => {
            out.insert(op.kind.name().trim_start_matches("kokkos.").to_string());
        }
        _ => {}
    });
    out
}

fn set(items: &[&str]) -> std::collections::BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

#[test]
fn depth_mapping() {
    assert_eq!(loop_kinds("depth1"), set(&["range_parallel/toprange"]));
    assert_eq!(
        loop_kinds("depth2"),
        set(&["thread_parallel", "range_parallel/threadvector"])
    );
    assert_eq!(
        loop_kinds("depth4"),
        set(&[
            "team_parallel",
            "range_parallel/teamthread",
            "scf.for",
            "range_parallel/threadvector"
        ])
    );
    assert_eq!(
        loop_kinds("spmv"),
        set(&["thread_parallel", "range_parallel/threadvector"])
    );
    let md = parse(
        "func @f(%m: memref<3x4xf64>) {\n  %c0 = arith.constant 0 : index\n  %c1 = arith.constant 1 : index\n  %c3 = arith.constant 3 : index\n  %c4 = arith.constant 4 : index\n  %z = arith.constant 0.0 : f64\n  scf.parallel (%i, %j) = (%c0, %c0) to (%c3, %c4) step (%c1, %c1) {\n    memref.store %z, %m[%i, %j]\n    scf.yield\n  }\n  func.return\n}",
    )
    .unwrap();
    assert_eq!(
        loops_at_level(&common::lower(&md), ParallelLevel::TopMdRange).len(),
        1
    );
}

#[test]
fn execution_spaces() {
    let space = |name: &str| {
        let mut s = Vec::new();
        walk(&common::lower(&common::fixture(name)), |_, op| {
            if op.kind.is_kokkos_loop() && op.exec_space().is_some() {
                s.push(op.exec_space().unwrap().to_string());
            }
        });
        s
    };
    assert_eq!(space("host_alloc"), ["host"]);
    assert_eq!(space("depth1"), ["device"]);
}

#[test]
fn singles_and_barriers() {
    for name in common::fixture_names() {
        let p = common::lower(&common::fixture(&name));
        let mut barriers_expected = 0;
        let mut check = |ops: &[Operation]| {
            for (i, op) in ops.iter().enumerate() {
                if op.kind != OpKind::RangeParallel {
                    continue;
                }
                let next_is_barrier = ops
                    .get(i + 1)
                    .is_some_and(|o| o.kind == OpKind::TeamBarrier);
                let wants =
                    op.parallel_level() == Some(ParallelLevel::TeamThread) && op.results.is_empty();
                assert_eq!(next_is_barrier, wants, "{name}: op {i}");
                barriers_expected += wants as usize;
            }
        };
        fn blocks<'a>(ops: &'a [Operation], out: &mut Vec<&'a [Operation]>) {
            out.push(ops);
            for op in ops {
                for r in &op.regions {
                    blocks(&r.ops, out);
                }
            }
        }
        let mut all = Vec::new();
        blocks(&p.ops, &mut all);
        for b in all {
            check(b);
        }
        assert_eq!(count(&p, OpKind::TeamBarrier), barriers_expected, "{name}");
        assert_eq!(
            print(&p).matches("kokkos.team_barrier").count(),
            barriers_expected
        );
    }
}

#[test]
fn team_single_runs_once_per_team() {
    let p = common::lower(&common::fixture("team_single"));
    let mut singles = Vec::new();
    walk(&p, |path, op| {
        if op.kind == OpKind::Single
            && op.single_level().map(|l| l.to_string()).as_deref() == Some("perTeam")
        {
            singles.push(path.clone());
        }
    });
    assert_eq!(singles.len(), 1);
    let (entry, args) = common::fixture_inputs("team_single", 1).unwrap();
    let config = ExecConfig::default();
    let r = run(&p, entry, &args, &config).unwrap();
    assert_eq!(
        r.counters.count(&singles[0]),
        config.league_size_for_sim as u64
    );
    assert_eq!(r.counters.teams, config.league_size_for_sim as u64);
    let hdr = common::tensor(&r.arguments[0]).ints();
    assert_eq!(hdr, [0, 1, 2, 3]);
}

fn memref_spaces(p: &Program) -> Vec<MemorySpace> {
    let mut out = Vec::new();
    walk(p, |_, op| {
        let vals = op
            .results
            .iter()
            .chain(op.regions.iter().flat_map(|r: &Region| r.args.iter()));
        for &v in vals {
            if let Type::MemRef(m) = p.ty(v) {
                out.push(m.space);
            }
        }
    });
    out
}

#[test]
fn pass_postconditions() {
    for name in common::fixture_names() {
        let p = common::fixture(&name);
        let dense = apply(
            &p,
            &[PassKind::LowerSpmvCsr, PassKind::LowerDenseLinalg],
            &TargetConfig::default(),
        );
        assert!(kinds(&dense).iter().all(|k| !k.is_linalg()), "{name}");
        let lowered = common::lower(&p);
        assert_eq!(count(&lowered, OpKind::Parallel), 0, "{name}");
        assert!(
            memref_spaces(&lowered)
                .iter()
                .all(|&s| s != MemorySpace::Unassigned),
            "{name}"
        );
    }
}

#[test]
fn each_pass_preserves_semantics() {
    for name in common::fixture_names() {
        let p = common::fixture(&name);
        for seed in 0..3 {
            let (entry, args) = common::fixture_inputs(&name, seed).unwrap();
            let reference = outputs(&p, entry, &args);
            let out = run_pipeline(&p, &PassPipeline::preset(), &TargetConfig::default()).unwrap();
            for (pass, text) in &out.snapshots {
                let q = parse(text).unwrap();
                let got = outputs(&q, entry, &args);
                let d = diff_outputs(&reference, &got, 1e-12);
                assert!(d.is_match(), "{name} after {pass}, seed {seed}: {d}");
            }
        }
    }
}

#[test]
fn two_kernels_sync_once() {
    let p = common::lower(&common::fixture("two_kernels"));
    let f = p.func("two_kernels").unwrap();
    let body = &f.regions[0].ops;
    let kernels: Vec<usize> = body
        .iter()
        .enumerate()
        .filter(|(_, o)| o.kind.is_kokkos_loop())
        .map(|(i, _)| i)
        .collect();
    assert_eq!(kernels.len(), 2);
    let a = f.regions[0].args[0];
    let syncs_of_a: Vec<usize> = body
        .iter()
        .enumerate()
        .filter(|(_, o)| o.kind == OpKind::Sync && o.operands[0] == a)
        .map(|(i, _)| i)
        .collect();
    assert_eq!(syncs_of_a.len(), 1);
    assert!(syncs_of_a[0] < kernels[0]);

    let (entry, args) = common::fixture_inputs("two_kernels", 0).unwrap();
    let r = run(&p, entry, &args, &ExecConfig::default()).unwrap();
    assert_eq!(
        (r.trace.h2d(), r.trace.d2h()),
        (1, 1),
        "{}",
        r.trace.to_text()
    );

    let pre = apply(
        &common::fixture("two_kernels"),
        &PassKind::PRESET[..5],
        &TargetConfig::default(),
    );
    let e = run_eager_baseline(&pre, entry, &args, &ExecConfig::default()).unwrap();
    assert!(e.trace.h2d() >= 2);
    assert_eq!(e.outputs(), r.outputs());
}

#[test]
fn host_only_buffers_get_no_syncs() {
    let p = common::lower(&common::fixture("host_alloc"));
    let mut host_allocs = 0;
    walk(&p, |_, op| {
        if op.kind == OpKind::Alloc {
            assert_eq!(
                p.ty(op.results[0]).as_memref().unwrap().space,
                MemorySpace::Host
            );
            host_allocs += 1;
        }
    });
    assert_eq!(host_allocs, 1);
    let p = parse(
        "func @f() -> f64 {\n  %m = memref.alloc() : memref<f64>\n  %z = arith.constant 1.5 : f64\n  memref.store %z, %m[]\n  %v = memref.load %m[] : f64\n  memref.dealloc(%m)\n  func.return(%v)\n}",
    )
    .unwrap();
    let q = common::lower(&p);
    assert_eq!(count(&q, OpKind::Sync) + count(&q, OpKind::Modify), 0);
    assert_eq!(memref_spaces(&q), [MemorySpace::Host]);
}

#[test]
fn device_results_are_copied_back_once() {
    let p = common::lower(&common::fixture("depth1"));
    let text = print(&p);
    let kernel = text.find("kokkos.range_parallel").unwrap();
    let modify = text.find("kokkos.modify %0 device").unwrap();
    let sync = text.find("kokkos.sync %0 host").unwrap();
    assert!(kernel < modify && modify < sync, "{text}");
    let (entry, args) = common::fixture_inputs("depth1", 0).unwrap();
    let r = run(&p, entry, &args, &ExecConfig::default()).unwrap();
    assert_eq!(r.trace.d2h(), 1);
}

#[test]
fn lazy_never_exceeds_eager() {
    for name in common::fixture_names() {
        let p = common::fixture(&name);
        let pre = apply(&p, &PassKind::PRESET[..5], &TargetConfig::default());
        let lowered = common::lower(&p);
        for seed in 0..2 {
            let (entry, args) = common::fixture_inputs(&name, seed).unwrap();
            let lazy = run(&lowered, entry, &args, &ExecConfig::default()).unwrap();
            let eager = run_eager_baseline(&pre, entry, &args, &ExecConfig::default()).unwrap();
            assert!(lazy.trace.copies() <= eager.trace.copies(), "{name}");
            assert_eq!(lazy.trace.stale_accesses(), 0);
            assert!(
                diff_outputs(&lazy.outputs(), &eager.outputs(), 0.0).is_match(),
                "{name}"
            );
        }
    }
}

#[test]
fn single_memory_space_inserts_no_syncs() {
    let config = TargetConfig {
        separate_device_memory: false,
        ..Default::default()
    };
    for name in ["spmv", "two_kernels", "depth4"] {
        let p = common::lower_with(&common::fixture(name), &config);
        assert_eq!(
            count(&p, OpKind::Sync) + count(&p, OpKind::Modify),
            0,
            "{name}"
        );
    }
}
