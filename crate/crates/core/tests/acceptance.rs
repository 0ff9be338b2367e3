//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::cxx::{constant_definitions, in_order};
use common::gen::{mutate, random_program};
use common::Csr;
use lapis_core::interp::{diff_outputs, run, run_eager_baseline, ExecConfig, RtValue, TraceEvent};
use lapis_core::ir::{
    structurally_equal, walk, OpKind, Operation, ParallelLevel, Program, ScalarType,
};
use lapis_core::passes::{run_pipeline, PassKind, PassPipeline, TargetConfig};
use lapis_core::textio::{parse, print};
use rand::Rng;

type Check = Result<(), String>;
type Criterion = fn() -> Check;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn outputs(p: &Program, entry: &str, args: &[RtValue]) -> Result<Vec<RtValue>, String> {
    run(p, entry, args, &ExecConfig::default())
        .map(|r| r.outputs())
        .map_err(|e| format!("{entry}: {e}"))
}

const SEMANTIC_FIXTURES: [&str; 7] = [
    "spmv",
    "matmul_f64",
    "matmul_i32",
    "matvec",
    "batch_matmul",
    "elementwise_chain",
    "axis_reduce",
];

fn semantic_preservation() -> Check {
    let start = Instant::now();
    for name in SEMANTIC_FIXTURES {
        let p = common::fixture(name);
        let q = common::lower(&p);
        for seed in 0..20 {
            let (entry, args) = common::fixture_inputs(name, seed).unwrap();
            let d = diff_outputs(
                &outputs(&p, entry, &args)?,
                &outputs(&q, entry, &args)?,
                1e-12,
            );
            ensure!(d.is_match(), "{name} seed {seed}: {d}");
        }
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(60), "took {took:?}");
    Ok(())
}

/// C += A * B with wrapping i32 arithmetic.
fn matmul_i32(a: &[i64], b: &[i64], c: &[i64], n: usize) -> Vec<i64> {
    let mut out = vec![0; n * n];
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

fn matmul_f64(a: &[f64], b: &[f64], c: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = c[i * n + j];
            for k in 0..n {
                acc += a[i * n + k] * b[k * n + j];
            }
            out[i * n + j] = acc;
        }
    }
    out
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn oracle_equivalence() -> Check {
    let spmv = common::lower(&common::fixture("spmv"));
    for seed in 0..5 {
        let mut rng = common::rng(100 + seed);
        let a = Csr::random(100, 100, 0.05, &mut rng);
        let x: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = common::tensor(&outputs(&spmv, "spmv", &a.args(&x))?[0]).floats();
        for (i, row) in a.dense().iter().enumerate() {
            let expect: f64 = row.iter().zip(&x).map(|(v, xv)| v * xv).sum();
            ensure!(
                close(y[i], expect),
                "spmv seed {seed} row {i}: {} vs {expect}",
                y[i]
            );
        }
    }

    let mm = common::lower(&common::fixture("matmul_i32"));
    for seed in 0..5 {
        let (_, args) = common::fixture_inputs("matmul_i32", seed).unwrap();
        let ints: Vec<Vec<i64>> = args.iter().map(|a| common::tensor(a).ints()).collect();
        let got = common::tensor(&outputs(&mm, "matmul", &args)?[2]).ints();
        ensure!(
            got == matmul_i32(&ints[0], &ints[1], &ints[2], 16),
            "matmul i32 seed {seed}"
        );
    }

    let mm = common::lower(&common::fixture("matmul_f64"));
    let (_, args) = common::fixture_inputs("matmul_f64", 3).unwrap();
    let fl: Vec<Vec<f64>> = args.iter().map(|a| common::tensor(a).floats()).collect();
    let got = common::tensor(&outputs(&mm, "matmul", &args)?[2]).floats();
    let expect = matmul_f64(&fl[0], &fl[1], &fl[2], 32);
    ensure!(
        got.iter().zip(&expect).all(|(a, b)| close(*a, *b)),
        "matmul f64"
    );
    Ok(())
}

fn loop_kinds(name: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    walk(&common::lower(&common::fixture(name)), |_, op| {
        match op.kind {
            OpKind::RangeParallel => {
                out.insert(format!("range_parallel/{}", op.parallel_level().unwrap()));
            }
            OpKind::TeamParallel | OpKind::ThreadParallel | OpKind::For => {
                out.insert(op.kind.name().to_string());
            }
            _ => {}
        }
    });
    out
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn loop_mapping_structure() -> Check {
    let cases = [
        ("depth1", set(&["range_parallel/toprange"])),
        (
            "depth2",
            set(&["kokkos.thread_parallel", "range_parallel/threadvector"]),
        ),
        (
            "depth4",
            set(&[
                "kokkos.team_parallel",
                "range_parallel/teamthread",
                "scf.for",
                "range_parallel/threadvector",
            ]),
        ),
    ];
    for (name, expect) in cases {
        let got = loop_kinds(name);
        ensure!(got == expect, "{name}: {got:?}");
    }
    let mut spaces = Vec::new();
    walk(&common::lower(&common::fixture("host_alloc")), |_, op| {
        if op.kind.is_kokkos_loop() {
            if let Some(s) = op.exec_space() {
                spaces.push(s.to_string());
            }
        }
    });
    ensure!(spaces == ["host"], "host_alloc spaces {spaces:?}");
    for name in common::fixture_names() {
        let text = print(&common::lower(&common::fixture(&name)));
        common::check_golden(&format!("{name}.mlir"), &text)?;
    }
    Ok(())
}

fn hints(csr: &Csr) -> Result<Vec<i64>, String> {
    let p = common::lower(&common::fixture("spmv"));
    let r = run(
        &p,
        "spmv",
        &csr.args(&vec![1.0; csr.cols]),
        &ExecConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    Ok(r.counters
        .vector_length_hints
        .iter()
        .map(|(_, h)| *h)
        .collect())
}

fn csr_hint() -> Check {
    let got = hints(&common::csr4())?;
    ensure!(got == [2], "4-row fixture: {got:?}");
    // 100 rows, 1434 entries: mean row length 14.34.
    let mut rowptr = vec![0i64];
    let mut colind = Vec::new();
    for i in 0..100 {
        let len = 14 + usize::from(i < 34);
        colind.extend((0..len as i64).map(|c| (c * 7 + i as i64) % 64));
        rowptr.push(colind.len() as i64);
    }
    ensure!(colind.len() == 1434, "nnz {}", colind.len());
    let a = Csr {
        rows: 100,
        cols: 64,
        values: vec![0.5; 1434],
        rowptr,
        colind,
    };
    let got = hints(&a)?;
    ensure!(got == [16], "mean 14.34: {got:?}");
    Ok(())
}

fn dualview_laziness() -> Check {
    let p = common::fixture("two_kernels");
    let lazy = common::lower(&p);
    let pre = run_pipeline(
        &p,
        &PassPipeline {
            passes: PassKind::PRESET[..5]
                .iter()
                .map(|&k| (k, Default::default()))
                .collect(),
        },
        &TargetConfig::default(),
    )
    .map_err(|e| e.to_string())?
    .program;
    let (entry, args) = common::fixture_inputs("two_kernels", 0).unwrap();
    let l = run(&lazy, entry, &args, &ExecConfig::default()).map_err(|e| e.to_string())?;
    ensure!(
        l.trace.h2d() == 1 && l.trace.d2h() == 1,
        "lazy trace:\n{}",
        l.trace.to_text()
    );
    let e = run_eager_baseline(&pre, entry, &args, &ExecConfig::default())
        .map_err(|e| e.to_string())?;
    ensure!(e.trace.h2d() >= 2, "eager trace:\n{}", e.trace.to_text());

    for name in common::fixture_names() {
        let q = common::lower(&common::fixture(&name));
        for seed in 0..5 {
            let (entry, args) = common::fixture_inputs(&name, seed).unwrap();
            let r = run(&q, entry, &args, &ExecConfig::default())
                .map_err(|e| format!("{name}: {e}"))?;
            ensure!(r.trace.stale_accesses() == 0, "{name} seed {seed}");
        }
    }

    let clean = parse("func @f(%m: memref<?xf64, dualview>) {\n  kokkos.sync %m device\n  kokkos.sync %m device\n  func.return\n}")
        .map_err(|e| format!("{e:?}"))?;
    let args = [RtValue::Tensor(lapis_core::interp::Tensor::zeros(
        ScalarType::F64,
        &[8],
    ))];
    let r = run(&clean, "f", &args, &ExecConfig::default()).map_err(|e| e.to_string())?;
    let ev = &r.trace.events;
    ensure!(ev.len() == 2, "{}", r.trace.to_text());
    ensure!(
        matches!(ev[1], TraceEvent::SyncNoop { .. }),
        "{}",
        r.trace.to_text()
    );
    ensure!(r.trace.bytes_copied() == 64, "{}", r.trace.to_text());
    let host =
        parse("func @g(%m: memref<?xf64, dualview>) {\n  kokkos.sync %m host\n  func.return\n}")
            .map_err(|e| format!("{e:?}"))?;
    let r = run(&host, "g", &args, &ExecConfig::default()).map_err(|e| e.to_string())?;
    ensure!(
        matches!(r.trace.events[..], [TraceEvent::SyncNoop { .. }]) && r.trace.bytes_copied() == 0,
        "{}",
        r.trace.to_text()
    );
    Ok(())
}

fn blocks<'a>(ops: &'a [Operation], out: &mut Vec<&'a [Operation]>) {
    out.push(ops);
    for op in ops {
        for r in &op.regions {
            blocks(&r.ops, out);
        }
    }
}

fn single_and_barrier() -> Check {
    let p = common::lower(&common::fixture("team_single"));
    let mut singles = Vec::new();
    walk(&p, |path, op| {
        if op.kind == OpKind::Single {
            singles.push(path.clone());
        }
    });
    ensure!(singles.len() == 1, "{} singles", singles.len());
    let config = ExecConfig::default();
    let (entry, args) = common::fixture_inputs("team_single", 0).unwrap();
    let r = run(&p, entry, &args, &config).map_err(|e| e.to_string())?;
    let n = r.counters.count(&singles[0]);
    ensure!(
        n == config.league_size_for_sim as u64,
        "single ran {n} times"
    );

    for name in common::fixture_names() {
        let q = common::lower(&common::fixture(&name));
        let mut expected = 0;
        let mut all = Vec::new();
        blocks(&q.ops, &mut all);
        for b in all {
            for (i, op) in b.iter().enumerate() {
                if op.kind != OpKind::RangeParallel {
                    continue;
                }
                let wants =
                    op.parallel_level() == Some(ParallelLevel::TeamThread) && op.results.is_empty();
                let has = b.get(i + 1).is_some_and(|o| o.kind == OpKind::TeamBarrier);
                ensure!(
                    wants == has,
                    "{name}: loop {i} barrier {has}, expected {wants}"
                );
                expected += wants as usize;
            }
        }
        let tokens = print(&q).matches("kokkos.team_barrier").count();
        ensure!(
            tokens == expected,
            "{name}: {tokens} barriers, expected {expected}"
        );
    }
    Ok(())
}

fn round_trip(p: &Program, what: &str) -> Check {
    let text = print(p);
    let q = parse(&text).map_err(|e| format!("{what}: reparse failed: {e:?}"))?;
    structurally_equal(p, &q).map_err(|e| format!("{what}: {e}"))?;
    ensure!(print(&q) == text, "{what}: print is not a fixpoint");
    Ok(())
}

fn text_round_trip() -> Check {
    for name in common::fixture_names() {
        let p = common::fixture(&name);
        round_trip(&p, &name)?;
        round_trip(&common::lower(&p), &format!("{name} lowered"))?;
    }
    let mut rng = common::rng(2024);
    for i in 0..1000 {
        let text = random_program(&mut rng);
        let p = parse(&text).map_err(|e| format!("generated {i}: {e:?}\n{text}"))?;
        round_trip(&p, &format!("generated {i}"))?;
    }
    let seeds: Vec<String> = common::fixture_names()
        .iter()
        .map(|n| common::fixture_text(n))
        .collect();
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut crashed = None;
    for i in 0..10_000 {
        let bytes = mutate(&seeds[i % seeds.len()], &mut rng);
        let text = String::from_utf8_lossy(&bytes).into_owned();
        if catch_unwind(|| {
            let _ = parse(&text);
        })
        .is_err()
        {
            crashed = Some(i);
            break;
        }
    }
    std::panic::set_hook(hook);
    ensure!(
        crashed.is_none(),
        "parser panicked on mutation {}",
        crashed.unwrap()
    );
    Ok(())
}

fn emission_goldens() -> Check {
    for name in common::fixture_names() {
        let src = common::emit_named(&common::lower(&common::fixture(&name)), &name).source;
        common::check_golden(&format!("{name}.hpp"), &src)?;
        let consts = constant_definitions(&src);
        ensure!(consts.is_empty(), "{name}: literal constants {consts:?}");
    }
    let spmv = common::emit_named(&common::lower(&common::fixture("spmv")), "spmv").source;
    in_order(
        &spmv,
        &["TeamPolicy", "TeamThreadRange", "ThreadVectorRange"],
    )?;
    ensure!(spmv.contains("syncDevice()"), "no syncDevice in spmv");
    Ok(())
}

fn kernel_library_rewriting() -> Check {
    let config = TargetConfig {
        kernel_library_calls: true,
        ..Default::default()
    };
    for (name, kernel) in [
        ("matmul_f64", OpKind::Gemm),
        ("matmul_i32", OpKind::Gemm),
        ("matvec", OpKind::Gemv),
    ] {
        let p = common::fixture(name);
        let q = common::lower_with(&p, &config);
        let mut kernels = 0;
        let mut loops = 0;
        walk(&q, |_, op| {
            kernels += (op.kind == kernel) as usize;
            loops += op.kind.is_kokkos_loop() as usize;
        });
        ensure!(
            kernels == 1 && loops == 0,
            "{name}: {kernels} kernels, {loops} loops"
        );
        for seed in 0..3 {
            let (entry, args) = common::fixture_inputs(name, seed).unwrap();
            let d = diff_outputs(
                &outputs(&p, entry, &args)?,
                &outputs(&q, entry, &args)?,
                1e-12,
            );
            ensure!(d.is_match(), "{name} seed {seed}: {d}");
        }
    }
    Ok(())
}

fn main() {
    let criteria: [(&str, Criterion); 9] = [
        ("pipeline semantic preservation", semantic_preservation),
        ("oracle equivalence", oracle_equivalence),
        (
            "loop-mapping structure and golden IR",
            loop_mapping_structure,
        ),
        ("CSR vector-length hint", csr_hint),
        ("dual-view laziness", dualview_laziness),
        ("single and barrier semantics", single_and_barrier),
        ("text round-trip", text_round_trip),
        ("emission goldens", emission_goldens),
        ("kernel-library rewriting", kernel_library_rewriting),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(()) => println!("PASS  {name} ({ms} ms)"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({ms} ms): {why}");
            }
        }
    }
    println!("{} of {} criteria passed", 9 - failed, 9);
    if failed > 0 {
        std::process::exit(1);
    }
}
