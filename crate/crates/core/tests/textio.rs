mod common;

use common::gen::{mutate, random_program};
use lapis_core::ir::{structurally_equal, OpKind, Program};
use lapis_core::textio::{parse, parse_with, print, ParseOptions};

fn round_trip(p: &Program, what: &str) {
    let text = print(p);
    let q = parse(&text).unwrap_or_else(|e| panic!("{what}: reparse failed: {e:?}\n{text}"));
    structurally_equal(p, &q).unwrap_or_else(|e| panic!("{what}: {e}\n{text}"));
    assert_eq!(print(&q), text, "{what}: print is not a fixpoint");
}

#[test]
fn fixture_corpus_round_trips() {
    for name in common::fixture_names() {
        let p = common::fixture(&name);
        round_trip(&p, &name);
        round_trip(&common::lower(&p), &format!("{name} lowered"));
    }
}

#[test]
fn generated_programs_round_trip() {
    let mut rng = common::rng(7);
    for i in 0..300 {
        let text = random_program(&mut rng);
        let p = parse(&text).unwrap_or_else(|e| panic!("program {i}: {e:?}\n{text}"));
        round_trip(&p, &format!("program {i}"));
    }
}

#[test]
fn mutated_inputs_never_panic() {
    let mut rng = common::rng(11);
    let seeds: Vec<String> = common::fixture_names()
        .iter()
        .map(|n| common::fixture_text(n))
        .collect();
    for i in 0..2000 {
        let base = &seeds[i % seeds.len()];
        let bytes = mutate(base, &mut rng);
        let text = String::from_utf8_lossy(&bytes);
        if let Err(errors) = parse(&text) {
            assert!(!errors.is_empty());
            assert!(errors.iter().all(|e| !e.message.is_empty()));
        }
    }
}

#[test]
fn empty_function() {
    let p = parse("func @f() { func.return }").unwrap();
    assert_eq!(p.ops.len(), 1);
    assert_eq!(p.ops[0].regions[0].ops.len(), 1);
    assert_eq!(print(&p), "func @f() {\n  func.return\n}\n");
}

#[test]
fn nested_csr_loops_parse() {
    let p = common::fixture("spmv_loops");
    let f = p.func("spmv").unwrap();
    let outer = f.regions[0]
        .ops
        .iter()
        .find(|o| o.kind == OpKind::Parallel)
        .unwrap();
    assert!(outer.regions[0]
        .ops
        .iter()
        .any(|o| o.kind == OpKind::Parallel));
}

fn first_error(text: &str) -> String {
    let errs = parse(text).expect_err("should not parse");
    let e = &errs[0];
    assert!(e.span.line >= 1);
    format!("{}: {}", e.span, e.message)
}

#[test]
fn use_before_definition() {
    let msg = first_error("func @f(%b: i32) {\n  %a = arith.addi(%a, %b) : i32\n  func.return\n}");
    assert!(msg.contains("use before definition"), "{msg}");
    assert!(msg.starts_with("2:"), "{msg}");
}

#[test]
fn error_classes() {
    let cases = [
        ("func @f() {\n  %a = arith.constant 1 : i32 $\n  func.return\n}", "2:"),
        ("func @f() {\n  %a = arith.bogus() : i32\n  func.return\n}", "unknown op"),
        ("func @f(%a: i32, %b: f64) {\n  %c = arith.addi(%a, %b) : i32\n  func.return\n}", "2:"),
        ("func @f() {\n  %x = memref.load %m[] : f64\n  func.return\n}", "of %m"),
        ("func @f() {\n  %a = arith.constant 1 : i32\n  %a = arith.constant 2 : i32\n  func.return\n}", "duplicate"),
    ];
    for (text, needle) in cases {
        let msg = first_error(text);
        assert!(msg.contains(needle), "{needle} not in {msg}");
    }
}

#[test]
fn generic_and_sugared_loops_agree() {
    let sugared = "func @f(%n: index) {\n  %c0 = arith.constant 0 : index\n  %c1 = arith.constant 1 : index\n  scf.parallel %i = %c0 to %n step %c1 {\n    scf.yield\n  }\n  func.return\n}";
    let generic = "func @f(%n: index) {\n  %c0 = arith.constant 0 : index\n  %c1 = arith.constant 1 : index\n  scf.parallel(%c0, %n, %c1) {\n    ^bb(%i: index):\n    scf.yield\n  }\n  func.return\n}";
    let a = parse(sugared).unwrap();
    let b = parse(generic).unwrap_or_else(|e| panic!("{e:?}"));
    structurally_equal(&a, &b).unwrap();
    assert_eq!(print(&a), print(&b));
    assert!(
        print(&b).contains("scf.parallel %3 = %1 to %0 step %2"),
        "{}",
        print(&b)
    );
}

#[test]
fn canonical_form_sorts_attributes() {
    let p = parse("func @f(%a: i32) {\n  %b = arith.addi(%a, %a) {zeta = 1, alpha = \"x\"} : i32\n  func.return\n}").unwrap();
    assert!(print(&p).contains("{alpha = \"x\", zeta = 1}"));
}

#[test]
fn sidecar_globals() {
    let dir = tempfile::tempdir().unwrap();
    let bytes: Vec<u8> = [1.5f64, -2.0, 0.25]
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    std::fs::write(dir.path().join("w.bin"), &bytes).unwrap();
    let opts = ParseOptions {
        base_dir: Some(dir.path().to_path_buf()),
    };
    let text =
        "memref.global @w : memref<3xf64> = @file(\"w.bin\")\n\nfunc @f() {\n  func.return\n}";
    let p = parse_with(text, &opts).unwrap_or_else(|e| panic!("{e:?}"));
    assert!(print(&p).contains("@file(\"w.bin\")"));

    std::fs::write(dir.path().join("short.bin"), &bytes[..16]).unwrap();
    let bad = text.replace("w.bin", "short.bin");
    assert!(parse_with(&bad, &opts).is_err());
}
