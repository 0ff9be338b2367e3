use super::{parallel_op, reduce_op, PassResult, TargetConfig};
use crate::ir::builder::OpBuilder;
use crate::ir::{
    classify_combiner, reduce_dims, CombinerKind, Diagnostic, OpKind, Operation, Program, Region,
    ScalarType, ValueId, ValueTable,
};

/// Rewrite `linalg.matmul` to `kokkos.gemm` and `linalg.matvec` to
/// `kokkos.gemv` when kernel-library calls are enabled. Ops nested inside
/// parallel loops are left for the loop lowering.
pub fn lower_linalg_to_kernels(program: &mut Program, config: &TargetConfig) -> PassResult {
    fn rewrite(ops: &mut [Operation]) {
        for op in ops {
            match op.kind {
                OpKind::Matmul => op.kind = OpKind::Gemm,
                OpKind::Matvec => op.kind = OpKind::Gemv,
                OpKind::Parallel => {}
                k if k.is_kokkos_loop() => {}
                _ => {
                    for r in &mut op.regions {
                        rewrite(&mut r.ops);
                    }
                }
            }
        }
    }
    if config.kernel_library_calls {
        for op in &mut program.ops {
            if op.kind == OpKind::Func {
                for r in &mut op.regions {
                    rewrite(&mut r.ops);
                }
            }
        }
    }
    Ok(())
}

/// Replace every linalg op with an equivalent nest of `scf.parallel` loops.
pub fn lower_dense_linalg(program: &mut Program) -> PassResult {
    let mut diags = Vec::new();
    let Program { ops, values } = program;
    super::for_each_block(ops, &mut |block: &mut Vec<Operation>| {
        if !block.iter().any(|op| op.kind.is_linalg()) {
            return;
        }
        let mut out = Vec::with_capacity(block.len());
        for op in block.drain(..) {
            if !op.kind.is_linalg() {
                out.push(op);
                continue;
            }
            let mut b = OpBuilder::new(values);
            match lower_one(&mut b, op) {
                Ok(()) => out.extend(b.finish()),
                Err((op, msg)) => {
                    diags.push(Diagnostic::new(msg));
                    out.push(op);
                }
            }
        }
        *block = out;
    });
    if diags.is_empty() {
        Ok(())
    } else {
        Err(diags)
    }
}

struct Consts {
    c0: ValueId,
    c1: ValueId,
}

/// Build one (possibly multi-dimensional) normalized `scf.parallel`.
/// `body` must push the region terminator.
fn nest(
    values: &mut ValueTable,
    k: &Consts,
    ubs: &[ValueId],
    inits: &[ValueId],
    results: &[ValueId],
    body: impl FnOnce(&mut OpBuilder, &[ValueId]),
) -> Operation {
    let ivs: Vec<ValueId> = ubs
        .iter()
        .map(|_| values.new_value(ScalarType::Index))
        .collect();
    let mut inner = OpBuilder::new(values);
    body(&mut inner, &ivs);
    let region = Region::new(ivs, inner.finish());
    let n = ubs.len();
    parallel_op(&vec![k.c0; n], ubs, &vec![k.c1; n], inits, results, region)
}

fn yield_op() -> Operation {
    Operation::new(OpKind::Yield)
}

fn element(values: &ValueTable, v: ValueId) -> ScalarType {
    values
        .memref(v)
        .map(|m| m.element)
        .unwrap_or(ScalarType::F64)
}

fn rank(values: &ValueTable, v: ValueId) -> usize {
    values.memref(v).map(|m| m.rank()).unwrap_or(0)
}

/// `c[.., i, j] = c[.., i, j] + sum_k a[.., i, k] * b[.., k, j]`, with an
/// optional leading batch axis.
fn contraction(b: &mut OpBuilder, k: &Consts, ops: &[ValueId], batched: bool) {
    let (a, bm, c) = (ops[0], ops[1], ops[2]);
    let elem = element(b.values, a);
    let o = batched as usize;
    let batch = batched.then(|| b.extent(a, 0));
    let m = b.extent(a, o);
    let kk = b.extent(a, o + 1);
    let n = b.extent(bm, o + 1);
    let mul = CombinerKind::Mul.op_for(elem);
    let body_ij = move |ib: &mut OpBuilder, prefix: Vec<ValueId>, i: ValueId, j: ValueId| {
        let at = |x: ValueId, y: ValueId| prefix.iter().copied().chain([x, y]).collect::<Vec<_>>();
        let init = ib.load(c, &at(i, j));
        let s = ib.value(elem);
        let red = nest(ib.values, k, &[kk], &[init], &[s], |rb, ks| {
            let x = rb.load(a, &at(i, ks[0]));
            let y = rb.load(bm, &at(ks[0], j));
            let p = rb.binary(mul, x, y);
            let r = reduce_op(rb.values, &[p], &[CombinerKind::Add]);
            rb.push(r);
        });
        ib.push(red);
        ib.store(s, c, &at(i, j));
        ib.push(yield_op());
    };
    let ij = |vb: &mut OpBuilder, prefix: Vec<ValueId>| {
        nest(vb.values, k, &[m], &[], &[], |ob, is| {
            let i = is[0];
            let inner = nest(ob.values, k, &[n], &[], &[], |jb, js| {
                body_ij(jb, prefix, i, js[0])
            });
            ob.push(inner);
            ob.push(yield_op());
        })
    };
    let top = match batch {
        Some(nb) => nest(b.values, k, &[nb], &[], &[], |bb, bs| {
            let l = ij(bb, vec![bs[0]]);
            bb.push(l);
            bb.push(yield_op());
        }),
        None => ij(b, Vec::new()),
    };
    b.push(top);
}

// The op travels back on failure so the caller can keep it in place.
#[allow(clippy::result_large_err)]
fn lower_one(b: &mut OpBuilder, op: Operation) -> Result<(), (Operation, String)> {
    let c0 = b.const_index(0);
    let c1 = b.const_index(1);
    let k = Consts { c0, c1 };
    match op.kind {
        OpKind::Matmul => contraction(b, &k, &op.operands, false),
        OpKind::BatchMatmul => contraction(b, &k, &op.operands, true),
        OpKind::Matvec => {
            let (a, x, y) = (op.operands[0], op.operands[1], op.operands[2]);
            let elem = element(b.values, a);
            let m = b.extent(a, 0);
            let n = b.extent(a, 1);
            let l = nest(b.values, &k, &[m], &[], &[], |ib, is| {
                let init = ib.load(y, &[is[0]]);
                let s = ib.value(elem);
                let red = nest(ib.values, &k, &[n], &[init], &[s], |rb, js| {
                    let p = rb.load(a, &[is[0], js[0]]);
                    let q = rb.load(x, &[js[0]]);
                    let r = rb.binary(CombinerKind::Mul.op_for(elem), p, q);
                    let red = reduce_op(rb.values, &[r], &[CombinerKind::Add]);
                    rb.push(red);
                });
                ib.push(red);
                ib.store(s, y, &[is[0]]);
                ib.push(yield_op());
            });
            b.push(l);
        }
        OpKind::Fill => {
            let (v, out) = (op.operands[0], op.operands[1]);
            let r = rank(b.values, out);
            if r == 0 {
                b.store(v, out, &[]);
            } else {
                let ubs: Vec<_> = (0..r).map(|d| b.extent(out, d)).collect();
                let l = nest(b.values, &k, &ubs, &[], &[], |ib, is| {
                    ib.store(v, out, is);
                    ib.push(yield_op());
                });
                b.push(l);
            }
        }
        OpKind::Elementwise => {
            let Some(&out) = op.operands.last() else {
                return Err((op, "linalg.elementwise without operands".into()));
            };
            let r = rank(b.values, out);
            let mut op = op;
            let mut region = op.regions.remove(0);
            let Some(term) = region
                .ops
                .pop()
                .filter(|t| t.kind == OpKind::Yield && t.operands.len() == 1)
            else {
                return Err((op, "linalg.elementwise body must yield one value".into()));
            };
            let operands = op.operands.clone();
            let body = move |ib: &mut OpBuilder, is: &[ValueId]| {
                for (&m, &arg) in operands.iter().zip(&region.args) {
                    ib.push(
                        Operation::new(OpKind::Load)
                            .with_operands(std::iter::once(m).chain(is.iter().copied()))
                            .with_results([arg]),
                    );
                }
                for o in region.ops {
                    ib.push(o);
                }
                ib.store(term.operands[0], out, is);
            };
            if r == 0 {
                body(b, &[]);
            } else {
                let ubs: Vec<_> = (0..r).map(|d| b.extent(out, d)).collect();
                let l = nest(b.values, &k, &ubs, &[], &[], |ib, is| {
                    body(ib, is);
                    ib.push(yield_op());
                });
                b.push(l);
            }
        }
        OpKind::LinalgReduce => {
            let (input, out) = (op.operands[0], op.operands[1]);
            let Some(kind) = op.regions.first().and_then(classify_combiner) else {
                return Err((
                    op,
                    "linalg.reduce combiner must be add, mul, min or max".into(),
                ));
            };
            let Some(dims) = reduce_dims(&op) else {
                return Err((op, "linalg.reduce requires dimensions".into()));
            };
            let elem = element(b.values, input);
            let r = rank(b.values, input);
            let kept: Vec<usize> = (0..r).filter(|d| !dims.contains(d)).collect();
            let kept_ubs: Vec<_> = kept.iter().map(|&d| b.extent(input, d)).collect();
            let red_ubs: Vec<_> = dims.iter().map(|&d| b.extent(input, d)).collect();
            let full = |os: &[ValueId], rs: &[ValueId]| {
                let mut idx = vec![c0; r];
                for (p, &d) in kept.iter().enumerate() {
                    idx[d] = os[p];
                }
                for (p, &d) in dims.iter().enumerate() {
                    idx[d] = rs[p];
                }
                idx
            };
            let per_out = |ob: &mut OpBuilder, os: &[ValueId]| {
                let init = ob.load(out, os);
                if dims.is_empty() {
                    let v = ob.load(input, &full(os, &[]));
                    let c = ob.binary(kind.op_for(elem), init, v);
                    ob.store(c, out, os);
                    return;
                }
                let s = ob.value(elem);
                let l = nest(ob.values, &k, &red_ubs, &[init], &[s], |rb, rs| {
                    let v = rb.load(input, &full(os, rs));
                    let red = reduce_op(rb.values, &[v], &[kind]);
                    rb.push(red);
                });
                ob.push(l);
                ob.store(s, out, os);
            };
            if kept.is_empty() {
                per_out(b, &[]);
            } else {
                let l = nest(b.values, &k, &kept_ubs, &[], &[], |ob, os| {
                    per_out(ob, os);
                    ob.push(yield_op());
                });
                b.push(l);
            }
        }
        _ => return Err((op, "unsupported linalg op".into())),
    }
    Ok(())
}
