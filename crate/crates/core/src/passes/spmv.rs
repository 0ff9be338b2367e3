use super::{for_each_block, parallel_op, reduce_op, PassResult};
use crate::ir::builder::OpBuilder;
use crate::ir::{CombinerKind, Diagnostic, OpKind, Operation, Program, Region, ScalarType};

/// Replace `sparse.spmv_csr` with the two-level CSR loop nest: a parallel
/// loop over rows whose body runs a parallel add-reduction over the row's
/// nonzeros.
pub fn lower_spmv_csr(program: &mut Program) -> PassResult {
    let mut diags = Vec::new();
    let Program { ops, values } = program;
    for_each_block(ops, &mut |block: &mut Vec<Operation>| {
        if !block.iter().any(|op| op.kind == OpKind::SpmvCsr) {
            return;
        }
        let mut out = Vec::with_capacity(block.len());
        for op in block.drain(..) {
            if op.kind != OpKind::SpmvCsr {
                out.push(op);
                continue;
            }
            let ranks_ok = op.operands.len() == 5
                && op
                    .operands
                    .iter()
                    .all(|&v| values.memref(v).is_some_and(|m| m.rank() == 1));
            if !ranks_ok {
                diags.push(Diagnostic::new(
                    "sparse.spmv_csr expects five rank-1 memref operands",
                ));
                out.push(op);
                continue;
            }
            let [rowptr, colind, vals, x, y] = [0, 1, 2, 3, 4].map(|i| op.operands[i]);
            let elem = values
                .memref(vals)
                .map(|m| m.element)
                .unwrap_or(ScalarType::F64);
            let mut b = OpBuilder::new(values);
            let c0 = b.const_index(0);
            let c1 = b.const_index(1);
            let n = b.op1(
                Operation::new(OpKind::Dim).with_operands([rowptr, c0]),
                ScalarType::Index,
            );
            let rows = b.binary(OpKind::SubI, n, c1);

            let i = b.value(ScalarType::Index);
            let mut row = OpBuilder::new(b.values);
            let begin = row.load(rowptr, &[i]);
            let i1 = row.binary(OpKind::AddI, i, c1);
            let end = row.load(rowptr, &[i1]);
            let len = row.binary(OpKind::SubI, end, begin);
            let zero = if elem.is_float() {
                row.const_float(elem, 0.0)
            } else {
                row.const_int(elem, 0)
            };

            let jj = row.value(ScalarType::Index);
            let mut nz = OpBuilder::new(row.values);
            let j = nz.binary(OpKind::AddI, begin, jj);
            let v = nz.load(vals, &[j]);
            let col = nz.load(colind, &[j]);
            let xv = nz.load(x, &[col]);
            let p = nz.binary(CombinerKind::Mul.op_for(elem), v, xv);
            let red = reduce_op(nz.values, &[p], &[CombinerKind::Add]);
            nz.push(red);
            let inner_body = Region::new(vec![jj], nz.finish());

            let sum = row.value(elem);
            row.push(parallel_op(
                &[c0],
                &[len],
                &[c1],
                &[zero],
                &[sum],
                inner_body,
            ));
            row.store(sum, y, &[i]);
            row.push(Operation::new(OpKind::Yield));
            let outer_body = Region::new(vec![i], row.finish());
            b.push(parallel_op(&[c0], &[rows], &[c1], &[], &[], outer_body));
            out.extend(b.finish());
        }
        *block = out;
    });
    if diags.is_empty() {
        Ok(())
    } else {
        Err(diags)
    }
}
