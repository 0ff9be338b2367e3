//! Structural equality of programs up to SSA renaming.

use std::collections::HashMap;

use super::program::{Operation, Program, Region, ValueId};

/// Checks that `a` and `b` have the same ops, types, attributes, region
/// shape and operand wiring. Returns a description of the first mismatch.
pub fn structurally_equal(a: &Program, b: &Program) -> Result<(), String> {
    let mut cx = Iso {
        a,
        b,
        fwd: HashMap::new(),
        back: HashMap::new(),
    };
    if a.ops.len() != b.ops.len() {
        return Err(format!(
            "top-level op count {} vs {}",
            a.ops.len(),
            b.ops.len()
        ));
    }
    for (x, y) in a.ops.iter().zip(&b.ops) {
        cx.op(x, y)?;
    }
    Ok(())
}

struct Iso<'p> {
    a: &'p Program,
    b: &'p Program,
    fwd: HashMap<ValueId, ValueId>,
    back: HashMap<ValueId, ValueId>,
}

impl Iso<'_> {
    fn bind(&mut self, x: ValueId, y: ValueId) -> Result<(), String> {
        if self.a.values.get(x) != self.b.values.get(y) {
            return Err(format!(
                "type mismatch: {:?} vs {:?}",
                self.a.values.get(x),
                self.b.values.get(y)
            ));
        }
        if self.fwd.insert(x, y).is_some() || self.back.insert(y, x).is_some() {
            return Err("value defined twice".into());
        }
        Ok(())
    }

    fn uses(&self, x: ValueId, y: ValueId) -> Result<(), String> {
        match self.fwd.get(&x) {
            Some(&m) if m == y => Ok(()),
            _ => Err(format!("operand wiring differs at {x} / {y}")),
        }
    }

    fn op(&mut self, x: &Operation, y: &Operation) -> Result<(), String> {
        if x.kind != y.kind {
            return Err(format!("op {} vs {}", x.kind, y.kind));
        }
        if x.attrs != y.attrs {
            return Err(format!("attributes of {} differ", x.kind));
        }
        if x.operands.len() != y.operands.len()
            || x.results.len() != y.results.len()
            || x.regions.len() != y.regions.len()
        {
            return Err(format!("arity of {} differs", x.kind));
        }
        for (&p, &q) in x.operands.iter().zip(&y.operands) {
            self.uses(p, q)?;
        }
        for (&p, &q) in x.results.iter().zip(&y.results) {
            self.bind(p, q)?;
        }
        for (r, s) in x.regions.iter().zip(&y.regions) {
            self.region(r, s)?;
        }
        Ok(())
    }

    fn region(&mut self, r: &Region, s: &Region) -> Result<(), String> {
        if r.args.len() != s.args.len() || r.ops.len() != s.ops.len() {
            return Err("region shape differs".into());
        }
        for (&p, &q) in r.args.iter().zip(&s.args) {
            self.bind(p, q)?;
        }
        for (x, y) in r.ops.iter().zip(&s.ops) {
            self.op(x, y)?;
        }
        Ok(())
    }
}
