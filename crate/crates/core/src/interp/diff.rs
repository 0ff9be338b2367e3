use std::fmt;

use super::value::{RtValue, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub enum DiffReport {
    Match,
    /// First differing element: output index, flat element index, values.
    Mismatch {
        output: usize,
        element: usize,
        a: Scalar,
        b: Scalar,
    },
    Structural(String),
}

impl DiffReport {
    pub fn is_match(&self) -> bool {
        matches!(self, DiffReport::Match)
    }
}

impl fmt::Display for DiffReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiffReport::Match => f.write_str("match"),
            DiffReport::Mismatch {
                output,
                element,
                a,
                b,
            } => write!(
                f,
                "mismatch at output {output} element {element}: {a:?} vs {b:?}"
            ),
            DiffReport::Structural(msg) => write!(f, "structural mismatch: {msg}"),
        }
    }
}

/// Integers compare exactly; floats pass when
/// `|a - b| <= rel_tol * max(|a|, |b|, 1)`. NaNs match each other.
pub fn diff_outputs(a: &[RtValue], b: &[RtValue], rel_tol: f64) -> DiffReport {
    if a.len() != b.len() {
        return DiffReport::Structural(format!("{} outputs vs {}", a.len(), b.len()));
    }
    for (output, (x, y)) in a.iter().zip(b).enumerate() {
        let (xs, ys) = match (x, y) {
            (RtValue::Scalar(tx, sx), RtValue::Scalar(ty, sy)) => {
                if tx != ty {
                    return DiffReport::Structural(format!("output {output}: {tx} vs {ty}"));
                }
                (vec![*sx], vec![*sy])
            }
            (RtValue::Tensor(tx), RtValue::Tensor(ty)) => {
                if tx.element != ty.element || tx.shape != ty.shape {
                    return DiffReport::Structural(format!(
                        "output {output}: {}{:?} vs {}{:?}",
                        tx.element, tx.shape, ty.element, ty.shape
                    ));
                }
                (tx.data.clone(), ty.data.clone())
            }
            _ => return DiffReport::Structural(format!("output {output}: scalar vs tensor")),
        };
        for (element, (&p, &q)) in xs.iter().zip(&ys).enumerate() {
            if !scalars_match(p, q, rel_tol) {
                return DiffReport::Mismatch {
                    output,
                    element,
                    a: p,
                    b: q,
                };
            }
        }
    }
    DiffReport::Match
}

fn scalars_match(a: Scalar, b: Scalar, rel_tol: f64) -> bool {
    match (a, b) {
        (Scalar::Int(x), Scalar::Int(y)) => x == y,
        _ => {
            let (x, y) = (a.as_float(), b.as_float());
            if x.is_nan() || y.is_nan() {
                return x.is_nan() && y.is_nan();
            }
            if x == y {
                return true;
            }
            (x - y).abs() <= rel_tol * x.abs().max(y.abs()).max(1.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::Tensor;
    use crate::ir::ScalarType;

    #[test]
    fn tolerance_rules() {
        let a = RtValue::Tensor(Tensor::from_floats(ScalarType::F64, &[2], &[1.0, 2.0]));
        let b = RtValue::Tensor(Tensor::from_floats(
            ScalarType::F64,
            &[2],
            &[1.0, 2.0 + 1e-15],
        ));
        assert!(diff_outputs(std::slice::from_ref(&a), std::slice::from_ref(&b), 1e-12).is_match());
        assert!(!diff_outputs(std::slice::from_ref(&a), &[b], 0.0).is_match());
        let c = RtValue::Tensor(Tensor::from_floats(ScalarType::F64, &[1], &[1.0]));
        assert!(matches!(
            diff_outputs(&[a], &[c], 1e-12),
            DiffReport::Structural(_)
        ));
        let i = RtValue::Tensor(Tensor::from_ints(ScalarType::I32, &[3], &[1, 2, 3]));
        assert!(diff_outputs(std::slice::from_ref(&i), std::slice::from_ref(&i), 0.0).is_match());
    }
}
