//! Runtime scalars, host tensors and the `shape: [..] data: [..]` text format.

use std::fmt;

use rand::Rng;

use crate::ir::{DenseData, ScalarType};
use crate::textio::format_float;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scalar {
    Int(i64),
    Float(f64),
}

impl Scalar {
    pub fn zero(ty: ScalarType) -> Scalar {
        if ty.is_float() {
            Scalar::Float(0.0)
        } else {
            Scalar::Int(0)
        }
    }

    pub fn as_int(self) -> i64 {
        match self {
            Scalar::Int(v) => v,
            Scalar::Float(v) => v as i64,
        }
    }

    pub fn as_float(self) -> f64 {
        match self {
            Scalar::Int(v) => v as f64,
            Scalar::Float(v) => v,
        }
    }

    /// Bring a raw value into the representable range of `ty`:
    /// two's-complement wraparound for integers, rounding for floats.
    pub fn normalize(self, ty: ScalarType) -> Scalar {
        match ty {
            ScalarType::F64 => Scalar::Float(self.as_float()),
            ScalarType::F32 => Scalar::Float(self.as_float() as f32 as f64),
            ScalarType::F16 => Scalar::Float(half::f16::from_f64(self.as_float()).to_f64()),
            ScalarType::I1 => Scalar::Int(self.as_int() & 1),
            ScalarType::I32 => Scalar::Int(self.as_int() as i32 as i64),
            ScalarType::I64 | ScalarType::Index => Scalar::Int(self.as_int()),
        }
    }

    pub fn text(self, ty: ScalarType) -> String {
        match self {
            Scalar::Int(v) => v.to_string(),
            Scalar::Float(v) => format_float(v, Some(ty)),
        }
    }
}

/// A dense row-major array held by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub element: ScalarType,
    pub shape: Vec<usize>,
    pub data: Vec<Scalar>,
}

impl Tensor {
    pub fn new(element: ScalarType, shape: Vec<usize>, data: Vec<Scalar>) -> Self {
        let data = data.into_iter().map(|s| s.normalize(element)).collect();
        Tensor {
            element,
            shape,
            data,
        }
    }

    pub fn from_ints(element: ScalarType, shape: &[usize], data: &[i64]) -> Self {
        Self::new(
            element,
            shape.to_vec(),
            data.iter().map(|&v| Scalar::Int(v)).collect(),
        )
    }

    pub fn from_floats(element: ScalarType, shape: &[usize], data: &[f64]) -> Self {
        Self::new(
            element,
            shape.to_vec(),
            data.iter().map(|&v| Scalar::Float(v)).collect(),
        )
    }

    pub fn zeros(element: ScalarType, shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            element,
            shape: shape.to_vec(),
            data: vec![Scalar::zero(element); n],
        }
    }

    pub fn from_dense(element: ScalarType, shape: &[usize], dense: &DenseData) -> Self {
        let data = match dense {
            DenseData::Int(v) => v.iter().map(|&x| Scalar::Int(x)).collect(),
            DenseData::Float(v) => v.iter().map(|&x| Scalar::Float(x)).collect(),
        };
        Self::new(element, shape.to_vec(), data)
    }

    /// Uniform random contents: integers in [-8, 8], floats in [-1, 1).
    pub fn random(element: ScalarType, shape: &[usize], rng: &mut impl Rng) -> Self {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| match element {
                t if t.is_float() => Scalar::Float(rng.gen_range(-1.0..1.0)),
                ScalarType::I1 => Scalar::Int(rng.gen_range(0..=1)),
                _ => Scalar::Int(rng.gen_range(-8..=8)),
            })
            .collect();
        Self::new(element, shape.to_vec(), data)
    }

    pub fn floats(&self) -> Vec<f64> {
        self.data.iter().map(|s| s.as_float()).collect()
    }

    pub fn ints(&self) -> Vec<i64> {
        self.data.iter().map(|s| s.as_int()).collect()
    }

    pub fn byte_len(&self) -> usize {
        self.data.len() * self.element.byte_width()
    }

    /// Parse `shape: [d0, d1, ...] data: [x0, x1, ...]`.
    pub fn parse_text(element: ScalarType, line: &str) -> Result<Tensor, String> {
        let rest = line
            .trim()
            .strip_prefix("shape:")
            .ok_or("expected `shape:`")?;
        let (shape_txt, rest) = bracketed(rest)?;
        let rest = rest
            .trim()
            .strip_prefix("data:")
            .ok_or("expected `data:`")?;
        let (data_txt, tail) = bracketed(rest)?;
        if !tail.trim().is_empty() {
            return Err(format!("trailing text `{}`", tail.trim()));
        }
        let shape = split_items(shape_txt)
            .map(|s| s.parse::<usize>().map_err(|_| format!("bad extent `{s}`")))
            .collect::<Result<Vec<_>, _>>()?;
        let data = split_items(data_txt)
            .map(|s| parse_scalar(element, s))
            .collect::<Result<Vec<_>, _>>()?;
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(format!(
                "shape holds {n} elements but {} were given",
                data.len()
            ));
        }
        Ok(Tensor::new(element, shape, data))
    }
}

fn bracketed(s: &str) -> Result<(&str, &str), String> {
    let s = s.trim_start();
    let s = s.strip_prefix('[').ok_or("expected `[`")?;
    let end = s.find(']').ok_or("expected `]`")?;
    Ok((&s[..end], &s[end + 1..]))
}

fn split_items(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

pub fn parse_scalar(element: ScalarType, s: &str) -> Result<Scalar, String> {
    if element.is_float() {
        let v = match s {
            "inf" => f64::INFINITY,
            "-inf" => f64::NEG_INFINITY,
            "nan" => f64::NAN,
            _ => s.parse::<f64>().map_err(|_| format!("bad float `{s}`"))?,
        };
        Ok(Scalar::Float(v))
    } else {
        s.parse::<i64>()
            .map(Scalar::Int)
            .map_err(|_| format!("bad integer `{s}`"))
    }
}

impl fmt::Display for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shape: Vec<_> = self.shape.iter().map(|d| d.to_string()).collect();
        let data: Vec<_> = self.data.iter().map(|s| s.text(self.element)).collect();
        write!(
            f,
            "shape: [{}] data: [{}]",
            shape.join(", "),
            data.join(", ")
        )
    }
}

/// An argument to or result of an interpreted function.
#[derive(Debug, Clone, PartialEq)]
pub enum RtValue {
    Scalar(ScalarType, Scalar),
    Tensor(Tensor),
}

impl fmt::Display for RtValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RtValue::Scalar(ty, s) => write!(f, "shape: [] data: [{}]", s.text(*ty)),
            RtValue::Tensor(t) => write!(f, "{t}"),
        }
    }
}
