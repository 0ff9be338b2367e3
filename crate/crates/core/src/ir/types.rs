//! Scalar, memref and handle types.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScalarType {
    F16,
    F32,
    F64,
    I1,
    I32,
    I64,
    Index,
}

impl ScalarType {
    pub const ALL: [ScalarType; 7] = [
        ScalarType::F16,
        ScalarType::F32,
        ScalarType::F64,
        ScalarType::I1,
        ScalarType::I32,
        ScalarType::I64,
        ScalarType::Index,
    ];

    pub fn is_float(self) -> bool {
        matches!(self, ScalarType::F16 | ScalarType::F32 | ScalarType::F64)
    }

    /// Integer-like, including `i1` and `index`.
    pub fn is_integer(self) -> bool {
        !self.is_float()
    }

    pub fn byte_width(self) -> usize {
        match self {
            ScalarType::F16 => 2,
            ScalarType::F32 | ScalarType::I32 => 4,
            ScalarType::F64 | ScalarType::I64 | ScalarType::Index => 8,
            ScalarType::I1 => 1,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            ScalarType::F16 => "f16",
            ScalarType::F32 => "f32",
            ScalarType::F64 => "f64",
            ScalarType::I1 => "i1",
            ScalarType::I32 => "i32",
            ScalarType::I64 => "i64",
            ScalarType::Index => "index",
        }
    }

    pub fn from_keyword(s: &str) -> Option<ScalarType> {
        ScalarType::ALL.into_iter().find(|t| t.keyword() == s)
    }
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Where a buffer lives. Everything starts `Unassigned`; the dual-view
/// management pass assigns the other three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MemorySpace {
    #[default]
    Unassigned,
    Host,
    Device,
    DualView,
}

impl MemorySpace {
    pub fn keyword(self) -> Option<&'static str> {
        match self {
            MemorySpace::Unassigned => None,
            MemorySpace::Host => Some("host"),
            MemorySpace::Device => Some("device"),
            MemorySpace::DualView => Some("dualview"),
        }
    }

    pub fn from_keyword(s: &str) -> Option<MemorySpace> {
        match s {
            "host" => Some(MemorySpace::Host),
            "device" => Some(MemorySpace::Device),
            "dualview" => Some(MemorySpace::DualView),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dim {
    Static(u64),
    Dynamic,
}

impl Dim {
    pub fn as_static(self) -> Option<u64> {
        match self {
            Dim::Static(n) => Some(n),
            Dim::Dynamic => None,
        }
    }
}

/// Row-major shaped buffer type.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MemRefType {
    pub element: ScalarType,
    pub shape: Vec<Dim>,
    pub space: MemorySpace,
}

impl MemRefType {
    pub fn new(element: ScalarType, shape: Vec<Dim>) -> Self {
        MemRefType {
            element,
            shape,
            space: MemorySpace::Unassigned,
        }
    }

    pub fn dynamic(element: ScalarType, rank: usize) -> Self {
        Self::new(element, vec![Dim::Dynamic; rank])
    }

    pub fn fixed(element: ScalarType, shape: &[u64]) -> Self {
        Self::new(element, shape.iter().map(|&n| Dim::Static(n)).collect())
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn with_space(mut self, space: MemorySpace) -> Self {
        self.space = space;
        self
    }

    /// Number of elements if every extent is static.
    pub fn static_len(&self) -> Option<u64> {
        self.shape
            .iter()
            .try_fold(1u64, |acc, d| acc.checked_mul(d.as_static()?))
    }

    /// Same element and rank; static extents agree wherever both are static;
    /// spaces agree unless either is unassigned.
    pub fn compatible(&self, other: &MemRefType) -> bool {
        self.element == other.element
            && self.rank() == other.rank()
            && self
                .shape
                .iter()
                .zip(&other.shape)
                .all(|(a, b)| match (a, b) {
                    (Dim::Static(x), Dim::Static(y)) => x == y,
                    _ => true,
                })
            && (self.space == other.space
                || self.space == MemorySpace::Unassigned
                || other.space == MemorySpace::Unassigned)
    }
}

impl fmt::Display for MemRefType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("memref<")?;
        for d in &self.shape {
            match d {
                Dim::Static(n) => write!(f, "{n}x")?,
                Dim::Dynamic => f.write_str("?x")?,
            }
        }
        write!(f, "{}", self.element)?;
        if let Some(space) = self.space.keyword() {
            write!(f, ", {space}")?;
        }
        f.write_str(">")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Type {
    Scalar(ScalarType),
    MemRef(MemRefType),
    /// Team member handle exposed by `kokkos.team_parallel`.
    Team,
}

impl Type {
    pub const INDEX: Type = Type::Scalar(ScalarType::Index);

    pub fn as_scalar(&self) -> Option<ScalarType> {
        match self {
            Type::Scalar(s) => Some(*s),
            _ => None,
        }
    }

    pub fn as_memref(&self) -> Option<&MemRefType> {
        match self {
            Type::MemRef(m) => Some(m),
            _ => None,
        }
    }

    pub fn is_index(&self) -> bool {
        matches!(self, Type::Scalar(ScalarType::Index))
    }
}

impl From<ScalarType> for Type {
    fn from(s: ScalarType) -> Self {
        Type::Scalar(s)
    }
}

impl From<MemRefType> for Type {
    fn from(m: MemRefType) -> Self {
        Type::MemRef(m)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Scalar(s) => write!(f, "{s}"),
            Type::MemRef(m) => write!(f, "{m}"),
            Type::Team => f.write_str("!kokkos.team"),
        }
    }
}
