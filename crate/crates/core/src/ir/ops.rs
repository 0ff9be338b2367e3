//! The dialect vocabulary: op kinds, attributes and kokkos enum attributes.

use std::fmt;

use super::types::{ScalarType, Type};

macro_rules! op_kinds {
    ($($variant:ident => $name:literal,)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum OpKind {
            $($variant,)*
        }

        impl OpKind {
            pub const ALL: &'static [OpKind] = &[$(OpKind::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(OpKind::$variant => $name,)*
                }
            }

            pub fn from_name(s: &str) -> Option<OpKind> {
                match s {
                    $($name => Some(OpKind::$variant),)*
                    "func" => Some(OpKind::Func),
                    _ => None,
                }
            }
        }
    };
}

op_kinds! {
    Constant => "arith.constant",
    AddI => "arith.addi",
    SubI => "arith.subi",
    MulI => "arith.muli",
    DivI => "arith.divi",
    RemI => "arith.remi",
    AddF => "arith.addf",
    SubF => "arith.subf",
    MulF => "arith.mulf",
    DivF => "arith.divf",
    NegF => "arith.negf",
    CmpI => "arith.cmpi",
    CmpF => "arith.cmpf",
    Select => "arith.select",
    IndexCast => "arith.index_cast",
    MinUI => "arith.minui",
    MaxUI => "arith.maxui",
    MinSI => "arith.minsi",
    MaxSI => "arith.maxsi",
    MinimumF => "arith.minimumf",
    MaximumF => "arith.maximumf",
    CeilDivSI => "arith.ceildivsi",
    ShLI => "arith.shli",
    Global => "memref.global",
    GetGlobal => "memref.get_global",
    Alloc => "memref.alloc",
    Dealloc => "memref.dealloc",
    Load => "memref.load",
    Store => "memref.store",
    Dim => "memref.dim",
    SubView => "memref.subview",
    Cast => "memref.cast",
    Copy => "memref.copy",
    Parallel => "scf.parallel",
    For => "scf.for",
    If => "scf.if",
    Yield => "scf.yield",
    Reduce => "scf.reduce",
    ReduceReturn => "scf.reduce.return",
    Func => "func.func",
    Return => "func.return",
    Call => "func.call",
    Matmul => "linalg.matmul",
    Matvec => "linalg.matvec",
    BatchMatmul => "linalg.batch_matmul",
    Fill => "linalg.fill",
    Elementwise => "linalg.elementwise",
    LinalgReduce => "linalg.reduce",
    SpmvCsr => "sparse.spmv_csr",
    RangeParallel => "kokkos.range_parallel",
    TeamParallel => "kokkos.team_parallel",
    ThreadParallel => "kokkos.thread_parallel",
    Single => "kokkos.single",
    TeamBarrier => "kokkos.team_barrier",
    Sync => "kokkos.sync",
    Modify => "kokkos.modify",
    Gemm => "kokkos.gemm",
    Gemv => "kokkos.gemv",
    KokkosYield => "kokkos.yield",
}

impl OpKind {
    pub fn dialect(self) -> &'static str {
        let name = self.name();
        &name[..name.find('.').unwrap_or(name.len())]
    }

    pub fn is_terminator(self) -> bool {
        matches!(
            self,
            OpKind::Yield
                | OpKind::Reduce
                | OpKind::ReduceReturn
                | OpKind::Return
                | OpKind::KokkosYield
        )
    }

    pub fn is_linalg(self) -> bool {
        self.dialect() == "linalg"
    }

    pub fn is_kokkos_loop(self) -> bool {
        matches!(
            self,
            OpKind::RangeParallel | OpKind::TeamParallel | OpKind::ThreadParallel
        )
    }

    /// Binary arithmetic with identical operand and result types.
    pub fn is_binary_arith(self) -> bool {
        matches!(
            self,
            OpKind::AddI
                | OpKind::SubI
                | OpKind::MulI
                | OpKind::DivI
                | OpKind::RemI
                | OpKind::AddF
                | OpKind::SubF
                | OpKind::MulF
                | OpKind::DivF
                | OpKind::MinUI
                | OpKind::MaxUI
                | OpKind::MinSI
                | OpKind::MaxSI
                | OpKind::MinimumF
                | OpKind::MaximumF
                | OpKind::CeilDivSI
                | OpKind::ShLI
        )
    }

    pub fn is_float_arith(self) -> bool {
        matches!(
            self,
            OpKind::AddF
                | OpKind::SubF
                | OpKind::MulF
                | OpKind::DivF
                | OpKind::NegF
                | OpKind::MinimumF
                | OpKind::MaximumF
        )
    }

    /// Ops that may only run in host code: explicit memory management,
    /// whole-buffer copies, global lookups and calls.
    pub fn is_host_only(self) -> bool {
        matches!(
            self,
            OpKind::Alloc
                | OpKind::Dealloc
                | OpKind::Copy
                | OpKind::Call
                | OpKind::GetGlobal
                | OpKind::Gemm
                | OpKind::Gemv
        )
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Dense constant payload of a `memref.global`.
#[derive(Debug, Clone, PartialEq)]
pub enum DenseData {
    Int(Vec<i64>),
    Float(Vec<f64>),
}

impl DenseData {
    pub fn len(&self) -> usize {
        match self {
            DenseData::Int(v) => v.len(),
            DenseData::Float(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Decode raw little-endian element bytes.
    pub fn from_le_bytes(element: ScalarType, bytes: &[u8]) -> Option<DenseData> {
        let width = element.byte_width();
        if !bytes.len().is_multiple_of(width) {
            return None;
        }
        let chunks = bytes.chunks_exact(width);
        Some(match element {
            ScalarType::F16 => DenseData::Float(
                chunks
                    .map(|c| half::f16::from_le_bytes([c[0], c[1]]).to_f64())
                    .collect(),
            ),
            ScalarType::F32 => DenseData::Float(
                chunks
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                    .collect(),
            ),
            ScalarType::F64 => DenseData::Float(
                chunks
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                    .collect(),
            ),
            ScalarType::I1 => DenseData::Int(chunks.map(|c| (c[0] & 1) as i64).collect()),
            ScalarType::I32 => DenseData::Int(
                chunks
                    .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]) as i64)
                    .collect(),
            ),
            ScalarType::I64 | ScalarType::Index => DenseData::Int(
                chunks
                    .map(|c| i64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                    .collect(),
            ),
        })
    }

    pub fn to_le_bytes(&self, element: ScalarType) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len() * element.byte_width());
        match (self, element) {
            (DenseData::Float(v), ScalarType::F16) => v
                .iter()
                .for_each(|x| out.extend(half::f16::from_f64(*x).to_le_bytes())),
            (DenseData::Float(v), ScalarType::F32) => {
                v.iter().for_each(|x| out.extend((*x as f32).to_le_bytes()))
            }
            (DenseData::Float(v), _) => v.iter().for_each(|x| out.extend(x.to_le_bytes())),
            (DenseData::Int(v), ScalarType::I1) => v.iter().for_each(|x| out.push((*x & 1) as u8)),
            (DenseData::Int(v), ScalarType::I32) => {
                v.iter().for_each(|x| out.extend((*x as i32).to_le_bytes()))
            }
            (DenseData::Int(v), _) => v.iter().for_each(|x| out.extend(x.to_le_bytes())),
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Attr {
    Int(i64),
    Float(f64),
    Str(String),
    /// Bare keyword, used for enum-valued attributes.
    Ident(String),
    Symbol(String),
    Type(Type),
    Array(Vec<Attr>),
    /// Constant elements, optionally backed by a sidecar file.
    Dense {
        data: DenseData,
        file: Option<String>,
    },
}

impl Attr {
    pub fn ident(s: &str) -> Attr {
        Attr::Ident(s.to_string())
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Attr::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_ident(&self) -> Option<&str> {
        match self {
            Attr::Ident(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            Attr::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Attr::Str(s) => Some(s),
            _ => None,
        }
    }
}

macro_rules! keyword_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $kw:literal),* $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name {
            $($variant,)*
        }

        impl $name {
            pub fn keyword(self) -> &'static str {
                match self {
                    $($name::$variant => $kw,)*
                }
            }

            pub fn from_keyword(s: &str) -> Option<Self> {
                match s {
                    $($kw => Some($name::$variant),)*
                    _ => None,
                }
            }

            pub fn attr(self) -> Attr {
                Attr::ident(self.keyword())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.keyword())
            }
        }
    };
}

keyword_enum! {
    /// Where a top-level kokkos loop (or a sync/modify target copy) lives.
    ExecSpace { Host => "host", Device => "device" }
}

keyword_enum! {
    ParallelLevel {
        TopRange => "toprange",
        TopMdRange => "topmdrange",
        TeamThread => "teamthread",
        ThreadVector => "threadvector",
    }
}

keyword_enum! {
    SingleLevel { PerTeam => "perTeam", PerThread => "perThread" }
}

keyword_enum! {
    CmpPredicate {
        Eq => "eq",
        Ne => "ne",
        Slt => "slt",
        Sle => "sle",
        Sgt => "sgt",
        Sge => "sge",
        Ult => "ult",
        Ule => "ule",
        Ugt => "ugt",
        Uge => "uge",
        Oeq => "oeq",
        One => "one",
        Olt => "olt",
        Ole => "ole",
        Ogt => "ogt",
        Oge => "oge",
    }
}

impl CmpPredicate {
    pub fn is_float(self) -> bool {
        matches!(
            self,
            CmpPredicate::Oeq
                | CmpPredicate::One
                | CmpPredicate::Olt
                | CmpPredicate::Ole
                | CmpPredicate::Ogt
                | CmpPredicate::Oge
        )
    }
}

/// Associative combiners accepted in reduction regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CombinerKind {
    Add,
    Mul,
    Min,
    Max,
}

impl CombinerKind {
    pub fn from_op(kind: OpKind) -> Option<CombinerKind> {
        match kind {
            OpKind::AddI | OpKind::AddF => Some(CombinerKind::Add),
            OpKind::MulI | OpKind::MulF => Some(CombinerKind::Mul),
            OpKind::MinSI | OpKind::MinimumF => Some(CombinerKind::Min),
            OpKind::MaxSI | OpKind::MaximumF => Some(CombinerKind::Max),
            _ => None,
        }
    }

    pub fn op_for(self, element: ScalarType) -> OpKind {
        let float = element.is_float();
        match (self, float) {
            (CombinerKind::Add, false) => OpKind::AddI,
            (CombinerKind::Add, true) => OpKind::AddF,
            (CombinerKind::Mul, false) => OpKind::MulI,
            (CombinerKind::Mul, true) => OpKind::MulF,
            (CombinerKind::Min, false) => OpKind::MinSI,
            (CombinerKind::Min, true) => OpKind::MinimumF,
            (CombinerKind::Max, false) => OpKind::MaxSI,
            (CombinerKind::Max, true) => OpKind::MaximumF,
        }
    }
}
