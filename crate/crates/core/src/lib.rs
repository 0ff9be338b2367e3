//! Lowering of a small linalg/scf/memref IR to Kokkos-style parallel C++,
//! with a two-space reference interpreter used as the semantic oracle.

pub mod emitter;
pub mod interp;
pub mod ir;
pub mod passes;
pub mod textio;
