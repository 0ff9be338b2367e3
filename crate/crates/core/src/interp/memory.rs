//! Simulated two-space memory: paired host/device copies per root buffer
//! with modified flags, and the transfer trace.

use std::fmt;

use super::value::Scalar;
use crate::ir::{OpPath, ScalarType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    Host,
    Device,
}

impl Space {
    pub fn index(self) -> usize {
        match self {
            Space::Host => 0,
            Space::Device => 1,
        }
    }

    pub fn other(self) -> Space {
        match self {
            Space::Host => Space::Device,
            Space::Device => Space::Host,
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Space::Host => "host",
            Space::Device => "device",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    H2D {
        root: String,
        bytes: usize,
    },
    D2H {
        root: String,
        bytes: usize,
    },
    SyncNoop {
        root: String,
        space: Space,
    },
    StaleAccess {
        root: String,
        space: Space,
        path: OpPath,
    },
}

impl TraceEvent {
    pub fn is_copy(&self) -> bool {
        matches!(self, TraceEvent::H2D { .. } | TraceEvent::D2H { .. })
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceEvent::H2D { root, bytes } => write!(f, "H2D root={root} bytes={bytes}"),
            TraceEvent::D2H { root, bytes } => write!(f, "D2H root={root} bytes={bytes}"),
            TraceEvent::SyncNoop { root, space } => write!(f, "SyncNoop root={root} space={space}"),
            TraceEvent::StaleAccess { root, space, path } => {
                write!(f, "StaleAccess root={root} space={space} op={path}")
            }
        }
    }
}

/// Ordered log of transfers and coherence events.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransferTrace {
    pub events: Vec<TraceEvent>,
}

impl TransferTrace {
    pub fn h2d(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, TraceEvent::H2D { .. }))
            .count()
    }

    pub fn d2h(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, TraceEvent::D2H { .. }))
            .count()
    }

    pub fn copies(&self) -> usize {
        self.events.iter().filter(|e| e.is_copy()).count()
    }

    pub fn stale_accesses(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, TraceEvent::StaleAccess { .. }))
            .count()
    }

    pub fn bytes_copied(&self) -> usize {
        self.events
            .iter()
            .map(|e| match e {
                TraceEvent::H2D { bytes, .. } | TraceEvent::D2H { bytes, .. } => *bytes,
                _ => 0,
            })
            .sum()
    }

    pub fn to_text(&self) -> String {
        self.events.iter().map(|e| format!("{e}\n")).collect()
    }
}

/// Storage and coherence state of one root allocation. Subviews are
/// handles onto a root, so their flags are the root's flags.
#[derive(Debug, Clone)]
pub struct SimBuffer {
    pub name: String,
    pub element: ScalarType,
    pub extents: Vec<usize>,
    /// `copies[Space::index()]`.
    pub copies: [Vec<Scalar>; 2],
    /// modifiedHost, modifiedDevice.
    pub modified: [bool; 2],
    /// Writes made in a space that no `modify` has published yet.
    pub dirty: [bool; 2],
    pub refcount: usize,
}

impl SimBuffer {
    pub fn new(name: String, element: ScalarType, extents: Vec<usize>, data: Vec<Scalar>) -> Self {
        SimBuffer {
            name,
            element,
            extents,
            copies: [data.clone(), data],
            modified: [false; 2],
            dirty: [false; 2],
            refcount: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.copies[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bytes(&self) -> usize {
        self.len() * self.element.byte_width()
    }

    /// True if the copy in `space` may be behind the other one.
    pub fn stale_in(&self, space: Space) -> bool {
        let o = space.other().index();
        self.modified[o] || self.dirty[o]
    }

    /// Copy `space.other()` into `space` and clear the opposite flags.
    pub fn transfer_into(&mut self, space: Space) {
        let (src, dst) = (space.other().index(), space.index());
        self.copies[dst] = self.copies[src].clone();
        self.modified[src] = false;
        self.dirty[src] = false;
    }
}

/// A (possibly offset) row-major window onto a root buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemHandle {
    pub root: usize,
    pub offset: usize,
    pub shape: Vec<usize>,
    pub strides: Vec<usize>,
}

impl MemHandle {
    pub fn whole(root: usize, shape: Vec<usize>) -> Self {
        let strides = row_major_strides(&shape);
        MemHandle {
            root,
            offset: 0,
            shape,
            strides,
        }
    }

    /// Flat element index for `idx`, or the first out-of-range axis.
    pub fn linear(&self, idx: &[i64]) -> Result<usize, (usize, i64)> {
        let mut at = self.offset;
        for (axis, (&i, (&n, &s))) in idx
            .iter()
            .zip(self.shape.iter().zip(&self.strides))
            .enumerate()
        {
            if i < 0 || i as u64 >= n as u64 {
                return Err((axis, i));
            }
            at += i as usize * s;
        }
        Ok(at)
    }
}

pub fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}
