//! Text-level checks on emitted C++.

use lapis_core::ir::{OpKind, Operation, Program};
use regex::Regex;

/// Immutable declarations whose whole initializer is a literal. Mutable
/// loop-carried variables start from their init value and are excluded.
pub fn constant_definitions(source: &str) -> Vec<String> {
    let decl = Regex::new(r"^\s*const\s+[\w:<>]+\s+(v\d+)\s*=\s*(.+);\s*$").unwrap();
    let literal = Regex::new(
        r"^\(?-?(?:[0-9][0-9a-zA-Z.+\-]*|INT64_MIN|INT64_C\(-?\d+\)|true|false|std::numeric_limits<\w+>::(?:infinity|quiet_NaN)\(\)|LAPIS::half\(.*\))\)?$",
    )
    .unwrap();
    source
        .lines()
        .filter(|l| {
            decl.captures(l)
                .is_some_and(|c| literal.is_match(c[2].trim()))
        })
        .map(str::to_string)
        .collect()
}

/// Deepest nesting of parallel dispatches in the emitted source: every
/// `parallel_for`/`parallel_reduce` opens one level that lasts until its
/// lambda body closes.
pub fn emitted_parallel_depth(source: &str) -> usize {
    let bytes = source.as_bytes();
    let mut open: Vec<usize> = Vec::new();
    let mut pending = 0;
    let mut braces = 0usize;
    let mut best = 0;
    let mut i = 0;
    while i < bytes.len() {
        let rest = &source[i..];
        if rest.starts_with("parallel_for(") || rest.starts_with("parallel_reduce(") {
            pending += 1;
        }
        match bytes[i] {
            b'{' => {
                braces += 1;
                while pending > 0 {
                    open.push(braces);
                    pending -= 1;
                }
                best = best.max(open.len());
            }
            b'}' => {
                while open.last() == Some(&braces) {
                    open.pop();
                }
                braces -= 1;
            }
            _ => {}
        }
        i += 1;
    }
    best
}

/// Same measure on the IR. A thread loop expands to a team dispatch plus
/// a team-thread range, so it counts twice.
pub fn ir_parallel_depth(program: &Program) -> usize {
    fn depth(op: &Operation) -> usize {
        let inner = op
            .regions
            .iter()
            .flat_map(|r| &r.ops)
            .map(depth)
            .max()
            .unwrap_or(0);
        let own = match op.kind {
            OpKind::ThreadParallel => 2,
            OpKind::RangeParallel | OpKind::TeamParallel => 1,
            _ => 0,
        };
        inner + own
    }
    program.ops.iter().map(depth).max().unwrap_or(0)
}

pub fn in_order(src: &str, tokens: &[&str]) -> Result<(), String> {
    let mut at = 0;
    for t in tokens {
        match src[at..].find(t) {
            Some(i) => at += i + t.len(),
            None => return Err(format!("`{t}` missing after byte {at}")),
        }
    }
    Ok(())
}
