use serde::Serialize;

use super::instrument::ExecFunction;
use crate::ir::Census;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FunctionCounters {
    pub block: Vec<u64>,
    /// Indexed by the plan's statement counter ids.
    pub stmt: Vec<u64>,
    /// After-JUMPDEST counters per block.
    pub post: Vec<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CoverageCounters {
    pub functions: Vec<FunctionCounters>,
}

impl CoverageCounters {
    pub fn new(functions: &[ExecFunction]) -> CoverageCounters {
        let functions = functions
            .iter()
            .map(|f| {
                let n = f.ssa.blocks.len();
                let stmts = f.plan.as_ref().map_or(0, |p| p.stmt_count);
                FunctionCounters {
                    block: vec![0; n],
                    stmt: vec![0; stmts],
                    post: vec![0; n],
                }
            })
            .collect();
        CoverageCounters { functions }
    }

    /// Element-wise sum; both sides must come from the same program.
    pub fn merge(&mut self, other: &CoverageCounters) {
        for (a, b) in self.functions.iter_mut().zip(&other.functions) {
            for (x, y) in a.block.iter_mut().zip(&b.block) {
                *x += y;
            }
            for (x, y) in a.stmt.iter_mut().zip(&b.stmt) {
                *x += y;
            }
            for (x, y) in a.post.iter_mut().zip(&b.post) {
                *x += y;
            }
        }
    }

    /// Covered statements, bucketed like [`Census`].
    pub fn covered(&self, functions: &[ExecFunction]) -> Census {
        let mut c = Census::default();
        for (f, counts) in functions.iter().zip(&self.functions) {
            let Some(plan) = &f.plan else { continue };
            for (b, ids) in f.ssa.blocks.iter().zip(&plan.stmt) {
                for (ins, id) in b.instrs.iter().zip(ids) {
                    let Some(id) = id else { continue };
                    if counts.stmt[*id] == 0 {
                        continue;
                    }
                    match ins.kind.jump_kind() {
                        Some(k) => c.jumps[k.index()] += 1,
                        None => c.regular += 1,
                    }
                }
            }
        }
        c
    }
}

/// `(j + k) / (sum J + K)`; an empty program counts as fully covered.
pub fn coverage(covered: &Census, total: &Census) -> f64 {
    let denom = total.total();
    if denom == 0 {
        return 1.0;
    }
    covered.total() as f64 / denom as f64
}
