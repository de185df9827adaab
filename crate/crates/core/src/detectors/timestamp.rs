use std::collections::BTreeSet;

use super::{written_slot, Candidate, FunctionTrees, VulnType, Witness};
use crate::analysis::ContractIr;
use crate::dataflow::{data_reach, operand_node, Dataflow, DepNode};
use crate::ir::{EnvSource, InstrKind, InstrRef};

/// Branches on `block.timestamp` that decide whether a transfer or a storage
/// write happens, and transfers whose amount is computed from it.
pub(crate) fn detect_timestamp_dependency(
    ir: &ContractIr,
    df: &Dataflow,
    trees: &[FunctionTrees],
) -> Vec<Candidate> {
    let g = &df.deps;
    let Some(src) = g.node_id(&DepNode::Env {
        source: EnvSource::Timestamp,
    }) else {
        return Vec::new();
    };
    let tainted = data_reach(g, &BTreeSet::from([src]));
    let is_tainted = |func: usize, op| {
        operand_node(func, op)
            .and_then(|n| g.node_id(&n))
            .is_some_and(|n| tainted.contains(&n))
    };
    let mut out = Vec::new();
    for (fi, f) in ir.functions.iter().enumerate() {
        let pdom = &trees[fi].pdom;
        for b in &f.blocks {
            let InstrKind::JumpI { cond, then_to, .. } = &b.terminator().kind else {
                continue;
            };
            if !is_tainted(fi, cond) {
                continue;
            }
            let at = InstrRef {
                block: b.id,
                index: b.instrs.len() - 1,
            };
            let sink = f.blocks.iter().find_map(|s| {
                if !g.controlling_branches(fi, s.id.index()).contains(&at) {
                    return None;
                }
                s.instrs.iter().find_map(|i| match &i.kind {
                    InstrKind::ExtCall { kind, .. } => {
                        Some((s.id.index(), i.loc, kind.as_str().to_string()))
                    }
                    k if written_slot(k).is_some() => {
                        Some((s.id.index(), i.loc, "storage write".to_string()))
                    }
                    _ => None,
                })
            });
            let Some((sink_block, sink_loc, what)) = sink else {
                continue;
            };
            let taken = pdom.dominates(sink_block, then_to.index());
            let loc = b.terminator().loc;
            out.push(Candidate {
                vuln: VulnType::TimestampDependency,
                func: fi,
                loc,
                evidence: format!(
                    "branch on block.timestamp at line {} controls {what} at line {}",
                    loc.line, sink_loc.line
                ),
                witness: Witness::BranchTaken {
                    func: fi,
                    at,
                    taken,
                },
            });
        }
        for (at, ins) in f.instrs() {
            let InstrKind::ExtCall {
                kind,
                value: Some(value),
                ..
            } = &ins.kind
            else {
                continue;
            };
            if !is_tainted(fi, value) {
                continue;
            }
            out.push(Candidate {
                vuln: VulnType::TimestampDependency,
                func: fi,
                loc: ins.loc,
                evidence: format!(
                    "{} amount at line {} derives from block.timestamp",
                    kind.as_str(),
                    ins.loc.line
                ),
                witness: Witness::CallExecuted {
                    func: fi,
                    at,
                    success: Some(true),
                },
            });
        }
    }
    out
}
