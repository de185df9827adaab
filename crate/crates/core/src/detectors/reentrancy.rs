use std::collections::BTreeSet;

use super::{writes_after, Candidate, FunctionTrees, VulnType, Witness};
use crate::analysis::ContractIr;
use crate::dataflow::{data_sources, operand_node, Dataflow, DepNode};
use crate::frontend::CallKind;
use crate::ir::{InstrKind, Operand, SlotId};

/// A value-carrying `call` whose guard state (storage read by a dominating
/// branch condition, or by the transferred amount) is written after the call
/// returns.
pub(crate) fn detect_reentrancy(
    ir: &ContractIr,
    df: &Dataflow,
    trees: &[FunctionTrees],
) -> Vec<Candidate> {
    let g = &df.deps;
    let mut out = Vec::new();
    for (fi, f) in ir.functions.iter().enumerate() {
        let dom = &trees[fi].dom;
        for (at, ins) in f.instrs() {
            let InstrKind::ExtCall {
                kind: CallKind::Call,
                value: Some(value),
                ..
            } = &ins.kind
            else {
                continue;
            };
            if matches!(value, Operand::Const(k) if k.sign() == num_bigint::Sign::NoSign) {
                continue;
            }
            let mut sinks = BTreeSet::new();
            for b in &f.blocks {
                if !dom.strictly_dominates(b.id.index(), at.block.index()) {
                    continue;
                }
                if let InstrKind::JumpI { cond, .. } = &b.terminator().kind {
                    sinks.extend(operand_node(fi, cond).and_then(|n| g.node_id(&n)));
                }
            }
            sinks.extend(operand_node(fi, value).and_then(|n| g.node_id(&n)));
            let guards: BTreeSet<SlotId> = data_sources(g, &sinks)
                .into_iter()
                .filter_map(|n| match g.nodes()[n] {
                    DepNode::Slot { slot } => Some(slot),
                    _ => None,
                })
                .collect();
            let writes: Vec<_> = writes_after(f, at)
                .into_iter()
                .filter(|(_, s)| guards.contains(s))
                .collect();
            if writes.is_empty() {
                continue;
            }
            let names: BTreeSet<&str> = writes
                .iter()
                .map(|(_, s)| ir.flat.layout.slots[s.index()].name.as_str())
                .collect();
            let evidence = format!(
                "call with value at line {} precedes write to {} at line {}",
                ins.loc.line,
                names.into_iter().collect::<Vec<_>>().join(", "),
                f.instr(writes[0].0).loc.line
            );
            out.push(Candidate {
                vuln: VulnType::Reentrancy,
                func: fi,
                loc: ins.loc,
                evidence,
                witness: Witness::ReentrantWrite {
                    func: fi,
                    call: at,
                    writes: writes.iter().map(|(r, _)| *r).collect(),
                },
            });
        }
    }
    out
}
