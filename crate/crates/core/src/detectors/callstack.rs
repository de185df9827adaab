use std::collections::BTreeSet;

use super::{writes_after, Candidate, VulnType, Witness};
use crate::analysis::ContractIr;
use crate::dataflow::control_dependence;
use crate::frontend::CallKind;
use crate::ir::{InstrKind, Rvalue};

/// Two patterns: unconditional recursion reachable from an entry point, which
/// exhausts the call stack; and an unchecked `send`/`call` whose failure (for
/// example under a deep caller stack) goes unnoticed before state is updated.
pub(crate) fn detect_callstack_overflow(ir: &ContractIr) -> Vec<Candidate> {
    let mut out = Vec::new();
    let entries: Vec<&str> = ir
        .functions
        .iter()
        .filter(|f| f.visibility.is_entry())
        .map(|f| f.id.as_str())
        .collect();
    for scc in ir.call_graph.recursive_components() {
        let members: BTreeSet<usize> = ir
            .functions
            .iter()
            .enumerate()
            .filter(|(_, f)| scc.contains(&f.id))
            .map(|(i, _)| i)
            .collect();
        if !entries.iter().any(|e| {
            ir.call_graph
                .reachable_from(e)
                .iter()
                .any(|id| scc.contains(id))
        }) {
            continue;
        }
        for &fi in &members {
            let f = &ir.functions[fi];
            let controls = control_dependence(f);
            for (at, ins) in f.instrs() {
                let InstrKind::Assign {
                    value: Rvalue::Call { callee, .. },
                    ..
                } = &ins.kind
                else {
                    continue;
                };
                let Some(target) = ir.function_index(callee) else {
                    continue;
                };
                if !members.contains(&target) || !controls[at.block.index()].is_empty() {
                    continue;
                }
                out.push(Candidate {
                    vuln: VulnType::CallStackOverflow,
                    func: fi,
                    loc: ins.loc,
                    evidence: format!(
                        "unconditional recursive call to {callee} at line {}",
                        ins.loc.line
                    ),
                    witness: Witness::DepthLimit {
                        funcs: members.iter().copied().collect(),
                    },
                });
            }
        }
    }
    for (fi, f) in ir.functions.iter().enumerate() {
        for (at, ins) in f.instrs() {
            let InstrKind::ExtCall {
                kind: kind @ (CallKind::Send | CallKind::Call),
                checked: false,
                ..
            } = &ins.kind
            else {
                continue;
            };
            let writes = writes_after(f, at);
            let Some(&(w, _)) = writes.first() else {
                continue;
            };
            out.push(Candidate {
                vuln: VulnType::CallStackOverflow,
                func: fi,
                loc: ins.loc,
                evidence: format!(
                    "unchecked {} at line {} followed by storage write at line {}",
                    kind.as_str(),
                    ins.loc.line,
                    f.instr(w).loc.line
                ),
                witness: Witness::CallExecuted {
                    func: fi,
                    at,
                    success: None,
                },
            });
        }
    }
    out
}
