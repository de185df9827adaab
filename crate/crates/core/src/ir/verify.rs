use std::collections::BTreeSet;

use super::dom::dominator_tree;
use super::*;

/// Structural checks on a CFG, plus single-definition and dominance checks
/// once the function is in SSA form.
pub fn verify(f: &SsaFunction) -> Result<(), VerifyError> {
    let err = |message: String| VerifyError {
        func: f.id.clone(),
        message,
    };
    if f.blocks.is_empty() {
        return Err(err("no blocks".into()));
    }
    let preds = f.predecessors();
    for (i, b) in f.blocks.iter().enumerate() {
        if b.id.index() != i {
            return Err(err(format!("block {i} carries id {}", b.id)));
        }
        if b.instrs.is_empty() {
            return Err(err(format!("{} is empty", b.id)));
        }
        let term_count = b.instrs.iter().filter(|x| x.kind.is_terminator()).count();
        if term_count != 1 || !b.terminator().kind.is_terminator() {
            return Err(err(format!(
                "{} must end with exactly one terminator",
                b.id
            )));
        }
        let succs = b.successors();
        let expected = match b.terminator().kind {
            InstrKind::Jump(_) => 1,
            InstrKind::JumpI { .. } => 2,
            _ => 0,
        };
        if succs.len() != expected || succs.iter().any(|s| s.index() >= f.blocks.len()) {
            return Err(err(format!("{} has bad successors", b.id)));
        }
        if expected == 2 && succs[0] == succs[1] {
            return Err(err(format!("{} branches twice to the same block", b.id)));
        }
        let starts_with_dest = matches!(b.instrs[0].kind, InstrKind::JumpDest);
        if i != 0 && !starts_with_dest {
            return Err(err(format!("{} does not begin with JUMPDEST", b.id)));
        }
        if i == 0 && starts_with_dest {
            return Err(err("entry block begins with JUMPDEST".into()));
        }
        if b.instrs
            .iter()
            .skip(1)
            .any(|x| matches!(x.kind, InstrKind::JumpDest))
        {
            return Err(err(format!("{} has JUMPDEST after its start", b.id)));
        }
        let first_non_phi = b
            .instrs
            .iter()
            .skip(usize::from(i != 0))
            .position(|x| !x.kind.is_phi());
        let phi_end = usize::from(i != 0) + first_non_phi.unwrap_or(0);
        if b.instrs.iter().skip(phi_end).any(|x| x.kind.is_phi()) {
            return Err(err(format!(
                "{} has a PHI after a regular instruction",
                b.id
            )));
        }
        for x in &b.instrs {
            if let InstrKind::Phi { incoming, .. } = &x.kind {
                let from: BTreeSet<usize> = incoming.iter().map(|(p, _)| p.index()).collect();
                let expected: BTreeSet<usize> = preds[i].iter().copied().collect();
                if incoming.len() != preds[i].len() || from != expected {
                    return Err(err(format!(
                        "PHI in {} does not match its predecessors",
                        b.id
                    )));
                }
            }
        }
    }
    if !f.is_ssa {
        return Ok(());
    }

    // single definition
    let mut defined = vec![None; f.values.len()];
    for p in &f.params {
        let v = p
            .value
            .ok_or_else(|| err(format!("parameter `{}` has no value", p.name)))?;
        defined[v.index()] = Some((0usize, None));
    }
    for (r, ins) in f.instrs() {
        match ins.kind.dest() {
            Some(Dest::Value(v)) => {
                if v.index() >= defined.len() || defined[v.index()].is_some() {
                    return Err(err(format!("value {v} defined more than once")));
                }
                if f.values[v.index()].def
                    != (ValueDef::Instr {
                        block: r.block,
                        index: r.index,
                    })
                {
                    return Err(err(format!("value table entry for {v} is stale")));
                }
                defined[v.index()] = Some((r.block.index(), Some(r.index)));
            }
            Some(Dest::Var(_)) => return Err(err("variable destination in SSA form".into())),
            _ => {}
        }
    }

    // dominance of uses
    let dom = dominator_tree(f);
    for (r, ins) in f.instrs() {
        let b = r.block.index();
        let check =
            |v: ValueId, at_block: usize, at_index: Option<usize>| -> Result<(), VerifyError> {
                let Some((db, di)) = defined.get(v.index()).copied().flatten() else {
                    return Err(err(format!("use of undefined value {v}")));
                };
                let ok = if db == at_block {
                    match (di, at_index) {
                        (None, _) => true,
                        (Some(d), Some(u)) => d < u,
                        (Some(_), None) => true,
                    }
                } else {
                    dom.dominates(db, at_block)
                };
                if ok {
                    Ok(())
                } else {
                    Err(err(format!(
                        "use of {v} in {} is not dominated by its definition",
                        r.block
                    )))
                }
            };
        match &ins.kind {
            InstrKind::Phi { incoming, .. } => {
                for (p, op) in incoming {
                    match op {
                        Operand::Value(v) => check(*v, p.index(), None)?,
                        Operand::Var(_) => return Err(err("variable operand in SSA form".into())),
                        _ => {}
                    }
                }
            }
            kind => {
                for op in kind.operands() {
                    match op {
                        Operand::Value(v) => check(*v, b, Some(r.index))?,
                        Operand::Var(_) => return Err(err("variable operand in SSA form".into())),
                        _ => {}
                    }
                }
            }
        }
    }
    Ok(())
}
