//! Pruned SSA construction: phis at the iterated dominance frontier of each
//! variable's definitions, restricted to blocks where the variable is live.

use std::collections::BTreeSet;

use num_bigint::BigInt;

use super::dom::{dominance_frontiers, dominator_tree, DomTree};
use super::*;

pub fn to_ssa(mut f: SsaFunction) -> SsaFunction {
    assert!(!f.is_ssa, "function is already in SSA form");
    let nvars = f.vars.len();
    let nblocks = f.blocks.len();
    let preds = f.predecessors();
    let dom = dominator_tree(&f);
    let df = dominance_frontiers(&f, &dom);

    // per-block upward-exposed uses and definitions
    let mut uses = vec![BTreeSet::new(); nblocks];
    let mut defs = vec![BTreeSet::new(); nblocks];
    for b in &f.blocks {
        let (u, d) = (&mut uses[b.id.index()], &mut defs[b.id.index()]);
        for i in &b.instrs {
            for op in i.kind.operands() {
                if let Operand::Var(v) = op {
                    if !d.contains(v) {
                        u.insert(*v);
                    }
                }
            }
            if let Some(Dest::Var(v)) = i.kind.dest() {
                d.insert(*v);
            }
        }
    }
    for p in &f.params {
        defs[0].insert(p.var);
    }

    let live_in = liveness(&f, &uses, &defs);

    // phi placement
    let mut phis: Vec<Vec<VarId>> = vec![Vec::new(); nblocks];
    for v in 0..nvars {
        let v = VarId(v as u32);
        let mut has_phi = vec![false; nblocks];
        let mut work: Vec<usize> = (0..nblocks).filter(|&b| defs[b].contains(&v)).collect();
        let mut queued = vec![false; nblocks];
        for &b in &work {
            queued[b] = true;
        }
        while let Some(b) = work.pop() {
            for &y in &df[b] {
                if has_phi[y] || !live_in[y].contains(&v) {
                    continue;
                }
                has_phi[y] = true;
                phis[y].push(v);
                if !queued[y] {
                    queued[y] = true;
                    work.push(y);
                }
            }
        }
    }
    for (b, vars) in phis.iter().enumerate() {
        let at = if b == 0 { 0 } else { 1 };
        let loc = f.blocks[b]
            .instrs
            .first()
            .map(|i| i.loc)
            .unwrap_or_default();
        for (k, v) in vars.iter().enumerate() {
            let incoming = preds[b]
                .iter()
                .map(|&p| (BlockId(p as u32), Operand::Var(*v)))
                .collect();
            f.blocks[b].instrs.insert(
                at + k,
                Instr {
                    kind: InstrKind::Phi {
                        dest: Dest::Var(*v),
                        incoming,
                    },
                    loc,
                },
            );
        }
    }

    // renaming
    let mut r = Renamer {
        stacks: vec![Vec::new(); nvars],
        values: Vec::new(),
    };
    for (i, p) in f.params.iter_mut().enumerate() {
        let val = r.fresh(p.var, p.ty, ValueDef::Param(i));
        p.value = Some(val);
        r.stacks[p.var.index()].push(val);
    }
    r.rename_block(&mut f, &dom, 0);
    f.values = r.values;
    f.is_ssa = true;
    f
}

fn liveness(
    f: &SsaFunction,
    uses: &[BTreeSet<VarId>],
    defs: &[BTreeSet<VarId>],
) -> Vec<BTreeSet<VarId>> {
    let n = f.blocks.len();
    let succs = f.successors();
    let mut live_in: Vec<BTreeSet<VarId>> = vec![BTreeSet::new(); n];
    let mut changed = true;
    while changed {
        changed = false;
        for b in (0..n).rev() {
            let mut out = BTreeSet::new();
            for &s in &succs[b] {
                out.extend(live_in[s].iter().copied());
            }
            let mut inn: BTreeSet<VarId> = uses[b].clone();
            inn.extend(out.difference(&defs[b]).copied());
            if inn != live_in[b] {
                live_in[b] = inn;
                changed = true;
            }
        }
    }
    live_in
}

struct Renamer {
    stacks: Vec<Vec<ValueId>>,
    values: Vec<ValueInfo>,
}

impl Renamer {
    fn fresh(&mut self, var: VarId, ty: ScalarType, def: ValueDef) -> ValueId {
        let id = ValueId(self.values.len() as u32);
        self.values.push(ValueInfo { def, var, ty });
        id
    }

    fn current(&self, v: VarId) -> Operand {
        match self.stacks[v.index()].last() {
            Some(val) => Operand::Value(*val),
            // read before any definition; storage-like zero default
            None => Operand::Const(BigInt::from(0)),
        }
    }

    fn rename_block(&mut self, f: &mut SsaFunction, dom: &DomTree, b: usize) {
        let mut pushed: Vec<VarId> = Vec::new();
        let block_id = BlockId(b as u32);
        for idx in 0..f.blocks[b].instrs.len() {
            let is_phi = f.blocks[b].instrs[idx].kind.is_phi();
            if !is_phi {
                let replacements: Vec<Operand> = f.blocks[b].instrs[idx]
                    .kind
                    .operands()
                    .into_iter()
                    .map(|op| match op {
                        Operand::Var(v) => self.current(*v),
                        other => other.clone(),
                    })
                    .collect();
                for (slot, new) in f.blocks[b].instrs[idx]
                    .kind
                    .operands_mut()
                    .into_iter()
                    .zip(replacements)
                {
                    *slot = new;
                }
            }
            let dest_var = match f.blocks[b].instrs[idx].kind.dest() {
                Some(Dest::Var(v)) => Some(*v),
                _ => None,
            };
            if let Some(v) = dest_var {
                let ty = f.vars[v.index()].ty;
                let val = self.fresh(
                    v,
                    ty,
                    ValueDef::Instr {
                        block: block_id,
                        index: idx,
                    },
                );
                self.stacks[v.index()].push(val);
                pushed.push(v);
                set_dest(&mut f.blocks[b].instrs[idx].kind, Dest::Value(val));
            }
        }
        for s in f.blocks[b].successors() {
            let current: Vec<(usize, Operand)> = f.blocks[s.index()]
                .instrs
                .iter()
                .enumerate()
                .filter_map(|(i, ins)| match &ins.kind {
                    InstrKind::Phi { incoming, .. } => {
                        incoming.iter().find_map(|(p, op)| match op {
                            Operand::Var(v) if *p == block_id => Some((i, self.current(*v))),
                            _ => None,
                        })
                    }
                    _ => None,
                })
                .collect();
            for (i, op) in current {
                if let InstrKind::Phi { incoming, .. } = &mut f.blocks[s.index()].instrs[i].kind {
                    if let Some(entry) = incoming
                        .iter_mut()
                        .find(|(p, o)| *p == block_id && matches!(o, Operand::Var(_)))
                    {
                        entry.1 = op;
                    }
                }
            }
        }
        for c in dom.children[b].clone() {
            self.rename_block(f, dom, c);
        }
        for v in pushed {
            self.stacks[v.index()].pop();
        }
    }
}

fn set_dest(kind: &mut InstrKind, new: Dest) {
    match kind {
        InstrKind::Assign { dest, .. } | InstrKind::Phi { dest, .. } => *dest = new,
        InstrKind::ExtCall {
            result: Some(dest), ..
        } => *dest = new,
        _ => {}
    }
}
