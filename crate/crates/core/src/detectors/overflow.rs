use std::collections::BTreeSet;

use num_bigint::BigInt;

use super::{Candidate, FunctionTrees, VulnType, Witness};
use crate::analysis::ContractIr;
use crate::frontend::{BinOp, UnOp};
use crate::ir::{
    EnvSource, InstrKind, Operand, Rvalue, SlotId, SsaFunction, ValueDef, ValueId, VarId,
};

const MAX_DEPTH: usize = 8;

/// Structural key of a value, looking through copies so that two reads of the
/// same expression compare equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Const(BigInt),
    Param(usize),
    Slot(SlotId),
    Env(EnvSource),
    Load(SlotId, Box<Key>),
    Bin(BinOp, Box<Key>, Box<Key>),
    Un(UnOp, Box<Key>),
    Var(VarId),
    Opaque(ValueId),
}

fn key(f: &SsaFunction, op: &Operand, depth: usize) -> Key {
    match op {
        Operand::Const(k) => Key::Const(k.clone()),
        Operand::Storage(s) => Key::Slot(*s),
        Operand::Env(e) => Key::Env(*e),
        Operand::Var(v) => Key::Var(*v),
        Operand::Value(v) => value_key(f, *v, depth),
    }
}

fn value_key(f: &SsaFunction, v: ValueId, depth: usize) -> Key {
    let ValueDef::Instr { block, index } = f.values[v.index()].def else {
        let ValueDef::Param(i) = f.values[v.index()].def else {
            unreachable!()
        };
        return Key::Param(i);
    };
    if depth >= MAX_DEPTH {
        return Key::Opaque(v);
    }
    let InstrKind::Assign { value, .. } = &f.block(block).instrs[index].kind else {
        return Key::Opaque(v);
    };
    rvalue_key(f, value, depth + 1).unwrap_or(Key::Opaque(v))
}

fn rvalue_key(f: &SsaFunction, r: &Rvalue, depth: usize) -> Option<Key> {
    Some(match r {
        Rvalue::Use(o) => key(f, o, depth),
        Rvalue::MapLoad { slot, key: k } => Key::Load(*slot, Box::new(key(f, k, depth))),
        Rvalue::Binary { op, lhs, rhs, .. } => Key::Bin(
            *op,
            Box::new(key(f, lhs, depth)),
            Box::new(key(f, rhs, depth)),
        ),
        Rvalue::Unary { op, operand, .. } => Key::Un(*op, Box::new(key(f, operand, depth))),
        Rvalue::Call { .. } => return None,
    })
}

/// Comparisons `(x, y)` combined (through `!`, `&&`, `||`) into a branch condition.
fn comparisons(f: &SsaFunction, cond: &Operand, out: &mut Vec<(Key, Key)>, depth: usize) {
    let Operand::Value(v) = cond else { return };
    let ValueDef::Instr { block, index } = f.values[v.index()].def else {
        return;
    };
    if depth >= MAX_DEPTH {
        return;
    }
    let InstrKind::Assign { value, .. } = &f.block(block).instrs[index].kind else {
        return;
    };
    match value {
        Rvalue::Use(o) | Rvalue::Unary { operand: o, .. } => comparisons(f, o, out, depth + 1),
        Rvalue::Binary {
            op: BinOp::And | BinOp::Or,
            lhs,
            rhs,
            ..
        } => {
            comparisons(f, lhs, out, depth + 1);
            comparisons(f, rhs, out, depth + 1);
        }
        Rvalue::Binary { op, lhs, rhs, .. } if op.is_comparison() => {
            out.push((key(f, lhs, 0), key(f, rhs, 0)))
        }
        _ => {}
    }
}

/// Whether comparing `x` with `y` bounds `a op b` (result key `r`).
fn guards(op: BinOp, a: &Key, b: &Key, r: &Key, x: &Key, y: &Key) -> bool {
    let has = |k: &Key| x == k || y == k;
    let operand = |k: &Key| k == a || k == b;
    let other_const = |k: &Key| {
        if x == k {
            matches!(y, Key::Const(_))
        } else {
            y == k && matches!(x, Key::Const(_))
        }
    };
    if has(r) && (has(a) || has(b)) {
        return true;
    }
    if op == BinOp::Sub && has(a) && has(b) {
        return true;
    }
    if (operand(x) && other_const(x)) || (operand(y) && other_const(y)) {
        return true;
    }
    if op == BinOp::Add {
        match (a, b) {
            (Key::Const(_), other) | (other, Key::Const(_)) if has(other) => return true,
            _ => {}
        }
    }
    if op == BinOp::Mul {
        let quotient = |d: &Key| Key::Bin(BinOp::Div, Box::new(r.clone()), Box::new(d.clone()));
        if (has(&quotient(a)) && has(b)) || (has(&quotient(b)) && has(a)) {
            return true;
        }
    }
    false
}

/// `+`, `-` and `*` on non-constant operands that no comparison on a
/// dominating or post-dominating branch bounds.
pub(crate) fn detect_integer_overflow(ir: &ContractIr, trees: &[FunctionTrees]) -> Vec<Candidate> {
    let mut out = Vec::new();
    for (fi, f) in ir.functions.iter().enumerate() {
        let t = &trees[fi];
        let branches: Vec<(usize, Vec<(Key, Key)>)> = f
            .blocks
            .iter()
            .filter_map(|b| match &b.terminator().kind {
                InstrKind::JumpI { cond, .. } => {
                    let mut cmps = Vec::new();
                    comparisons(f, cond, &mut cmps, 0);
                    Some((b.id.index(), cmps))
                }
                _ => None,
            })
            .collect();
        let mut seen = BTreeSet::new();
        for (at, ins) in f.instrs() {
            let InstrKind::Assign {
                value: r @ Rvalue::Binary { op, lhs, rhs, ty },
                ..
            } = &ins.kind
            else {
                continue;
            };
            if !matches!(op, BinOp::Add | BinOp::Sub | BinOp::Mul) {
                continue;
            }
            if matches!(lhs, Operand::Const(_)) && matches!(rhs, Operand::Const(_)) {
                continue;
            }
            let (a, b) = (key(f, lhs, 0), key(f, rhs, 0));
            let res = rvalue_key(f, r, 0).expect("binary key");
            let blk = at.block.index();
            let guarded = branches.iter().any(|(bb, cmps)| {
                (t.dom.dominates(*bb, blk) || t.pdom.dominates(*bb, blk))
                    && cmps.iter().any(|(x, y)| guards(*op, &a, &b, &res, x, y))
            });
            if guarded || !seen.insert(ins.loc) {
                continue;
            }
            out.push(Candidate {
                vuln: VulnType::IntegerOverflow,
                func: fi,
                loc: ins.loc,
                evidence: format!("unchecked {ty} `{}` at line {}", op.symbol(), ins.loc.line),
                witness: Witness::ArithWrap { func: fi, at },
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(n: i64) -> Key {
        Key::Const(BigInt::from(n))
    }

    #[test]
    fn guard_rules() {
        let (a, b) = (Key::Param(0), Key::Param(1));
        let sum = Key::Bin(BinOp::Add, Box::new(a.clone()), Box::new(b.clone()));
        assert!(guards(BinOp::Add, &a, &b, &sum, &sum, &a));
        assert!(!guards(BinOp::Add, &a, &b, &sum, &a, &b));
        let diff = Key::Bin(BinOp::Sub, Box::new(a.clone()), Box::new(b.clone()));
        assert!(guards(BinOp::Sub, &a, &b, &diff, &b, &a));
        assert!(guards(BinOp::Add, &a, &k(1), &sum, &a, &b));
        assert!(guards(BinOp::Add, &a, &b, &sum, &a, &k(100)));
        let prod = Key::Bin(BinOp::Mul, Box::new(a.clone()), Box::new(b.clone()));
        let q = Key::Bin(BinOp::Div, Box::new(prod.clone()), Box::new(a.clone()));
        assert!(guards(BinOp::Mul, &a, &b, &prod, &q, &b));
        assert!(!guards(BinOp::Mul, &a, &b, &prod, &Key::Param(2), &b));
    }
}
