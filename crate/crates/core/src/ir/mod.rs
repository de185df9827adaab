//! Three-address IR over basic blocks, in SSA form after [`to_ssa`].

mod display;
pub mod dom;
mod lower;
mod ssa;
mod verify;

use std::fmt;

use num_bigint::BigInt;
use serde::Serialize;
use thiserror::Error;

pub use lower::lower_to_cfg;
pub use ssa::to_ssa;
pub use verify::verify;

use crate::frontend::{BinOp, CallKind, ScalarType, SourceLocation, UnOp, Visibility};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoweringError {
    #[error("{func} at {loc}: unknown identifier `{name}`")]
    UnknownIdentifier {
        func: String,
        name: String,
        loc: SourceLocation,
    },
    #[error("{func} at {loc}: unknown function `{name}`")]
    UnknownFunction {
        func: String,
        name: String,
        loc: SourceLocation,
    },
    #[error("{func} at {loc}: {message}")]
    Invalid {
        func: String,
        message: String,
        loc: SourceLocation,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{func}: {message}")]
pub struct VerifyError {
    pub func: String,
    pub message: String,
}

macro_rules! id_type {
    ($name:ident, $prefix:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(BlockId, "b");
id_type!(ValueId, "v");
id_type!(VarId, "var");
id_type!(SlotId, "slot");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvSource {
    Timestamp,
    Sender,
    CallValue,
    SelfBalance,
}

impl EnvSource {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvSource::Timestamp => "block.timestamp",
            EnvSource::Sender => "msg.sender",
            EnvSource::CallValue => "msg.value",
            EnvSource::SelfBalance => "this.balance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    /// Source-level variable; only present before SSA construction.
    Var(VarId),
    Value(ValueId),
    Const(BigInt),
    Env(EnvSource),
    /// Scalar storage read.
    Storage(SlotId),
}

impl Operand {
    pub fn as_value(&self) -> Option<ValueId> {
        match self {
            Operand::Value(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rvalue {
    Use(Operand),
    /// `ty` is the operand type: the wrap width for arithmetic.
    Binary {
        op: BinOp,
        lhs: Operand,
        rhs: Operand,
        ty: ScalarType,
    },
    Unary {
        op: UnOp,
        operand: Operand,
        ty: ScalarType,
    },
    MapLoad {
        slot: SlotId,
        key: Operand,
    },
    /// Internal call by function name.
    Call {
        callee: String,
        args: Vec<Operand>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dest {
    Var(VarId),
    Value(ValueId),
    Storage(SlotId),
    MapStore { slot: SlotId, key: Operand },
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum JumpKind {
    Jump,
    JumpI,
    JumpDest,
    Return,
    Revert,
    Stop,
}

impl JumpKind {
    /// Fixed reporting order of the six jump kinds.
    pub const ALL: [JumpKind; 6] = [
        JumpKind::Jump,
        JumpKind::JumpI,
        JumpKind::JumpDest,
        JumpKind::Return,
        JumpKind::Revert,
        JumpKind::Stop,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JumpKind::Jump => "JUMP",
            JumpKind::JumpI => "JUMPI",
            JumpKind::JumpDest => "JUMPDEST",
            JumpKind::Return => "RETURN",
            JumpKind::Revert => "REVERT",
            JumpKind::Stop => "STOP",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstrKind {
    Jump(BlockId),
    /// `loop_exit` marks the condition check of a loop header; the executor
    /// counts iterations there.
    JumpI {
        cond: Operand,
        then_to: BlockId,
        else_to: BlockId,
        loop_exit: bool,
    },
    JumpDest,
    Return(Option<Operand>),
    Revert(Option<String>),
    Stop,
    Assign {
        dest: Dest,
        value: Rvalue,
    },
    ExtCall {
        kind: CallKind,
        target: Operand,
        value: Option<Operand>,
        checked: bool,
        result: Option<Dest>,
    },
    Log {
        event: String,
        args: Vec<Operand>,
    },
    Phi {
        dest: Dest,
        incoming: Vec<(BlockId, Operand)>,
    },
}

impl InstrKind {
    pub fn jump_kind(&self) -> Option<JumpKind> {
        Some(match self {
            InstrKind::Jump(_) => JumpKind::Jump,
            InstrKind::JumpI { .. } => JumpKind::JumpI,
            InstrKind::JumpDest => JumpKind::JumpDest,
            InstrKind::Return(_) => JumpKind::Return,
            InstrKind::Revert(_) => JumpKind::Revert,
            InstrKind::Stop => JumpKind::Stop,
            _ => return None,
        })
    }

    pub fn is_terminator(&self) -> bool {
        matches!(
            self,
            InstrKind::Jump(_)
                | InstrKind::JumpI { .. }
                | InstrKind::Return(_)
                | InstrKind::Revert(_)
                | InstrKind::Stop
        )
    }

    pub fn is_phi(&self) -> bool {
        matches!(self, InstrKind::Phi { .. })
    }

    /// Counted as a regular statement in the census.
    pub fn is_regular(&self) -> bool {
        self.jump_kind().is_none() && !self.is_phi()
    }

    pub fn dest(&self) -> Option<&Dest> {
        match self {
            InstrKind::Assign { dest, .. } | InstrKind::Phi { dest, .. } => Some(dest),
            InstrKind::ExtCall { result, .. } => result.as_ref(),
            _ => None,
        }
    }

    /// Every operand read by the instruction, in a fixed order.
    pub fn operands(&self) -> Vec<&Operand> {
        let mut out = Vec::new();
        match self {
            InstrKind::JumpI { cond, .. } => out.push(cond),
            InstrKind::Return(Some(op)) => out.push(op),
            InstrKind::Assign { dest, value } => {
                push_rvalue_operands(value, &mut out);
                if let Dest::MapStore { key, .. } = dest {
                    out.push(key);
                }
            }
            InstrKind::ExtCall {
                target,
                value,
                result,
                ..
            } => {
                out.push(target);
                out.extend(value.iter());
                if let Some(Dest::MapStore { key, .. }) = result {
                    out.push(key);
                }
            }
            InstrKind::Log { args, .. } => out.extend(args.iter()),
            InstrKind::Phi { incoming, .. } => out.extend(incoming.iter().map(|(_, op)| op)),
            InstrKind::Jump(_)
            | InstrKind::JumpDest
            | InstrKind::Return(None)
            | InstrKind::Revert(_)
            | InstrKind::Stop => {}
        }
        out
    }

    pub fn operands_mut(&mut self) -> Vec<&mut Operand> {
        let mut out = Vec::new();
        match self {
            InstrKind::JumpI { cond, .. } => out.push(cond),
            InstrKind::Return(Some(op)) => out.push(op),
            InstrKind::Assign { dest, value } => {
                match value {
                    Rvalue::Use(a) => out.push(a),
                    Rvalue::Binary { lhs, rhs, .. } => {
                        out.push(lhs);
                        out.push(rhs);
                    }
                    Rvalue::Unary { operand, .. } => out.push(operand),
                    Rvalue::MapLoad { key, .. } => out.push(key),
                    Rvalue::Call { args, .. } => out.extend(args.iter_mut()),
                }
                if let Dest::MapStore { key, .. } = dest {
                    out.push(key);
                }
            }
            InstrKind::ExtCall {
                target,
                value,
                result,
                ..
            } => {
                out.push(target);
                out.extend(value.iter_mut());
                if let Some(Dest::MapStore { key, .. }) = result {
                    out.push(key);
                }
            }
            InstrKind::Log { args, .. } => out.extend(args.iter_mut()),
            InstrKind::Phi { incoming, .. } => out.extend(incoming.iter_mut().map(|(_, op)| op)),
            InstrKind::Jump(_)
            | InstrKind::JumpDest
            | InstrKind::Return(None)
            | InstrKind::Revert(_)
            | InstrKind::Stop => {}
        }
        out
    }

    pub fn successors(&self) -> Vec<BlockId> {
        match self {
            InstrKind::Jump(t) => vec![*t],
            InstrKind::JumpI {
                then_to, else_to, ..
            } => vec![*then_to, *else_to],
            _ => Vec::new(),
        }
    }
}

fn push_rvalue_operands<'a>(v: &'a Rvalue, out: &mut Vec<&'a Operand>) {
    match v {
        Rvalue::Use(a) => out.push(a),
        Rvalue::Binary { lhs, rhs, .. } => {
            out.push(lhs);
            out.push(rhs);
        }
        Rvalue::Unary { operand, .. } => out.push(operand),
        Rvalue::MapLoad { key, .. } => out.push(key),
        Rvalue::Call { args, .. } => out.extend(args.iter()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instr {
    pub kind: InstrKind,
    pub loc: SourceLocation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub id: BlockId,
    pub instrs: Vec<Instr>,
}

impl BasicBlock {
    pub fn terminator(&self) -> &Instr {
        self.instrs.last().expect("blocks are never empty")
    }

    pub fn successors(&self) -> Vec<BlockId> {
        self.terminator().kind.successors()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VarInfo {
    pub name: String,
    pub ty: ScalarType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ValueDef {
    Param(usize),
    Instr { block: BlockId, index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueInfo {
    pub def: ValueDef,
    pub var: VarId,
    pub ty: ScalarType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: ScalarType,
    pub var: VarId,
    /// Set by SSA construction.
    pub value: Option<ValueId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct InstrRef {
    pub block: BlockId,
    pub index: usize,
}

/// Regular-statement count and per-jump-kind counts, in [`JumpKind::ALL`] order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Census {
    pub regular: usize,
    pub jumps: [usize; 6],
}

impl Census {
    pub fn total(&self) -> usize {
        self.regular + self.jumps.iter().sum::<usize>()
    }

    pub fn add(&mut self, other: &Census) {
        self.regular += other.regular;
        for (a, b) in self.jumps.iter_mut().zip(other.jumps) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SsaFunction {
    /// `Origin.name`
    pub id: String,
    pub contract: String,
    pub name: String,
    pub visibility: Visibility,
    pub is_payable: bool,
    pub params: Vec<Param>,
    pub returns: Option<ScalarType>,
    pub blocks: Vec<BasicBlock>,
    pub vars: Vec<VarInfo>,
    pub values: Vec<ValueInfo>,
    pub is_ssa: bool,
    pub loc: SourceLocation,
}

impl SsaFunction {
    pub const ENTRY: BlockId = BlockId(0);

    pub fn block(&self, id: BlockId) -> &BasicBlock {
        &self.blocks[id.index()]
    }

    pub fn instr(&self, r: InstrRef) -> &Instr {
        &self.blocks[r.block.index()].instrs[r.index]
    }

    pub fn instrs(&self) -> impl Iterator<Item = (InstrRef, &Instr)> {
        self.blocks.iter().flat_map(|b| {
            b.instrs.iter().enumerate().map(move |(i, ins)| {
                (
                    InstrRef {
                        block: b.id,
                        index: i,
                    },
                    ins,
                )
            })
        })
    }

    pub fn successors(&self) -> Vec<Vec<usize>> {
        self.blocks
            .iter()
            .map(|b| b.successors().into_iter().map(BlockId::index).collect())
            .collect()
    }

    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![Vec::new(); self.blocks.len()];
        for b in &self.blocks {
            for s in b.successors() {
                preds[s.index()].push(b.id.index());
            }
        }
        preds
    }

    pub fn value_name(&self, v: ValueId) -> String {
        let info = &self.values[v.index()];
        format!("{}.{}", self.vars[info.var.index()].name, v.0)
    }

    pub fn census(&self) -> Census {
        let mut c = Census::default();
        for b in &self.blocks {
            for i in &b.instrs {
                match i.kind.jump_kind() {
                    Some(k) => c.jumps[k.index()] += 1,
                    None if i.kind.is_phi() => {}
                    None => c.regular += 1,
                }
            }
        }
        c
    }

    pub fn phi_count(&self) -> usize {
        self.instrs().filter(|(_, i)| i.kind.is_phi()).count()
    }

    pub fn dump(&self) -> String {
        display::dump_function(self)
    }

    /// Graphviz rendering of the control-flow graph.
    pub fn cfg_dot(&self) -> String {
        display::cfg_dot(self)
    }
}

/// Census of `f`.
pub fn statement_census(f: &SsaFunction) -> Census {
    f.census()
}

#[cfg(test)]
mod tests;
