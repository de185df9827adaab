use num_bigint::BigInt;
use serde::Serialize;
use serde_json::{json, Value};

use crate::frontend::{BinOp, CallKind, UnOp};
use crate::ir::{BlockId, InstrRef, SlotId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterKind {
    Block,
    /// Before a statement.
    Pre,
    /// After a JUMPDEST.
    Post,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Binary(BinOp),
    Unary(UnOp),
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Binary(op) => op.symbol(),
            ArithOp::Unary(op) => op.symbol(),
        }
    }
}

/// One execution event. `func` indexes the contract's function list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Invoke {
        func: usize,
        depth: usize,
        reentry: bool,
    },
    BlockEntered {
        func: usize,
        block: BlockId,
    },
    BranchTaken {
        func: usize,
        at: InstrRef,
        taken: bool,
    },
    ExtCall {
        func: usize,
        at: InstrRef,
        kind: CallKind,
        value: Option<BigInt>,
        checked: bool,
        success: bool,
        depth: usize,
        reentered: bool,
    },
    StorageWrite {
        func: usize,
        at: InstrRef,
        slot: SlotId,
        key: Option<BigInt>,
        old: BigInt,
        new: BigInt,
    },
    ArithWrap {
        func: usize,
        at: InstrRef,
        op: ArithOp,
        width: u16,
        raw: BigInt,
        reduced: BigInt,
    },
    Revert {
        func: usize,
        at: InstrRef,
        reason: Option<String>,
    },
    Return {
        func: usize,
        at: InstrRef,
    },
    DepthLimit {
        func: usize,
        at: InstrRef,
        depth: usize,
    },
    LoopCapped {
        func: usize,
        at: InstrRef,
    },
    StepLimit {
        func: usize,
    },
    Counter {
        func: usize,
        block: BlockId,
        index: Option<usize>,
        kind: CounterKind,
    },
}

impl Event {
    pub fn is_counter(&self) -> bool {
        matches!(self, Event::Counter { .. })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Event::Invoke { .. } => "invoke",
            Event::BlockEntered { .. } => "block_entered",
            Event::BranchTaken { .. } => "branch_taken",
            Event::ExtCall { .. } => "extcall",
            Event::StorageWrite { .. } => "storage_write",
            Event::ArithWrap { .. } => "arith_wrap",
            Event::Revert { .. } => "revert",
            Event::Return { .. } => "return",
            Event::DepthLimit { .. } => "depth_limit",
            Event::LoopCapped { .. } => "loop_capped",
            Event::StepLimit { .. } => "step_limit",
            Event::Counter { .. } => "counter",
        }
    }

    /// JSON object with fields in a fixed order; `names[func]` names functions.
    pub fn to_json(&self, names: &[String]) -> Value {
        let name = |f: &usize| names.get(*f).cloned().unwrap_or_else(|| f.to_string());
        let at = |r: &InstrRef| format!("{}:{}", r.block, r.index);
        let mut obj = serde_json::Map::new();
        obj.insert("event".into(), json!(self.tag()));
        match self {
            Event::Invoke {
                func,
                depth,
                reentry,
            } => {
                obj.insert("func".into(), json!(name(func)));
                obj.insert("depth".into(), json!(depth));
                obj.insert("reentry".into(), json!(reentry));
            }
            Event::BlockEntered { func, block } => {
                obj.insert("func".into(), json!(name(func)));
                obj.insert("block".into(), json!(block.to_string()));
            }
            Event::BranchTaken { func, at: r, taken } => {
                obj.insert("func".into(), json!(name(func)));
                obj.insert("at".into(), json!(at(r)));
                obj.insert("taken".into(), json!(taken));
            }
            Event::ExtCall {
                func,
                at: r,
                kind,
                value,
                checked,
                success,
                depth,
                reentered,
            } => {
                obj.insert("func".into(), json!(name(func)));
                obj.insert("at".into(), json!(at(r)));
                obj.insert("kind".into(), json!(kind.as_str()));
                obj.insert("value".into(), json!(value.as_ref().map(BigInt::to_string)));
                obj.insert("checked".into(), json!(checked));
                obj.insert("success".into(), json!(success));
                obj.insert("depth".into(), json!(depth));
                obj.insert("reentered".into(), json!(reentered));
            }
            Event::StorageWrite {
                func,
                at: r,
                slot,
                key,
                old,
                new,
            } => {
                obj.insert("func".into(), json!(name(func)));
                obj.insert("at".into(), json!(at(r)));
                obj.insert("slot".into(), json!(slot.0));
                obj.insert("key".into(), json!(key.as_ref().map(BigInt::to_string)));
                obj.insert("old".into(), json!(old.to_string()));
                obj.insert("new".into(), json!(new.to_string()));
            }
            Event::ArithWrap {
                func,
                at: r,
                op,
                width,
                raw,
                reduced,
            } => {
                obj.insert("func".into(), json!(name(func)));
                obj.insert("at".into(), json!(at(r)));
                obj.insert("op".into(), json!(op.symbol()));
                obj.insert("width".into(), json!(width));
                obj.insert("raw".into(), json!(raw.to_string()));
                obj.insert("reduced".into(), json!(reduced.to_string()));
            }
            Event::Revert {
                func,
                at: r,
                reason,
            } => {
                obj.insert("func".into(), json!(name(func)));
                obj.insert("at".into(), json!(at(r)));
                obj.insert("reason".into(), json!(reason));
            }
            Event::Return { func, at: r } | Event::LoopCapped { func, at: r } => {
                obj.insert("func".into(), json!(name(func)));
                obj.insert("at".into(), json!(at(r)));
            }
            Event::DepthLimit { func, at: r, depth } => {
                obj.insert("func".into(), json!(name(func)));
                obj.insert("at".into(), json!(at(r)));
                obj.insert("depth".into(), json!(depth));
            }
            Event::StepLimit { func } => {
                obj.insert("func".into(), json!(name(func)));
            }
            Event::Counter {
                func,
                block,
                index,
                kind,
            } => {
                obj.insert("func".into(), json!(name(func)));
                obj.insert("block".into(), json!(block.to_string()));
                obj.insert("index".into(), json!(index));
                obj.insert("kind".into(), json!(kind));
            }
        }
        Value::Object(obj)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecTrace {
    pub events: Vec<Event>,
    /// Deepest frame stack reached.
    pub max_depth: usize,
    pub step_limited: bool,
    /// `<init>` reverted, so no public function ran.
    pub deploy_failed: bool,
}

impl ExecTrace {
    pub fn without_counters(&self) -> Vec<&Event> {
        self.events.iter().filter(|e| !e.is_counter()).collect()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self, names: &[String]) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_json(names).to_string());
            out.push('\n');
        }
        out
    }
}
