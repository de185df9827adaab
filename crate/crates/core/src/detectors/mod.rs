//! Static detection of the four vulnerability classes, with dynamic
//! witnesses taken from execution traces.
//!
//! Each detector produces [`Candidate`]s from the IR and dependency graph
//! alone. A candidate carries a [`Witness`] rule; when any trace satisfies it
//! the finding is reported as witnessed with score 1.0.

mod callstack;
mod overflow;
mod reentrancy;
mod timestamp;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use callstack::detect_callstack_overflow;
use overflow::detect_integer_overflow;
use reentrancy::detect_reentrancy;
use timestamp::detect_timestamp_dependency;

use crate::analysis::ContractIr;
use crate::dataflow::Dataflow;
use crate::executor::{Event, ExecTrace};
use crate::frontend::SourceLocation;
use crate::ir::dom::{dominator_tree, post_dominator_tree, DomTree};
use crate::ir::{Dest, InstrKind, InstrRef, SlotId, SsaFunction};

pub const WITNESSED_SCORE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VulnType {
    Reentrancy,
    CallStackOverflow,
    IntegerOverflow,
    TimestampDependency,
}

impl VulnType {
    pub const ALL: [VulnType; 4] = [
        VulnType::Reentrancy,
        VulnType::CallStackOverflow,
        VulnType::IntegerOverflow,
        VulnType::TimestampDependency,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VulnType::Reentrancy => "reentrancy",
            VulnType::CallStackOverflow => "call_stack_overflow",
            VulnType::IntegerOverflow => "integer_overflow",
            VulnType::TimestampDependency => "timestamp_dependency",
        }
    }

    /// Score of an unwitnessed finding.
    pub fn static_score(self) -> f64 {
        match self {
            VulnType::IntegerOverflow => 0.5,
            _ => 0.6,
        }
    }
}

impl fmt::Display for VulnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown vulnerability type `{0}`")]
pub struct UnknownVulnType(pub String);

impl FromStr for VulnType {
    type Err = UnknownVulnType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VulnType::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| UnknownVulnType(s.to_string()))
    }
}

/// Trace condition that confirms a candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    /// A re-entered call at `call` followed by a storage write at one of `writes`.
    ReentrantWrite {
        func: usize,
        call: InstrRef,
        writes: Vec<InstrRef>,
    },
    /// The depth limit was reached inside one of `funcs`.
    DepthLimit {
        funcs: Vec<usize>,
    },
    /// The call at `at` was executed.
    CallExecuted {
        func: usize,
        at: InstrRef,
        success: Option<bool>,
    },
    ArithWrap {
        func: usize,
        at: InstrRef,
    },
    BranchTaken {
        func: usize,
        at: InstrRef,
        taken: bool,
    },
}

impl Witness {
    /// Index of the first event in `trace` that satisfies the rule.
    pub fn find(&self, trace: &ExecTrace) -> Option<usize> {
        let evs = &trace.events;
        match self {
            Witness::ReentrantWrite { func, call, writes } => {
                let mut armed = false;
                for (i, e) in evs.iter().enumerate() {
                    match e {
                        Event::ExtCall { func: f, at, reentered: true, success: true, .. } if f == func && at == call => {
                            armed = true;
                        }
                        Event::StorageWrite { func: f, at, .. } if armed && f == func && writes.contains(at) => {
                            return Some(i);
                        }
                        _ => {}
                    }
                }
                None
            }
            Witness::DepthLimit { funcs } => {
                evs.iter().position(|e| matches!(e, Event::DepthLimit { func, .. } if funcs.contains(func)))
            }
            Witness::CallExecuted { func, at, success } => evs.iter().position(|e| {
                matches!(e, Event::ExtCall { func: f, at: a, success: s, .. }
                    if f == func && a == at && success.is_none_or(|want| want == *s))
            }),
            Witness::ArithWrap { func, at } => evs
                .iter()
                .position(|e| matches!(e, Event::ArithWrap { func: f, at: a, .. } if f == func && a == at)),
            Witness::BranchTaken { func, at, taken } => evs.iter().position(|e| {
                matches!(e, Event::BranchTaken { func: f, at: a, taken: t } if f == func && a == at && t == taken)
            }),
        }
    }
}

/// A statically detected pattern awaiting (optional) dynamic confirmation.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub vuln: VulnType,
    pub func: usize,
    pub loc: SourceLocation,
    pub evidence: String,
    pub witness: Witness,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub vuln: VulnType,
    pub contract: String,
    pub function: String,
    pub loc: SourceLocation,
    pub score: f64,
    pub witnessed: bool,
    pub evidence: String,
}

/// Per-function dominance information shared by the detectors.
pub(crate) struct FunctionTrees {
    pub dom: DomTree,
    pub pdom: DomTree,
}

pub(crate) fn trees(ir: &ContractIr) -> Vec<FunctionTrees> {
    ir.functions
        .iter()
        .map(|f| FunctionTrees {
            dom: dominator_tree(f),
            pdom: post_dominator_tree(f),
        })
        .collect()
}

/// Slot written by `k`, if it is a storage write.
pub(crate) fn written_slot(k: &InstrKind) -> Option<SlotId> {
    match k.dest()? {
        Dest::Storage(slot) | Dest::MapStore { slot, .. } => Some(*slot),
        _ => None,
    }
}

/// Blocks reachable from the successors of `block` (the block itself only
/// through a cycle).
pub(crate) fn blocks_after(f: &SsaFunction, block: usize) -> Vec<bool> {
    let succs = f.successors();
    let mut seen = vec![false; f.blocks.len()];
    let mut stack: Vec<usize> = succs[block].clone();
    while let Some(b) = stack.pop() {
        if !std::mem::replace(&mut seen[b], true) {
            stack.extend(&succs[b]);
        }
    }
    seen
}

/// Storage writes that can execute after the instruction at `at`.
pub(crate) fn writes_after(f: &SsaFunction, at: InstrRef) -> Vec<(InstrRef, SlotId)> {
    let later = blocks_after(f, at.block.index());
    f.instrs()
        .filter(|(r, _)| later[r.block.index()] || (r.block == at.block && r.index > at.index))
        .filter_map(|(r, ins)| written_slot(&ins.kind).map(|s| (r, s)))
        .collect()
}

/// Static candidates of one contract, reusable against any number of traces.
#[derive(Debug, Clone)]
pub struct StaticFindings {
    pub contract: String,
    pub func_names: Vec<String>,
    pub candidates: Vec<Candidate>,
}

impl StaticFindings {
    pub fn analyze(ir: &ContractIr, df: &Dataflow) -> StaticFindings {
        let trees = trees(ir);
        let mut candidates = Vec::new();
        candidates.extend(detect_reentrancy(ir, df, &trees));
        candidates.extend(detect_callstack_overflow(ir));
        candidates.extend(detect_integer_overflow(ir, &trees));
        candidates.extend(detect_timestamp_dependency(ir, df, &trees));
        StaticFindings {
            contract: ir.name().to_string(),
            func_names: ir.functions.iter().map(|f| f.name.clone()).collect(),
            candidates,
        }
    }

    /// Findings upgraded by the first witnessing event across `traces`,
    /// deduplicated by `(vuln, function, loc)` and sorted.
    pub fn findings<'t>(
        &self,
        traces: impl IntoIterator<Item = &'t ExecTrace> + Clone,
    ) -> Vec<Finding> {
        let mut out: BTreeMap<(String, SourceLocation, VulnType), Finding> = BTreeMap::new();
        for c in &self.candidates {
            let witness = traces
                .clone()
                .into_iter()
                .enumerate()
                .find_map(|(t, trace)| {
                    c.witness.find(trace).map(|e| (t, e, trace.events[e].tag()))
                });
            let function = self.func_names[c.func].clone();
            let (score, witnessed, evidence) = match witness {
                Some((t, e, tag)) => (
                    WITNESSED_SCORE,
                    true,
                    format!("{}; witnessed by trace {t} event {e} ({tag})", c.evidence),
                ),
                None => (c.vuln.static_score(), false, c.evidence.clone()),
            };
            let f = Finding {
                vuln: c.vuln,
                contract: self.contract.clone(),
                function,
                loc: c.loc,
                score,
                witnessed,
                evidence,
            };
            let key = (f.function.clone(), f.loc, f.vuln);
            match out.get(&key) {
                Some(prev) if prev.score >= f.score => {}
                _ => {
                    out.insert(key, f);
                }
            }
        }
        let mut v: Vec<Finding> = out.into_values().collect();
        v.sort_by(|a, b| (&a.function, a.loc, a.vuln).cmp(&(&b.function, b.loc, b.vuln)));
        v
    }
}

/// All four detectors over `ir`, upgraded with `traces`.
pub fn run_all(ir: &ContractIr, df: &Dataflow, traces: &[ExecTrace]) -> Vec<Finding> {
    StaticFindings::analyze(ir, df).findings(traces.iter())
}

#[cfg(test)]
mod tests;
