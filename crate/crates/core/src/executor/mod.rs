//! Concrete execution of a contract on one input vector, with statement
//! counters for coverage and an event trace for detector witnesses.
//!
//! A run deploys the contract (storage genes, then `<init>`) and invokes every
//! public or external function once in declaration order. Storage persists
//! across invocations; a reverted invocation rolls back its own changes.

pub mod arith;
mod coverage;
mod instrument;
mod interpreter;
mod trace;

use std::collections::HashMap;

use num_bigint::BigInt;

pub use coverage::{coverage, CoverageCounters, FunctionCounters};
pub use instrument::{instrument, CounterPlan, ExecFunction, InstrumentError};
pub use trace::{ArithOp, CounterKind, Event, ExecTrace};

use crate::analysis::ContractIr;
use crate::dataflow::{InputLayout, MapKey, SlotOrigin};
use crate::frontend::TypeName;
use crate::ir::{Census, SlotId};

/// Address used for `msg.sender` and as the recipient of every external call.
pub const ATTACKER: u64 = 0xA77AC;
/// Contract balance at deployment, in wei.
pub const INITIAL_BALANCE: u128 = 1_000_000_000_000_000_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Limits {
    pub loop_cap: u32,
    pub depth_limit: usize,
    pub reentry_count: u32,
    pub step_budget: u64,
    /// Record counter increments as trace events.
    pub trace_counters: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            loop_cap: 256,
            depth_limit: 1024,
            reentry_count: 1,
            step_budget: 1_000_000,
            trace_counters: false,
        }
    }
}

#[derive(Debug, Clone)]
struct StorageGene {
    slot: SlotId,
    key: Option<BigInt>,
    gene: usize,
}

/// A contract prepared for repeated execution. Immutable and shareable
/// across threads; every [`ExecProgram::execute`] call owns its own state.
#[derive(Debug, Clone)]
pub struct ExecProgram {
    pub functions: Vec<ExecFunction>,
    pub names: Vec<String>,
    by_name: HashMap<String, usize>,
    slot_types: Vec<TypeName>,
    /// Public and external functions other than `<init>`, in order.
    entries: Vec<usize>,
    param_genes: Vec<Vec<usize>>,
    callvalue_gene: Vec<Option<usize>>,
    storage_genes: Vec<StorageGene>,
    timestamp_gene: usize,
    gene_count: usize,
    census: Census,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub trace: ExecTrace,
    pub counters: CoverageCounters,
}

impl ExecProgram {
    /// Instrumented program.
    pub fn new(ir: &ContractIr, inputs: &InputLayout) -> ExecProgram {
        let mut p = ExecProgram::uninstrumented(ir, inputs);
        p.functions = p
            .functions
            .iter()
            .map(|f| instrument(f).expect("fresh functions are plain"))
            .collect();
        p
    }

    pub fn uninstrumented(ir: &ContractIr, inputs: &InputLayout) -> ExecProgram {
        let n = ir.functions.len();
        let mut param_genes = vec![Vec::new(); n];
        let mut callvalue_gene = vec![None; n];
        let mut storage_genes = Vec::new();
        let mut timestamp_gene = inputs.len();
        for s in &inputs.slots {
            match &s.origin {
                SlotOrigin::Param { function, .. } => param_genes[*function].push(s.index),
                SlotOrigin::CallValue { function } => callvalue_gene[*function] = Some(s.index),
                SlotOrigin::Storage { slot } => storage_genes.push(StorageGene {
                    slot: *slot,
                    key: None,
                    gene: s.index,
                }),
                SlotOrigin::MapEntry { slot, key } => {
                    let key = match key {
                        MapKey::Const(k) => k.clone(),
                        MapKey::Attacker => BigInt::from(ATTACKER),
                    };
                    storage_genes.push(StorageGene {
                        slot: *slot,
                        key: Some(key),
                        gene: s.index,
                    });
                }
                SlotOrigin::Timestamp => timestamp_gene = s.index,
            }
        }
        let names: Vec<String> = ir.functions.iter().map(|f| f.name.clone()).collect();
        ExecProgram {
            functions: ir
                .functions
                .iter()
                .map(|f| ExecFunction::plain(f.clone()))
                .collect(),
            by_name: names
                .iter()
                .enumerate()
                .map(|(i, n)| (n.clone(), i))
                .collect(),
            names,
            slot_types: ir.flat.layout.slots.iter().map(|s| s.ty).collect(),
            entries: (1..n)
                .filter(|&i| ir.functions[i].visibility.is_entry())
                .collect(),
            param_genes,
            callvalue_gene,
            storage_genes,
            timestamp_gene,
            gene_count: inputs.len(),
            census: ir.census(),
        }
    }

    pub fn gene_count(&self) -> usize {
        self.gene_count
    }

    /// Statement totals over every function, `<init>` included.
    pub fn census(&self) -> Census {
        self.census
    }

    /// Deterministic: the result depends only on the program, `genes` and `limits`.
    pub fn execute(&self, genes: &[BigInt], limits: &Limits) -> Execution {
        debug_assert_eq!(genes.len(), self.gene_count);
        interpreter::run(self, genes, limits)
    }
}

impl Execution {
    pub fn covered(&self, prog: &ExecProgram) -> Census {
        self.counters.covered(&prog.functions)
    }

    pub fn coverage(&self, prog: &ExecProgram) -> f64 {
        coverage(&self.covered(prog), &prog.census())
    }
}
