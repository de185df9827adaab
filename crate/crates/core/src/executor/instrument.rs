use std::sync::Arc;

use thiserror::Error;

use crate::ir::{InstrKind, SsaFunction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstrumentError {
    #[error("function `{0}` is already instrumented")]
    AlreadyInstrumented(String),
}

/// Counter placement for one function. Phis get no statement counter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterPlan {
    /// Statement counters per block, `None` for phis.
    pub stmt: Vec<Vec<Option<usize>>>,
    /// Blocks that start with a JUMPDEST get a counter after it.
    pub after_jumpdest: Vec<bool>,
    pub stmt_count: usize,
}

impl CounterPlan {
    fn new(f: &SsaFunction) -> CounterPlan {
        let mut next = 0;
        let stmt = f
            .blocks
            .iter()
            .map(|b| {
                b.instrs
                    .iter()
                    .map(|i| {
                        (!i.kind.is_phi()).then(|| {
                            next += 1;
                            next - 1
                        })
                    })
                    .collect()
            })
            .collect();
        let after_jumpdest = f
            .blocks
            .iter()
            .map(|b| {
                b.instrs
                    .iter()
                    .find(|i| !i.kind.is_phi())
                    .is_some_and(|i| matches!(i.kind, InstrKind::JumpDest))
            })
            .collect();
        CounterPlan {
            stmt,
            after_jumpdest,
            stmt_count: next,
        }
    }
}

/// A function ready for execution, with or without counters.
#[derive(Debug, Clone)]
pub struct ExecFunction {
    pub ssa: Arc<SsaFunction>,
    pub plan: Option<CounterPlan>,
}

impl ExecFunction {
    pub fn plain(ssa: Arc<SsaFunction>) -> ExecFunction {
        ExecFunction { ssa, plan: None }
    }

    pub fn is_instrumented(&self) -> bool {
        self.plan.is_some()
    }
}

/// Attaches block, statement and jump-target counters.
pub fn instrument(f: &ExecFunction) -> Result<ExecFunction, InstrumentError> {
    if f.is_instrumented() {
        return Err(InstrumentError::AlreadyInstrumented(f.ssa.id.clone()));
    }
    Ok(ExecFunction {
        ssa: Arc::clone(&f.ssa),
        plan: Some(CounterPlan::new(&f.ssa)),
    })
}
