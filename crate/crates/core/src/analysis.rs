//! Static pipeline for one contract: flattening, lowering, SSA and the
//! call graph, bundled for the later stages.

use std::sync::Arc;

use thiserror::Error;

use crate::frontend::{FrontendError, SourceUnit};
use crate::ir::{lower_to_cfg, to_ssa, verify, Census, LoweringError, SsaFunction, VerifyError};
use crate::program_model::{
    build_inheritance, flatten_leaves, CallGraph, FlatContract, ModelError,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lowering(#[from] LoweringError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("{0}: no contracts to analyze")]
    Empty(String),
}

/// IR of one flattened contract. `functions[0]` is `<init>`, followed by the
/// visible functions in flattened order.
#[derive(Debug, Clone)]
pub struct ContractIr {
    pub flat: FlatContract,
    pub functions: Vec<Arc<SsaFunction>>,
    pub call_graph: CallGraph,
}

impl ContractIr {
    pub fn build(flat: FlatContract) -> Result<ContractIr, AnalysisError> {
        let mut functions = Vec::new();
        for f in flat.all_functions() {
            let ssa = to_ssa(lower_to_cfg(&flat, f)?);
            verify(&ssa)?;
            functions.push(Arc::new(ssa));
        }
        let call_graph = CallGraph::for_contract(&flat);
        Ok(ContractIr {
            flat,
            functions,
            call_graph,
        })
    }

    pub fn name(&self) -> &str {
        &self.flat.name
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }

    pub fn function_by_id(&self, id: &str) -> Option<&Arc<SsaFunction>> {
        self.functions.iter().find(|f| f.id == id)
    }

    pub fn census(&self) -> Census {
        let mut c = Census::default();
        for f in &self.functions {
            c.add(&f.census());
        }
        c
    }
}

/// Every leaf contract of `unit`, lowered to verified SSA.
pub fn analyze_unit(unit: &SourceUnit) -> Result<Vec<ContractIr>, AnalysisError> {
    let ig = build_inheritance(unit)?;
    let leaves = flatten_leaves(unit, &ig)?;
    if leaves.is_empty() {
        return Err(AnalysisError::Empty(unit.path.clone()));
    }
    leaves.into_iter().map(ContractIr::build).collect()
}
