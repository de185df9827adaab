//! Inheritance resolution, call graphs, storage layout and contract flattening.

mod callgraph;
mod flatten;
mod inheritance;

pub use callgraph::{build_call_graph, CallEdgeKind, CallGraph, CallNode};
pub use flatten::{flatten, flatten_leaves, CtorChain, FlatContract, FlatFunction, INIT_NAME};
pub use inheritance::{build_inheritance, InheritanceGraph};

use serde::Serialize;
use thiserror::Error;

use crate::frontend::{ContractDef, SourceUnit, TypeName};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("inheritance cycle: {}", .0.join(" -> "))]
    InheritanceCycle(Vec<String>),
    #[error("contract `{contract}` inherits from unknown contract `{base}`")]
    UnresolvedBase { contract: String, base: String },
    #[error("no consistent linearization for `{0}`")]
    InconsistentHierarchy(String),
    #[error("state variable `{name}` in `{contract}` shadows an inherited variable")]
    ShadowedStateVar { contract: String, name: String },
    #[error("`{contract}` does not supply constructor arguments for base `{base}`")]
    MissingBaseArgs { contract: String, base: String },
    #[error("constructor arguments for `{base}` given more than once in `{contract}`")]
    DuplicateBaseArgs { contract: String, base: String },
    #[error("`{base}` constructor expects {expected} arguments, got {found}")]
    BaseArgCount {
        base: String,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Slot {
    /// Contract that declares the variable.
    pub origin: String,
    pub name: String,
    pub index: usize,
    pub ty: TypeName,
}

/// One storage slot per non-constant state variable, base-most contract first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StorageLayout {
    pub slots: Vec<Slot>,
}

impl StorageLayout {
    pub fn slot_of(&self, name: &str) -> Option<&Slot> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// Layout of `contract`, whose linearization must be present in `ig`.
pub fn storage_layout(
    unit: &SourceUnit,
    contract: &ContractDef,
    ig: &InheritanceGraph,
) -> StorageLayout {
    let mut slots = Vec::new();
    let order = ig
        .linearization(&contract.name)
        .unwrap_or(std::slice::from_ref(&contract.name));
    for name in order {
        let Some(c) = unit.contract(name) else {
            continue;
        };
        for v in c.state_vars.iter().filter(|v| !v.constant) {
            slots.push(Slot {
                origin: c.name.clone(),
                name: v.decl.name.clone(),
                index: slots.len(),
                ty: v.decl.ty,
            });
        }
    }
    StorageLayout { slots }
}
