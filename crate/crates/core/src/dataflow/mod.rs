//! Dependency graph, taint propagation and discovery of input genes.

mod depgraph;
mod slots;

pub(crate) use depgraph::operand_node;
pub use depgraph::{
    control_dependence, data_reach, data_sources, taint_reach, DepEdge, DepEdgeKind, DepGraph,
    DepNode, ENV_SOURCES,
};
pub use slots::{
    collect_input_slots, collect_special_values, slot_node, InputLayout, InputSlot, MapKey,
    SlotOrigin, SlotSpecials, SpecialValues, TIMESTAMP_BITS,
};

use crate::analysis::ContractIr;

/// Static dataflow artifacts of one contract.
#[derive(Debug, Clone)]
pub struct Dataflow {
    pub deps: DepGraph,
    pub inputs: InputLayout,
    pub specials: SpecialValues,
}

impl Dataflow {
    pub fn build(ir: &ContractIr) -> Dataflow {
        let deps = DepGraph::for_contract(ir);
        let inputs = collect_input_slots(ir);
        let specials = collect_special_values(ir, &deps, &inputs);
        Dataflow {
            deps,
            inputs,
            specials,
        }
    }

    pub fn deps_dot(&self, ir: &ContractIr) -> String {
        let names: Vec<String> = ir.functions.iter().map(|f| f.name.clone()).collect();
        self.deps
            .to_dot(&names, &|func, v| ir.functions[func].value_name(v))
    }
}
