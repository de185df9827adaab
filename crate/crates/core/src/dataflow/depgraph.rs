use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write;

use serde::Serialize;

use crate::analysis::ContractIr;
use crate::ir::dom::post_dominator_tree;
use crate::ir::{
    Dest, EnvSource, InstrKind, InstrRef, Operand, Rvalue, SlotId, SsaFunction, ValueId,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum DepNode {
    Value {
        func: usize,
        value: ValueId,
    },
    Slot {
        slot: SlotId,
    },
    Env {
        source: EnvSource,
    },
    /// Success flag produced by an external call.
    CallReturn {
        func: usize,
        at: InstrRef,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DepEdgeKind {
    Data,
    Control,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DepEdge {
    pub from: usize,
    pub to: usize,
    pub kind: DepEdgeKind,
}

pub const ENV_SOURCES: [EnvSource; 4] = [
    EnvSource::Timestamp,
    EnvSource::Sender,
    EnvSource::CallValue,
    EnvSource::SelfBalance,
];

/// Data and control dependencies of one contract. Value nodes are qualified by
/// function index; storage slots and environment sources are shared.
#[derive(Debug, Clone, Default)]
pub struct DepGraph {
    nodes: Vec<DepNode>,
    index: HashMap<DepNode, usize>,
    edges: Vec<DepEdge>,
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
    /// Per function and block, the JUMPIs the block is control dependent on.
    controls: Vec<Vec<Vec<InstrRef>>>,
}

impl DepGraph {
    /// Graph of a single function; `func` is its index in the owning contract.
    pub fn for_function(func: usize, f: &SsaFunction) -> DepGraph {
        let mut g = DepGraph::with_env();
        g.add_function(func, f);
        g
    }

    pub fn for_contract(ir: &ContractIr) -> DepGraph {
        let mut g = DepGraph::with_env();
        for (i, f) in ir.functions.iter().enumerate() {
            g.add_function(i, f);
        }
        g
    }

    fn with_env() -> DepGraph {
        let mut g = DepGraph::default();
        for source in ENV_SOURCES {
            g.node(DepNode::Env { source });
        }
        g
    }

    pub fn nodes(&self) -> &[DepNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[DepEdge] {
        &self.edges
    }

    pub fn node_id(&self, n: &DepNode) -> Option<usize> {
        self.index.get(n).copied()
    }

    pub fn contains(&self, n: &DepNode) -> bool {
        self.index.contains_key(n)
    }

    /// JUMPIs that block `block` of function `func` is control dependent on.
    pub fn controlling_branches(&self, func: usize, block: usize) -> &[InstrRef] {
        self.controls
            .get(func)
            .and_then(|f| f.get(block))
            .map_or(&[], Vec::as_slice)
    }

    fn node(&mut self, n: DepNode) -> usize {
        if let Some(&i) = self.index.get(&n) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(n);
        self.index.insert(n, i);
        self.out.push(Vec::new());
        self.inc.push(Vec::new());
        i
    }

    fn edge(&mut self, from: usize, to: usize, kind: DepEdgeKind) {
        self.edges.push(DepEdge { from, to, kind });
        self.out[from].push(self.edges.len() - 1);
        self.inc[to].push(self.edges.len() - 1);
    }

    fn add_function(&mut self, func: usize, f: &SsaFunction) {
        for p in &f.params {
            if let Some(value) = p.value {
                self.node(DepNode::Value { func, value });
            }
        }
        for (at, ins) in f.instrs() {
            for (from, to) in data_pairs(func, at, &ins.kind) {
                let (a, b) = (self.node(from), self.node(to));
                self.edge(a, b, DepEdgeKind::Data);
            }
        }

        let controls = control_dependence(f);
        for b in &f.blocks {
            let mut conds = Vec::new();
            for &at in &controls[b.id.index()] {
                let InstrKind::JumpI { cond, .. } = &f.instr(at).kind else {
                    unreachable!()
                };
                if let Some(n) = operand_node(func, cond) {
                    conds.push(self.node(n));
                }
            }
            if conds.is_empty() {
                continue;
            }
            for (i, ins) in b.instrs.iter().enumerate() {
                let at = InstrRef {
                    block: b.id,
                    index: i,
                };
                let Some(target) = result_node(func, at, &ins.kind) else {
                    continue;
                };
                let t = self.node(target);
                for &c in &conds {
                    self.edge(c, t, DepEdgeKind::Control);
                }
            }
        }
        if self.controls.len() <= func {
            self.controls.resize(func + 1, Vec::new());
        }
        self.controls[func] = controls;
    }

    /// Graphviz rendering; `func_names[i]` labels values of function `i`.
    pub fn to_dot(
        &self,
        func_names: &[String],
        value_names: &dyn Fn(usize, ValueId) -> String,
    ) -> String {
        let mut out =
            String::from("digraph deps {\n    node [shape=box, fontname=\"monospace\"];\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let label = match n {
                DepNode::Value { func, value } => {
                    format!(
                        "{}::%{}",
                        func_names.get(*func).map_or("?", String::as_str),
                        value_names(*func, *value)
                    )
                }
                DepNode::Slot { slot } => format!("@{}", slot.0),
                DepNode::Env { source } => source.as_str().to_string(),
                DepNode::CallReturn { func, at } => format!(
                    "{}::call@{}:{}",
                    func_names.get(*func).map_or("?", String::as_str),
                    at.block,
                    at.index
                ),
            };
            let _ = writeln!(out, "    n{i} [label={label:?}];");
        }
        for e in &self.edges {
            let style = match e.kind {
                DepEdgeKind::Data => "",
                DepEdgeKind::Control => " [style=dashed]",
            };
            let _ = writeln!(out, "    n{} -> n{}{style};", e.from, e.to);
        }
        out.push_str("}\n");
        out
    }
}

pub(crate) fn operand_node(func: usize, op: &Operand) -> Option<DepNode> {
    match op {
        Operand::Value(value) => Some(DepNode::Value {
            func,
            value: *value,
        }),
        Operand::Storage(slot) => Some(DepNode::Slot { slot: *slot }),
        Operand::Env(source) => Some(DepNode::Env { source: *source }),
        Operand::Const(_) | Operand::Var(_) => None,
    }
}

fn dest_node(func: usize, d: &Dest) -> Option<DepNode> {
    match d {
        Dest::Value(value) => Some(DepNode::Value {
            func,
            value: *value,
        }),
        Dest::Storage(slot) | Dest::MapStore { slot, .. } => Some(DepNode::Slot { slot: *slot }),
        Dest::Var(_) | Dest::Discard => None,
    }
}

/// Node written by an instruction, if any.
pub(crate) fn result_node(func: usize, at: InstrRef, k: &InstrKind) -> Option<DepNode> {
    match k {
        InstrKind::Assign { dest, .. } | InstrKind::Phi { dest, .. } => dest_node(func, dest),
        InstrKind::ExtCall {
            result: Some(dest), ..
        } => dest_node(func, dest),
        InstrKind::ExtCall { result: None, .. } => Some(DepNode::CallReturn { func, at }),
        _ => None,
    }
}

/// `(source, result)` pairs contributed by one instruction: every operand
/// flows into the result; map loads also read their slot and call results
/// come from the call's return node.
pub(crate) fn data_pairs(func: usize, at: InstrRef, k: &InstrKind) -> Vec<(DepNode, DepNode)> {
    let Some(to) = result_node(func, at, k) else {
        return Vec::new();
    };
    let mut from = Vec::new();
    match k {
        InstrKind::Assign { dest, value } => {
            if let Dest::MapStore { key, .. } = dest {
                from.extend(operand_node(func, key));
            }
            if let Rvalue::MapLoad { slot, .. } = value {
                from.push(DepNode::Slot { slot: *slot });
            }
            from.extend(
                rvalue_operands(value)
                    .into_iter()
                    .filter_map(|o| operand_node(func, o)),
            );
        }
        InstrKind::Phi { incoming, .. } => {
            from.extend(incoming.iter().filter_map(|(_, o)| operand_node(func, o)));
        }
        InstrKind::ExtCall {
            result: Some(_), ..
        } => from.push(DepNode::CallReturn { func, at }),
        _ => {}
    }
    from.into_iter().map(|f| (f, to)).collect()
}

fn rvalue_operands(r: &Rvalue) -> Vec<&Operand> {
    match r {
        Rvalue::Use(o) => vec![o],
        Rvalue::Binary { lhs, rhs, .. } => vec![lhs, rhs],
        Rvalue::Unary { operand, .. } => vec![operand],
        Rvalue::MapLoad { key, .. } => vec![key],
        Rvalue::Call { args, .. } => args.iter().collect(),
    }
}

/// For each block, the JUMPIs it is control dependent on (Ferrante et al.):
/// walking the post-dominator tree from each successor of a branch up to
/// the branch's immediate post-dominator.
pub fn control_dependence(f: &SsaFunction) -> Vec<Vec<InstrRef>> {
    let n = f.blocks.len();
    let pdom = post_dominator_tree(f);
    let mut deps: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); n];
    for b in &f.blocks {
        let term = b.instrs.len() - 1;
        if !matches!(b.terminator().kind, InstrKind::JumpI { .. }) {
            continue;
        }
        let stop = pdom.idom[b.id.index()];
        for s in b.successors() {
            let mut runner = Some(s.index());
            while let Some(r) = runner {
                if Some(r) == stop || r >= n {
                    break;
                }
                deps[r].insert((b.id.index(), term));
                runner = pdom.idom[r];
            }
        }
    }
    deps.into_iter()
        .map(|s| {
            s.into_iter()
                .map(|(b, i)| InstrRef {
                    block: f.blocks[b].id,
                    index: i,
                })
                .collect()
        })
        .collect()
}

/// Forward closure of `sources` over data and control edges.
pub fn taint_reach(g: &DepGraph, sources: &BTreeSet<usize>) -> BTreeSet<usize> {
    reach(g, sources, |_| true)
}

/// Forward closure over data edges only.
pub fn data_reach(g: &DepGraph, sources: &BTreeSet<usize>) -> BTreeSet<usize> {
    reach(g, sources, |k| k == DepEdgeKind::Data)
}

/// Backward closure of `sinks` over data edges: everything they are computed from.
pub fn data_sources(g: &DepGraph, sinks: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut seen = sinks.clone();
    let mut queue: VecDeque<usize> = sinks.iter().copied().collect();
    while let Some(n) = queue.pop_front() {
        for &e in &g.inc[n] {
            let edge = g.edges[e];
            if edge.kind == DepEdgeKind::Data && seen.insert(edge.from) {
                queue.push_back(edge.from);
            }
        }
    }
    seen
}

fn reach(
    g: &DepGraph,
    sources: &BTreeSet<usize>,
    follow: impl Fn(DepEdgeKind) -> bool,
) -> BTreeSet<usize> {
    let mut seen = sources.clone();
    let mut queue: VecDeque<usize> = sources.iter().copied().collect();
    while let Some(n) = queue.pop_front() {
        for &e in &g.out[n] {
            let edge = g.edges[e];
            if follow(edge.kind) && seen.insert(edge.to) {
                queue.push_back(edge.to);
            }
        }
    }
    seen
}
