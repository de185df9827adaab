use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;

use super::{FlatContract, InheritanceGraph, INIT_NAME};
use crate::frontend::*;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum CallNode {
    /// `Origin.function`
    Function(String),
    /// Code outside the analyzed unit.
    ExternalSink,
}

impl CallNode {
    pub fn label(&self) -> &str {
        match self {
            CallNode::Function(id) => id,
            CallNode::ExternalSink => "<external>",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CallEdgeKind {
    Internal,
    External,
}

#[derive(Debug, Clone, Default)]
pub struct CallGraph {
    graph: DiGraph<CallNode, CallEdgeKind>,
    index: BTreeMap<CallNode, NodeIndex>,
}

#[derive(Serialize)]
struct EdgeDump<'a> {
    from: &'a str,
    to: &'a str,
    kind: CallEdgeKind,
}

impl CallGraph {
    fn node(&mut self, n: CallNode) -> NodeIndex {
        if let Some(&i) = self.index.get(&n) {
            return i;
        }
        let i = self.graph.add_node(n.clone());
        self.index.insert(n, i);
        i
    }

    fn edge(&mut self, from: CallNode, to: CallNode, kind: CallEdgeKind) {
        let a = self.node(from);
        let b = self.node(to);
        if !self
            .graph
            .edges_connecting(a, b)
            .any(|e| *e.weight() == kind)
        {
            self.graph.add_edge(a, b, kind);
        }
    }

    /// Call graph of one flattened contract.
    pub fn for_contract(flat: &FlatContract) -> CallGraph {
        let mut cg = CallGraph::default();
        cg.node(CallNode::ExternalSink);
        let visible: BTreeMap<&str, String> = flat
            .all_functions()
            .map(|f| (f.def.name.as_str(), f.id()))
            .collect();
        for f in flat.all_functions() {
            add_function_edges(&mut cg, &f.id(), &f.def.body, &visible);
        }
        cg
    }

    pub fn contains(&self, n: &CallNode) -> bool {
        self.index.contains_key(n)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &CallNode> {
        self.index.keys()
    }

    /// Sorted `(caller, callee, kind)` triples.
    pub fn edges(&self) -> Vec<(CallNode, CallNode, CallEdgeKind)> {
        let mut out: Vec<_> = self
            .graph
            .edge_indices()
            .map(|e| {
                let (a, b) = self.graph.edge_endpoints(e).expect("edge exists");
                (self.graph[a].clone(), self.graph[b].clone(), self.graph[e])
            })
            .collect();
        out.sort();
        out
    }

    pub fn has_edge(&self, from: &str, to: &CallNode, kind: CallEdgeKind) -> bool {
        let from = CallNode::Function(from.to_string());
        match (self.index.get(&from), self.index.get(to)) {
            (Some(&a), Some(&b)) => self
                .graph
                .edges_connecting(a, b)
                .any(|e| *e.weight() == kind),
            _ => false,
        }
    }

    /// Strongly connected components that contain a cycle (including
    /// self-loops), each as sorted function ids.
    pub fn recursive_components(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = tarjan_scc(&self.graph)
            .into_iter()
            .filter(|scc| scc.len() > 1 || self.graph.contains_edge(scc[0], scc[0]))
            .map(|scc| {
                let mut ids: Vec<String> = scc
                    .iter()
                    .map(|&i| self.graph[i].label().to_string())
                    .collect();
                ids.sort();
                ids
            })
            .collect();
        out.sort();
        out
    }

    /// Functions reachable from `start` (inclusive).
    pub fn reachable_from(&self, start: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let Some(&s) = self.index.get(&CallNode::Function(start.to_string())) else {
            return out;
        };
        let mut dfs = petgraph::visit::Dfs::new(&self.graph, s);
        while let Some(n) = dfs.next(&self.graph) {
            out.insert(self.graph[n].label().to_string());
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let edges = self.edges();
        let dumped: Vec<EdgeDump> = edges
            .iter()
            .map(|(a, b, k)| EdgeDump {
                from: a.label(),
                to: b.label(),
                kind: *k,
            })
            .collect();
        serde_json::json!({
            "nodes": self.nodes().map(CallNode::label).collect::<Vec<_>>(),
            "edges": dumped,
        })
    }
}

/// Call graph of the whole unit: each function's calls are resolved in the
/// context of every contract that sees it, and the results are merged.
pub fn build_call_graph(unit: &SourceUnit, ig: &InheritanceGraph) -> CallGraph {
    let mut cg = CallGraph::default();
    cg.node(CallNode::ExternalSink);
    for c in &unit.contracts {
        let order = ig
            .linearization(&c.name)
            .map(<[String]>::to_vec)
            .unwrap_or_else(|| vec![c.name.clone()]);
        let mut visible: BTreeMap<&str, String> = BTreeMap::new();
        let mut bodies: Vec<(String, &Block)> = Vec::new();
        for name in &order {
            let Some(d) = unit.contract(name) else {
                continue;
            };
            for f in &d.functions {
                visible.insert(&f.name, format!("{}.{}", d.name, f.name));
            }
        }
        for name in &order {
            let Some(d) = unit.contract(name) else {
                continue;
            };
            if let Some(ctor) = &d.constructor {
                bodies.push((format!("{}.{INIT_NAME}", d.name), &ctor.body));
            }
            for f in &d.functions {
                bodies.push((format!("{}.{}", d.name, f.name), &f.body));
            }
        }
        for (id, body) in bodies {
            add_function_edges(&mut cg, &id, body, &visible);
        }
    }
    cg
}

fn add_function_edges(
    cg: &mut CallGraph,
    id: &str,
    body: &Block,
    visible: &BTreeMap<&str, String>,
) {
    let caller = CallNode::Function(id.to_string());
    cg.node(caller.clone());
    let mut calls: Vec<String> = Vec::new();
    walk_block_exprs(body, &mut |e| {
        if let ExprKind::Call { callee, .. } = &e.kind {
            calls.push(callee.clone());
        }
    });
    for callee in calls {
        match visible.get(callee.as_str()) {
            Some(target) => cg.edge(
                caller.clone(),
                CallNode::Function(target.clone()),
                CallEdgeKind::Internal,
            ),
            None => {
                log::warn!("{id}: call to unknown function `{callee}` treated as external");
                cg.edge(
                    caller.clone(),
                    CallNode::ExternalSink,
                    CallEdgeKind::Internal,
                );
            }
        }
    }
    if has_external_call(body) {
        cg.edge(caller, CallNode::ExternalSink, CallEdgeKind::External);
    }
}

fn has_external_call(b: &Block) -> bool {
    b.stmts.iter().any(|s| match &s.kind {
        StmtKind::ExternalCall(_) => true,
        StmtKind::If {
            then_branch,
            else_branch,
            ..
        } => has_external_call(then_branch) || else_branch.as_ref().is_some_and(has_external_call),
        StmtKind::While { body, .. } | StmtKind::Block(body) => has_external_call(body),
        StmtKind::For {
            init, update, body, ..
        } => {
            has_external_call(body)
                || [init, update]
                    .into_iter()
                    .flatten()
                    .any(|s| matches!(s.kind, StmtKind::ExternalCall(_)))
        }
        _ => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program_model::{build_inheritance, flatten};

    fn cg(src: &str) -> CallGraph {
        let unit = parse(src, "t").unwrap();
        let ig = build_inheritance(&unit).unwrap();
        build_call_graph(&unit, &ig)
    }

    #[test]
    fn same_contract_call() {
        let g = cg("contract C { function f() public { g(); } function g() public {} }");
        assert!(g.has_edge(
            "C.f",
            &CallNode::Function("C.g".into()),
            CallEdgeKind::Internal
        ));
    }

    #[test]
    fn self_loop() {
        let g = cg("contract C { function f() public { f(); } }");
        assert!(g.has_edge(
            "C.f",
            &CallNode::Function("C.f".into()),
            CallEdgeKind::Internal
        ));
        assert_eq!(g.recursive_components(), vec![vec!["C.f".to_string()]]);
    }

    #[test]
    fn inherited_call_and_external_sink() {
        let src = "contract A { function deposit() public {} } \
                   contract B is A { function f(address a) public { deposit(); a.transfer(1); } }";
        let g = cg(src);
        assert!(g.has_edge(
            "B.f",
            &CallNode::Function("A.deposit".into()),
            CallEdgeKind::Internal
        ));
        assert!(g.has_edge("B.f", &CallNode::ExternalSink, CallEdgeKind::External));
        for (a, b, _) in g.edges() {
            assert!(g.contains(&a) && g.contains(&b));
        }
    }

    #[test]
    fn flat_view_matches() {
        let src = "contract A { function f() public { g(); } function g() public {} } \
                   contract B is A { function g() public {} }";
        let unit = parse(src, "t").unwrap();
        let ig = build_inheritance(&unit).unwrap();
        let flat = flatten(&unit, "B", &ig).unwrap();
        let g = CallGraph::for_contract(&flat);
        assert!(g.has_edge(
            "A.f",
            &CallNode::Function("B.g".into()),
            CallEdgeKind::Internal
        ));
    }
}
