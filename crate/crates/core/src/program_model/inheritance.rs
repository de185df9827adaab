use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::ModelError;
use crate::frontend::SourceUnit;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct InheritanceGraph {
    /// Declared bases per contract, in source order.
    pub edges: BTreeMap<String, Vec<String>>,
    /// Ancestors base-most first, ending with the contract itself.
    pub linearization: BTreeMap<String, Vec<String>>,
}

impl InheritanceGraph {
    pub fn linearization(&self, contract: &str) -> Option<&[String]> {
        self.linearization.get(contract).map(Vec::as_slice)
    }

    /// Transitive ancestors of `contract`, excluding itself.
    pub fn ancestors(&self, contract: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&str> = vec![contract];
        while let Some(c) = stack.pop() {
            for b in self.edges.get(c).into_iter().flatten() {
                if seen.insert(b.clone()) {
                    stack.push(b);
                }
            }
        }
        seen
    }

    /// Contracts that no other contract inherits from.
    pub fn leaves(&self) -> Vec<String> {
        let inherited: BTreeSet<&String> = self.edges.values().flatten().collect();
        self.edges
            .keys()
            .filter(|c| !inherited.contains(c))
            .cloned()
            .collect()
    }
}

pub fn build_inheritance(unit: &SourceUnit) -> Result<InheritanceGraph, ModelError> {
    let mut edges = BTreeMap::new();
    for c in &unit.contracts {
        for b in &c.bases {
            if unit.contract(b).is_none() {
                return Err(ModelError::UnresolvedBase {
                    contract: c.name.clone(),
                    base: b.clone(),
                });
            }
        }
        edges.insert(c.name.clone(), c.bases.clone());
    }
    if let Some(cycle) = find_cycle(&edges) {
        return Err(ModelError::InheritanceCycle(cycle));
    }
    let mut memo: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for c in &unit.contracts {
        derived_first(&c.name, &edges, &mut memo)?;
    }
    let linearization = memo
        .into_iter()
        .map(|(k, mut v)| {
            v.reverse();
            (k, v)
        })
        .collect();
    Ok(InheritanceGraph {
        edges,
        linearization,
    })
}

fn find_cycle(edges: &BTreeMap<String, Vec<String>>) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    fn visit(
        n: &str,
        edges: &BTreeMap<String, Vec<String>>,
        marks: &mut BTreeMap<String, Mark>,
        path: &mut Vec<String>,
    ) -> Option<Vec<String>> {
        match marks.get(n) {
            Some(Mark::Done) => return None,
            Some(Mark::Open) => {
                let start = path.iter().position(|p| p == n).unwrap_or(0);
                let mut cycle = path[start..].to_vec();
                cycle.push(n.to_string());
                return Some(cycle);
            }
            None => {}
        }
        marks.insert(n.to_string(), Mark::Open);
        path.push(n.to_string());
        for b in edges.get(n).into_iter().flatten() {
            if let Some(c) = visit(b, edges, marks, path) {
                return Some(c);
            }
        }
        path.pop();
        marks.insert(n.to_string(), Mark::Done);
        None
    }
    let mut marks = BTreeMap::new();
    for n in edges.keys() {
        if let Some(c) = visit(n, edges, &mut marks, &mut Vec::new()) {
            return Some(c);
        }
    }
    None
}

/// C3 in Solidity's convention: the rightmost declared base is the most
/// derived. Returns the most-derived-first order.
fn derived_first(
    c: &str,
    edges: &BTreeMap<String, Vec<String>>,
    memo: &mut BTreeMap<String, Vec<String>>,
) -> Result<Vec<String>, ModelError> {
    if let Some(l) = memo.get(c) {
        return Ok(l.clone());
    }
    let bases: Vec<String> = edges
        .get(c)
        .cloned()
        .unwrap_or_default()
        .into_iter()
        .rev()
        .collect();
    let mut seqs: Vec<Vec<String>> = Vec::new();
    for b in &bases {
        seqs.push(derived_first(b, edges, memo)?);
    }
    seqs.push(bases);
    let mut out = vec![c.to_string()];
    loop {
        seqs.retain(|s| !s.is_empty());
        if seqs.is_empty() {
            break;
        }
        let head = seqs
            .iter()
            .map(|s| &s[0])
            .find(|cand| !seqs.iter().any(|s| s[1..].contains(cand)))
            .cloned()
            .ok_or_else(|| ModelError::InconsistentHierarchy(c.to_string()))?;
        for s in &mut seqs {
            if s[0] == head {
                s.remove(0);
            }
        }
        out.push(head);
    }
    memo.insert(c.to_string(), out.clone());
    Ok(out)
}
