use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use serde::Serialize;

use super::depgraph::{data_reach, operand_node, DepGraph, DepNode};
use crate::analysis::ContractIr;
use crate::frontend::{BinOp, ScalarType, TypeName};
use crate::ir::{Dest, EnvSource, InstrKind, Operand, Rvalue, SlotId};

/// Bit width of the implicit timestamp gene.
pub const TIMESTAMP_BITS: u16 = 32;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKey {
    Const(#[serde(serialize_with = "crate::serde_big::serialize")] BigInt),
    /// The entry keyed by the simulated caller.
    Attacker,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlotOrigin {
    /// Parameter `param` of function `function` (index into the contract's functions).
    Param {
        function: usize,
        param: usize,
    },
    Storage {
        slot: SlotId,
    },
    MapEntry {
        slot: SlotId,
        key: MapKey,
    },
    CallValue {
        function: usize,
    },
    Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputSlot {
    pub index: usize,
    pub name: String,
    pub origin: SlotOrigin,
    pub ty: ScalarType,
    #[serde(serialize_with = "crate::serde_big::serialize")]
    pub lo: BigInt,
    #[serde(serialize_with = "crate::serde_big::serialize")]
    pub hi: BigInt,
}

impl InputSlot {
    fn new(index: usize, name: String, origin: SlotOrigin, ty: ScalarType) -> InputSlot {
        let (lo, hi) = ty.bounds();
        InputSlot {
            index,
            name,
            origin,
            ty,
            lo,
            hi,
        }
    }

    pub fn contains(&self, v: &BigInt) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn clamp(&self, v: BigInt) -> BigInt {
        if v < self.lo {
            self.lo.clone()
        } else if v > self.hi {
            self.hi.clone()
        } else {
            v
        }
    }
}

impl fmt::Display for InputSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:>3}  {:<32} {:<8} [{}, {}]",
            self.index, self.name, self.ty, self.lo, self.hi
        )
    }
}

/// Gene layout: the `declared` input slots followed by the implicit
/// call-value and timestamp genes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputLayout {
    pub slots: Vec<InputSlot>,
    pub declared: usize,
}

impl InputLayout {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn declared_slots(&self) -> &[InputSlot] {
        &self.slots[..self.declared]
    }

    pub fn implicit_slots(&self) -> &[InputSlot] {
        &self.slots[self.declared..]
    }

    pub fn dump(&self) -> String {
        self.slots.iter().map(|s| format!("{s}\n")).collect()
    }
}

/// Genes in a fixed order: parameters of `<init>` and every public or
/// external function, uninitialized scalar storage, mapping entries (each
/// constant key used in the code, then the attacker key), then one call-value
/// gene per payable entry point and the timestamp gene.
pub fn collect_input_slots(ir: &ContractIr) -> InputLayout {
    let mut slots: Vec<InputSlot> = Vec::new();
    fn push(slots: &mut Vec<InputSlot>, name: String, origin: SlotOrigin, ty: ScalarType) {
        slots.push(InputSlot::new(slots.len(), name, origin, ty));
    }

    let entries: Vec<usize> = (0..ir.functions.len())
        .filter(|&i| ir.functions[i].visibility.is_entry())
        .collect();
    for &fi in &entries {
        let f = &ir.functions[fi];
        for (pi, p) in f.params.iter().enumerate() {
            push(
                &mut slots,
                format!("{}.{}", f.name, p.name),
                SlotOrigin::Param {
                    function: fi,
                    param: pi,
                },
                p.ty,
            );
        }
    }

    for s in &ir.flat.layout.slots {
        let slot = SlotId(s.index as u32);
        match s.ty {
            TypeName::Scalar(ty) => {
                if !ir.flat.initialized_vars.contains(&s.name) {
                    push(&mut slots, s.name.clone(), SlotOrigin::Storage { slot }, ty);
                }
            }
            TypeName::Mapping { key, value } => {
                let (lo, hi) = key.bounds();
                for k in constant_keys(ir, slot)
                    .into_iter()
                    .filter(|k| &lo <= k && k <= &hi)
                {
                    push(
                        &mut slots,
                        format!("{}[{k}]", s.name),
                        SlotOrigin::MapEntry {
                            slot,
                            key: MapKey::Const(k),
                        },
                        value,
                    );
                }
                push(
                    &mut slots,
                    format!("{}[attacker]", s.name),
                    SlotOrigin::MapEntry {
                        slot,
                        key: MapKey::Attacker,
                    },
                    value,
                );
            }
        }
    }

    let declared = slots.len();
    for &fi in &entries {
        let f = &ir.functions[fi];
        if f.is_payable {
            let name = format!("{}.msg.value", f.name);
            push(
                &mut slots,
                name,
                SlotOrigin::CallValue { function: fi },
                ScalarType::Uint(256),
            );
        }
    }
    push(
        &mut slots,
        "block.timestamp".to_string(),
        SlotOrigin::Timestamp,
        ScalarType::Uint(TIMESTAMP_BITS),
    );
    InputLayout { slots, declared }
}

fn constant_keys(ir: &ContractIr, slot: SlotId) -> BTreeSet<BigInt> {
    let mut keys = BTreeSet::new();
    for f in &ir.functions {
        for (_, ins) in f.instrs() {
            let InstrKind::Assign { dest, value } = &ins.kind else {
                continue;
            };
            if let Dest::MapStore {
                slot: s,
                key: Operand::Const(k),
            } = dest
            {
                if *s == slot {
                    keys.insert(k.clone());
                }
            }
            if let Rvalue::MapLoad {
                slot: s,
                key: Operand::Const(k),
            } = value
            {
                if *s == slot {
                    keys.insert(k.clone());
                }
            }
        }
    }
    keys
}

/// Seed values per gene, ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SpecialValues {
    pub per_slot: Vec<SlotSpecials>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SlotSpecials(
    #[serde(serialize_with = "crate::serde_big::vec::serialize")] pub Vec<BigInt>,
);

impl SpecialValues {
    pub fn for_slot(&self, i: usize) -> &[BigInt] {
        self.per_slot.get(i).map_or(&[], |s| s.0.as_slice())
    }
}

/// Graph node a gene feeds, if it appears in the graph.
pub fn slot_node(ir: &ContractIr, slot: &InputSlot) -> Option<DepNode> {
    match &slot.origin {
        SlotOrigin::Param { function, param } => {
            ir.functions[*function].params[*param]
                .value
                .map(|value| DepNode::Value {
                    func: *function,
                    value,
                })
        }
        SlotOrigin::Storage { slot } | SlotOrigin::MapEntry { slot, .. } => {
            Some(DepNode::Slot { slot: *slot })
        }
        SlotOrigin::CallValue { .. } => Some(DepNode::Env {
            source: EnvSource::CallValue,
        }),
        SlotOrigin::Timestamp => Some(DepNode::Env {
            source: EnvSource::Timestamp,
        }),
    }
}

/// Type extremes `{lo, hi, hi-1, 0, 1}` plus every literal `k` (and `k±1`)
/// compared against a value data-dependent on the gene, all within bounds.
pub fn collect_special_values(
    ir: &ContractIr,
    dep: &DepGraph,
    layout: &InputLayout,
) -> SpecialValues {
    let comparisons = comparison_literals(ir, dep);
    let per_slot = layout
        .slots
        .iter()
        .map(|s| {
            let mut set: BTreeSet<BigInt> = BTreeSet::new();
            for v in [
                s.lo.clone(),
                s.hi.clone(),
                &s.hi - 1,
                BigInt::from(0),
                BigInt::from(1),
            ] {
                set.insert(v);
            }
            if let Some(id) = slot_node(ir, s).and_then(|n| dep.node_id(&n)) {
                let reach = data_reach(dep, &BTreeSet::from([id]));
                for (node, k) in &comparisons {
                    if reach.contains(node) {
                        for d in [-1, 0, 1] {
                            set.insert(k + d);
                        }
                    }
                }
            }
            SlotSpecials(set.into_iter().filter(|v| s.contains(v)).collect())
        })
        .collect();
    SpecialValues { per_slot }
}

/// `(compared node, literal)` for every comparison with one constant side.
fn comparison_literals(ir: &ContractIr, dep: &DepGraph) -> Vec<(usize, BigInt)> {
    let mut out = Vec::new();
    for (fi, f) in ir.functions.iter().enumerate() {
        for (_, ins) in f.instrs() {
            let InstrKind::Assign {
                value: Rvalue::Binary { op, lhs, rhs, .. },
                ..
            } = &ins.kind
            else {
                continue;
            };
            if !matches!(
                op,
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
            ) {
                continue;
            }
            let pair = match (lhs, rhs) {
                (Operand::Const(k), other) | (other, Operand::Const(k)) => Some((other, k)),
                _ => None,
            };
            if let Some((other, k)) = pair {
                if let Some(id) = operand_node(fi, other).and_then(|n| dep.node_id(&n)) {
                    out.push((id, k.clone()));
                }
            }
        }
    }
    out
}
