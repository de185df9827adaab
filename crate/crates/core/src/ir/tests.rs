use proptest::prelude::*;

use super::*;
use crate::frontend::parse;
use crate::program_model::{build_inheritance, flatten};

fn lower_fn(src: &str, name: &str) -> SsaFunction {
    let unit = parse(src, "t").unwrap();
    let ig = build_inheritance(&unit).unwrap();
    let flat = flatten(&unit, &unit.contracts.last().unwrap().name, &ig).unwrap();
    let f = flat.function(name).unwrap();
    let cfg = lower_to_cfg(&flat, f).unwrap();
    verify(&cfg).unwrap();
    cfg
}

fn ssa_fn(src: &str, name: &str) -> SsaFunction {
    let ssa = to_ssa(lower_fn(src, name));
    verify(&ssa).unwrap_or_else(|e| panic!("{e}\n{}", ssa.dump()));
    ssa
}

fn phis(f: &SsaFunction, block: usize) -> Vec<usize> {
    f.blocks[block]
        .instrs
        .iter()
        .filter_map(|i| match &i.kind {
            InstrKind::Phi { incoming, .. } => Some(incoming.len()),
            _ => None,
        })
        .collect()
}

#[test]
fn empty_body_is_single_stop_block() {
    let f = lower_fn("contract C { function f() public {} }", "f");
    assert_eq!(f.blocks.len(), 1);
    assert_eq!(f.blocks[0].instrs.len(), 1);
    assert!(matches!(f.blocks[0].instrs[0].kind, InstrKind::Stop));
    assert_eq!(
        f.census(),
        Census {
            regular: 0,
            jumps: [0, 0, 0, 0, 0, 1]
        }
    );
}

const DIAMOND: &str =
    "contract C { function f(bool c, uint a) public { if (c) { a = 1; } else { a = 2; } } }";

#[test]
fn diamond_shape() {
    let f = lower_fn(DIAMOND, "f");
    assert_eq!(f.blocks.len(), 4);
    assert!(matches!(
        f.blocks[0].terminator().kind,
        InstrKind::JumpI { .. }
    ));
    let join = f
        .blocks
        .iter()
        .find(|b| matches!(b.terminator().kind, InstrKind::Stop))
        .unwrap();
    assert!(matches!(join.instrs[0].kind, InstrKind::JumpDest));
    assert_eq!(f.predecessors()[join.id.index()].len(), 2);
}

#[test]
fn diamond_census() {
    let f = lower_fn(DIAMOND, "f");
    // JUMP, JUMPI, JUMPDEST, RETURN, REVERT, STOP; every non-entry block
    // begins with a JUMPDEST, so there are three of them.
    assert_eq!(
        f.census(),
        Census {
            regular: 2,
            jumps: [2, 1, 3, 0, 0, 1]
        }
    );
}

#[test]
fn require_then_return() {
    let f = lower_fn(
        "contract C { function f(uint x) public returns (uint) { require(x > 0); return x; } }",
        "f",
    );
    assert_eq!(f.blocks.len(), 3);
    let InstrKind::JumpI {
        then_to, else_to, ..
    } = f.blocks[0].terminator().kind
    else {
        panic!()
    };
    assert!(matches!(
        f.block(then_to).terminator().kind,
        InstrKind::Return(Some(_))
    ));
    assert!(matches!(
        f.block(else_to).terminator().kind,
        InstrKind::Revert(_)
    ));
}

#[test]
fn straight_line_has_no_phis() {
    let f = ssa_fn(
        "contract C { function f() public returns (uint) { uint a = 1; a = a + 1; return a; } }",
        "f",
    );
    assert_eq!(f.phi_count(), 0);
    assert_eq!(f.values.len(), 2);
    let dump = f.dump();
    assert!(dump.contains("%a.1 = %a.0 + 1 : uint256"), "{dump}");
}

#[test]
fn diamond_join_gets_phi() {
    let src = "contract C { function f(bool c, uint a) public returns (uint) { \
               if (c) { a = 1; } else { a = 2; } return a; } }";
    let f = ssa_fn(src, "f");
    let join = f
        .blocks
        .iter()
        .position(|b| matches!(b.terminator().kind, InstrKind::Return(_)))
        .unwrap();
    assert_eq!(phis(&f, join), vec![2]);
    assert_eq!(f.phi_count(), 1);
}

#[test]
fn pruned_ssa_skips_dead_phi() {
    let f = ssa_fn(DIAMOND, "f");
    assert_eq!(f.phi_count(), 0);
}

#[test]
fn loop_header_phi() {
    let src = "contract C { function f(uint n) public returns (uint) { \
               uint i = 0; while (i < n) { i = i + 1; } return i; } }";
    let f = ssa_fn(src, "f");
    let header = f
        .blocks
        .iter()
        .position(|b| {
            matches!(
                b.terminator().kind,
                InstrKind::JumpI {
                    loop_exit: true,
                    ..
                }
            )
        })
        .unwrap();
    assert_eq!(phis(&f, header), vec![2]);
}

#[test]
fn ssa_preserves_census_and_instruction_total() {
    let src = "contract C { mapping(address => uint) m; uint s; \
               function f(uint n, bool b) public { uint i = 0; \
               for (uint j = 0; j < n && b; j++) { i += j; m[msg.sender] = i; } \
               if (i > 3 || !b) { s = i; } else { revert(); } } }";
    let cfg = lower_fn(src, "f");
    let before = cfg.census();
    let ssa = to_ssa(cfg);
    verify(&ssa).unwrap();
    assert_eq!(ssa.census(), before);
    let total: usize = ssa.blocks.iter().map(|b| b.instrs.len()).sum();
    assert_eq!(total, before.total() + ssa.phi_count());
}

#[test]
fn short_circuit_adds_jumpis() {
    let f = lower_fn(
        "contract C { function f(bool a, bool b) public { require(a && b); } }",
        "f",
    );
    assert_eq!(f.census().jumps[JumpKind::JumpI.index()], 2);
}

#[test]
fn unchecked_and_checked_calls() {
    let src = "contract C { uint s; function f(address a) public { \
               a.send(1); bool ok = a.send(2); require(ok); a.transfer(3); bool unused = a.send(4); } }";
    let f = lower_fn(src, "f");
    let checked: Vec<bool> = f
        .instrs()
        .filter_map(|(_, i)| match i.kind {
            InstrKind::ExtCall { checked, .. } => Some(checked),
            _ => None,
        })
        .collect();
    assert_eq!(checked, vec![false, true, true, false]);
}

#[test]
fn dead_code_after_return_is_dropped() {
    let f = lower_fn(
        "contract C { uint s; function f() public { return; s = 1; } }",
        "f",
    );
    assert_eq!(f.census().regular, 0);
}

#[test]
fn unknown_identifier_is_an_error() {
    let unit = parse("contract C { function f() public { x = 1; } }", "t").unwrap();
    let ig = build_inheritance(&unit).unwrap();
    let flat = flatten(&unit, "C", &ig).unwrap();
    let err = lower_to_cfg(&flat, flat.function("f").unwrap()).unwrap_err();
    assert!(matches!(err, LoweringError::UnknownIdentifier { .. }));
}

/// Random structured bodies over three locals.
fn arb_stmt(depth: u32) -> BoxedStrategy<String> {
    let var = prop_oneof![Just("a"), Just("b"), Just("c")];
    let atom = prop_oneof![
        (0u32..10).prop_map(|n| n.to_string()),
        prop_oneof![Just("a"), Just("b"), Just("c")].prop_map(str::to_string)
    ];
    let expr = (
        atom.clone(),
        prop_oneof![Just("+"), Just("-"), Just("*")],
        atom.clone(),
    )
        .prop_map(|(l, o, r)| format!("{l} {o} {r}"));
    let cond = (
        atom.clone(),
        prop_oneof![Just("<"), Just("=="), Just(">=")],
        atom,
    )
        .prop_map(|(l, o, r)| format!("{l} {o} {r}"));
    let assign = (var, expr).prop_map(|(v, e)| format!("{v} = {e};"));
    if depth == 0 {
        return assign.boxed();
    }
    let block = proptest::collection::vec(arb_stmt(depth - 1), 0..3).prop_map(|v| v.join(" "));
    prop_oneof![
        3 => assign,
        1 => (cond.clone(), block.clone(), block.clone()).prop_map(|(c, t, e)| format!("if ({c}) {{ {t} }} else {{ {e} }}")),
        1 => (cond.clone(), block.clone()).prop_map(|(c, t)| format!("if ({c}) {{ {t} }}")),
        1 => (cond.clone(), block.clone()).prop_map(|(c, t)| format!("while ({c}) {{ {t} }}")),
        1 => (cond.clone(), cond).prop_map(|(c, d)| format!("require({c} && {d});")),
        1 => Just("return a;".to_string()),
    ]
    .boxed()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn random_bodies_build_valid_ssa(stmts in proptest::collection::vec(arb_stmt(2), 0..6)) {
        let src = format!(
            "contract C {{ function f(uint a, uint b) public returns (uint) {{ uint c = a; {} return c; }} }}",
            stmts.join(" ")
        );
        let cfg = lower_fn(&src, "f");
        let census = cfg.census();
        let ssa = to_ssa(cfg);
        prop_assert!(verify(&ssa).is_ok(), "{}\n{}", src, ssa.dump());
        prop_assert_eq!(ssa.census(), census);
        for b in &ssa.blocks {
            let n = b.successors().len();
            let expect = match b.terminator().kind {
                InstrKind::Jump(_) => 1,
                InstrKind::JumpI { .. } => 2,
                _ => 0,
            };
            prop_assert_eq!(n, expect);
        }
    }
}
