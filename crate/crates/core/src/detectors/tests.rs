use num_bigint::BigInt;
use proptest::prelude::*;

use super::*;
use crate::analysis::analyze_unit;
use crate::executor::{ExecProgram, Limits};
use crate::frontend::parse;

struct Fixture {
    ir: ContractIr,
    df: Dataflow,
    prog: ExecProgram,
}

impl Fixture {
    fn new(src: &str) -> Fixture {
        let ir = analyze_unit(&parse(src, "t").unwrap())
            .unwrap()
            .pop()
            .unwrap();
        let df = Dataflow::build(&ir);
        let prog = ExecProgram::new(&ir, &df.inputs);
        Fixture { ir, df, prog }
    }

    fn trace(&self, set: &[(&str, i64)]) -> ExecTrace {
        let mut g = vec![BigInt::from(0); self.df.inputs.len()];
        for (name, v) in set {
            let i = self
                .df
                .inputs
                .slots
                .iter()
                .position(|s| s.name == *name)
                .unwrap_or_else(|| panic!("no gene {name}"));
            g[i] = BigInt::from(*v);
        }
        self.prog.execute(&g, &Limits::default()).trace
    }

    fn static_only(&self) -> Vec<Finding> {
        run_all(&self.ir, &self.df, &[])
    }

    fn with(&self, set: &[(&str, i64)]) -> Vec<Finding> {
        run_all(&self.ir, &self.df, &[self.trace(set)])
    }
}

fn of(findings: &[Finding], vuln: VulnType) -> Vec<&Finding> {
    findings.iter().filter(|f| f.vuln == vuln).collect()
}

const WITHDRAW: &str = "contract Bank { mapping(address => uint) balances; \
    function withdraw() public { uint amount = balances[msg.sender]; \
    (bool ok, ) = msg.sender.call{value: amount}(\"\"); require(ok); balances[msg.sender] = 0; } }";

const WITHDRAW_CEI: &str = "contract Bank { mapping(address => uint) balances; \
    function withdraw() public { uint amount = balances[msg.sender]; balances[msg.sender] = 0; \
    (bool ok, ) = msg.sender.call{value: amount}(\"\"); require(ok); } }";

#[test]
fn vuln_type_names_round_trip() {
    for v in VulnType::ALL {
        assert_eq!(v.as_str().parse::<VulnType>().unwrap(), v);
        assert_eq!(serde_json::to_value(v).unwrap(), v.as_str());
    }
    assert_eq!(
        "gas_grief".parse::<VulnType>(),
        Err(UnknownVulnType("gas_grief".into()))
    );
}

#[test]
fn withdraw_before_reset_is_reentrant() {
    let fx = Fixture::new(WITHDRAW);
    let s = fx.static_only();
    let r = of(&s, VulnType::Reentrancy);
    assert_eq!(r.len(), 1);
    assert_eq!((r[0].score, r[0].witnessed), (0.6, false));
    assert_eq!(r[0].function, "withdraw");

    let w = fx.with(&[("balances[attacker]", 100)]);
    let r = of(&w, VulnType::Reentrancy);
    assert_eq!((r[0].score, r[0].witnessed), (1.0, true));
    assert!(
        r[0].evidence.contains("witnessed by trace 0 event"),
        "{}",
        r[0].evidence
    );
}

#[test]
fn checks_effects_interactions_is_safe() {
    let fx = Fixture::new(WITHDRAW_CEI);
    assert!(of(&fx.static_only(), VulnType::Reentrancy).is_empty());
}

#[test]
fn zero_value_call_is_not_reentrancy() {
    let fx = Fixture::new(
        "contract C { uint s; function f() public { (bool ok, ) = msg.sender.call{value: 0}(\"\"); s = 1; } }",
    );
    assert!(of(&fx.static_only(), VulnType::Reentrancy).is_empty());
}

#[test]
fn unconditional_recursion_is_witnessed_at_the_depth_limit() {
    let fx = Fixture::new("contract C { function f() public { f(); } }");
    let s = of(&fx.static_only(), VulnType::CallStackOverflow)
        .into_iter()
        .cloned()
        .collect::<Vec<_>>();
    assert_eq!(s.len(), 1);
    assert!(!s[0].witnessed);
    let w = fx.with(&[]);
    let c = of(&w, VulnType::CallStackOverflow);
    assert!(c[0].witnessed);
    assert!(c[0].evidence.contains("depth_limit"), "{}", c[0].evidence);
}

#[test]
fn bounded_recursion_is_not_flagged() {
    let fx = Fixture::new(
        "contract C { function g(uint n) internal returns (uint) { if (n == 0) { return 0; } return g(n - 1); } \
         function f(uint n) public returns (uint) { require(n < 10); return g(n); } }",
    );
    assert!(of(&fx.static_only(), VulnType::CallStackOverflow).is_empty());
}

#[test]
fn unchecked_send_before_write() {
    let fx = Fixture::new(
        "contract C { uint paid; function f() public { msg.sender.send(1); paid = 1; } }",
    );
    let w = fx.with(&[]);
    let c = of(&w, VulnType::CallStackOverflow);
    assert_eq!(c.len(), 1);
    assert!(c[0].witnessed);
    let checked = Fixture::new(
        "contract C { uint paid; function f() public { require(msg.sender.send(1)); paid = 1; } }",
    );
    assert!(of(&checked.static_only(), VulnType::CallStackOverflow).is_empty());
}

#[test]
fn uint8_increment_overflows() {
    let fx = Fixture::new("contract C { uint8 s; function f(uint8 x) public { s = x + 1; } }");
    let s = fx.static_only();
    let o = of(&s, VulnType::IntegerOverflow);
    assert_eq!((o.len(), o[0].score, o[0].witnessed), (1, 0.5, false));
    assert!(!of(&fx.with(&[("f.x", 3)]), VulnType::IntegerOverflow)[0].witnessed);
    assert!(of(&fx.with(&[("f.x", 255)]), VulnType::IntegerOverflow)[0].witnessed);
}

#[test]
fn guarded_arithmetic_is_safe() {
    for src in [
        "contract C { uint s; function f(uint a, uint b) public { uint c = a + b; require(c >= a); s = c; } }",
        "contract C { uint s; function f(uint a, uint b) public { require(a + b >= a); s = a + b; } }",
        "contract C { uint s; function f(uint a, uint b) public { require(b <= a); s = a - b; } }",
        "contract C { uint s; function f(uint a, uint b) public { uint c = a * b; require(c / a == b); s = c; } }",
        "contract C { uint s; function f(uint8 x) public { require(x < 100); s = x + 1; } }",
        "contract C { uint s; function f() public { uint i = 0; while (i < 10) { i = i + 1; } s = i; } }",
        "contract C { uint constant K = 3; uint s; function f() public { s = K * 2; } }",
    ] {
        let fx = Fixture::new(src);
        assert!(of(&fx.static_only(), VulnType::IntegerOverflow).is_empty(), "{src}");
    }
}

#[test]
fn unguarded_subtraction_is_flagged() {
    let fx =
        Fixture::new("contract C { uint s; function f(uint a, uint b) public { s = a - b; } }");
    assert_eq!(of(&fx.static_only(), VulnType::IntegerOverflow).len(), 1);
    assert!(
        of(
            &fx.with(&[("f.a", 1), ("f.b", 2)]),
            VulnType::IntegerOverflow
        )[0]
        .witnessed
    );
}

const LOTTERY: &str = "contract Lottery { function play() public { \
    if (block.timestamp % 2 == 0) { msg.sender.transfer(1); } } }";

#[test]
fn timestamp_controls_transfer() {
    let fx = Fixture::new(LOTTERY);
    let t = of(&fx.static_only(), VulnType::TimestampDependency)
        .into_iter()
        .cloned()
        .collect::<Vec<_>>();
    assert_eq!(t.len(), 1);
    assert!(!t[0].witnessed);
    assert!(
        !of(
            &fx.with(&[("block.timestamp", 7)]),
            VulnType::TimestampDependency
        )[0]
        .witnessed
    );
    assert!(
        of(
            &fx.with(&[("block.timestamp", 8)]),
            VulnType::TimestampDependency
        )[0]
        .witnessed
    );
}

#[test]
fn timestamp_only_logged_is_safe() {
    let fx = Fixture::new(
        "contract C { event Tick(uint t); function f() public { if (block.timestamp > 5) { emit Tick(block.timestamp); } } }",
    );
    assert!(of(&fx.static_only(), VulnType::TimestampDependency).is_empty());
}

#[test]
fn timestamp_derived_amount() {
    let fx = Fixture::new(
        "contract C { function f() public { msg.sender.transfer(block.timestamp % 10); } }",
    );
    let w = fx.with(&[("block.timestamp", 3)]);
    let t = of(&w, VulnType::TimestampDependency);
    assert_eq!(t.len(), 1);
    assert!(t[0].witnessed);
}

#[test]
fn findings_are_sorted_and_unique() {
    let fx = Fixture::new(
        "contract C { uint8 s; function g(uint8 x) public { s = x + 1; s = x * 2; } \
         function f() public { f(); } }",
    );
    let a = fx.with(&[("g.x", 200)]);
    let keys: Vec<_> = a
        .iter()
        .map(|f| (f.function.clone(), f.loc, f.vuln))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(keys, sorted);
    assert_eq!(a, fx.with(&[("g.x", 200)]));
}

fn arb_gene() -> impl Strategy<Value = i64> {
    prop_oneof![0i64..4, 250i64..260, Just(i64::MAX)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Adding traces never lowers a score or removes a finding.
    #[test]
    fn witnessing_is_monotone(x in arb_gene(), t in arb_gene(), b in arb_gene()) {
        let src = "contract C { uint8 s; mapping(address => uint) balances; \
            function f(uint8 x) public { s = x + 1; if (block.timestamp % 2 == 0) { msg.sender.transfer(1); } } \
            function w() public { uint a = balances[msg.sender]; (bool ok, ) = msg.sender.call{value: a}(\"\"); \
            balances[msg.sender] = 0; } }";
        let fx = Fixture::new(src);
        let sf = StaticFindings::analyze(&fx.ir, &fx.df);
        let base = sf.findings(std::iter::empty());
        let one = fx.trace(&[("f.x", x % 256), ("block.timestamp", t % (1 << 32)), ("balances[attacker]", b)]);
        let more = sf.findings([&one]);
        prop_assert_eq!(base.len(), more.len());
        for (a, m) in base.iter().zip(&more) {
            prop_assert_eq!((&a.function, a.loc, a.vuln), (&m.function, m.loc, m.vuln));
            prop_assert!(m.score >= a.score);
            prop_assert!(m.witnessed || !a.witnessed);
        }
    }
}
