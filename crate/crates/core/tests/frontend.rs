use proptest::prelude::*;
use sentry_core::corpus::bundled_corpus_dir;
use sentry_core::frontend::{parse, parse_file, print_unit};

fn ident() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "total", "owner"]).prop_map(str::to_string)
}

fn expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0u64..1_000_000).prop_map(|n| n.to_string()),
        ident(),
        Just("block.timestamp".to_string()),
        Just("msg.value".to_string()),
        Just("true".to_string()),
        ident().prop_map(|k| format!("balances[{k}]")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let ops = prop::sample::select(vec![
            "+", "-", "*", "/", "%", "<", "<=", ">", ">=", "==", "!=", "&&", "||",
        ]);
        prop_oneof![
            (inner.clone(), ops, inner.clone()).prop_map(|(l, op, r)| format!("{l} {op} {r}")),
            inner.clone().prop_map(|e| format!("!({e})")),
            inner.clone().prop_map(|e| format!("-({e})")),
            inner.prop_map(|e| format!("({e})")),
        ]
    })
}

fn stmt() -> impl Strategy<Value = String> {
    let simple = prop_oneof![
        (ident(), expr()).prop_map(|(v, e)| format!("{v} = {e};")),
        expr().prop_map(|e| format!("require({e});")),
        (ident(), expr()).prop_map(|(k, e)| format!("balances[{k}] = {e};")),
        expr().prop_map(|e| format!("msg.sender.transfer({e});")),
        Just("revert();".to_string()),
    ];
    simple.prop_recursive(3, 12, 3, |inner| {
        let block = prop::collection::vec(inner.clone(), 0..3).prop_map(|v| v.join(" "));
        prop_oneof![
            (expr(), block.clone(), block.clone())
                .prop_map(|(c, t, e)| format!("if ({c}) {{ {t} }} else {{ {e} }}")),
            (expr(), block).prop_map(|(c, b)| format!("while ({c}) {{ {b} }}")),
        ]
    })
}

fn contract() -> impl Strategy<Value = String> {
    prop::collection::vec(stmt(), 0..6).prop_map(|body| {
        format!(
            "contract C {{ uint256 a; uint8 b; int64 total; address owner; mapping(address => uint256) balances;\n\
             function f(uint256 x) public payable {{ {} }} }}",
            body.join("\n")
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn printing_then_parsing_is_identity(src in contract()) {
        let unit = parse(&src, "gen.minisol").unwrap();
        let printed = print_unit(&unit);
        let again = parse(&printed, "gen.minisol").unwrap();
        prop_assert_eq!(unit.without_locations().contracts, again.without_locations().contracts);
        prop_assert_eq!(print_unit(&again), printed);
    }
}

#[test]
fn corpus_files_round_trip() {
    let mut seen = 0;
    for entry in std::fs::read_dir(bundled_corpus_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "minisol") {
            let unit = parse_file(&path).unwrap();
            let again = parse(&print_unit(&unit), "printed").unwrap();
            assert_eq!(
                unit.without_locations().contracts,
                again.without_locations().contracts,
                "{}",
                path.display()
            );
            seen += 1;
        }
    }
    assert!(seen >= 24);
}
