use num_bigint::BigInt;
use proptest::prelude::*;

use super::*;
use crate::analysis::analyze_unit;
use crate::dataflow::SlotSpecials;
use crate::frontend::parse;
use crate::pipeline::ContractAnalysis;

const GUARDED: &str = r#"
contract GuardedBranch {
    uint256 calls;
    uint256 misses;

    function unlock(uint256 key) public returns (uint256) {
        calls = 1;
        if (key == 3735928559) {
        }
        misses = 1;
        return 0;
    }
}
"#;

fn analysis(src: &str) -> ContractAnalysis {
    let mut irs = analyze_unit(&parse(src, "test.minisol").expect("parses")).expect("analyzes");
    ContractAnalysis::new(irs.pop().expect("one contract"))
}

fn big(v: i64) -> BigInt {
    BigInt::from(v)
}

/// Fronts by repeatedly peeling off the members no one else dominates.
fn brute_force_fronts(fit: &[Fitness]) -> Vec<Vec<usize>> {
    let mut left: Vec<usize> = (0..fit.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: Vec<usize> = left
            .iter()
            .copied()
            .filter(|&i| !left.iter().any(|&j| fit[j].dominates(&fit[i])))
            .collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

fn direct_crowding(front: &[usize], fit: &[Fitness]) -> Vec<f64> {
    let mut d = vec![0.0; front.len()];
    for m in 0..2 {
        let obj = |i: usize| fit[front[i]].objectives()[m];
        let lo = (0..front.len()).map(obj).fold(f64::INFINITY, f64::min);
        let hi = (0..front.len()).map(obj).fold(f64::NEG_INFINITY, f64::max);
        for (i, di) in d.iter_mut().enumerate() {
            if obj(i) == lo || obj(i) == hi {
                *di = f64::INFINITY;
                continue;
            }
            if hi == lo {
                continue;
            }
            // Neighbours in the sorted order are the nearest values below
            // and above, ties broken by position.
            let below = (0..front.len())
                .filter(|&j| obj(j) < obj(i) || (obj(j) == obj(i) && j < i))
                .map(obj)
                .fold(f64::NEG_INFINITY, f64::max);
            let above = (0..front.len())
                .filter(|&j| obj(j) > obj(i) || (obj(j) == obj(i) && j > i))
                .map(obj)
                .fold(f64::INFINITY, f64::min);
            *di += (above - below) / (hi - lo);
        }
    }
    d
}

fn fitness_strategy(max: usize) -> impl Strategy<Value = Vec<Fitness>> {
    prop::collection::vec((0u8..=10, 0u8..=10), 1..=max).prop_map(|v| {
        v.into_iter()
            .map(|(a, c)| Fitness::new(a as f64 / 10.0, c as f64 / 10.0))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sort_matches_brute_force(fit in fitness_strategy(50)) {
        prop_assert_eq!(fast_nondominated_sort(&fit), brute_force_fronts(&fit));
    }

    #[test]
    fn fronts_partition_population(fit in fitness_strategy(50)) {
        let fronts = fast_nondominated_sort(&fit);
        let mut all: Vec<usize> = fronts.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..fit.len()).collect::<Vec<_>>());
        for (r, front) in fronts.iter().enumerate() {
            for &i in front {
                for &j in front {
                    prop_assert!(!fit[i].dominates(&fit[j]));
                }
                if r > 0 {
                    prop_assert!(fronts[r - 1].iter().any(|&j| fit[j].dominates(&fit[i])));
                }
            }
        }
    }

    #[test]
    fn crowding_matches_direct_formula(fit in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 3..40)) {
        let fit: Vec<Fitness> = fit.into_iter().map(|(a, c)| Fitness::new(a, c)).collect();
        let front: Vec<usize> = (0..fit.len()).collect();
        let got = crowding_distance(&front, &fit);
        let want = direct_crowding(&front, &fit);
        for (g, w) in got.iter().zip(&want) {
            if w.is_infinite() {
                prop_assert!(g.is_infinite());
            } else {
                prop_assert!((g - w).abs() <= 1e-12, "{} vs {}", g, w);
            }
        }
    }

    #[test]
    fn enforced_genes_stay_in_bounds(genes in prop::collection::vec(-1000i64..1000, 3)) {
        let cs = ConstraintSet::from_bounds(vec![(big(0), big(10)), (big(-5), big(5)), (big(100), big(200))]);
        let Enforced::Repaired(g) = cs.enforce(genes.into_iter().map(BigInt::from).collect()) else {
            panic!("bounds alone never reject");
        };
        for (v, (lo, hi)) in g.iter().zip(&cs.bounds) {
            prop_assert!(lo <= v && v <= hi);
        }
    }
}

#[test]
fn small_fronts_are_all_boundary() {
    let fit = vec![Fitness::new(0.1, 0.9), Fitness::new(0.9, 0.1)];
    assert!(crowding_distance(&[0, 1], &fit)
        .iter()
        .all(|d| d.is_infinite()));
    assert!(crowding_distance(&[0], &fit)[0].is_infinite());
}

#[test]
fn binary_bounds_give_binary_genes() {
    let cs = ConstraintSet::from_bounds(vec![(big(0), big(1))]);
    let specials = SpecialValues {
        per_slot: vec![SlotSpecials(vec![big(0), big(1)])],
    };
    let cfg = SearchConfig {
        pop_size: 40,
        ..SearchConfig::default()
    };
    let pop = init_population(&cs, &specials, &cfg).unwrap();
    assert_eq!(pop.len(), 40);
    assert!(pop
        .iter()
        .all(|g| g.len() == 1 && (g[0] == big(0) || g[0] == big(1))));
}

#[test]
fn harvested_constant_seeds_population() {
    let a = analysis(GUARDED);
    let pop = init_population(
        &a.constraints,
        &a.dataflow.specials,
        &SearchConfig::default(),
    )
    .unwrap();
    assert_eq!(pop.len(), 50);
    assert!(pop.iter().any(|g| g[0] == big(3735928559)));
}

#[test]
fn initialization_is_deterministic() {
    let a = analysis(GUARDED);
    let cfg = SearchConfig {
        seed: 7,
        ..SearchConfig::default()
    };
    let p1 = init_population(&a.constraints, &a.dataflow.specials, &cfg).unwrap();
    let p2 = init_population(&a.constraints, &a.dataflow.specials, &cfg).unwrap();
    assert_eq!(p1, p2);
    let other = SearchConfig { seed: 8, ..cfg };
    assert_ne!(
        p1,
        init_population(&a.constraints, &a.dataflow.specials, &other).unwrap()
    );
}

#[test]
fn guarded_branch_coverage_levels() {
    let a = analysis(GUARDED);
    assert_eq!(a.program.census().total(), 9);
    let ev = a.evaluator(&[], MatchPolicy::default(), &Limits::default());
    let mut genes: Vec<BigInt> = a.constraints.bounds.iter().map(|b| b.0.clone()).collect();
    genes[0] = big(12345);
    assert!((ev.evaluate(&genes).fitness.coverage - 7.0 / 9.0).abs() < 1e-12);
    genes[0] = big(3735928559);
    assert_eq!(ev.evaluate(&genes).fitness.coverage, 1.0);
}

const DERIVED: &str = r#"
contract Base {
    uint256 base;
    constructor(uint256 b) {
        require(b != 0);
        base = b;
    }
}

contract Derived is Base {
    uint256 owner;
    uint256 limit;
    constructor(uint256 o, uint256 l) Base(l) {
        require(l <= 1000);
        owner = o;
    }

    function poke() public {
        limit = 1;
    }
}
"#;

#[test]
fn constructor_requires_become_predicates() {
    let a = analysis(DERIVED);
    let kinds: Vec<PredicateKind> = a.constraints.predicates.iter().map(|p| p.kind).collect();
    assert!(kinds.contains(&PredicateKind::Inheritance));
    assert!(kinds.contains(&PredicateKind::Dependency));

    let inputs = &a.dataflow.inputs;
    let gene = |label: &str| {
        inputs
            .slots
            .iter()
            .position(|s| s.name == label)
            .expect(label)
    };
    let (o, l, owner) = (gene("<init>.o"), gene("<init>.l"), gene("owner"));
    let base: Vec<BigInt> = a.constraints.bounds.iter().map(|b| b.0.clone()).collect();

    let mut zero = base.clone();
    zero[l] = big(0);
    assert_eq!(a.constraints.enforce(zero), Enforced::Rejected);

    let mut big_limit = base.clone();
    big_limit[l] = big(1001);
    assert_eq!(a.constraints.enforce(big_limit), Enforced::Rejected);

    let mut ok = base;
    ok[l] = big(5);
    ok[o] = big(77);
    ok[owner] = big(1);
    let Enforced::Repaired(g) = a.constraints.enforce(ok) else {
        panic!("valid genes rejected")
    };
    assert_eq!(
        g[owner],
        big(77),
        "owner is overwritten by the constructor parameter"
    );
    assert!(a.constraints.dependencies.contains(&FunctionalDependency {
        target: owner,
        source: o
    }));
}

#[test]
fn enforcement_is_a_fixpoint() {
    let a = analysis(DERIVED);
    let mut genes: Vec<BigInt> = a
        .constraints
        .bounds
        .iter()
        .map(|b| b.1.clone() + 5)
        .collect();
    let l = a
        .dataflow
        .inputs
        .slots
        .iter()
        .position(|s| s.name == "<init>.l")
        .unwrap();
    genes[l] = big(9);
    let Enforced::Repaired(once) = a.constraints.enforce(genes) else {
        panic!("rejected")
    };
    assert_eq!(
        a.constraints.enforce(once.clone()),
        Enforced::Repaired(once)
    );
}

#[test]
fn gene_above_bound_is_truncated() {
    let cs = ConstraintSet::from_bounds(vec![(big(0), big(255))]);
    assert_eq!(
        cs.enforce(vec![big(300)]),
        Enforced::Repaired(vec![big(255)])
    );
    assert_eq!(cs.enforce(vec![big(-3)]), Enforced::Repaired(vec![big(0)]));
}

#[test]
fn unsatisfiable_constructor_is_reported() {
    let a = analysis(
        r#"
contract Never {
    constructor(uint8 x) {
        require(x > 300);
    }
    function f() public {}
}
"#,
    );
    let cfg = SearchConfig {
        pop_size: 4,
        select_k: 2,
        ..SearchConfig::default()
    };
    let err = init_population(&a.constraints, &a.dataflow.specials, &cfg).unwrap_err();
    assert!(
        matches!(
            err,
            SearchError::InfeasibleConstraints { attempts: 400, .. }
        ),
        "{err}"
    );
}

#[test]
fn invalid_configs_are_rejected() {
    for cfg in [
        SearchConfig {
            pop_size: 0,
            ..SearchConfig::default()
        },
        SearchConfig {
            select_k: 51,
            ..SearchConfig::default()
        },
        SearchConfig {
            pc: 1.5,
            ..SearchConfig::default()
        },
        SearchConfig {
            pm: -0.1,
            ..SearchConfig::default()
        },
    ] {
        assert!(matches!(cfg.validate(), Err(SearchError::Config(_))));
    }
}

fn run_guarded(cfg: &SearchConfig) -> SearchResult {
    let a = analysis(GUARDED);
    let ev = a.evaluator(&[], MatchPolicy::default(), &Limits::default());
    run(&ev, &a.constraints, &a.dataflow.specials, cfg).unwrap()
}

#[test]
fn zero_iterations_keep_initial_population() {
    let r = run_guarded(&SearchConfig {
        max_iters: 0,
        ..SearchConfig::default()
    });
    assert_eq!(r.history.len(), 1);
    assert_eq!(r.initial(), r.last());
    assert_eq!(r.generations, 0);
    assert_eq!(r.evaluations, 50);
}

#[test]
fn guarded_branch_reaches_full_coverage() {
    let r = run_guarded(&SearchConfig::default());
    assert_eq!(r.last().best_coverage, 1.0);
    assert_eq!(r.population.len(), 50);
    assert!(r.population.windows(2).all(|w| w[0].rank <= w[1].rank));
    assert!(!r.pareto_front().is_empty());
}

#[test]
fn best_objectives_never_decrease() {
    for seed in 1..=3 {
        let r = run_guarded(&SearchConfig {
            seed,
            max_iters: 30,
            stagnation_window: 0,
            ..SearchConfig::default()
        });
        assert_eq!(r.history.len(), 31);
        for w in r.history.windows(2) {
            assert!(w[1].best_accuracy >= w[0].best_accuracy);
            assert!(w[1].best_coverage >= w[0].best_coverage);
        }
    }
}

#[test]
fn stagnation_stops_early() {
    let r = run_guarded(&SearchConfig {
        stagnation_window: 3,
        ..SearchConfig::default()
    });
    assert!(r.stopped_early);
    assert!(r.generations < 200);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = SearchConfig {
        seed: 11,
        max_iters: 20,
        ..SearchConfig::default()
    };
    let in_pool = |n: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap();
        pool.install(|| {
            let r = run_guarded(&cfg);
            (serde_json::to_string(&r.population).unwrap(), r.history)
        })
    };
    let one = in_pool(1);
    assert_eq!(one, in_pool(4));
}

#[test]
fn crowding_serializes_infinity_as_text() {
    let i = Individual {
        genes: vec![big(1)],
        fitness: Fitness::new(1.0, 0.5),
        rank: 1,
        crowding: f64::INFINITY,
    };
    let v = serde_json::to_value(&i).unwrap();
    assert_eq!(v["crowding"], "inf");
}
