use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::frontend::SourceLocation;

/// Direct formulas over integers, written independently of the methods.
mod oracle {
    pub fn div(n: u64, d: u64) -> f64 {
        if d == 0 {
            0.0
        } else {
            n as f64 / d as f64
        }
    }

    pub fn all(tp: u64, fp: u64, fn_: u64, tn: u64) -> [f64; 10] {
        let p = div(tp, tp + fp);
        let r = div(tp, tp + fn_);
        let f1 = div(2 * tp, 2 * tp + fp + fn_);
        let num = tp as i128 * tn as i128 - fp as i128 * fn_ as i128;
        let den = (tp + fp) as u128 * (tp + fn_) as u128 * (tn + fp) as u128 * (tn + fn_) as u128;
        let mcc = if den == 0 {
            0.0
        } else {
            num as f64 / (den as f64).sqrt()
        };
        let fmi = if tp == 0 {
            0.0
        } else {
            tp as f64 / (((tp + fp) * (tp + fn_)) as f64).sqrt()
        };
        [
            div(tp + tn, tp + fp + fn_ + tn),
            p,
            r,
            f1,
            r,
            div(fp, fp + tn),
            div(fn_, tp + fn_),
            div(tn, tn + fp),
            mcc,
            fmi,
        ]
    }
}

fn ours(cm: &ConfusionMatrix) -> [f64; 10] {
    [
        cm.accuracy(),
        cm.precision(),
        cm.recall(),
        cm.f1(),
        cm.tpr(),
        cm.fpr(),
        cm.fnr(),
        cm.tnr(),
        cm.mcc(),
        cm.fmi(),
    ]
}

#[test]
fn thousand_random_matrices_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let [tp, fp, fn_, tn]: [u64; 4] = std::array::from_fn(|_| rng.gen_range(0..=100));
        let cm = ConfusionMatrix::new(tp, fp, fn_, tn);
        for (a, b) in ours(&cm).iter().zip(oracle::all(tp, fp, fn_, tn)) {
            assert!((a - b).abs() <= 1e-9, "{cm:?}: {a} vs {b}");
        }
    }
}

#[test]
fn documented_examples() {
    let perfect = ConfusionMatrix::new(5, 0, 0, 5);
    assert_eq!(
        [
            perfect.accuracy(),
            perfect.precision(),
            perfect.recall(),
            perfect.f1()
        ],
        [1.0; 4]
    );
    assert_eq!(perfect.mcc(), 1.0);
    assert_eq!(ConfusionMatrix::new(0, 5, 5, 0).mcc(), -1.0);
    assert_eq!(ConfusionMatrix::new(1, 1, 1, 1).mcc(), 0.0);
    assert_eq!(ConfusionMatrix::new(3, 0, 1, 0).recall(), 0.75);
    assert_eq!(ConfusionMatrix::new(0, 0, 3, 3).precision(), 0.0);
    assert_eq!(ConfusionMatrix::new(4, 0, 0, 0).fmi(), 1.0);
    assert_eq!(ConfusionMatrix::new(1, 1, 1, 0).fmi(), 0.5);
    assert_eq!(ConfusionMatrix::new(0, 3, 3, 3).fmi(), 0.0);
}

/// Probability that a random positive outscores a random negative, ties
/// counted half: equal to the trapezoidal ROC area.
fn mann_whitney(scored: &[(f64, bool)]) -> f64 {
    let pos: Vec<f64> = scored.iter().filter(|s| s.1).map(|s| s.0).collect();
    let neg: Vec<f64> = scored.iter().filter(|s| !s.1).map(|s| s.0).collect();
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

#[test]
fn auc_examples() {
    let perfect = [(1.0, true), (1.0, true), (0.0, false), (0.0, false)];
    assert_eq!(auc(&perfect), 1.0);
    // One operating point: 17 of 20 positives and 1 of 20 negatives flagged.
    let mut one = Vec::new();
    one.extend((0..20).map(|i| (if i < 17 { 1.0 } else { 0.0 }, true)));
    one.extend((0..20).map(|i| (if i < 1 { 1.0 } else { 0.0 }, false)));
    assert!((auc(&one) - 0.90).abs() < 1e-12);
    assert_eq!(auc(&[(1.0, true)]), 0.0);
}

#[test]
fn random_scores_give_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let scored: Vec<(f64, bool)> = (0..10_000)
        .map(|i| (rng.gen::<f64>(), i % 2 == 0))
        .collect();
    let a = auc(&scored);
    assert!((a - 0.5).abs() <= 0.02, "{a}");
}

fn finding(vuln: VulnType, function: &str) -> Finding {
    Finding {
        vuln,
        contract: "C".into(),
        function: function.into(),
        loc: SourceLocation::default(),
        score: 0.6,
        witnessed: false,
        evidence: String::new(),
    }
}

fn label(vuln: VulnType, function: Option<&str>) -> VulnLabel {
    VulnLabel {
        vuln,
        function: function.map(str::to_string),
        line: None,
    }
}

#[test]
fn confusion_over_units() {
    let r = VulnType::Reentrancy;
    let mut findings: BTreeMap<String, Vec<Finding>> =
        (0..5).map(|i| (format!("c{i}"), Vec::new())).collect();
    let none = confuse(&findings, &BTreeMap::new(), MatchPolicy::default());
    assert!(none
        .values()
        .all(|cm| *cm == ConfusionMatrix::new(0, 0, 0, 5)));

    findings.insert("c0".into(), vec![finding(r, "withdraw")]);
    findings.insert("c1".into(), vec![finding(r, "f")]);
    let labels = BTreeMap::from([
        ("c0".to_string(), vec![label(r, Some("withdraw"))]),
        ("c1".to_string(), vec![label(r, Some("g"))]),
    ]);
    let cm = confuse(&findings, &labels, MatchPolicy::default())[&r];
    assert_eq!(cm, ConfusionMatrix::new(1, 1, 1, 3));
    let cm = confuse(&findings, &labels, MatchPolicy::TypeOnly)[&r];
    assert_eq!(cm, ConfusionMatrix::new(2, 0, 0, 3));
}

#[test]
fn report_has_every_type() {
    let findings = BTreeMap::from([(
        "a".to_string(),
        vec![finding(VulnType::IntegerOverflow, "f")],
    )]);
    let labels = BTreeMap::from([(
        "a".to_string(),
        vec![label(VulnType::IntegerOverflow, None)],
    )]);
    let rep = MetricsReport::compute(&findings, &labels, MatchPolicy::default());
    assert_eq!(rep.per_type.len(), 4);
    assert_eq!(rep.per_type[&VulnType::IntegerOverflow].recall, 1.0);
    let text = rep.to_text();
    assert_eq!(text.lines().count(), 5);
    let json = serde_json::to_value(&rep).unwrap();
    assert_eq!(json["per_type"]["integer_overflow"]["confusion"]["fn"], 0);
}

fn arb_cm() -> impl Strategy<Value = ConfusionMatrix> {
    (0u64..100, 0u64..100, 0u64..100, 0u64..100)
        .prop_map(|(a, b, c, d)| ConfusionMatrix::new(a, b, c, d))
}

proptest! {
    #[test]
    fn metrics_stay_in_range(cm in arb_cm()) {
        let v = ours(&cm);
        for (i, x) in v.iter().enumerate() {
            if i == 8 {
                prop_assert!((-1.0..=1.0).contains(x));
            } else {
                prop_assert!((0.0..=1.0).contains(x));
            }
        }
    }

    #[test]
    fn relabeling_classes_keeps_mcc(cm in arb_cm()) {
        let swapped = ConfusionMatrix::new(cm.tn, cm.fn_, cm.fp, cm.tp);
        prop_assert!((swapped.mcc() - cm.mcc()).abs() < 1e-12);
    }

    #[test]
    fn inverting_predictions_negates_mcc(cm in arb_cm()) {
        let inverted = ConfusionMatrix::new(cm.fn_, cm.tn, cm.tp, cm.fp);
        prop_assert!((inverted.mcc() + cm.mcc()).abs() < 1e-12);
    }

    #[test]
    fn auc_matches_rank_statistic(scored in prop::collection::vec((0u8..6, any::<bool>()), 2..60)) {
        let scored: Vec<(f64, bool)> = scored.into_iter().map(|(s, p)| (s as f64 / 5.0, p)).collect();
        prop_assume!(scored.iter().any(|s| s.1) && scored.iter().any(|s| !s.1));
        prop_assert!((auc(&scored) - mann_whitney(&scored)).abs() < 1e-12);
    }

    #[test]
    fn auc_invariant_under_monotone_transform(scored in prop::collection::vec((1u8..6, any::<bool>()), 2..60)) {
        let a: Vec<(f64, bool)> = scored.iter().map(|&(s, p)| (s as f64 / 5.0, p)).collect();
        let b: Vec<(f64, bool)> = a.iter().map(|&(s, p)| (s.powi(3) * 0.5 + 0.1, p)).collect();
        prop_assert!((auc(&a) - auc(&b)).abs() < 1e-12);
    }
}
