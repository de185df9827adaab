//! Confusion matrices over (contract, vulnerability type) units and the
//! derived detection measures.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use crate::corpus::VulnLabel;
use crate::detectors::{Finding, VulnType};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    fn f(&self) -> (f64, f64, f64, f64) {
        (
            self.tp as f64,
            self.fp as f64,
            self.fn_ as f64,
            self.tn as f64,
        )
    }

    pub fn accuracy(&self) -> f64 {
        let (tp, _, _, tn) = self.f();
        ratio(tp + tn, self.total() as f64)
    }

    pub fn precision(&self) -> f64 {
        let (tp, fp, _, _) = self.f();
        ratio(tp, tp + fp)
    }

    pub fn recall(&self) -> f64 {
        let (tp, _, fn_, _) = self.f();
        ratio(tp, tp + fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        ratio(2.0 * p * r, p + r)
    }

    pub fn tpr(&self) -> f64 {
        self.recall()
    }

    pub fn fpr(&self) -> f64 {
        let (_, fp, _, tn) = self.f();
        ratio(fp, fp + tn)
    }

    pub fn fnr(&self) -> f64 {
        let (tp, _, fn_, _) = self.f();
        ratio(fn_, tp + fn_)
    }

    pub fn tnr(&self) -> f64 {
        let (_, fp, _, tn) = self.f();
        ratio(tn, tn + fp)
    }

    /// Matthews correlation; 0 when any marginal is empty.
    pub fn mcc(&self) -> f64 {
        let (tp, fp, fn_, tn) = self.f();
        let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
        if factors.contains(&0.0) {
            return 0.0;
        }
        let den = factors.iter().product::<f64>().sqrt();
        ((tp * tn - fp * fn_) / den).clamp(-1.0, 1.0)
    }

    /// Fowlkes-Mallows index.
    pub fn fmi(&self) -> f64 {
        (self.precision() * self.recall()).sqrt()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }
}

/// When a finding counts as detecting a label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchPolicy {
    /// Types match, and functions match when the label names one.
    #[default]
    TypeAndFunction,
    TypeOnly,
}

impl MatchPolicy {
    pub fn matches(self, f: &Finding, l: &VulnLabel) -> bool {
        f.vuln == l.vuln
            && match (self, &l.function) {
                (MatchPolicy::TypeAndFunction, Some(func)) => &f.function == func,
                _ => true,
            }
    }
}

/// Outcome of one (contract, type) unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitOutcome {
    pub tp: bool,
    pub fp: bool,
    #[serde(rename = "fn")]
    pub fn_: bool,
    pub tn: bool,
    /// Highest score among the unit's findings, 0 when none.
    pub score: f64,
    pub labeled: bool,
}

pub fn classify_unit(
    findings: &[&Finding],
    labels: &[&VulnLabel],
    policy: MatchPolicy,
) -> UnitOutcome {
    let matched = findings
        .iter()
        .any(|f| labels.iter().any(|l| policy.matches(f, l)));
    let score = findings.iter().map(|f| f.score).fold(0.0, f64::max);
    let labeled = !labels.is_empty();
    UnitOutcome {
        tp: matched,
        fp: !matched && !findings.is_empty(),
        fn_: !matched && labeled,
        tn: findings.is_empty() && !labeled,
        score,
        labeled,
    }
}

/// Per-type unit outcomes over the contract set `findings` (path to findings).
/// Labels of paths outside the set are ignored.
pub fn unit_outcomes(
    findings: &BTreeMap<String, Vec<Finding>>,
    labels: &BTreeMap<String, Vec<VulnLabel>>,
    policy: MatchPolicy,
) -> BTreeMap<VulnType, Vec<UnitOutcome>> {
    let mut out: BTreeMap<VulnType, Vec<UnitOutcome>> =
        VulnType::ALL.iter().map(|v| (*v, Vec::new())).collect();
    for (path, fs) in findings {
        let ls = labels.get(path).map(Vec::as_slice).unwrap_or_default();
        for v in VulnType::ALL {
            let f: Vec<&Finding> = fs.iter().filter(|f| f.vuln == v).collect();
            let l: Vec<&VulnLabel> = ls.iter().filter(|l| l.vuln == v).collect();
            out.get_mut(&v)
                .expect("all types")
                .push(classify_unit(&f, &l, policy));
        }
    }
    out
}

pub fn confuse(
    findings: &BTreeMap<String, Vec<Finding>>,
    labels: &BTreeMap<String, Vec<VulnLabel>>,
    policy: MatchPolicy,
) -> BTreeMap<VulnType, ConfusionMatrix> {
    unit_outcomes(findings, labels, policy)
        .into_iter()
        .map(|(v, units)| (v, tally(&units)))
        .collect()
}

pub fn tally(units: &[UnitOutcome]) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for u in units {
        cm.tp += u.tp as u64;
        cm.fp += u.fp as u64;
        cm.fn_ += u.fn_ as u64;
        cm.tn += u.tn as u64;
    }
    cm
}

/// ROC points from sweeping the threshold over the distinct scores, from
/// (0, 0) to (1, 1). A sample is predicted positive when its score is at
/// least the threshold and above zero.
pub fn roc_points(scored: &[(f64, bool)]) -> Vec<(f64, f64)> {
    let pos = scored.iter().filter(|s| s.1).count() as f64;
    let neg = scored.len() as f64 - pos;
    let mut thresholds: Vec<f64> = scored.iter().map(|s| s.0).filter(|s| *s > 0.0).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut pts = vec![(0.0, 0.0)];
    for t in thresholds {
        let tp = scored.iter().filter(|s| s.1 && s.0 >= t).count() as f64;
        let fp = scored.iter().filter(|s| !s.1 && s.0 >= t).count() as f64;
        pts.push((ratio(fp, neg), ratio(tp, pos)));
    }
    pts.push((1.0, 1.0));
    pts
}

/// Trapezoidal area under the ROC curve of `scored` `(score, is_positive)`
/// samples; 0 when either class is empty.
pub fn auc(scored: &[(f64, bool)]) -> f64 {
    let pos = scored.iter().filter(|s| s.1).count();
    if pos == 0 || pos == scored.len() {
        return 0.0;
    }
    roc_points(scored)
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypeMetrics {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1_score: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub tnr: f64,
    pub auc: f64,
    pub mcc: f64,
    pub fmi: f64,
}

impl TypeMetrics {
    pub fn new(cm: ConfusionMatrix, auc: f64) -> TypeMetrics {
        TypeMetrics {
            confusion: cm,
            accuracy: cm.accuracy(),
            precision: cm.precision(),
            recall: cm.recall(),
            f1_score: cm.f1(),
            tpr: cm.tpr(),
            fpr: cm.fpr(),
            fnr: cm.fnr(),
            tnr: cm.tnr(),
            auc,
            mcc: cm.mcc(),
            fmi: cm.fmi(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub per_type: BTreeMap<VulnType, TypeMetrics>,
}

impl MetricsReport {
    pub fn compute(
        findings: &BTreeMap<String, Vec<Finding>>,
        labels: &BTreeMap<String, Vec<VulnLabel>>,
        policy: MatchPolicy,
    ) -> MetricsReport {
        let per_type = unit_outcomes(findings, labels, policy)
            .into_iter()
            .map(|(v, units)| {
                let scored: Vec<(f64, bool)> = units.iter().map(|u| (u.score, u.labeled)).collect();
                (v, TypeMetrics::new(tally(&units), auc(&scored)))
            })
            .collect();
        MetricsReport { per_type }
    }

    /// Aligned table, one row per type.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let cols = [
            "tp", "fp", "fn", "tn", "acc", "prec", "recall", "f1", "fpr", "auc", "mcc", "fmi",
        ];
        let _ = write!(s, "{:<22}", "type");
        for c in cols {
            let _ = write!(s, "{c:>8}");
        }
        s.push('\n');
        for (v, m) in &self.per_type {
            let c = m.confusion;
            let _ = write!(
                s,
                "{:<22}{:>8}{:>8}{:>8}{:>8}",
                v.as_str(),
                c.tp,
                c.fp,
                c.fn_,
                c.tn
            );
            for x in [
                m.accuracy,
                m.precision,
                m.recall,
                m.f1_score,
                m.fpr,
                m.auc,
                m.mcc,
                m.fmi,
            ] {
                let _ = write!(s, "{x:>8.4}");
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests;
