//! Report documents and their text rendering.

use std::fmt::Write;

use sentry_core::executor::Limits;
use sentry_core::search::{GenerationStats, Individual};
use sentry_core::{Finding, MetricsReport, SearchConfig};
use serde::Serialize;

use crate::args::Mode;

/// Version of the report layout; bumped on any incompatible change.
pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

impl Tool {
    pub fn current() -> Tool {
        Tool {
            name: "sentry",
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitsView {
    pub loop_cap: u32,
    pub depth_limit: usize,
    pub reentry_count: u32,
}

impl From<&Limits> for LimitsView {
    fn from(l: &Limits) -> Self {
        LimitsView {
            loop_cap: l.loop_cap,
            depth_limit: l.depth_limit,
            reentry_count: l.reentry_count,
        }
    }
}

/// Objective values before and after search. In static mode both are the
/// values of the single baseline execution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Delta {
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchSummary {
    pub generations: usize,
    pub stopped_early: bool,
    pub evaluations: usize,
    pub history: Vec<GenerationStats>,
    pub pareto_front: Vec<Individual>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractReport {
    pub name: String,
    pub statements: usize,
    /// Gene names, in gene order.
    pub inputs: Vec<String>,
    pub coverage: Delta,
    pub accuracy: Delta,
    pub search: Option<SearchSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: u32,
    pub tool: Tool,
    pub path: String,
    pub mode: Mode,
    pub seed: u64,
    pub config: SearchConfig,
    pub limits: LimitsView,
    /// Every contract's findings, sorted by contract, function, location, type.
    pub findings: Vec<Finding>,
    pub contracts: Vec<ContractReport>,
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluatedContract {
    pub path: String,
    pub findings: usize,
    pub coverage: Option<Delta>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub schema: u32,
    pub tool: Tool,
    pub root: String,
    pub mode: Mode,
    pub seed: u64,
    pub config: SearchConfig,
    pub limits: LimitsView,
    pub contracts: Vec<EvaluatedContract>,
    /// Mean final coverage over the contracts that were analyzed.
    pub mean_coverage: f64,
    pub metrics: MetricsReport,
    pub wall_time_ms: Option<f64>,
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Static => "static",
        Mode::Search => "search",
    }
}

/// The two header lines shared by every text report.
fn header(out: &mut String, tool: &Tool, mode: Mode, cfg: &SearchConfig, limits: &LimitsView) {
    let _ = writeln!(
        out,
        "{} {}  mode={}  seed={}",
        tool.name,
        tool.version,
        mode_name(mode),
        cfg.seed
    );
    let _ = writeln!(
        out,
        "N={} T={} K={} Pc={} Pm={} stagnation={} loop_cap={} depth_limit={} reentry_count={}",
        cfg.pop_size,
        cfg.max_iters,
        cfg.select_k,
        cfg.pc,
        cfg.pm,
        cfg.stagnation_window,
        limits.loop_cap,
        limits.depth_limit,
        limits.reentry_count
    );
}

fn timing(out: &mut String, ms: Option<f64>) {
    if let Some(ms) = ms {
        let _ = writeln!(out, "wall time: {ms:.1} ms");
    }
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        header(&mut out, &self.tool, self.mode, &self.config, &self.limits);
        let _ = writeln!(out, "path: {}", self.path);
        for c in &self.contracts {
            let _ = writeln!(
                out,
                "\ncontract {} ({} statements, {} inputs)\n  coverage {:.4} -> {:.4}   accuracy {:.4} -> {:.4}",
                c.name,
                c.statements,
                c.inputs.len(),
                c.coverage.before,
                c.coverage.after,
                c.accuracy.before,
                c.accuracy.after
            );
            if let Some(s) = &c.search {
                let _ = writeln!(
                    out,
                    "  generations {}{}, evaluations {}, pareto front {}",
                    s.generations,
                    if s.stopped_early { " (stagnated)" } else { "" },
                    s.evaluations,
                    s.pareto_front.len()
                );
            }
        }
        let _ = writeln!(out, "\nfindings: {}", self.findings.len());
        for f in &self.findings {
            let _ = writeln!(
                out,
                "  {:<22} {}.{} line {}  score {:.1}{}\n      {}",
                f.vuln.as_str(),
                f.contract,
                f.function,
                f.loc.line,
                f.score,
                if f.witnessed { " (witnessed)" } else { "" },
                f.evidence
            );
        }
        timing(&mut out, self.wall_time_ms);
        out
    }
}

impl EvaluationReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        header(&mut out, &self.tool, self.mode, &self.config, &self.limits);
        let _ = writeln!(
            out,
            "corpus: {} ({} contracts)\n",
            self.root,
            self.contracts.len()
        );
        out.push_str(&self.metrics.to_text());
        let _ = writeln!(out, "\nmean coverage: {:.4}", self.mean_coverage);
        for c in self.contracts.iter().filter(|c| c.error.is_some()) {
            let _ = writeln!(
                out,
                "skipped {}: {}",
                c.path,
                c.error.as_deref().unwrap_or_default()
            );
        }
        timing(&mut out, self.wall_time_ms);
        out
    }
}
