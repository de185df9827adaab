use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sentry_core::corpus::{index_corpus, load_labels, LabelFile, BUNDLED_LABELS};
use sentry_core::executor::Limits;
use sentry_core::metrics::MetricsReport;
use sentry_core::{analyze_path, ContractAnalysis, Finding, MatchPolicy, SearchConfig, VulnLabel};
use thiserror::Error;

use crate::args::{EvaluateArgs, Mode, RunArgs};
use crate::report::{
    ContractReport, Delta, EvaluatedContract, EvaluationReport, LimitsView, Report, SearchSummary,
    Tool, REPORT_SCHEMA,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Analysis(#[from] sentry_core::AnalysisError),
    #[error(transparent)]
    Corpus(#[from] sentry_core::CorpusError),
    #[error("{path}: {source}")]
    Search {
        path: String,
        source: sentry_core::SearchError,
    },
    #[error("{0}: no contracts found")]
    EmptyCorpus(String),
}

/// Everything one file run needs besides the path.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub mode: Mode,
    pub config: SearchConfig,
    pub limits: Limits,
    pub policy: MatchPolicy,
    pub timing: bool,
}

/// Destinations for the optional dumps.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dumps {
    pub ir: bool,
    pub deps: bool,
    pub graphs: bool,
    pub trace: bool,
}

impl Dumps {
    fn any(&self) -> bool {
        self.ir || self.deps || self.graphs || self.trace
    }
}

fn elapsed_ms(start: Instant, timing: bool) -> Option<f64> {
    timing.then(|| start.elapsed().as_secs_f64() * 1000.0)
}

fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| {
        (&a.contract, &a.function, a.loc, a.vuln).cmp(&(&b.contract, &b.function, b.loc, b.vuln))
    });
}

/// Labels of `path`: entries whose path equals it or is a `/`-aligned suffix of it.
pub fn labels_for(file: &LabelFile, path: &Path) -> Vec<VulnLabel> {
    let p = path.to_string_lossy().replace('\\', "/");
    file.entries
        .iter()
        .filter(|e| p == e.path || p.ends_with(&format!("/{}", e.path)))
        .flat_map(|e| e.vulnerabilities.iter().cloned())
        .collect()
}

/// Findings and report section of one analyzed contract.
fn contract_run(
    a: &ContractAnalysis,
    labels: &[VulnLabel],
    s: &RunSettings,
    dumps: &Dumps,
    diag: &mut Vec<String>,
) -> Result<(Vec<Finding>, ContractReport), CliError> {
    let names: Vec<String> = a.ir.functions.iter().map(|f| f.name.clone()).collect();
    if dumps.ir {
        for f in &a.ir.functions {
            diag.push(f.dump());
        }
        diag.push(a.dataflow.inputs.dump());
    }
    if dumps.deps {
        diag.push(a.dataflow.deps_dot(&a.ir));
    }
    if dumps.graphs {
        for f in &a.ir.functions {
            diag.push(f.cfg_dot());
        }
        diag.push(serde_json::to_string_pretty(&a.ir.call_graph.to_json()).unwrap_or_default());
    }
    let ev = a.evaluator(labels, s.policy, &s.limits);
    let inputs = a
        .dataflow
        .inputs
        .slots
        .iter()
        .map(|sl| sl.name.clone())
        .collect();
    let statements = a.program.census().total();
    match s.mode {
        Mode::Static => {
            let base = ev.evaluate(&a.baseline_genes());
            if dumps.trace {
                diag.push(base.trace.to_jsonl(&names));
            }
            let findings = a.static_findings();
            let f = base.fitness;
            let report = ContractReport {
                name: a.name().to_string(),
                statements,
                inputs,
                coverage: Delta {
                    before: f.coverage,
                    after: f.coverage,
                },
                accuracy: Delta {
                    before: ev.accuracy(&findings),
                    after: ev.accuracy(&findings),
                },
                search: None,
            };
            Ok((findings, report))
        }
        Mode::Search => {
            let outcome = a
                .search(labels, s.policy, &s.config, &s.limits)
                .map_err(|source| CliError::Search {
                    path: a.name().to_string(),
                    source,
                })?;
            let r = &outcome.result;
            if dumps.trace {
                for t in &r.witness_traces {
                    diag.push(t.to_jsonl(&names));
                }
            }
            let (first, last) = (r.initial(), r.last());
            let report = ContractReport {
                name: a.name().to_string(),
                statements,
                inputs,
                coverage: Delta {
                    before: first.best_coverage,
                    after: last.best_coverage,
                },
                accuracy: Delta {
                    before: first.best_accuracy,
                    after: last.best_accuracy,
                },
                search: Some(SearchSummary {
                    generations: r.generations,
                    stopped_early: r.stopped_early,
                    evaluations: r.evaluations,
                    history: r.history.clone(),
                    pareto_front: r.pareto_front().into_iter().cloned().collect(),
                }),
            };
            Ok((outcome.findings, report))
        }
    }
}

/// Runs one file. Diagnostics (dumps) are appended to `diag`.
pub fn run_file(
    path: &Path,
    labels: &[VulnLabel],
    s: &RunSettings,
    dumps: &Dumps,
    diag: &mut Vec<String>,
) -> Result<Report, CliError> {
    let start = Instant::now();
    let analyses = analyze_path(path)?;
    let mut findings = Vec::new();
    let mut contracts = Vec::new();
    for a in &analyses {
        let (f, c) = contract_run(a, labels, s, dumps, diag)?;
        findings.extend(f);
        contracts.push(c);
    }
    sort_findings(&mut findings);
    Ok(Report {
        schema: REPORT_SCHEMA,
        tool: Tool::current(),
        path: path.display().to_string(),
        mode: s.mode,
        seed: s.config.seed,
        config: s.config.clone(),
        limits: LimitsView::from(&s.limits),
        findings,
        contracts,
        wall_time_ms: elapsed_ms(start, s.timing),
    })
}

fn read_labels(path: Option<&Path>) -> Result<LabelFile, CliError> {
    match path {
        Some(p) => {
            let (file, warnings) = load_labels(p)?;
            for w in warnings {
                log::warn!("{w}");
            }
            Ok(file)
        }
        None => Ok(LabelFile::empty()),
    }
}

/// Evaluates every contract under `dir`, in parallel, merged in path order.
pub fn evaluate_dir(
    dir: &Path,
    labels: Option<&Path>,
    s: &RunSettings,
) -> Result<EvaluationReport, CliError> {
    let start = Instant::now();
    let default_labels = dir.join(BUNDLED_LABELS);
    let labels_path: Option<PathBuf> = labels
        .map(Path::to_path_buf)
        .or_else(|| default_labels.is_file().then_some(default_labels));
    let file = read_labels(labels_path.as_deref())?;
    let index = index_corpus(dir, &file);
    if index.is_empty() {
        return Err(CliError::EmptyCorpus(dir.display().to_string()));
    }
    for d in &index.dangling {
        log::warn!("label entry {d} matches no contract");
    }
    let by_path = file.by_path();
    let runs: Vec<(String, Result<Report, CliError>)> = index
        .contracts
        .par_iter()
        .map(|c| {
            let labels = by_path.get(&c.path).cloned().unwrap_or_default();
            let mut sink = Vec::new();
            (
                c.path.clone(),
                run_file(&index.absolute(c), &labels, s, &Dumps::default(), &mut sink),
            )
        })
        .collect();

    let mut contracts = Vec::new();
    let mut findings: BTreeMap<String, Vec<Finding>> = BTreeMap::new();
    let mut coverage_sum = 0.0;
    let mut analyzed = 0usize;
    for (path, run) in runs {
        match run {
            Ok(r) => {
                let after: Vec<f64> = r.contracts.iter().map(|c| c.coverage.after).collect();
                let before: Vec<f64> = r.contracts.iter().map(|c| c.coverage.before).collect();
                let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
                let cov = Delta {
                    before: mean(&before),
                    after: mean(&after),
                };
                coverage_sum += cov.after;
                analyzed += 1;
                contracts.push(EvaluatedContract {
                    path: path.clone(),
                    findings: r.findings.len(),
                    coverage: Some(cov),
                    error: None,
                });
                findings.insert(path, r.findings);
            }
            Err(e) => {
                log::warn!("{path}: {e}");
                contracts.push(EvaluatedContract {
                    path,
                    findings: 0,
                    coverage: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    Ok(EvaluationReport {
        schema: REPORT_SCHEMA,
        tool: Tool::current(),
        root: dir.display().to_string(),
        mode: s.mode,
        seed: s.config.seed,
        config: s.config.clone(),
        limits: LimitsView::from(&s.limits),
        contracts,
        mean_coverage: if analyzed == 0 {
            0.0
        } else {
            coverage_sum / analyzed as f64
        },
        metrics: MetricsReport::compute(&findings, &by_path, s.policy),
        wall_time_ms: elapsed_ms(start, s.timing),
    })
}

/// Exit status of a finished command.
pub const EXIT_CLEAN: u8 = 0;
pub const EXIT_FINDINGS: u8 = 1;
pub const EXIT_ERROR: u8 = 2;

fn emit(out: &mut dyn Write, text: &str) -> u8 {
    match out.write_all(text.as_bytes()) {
        Ok(()) => EXIT_CLEAN,
        Err(_) => EXIT_ERROR,
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

pub fn cmd_run(args: &RunArgs, default_mode: Mode, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let settings = RunSettings {
        mode: args.mode.unwrap_or(default_mode),
        config: args.search.config(),
        limits: args.limits.limits(),
        policy: MatchPolicy::default(),
        timing: !args.output.no_timing,
    };
    if let Err(e) = settings.config.validate() {
        let _ = writeln!(err, "error: {e}");
        return EXIT_ERROR;
    }
    let dumps = Dumps {
        ir: args.dump_ir,
        deps: args.dump_deps,
        graphs: args.dump_graphs,
        trace: args.trace,
    };
    let result = read_labels(args.labels.as_deref()).and_then(|file| {
        let labels = labels_for(&file, &args.path);
        let mut diag = Vec::new();
        let report = run_file(&args.path, &labels, &settings, &dumps, &mut diag);
        if dumps.any() {
            for d in diag {
                let _ = writeln!(err, "{}", d.trim_end());
            }
        }
        report
    });
    match result {
        Ok(report) => {
            let text = match args.output.format {
                crate::args::Format::Json => json(&report),
                crate::args::Format::Text => report.to_text(),
            };
            if emit(out, &text) == EXIT_ERROR {
                return EXIT_ERROR;
            }
            if report.findings.is_empty() {
                EXIT_CLEAN
            } else {
                EXIT_FINDINGS
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let settings = RunSettings {
        mode: args.mode,
        config: args.search.config(),
        limits: args.limits.limits(),
        policy: if args.type_only {
            MatchPolicy::TypeOnly
        } else {
            MatchPolicy::TypeAndFunction
        },
        timing: !args.output.no_timing,
    };
    if let Err(e) = settings.config.validate() {
        let _ = writeln!(err, "error: {e}");
        return EXIT_ERROR;
    }
    match evaluate_dir(&args.dir, args.labels.as_deref(), &settings) {
        Ok(report) => {
            let text = match args.output.format {
                crate::args::Format::Json => json(&report),
                crate::args::Format::Text => report.to_text(),
            };
            emit(out, &text)
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}
