//! End-to-end wiring: analysis artifacts of one contract, static detection
//! and search-backed detection.

use std::path::Path;
use std::sync::Arc;

use num_bigint::BigInt;

use crate::analysis::{analyze_unit, AnalysisError, ContractIr};
use crate::corpus::VulnLabel;
use crate::dataflow::Dataflow;
use crate::detectors::{Finding, StaticFindings};
use crate::executor::{ExecProgram, Execution, Limits};
use crate::frontend::{parse, parse_file};
use crate::metrics::MatchPolicy;
use crate::search::nsga::truncate;
use crate::search::{self, ConstraintSet, Evaluator, SearchConfig, SearchError, SearchResult};

/// Everything derived statically from one contract.
#[derive(Debug, Clone)]
pub struct ContractAnalysis {
    pub ir: ContractIr,
    pub dataflow: Dataflow,
    pub program: Arc<ExecProgram>,
    pub statics: Arc<StaticFindings>,
    pub constraints: ConstraintSet,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub result: SearchResult,
    /// Static candidates upgraded by the search's witness traces.
    pub findings: Vec<Finding>,
}

impl ContractAnalysis {
    pub fn new(ir: ContractIr) -> ContractAnalysis {
        let dataflow = Dataflow::build(&ir);
        let program = Arc::new(ExecProgram::new(&ir, &dataflow.inputs));
        let statics = Arc::new(StaticFindings::analyze(&ir, &dataflow));
        let constraints = ConstraintSet::derive(&ir, &dataflow.inputs);
        ContractAnalysis {
            ir,
            dataflow,
            program,
            statics,
            constraints,
        }
    }

    pub fn name(&self) -> &str {
        self.ir.name()
    }

    /// Findings without any execution.
    pub fn static_findings(&self) -> Vec<Finding> {
        self.statics.findings(std::iter::empty())
    }

    pub fn evaluator(
        &self,
        labels: &[VulnLabel],
        policy: MatchPolicy,
        limits: &Limits,
    ) -> Evaluator {
        Evaluator {
            program: self.program.clone(),
            statics: self.statics.clone(),
            labels: labels.to_vec(),
            policy,
            limits: limits.clone(),
        }
    }

    pub fn search(
        &self,
        labels: &[VulnLabel],
        policy: MatchPolicy,
        cfg: &SearchConfig,
        limits: &Limits,
    ) -> Result<SearchOutcome, SearchError> {
        let ev = self.evaluator(labels, policy, limits);
        let result = search::run(&ev, &self.constraints, &self.dataflow.specials, cfg)?;
        let findings = self.statics.findings(result.witness_traces.iter());
        Ok(SearchOutcome { result, findings })
    }

    /// Gene vector with every gene at zero, or the nearest bound.
    pub fn baseline_genes(&self) -> Vec<BigInt> {
        self.constraints
            .bounds
            .iter()
            .map(|b| truncate(BigInt::from(0), b))
            .collect()
    }

    /// One execution of the baseline genes.
    pub fn baseline(&self, limits: &Limits) -> Execution {
        self.program.execute(&self.baseline_genes(), limits)
    }
}

/// Every leaf contract of `source`.
pub fn analyze_source(source: &str, path: &str) -> Result<Vec<ContractAnalysis>, AnalysisError> {
    Ok(analyze_unit(&parse(source, path)?)?
        .into_iter()
        .map(ContractAnalysis::new)
        .collect())
}

/// Every leaf contract of the file at `path`.
pub fn analyze_path(path: &Path) -> Result<Vec<ContractAnalysis>, AnalysisError> {
    Ok(analyze_unit(&parse_file(path)?)?
        .into_iter()
        .map(ContractAnalysis::new)
        .collect())
}
