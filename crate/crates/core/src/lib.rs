pub mod analysis;
pub mod corpus;
pub mod dataflow;
pub mod detectors;
pub mod executor;
pub mod frontend;
pub mod ir;
pub mod metrics;
pub mod pipeline;
pub mod program_model;
pub mod search;
mod serde_big;

pub use analysis::{analyze_unit, AnalysisError, ContractIr};
pub use corpus::{index_corpus, load_labels, CorpusError, CorpusIndex, LabelFile, VulnLabel};
pub use detectors::{Finding, VulnType};
pub use executor::Limits;
pub use metrics::{ConfusionMatrix, MatchPolicy, MetricsReport, TypeMetrics};
pub use pipeline::{analyze_path, analyze_source, ContractAnalysis, SearchOutcome};
pub use search::{SearchConfig, SearchError, SearchResult};
