//! Contract corpora on disk, their label files and the bundled mini-corpus.

mod labels;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;
use walkdir::WalkDir;

pub use labels::{load_labels, LabelEntry, LabelFile, VulnLabel, LABEL_SCHEMA};

use crate::detectors::{UnknownVulnType, VulnType};
use crate::frontend::{classify_size, parse, SizeClass};

pub const EXTENSIONS: [&str; 2] = ["minisol", "sol"];
pub const BUNDLED_LABELS: &str = "labels.json";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}:{line}:{column}: invalid label file: {message}")]
    LabelParse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: unsupported label schema {found}")]
    Schema { path: String, found: u32 },
    #[error(transparent)]
    UnknownVulnType(#[from] UnknownVulnType),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexedContract {
    /// Relative to the corpus root, `/`-separated.
    pub path: String,
    pub size: Option<SizeClass>,
    pub lines: usize,
    pub labels: BTreeMap<VulnType, usize>,
    /// Parse error, if the file could not be read as MiniSol.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CorpusIndex {
    pub root: PathBuf,
    pub contracts: Vec<IndexedContract>,
    /// Label paths with no matching contract file.
    pub dangling: Vec<String>,
}

impl CorpusIndex {
    pub fn len(&self) -> usize {
        self.contracts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contracts.is_empty()
    }

    pub fn absolute(&self, c: &IndexedContract) -> PathBuf {
        self.root.join(&c.path)
    }

    /// Contracts per size class.
    pub fn size_tally(&self) -> BTreeMap<SizeClass, usize> {
        let mut t = BTreeMap::new();
        for c in &self.contracts {
            if let Some(s) = c.size {
                *t.entry(s).or_insert(0) += 1;
            }
        }
        t
    }

    /// `(vulnerable, safe)` contract counts for `vuln`.
    pub fn class_balance(&self, vuln: VulnType) -> (usize, usize) {
        let vulnerable = self
            .contracts
            .iter()
            .filter(|c| c.labels.contains_key(&vuln))
            .count();
        (vulnerable, self.contracts.len() - vulnerable)
    }
}

fn relative(root: &Path, p: &Path) -> String {
    let rel = p.strip_prefix(root).unwrap_or(p);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Every contract file under `dir`, sorted by relative path. Unreadable
/// directories yield an empty index.
pub fn index_corpus(dir: &Path, labels: &LabelFile) -> CorpusIndex {
    let by_path = labels.by_path();
    let mut contracts = Vec::new();
    for entry in WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
    {
        let p = entry.path();
        let is_contract = entry.file_type().is_file()
            && p.extension()
                .is_some_and(|e| EXTENSIONS.iter().any(|x| e == *x));
        if !is_contract {
            continue;
        }
        let path = relative(dir, p);
        let mut c = IndexedContract {
            path: path.clone(),
            size: None,
            lines: 0,
            labels: BTreeMap::new(),
            error: None,
        };
        match std::fs::read_to_string(p) {
            Ok(text) => match parse(&text, &path) {
                Ok(unit) => {
                    c.size = Some(classify_size(&unit));
                    c.lines = unit.line_count;
                }
                Err(e) => c.error = Some(e.to_string()),
            },
            Err(e) => c.error = Some(e.to_string()),
        }
        for l in by_path.get(&path).into_iter().flatten() {
            *c.labels.entry(l.vuln).or_insert(0) += 1;
        }
        contracts.push(c);
    }
    contracts.sort_by(|a, b| a.path.cmp(&b.path));
    let dangling = by_path
        .keys()
        .filter(|k| {
            contracts
                .binary_search_by(|c| c.path.as_str().cmp(k))
                .is_err()
        })
        .cloned()
        .collect();
    CorpusIndex {
        root: dir.to_path_buf(),
        contracts,
        dangling,
    }
}

/// Directory of the mini-corpus shipped with this crate.
pub fn bundled_corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

/// The bundled corpus index and its labels.
pub fn bundled_corpus() -> Result<(CorpusIndex, LabelFile), CorpusError> {
    let dir = bundled_corpus_dir();
    let (labels, _) = load_labels(&dir.join(BUNDLED_LABELS))?;
    Ok((index_corpus(&dir, &labels), labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_label_file() {
        let (l, w) = LabelFile::parse(r#"{"schema": 1, "entries": []}"#, "l.json").unwrap();
        assert_eq!(l.label_count(), 0);
        assert!(w.is_empty());
    }

    #[test]
    fn label_types_parse() {
        let (l, _) = LabelFile::parse(
            r#"{"schema": 1, "entries": [{"path": "a.minisol", "vulnerabilities": [{"type": "reentrancy", "function": "withdraw"}]}]}"#,
            "l.json",
        )
        .unwrap();
        assert_eq!(l.entries[0].vulnerabilities[0].vuln, VulnType::Reentrancy);
    }

    #[test]
    fn unknown_type_is_rejected() {
        let e = LabelFile::parse(
            r#"{"schema": 1, "entries": [{"path": "a.minisol", "vulnerabilities": [{"type": "gas_grief"}]}]}"#,
            "l.json",
        )
        .unwrap_err();
        assert!(
            matches!(e, CorpusError::UnknownVulnType(UnknownVulnType(ref t)) if t == "gas_grief")
        );
    }

    #[test]
    fn malformed_json_reports_location() {
        let e = LabelFile::parse("{\n  \"schema\": 1,\n  \"entries\": [ }", "l.json").unwrap_err();
        assert!(matches!(e, CorpusError::LabelParse { line: 3, .. }), "{e}");
        let e = LabelFile::parse(r#"{"schema": 2, "entries": []}"#, "l.json").unwrap_err();
        assert!(matches!(e, CorpusError::Schema { found: 2, .. }));
    }

    #[test]
    fn duplicates_collapse_with_warning() {
        let (l, w) = LabelFile::parse(
            r#"{"schema": 1, "entries": [
                {"path": "a.minisol", "vulnerabilities": [{"type": "reentrancy"}, {"type": "reentrancy"}]},
                {"path": "a.minisol", "vulnerabilities": [{"type": "reentrancy", "function": "f"}]}]}"#,
            "l.json",
        )
        .unwrap();
        assert_eq!(l.entries.len(), 1);
        assert_eq!(l.label_count(), 2);
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn empty_dir_gives_empty_index() {
        let dir = tempfile::tempdir().unwrap();
        assert!(index_corpus(dir.path(), &LabelFile::empty()).is_empty());
    }

    #[test]
    fn same_name_in_subdirs_and_dangling_labels() {
        let dir = tempfile::tempdir().unwrap();
        for sub in ["a", "b"] {
            std::fs::create_dir(dir.path().join(sub)).unwrap();
            std::fs::write(
                dir.path().join(sub).join("x.minisol"),
                "contract C { function f() public {} }",
            )
            .unwrap();
        }
        std::fs::write(dir.path().join("bad.minisol"), "contract {").unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let (labels, _) = LabelFile::parse(
            r#"{"schema": 1, "entries": [{"path": "b/x.minisol", "vulnerabilities": [{"type": "reentrancy"}]},
                {"path": "gone.minisol", "vulnerabilities": []}]}"#,
            "l.json",
        )
        .unwrap();
        let idx = index_corpus(dir.path(), &labels);
        let paths: Vec<&str> = idx.contracts.iter().map(|c| c.path.as_str()).collect();
        assert_eq!(paths, ["a/x.minisol", "b/x.minisol", "bad.minisol"]);
        assert_eq!(idx.contracts[1].labels[&VulnType::Reentrancy], 1);
        assert!(idx.contracts[2].error.is_some());
        assert_eq!(idx.dangling, ["gone.minisol"]);
        assert_eq!(idx.size_tally()[&SizeClass::Simple], 2);
    }
}
