use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::detectors::VulnType;

pub const LABEL_SCHEMA: u32 = 1;

/// One known vulnerability of a contract.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct VulnLabel {
    #[serde(rename = "type")]
    pub vuln: VulnType,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelEntry {
    /// Relative to the corpus root, `/`-separated.
    pub path: String,
    pub vulnerabilities: Vec<VulnLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelFile {
    pub schema: u32,
    pub entries: Vec<LabelEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLabel {
    #[serde(rename = "type")]
    ty: String,
    function: Option<String>,
    line: Option<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    path: String,
    #[serde(default)]
    vulnerabilities: Vec<RawLabel>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    schema: u32,
    entries: Vec<RawEntry>,
}

impl LabelFile {
    pub fn empty() -> LabelFile {
        LabelFile {
            schema: LABEL_SCHEMA,
            entries: Vec::new(),
        }
    }

    /// Parse label JSON; `origin` names the source in errors. Returns the
    /// file and one warning per collapsed duplicate.
    pub fn parse(text: &str, origin: &str) -> Result<(LabelFile, Vec<String>), CorpusError> {
        let raw: RawFile = serde_json::from_str(text).map_err(|e| CorpusError::LabelParse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if raw.schema != LABEL_SCHEMA {
            return Err(CorpusError::Schema {
                path: origin.to_string(),
                found: raw.schema,
            });
        }
        let mut warnings = Vec::new();
        let mut merged: BTreeMap<String, Vec<VulnLabel>> = BTreeMap::new();
        let mut seen: BTreeSet<(String, VulnType, Option<String>)> = BTreeSet::new();
        for e in raw.entries {
            let labels = merged.entry(e.path.clone()).or_default();
            for l in e.vulnerabilities {
                let vuln: VulnType = l.ty.parse()?;
                if !seen.insert((e.path.clone(), vuln, l.function.clone())) {
                    let f = l.function.as_deref().unwrap_or("*");
                    warnings.push(format!(
                        "{origin}: duplicate label {} {vuln} {f} collapsed",
                        e.path
                    ));
                    continue;
                }
                labels.push(VulnLabel {
                    vuln,
                    function: l.function,
                    line: l.line,
                });
            }
        }
        let entries = merged
            .into_iter()
            .map(|(path, vulnerabilities)| LabelEntry {
                path,
                vulnerabilities,
            })
            .collect();
        Ok((
            LabelFile {
                schema: LABEL_SCHEMA,
                entries,
            },
            warnings,
        ))
    }

    /// Labels keyed by contract path.
    pub fn by_path(&self) -> BTreeMap<String, Vec<VulnLabel>> {
        self.entries
            .iter()
            .map(|e| (e.path.clone(), e.vulnerabilities.clone()))
            .collect()
    }

    pub fn label_count(&self) -> usize {
        self.entries.iter().map(|e| e.vulnerabilities.len()).sum()
    }
}

pub fn load_labels(path: &Path) -> Result<(LabelFile, Vec<String>), CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    LabelFile::parse(&text, &path.display().to_string())
}
