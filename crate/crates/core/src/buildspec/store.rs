//! Append-only JSON-lines store of analyses and rebuild outcomes, one file
//! per package.

use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::BuildSpec;
use crate::discovery::RepositoryResolution;
use crate::tags::TagMatch;
use crate::workflow::BuildCommandCandidate;

pub const SCHEMA_VERSION: u32 = 1;

const FILE_SAFE: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_');

/// `purl` percent-encoded into a single path component.
pub fn file_stem(purl: &str) -> String {
    utf8_percent_encode(purl, FILE_SAFE).to_string()
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no stored analysis for {0}")]
    NotFound(String),
    #[error("record for {purl} has schema version {found}, expected {expected}")]
    SchemaMismatch {
        purl: String,
        found: u32,
        expected: u32,
    },
    #[error("corrupt store entry in {path}: {message}")]
    Corrupt { path: String, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub schema_version: u32,
    pub purl: String,
    pub resolution: RepositoryResolution,
    pub tag_match: Option<TagMatch>,
    pub candidates: Vec<BuildCommandCandidate>,
    pub chosen: BuildSpec,
    pub created_at: DateTime<Utc>,
}

impl AnalysisRecord {
    pub fn new(
        resolution: RepositoryResolution,
        tag_match: Option<TagMatch>,
        candidates: Vec<BuildCommandCandidate>,
        chosen: BuildSpec,
    ) -> Self {
        AnalysisRecord {
            schema_version: SCHEMA_VERSION,
            purl: resolution.coordinate.render(),
            resolution,
            tag_match,
            candidates,
            chosen,
            created_at: Utc::now(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "entry", rename_all = "lowercase")]
enum Entry {
    Analysis(Value),
    Outcome(OutcomeEntry),
}

/// A stored rebuild result. `data` is whatever the rebuild step reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeEntry {
    pub schema_version: u32,
    pub purl: String,
    pub recorded_at: DateTime<Utc>,
    pub data: Value,
}

#[derive(Debug, Clone)]
pub struct AnalysisStore {
    root: PathBuf,
}

impl AnalysisStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        AnalysisStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, purl: &str) -> PathBuf {
        self.root.join(format!("{}.jsonl", file_stem(purl)))
    }

    fn append(&self, purl: &str, entry: &Entry) -> Result<(), StoreError> {
        fs::create_dir_all(&self.root)?;
        let mut line = serde_json::to_string(entry).map_err(|e| StoreError::Corrupt {
            path: purl.to_owned(),
            message: e.to_string(),
        })?;
        line.push('\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.path_for(purl))?;
        file.write_all(line.as_bytes())?;
        Ok(())
    }

    pub fn store(&self, record: &AnalysisRecord) -> Result<(), StoreError> {
        let value = serde_json::to_value(record).map_err(|e| StoreError::Corrupt {
            path: record.purl.clone(),
            message: e.to_string(),
        })?;
        self.append(&record.purl, &Entry::Analysis(value))
    }

    pub fn store_outcome(&self, purl: &str, data: Value) -> Result<(), StoreError> {
        self.append(
            purl,
            &Entry::Outcome(OutcomeEntry {
                schema_version: SCHEMA_VERSION,
                purl: purl.to_owned(),
                recorded_at: Utc::now(),
                data,
            }),
        )
    }

    fn entries(&self, purl: &str) -> Result<Vec<Entry>, StoreError> {
        let path = self.path_for(purl);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(purl.to_owned()))
            }
            Err(e) => return Err(e.into()),
        };
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                serde_json::from_str(l).map_err(|e| StoreError::Corrupt {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })
            })
            .collect()
    }

    /// The most recent analysis stored for `purl`.
    pub fn load(&self, purl: &str) -> Result<AnalysisRecord, StoreError> {
        let latest = self
            .entries(purl)?
            .into_iter()
            .rev()
            .find_map(|e| match e {
                Entry::Analysis(v) => Some(v),
                Entry::Outcome(_) => None,
            })
            .ok_or_else(|| StoreError::NotFound(purl.to_owned()))?;
        let found = latest
            .get("schema_version")
            .and_then(Value::as_u64)
            .map_or(0, |v| u32::try_from(v).unwrap_or(u32::MAX));
        if found != SCHEMA_VERSION {
            return Err(StoreError::SchemaMismatch {
                purl: purl.to_owned(),
                found,
                expected: SCHEMA_VERSION,
            });
        }
        serde_json::from_value(latest).map_err(|e| StoreError::Corrupt {
            path: self.path_for(purl).display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn outcomes(&self, purl: &str) -> Result<Vec<OutcomeEntry>, StoreError> {
        Ok(self
            .entries(purl)?
            .into_iter()
            .filter_map(|e| match e {
                Entry::Outcome(o) => Some(o),
                Entry::Analysis(_) => None,
            })
            .collect())
    }
}
