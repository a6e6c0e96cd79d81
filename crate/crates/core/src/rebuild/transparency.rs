//! How openly a release was built, judged from supplied metadata.

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TransparencyCategory {
    ProvenancePresent,
    SourceNotFound,
    CodeCommittedAfterRelease,
    TransparentReleasePipeline,
    CiRunsRemoved,
    Opaque,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed metadata: {0}")]
pub struct MalformedMetadata(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransparencyRecord {
    pub publish_ts: DateTime<Utc>,
    pub commit_ts: Option<DateTime<Utc>>,
    pub ci_runs_available: Option<bool>,
    pub provenance_present: bool,
    pub pipeline_found: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransparencyFinding {
    pub category: TransparencyCategory,
    #[serde(flatten)]
    pub inputs: TransparencyRecord,
}

/// ISO-8601 instant, or a bare date taken as midnight UTC.
fn parse_timestamp(field: &str, text: &str) -> Result<DateTime<Utc>, MalformedMetadata> {
    if let Ok(t) = DateTime::parse_from_rfc3339(text) {
        return Ok(t.with_timezone(&Utc));
    }
    if let Ok(d) = NaiveDate::parse_from_str(text, "%Y-%m-%d") {
        if let Some(t) = d.and_hms_opt(0, 0, 0) {
            return Ok(t.and_utc());
        }
    }
    Err(MalformedMetadata(format!(
        "`{field}` is not an ISO-8601 timestamp: {text}"
    )))
}

impl TransparencyRecord {
    /// Read a record from JSON. `commit_ts` and `ci_runs_available` may be
    /// null or absent; the other three fields are required.
    pub fn from_json(value: &Value) -> Result<Self, MalformedMetadata> {
        let obj = value
            .as_object()
            .ok_or_else(|| MalformedMetadata("expected a JSON object".into()))?;
        let required = |k: &str| {
            obj.get(k)
                .ok_or_else(|| MalformedMetadata(format!("missing `{k}`")))
        };
        let boolean = |k: &str, v: &Value| {
            v.as_bool()
                .ok_or_else(|| MalformedMetadata(format!("`{k}` must be a boolean")))
        };
        let timestamp = |k: &str, v: &Value| match v.as_str() {
            Some(s) => parse_timestamp(k, s),
            None => Err(MalformedMetadata(format!("`{k}` must be a string"))),
        };
        let optional = |k: &str| obj.get(k).filter(|v| !v.is_null());
        Ok(TransparencyRecord {
            publish_ts: timestamp("publish_ts", required("publish_ts")?)?,
            commit_ts: optional("commit_ts")
                .map(|v| timestamp("commit_ts", v))
                .transpose()?,
            ci_runs_available: optional("ci_runs_available")
                .map(|v| boolean("ci_runs_available", v))
                .transpose()?,
            provenance_present: boolean("provenance_present", required("provenance_present")?)?,
            pipeline_found: boolean("pipeline_found", required("pipeline_found")?)?,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, MalformedMetadata> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| MalformedMetadata(e.to_string()))?;
        Self::from_json(&value)
    }
}

type Rule = (TransparencyCategory, fn(&TransparencyRecord) -> bool);

/// Checked in order; the first rule that holds decides. `OPAQUE` is the
/// fall-through.
pub const RULES: &[Rule] = &[
    (TransparencyCategory::ProvenancePresent, |r| {
        r.provenance_present
    }),
    (TransparencyCategory::SourceNotFound, |r| {
        r.commit_ts.is_none()
    }),
    (TransparencyCategory::CodeCommittedAfterRelease, |r| {
        r.commit_ts.is_some_and(|c| r.publish_ts < c)
    }),
    (TransparencyCategory::TransparentReleasePipeline, |r| {
        r.pipeline_found
    }),
    (TransparencyCategory::CiRunsRemoved, |r| {
        r.ci_runs_available == Some(false)
    }),
];

/// Index into [`RULES`] of the deciding rule, or `RULES.len()` for the fall-through.
pub fn deciding_rule(record: &TransparencyRecord) -> usize {
    RULES
        .iter()
        .position(|(_, holds)| holds(record))
        .unwrap_or(RULES.len())
}

pub fn audit_transparency(record: &TransparencyRecord) -> TransparencyFinding {
    let category = RULES
        .get(deciding_rule(record))
        .map_or(TransparencyCategory::Opaque, |(c, _)| *c);
    TransparencyFinding {
        category,
        inputs: *record,
    }
}
