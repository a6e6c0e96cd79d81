//! Events that start a workflow.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_yaml::Value;

use super::document::Workflow;
use super::WorkflowError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Trigger {
    Release { types: Vec<String> },
    TagPush { patterns: Vec<String> },
    BranchPush,
    PullRequest,
    Dispatch,
    Schedule,
    Other { name: String },
}

impl Trigger {
    /// Events that usually accompany publishing an artifact.
    pub fn is_release_like(&self) -> bool {
        matches!(self, Trigger::Release { .. } | Trigger::TagPush { .. })
    }
}

fn strings(value: Option<&Value>) -> Vec<String> {
    match value {
        Some(Value::Sequence(items)) => items
            .iter()
            .filter_map(|v| match v {
                Value::String(s) => Some(s.clone()),
                Value::Number(n) => Some(n.to_string()),
                _ => None,
            })
            .collect(),
        Some(Value::String(s)) => vec![s.clone()],
        _ => Vec::new(),
    }
}

fn field<'a>(config: Option<&'a Value>, key: &str) -> Option<&'a Value> {
    config?.as_mapping()?.get(Value::String(key.to_owned()))
}

fn event(name: &str, config: Option<&Value>, out: &mut BTreeSet<Trigger>) {
    match name {
        "release" => {
            out.insert(Trigger::Release {
                types: strings(field(config, "types")),
            });
        }
        "push" => {
            let tags = field(config, "tags");
            if tags.is_some() {
                out.insert(Trigger::TagPush {
                    patterns: strings(tags),
                });
            }
            let branch_keys = ["branches", "branches-ignore"];
            if tags.is_none() || branch_keys.iter().any(|k| field(config, k).is_some()) {
                out.insert(Trigger::BranchPush);
            }
        }
        "pull_request" | "pull_request_target" => {
            out.insert(Trigger::PullRequest);
        }
        "workflow_dispatch" | "repository_dispatch" => {
            out.insert(Trigger::Dispatch);
        }
        "schedule" => {
            out.insert(Trigger::Schedule);
        }
        other => {
            out.insert(Trigger::Other {
                name: other.to_owned(),
            });
        }
    }
}

/// Read the `on` key in any of its scalar, list or mapping forms.
pub fn detect_triggers(workflow: &Workflow) -> Result<BTreeSet<Trigger>, WorkflowError> {
    let mut out = BTreeSet::new();
    match &workflow.on {
        None | Some(Value::Null) => {
            return Err(WorkflowError::MissingTrigger(workflow.path.clone()))
        }
        Some(Value::String(name)) => event(name, None, &mut out),
        Some(Value::Sequence(items)) => {
            for item in items {
                if let Value::String(name) = item {
                    event(name, None, &mut out);
                }
            }
        }
        Some(Value::Mapping(map)) => {
            for (k, v) in map {
                if let Value::String(name) = k {
                    event(name, Some(v), &mut out);
                }
            }
        }
        Some(_) => {}
    }
    if out.is_empty() {
        return Err(WorkflowError::MissingTrigger(workflow.path.clone()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workflow::document::parse_workflow;

    fn triggers(on: &str) -> Result<BTreeSet<Trigger>, WorkflowError> {
        detect_triggers(&parse_workflow("w.yml", &format!("{on}\njobs: {{}}\n")).unwrap())
    }

    #[test]
    fn forms() {
        assert_eq!(
            triggers("on:\n  release:\n    types: [published]").unwrap(),
            BTreeSet::from([Trigger::Release {
                types: vec!["published".into()]
            }])
        );
        assert_eq!(
            triggers("on:\n  push:\n    tags: ['v*']").unwrap(),
            BTreeSet::from([Trigger::TagPush {
                patterns: vec!["v*".into()]
            }])
        );
        assert_eq!(
            triggers("on: [push, pull_request]").unwrap(),
            BTreeSet::from([Trigger::BranchPush, Trigger::PullRequest])
        );
        assert_eq!(
            triggers("on: workflow_dispatch").unwrap(),
            BTreeSet::from([Trigger::Dispatch])
        );
        assert_eq!(
            triggers("on:\n  push:\n    branches: [main]\n    tags: ['*']\n  schedule:\n    - cron: '0 0 * * *'\n  workflow_call:").unwrap(),
            BTreeSet::from([
                Trigger::TagPush {
                    patterns: vec!["*".into()]
                },
                Trigger::BranchPush,
                Trigger::Schedule,
                Trigger::Other {
                    name: "workflow_call".into()
                }
            ])
        );
    }

    #[test]
    fn missing() {
        assert!(matches!(
            triggers("name: x"),
            Err(WorkflowError::MissingTrigger(_))
        ));
    }
}
