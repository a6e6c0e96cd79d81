//! Static analysis of GitHub Actions workflows: which commands build the
//! artifact, under which JDK, and how likely each one is the release build.

pub mod actions;
pub mod document;
pub mod expr;
pub mod graph;
pub mod scoring;
pub mod signals;
pub mod triggers;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use actions::{
    apply_action_models, ActionFacts, ActionModel, ActionRegistry, ActionSemantics, JdkFacts,
};
pub use document::{parse_workflow, parse_workflows, Job, Matrix, Step, Workflow};
pub use expr::{interpolate_literals, resolve_expression, ExprContext, ResolvedValue};
pub use graph::{build_call_graph, find_build_commands, CallGraph, Node, NodeId, NodeKind};
pub use scoring::{score_candidates, Confidence, ScoreWeights};
pub use signals::{detect_publishing_signals, Signal};
pub use triggers::{detect_triggers, Trigger};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagnosticKind {
    MalformedYaml,
    MissingTrigger,
    UnresolvedScript,
    RecursiveScript,
    MatrixLimit,
}

/// A non-fatal problem found while analysing a repository.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub file: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, file: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            kind,
            file: file.to_owned(),
            message: message.into(),
        }
    }

    pub fn malformed_yaml(file: &str, message: String) -> Self {
        Self::new(DiagnosticKind::MalformedYaml, file, message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} {}: {}", self.kind, self.file, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkflowError {
    #[error("workflow {0} has no `on` trigger")]
    MissingTrigger(String),
}

/// Build tool behind a candidate command.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ToolKind {
    Maven,
    MavenWrapper,
    Gradle,
    GradleWrapper,
    Other(String),
}

/// Executables that make a command a build candidate.
pub const BUILD_TOOL_LEXICON: &[&str] = &[
    "mvn",
    "mvnw",
    "./mvnw",
    "gradle",
    "gradlew",
    "./gradlew",
    "sbt",
    "ant",
    "npm",
    "yarn",
    "npx",
    "make",
];

impl ToolKind {
    pub fn classify(executable: &str) -> Option<ToolKind> {
        Some(match executable {
            "mvn" => ToolKind::Maven,
            "mvnw" | "./mvnw" => ToolKind::MavenWrapper,
            "gradle" => ToolKind::Gradle,
            "gradlew" | "./gradlew" => ToolKind::GradleWrapper,
            other if BUILD_TOOL_LEXICON.contains(&other) => ToolKind::Other(other.to_owned()),
            _ => return None,
        })
    }

    /// Maven or Gradle, with or without wrapper.
    pub fn is_recognized(&self) -> bool {
        !matches!(self, ToolKind::Other(_))
    }
}

impl fmt::Display for ToolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ToolKind::Maven => f.write_str("MAVEN"),
            ToolKind::MavenWrapper => f.write_str("MAVEN_WRAPPER"),
            ToolKind::Gradle => f.write_str("GRADLE"),
            ToolKind::GradleWrapper => f.write_str("GRADLE_WRAPPER"),
            ToolKind::Other(name) => write!(f, "OTHER({name})"),
        }
    }
}

impl FromStr for ToolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "MAVEN" => ToolKind::Maven,
            "MAVEN_WRAPPER" => ToolKind::MavenWrapper,
            "GRADLE" => ToolKind::Gradle,
            "GRADLE_WRAPPER" => ToolKind::GradleWrapper,
            _ => match s.strip_prefix("OTHER(").and_then(|r| r.strip_suffix(')')) {
                Some(name) => ToolKind::Other(name.to_owned()),
                None => return Err(format!("unknown tool kind `{s}`")),
            },
        })
    }
}

impl Serialize for ToolKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ToolKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Where a command sits: workflow file, job, step and position in the step.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Location {
    pub workflow: String,
    pub job: String,
    /// Declaration order of the job in its workflow.
    pub job_index: usize,
    pub step: usize,
    pub ordinal: usize,
}

impl Ord for Location {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (
            &self.workflow,
            self.job_index,
            self.step,
            self.ordinal,
            &self.job,
        )
            .cmp(&(
                &other.workflow,
                other.job_index,
                other.step,
                other.ordinal,
                &other.job,
            ))
    }
}

impl PartialOrd for Location {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}#{}/{}/{}",
            self.workflow, self.job, self.step, self.ordinal
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildCommandCandidate {
    pub tokens: Vec<String>,
    pub tool: ToolKind,
    pub location: Location,
    pub triggers: BTreeSet<Trigger>,
    pub jdk_facts: Option<JdkFacts>,
    pub publishing_signals: BTreeSet<Signal>,
    pub confidence: Confidence,
    /// `needs:` of the enclosing job; reported only.
    #[serde(default)]
    pub needs: Vec<String>,
    /// Graph node the command came from.
    pub node: NodeId,
}

impl BuildCommandCandidate {
    pub fn command_text(&self) -> String {
        self.tokens
            .iter()
            .map(|t| crate::shell::quote(t))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Everything `analyze_repository` found.
#[derive(Debug, Clone)]
pub struct WorkflowAnalysis {
    pub graph: CallGraph,
    pub candidates: Vec<BuildCommandCandidate>,
    pub diagnostics: Vec<Diagnostic>,
}

/// The serialisable part of an analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub workflows: Vec<String>,
    pub candidates: Vec<BuildCommandCandidate>,
    pub diagnostics: Vec<Diagnostic>,
}

impl WorkflowAnalysis {
    pub fn report(&self) -> CandidateReport {
        CandidateReport {
            workflows: self
                .graph
                .workflows
                .iter()
                .map(|w| w.path.clone())
                .collect(),
            candidates: self.candidates.clone(),
            diagnostics: self.diagnostics.clone(),
        }
    }

    pub fn has_workflows(&self) -> bool {
        !self.graph.workflows.is_empty()
    }
}

/// Attach triggers, JDK facts and publishing signals to raw candidates.
pub fn enrich_candidates(
    graph: &CallGraph,
    facts: &ActionFacts,
    candidates: &mut [BuildCommandCandidate],
    diagnostics: &mut Vec<Diagnostic>,
) {
    let mut triggers = Vec::with_capacity(graph.workflows.len());
    for wf in &graph.workflows {
        match detect_triggers(wf) {
            Ok(t) => triggers.push(t),
            Err(e) => {
                diagnostics.push(Diagnostic::new(
                    DiagnosticKind::MissingTrigger,
                    &wf.path,
                    e.to_string(),
                ));
                triggers.push(BTreeSet::new());
            }
        }
    }
    for candidate in candidates.iter_mut() {
        let node = graph.node(candidate.node);
        let (wi, ji, si) = (node.workflow, node.job.unwrap_or(0), node.step.unwrap_or(0));
        let job = &graph.workflows[wi].jobs[ji];
        candidate.triggers = triggers[wi].clone();
        candidate.jdk_facts = facts.jdk_for(wi, ji, si).cloned();
        candidate.publishing_signals =
            detect_publishing_signals(job, job.steps.get(si), Some(&candidate.tokens));
        candidate.needs = job.needs.clone();
    }
}

/// Run the whole analysis over a checked-out repository.
pub fn analyze_repository(
    repo_root: &Path,
    registry: &ActionRegistry,
    weights: &ScoreWeights,
) -> WorkflowAnalysis {
    let (workflows, mut diagnostics) = parse_workflows(repo_root);
    let mut graph = build_call_graph(workflows, repo_root);
    let facts = apply_action_models(&mut graph, registry);
    let mut candidates = find_build_commands(&graph);
    diagnostics.append(&mut graph.diagnostics.clone());
    enrich_candidates(&graph, &facts, &mut candidates, &mut diagnostics);
    let candidates = score_candidates(candidates, weights);
    diagnostics.sort();
    diagnostics.dedup();
    WorkflowAnalysis {
        graph,
        candidates,
        diagnostics,
    }
}
