//! Run a buildspec, check what it produced, and retry with a corrected spec
//! when the log points at something the spec controls.

pub mod classfile;
pub mod classify;
pub mod executor;
pub mod transparency;

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::buildspec::BuildSpec;
use crate::command::Tool;
use crate::coordinates::PackageCoordinate;

pub use classify::{
    apply_fix, classify_log, fix_for, suggest_fix, FailureCategory, FailureReport, SpecFix,
};
pub use executor::{
    BuildOutcome, Container, DryRun, ExecutionRequest, Executor, ExecutorError, ExecutorKind,
    LocalShell, Script, ScriptedFixture, DEFAULT_BUDGET,
};
pub use transparency::{
    audit_transparency, deciding_rule, MalformedMetadata, TransparencyCategory,
    TransparencyFinding, TransparencyRecord, RULES,
};

/// At most this many corrected specs are tried after the first build.
pub const MAX_FIXES: usize = 2;

pub fn execute(
    spec: &BuildSpec,
    executor: &dyn Executor,
    workdir: &Path,
    budget: Duration,
) -> Result<BuildOutcome, ExecutorError> {
    executor.execute(&ExecutionRequest {
        workdir,
        command: &spec.command,
        jdk: &spec.jdk,
        budget,
    })
}

/// File name the build must produce: `<artifact>-<version>.jar`, or `.pom`
/// for `pom` packaging.
pub fn expected_artifact(coordinate: &PackageCoordinate, packaging: Option<&str>) -> String {
    let ext = match packaging.or(coordinate.packaging_qualifier()) {
        Some(p) if p.eq_ignore_ascii_case("pom") => "pom",
        _ => "jar",
    };
    format!("{}-{}.{ext}", coordinate.artifact, coordinate.version)
}

fn in_output_dir(path: &str, tool: Tool) -> bool {
    let parts: Vec<&str> = path.split(['/', '\\']).collect();
    let dirs = &parts[..parts.len().saturating_sub(1)];
    match tool {
        Tool::Maven => dirs.last() == Some(&"target"),
        Tool::Gradle => dirs.ends_with(&["build", "libs"]),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validation {
    pub passed: bool,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact: Option<String>,
}

/// Pass iff the build exited 0 and left the expected artifact in the tool's
/// output directory (`target/` for Maven, `build/libs/` for Gradle, in any
/// module).
pub fn validate_outputs(
    outcome: &BuildOutcome,
    coordinate: &PackageCoordinate,
    tool: Tool,
    packaging: Option<&str>,
) -> Validation {
    let expected = expected_artifact(coordinate, packaging);
    if outcome.exit_code != 0 {
        return Validation {
            passed: false,
            reason: format!("build exited with {}", outcome.exit_code),
            artifact: None,
        };
    }
    let found = outcome
        .produced_files
        .iter()
        .filter(|p| in_output_dir(p, tool))
        .find(|p| p.rsplit(['/', '\\']).next() == Some(expected.as_str()));
    match found {
        Some(p) => Validation {
            passed: true,
            reason: format!("found {p}"),
            artifact: Some(p.clone()),
        },
        None => Validation {
            passed: false,
            reason: format!("{expected} not produced"),
            artifact: None,
        },
    }
}

/// Category of one build: timeout first, then the artifact check, then the log.
pub fn assess(
    outcome: &BuildOutcome,
    spec: &BuildSpec,
    packaging: Option<&str>,
) -> (FailureReport, Option<Validation>) {
    if outcome.timed_out {
        let evidence = outcome.log.lines().last().unwrap_or("");
        return (FailureReport::new(FailureCategory::Timeout, evidence), None);
    }
    if outcome.executor == ExecutorKind::DryRun {
        // nothing ran, so there is nothing to validate
        return (FailureReport::new(FailureCategory::Success, ""), None);
    }
    let validation = validate_outputs(outcome, &spec.coordinate, spec.tool, packaging);
    let mut report = if validation.passed {
        FailureReport::new(FailureCategory::Success, "")
    } else if outcome.exit_code == 0 {
        FailureReport::new(FailureCategory::MissingArtifact, "")
    } else {
        classify_log(&outcome.log)
    };
    report.suggested_fix = fix_for(&report, spec);
    (report, Some(validation))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub spec: BuildSpec,
    pub outcome: BuildOutcome,
    pub report: FailureReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<Validation>,
    /// Fix applied before the next attempt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fix: Option<SpecFix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RebuildTrace {
    pub attempts: Vec<Attempt>,
}

impl RebuildTrace {
    pub fn last(&self) -> &Attempt {
        self.attempts
            .last()
            .expect("a trace holds at least one attempt")
    }

    pub fn final_category(&self) -> FailureCategory {
        self.last().report.category
    }

    pub fn final_spec(&self) -> &BuildSpec {
        &self.last().spec
    }

    pub fn succeeded(&self) -> bool {
        self.final_category() == FailureCategory::Success
    }
}

#[derive(Debug, Clone)]
pub struct RebuildConfig {
    pub budget: Duration,
    pub auto_fix: bool,
    pub max_fixes: usize,
    pub packaging: Option<String>,
}

impl Default for RebuildConfig {
    fn default() -> Self {
        RebuildConfig {
            budget: DEFAULT_BUDGET,
            auto_fix: false,
            max_fixes: MAX_FIXES,
            packaging: None,
        }
    }
}

/// Build `spec`; with `auto_fix`, keep applying suggested fixes until the
/// build succeeds, no fix applies, or `max_fixes` fixes have been tried.
/// A spec already tried is never run twice.
pub fn rebuild(
    spec: &BuildSpec,
    executor: &dyn Executor,
    workdir: &Path,
    config: &RebuildConfig,
) -> Result<RebuildTrace, ExecutorError> {
    let mut attempts: Vec<Attempt> = Vec::new();
    let mut current = spec.clone();
    if current.parsed_command().is_err() {
        return Ok(RebuildTrace {
            attempts: vec![Attempt {
                outcome: BuildOutcome {
                    exit_code: -1,
                    duration: 0.0,
                    log: String::new(),
                    produced_files: Vec::new(),
                    executor: executor.kind(),
                    timed_out: false,
                },
                report: FailureReport::new(FailureCategory::UnsupportedTool, ""),
                validation: None,
                fix: None,
                spec: current,
            }],
        });
    }
    loop {
        let outcome = execute(&current, executor, workdir, config.budget)?;
        let (report, validation) = assess(&outcome, &current, config.packaging.as_deref());
        let fixes_used = attempts.len();
        let next = report
            .suggested_fix
            .clone()
            .filter(|_| config.auto_fix && fixes_used < config.max_fixes)
            .map(|f| (apply_fix(&current, &f), f))
            .filter(|(s, _)| *s != current && !attempts.iter().any(|a| a.spec == *s));
        attempts.push(Attempt {
            spec: current.clone(),
            outcome,
            report,
            validation,
            fix: next.as_ref().map(|(_, f)| f.clone()),
        });
        match next {
            Some((s, _)) => current = s,
            None => return Ok(RebuildTrace { attempts }),
        }
    }
}
