//! Failure categories read off build logs.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::classfile::{jdk_for_class_version, MIN_BUILDSPEC_JDK};
use crate::buildspec::BuildSpec;
use crate::command::Tool;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "category", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FailureCategory {
    Success,
    MissingArtifact,
    JdkMismatch { suggested_major: u32 },
    MissingDependency,
    PluginIncompatibility,
    ToolExecution { tool: Tool },
    JvmCritical,
    Timeout,
    UnsupportedTool,
    Unknown,
}

impl FailureCategory {
    pub fn name(&self) -> &'static str {
        match self {
            FailureCategory::Success => "SUCCESS",
            FailureCategory::MissingArtifact => "MISSING_ARTIFACT",
            FailureCategory::JdkMismatch { .. } => "JDK_MISMATCH",
            FailureCategory::MissingDependency => "MISSING_DEPENDENCY",
            FailureCategory::PluginIncompatibility => "PLUGIN_INCOMPATIBILITY",
            FailureCategory::ToolExecution { .. } => "TOOL_EXECUTION",
            FailureCategory::JvmCritical => "JVM_CRITICAL",
            FailureCategory::Timeout => "TIMEOUT",
            FailureCategory::UnsupportedTool => "UNSUPPORTED_TOOL",
            FailureCategory::Unknown => "UNKNOWN",
        }
    }
}

impl std::fmt::Display for FailureCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FailureCategory::JdkMismatch { suggested_major } => {
                write!(f, "JDK_MISMATCH({suggested_major})")
            }
            FailureCategory::ToolExecution { tool } => {
                write!(f, "TOOL_EXECUTION({})", tool.plain_executable())
            }
            other => f.write_str(other.name()),
        }
    }
}

/// What to change in a spec before trying again.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "fix", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SpecFix {
    Jdk { from: String, to: String },
    FallbackTool { from: String, to: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureReport {
    #[serde(flatten)]
    pub category: FailureCategory,
    /// Verbatim excerpt of the log that triggered the category.
    pub evidence: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggested_fix: Option<SpecFix>,
}

impl FailureReport {
    pub fn new(category: FailureCategory, evidence: impl Into<String>) -> Self {
        FailureReport {
            category,
            evidence: evidence.into(),
            suggested_fix: None,
        }
    }
}

struct Rules {
    jdk_class_file: Regex,
    jdk_target: Regex,
    jdk_release: Regex,
    missing_dependency: Regex,
    class_version: Regex,
    plugin_context: Regex,
    plugin_maven_version: Regex,
    jvm_critical: Regex,
    gradle: Regex,
    maven: Regex,
}

fn rules() -> &'static Rules {
    static RULES: OnceLock<Rules> = OnceLock::new();
    RULES.get_or_init(|| {
        let re = |p: &str| Regex::new(p).expect("static pattern");
        Rules {
            jdk_class_file: re(r"class file has wrong version (\d+)"),
            jdk_target: re(r"invalid target release:?\s*(\d+(?:\.\d+)?)"),
            jdk_release: re(r"release version (\d+) not supported"),
            missing_dependency: re(r"Could not resolve dependencies|Could not find artifact|Could not resolve all files"),
            class_version: re(r"Unsupported major\.minor|UnsupportedClassVersionError"),
            plugin_context: re(r"(?i)plugin|mojo"),
            plugin_maven_version: re(r"(?i)plugin\b.*requires Maven version"),
            jvm_critical: re(r"OutOfMemoryError|StackOverflowError|fatal error"),
            gradle: re(r"(?i)Gradle build daemon disappeared|Gradle daemon (?:has )?(?:crashed|stopped|disappeared)|Could not create service"),
            maven: re(r"Unknown lifecycle phase|MojoExecutionException"),
        }
    })
}

/// The whole line around byte offset `at`, without its line break.
fn line_at(log: &str, at: usize) -> &str {
    let start = log[..at].rfind('\n').map_or(0, |i| i + 1);
    let end = log[at..].find('\n').map_or(log.len(), |i| at + i);
    log[start..end]
        .strip_suffix('\r')
        .unwrap_or(&log[start..end])
}

/// The line at `at` plus up to `before` preceding lines.
fn window_at(log: &str, at: usize, before: usize) -> &str {
    let mut start = log[..at].rfind('\n').map_or(0, |i| i + 1);
    for _ in 0..before {
        if start == 0 {
            break;
        }
        start = log[..start - 1].rfind('\n').map_or(0, |i| i + 1);
    }
    let end = log[at..].find('\n').map_or(log.len(), |i| at + i);
    &log[start..end]
}

fn jdk_mismatch(log: &str) -> Option<(u32, usize)> {
    let r = rules();
    let from_class = r.jdk_class_file.captures(log).and_then(|c| {
        let class: u32 = c[1].parse().ok()?;
        Some((jdk_for_class_version(class), c.get(0)?.start()))
    });
    // `1.5` and `5` both name release 5; anything older than the oldest
    // buildable JDK is built with that one.
    let from_release = |re: &Regex| {
        re.captures(log).and_then(|c| {
            let text = &c[1];
            let major: u32 = text
                .strip_prefix("1.")
                .unwrap_or(text)
                .split('.')
                .next()?
                .parse()
                .ok()?;
            Some((major.max(MIN_BUILDSPEC_JDK), c.get(0)?.start()))
        })
    };
    // Earliest message wins when a log carries more than one.
    [
        from_class,
        from_release(&r.jdk_target),
        from_release(&r.jdk_release),
    ]
    .into_iter()
    .flatten()
    .min_by_key(|(_, at)| *at)
}

fn plugin_incompatibility(log: &str) -> Option<usize> {
    let r = rules();
    let class_version = r
        .class_version
        .find_iter(log)
        .map(|m| m.start())
        .find(|&at| r.plugin_context.is_match(window_at(log, at, 3)));
    let maven_version = r.plugin_maven_version.find(log).map(|m| m.start());
    class_version.into_iter().chain(maven_version).min()
}

/// Categorize a failed build from its log. The first rule that matches wins.
pub fn classify_log(log: &str) -> FailureReport {
    let r = rules();
    if let Some((major, at)) = jdk_mismatch(log) {
        return FailureReport::new(
            FailureCategory::JdkMismatch {
                suggested_major: major,
            },
            line_at(log, at),
        );
    }
    if let Some(m) = r.missing_dependency.find(log) {
        return FailureReport::new(FailureCategory::MissingDependency, line_at(log, m.start()));
    }
    if let Some(at) = plugin_incompatibility(log) {
        return FailureReport::new(FailureCategory::PluginIncompatibility, line_at(log, at));
    }
    if let Some(m) = r.jvm_critical.find(log) {
        return FailureReport::new(FailureCategory::JvmCritical, line_at(log, m.start()));
    }
    if let Some(m) = r.gradle.find(log) {
        return FailureReport::new(
            FailureCategory::ToolExecution { tool: Tool::Gradle },
            line_at(log, m.start()),
        );
    }
    if let Some(m) = r.maven.find(log) {
        return FailureReport::new(
            FailureCategory::ToolExecution { tool: Tool::Maven },
            line_at(log, m.start()),
        );
    }
    let last = log
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .rfind(|l| !l.trim().is_empty())
        .unwrap_or("");
    FailureReport::new(FailureCategory::Unknown, last)
}

/// The change `report` calls for, if the tool can make one.
pub fn fix_for(report: &FailureReport, spec: &BuildSpec) -> Option<SpecFix> {
    match report.category {
        FailureCategory::JdkMismatch { suggested_major } => {
            let to = suggested_major.to_string();
            (to != spec.jdk).then(|| SpecFix::Jdk {
                from: spec.jdk.clone(),
                to,
            })
        }
        FailureCategory::PluginIncompatibility if spec.uses_wrapper() => {
            spec.tool_fallback.as_ref().map(|to| SpecFix::FallbackTool {
                from: spec.command.clone(),
                to: to.clone(),
            })
        }
        _ => None,
    }
}

pub fn apply_fix(spec: &BuildSpec, fix: &SpecFix) -> BuildSpec {
    match fix {
        SpecFix::Jdk { to, .. } => BuildSpec {
            jdk: to.clone(),
            ..spec.clone()
        },
        SpecFix::FallbackTool { .. } => spec.with_fallback_tool().unwrap_or_else(|| spec.clone()),
    }
}

/// `spec` adjusted for the failure in `report`; `None` when nothing in the
/// spec can address it.
pub fn suggest_fix(report: &FailureReport, spec: &BuildSpec) -> Option<BuildSpec> {
    fix_for(report, spec).map(|f| apply_fix(spec, &f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn jdk_mismatch_from_class_file() {
        let log = "[INFO] Compiling\n[ERROR] bad class file: /x/Foo.class\n    class file has wrong version 61.0, should be 55.0\n";
        let r = classify_log(log);
        assert_eq!(
            r.category,
            FailureCategory::JdkMismatch {
                suggested_major: 17
            }
        );
        assert_eq!(
            r.evidence,
            "    class file has wrong version 61.0, should be 55.0"
        );
        assert_eq!(
            classify_log("error: invalid target release: 1.8").category,
            FailureCategory::JdkMismatch { suggested_major: 8 }
        );
        assert_eq!(
            classify_log("error: invalid target release: 1.5").category,
            FailureCategory::JdkMismatch { suggested_major: 6 }
        );
        assert_eq!(
            classify_log("Fatal error compiling: error: release version 21 not supported").category,
            FailureCategory::JdkMismatch {
                suggested_major: 21
            }
        );
    }

    #[test]
    fn rule_order() {
        let dep = "[ERROR] Failed to execute goal on project x: Could not resolve dependencies for project g:x:jar:1.0";
        assert_eq!(
            classify_log(dep).category,
            FailureCategory::MissingDependency
        );
        // a dependency failure mentioning OOM is still a dependency failure
        assert_eq!(
            classify_log(&format!("java.lang.OutOfMemoryError\n{dep}")).category,
            FailureCategory::MissingDependency
        );
        let plugin = "[ERROR] Failed to execute goal org.apache.maven.plugins:maven-shade-plugin:3.5.0:shade\njava.lang.UnsupportedClassVersionError: Foo has been compiled by a more recent version";
        assert_eq!(
            classify_log(plugin).category,
            FailureCategory::PluginIncompatibility
        );
        assert_eq!(
            classify_log("The plugin org.x:y-maven-plugin:2.0 requires Maven version 3.6.3")
                .category,
            FailureCategory::PluginIncompatibility
        );
        assert_eq!(
            classify_log("Exception in thread main java.lang.UnsupportedClassVersionError")
                .category,
            FailureCategory::Unknown
        );
        assert_eq!(
            classify_log("java.lang.OutOfMemoryError: Java heap space").category,
            FailureCategory::JvmCritical
        );
        assert_eq!(
            classify_log("Could not create service of type ScriptPluginFactory").category,
            FailureCategory::ToolExecution { tool: Tool::Gradle }
        );
        assert_eq!(
            classify_log("[ERROR] Unknown lifecycle phase \"x\"").category,
            FailureCategory::ToolExecution { tool: Tool::Maven }
        );
        let unknown = classify_log("line one\nsomething odd\n\n");
        assert_eq!(unknown.category, FailureCategory::Unknown);
        assert_eq!(unknown.evidence, "something odd");
        assert_eq!(classify_log("").evidence, "");
    }

    #[test]
    fn fixes() {
        use crate::buildspec::parse_buildspec;
        let spec = parse_buildspec(
            "groupId=g\nartifactId=a\nversion=1\ngitRepo=https://github.com/o/a\ngitTag=v1\ntool=mvn\njdk=11\ncommand=\"./mvnw -B package\"\n",
        )
        .unwrap();
        let jdk = classify_log("class file has wrong version 61.0, should be 55.0");
        let fixed = suggest_fix(&jdk, &spec).unwrap();
        assert_eq!(fixed.jdk, "17");
        assert_eq!(fixed.command, spec.command);

        let plugin = FailureReport::new(FailureCategory::PluginIncompatibility, "");
        let fallback = suggest_fix(&plugin, &spec).unwrap();
        assert_eq!(fallback.command, "mvn -B package");
        assert_eq!(suggest_fix(&plugin, &fallback), None);

        let dep = FailureReport::new(FailureCategory::MissingDependency, "");
        assert_eq!(suggest_fix(&dep, &spec), None);
        let same = FailureReport::new(
            FailureCategory::JdkMismatch {
                suggested_major: 11,
            },
            "",
        );
        assert_eq!(suggest_fix(&same, &spec), None);
    }

    #[test]
    fn report_json() {
        let r = classify_log("class file has wrong version 61.0, should be 55.0");
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["category"], "JDK_MISMATCH");
        assert_eq!(v["suggested_major"], 17);
        let back: FailureReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }

    fn log_line() -> impl Strategy<Value = String> {
        prop_oneof![
            Just("class file has wrong version 61.0, should be 55.0".to_owned()),
            Just("invalid target release: 17".to_owned()),
            Just("Could not find artifact g:a:jar:1".to_owned()),
            Just("[ERROR] maven-plugin failed\r".to_owned()),
            Just("java.lang.UnsupportedClassVersionError".to_owned()),
            Just("fatal error".to_owned()),
            Just("Could not create service".to_owned()),
            Just("MojoExecutionException".to_owned()),
            "[ -~\\t\\r]{0,40}",
            "\\PC{0,20}",
        ]
    }

    proptest! {
        #[test]
        fn total_deterministic_and_verbatim(lines in proptest::collection::vec(log_line(), 0..8)) {
            let log = lines.join("\n");
            let a = classify_log(&log);
            prop_assert_eq!(&a, &classify_log(&log));
            prop_assert!(log.contains(&a.evidence));
            if let FailureCategory::JdkMismatch { suggested_major } = a.category {
                prop_assert!(suggested_major >= 6);
            }
        }
    }
}
