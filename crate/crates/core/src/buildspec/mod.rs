//! Rebuild recipes in the Reproducible Central buildspec format.

pub mod manifest;
pub mod store;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::command::{self, default_maven_command, patch_for_rebuild, render, ParsedCommand, Tool};
use crate::coordinates::PackageCoordinate;
use crate::tags::TagMatch;
use crate::workflow::{BuildCommandCandidate, Confidence, JdkFacts};

pub use manifest::{parse_manifest, read_jar_manifest, Manifest};
pub use store::{AnalysisRecord, AnalysisStore, StoreError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildSpecError {
    #[error("unsupported package: {0}")]
    UnsupportedPackage(String),
    #[error("could not determine the JDK version")]
    JdkUnknown,
    #[error("no tag or commit to build from")]
    MissingRevision,
    #[error("malformed buildspec: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Newline {
    #[default]
    Lf,
    Crlf,
}

impl fmt::Display for Newline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Newline::Lf => "lf",
            Newline::Crlf => "crlf",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SpecSource {
    Detected {
        confidence: Confidence,
    },
    Default,
    /// Read back from buildspec text, where the origin is not recorded.
    Imported,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildSpec {
    pub coordinate: PackageCoordinate,
    pub git_repo: String,
    pub git_tag: String,
    pub tool: Tool,
    /// The same command through the plain tool, when the command uses a wrapper.
    pub tool_fallback: Option<String>,
    pub jdk: String,
    pub newline: Newline,
    pub command: String,
    pub buildinfo_path: String,
    pub source: SpecSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_version: Option<String>,
}

impl BuildSpec {
    pub fn parsed_command(&self) -> Result<ParsedCommand, command::CommandError> {
        command::parse_command_line(&self.command)
    }

    pub fn uses_wrapper(&self) -> bool {
        self.parsed_command().is_ok_and(|c| c.wrapper)
    }

    /// The spec with the command run through the plain tool instead of the wrapper.
    pub fn with_fallback_tool(&self) -> Option<BuildSpec> {
        let fallback = self.tool_fallback.clone()?;
        Some(BuildSpec {
            command: fallback,
            tool_fallback: None,
            tool_version: None,
            ..self.clone()
        })
    }

    pub fn file_name(&self) -> String {
        format!(
            "{}-{}.buildspec",
            self.coordinate.artifact, self.coordinate.version
        )
    }
}

pub fn buildinfo_path(tool: Tool, coordinate: &PackageCoordinate) -> String {
    let dir = match tool {
        Tool::Maven => "target",
        Tool::Gradle => "build",
    };
    format!(
        "{dir}/{}-{}.buildinfo",
        coordinate.artifact, coordinate.version
    )
}

fn fallback_for(cmd: &ParsedCommand) -> Option<String> {
    cmd.wrapper.then(|| render(&cmd.without_wrapper()))
}

/// Highest-confidence Maven or Gradle candidate that parses, else the default
/// Maven command.
pub fn select_command(
    candidates: &[BuildCommandCandidate],
) -> (ParsedCommand, SpecSource, Option<&BuildCommandCandidate>) {
    let best = candidates
        .iter()
        .filter(|c| c.tool.is_recognized())
        .filter_map(|c| command::parse_words(&c.tokens).ok().map(|p| (c, p)))
        .min_by(|(a, _), (b, _)| {
            b.confidence
                .cmp(&a.confidence)
                .then_with(|| a.location.cmp(&b.location))
                .then_with(|| a.tokens.cmp(&b.tokens))
        });
    match best {
        Some((c, parsed)) => (
            parsed,
            SpecSource::Detected {
                confidence: c.confidence,
            },
            Some(c),
        ),
        None => (default_maven_command(), SpecSource::Default, None),
    }
}

/// Major Java version in a version or vendor string.
///
/// `1.8.0_292` is 8, `17.0.2+8` is 17, `temurin-21` is 21. Strings naming
/// Maven, Gradle, Ant or a plugin are not JDK versions.
pub fn normalize_jdk(text: &str) -> Option<u32> {
    let lower = text.to_lowercase();
    if ["maven", "gradle", "plugin", "apache ant", "bnd"]
        .iter()
        .any(|w| lower.contains(w))
    {
        return None;
    }
    let start = lower.find(|c: char| c.is_ascii_digit())?;
    let mut numbers = lower[start..]
        .split(|c: char| !c.is_ascii_digit())
        .take_while(|s| !s.is_empty());
    let first: u32 = numbers.next()?.parse().ok()?;
    let major = if first == 1 {
        let after_one = &lower[start + 1..];
        if !after_one.starts_with('.') {
            return None;
        }
        numbers.next()?.parse().ok()?
    } else {
        first
    };
    (6..=99).contains(&major).then_some(major)
}

/// Manifest attributes consulted for the JDK, in order.
pub const MANIFEST_JDK_KEYS: &[&str] = &["Build-Jdk-Spec", "Build-Jdk", "Created-By"];

/// JDK major from workflow facts (smallest of a set), else from the manifest.
pub fn resolve_jdk(
    facts: Option<&JdkFacts>,
    manifest: Option<&Manifest>,
) -> Result<String, BuildSpecError> {
    let from_facts = facts
        .and_then(|f| f.version.concrete())
        .and_then(|values| values.iter().filter_map(|v| normalize_jdk(v)).min());
    if let Some(major) = from_facts {
        return Ok(major.to_string());
    }
    manifest
        .and_then(|m| {
            MANIFEST_JDK_KEYS
                .iter()
                .find_map(|k| m.get(k).and_then(normalize_jdk))
        })
        .map(|m| m.to_string())
        .ok_or(BuildSpecError::JdkUnknown)
}

/// Version pinned by the wrapper properties file for `tool`, if any.
pub fn wrapper_tool_version(repo_root: &Path, tool: Tool) -> Option<String> {
    let (file, stem) = match tool {
        Tool::Maven => (".mvn/wrapper/maven-wrapper.properties", "apache-maven-"),
        Tool::Gradle => ("gradle/wrapper/gradle-wrapper.properties", "gradle-"),
    };
    let text = std::fs::read_to_string(repo_root.join(file)).ok()?;
    let url = text
        .lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "distributionUrl")
        .map(|(_, v)| v.trim().replace("\\:", ":"))?;
    let name = url.rsplit('/').next()?;
    let rest = name.strip_prefix(stem)?;
    let version = rest
        .split("-bin")
        .next()?
        .split("-all")
        .next()?
        .trim_end_matches(".zip");
    (!version.is_empty()).then(|| version.to_owned())
}

/// Remove words still holding unresolved `${{ }}` or `$VAR` references.
fn drop_unresolved(cmd: &mut ParsedCommand) -> Vec<String> {
    let unresolved = |s: &str| s.contains('$');
    let mut dropped = Vec::new();
    cmd.goals_or_tasks.retain(|g| {
        !unresolved(g) || {
            dropped.push(g.clone());
            false
        }
    });
    cmd.properties.retain(|p| {
        !(unresolved(&p.key) || unresolved(&p.value)) || {
            dropped.push(format!("{}={}", p.key, p.value));
            false
        }
    });
    cmd.flags.retain(|f| {
        !(unresolved(&f.name) || f.value.as_deref().is_some_and(unresolved)) || {
            dropped.push(f.name.clone());
            false
        }
    });
    cmd.profiles.retain(|p| {
        !unresolved(p) || {
            dropped.push(p.clone());
            false
        }
    });
    cmd.excluded_tasks.retain(|t| {
        !unresolved(t) || {
            dropped.push(t.clone());
            false
        }
    });
    dropped
}

/// Everything `generate_buildspec` needs to know about one package.
#[derive(Debug, Clone, Default)]
pub struct GenerationInput<'a> {
    pub git_repo: &'a str,
    pub tag_match: Option<&'a TagMatch>,
    /// Tag or commit to build when no tag matched (a provenance commit or a
    /// user-supplied tag).
    pub revision: Option<&'a str>,
    pub candidates: &'a [BuildCommandCandidate],
    pub manifest: Option<&'a Manifest>,
    /// `<packaging>` from the POM.
    pub packaging: Option<&'a str>,
    pub jdk_override: Option<&'a str>,
    /// Checked-out working tree, consulted for wrapper properties.
    pub repo_root: Option<&'a Path>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub spec: BuildSpec,
    /// Words removed because they could not be resolved statically.
    pub dropped: Vec<String>,
}

/// Webjars repackage web assets and contain no Java code to rebuild.
pub fn is_webjar(coordinate: &PackageCoordinate, packaging: Option<&str>) -> bool {
    coordinate.group == "org.webjars"
        || coordinate.group.starts_with("org.webjars.")
        || packaging.is_some_and(|p| p.eq_ignore_ascii_case("webjar"))
        || coordinate
            .packaging_qualifier()
            .is_some_and(|p| p.eq_ignore_ascii_case("webjar"))
}

pub fn generate_buildspec(
    coordinate: &PackageCoordinate,
    input: &GenerationInput<'_>,
) -> Result<Generated, BuildSpecError> {
    if is_webjar(coordinate, input.packaging) {
        return Err(BuildSpecError::UnsupportedPackage(format!(
            "{} is a webjar",
            coordinate.gav()
        )));
    }
    let git_tag = match (input.tag_match, input.revision) {
        (Some(m), _) => m.tag().to_owned(),
        (None, Some(commit)) => commit.to_owned(),
        (None, None) => return Err(BuildSpecError::MissingRevision),
    };
    let (selected, source, chosen) = select_command(input.candidates);
    let jdk = match input.jdk_override {
        Some(j) => normalize_jdk(j)
            .map(|m| m.to_string())
            .ok_or(BuildSpecError::JdkUnknown)?,
        None => match resolve_jdk(chosen.and_then(|c| c.jdk_facts.as_ref()), input.manifest) {
            Ok(j) => j,
            Err(_) if chosen.is_none() => {
                return Err(BuildSpecError::UnsupportedPackage(format!(
                    "{}: no Java build signal (no Maven/Gradle command, no JDK in workflows or manifest)",
                    coordinate.gav()
                )))
            }
            Err(e) => return Err(e),
        },
    };
    let (cmd, dropped) = match source {
        // The default command is emitted exactly as configured.
        SpecSource::Default | SpecSource::Imported => (selected, Vec::new()),
        SpecSource::Detected { .. } => {
            let mut resolved = selected;
            let dropped = drop_unresolved(&mut resolved);
            (patch_for_rebuild(&resolved), dropped)
        }
    };
    let tool_version = input
        .repo_root
        .filter(|_| cmd.wrapper)
        .and_then(|root| wrapper_tool_version(root, cmd.tool));
    Ok(Generated {
        spec: BuildSpec {
            coordinate: coordinate.clone(),
            git_repo: input.git_repo.to_owned(),
            git_tag,
            tool: cmd.tool,
            tool_fallback: fallback_for(&cmd),
            jdk,
            newline: Newline::Lf,
            command: render(&cmd),
            buildinfo_path: buildinfo_path(cmd.tool, coordinate),
            source,
            tool_version,
        },
        dropped,
    })
}

fn escape_command(command: &str) -> String {
    let mut out = String::with_capacity(command.len());
    for c in command.chars() {
        if matches!(c, '"' | '\\' | '$' | '`') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

fn unescape_command(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            if let Some(next) = chars.next() {
                out.push(next);
                continue;
            }
        }
        out.push(c);
    }
    out
}

/// Render a spec as buildspec text: one `key=value` per line, LF endings.
pub fn emit(spec: &BuildSpec) -> String {
    let c = &spec.coordinate;
    let mut lines = vec![
        format!("groupId={}", c.group),
        format!("artifactId={}", c.artifact),
        format!("version={}", c.version),
        format!("gitRepo={}", spec.git_repo),
        format!("gitTag={}", spec.git_tag),
        format!("tool={}", spec.tool),
    ];
    if let Some(v) = &spec.tool_version {
        lines.push(format!("toolVersion={v}"));
    }
    lines.extend([
        format!("jdk={}", spec.jdk),
        format!("newline={}", spec.newline),
        format!("command=\"{}\"", escape_command(&spec.command)),
        format!("buildinfo={}", spec.buildinfo_path),
    ]);
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

/// Read buildspec text back into a spec.
pub fn parse_buildspec(text: &str) -> Result<BuildSpec, BuildSpecError> {
    let mut fields = indexmap::IndexMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| BuildSpecError::Malformed(format!("line without `=`: {line}")))?;
        fields.insert(k.trim().to_owned(), v.to_owned());
    }
    let get = |k: &str| {
        fields
            .get(k)
            .cloned()
            .ok_or_else(|| BuildSpecError::Malformed(format!("missing `{k}`")))
    };
    let coordinate =
        PackageCoordinate::new(&get("groupId")?, &get("artifactId")?, &get("version")?)
            .map_err(|e| BuildSpecError::Malformed(e.to_string()))?;
    let raw_command = get("command")?;
    let command = match raw_command
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
    {
        Some(inner) => unescape_command(inner),
        None => raw_command,
    };
    let parsed = command::parse_command_line(&command)
        .map_err(|e| BuildSpecError::Malformed(e.to_string()))?;
    let tool = match get("tool")?.as_str() {
        "mvn" | "maven" => Tool::Maven,
        "gradle" => Tool::Gradle,
        other => return Err(BuildSpecError::Malformed(format!("unknown tool `{other}`"))),
    };
    if tool != parsed.tool {
        return Err(BuildSpecError::Malformed(format!(
            "tool={tool} but command runs {}",
            parsed.tool
        )));
    }
    let jdk = get("jdk")?;
    if normalize_jdk(&jdk).map(|m| m.to_string()).as_deref() != Some(jdk.as_str()) {
        return Err(BuildSpecError::Malformed(format!(
            "jdk `{jdk}` is not a major version"
        )));
    }
    let newline = match fields.get("newline").map(String::as_str) {
        None | Some("lf") => Newline::Lf,
        Some("crlf") => Newline::Crlf,
        Some(other) => {
            return Err(BuildSpecError::Malformed(format!(
                "unknown newline `{other}`"
            )))
        }
    };
    Ok(BuildSpec {
        buildinfo_path: fields
            .get("buildinfo")
            .cloned()
            .unwrap_or_else(|| buildinfo_path(tool, &coordinate)),
        coordinate,
        git_repo: get("gitRepo")?,
        git_tag: get("gitTag")?,
        tool,
        tool_fallback: fallback_for(&parsed),
        jdk,
        newline,
        command,
        source: SpecSource::Imported,
        tool_version: fields.get("toolVersion").cloned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::command::DEFAULT_MAVEN_COMMAND;
    use crate::workflow::ResolvedValue;

    fn coord() -> PackageCoordinate {
        PackageCoordinate::new("com.example", "foo", "1.0").unwrap()
    }

    fn spec(command: &str) -> BuildSpec {
        BuildSpec {
            coordinate: coord(),
            git_repo: "https://github.com/o/foo".into(),
            git_tag: "v1.0".into(),
            tool: Tool::Maven,
            tool_fallback: None,
            jdk: "11".into(),
            newline: Newline::Lf,
            command: command.into(),
            buildinfo_path: "target/foo-1.0.buildinfo".into(),
            source: SpecSource::Default,
            tool_version: None,
        }
    }

    #[test]
    fn jdk_normalization() {
        assert_eq!(normalize_jdk("1.8.0_292"), Some(8));
        assert_eq!(normalize_jdk("17"), Some(17));
        assert_eq!(normalize_jdk("17.0.2+8-LTS"), Some(17));
        assert_eq!(normalize_jdk("11.0.12 (Eclipse Adoptium)"), Some(11));
        assert_eq!(normalize_jdk("temurin-21"), Some(21));
        assert_eq!(normalize_jdk("1.6"), Some(6));
        assert_eq!(normalize_jdk("Apache Maven 3.8.1"), None);
        assert_eq!(normalize_jdk("Maven JAR Plugin 3.2.0"), None);
        assert_eq!(normalize_jdk("1.5"), None);
        assert_eq!(normalize_jdk("latest"), None);
        assert_eq!(normalize_jdk("1"), None);
    }

    #[test]
    fn jdk_precedence() {
        let facts = JdkFacts {
            version: ResolvedValue::Set(vec!["21".into(), "17".into()]),
            distribution: Some("graalvm".into()),
        };
        let manifest = parse_manifest("Build-Jdk: 1.8.0_292\nCreated-By: 11\n");
        assert_eq!(resolve_jdk(Some(&facts), Some(&manifest)).unwrap(), "17");
        assert_eq!(resolve_jdk(None, Some(&manifest)).unwrap(), "8");
        let symbolic = JdkFacts {
            version: ResolvedValue::SymbolicContext("inputs.java".into()),
            distribution: None,
        };
        assert_eq!(resolve_jdk(Some(&symbolic), Some(&manifest)).unwrap(), "8");
        assert_eq!(resolve_jdk(None, None), Err(BuildSpecError::JdkUnknown));
        let spec_first = parse_manifest("Created-By: 17\nBuild-Jdk-Spec: 11\n");
        assert_eq!(resolve_jdk(None, Some(&spec_first)).unwrap(), "11");
    }

    #[test]
    fn emit_template() {
        let text = emit(&spec(DEFAULT_MAVEN_COMMAND));
        let expected = format!(
            "groupId=com.example\nartifactId=foo\nversion=1.0\ngitRepo=https://github.com/o/foo\ngitTag=v1.0\ntool=mvn\njdk=11\nnewline=lf\ncommand=\"{DEFAULT_MAVEN_COMMAND}\"\nbuildinfo=target/foo-1.0.buildinfo\n"
        );
        assert_eq!(text, expected);
        assert_eq!(text.lines().count(), 10);
        assert!(!text.ends_with("\n\n"));
    }

    #[test]
    fn emit_escapes_and_parses_back() {
        let s = spec(r#"mvn package -DargLine="-Xmx1g -Dx=1""#);
        let text = emit(&s);
        assert!(text.contains(r#"command="mvn package -DargLine=\"-Xmx1g -Dx=1\"""#));
        let back = parse_buildspec(&text).unwrap();
        assert_eq!(back.command, s.command);
        assert_eq!(emit(&back), text);
        assert!(emit(&spec("mvn a")) != emit(&spec("mvn b")));
    }

    #[test]
    fn parse_rejects_inconsistent_specs() {
        let good = emit(&spec("mvn package"));
        assert!(parse_buildspec(&good.replace("tool=mvn", "tool=gradle")).is_err());
        assert!(parse_buildspec(&good.replace("jdk=11", "jdk=1.8")).is_err());
        assert!(parse_buildspec(
            &good.replace("command=\"mvn package\"", "command=\"sbt compile\"")
        )
        .is_err());
    }

    #[test]
    fn wrapper_versions() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join(".mvn/wrapper")).unwrap();
        std::fs::write(
            dir.path().join(".mvn/wrapper/maven-wrapper.properties"),
            "distributionUrl=https\\://repo.maven.apache.org/maven2/org/apache/maven/apache-maven/3.5.2/apache-maven-3.5.2-bin.zip\n",
        )
        .unwrap();
        assert_eq!(
            wrapper_tool_version(dir.path(), Tool::Maven).as_deref(),
            Some("3.5.2")
        );
        assert_eq!(wrapper_tool_version(dir.path(), Tool::Gradle), None);
    }

    #[test]
    fn default_and_unsupported() {
        let manifest = parse_manifest("Build-Jdk-Spec: 1.8\n");
        let input = GenerationInput {
            git_repo: "https://github.com/o/foo",
            revision: Some("abc"),
            manifest: Some(&manifest),
            ..Default::default()
        };
        let g = generate_buildspec(&coord(), &input).unwrap();
        assert_eq!(g.spec.command, DEFAULT_MAVEN_COMMAND);
        assert_eq!(g.spec.source, SpecSource::Default);
        assert_eq!(g.spec.jdk, "8");
        assert_eq!(g.spec.git_tag, "abc");

        let bare = GenerationInput {
            manifest: None,
            ..input.clone()
        };
        assert!(matches!(
            generate_buildspec(&coord(), &bare),
            Err(BuildSpecError::UnsupportedPackage(_))
        ));
        let webjar = PackageCoordinate::new("org.webjars", "jquery", "3.0").unwrap();
        assert!(matches!(
            generate_buildspec(&webjar, &input),
            Err(BuildSpecError::UnsupportedPackage(_))
        ));
    }
}
