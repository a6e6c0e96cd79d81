//! Maven and Gradle command lines: parsing, rebuild patching, rendering.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::shell;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommandError {
    #[error("`{0}` is not a Maven or Gradle executable")]
    UnsupportedTool(String),
    #[error("command has no goals, tasks or options")]
    EmptyCommand,
    #[error("option `{0}` expects a value")]
    MissingOptionValue(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tool {
    Maven,
    Gradle,
}

impl Tool {
    /// Executable name used when no wrapper is involved.
    pub fn plain_executable(self) -> &'static str {
        match self {
            Tool::Maven => "mvn",
            Tool::Gradle => "gradle",
        }
    }
}

impl fmt::Display for Tool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.plain_executable())
    }
}

/// Recognise a build-tool executable and whether it is a repo-local wrapper.
pub fn classify_executable(word: &str) -> Option<(Tool, bool)> {
    match word {
        "mvn" => Some((Tool::Maven, false)),
        "mvnw" | "./mvnw" => Some((Tool::Maven, true)),
        "gradle" => Some((Tool::Gradle, false)),
        "gradlew" | "./gradlew" => Some((Tool::Gradle, true)),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyKind {
    /// `-Dkey=value`
    System,
    /// Gradle `-Pkey=value`
    Project,
}

impl PropertyKind {
    fn switch(self) -> &'static str {
        match self {
            PropertyKind::System => "-D",
            PropertyKind::Project => "-P",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Property {
    pub kind: PropertyKind,
    pub key: String,
    pub value: String,
}

/// An option that is neither a property, profile nor task exclusion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliOption {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl CliOption {
    pub fn flag(name: &str) -> Self {
        CliOption {
            name: name.to_owned(),
            value: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedCommand {
    pub tool: Tool,
    pub executable: String,
    pub wrapper: bool,
    pub goals_or_tasks: Vec<String>,
    pub properties: Vec<Property>,
    pub excluded_tasks: Vec<String>,
    pub flags: Vec<CliOption>,
    pub profiles: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Arity {
    Required,
    /// Takes the next word unless it starts with `-`.
    Optional,
}

const MAVEN_VALUED: &[&str] = &[
    "-f",
    "--file",
    "-s",
    "--settings",
    "-gs",
    "--global-settings",
    "-t",
    "--toolchains",
    "-T",
    "--threads",
    "-pl",
    "--projects",
    "-rf",
    "--resume-from",
    "-l",
    "--log-file",
    "-b",
    "--builder",
];

const GRADLE_VALUED: &[&str] = &[
    "-b",
    "--build-file",
    "-c",
    "--settings-file",
    "-g",
    "--gradle-user-home",
    "-p",
    "--project-dir",
    "-I",
    "--init-script",
    "--max-workers",
    "--console",
    "--warning-mode",
    "--include-build",
    "--project-cache-dir",
    "--priority",
];

const THREADS_OPTION: &str = "-threads";

fn arity(tool: Tool, name: &str) -> Option<Arity> {
    if name == THREADS_OPTION {
        return Some(Arity::Optional);
    }
    let table = match tool {
        Tool::Maven => MAVEN_VALUED,
        Tool::Gradle => GRADLE_VALUED,
    };
    table.contains(&name).then_some(Arity::Required)
}

impl ParsedCommand {
    fn empty(tool: Tool, executable: &str, wrapper: bool) -> Self {
        ParsedCommand {
            tool,
            executable: executable.to_owned(),
            wrapper,
            goals_or_tasks: Vec::new(),
            properties: Vec::new(),
            excluded_tasks: Vec::new(),
            flags: Vec::new(),
            profiles: Vec::new(),
        }
    }

    pub fn has_flag(&self, name: &str) -> bool {
        self.flags.iter().any(|f| f.name == name)
    }

    pub fn property(&self, kind: PropertyKind, key: &str) -> Option<&str> {
        self.properties
            .iter()
            .find(|p| p.kind == kind && p.key == key)
            .map(|p| p.value.as_str())
    }

    /// Insert or overwrite a property, keeping the position of an existing key.
    pub fn set_property(&mut self, kind: PropertyKind, key: &str, value: &str) {
        match self
            .properties
            .iter_mut()
            .find(|p| p.kind == kind && p.key == key)
        {
            Some(p) => p.value = value.to_owned(),
            None => self.properties.push(Property {
                kind,
                key: key.to_owned(),
                value: value.to_owned(),
            }),
        }
    }

    /// Warnings that do not prevent the command from being used.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.goals_or_tasks.is_empty() {
            out.push(match self.tool {
                Tool::Maven => "no goals given".to_owned(),
                Tool::Gradle => "no tasks given".to_owned(),
            });
        }
        out
    }

    /// The same command run through the non-wrapper executable.
    pub fn without_wrapper(&self) -> ParsedCommand {
        ParsedCommand {
            executable: self.tool.plain_executable().to_owned(),
            wrapper: false,
            ..self.clone()
        }
    }

    fn is_empty(&self) -> bool {
        self.goals_or_tasks.is_empty()
            && self.flags.is_empty()
            && self.properties.is_empty()
            && self.profiles.is_empty()
            && self.excluded_tasks.is_empty()
    }
}

fn take_value<'a>(
    name: &str,
    words: &mut std::iter::Peekable<std::slice::Iter<'a, String>>,
    arity: Arity,
) -> Result<Option<String>, CommandError> {
    match arity {
        Arity::Required => words
            .next()
            .cloned()
            .map(Some)
            .ok_or_else(|| CommandError::MissingOptionValue(name.to_owned())),
        Arity::Optional => Ok(words.next_if(|w| !w.starts_with('-')).cloned()),
    }
}

fn split_property(body: &str, bare_value: &str) -> (String, String) {
    match body.split_once('=') {
        Some((k, v)) => (k.to_owned(), v.to_owned()),
        None => (body.to_owned(), bare_value.to_owned()),
    }
}

fn header(words: &[String], expected: Tool) -> Result<(Tool, bool), CommandError> {
    let first = words.first().ok_or(CommandError::EmptyCommand)?;
    match classify_executable(first) {
        Some((tool, wrapper)) if tool == expected => Ok((tool, wrapper)),
        _ => Err(CommandError::UnsupportedTool(first.clone())),
    }
}

/// Parse a Maven invocation. `-D` without a value means `true`.
pub fn parse_maven(words: &[String]) -> Result<ParsedCommand, CommandError> {
    let (tool, wrapper) = header(words, Tool::Maven)?;
    let mut cmd = ParsedCommand::empty(tool, &words[0], wrapper);
    let mut it = words[1..].iter().peekable();
    while let Some(word) = it.next() {
        if let Some(body) = word.strip_prefix("-D").filter(|b| !b.is_empty()) {
            let (k, v) = split_property(body, "true");
            cmd.set_property(PropertyKind::System, &k, &v);
        } else if word == "-D" || word == "--define" {
            let body = take_value(word, &mut it, Arity::Required)?.unwrap_or_default();
            let (k, v) = split_property(&body, "true");
            cmd.set_property(PropertyKind::System, &k, &v);
        } else if let Some(list) = word.strip_prefix("-P").filter(|l| !l.is_empty()) {
            cmd.profiles
                .extend(list.split(',').filter(|p| !p.is_empty()).map(str::to_owned));
        } else if word == "-P" || word == "--activate-profiles" {
            let list = take_value(word, &mut it, Arity::Required)?.unwrap_or_default();
            cmd.profiles
                .extend(list.split(',').filter(|p| !p.is_empty()).map(str::to_owned));
        } else if word.len() > 2
            && word.starts_with("-T")
            && word[2..]
                .chars()
                .all(|c| c.is_ascii_digit() || c == '.' || c == 'C')
        {
            cmd.flags.push(CliOption {
                name: "-T".to_owned(),
                value: Some(word[2..].to_owned()),
            });
        } else if word.starts_with('-') {
            let value = match arity(tool, word) {
                Some(a) => take_value(word, &mut it, a)?,
                None => None,
            };
            cmd.flags.push(CliOption {
                name: word.clone(),
                value,
            });
        } else {
            cmd.goals_or_tasks.push(word.clone());
        }
    }
    if cmd.is_empty() {
        return Err(CommandError::EmptyCommand);
    }
    Ok(cmd)
}

/// Parse a Gradle invocation.
pub fn parse_gradle(words: &[String]) -> Result<ParsedCommand, CommandError> {
    let (tool, wrapper) = header(words, Tool::Gradle)?;
    let mut cmd = ParsedCommand::empty(tool, &words[0], wrapper);
    let mut it = words[1..].iter().peekable();
    while let Some(word) = it.next() {
        let property = word
            .strip_prefix("-D")
            .map(|b| (PropertyKind::System, b))
            .or_else(|| word.strip_prefix("-P").map(|b| (PropertyKind::Project, b)));
        match property {
            Some((kind, body)) if !body.is_empty() => {
                let (k, v) = split_property(body, "");
                cmd.set_property(kind, &k, &v);
                continue;
            }
            Some((kind, _)) => {
                let body = take_value(word, &mut it, Arity::Required)?.unwrap_or_default();
                let (k, v) = split_property(&body, "");
                cmd.set_property(kind, &k, &v);
                continue;
            }
            None => {}
        }
        if word == "-x" || word == "--exclude-task" {
            let task = take_value(word, &mut it, Arity::Required)?.unwrap_or_default();
            cmd.excluded_tasks.push(task);
        } else if word.starts_with('-') {
            let value = match arity(tool, word) {
                Some(a) => take_value(word, &mut it, a)?,
                None => None,
            };
            cmd.flags.push(CliOption {
                name: word.clone(),
                value,
            });
        } else {
            cmd.goals_or_tasks.push(word.clone());
        }
    }
    if cmd.is_empty() {
        return Err(CommandError::EmptyCommand);
    }
    Ok(cmd)
}

/// Parse a word list with whichever parser its executable calls for.
pub fn parse_words(words: &[String]) -> Result<ParsedCommand, CommandError> {
    let first = words.first().ok_or(CommandError::EmptyCommand)?;
    match classify_executable(first) {
        Some((Tool::Maven, _)) => parse_maven(words),
        Some((Tool::Gradle, _)) => parse_gradle(words),
        None => Err(CommandError::UnsupportedTool(first.clone())),
    }
}

/// Parse a command line given as shell text.
pub fn parse_command_line(text: &str) -> Result<ParsedCommand, CommandError> {
    parse_words(&shell::split_words(text))
}

/// Goal or task names that publish, deploy, sign or cut a release.
pub fn is_release_element(name: &str) -> bool {
    let lower = name.to_lowercase();
    let last = lower.rsplit(':').next().unwrap_or(&lower);
    lower.contains("deploy")
        || lower.contains("publish")
        || lower.contains("tosonatype")
        || lower.starts_with("release:")
        || last.starts_with("sign")
        || last.starts_with("closeandrelease")
        || last == "release"
}

/// Goal or task names that push artifacts to a repository.
pub fn is_deploy_goal(name: &str) -> bool {
    let lower = name.to_lowercase();
    lower.contains("deploy")
        || lower.contains("publish")
        || lower.contains("tosonatype")
        || lower.contains("closeandrelease")
        || lower == "release:perform"
}

/// Properties every patched Maven command carries.
pub const MAVEN_SKIP_PROPERTIES: &[(&str, &str)] = &[
    ("skipTests", "true"),
    ("maven.test.skip", "true"),
    ("maven.site.skip", "true"),
    ("rat.skip", "true"),
    ("maven.javadoc.skip", "true"),
];

const MAVEN_SITE_GOALS: &[&str] = &["site", "site:deploy"];
const MAVEN_THREAD_OPTIONS: &[&str] = &[THREADS_OPTION, "-T", "--threads"];

fn dedup_preserving_order(items: &mut Vec<String>) {
    let mut seen = std::collections::HashSet::new();
    items.retain(|i| seen.insert(i.clone()));
}

fn is_test_task(task: &str) -> bool {
    task == "test" || task.ends_with(":test")
}

/// Rewrite a command so that it builds the artifact without publishing,
/// signing, testing or running in parallel.
pub fn patch_for_rebuild(cmd: &ParsedCommand) -> ParsedCommand {
    let mut out = cmd.clone();
    match cmd.tool {
        Tool::Maven => {
            out.goals_or_tasks = cmd
                .goals_or_tasks
                .iter()
                .map(|g| {
                    if g == "deploy" {
                        "package".to_owned()
                    } else {
                        g.clone()
                    }
                })
                .filter(|g| !MAVEN_SITE_GOALS.contains(&g.as_str()) && !is_release_element(g))
                .collect();
            dedup_preserving_order(&mut out.goals_or_tasks);
            if out.goals_or_tasks.is_empty() {
                out.goals_or_tasks.push("package".to_owned());
            }

            out.flags
                .retain(|f| !MAVEN_THREAD_OPTIONS.contains(&f.name.as_str()));
            if !out.has_flag("-B") && !out.has_flag("--batch-mode") {
                out.flags.insert(0, CliOption::flag("-B"));
            }

            out.properties
                .retain(|p| !p.key.to_lowercase().starts_with("gpg"));
            for (key, value) in MAVEN_SKIP_PROPERTIES {
                if out.property(PropertyKind::System, key).is_none() {
                    out.set_property(PropertyKind::System, key, value);
                }
            }
        }
        Tool::Gradle => {
            out.goals_or_tasks.retain(|t| !is_release_element(t));
            dedup_preserving_order(&mut out.goals_or_tasks);
            if out.goals_or_tasks.is_empty() {
                out.goals_or_tasks.push("build".to_owned());
            }
            let wants_tests = out.goals_or_tasks.iter().any(|t| is_test_task(t));
            if !wants_tests && !out.excluded_tasks.iter().any(|t| t == "test") {
                out.excluded_tasks.push("test".to_owned());
            }
            out.flags.retain(|f| f.name != THREADS_OPTION);
            if !out.has_flag("--no-daemon") {
                out.flags.push(CliOption::flag("--no-daemon"));
            }
        }
    }
    out
}

fn render_property(p: &Property) -> String {
    let switch = p.kind.switch();
    let plain_key = !p.key.is_empty() && shell::quote(&p.key) == p.key && !p.key.contains('=');
    if !plain_key {
        return shell::quote(&format!("{switch}{}={}", p.key, p.value));
    }
    if p.value.is_empty() {
        return match p.kind {
            PropertyKind::System => format!("{switch}{}=", p.key),
            PropertyKind::Project => format!("{switch}{}", p.key),
        };
    }
    format!("{switch}{}={}", p.key, shell::quote(&p.value))
}

fn render_option(o: &CliOption, out: &mut Vec<String>) {
    out.push(shell::quote(&o.name));
    if let Some(v) = &o.value {
        out.push(shell::quote(v));
    }
}

/// Canonical text form.
///
/// Maven: executable, options, goals, profiles, properties.
/// Gradle: executable, tasks, exclusions, options, properties.
pub fn render(cmd: &ParsedCommand) -> String {
    let mut words = vec![shell::quote(&cmd.executable)];
    match cmd.tool {
        Tool::Maven => {
            cmd.flags.iter().for_each(|o| render_option(o, &mut words));
            words.extend(cmd.goals_or_tasks.iter().map(|g| shell::quote(g)));
            if !cmd.profiles.is_empty() {
                words.push(shell::quote(&format!("-P{}", cmd.profiles.join(","))));
            }
        }
        Tool::Gradle => {
            words.extend(cmd.goals_or_tasks.iter().map(|g| shell::quote(g)));
            for task in &cmd.excluded_tasks {
                words.push("-x".to_owned());
                words.push(shell::quote(task));
            }
            cmd.flags.iter().for_each(|o| render_option(o, &mut words));
        }
    }
    words.extend(cmd.properties.iter().map(render_property));
    words.join(" ")
}

impl fmt::Display for ParsedCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

/// The command used when no build command could be detected.
pub const DEFAULT_MAVEN_COMMAND: &str = "mvn clean package -DskipTests=true -Dmaven.test.skip=true -Dmaven.site.skip=true -Drat.skip=true -Dmaven.javadoc.skip=true -Dgenerate-metadata=true";

pub fn default_maven_command() -> ParsedCommand {
    parse_command_line(DEFAULT_MAVEN_COMMAND).expect("default command parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        shell::split_words(s)
    }

    #[test]
    fn maven_grammar() {
        let c = parse_maven(&words("mvn -B clean deploy -DskipTests -Prelease")).unwrap();
        assert_eq!(c.goals_or_tasks, ["clean", "deploy"]);
        assert_eq!(c.property(PropertyKind::System, "skipTests"), Some("true"));
        assert_eq!(c.profiles, ["release"]);
        assert_eq!(c.flags, [CliOption::flag("-B")]);
        assert!(!c.wrapper);
    }

    #[test]
    fn maven_wrapper() {
        let c = parse_maven(&words("./mvnw verify")).unwrap();
        assert!(c.wrapper);
        assert_eq!(c.goals_or_tasks, ["verify"]);
    }

    #[test]
    fn maven_options_without_goals() {
        let c = parse_maven(&words("mvn -T 4")).unwrap();
        assert!(c.goals_or_tasks.is_empty());
        assert_eq!(c.flags[0].value.as_deref(), Some("4"));
        assert_eq!(c.warnings(), ["no goals given"]);
        assert_eq!(parse_maven(&words("mvn")), Err(CommandError::EmptyCommand));
        assert!(matches!(
            parse_maven(&words("mvn -f")),
            Err(CommandError::MissingOptionValue(_))
        ));
    }

    #[test]
    fn gradle_grammar() {
        let c = parse_gradle(&words("./gradlew check --no-daemon --continue")).unwrap();
        assert_eq!(c.goals_or_tasks, ["check"]);
        let names: Vec<_> = c.flags.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["--no-daemon", "--continue"]);

        let c = parse_gradle(&words(
            "./gradlew publishAllPublicationsToBuildRepository publishToSonatype closeAndReleaseSonatypeStagingRepository",
        ))
        .unwrap();
        assert_eq!(c.goals_or_tasks.len(), 3);

        let c = parse_gradle(&words("gradle build -x test -Pversion=1.2")).unwrap();
        assert_eq!(c.goals_or_tasks, ["build"]);
        assert_eq!(c.excluded_tasks, ["test"]);
        assert_eq!(c.property(PropertyKind::Project, "version"), Some("1.2"));
    }

    #[test]
    fn wrong_parser_rejects() {
        assert!(matches!(
            parse_gradle(&words("mvn package")),
            Err(CommandError::UnsupportedTool(_))
        ));
        assert!(matches!(
            parse_words(&words("sbt compile")),
            Err(CommandError::UnsupportedTool(_))
        ));
    }

    #[test]
    fn patches_sonatype_publish_command() {
        let c = parse_command_line(
            "./gradlew publishAllPublicationsToBuildRepository publishToSonatype closeAndReleaseSonatypeStagingRepository",
        )
        .unwrap();
        assert_eq!(
            render(&patch_for_rebuild(&c)),
            "./gradlew build -x test --no-daemon"
        );
    }

    #[test]
    fn patches_maven_deploy() {
        let c = parse_command_line("mvn deploy").unwrap();
        assert_eq!(
            render(&patch_for_rebuild(&c)),
            "mvn -B package -DskipTests=true -Dmaven.test.skip=true -Dmaven.site.skip=true -Drat.skip=true -Dmaven.javadoc.skip=true"
        );
    }

    #[test]
    fn patch_strips_threads_signing_and_site() {
        let c = parse_command_line(
            "mvn -T 1C -threads 4 --threads 2 clean site site:deploy gpg:sign deploy -Dgpg.passphrase=x -Dfoo=bar",
        )
        .unwrap();
        let p = patch_for_rebuild(&c);
        assert_eq!(p.goals_or_tasks, ["clean", "package"]);
        assert_eq!(p.flags, [CliOption::flag("-B")]);
        assert!(p.property(PropertyKind::System, "gpg.passphrase").is_none());
        assert_eq!(p.property(PropertyKind::System, "foo"), Some("bar"));

        let g = parse_command_line("./gradlew -threads 4 test signArchives").unwrap();
        let p = patch_for_rebuild(&g);
        assert_eq!(p.goals_or_tasks, ["test"]);
        assert!(p.excluded_tasks.is_empty());
        assert_eq!(p.flags, [CliOption::flag("--no-daemon")]);
    }

    #[test]
    fn threads_option_leaves_following_option() {
        let c = parse_command_line("mvn -threads -B package").unwrap();
        assert_eq!(c.flags[0], CliOption::flag("-threads"));
        assert_eq!(c.flags[1], CliOption::flag("-B"));
    }

    #[test]
    fn install_is_left_alone() {
        let c = parse_command_line("mvn clean install").unwrap();
        assert_eq!(patch_for_rebuild(&c).goals_or_tasks, ["clean", "install"]);
    }

    #[test]
    fn render_round_trip_examples() {
        assert_eq!(
            render(&parse_command_line("mvn -B clean package").unwrap()),
            "mvn -B clean package"
        );
        assert_eq!(render(&default_maven_command()), DEFAULT_MAVEN_COMMAND);
        let mut c = parse_command_line("mvn package").unwrap();
        c.set_property(PropertyKind::System, "argLine", "-Xmx1g -Dx=1");
        let text = render(&c);
        assert_eq!(text, r#"mvn package -DargLine="-Xmx1g -Dx=1""#);
        assert_eq!(parse_command_line(&text).unwrap(), c);
    }

    #[test]
    fn without_wrapper_switches_executable() {
        let c = parse_command_line("./mvnw -B package").unwrap();
        let plain = c.without_wrapper();
        assert_eq!(render(&plain), "mvn -B package");
        assert!(!plain.wrapper);
    }
}
