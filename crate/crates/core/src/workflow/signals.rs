//! Evidence that a job publishes artifacts rather than only testing them.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::document::{Job, Step};
use crate::command::{self, is_deploy_goal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Signal {
    SigningEnv,
    RegistryCred,
    PublishKeyword,
    DeployGoal,
}

fn signing() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new("GPG|SIGN|PGP").unwrap())
}

fn registry() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new("SONATYPE|OSSRH|NEXUS|MAVEN_(USERNAME|PASSWORD|TOKEN)").unwrap())
}

fn secret_ref() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"secrets\.([A-Za-z_][A-Za-z0-9_]*)").unwrap())
}

fn step_texts(step: &Step) -> impl Iterator<Item = &str> {
    step.with
        .values()
        .chain(step.env.values())
        .map(String::as_str)
        .chain(step.run.as_deref())
}

/// Env variable names and referenced secrets visible to `step` within `job`.
fn credential_names(job: &Job, step: Option<&Step>) -> BTreeSet<String> {
    let mut names: BTreeSet<String> = job.env.keys().map(|k| k.to_uppercase()).collect();
    if let Some(step) = step {
        names.extend(step.env.keys().map(|k| k.to_uppercase()));
    }
    let mut texts: Vec<&str> = job.env.values().map(String::as_str).collect();
    for s in &job.steps {
        texts.extend(step_texts(s));
    }
    for text in texts {
        for cap in secret_ref().captures_iter(text) {
            names.insert(cap[1].to_uppercase());
        }
    }
    names
}

fn has_publish_word(text: &str) -> bool {
    let lower = text.to_lowercase();
    ["publish", "release", "deploy"]
        .iter()
        .any(|w| lower.contains(w))
}

/// Goals or tasks of a command; falls back to bare words when it does not parse.
fn command_goals(words: &[String]) -> Vec<String> {
    match command::parse_words(words) {
        Ok(parsed) => parsed.goals_or_tasks,
        Err(_) => words
            .iter()
            .skip(1)
            .filter(|w| !w.starts_with('-'))
            .cloned()
            .collect(),
    }
}

/// Publishing signals for a command in `step` of `job`.
pub fn detect_publishing_signals(
    job: &Job,
    step: Option<&Step>,
    command: Option<&[String]>,
) -> BTreeSet<Signal> {
    let mut out = BTreeSet::new();
    let names = credential_names(job, step);
    if names.iter().any(|n| signing().is_match(n)) {
        out.insert(Signal::SigningEnv);
    }
    if names.iter().any(|n| registry().is_match(n)) {
        out.insert(Signal::RegistryCred);
    }
    let labels = [
        step.and_then(|s| s.name.as_deref()),
        Some(job.id.as_str()),
        job.name.as_deref(),
    ];
    if labels.into_iter().flatten().any(has_publish_word) {
        out.insert(Signal::PublishKeyword);
    }
    if command.is_some_and(|words| command_goals(words).iter().any(|g| is_deploy_goal(g))) {
        out.insert(Signal::DeployGoal);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workflow::document::parse_workflow;

    fn words(s: &str) -> Vec<String> {
        crate::shell::split_words(s)
    }

    #[test]
    fn sonatype_step_and_plain_test() {
        let wf = parse_workflow(
            "w.yml",
            "on: push\njobs:\n  ci:\n    steps:\n      - name: Publish to Sonatype OSSRH\n        run: echo\n      - name: Test\n        run: mvn test\n",
        )
        .unwrap();
        let job = &wf.jobs[0];
        assert_eq!(
            detect_publishing_signals(job, job.steps.first(), None),
            BTreeSet::from([Signal::PublishKeyword])
        );
        assert!(
            detect_publishing_signals(job, job.steps.get(1), Some(&words("mvn test"))).is_empty()
        );
    }

    #[test]
    fn credentials_and_goals() {
        let wf = parse_workflow(
            "w.yml",
            "on: push\njobs:\n  ci:\n    env:\n      MAVEN_USERNAME: x\n    steps:\n      - run: mvn deploy\n        env:\n          SIGN_KEY: ${{ secrets.KEY }}\n",
        )
        .unwrap();
        let job = &wf.jobs[0];
        assert_eq!(
            detect_publishing_signals(job, job.steps.first(), Some(&words("mvn -B deploy"))),
            BTreeSet::from([Signal::SigningEnv, Signal::RegistryCred, Signal::DeployGoal])
        );
        // an excluded task is not a goal
        assert!(
            !detect_publishing_signals(job, None, Some(&words("gradle build -x publish")))
                .contains(&Signal::DeployGoal)
        );
    }
}
