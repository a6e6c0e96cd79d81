//! Confidence scores for build-command candidates.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::signals::Signal;
use super::{BuildCommandCandidate, ToolKind};
use crate::command;

/// A score in `[0, 1]` held as whole hundredths so comparisons are exact.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Confidence(u32);

impl Confidence {
    pub const MAX: Confidence = Confidence(100);

    pub fn from_hundredths(h: i64) -> Self {
        Confidence(h.clamp(0, 100) as u32)
    }

    pub fn hundredths(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 100.0
    }
}

impl fmt::Display for Confidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl Serialize for Confidence {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Confidence {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        if !(0.0..=1.0).contains(&v) {
            return Err(serde::de::Error::custom(format!(
                "confidence {v} outside [0, 1]"
            )));
        }
        Ok(Confidence((v * 100.0).round() as u32))
    }
}

/// Heuristic weights, in hundredths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub recognized_tool: i64,
    pub deploy_goal: i64,
    pub release_trigger: i64,
    pub credentials: i64,
    pub test_only_penalty: i64,
    pub other_tool: i64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            recognized_tool: 50,
            deploy_goal: 20,
            release_trigger: 15,
            credentials: 10,
            test_only_penalty: 20,
            other_tool: 10,
        }
    }
}

const TEST_ONLY_GOALS: &[&str] = &["test", "check", "verify"];

fn goals(tokens: &[String]) -> Vec<String> {
    match command::parse_words(tokens) {
        Ok(parsed) => parsed.goals_or_tasks,
        Err(_) => tokens
            .iter()
            .skip(1)
            .filter(|w| !w.starts_with('-'))
            .cloned()
            .collect(),
    }
}

/// Goals are non-empty and all of them merely test.
pub fn is_test_only(tokens: &[String]) -> bool {
    let goals = goals(tokens);
    !goals.is_empty()
        && goals
            .iter()
            .all(|g| TEST_ONLY_GOALS.iter().any(|t| g.eq_ignore_ascii_case(t)))
}

/// Confidence of one candidate from its recorded facts.
pub fn confidence(candidate: &BuildCommandCandidate, weights: &ScoreWeights) -> Confidence {
    if let ToolKind::Other(_) = candidate.tool {
        return Confidence::from_hundredths(weights.other_tool);
    }
    let signals = &candidate.publishing_signals;
    let mut total = weights.recognized_tool;
    if signals.contains(&Signal::DeployGoal) {
        total += weights.deploy_goal;
    }
    if candidate.triggers.iter().any(|t| t.is_release_like()) {
        total += weights.release_trigger;
    }
    if signals.contains(&Signal::SigningEnv) || signals.contains(&Signal::RegistryCred) {
        total += weights.credentials;
    }
    if is_test_only(&candidate.tokens) {
        total -= weights.test_only_penalty;
    }
    Confidence::from_hundredths(total)
}

/// Score and sort descending by confidence, then by location.
pub fn score_candidates(
    mut candidates: Vec<BuildCommandCandidate>,
    weights: &ScoreWeights,
) -> Vec<BuildCommandCandidate> {
    for c in &mut candidates {
        c.confidence = confidence(c, weights);
    }
    candidates.sort_by(|a, b| {
        b.confidence
            .cmp(&a.confidence)
            .then_with(|| a.location.cmp(&b.location))
            .then_with(|| a.tokens.cmp(&b.tokens))
    });
    candidates
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workflow::{Location, Trigger};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn candidate(
        cmd: &str,
        tool: ToolKind,
        signals: &[Signal],
        release: bool,
        step: usize,
    ) -> BuildCommandCandidate {
        BuildCommandCandidate {
            tokens: crate::shell::split_words(cmd),
            tool,
            location: Location {
                workflow: ".github/workflows/w.yml".into(),
                job: "j".into(),
                job_index: 0,
                step,
                ordinal: 0,
            },
            triggers: if release {
                BTreeSet::from([Trigger::Release { types: vec![] }])
            } else {
                BTreeSet::from([Trigger::BranchPush])
            },
            jdk_facts: None,
            publishing_signals: signals.iter().copied().collect(),
            confidence: Confidence::default(),
            needs: vec![],
            node: step,
        }
    }

    #[test]
    fn weights_add_up() {
        let w = ScoreWeights::default();
        let all = [Signal::DeployGoal, Signal::SigningEnv];
        assert_eq!(
            confidence(&candidate("mvn deploy", ToolKind::Maven, &all, true, 0), &w).hundredths(),
            95
        );
        assert_eq!(
            confidence(&candidate("mvn test", ToolKind::Maven, &[], false, 0), &w).hundredths(),
            30
        );
        assert_eq!(
            confidence(
                &candidate("sbt publish", ToolKind::Other("sbt".into()), &all, true, 0),
                &w
            )
            .hundredths(),
            10
        );
        assert_eq!(Confidence::from_hundredths(95).to_string(), "0.95");
        assert_eq!(
            serde_json::to_string(&Confidence::from_hundredths(45)).unwrap(),
            "0.45"
        );
    }

    fn arb_signals() -> impl Strategy<Value = Vec<Signal>> {
        proptest::sample::subsequence(
            vec![
                Signal::SigningEnv,
                Signal::RegistryCred,
                Signal::PublishKeyword,
            ],
            0..=3,
        )
    }

    proptest! {
        #[test]
        fn deploy_goal_never_lowers_confidence(
            signals in arb_signals(),
            release in any::<bool>(),
            cmd in prop::sample::select(vec!["mvn test", "mvn package", "./gradlew check", "gradle build", "sbt compile"]),
        ) {
            let w = ScoreWeights::default();
            let tool = ToolKind::classify(cmd.split(' ').next().unwrap()).unwrap();
            let without = candidate(cmd, tool.clone(), &signals, release, 0);
            let mut with_signals = signals.clone();
            with_signals.push(Signal::DeployGoal);
            let with = candidate(cmd, tool, &with_signals, release, 0);
            prop_assert!(confidence(&with, &w) >= confidence(&without, &w));
        }

        #[test]
        fn ranking_ignores_input_order(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let w = ScoreWeights::default();
            let base: Vec<_> = (0..6)
                .map(|i| candidate(if i % 2 == 0 { "mvn deploy" } else { "mvn verify" }, ToolKind::Maven, &[], i % 3 == 0, i))
                .collect();
            let mut shuffled = base.clone();
            shuffled.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
            prop_assert_eq!(score_candidates(base, &w), score_candidates(shuffled, &w));
        }
    }
}
