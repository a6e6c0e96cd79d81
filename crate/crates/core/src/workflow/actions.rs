//! Models of third-party actions: what a `uses:` step means for the build.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::expr::{interpolate_literals, resolve_expression, ResolvedValue};
use super::graph::{CallGraph, NodeKind, ScriptSource};
use crate::shell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionSemantics {
    JdkSetup,
    Checkout,
    BuildWrapper,
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Fact {
    JdkVersion,
    JdkDistribution,
    BuildArgs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionModel {
    /// `owner/repo[/path]`, matched case-insensitively without `@ref`.
    /// A trailing `*` matches any continuation.
    pub pattern: String,
    pub semantics: ActionSemantics,
    #[serde(default)]
    pub input_map: IndexMap<String, Fact>,
}

impl ActionModel {
    fn new(pattern: &str, semantics: ActionSemantics, inputs: &[(&str, Fact)]) -> Self {
        ActionModel {
            pattern: pattern.to_owned(),
            semantics,
            input_map: inputs.iter().map(|(k, f)| ((*k).to_owned(), *f)).collect(),
        }
    }

    pub fn matches(&self, uses: &str) -> bool {
        let action = uses.split('@').next().unwrap_or(uses).trim().to_lowercase();
        let pattern = self.pattern.to_lowercase();
        match pattern.strip_suffix('*') {
            Some(prefix) => action.starts_with(prefix),
            None => action == pattern,
        }
    }

    /// Input name that carries `fact`, if any.
    pub fn input_for(&self, fact: Fact) -> Option<&str> {
        self.input_map
            .iter()
            .find(|(_, f)| **f == fact)
            .map(|(k, _)| k.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionRegistry {
    models: Vec<ActionModel>,
}

impl Default for ActionRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl ActionRegistry {
    pub fn builtin() -> Self {
        use ActionSemantics::*;
        use Fact::*;
        let jdk = [
            ("java-version", JdkVersion),
            ("distribution", JdkDistribution),
        ];
        ActionRegistry {
            models: vec![
                ActionModel::new("actions/setup-java", JdkSetup, &jdk),
                ActionModel::new("graalvm/setup-graalvm", JdkSetup, &jdk),
                ActionModel::new("actions/checkout", Checkout, &[]),
                ActionModel::new(
                    "gradle/gradle-build-action",
                    BuildWrapper,
                    &[("arguments", BuildArgs)],
                ),
            ],
        }
    }

    /// Built-ins extended by `custom`; custom models are consulted first.
    pub fn with_custom(custom: Vec<ActionModel>) -> Self {
        let mut models = custom;
        models.extend(Self::builtin().models);
        ActionRegistry { models }
    }

    /// Read a JSON list of models and put them in front of the built-ins.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::with_custom(serde_json::from_str(text)?))
    }

    pub fn models(&self) -> &[ActionModel] {
        &self.models
    }

    pub fn lookup(&self, uses: &str) -> Option<&ActionModel> {
        self.models.iter().find(|m| m.matches(uses))
    }

    /// Semantics of `uses`; unknown actions are ignored.
    pub fn semantics(&self, uses: &str) -> ActionSemantics {
        self.lookup(uses)
            .map_or(ActionSemantics::Ignored, |m| m.semantics)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JdkFacts {
    pub version: ResolvedValue,
    pub distribution: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JdkSetupRecord {
    pub workflow: usize,
    pub job: usize,
    pub step: usize,
    pub action: String,
    pub facts: JdkFacts,
}

/// Facts contributed by modelled actions, per job.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionFacts {
    pub jdk_setups: Vec<JdkSetupRecord>,
}

impl ActionFacts {
    /// The JDK set up most recently at or before `step` in the same job.
    pub fn jdk_for(&self, workflow: usize, job: usize, step: usize) -> Option<&JdkFacts> {
        self.jdk_setups
            .iter()
            .filter(|r| r.workflow == workflow && r.job == job && r.step <= step)
            .max_by_key(|r| r.step)
            .map(|r| &r.facts)
    }
}

/// Derive JDK facts from setup actions and add commands implied by build
/// wrapper actions to the graph.
pub fn apply_action_models(graph: &mut CallGraph, registry: &ActionRegistry) -> ActionFacts {
    let mut facts = ActionFacts::default();
    let calls: Vec<_> = graph
        .nodes
        .iter()
        .filter_map(|n| match &n.kind {
            NodeKind::ActionCall { uses } => {
                Some((n.id, uses.clone(), n.workflow, n.job?, n.step?))
            }
            _ => None,
        })
        .collect();
    for (id, uses, wi, ji, si) in calls {
        let Some(model) = registry.lookup(&uses) else {
            continue;
        };
        let step = &graph.workflows[wi].jobs[ji].steps[si];
        let input = |fact| {
            model
                .input_for(fact)
                .and_then(|name| step.with.get(name))
                .cloned()
        };
        match model.semantics {
            ActionSemantics::JdkSetup => {
                let node = graph.node(id);
                let ctx = graph.context_for(node);
                let version = match input(Fact::JdkVersion) {
                    Some(v) => resolve_expression(&v, &ctx),
                    None => ResolvedValue::SymbolicContext(format!("{uses}.java-version")),
                };
                let distribution =
                    input(Fact::JdkDistribution).map(|d| interpolate_literals(&d, &ctx));
                let notes = ctx.take_notes();
                let path = graph.workflows[wi].path.clone();
                graph.diagnostics.extend(
                    notes.into_iter().map(|m| {
                        super::Diagnostic::new(super::DiagnosticKind::MatrixLimit, &path, m)
                    }),
                );
                facts.jdk_setups.push(JdkSetupRecord {
                    workflow: wi,
                    job: ji,
                    step: si,
                    action: uses.clone(),
                    facts: JdkFacts {
                        version,
                        distribution,
                    },
                });
            }
            ActionSemantics::BuildWrapper => {
                let Some(args) = input(Fact::BuildArgs) else {
                    continue;
                };
                let mut words = vec!["./gradlew".to_owned()];
                words.extend(shell::split_words(&args));
                let ordinal = graph.next_ordinal(wi, ji, si);
                let script = graph.add(
                    NodeKind::Script {
                        script: ScriptSource::Synthesized {
                            action: uses.clone(),
                        },
                        resolved: true,
                    },
                    Some(id),
                    wi,
                    Some(ji),
                    Some(si),
                );
                graph.add(
                    NodeKind::Command {
                        words,
                        ordinal,
                        assignments: Vec::new(),
                    },
                    Some(script),
                    wi,
                    Some(ji),
                    Some(si),
                );
            }
            ActionSemantics::Checkout | ActionSemantics::Ignored => {}
        }
    }
    facts
}
