//! Call graph over workflows, jobs, steps, scripts and shell commands.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::document::Workflow;
use super::expr::{interpolate_literals, ExprContext};
use super::{BuildCommandCandidate, Confidence, Diagnostic, DiagnosticKind, Location, ToolKind};
use crate::shell::{self, as_assignment};

pub type NodeId = usize;

/// Deepest chain of scripts calling scripts that is followed.
const MAX_SCRIPT_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScriptSource {
    /// A `run:` block or a `bash -c` argument.
    Inline,
    External {
        path: String,
    },
    /// Command derived from an action's inputs.
    Synthesized {
        action: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeKind {
    Workflow {
        path: String,
    },
    Job {
        id: String,
    },
    Step {
        index: usize,
        name: Option<String>,
    },
    Script {
        script: ScriptSource,
        resolved: bool,
    },
    Command {
        words: Vec<String>,
        ordinal: usize,
        /// Shell assignments in effect, oldest first.
        assignments: Vec<(String, String)>,
    },
    ActionCall {
        uses: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub workflow: usize,
    pub job: Option<usize>,
    pub step: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct CallGraph {
    pub workflows: Vec<Workflow>,
    pub nodes: Vec<Node>,
    pub roots: Vec<NodeId>,
    pub diagnostics: Vec<Diagnostic>,
}

impl CallGraph {
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    /// Node ids from a root down to `id`.
    pub fn path_to(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    pub fn commands(&self) -> impl Iterator<Item = &Node> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Command { .. }))
    }

    pub(crate) fn add(
        &mut self,
        kind: NodeKind,
        parent: Option<NodeId>,
        workflow: usize,
        job: Option<usize>,
        step: Option<usize>,
    ) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            id,
            kind,
            parent,
            children: Vec::new(),
            workflow,
            job,
            step,
        });
        match parent {
            Some(p) => self.nodes[p].children.push(id),
            None => self.roots.push(id),
        }
        id
    }

    /// Next free command ordinal within a step.
    pub(crate) fn next_ordinal(&self, workflow: usize, job: usize, step: usize) -> usize {
        self.commands()
            .filter(|n| n.workflow == workflow && n.job == Some(job) && n.step == Some(step))
            .count()
    }

    /// Evaluation context for a node inside a step.
    pub fn context_for<'a>(&'a self, node: &'a Node) -> ExprContext<'a> {
        let wf = &self.workflows[node.workflow];
        let mut ctx = ExprContext::new().with_inputs(&wf.inputs);
        let job = node.job.and_then(|j| wf.jobs.get(j));
        let step = job.and_then(|j| node.step.and_then(|s| j.steps.get(s)));
        ctx = ctx.with_envs(step.map(|s| &s.env), job.map(|j| &j.env), Some(&wf.env));
        if let Some(job) = job {
            ctx = ctx.with_matrix(&job.matrix);
        }
        if let NodeKind::Command { assignments, .. } = &node.kind {
            ctx = ctx.with_shell(assignments);
        }
        ctx
    }
}

/// Words that may precede the real executable of a command.
const LEADING_KEYWORDS: &[&str] = &[
    "then", "do", "else", "elif", "if", "while", "until", "{", "(", "!", "time", "exec", "env",
    "sudo", "nohup",
];

/// Index of the executable, skipping assignments and shell keywords.
pub fn command_head(words: &[String]) -> usize {
    words
        .iter()
        .position(|w| as_assignment(w).is_none() && !LEADING_KEYWORDS.contains(&w.as_str()))
        .unwrap_or(words.len())
}

enum ScriptTarget {
    Inline(String),
    External(String),
}

const SHELLS: &[&str] = &["bash", "sh", "zsh", "source", "."];

/// Repo-relative form of a script path, if it stays inside the repository.
fn repo_relative(raw: &str) -> Option<String> {
    let mut path = raw;
    for prefix in [
        "${{ github.workspace }}/",
        "${GITHUB_WORKSPACE}/",
        "$GITHUB_WORKSPACE/",
    ] {
        if let Some(rest) = path.strip_prefix(prefix) {
            path = rest;
        }
    }
    if path.is_empty() || path.starts_with('/') || path.starts_with('~') || path.contains('$') {
        return None;
    }
    let mut parts: Vec<&str> = Vec::new();
    for part in path.split('/') {
        match part {
            "" | "." => {}
            ".." => {
                parts.pop()?;
            }
            p => parts.push(p),
        }
    }
    (!parts.is_empty()).then(|| parts.join("/"))
}

fn script_target(words: &[String]) -> Option<ScriptTarget> {
    let head = words.first()?;
    if ToolKind::classify(head).is_some() {
        return None;
    }
    if SHELLS.contains(&head.as_str()) {
        let mut rest = words[1..].iter();
        while let Some(w) = rest.next() {
            if w == "-c" {
                return rest.next().map(|s| ScriptTarget::Inline(s.clone()));
            }
            if !w.starts_with('-') {
                return repo_relative(w).map(ScriptTarget::External);
            }
        }
        return None;
    }
    if head.contains('/') || head.ends_with(".sh") {
        return repo_relative(head).map(ScriptTarget::External);
    }
    None
}

/// `sh gradlew build` runs the wrapper; treat it like `./gradlew build`.
fn wrapper_via_shell(words: &[String]) -> Option<Vec<String>> {
    let head = words.first()?;
    if !SHELLS[..3].contains(&head.as_str()) {
        return None;
    }
    let target = words.get(1)?;
    let rel = repo_relative(target)?;
    matches!(rel.as_str(), "gradlew" | "mvnw").then(|| {
        let mut out = vec![format!("./{rel}")];
        out.extend(words[2..].iter().cloned());
        out
    })
}

struct Builder<'r> {
    root: &'r Path,
    graph: CallGraph,
    ordinal: usize,
}

impl Builder<'_> {
    fn expand(
        &mut self,
        text: &str,
        script: NodeId,
        env: &mut Vec<(String, String)>,
        stack: &mut Vec<String>,
    ) {
        let (wi, ji, si) = {
            let n = &self.graph.nodes[script];
            (n.workflow, n.job, n.step)
        };
        for line in shell::split_commands(text) {
            let words = shell::split_words(&line);
            let head = command_head(&words);
            if head == words.len() {
                env.extend(
                    words
                        .iter()
                        .filter_map(|w| as_assignment(w))
                        .map(|(k, v)| (k.to_owned(), v.to_owned())),
                );
                continue;
            }
            if words[head] == "export" {
                env.extend(
                    words[head + 1..]
                        .iter()
                        .filter_map(|w| as_assignment(w))
                        .map(|(k, v)| (k.to_owned(), v.to_owned())),
                );
                continue;
            }
            let mut local = env.clone();
            local.extend(
                words[..head]
                    .iter()
                    .filter_map(|w| as_assignment(w))
                    .map(|(k, v)| (k.to_owned(), v.to_owned())),
            );
            let mut invoked = words[head..].to_vec();
            if let Some(rewritten) = wrapper_via_shell(&invoked) {
                invoked = rewritten;
            }
            let target = script_target(&invoked);
            let ordinal = self.ordinal;
            self.ordinal += 1;
            let node = self.graph.add(
                NodeKind::Command {
                    words: invoked,
                    ordinal,
                    assignments: local.clone(),
                },
                Some(script),
                wi,
                ji,
                si,
            );
            match target {
                None => {}
                Some(ScriptTarget::Inline(body)) => {
                    let child = self.graph.add(
                        NodeKind::Script {
                            script: ScriptSource::Inline,
                            resolved: true,
                        },
                        Some(node),
                        wi,
                        ji,
                        si,
                    );
                    self.expand(&body, child, &mut local, stack);
                }
                Some(ScriptTarget::External(path)) => self.external(&path, node, local, stack),
            }
        }
    }

    fn external(
        &mut self,
        path: &str,
        caller: NodeId,
        mut env: Vec<(String, String)>,
        stack: &mut Vec<String>,
    ) {
        let (wi, ji, si) = {
            let n = &self.graph.nodes[caller];
            (n.workflow, n.job, n.step)
        };
        let wf_path = self.graph.workflows[wi].path.clone();
        if stack.iter().any(|p| p == path) || stack.len() >= MAX_SCRIPT_DEPTH {
            self.graph.diagnostics.push(Diagnostic::new(
                DiagnosticKind::RecursiveScript,
                &wf_path,
                format!("`{path}` already on the call path; not expanded again"),
            ));
            return;
        }
        let body = fs::read(self.root.join(path))
            .ok()
            .filter(|bytes| !bytes.contains(&0))
            .map(|bytes| String::from_utf8_lossy(&bytes).into_owned());
        let node = self.graph.add(
            NodeKind::Script {
                script: ScriptSource::External {
                    path: path.to_owned(),
                },
                resolved: body.is_some(),
            },
            Some(caller),
            wi,
            ji,
            si,
        );
        match body {
            Some(text) => {
                stack.push(path.to_owned());
                self.expand(&text, node, &mut env, stack);
                stack.pop();
            }
            None => self.graph.diagnostics.push(Diagnostic::new(
                DiagnosticKind::UnresolvedScript,
                &wf_path,
                format!("script `{path}` not found in repository"),
            )),
        }
    }
}

/// Build the call graph for `workflows`, reading scripts under `repo_root`.
pub fn build_call_graph(workflows: Vec<Workflow>, repo_root: &Path) -> CallGraph {
    let mut b = Builder {
        root: repo_root,
        graph: CallGraph {
            workflows,
            ..CallGraph::default()
        },
        ordinal: 0,
    };
    for wi in 0..b.graph.workflows.len() {
        let wf = b.graph.workflows[wi].clone();
        let w = b.graph.add(
            NodeKind::Workflow {
                path: wf.path.clone(),
            },
            None,
            wi,
            None,
            None,
        );
        for (ji, job) in wf.jobs.iter().enumerate() {
            let j = b.graph.add(
                NodeKind::Job { id: job.id.clone() },
                Some(w),
                wi,
                Some(ji),
                None,
            );
            if let Some(uses) = &job.uses {
                b.graph.add(
                    NodeKind::ActionCall { uses: uses.clone() },
                    Some(j),
                    wi,
                    Some(ji),
                    None,
                );
            }
            for step in &job.steps {
                let si = step.index;
                let s = b.graph.add(
                    NodeKind::Step {
                        index: si,
                        name: step.name.clone(),
                    },
                    Some(j),
                    wi,
                    Some(ji),
                    Some(si),
                );
                b.ordinal = 0;
                if let Some(uses) = &step.uses {
                    b.graph.add(
                        NodeKind::ActionCall { uses: uses.clone() },
                        Some(s),
                        wi,
                        Some(ji),
                        Some(si),
                    );
                }
                if let Some(run) = &step.run {
                    let script = b.graph.add(
                        NodeKind::Script {
                            script: ScriptSource::Inline,
                            resolved: true,
                        },
                        Some(s),
                        wi,
                        Some(ji),
                        Some(si),
                    );
                    b.expand(run, script, &mut Vec::new(), &mut Vec::new());
                }
            }
        }
    }
    b.graph
}

/// Breadth-first search for commands whose executable is a known build tool.
pub fn find_build_commands(graph: &CallGraph) -> Vec<BuildCommandCandidate> {
    let mut out = Vec::new();
    let mut queue: VecDeque<NodeId> = graph.roots.iter().copied().collect();
    while let Some(id) = queue.pop_front() {
        let node = graph.node(id);
        queue.extend(node.children.iter().copied());
        let NodeKind::Command { words, ordinal, .. } = &node.kind else {
            continue;
        };
        let Some(tool) = words.first().and_then(|w| ToolKind::classify(w)) else {
            continue;
        };
        let (Some(ji), Some(si)) = (node.job, node.step) else {
            continue;
        };
        let wf = &graph.workflows[node.workflow];
        let ctx = graph.context_for(node);
        let tokens: Vec<String> = words
            .iter()
            .map(|w| interpolate_literals(w, &ctx))
            .collect();
        out.push(BuildCommandCandidate {
            tokens,
            tool,
            location: Location {
                workflow: wf.path.clone(),
                job: wf.jobs[ji].id.clone(),
                job_index: ji,
                step: si,
                ordinal: *ordinal,
            },
            triggers: Default::default(),
            jdk_facts: None,
            publishing_signals: Default::default(),
            confidence: Confidence::default(),
            needs: Vec::new(),
            node: id,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workflow::document::parse_workflow;

    fn graph(yaml: &str, root: &Path) -> CallGraph {
        build_call_graph(
            vec![parse_workflow(".github/workflows/w.yml", yaml).unwrap()],
            root,
        )
    }

    #[test]
    fn head_skips_assignments_and_keywords() {
        let w = shell::split_words("then JAVA_HOME=/x sudo -E mvn");
        assert_eq!(command_head(&w), 3);
        assert_eq!(
            repo_relative("./scripts/../ci/x.sh").as_deref(),
            Some("ci/x.sh")
        );
        assert_eq!(repo_relative("../x.sh"), None);
        assert_eq!(repo_relative("/usr/bin/x"), None);
    }

    #[test]
    fn scripts_are_followed_and_guarded() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("scripts")).unwrap();
        fs::write(
            dir.path().join("scripts/release.sh"),
            "#!/bin/sh\nset -e\nmvn deploy\nbash scripts/release.sh\n",
        )
        .unwrap();
        let g = graph(
            "on: push\njobs:\n  r:\n    steps:\n      - run: |\n          ./scripts/release.sh\n          ./missing.sh\n          bash -c \"make all\"\n",
            dir.path(),
        );
        let cands = find_build_commands(&g);
        let tokens: Vec<_> = cands.iter().map(|c| c.tokens.join(" ")).collect();
        assert_eq!(tokens, ["mvn deploy", "make all"]);
        let mvn = g.node(cands[0].node);
        let kinds: Vec<_> = g
            .path_to(mvn.id)
            .iter()
            .map(|&i| g.node(i).kind.clone())
            .collect();
        assert!(
            matches!(&kinds[4], NodeKind::Command { words, .. } if words[0] == "./scripts/release.sh")
        );
        assert!(
            matches!(&kinds[5], NodeKind::Script { script: ScriptSource::External { path }, resolved: true } if path == "scripts/release.sh")
        );
        let diag: Vec<_> = g.diagnostics.iter().map(|d| d.kind).collect();
        assert_eq!(
            diag,
            [
                DiagnosticKind::RecursiveScript,
                DiagnosticKind::UnresolvedScript
            ]
        );
    }

    #[test]
    fn uses_only_workflow_has_no_commands() {
        let dir = tempfile::tempdir().unwrap();
        let g = graph(
            "on: push\njobs:\n  a:\n    steps:\n      - uses: actions/checkout@v4\n",
            dir.path(),
        );
        assert_eq!(g.commands().count(), 0);
        assert!(g.nodes.iter().any(
            |n| matches!(&n.kind, NodeKind::ActionCall { uses } if uses == "actions/checkout@v4")
        ));
    }

    #[test]
    fn shell_assignments_feed_resolution() {
        let dir = tempfile::tempdir().unwrap();
        let g = graph(
            "on: push\njobs:\n  a:\n    steps:\n      - run: |\n          export GOAL=verify\n          OPTS=-B mvn $OPTS $GOAL\n          sh gradlew build\n          echo building\n",
            dir.path(),
        );
        let cands = find_build_commands(&g);
        assert_eq!(cands[0].tokens, ["mvn", "-B", "verify"]);
        assert_eq!(cands[1].tokens, ["./gradlew", "build"]);
        assert_eq!(cands[1].tool, ToolKind::GradleWrapper);
        assert_eq!(cands.len(), 2);
    }
}
