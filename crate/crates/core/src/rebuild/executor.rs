//! Ways to run a build command: pretend, replay a script, or run it locally.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default wall-clock budget for one build.
pub const DEFAULT_BUDGET: Duration = Duration::from_secs(3600);

/// Exit code reported for a build stopped at its budget (as `timeout(1)` does).
pub const TIMEOUT_EXIT: i32 = 124;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExecutorKind {
    DryRun,
    ScriptedFixture,
    LocalShell,
    Container,
}

#[derive(Debug, Error)]
pub enum ExecutorError {
    #[error("executor {0:?} is not available")]
    Unavailable(ExecutorKind),
    #[error("scripted executor: {0}")]
    Script(String),
    #[error("could not run build: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildOutcome {
    pub exit_code: i32,
    /// Seconds.
    pub duration: f64,
    pub log: String,
    /// Paths relative to the working copy.
    pub produced_files: Vec<String>,
    pub executor: ExecutorKind,
    #[serde(default)]
    pub timed_out: bool,
}

/// One build: the working copy at its tag, the command, the JDK and a budget.
#[derive(Debug, Clone)]
pub struct ExecutionRequest<'a> {
    pub workdir: &'a Path,
    pub command: &'a str,
    pub jdk: &'a str,
    pub budget: Duration,
}

pub trait Executor: Send + Sync {
    fn kind(&self) -> ExecutorKind;
    fn execute(&self, request: &ExecutionRequest<'_>) -> Result<BuildOutcome, ExecutorError>;
}

/// Runs nothing; the log says what would have run.
#[derive(Debug, Clone, Copy, Default)]
pub struct DryRun;

impl Executor for DryRun {
    fn kind(&self) -> ExecutorKind {
        ExecutorKind::DryRun
    }

    fn execute(&self, request: &ExecutionRequest<'_>) -> Result<BuildOutcome, ExecutorError> {
        Ok(BuildOutcome {
            exit_code: 0,
            duration: 0.0,
            log: format!(
                "[dry-run] jdk={} cwd={}\n{}\n",
                request.jdk,
                request.workdir.display(),
                request.command
            ),
            produced_files: Vec::new(),
            executor: ExecutorKind::DryRun,
            timed_out: false,
        })
    }
}

/// Conditions a scripted response applies under. Absent fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptCondition {
    #[serde(default)]
    pub jdk: Option<String>,
    #[serde(default)]
    pub command_contains: Option<String>,
    /// 1-based count of executions so far, including this one.
    #[serde(default)]
    pub attempt: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedResponse {
    #[serde(default)]
    pub when: ScriptCondition,
    #[serde(default)]
    pub exit_code: i32,
    #[serde(default)]
    pub log: String,
    /// Simulated seconds; past the budget the build counts as timed out.
    #[serde(default)]
    pub duration: f64,
    #[serde(default)]
    pub produced_files: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Script {
    pub responses: Vec<ScriptedResponse>,
}

/// Replays canned outcomes; the first response whose conditions hold is used.
#[derive(Debug, Default)]
pub struct ScriptedFixture {
    script: Script,
    attempts: Mutex<u32>,
}

impl ScriptedFixture {
    pub fn new(script: Script) -> Self {
        ScriptedFixture {
            script,
            attempts: Mutex::new(0),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::new(serde_json::from_str(text)?))
    }

    pub fn from_file(path: &Path) -> Result<Self, ExecutorError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
            .map_err(|e| ExecutorError::Script(format!("{}: {e}", path.display())))
    }

    pub fn attempts(&self) -> u32 {
        *self.attempts.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl Executor for ScriptedFixture {
    fn kind(&self) -> ExecutorKind {
        ExecutorKind::ScriptedFixture
    }

    fn execute(&self, request: &ExecutionRequest<'_>) -> Result<BuildOutcome, ExecutorError> {
        let attempt = {
            let mut n = self.attempts.lock().unwrap_or_else(|e| e.into_inner());
            *n += 1;
            *n
        };
        let response = self
            .script
            .responses
            .iter()
            .find(|r| {
                let w = &r.when;
                w.jdk.as_deref().is_none_or(|j| j == request.jdk)
                    && w.command_contains
                        .as_deref()
                        .is_none_or(|c| request.command.contains(c))
                    && w.attempt.is_none_or(|a| a == attempt)
            })
            .ok_or_else(|| {
                ExecutorError::Script(format!(
                    "no response for attempt {attempt} with jdk {}",
                    request.jdk
                ))
            })?;
        let budget = request.budget.as_secs_f64();
        let timed_out = response.duration > budget;
        Ok(BuildOutcome {
            exit_code: if timed_out {
                TIMEOUT_EXIT
            } else {
                response.exit_code
            },
            duration: response.duration.min(budget),
            log: response.log.clone(),
            produced_files: if timed_out {
                Vec::new()
            } else {
                response.produced_files.clone()
            },
            executor: ExecutorKind::ScriptedFixture,
            timed_out,
        })
    }
}

/// Runs the command with `sh -c` in the working copy.
///
/// The JDK is taken from `JAVA_HOME_<major>` (or `JAVA_HOME_<major>_X64`) when
/// set; otherwise whatever `java` is on the path is used.
#[derive(Debug, Clone, Copy, Default)]
pub struct LocalShell;

fn java_home_for(jdk: &str) -> Option<PathBuf> {
    [format!("JAVA_HOME_{jdk}"), format!("JAVA_HOME_{jdk}_X64")]
        .iter()
        .find_map(std::env::var_os)
        .map(PathBuf::from)
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        buf
    })
}

/// Files under `target/` or `build/libs/` anywhere in the tree.
pub fn collect_outputs(workdir: &Path) -> Vec<String> {
    let mut files: Vec<String> = walkdir::WalkDir::new(workdir)
        .into_iter()
        .filter_entry(|e| e.file_name() != ".git")
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .filter_map(|e| {
            let rel = e.path().strip_prefix(workdir).ok()?;
            let rel = rel.to_string_lossy().replace('\\', "/");
            is_output_path(&rel).then_some(rel)
        })
        .collect();
    files.sort();
    files
}

fn is_output_path(rel: &str) -> bool {
    let dirs: Vec<&str> = rel.split('/').collect();
    let dirs = &dirs[..dirs.len().saturating_sub(1)];
    dirs.contains(&"target") || dirs.windows(2).any(|w| w == ["build", "libs"])
}

fn kill_tree(child: &mut std::process::Child) {
    #[cfg(unix)]
    {
        let _ = Command::new("kill")
            .args(["-KILL", "--", &format!("-{}", child.id())])
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status();
    }
    let _ = child.kill();
}

impl Executor for LocalShell {
    fn kind(&self) -> ExecutorKind {
        ExecutorKind::LocalShell
    }

    fn execute(&self, request: &ExecutionRequest<'_>) -> Result<BuildOutcome, ExecutorError> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c")
            .arg(request.command)
            .current_dir(request.workdir)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            // own process group, so a timeout takes the tool's children too
            cmd.process_group(0);
        }
        let mut note = String::new();
        match java_home_for(request.jdk) {
            Some(home) => {
                let mut path = vec![home.join("bin")];
                if let Some(p) = std::env::var_os("PATH") {
                    path.extend(std::env::split_paths(&p));
                }
                cmd.env("JAVA_HOME", &home);
                if let Ok(joined) = std::env::join_paths(path) {
                    cmd.env("PATH", joined);
                }
            }
            None => {
                note = format!(
                    "[local-shell] JAVA_HOME_{} not set, using the java on PATH\n",
                    request.jdk
                )
            }
        }
        let start = Instant::now();
        let mut child = cmd.spawn()?;
        let out = drain(child.stdout.take());
        let err = drain(child.stderr.take());
        let mut timed_out = false;
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break Some(status);
            }
            if start.elapsed() >= request.budget {
                timed_out = true;
                kill_tree(&mut child);
                let _ = child.wait();
                break None;
            }
            thread::sleep(Duration::from_millis(50));
        };
        let duration = start.elapsed().as_secs_f64();
        let mut log = note;
        log.push_str(&String::from_utf8_lossy(&out.join().unwrap_or_default()));
        log.push_str(&String::from_utf8_lossy(&err.join().unwrap_or_default()));
        Ok(BuildOutcome {
            exit_code: match status {
                Some(s) => s.code().unwrap_or(-1),
                None => TIMEOUT_EXIT,
            },
            duration,
            log,
            produced_files: collect_outputs(request.workdir),
            executor: ExecutorKind::LocalShell,
            timed_out,
        })
    }
}

/// Container execution is part of the contract but not provided here.
#[derive(Debug, Clone, Copy, Default)]
pub struct Container;

impl Executor for Container {
    fn kind(&self) -> ExecutorKind {
        ExecutorKind::Container
    }

    fn execute(&self, _request: &ExecutionRequest<'_>) -> Result<BuildOutcome, ExecutorError> {
        Err(ExecutorError::Unavailable(ExecutorKind::Container))
    }
}
