//! GitHub Actions workflow documents.

use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_yaml::{Mapping, Value};

use super::Diagnostic;

pub const WORKFLOW_DIR: &str = ".github/workflows";

pub type EnvMap = IndexMap<String, String>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matrix {
    pub axes: IndexMap<String, Vec<String>>,
    /// Set when the whole matrix is an expression such as `${{ fromJson(..) }}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    pub name: Option<String>,
    pub id: Option<String>,
    pub uses: Option<String>,
    pub with: EnvMap,
    pub run: Option<String>,
    pub env: EnvMap,
    pub if_cond: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub name: Option<String>,
    pub needs: Vec<String>,
    pub if_cond: Option<String>,
    pub env: EnvMap,
    pub matrix: Matrix,
    /// Reusable workflow reference (`jobs.<id>.uses`).
    pub uses: Option<String>,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workflow {
    /// Path relative to the repository root, `/`-separated.
    pub path: String,
    pub name: Option<String>,
    pub on: Option<Value>,
    pub env: EnvMap,
    /// Declared `workflow_call` / `workflow_dispatch` inputs and their defaults.
    pub inputs: IndexMap<String, Option<String>>,
    pub jobs: Vec<Job>,
}

impl Workflow {
    pub fn job(&self, id: &str) -> Option<&Job> {
        self.jobs.iter().find(|j| j.id == id)
    }
}

fn scalar(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Tagged(t) => scalar(&t.value),
        _ => None,
    }
}

fn get<'a>(map: &'a Mapping, key: &str) -> Option<&'a Value> {
    map.get(Value::String(key.to_owned()))
}

fn get_str(map: &Mapping, key: &str) -> Option<String> {
    get(map, key).and_then(scalar)
}

fn string_map(value: Option<&Value>, what: &str) -> Result<EnvMap, String> {
    match value {
        None | Some(Value::Null) => Ok(EnvMap::new()),
        Some(Value::Mapping(m)) => Ok(m
            .iter()
            .filter_map(|(k, v)| Some((scalar(k)?, scalar(v).unwrap_or_default())))
            .collect()),
        // `env: ${{ fromJson(...) }}` cannot be resolved statically.
        Some(Value::String(_)) => Ok(EnvMap::new()),
        Some(_) => Err(format!("`{what}` must be a mapping")),
    }
}

fn string_list(value: Option<&Value>) -> Vec<String> {
    match value {
        Some(Value::Sequence(items)) => items.iter().filter_map(scalar).collect(),
        Some(v) => scalar(v).into_iter().collect(),
        None => Vec::new(),
    }
}

fn parse_matrix(job: &Mapping) -> Result<Matrix, String> {
    let Some(strategy) = get(job, "strategy") else {
        return Ok(Matrix::default());
    };
    let Some(matrix) = strategy.as_mapping().and_then(|s| get(s, "matrix")) else {
        return Ok(Matrix::default());
    };
    let map = match matrix {
        Value::Mapping(m) => m,
        Value::String(s) => {
            return Ok(Matrix {
                axes: IndexMap::new(),
                expression: Some(s.clone()),
            })
        }
        _ => return Err("`strategy.matrix` must be a mapping".to_owned()),
    };
    let mut out = Matrix::default();
    for (k, v) in map {
        let Some(key) = scalar(k) else { continue };
        match key.as_str() {
            "exclude" => {}
            "include" => {
                for entry in v.as_sequence().into_iter().flatten() {
                    for (ik, iv) in entry.as_mapping().into_iter().flatten() {
                        if let (Some(ik), Some(iv)) = (scalar(ik), scalar(iv)) {
                            let axis = out.axes.entry(ik).or_default();
                            if !axis.contains(&iv) {
                                axis.push(iv);
                            }
                        }
                    }
                }
            }
            _ => {
                let values = string_list(Some(v));
                let axis = out.axes.entry(key).or_default();
                for value in values {
                    if !axis.contains(&value) {
                        axis.push(value);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn parse_step(index: usize, value: &Value) -> Result<Step, String> {
    let map = value
        .as_mapping()
        .ok_or_else(|| format!("step {index} must be a mapping"))?;
    Ok(Step {
        index,
        name: get_str(map, "name"),
        id: get_str(map, "id"),
        uses: get_str(map, "uses"),
        with: string_map(get(map, "with"), "with")?,
        run: get_str(map, "run"),
        env: string_map(get(map, "env"), "env")?,
        if_cond: get_str(map, "if"),
    })
}

fn parse_job(id: String, value: &Value) -> Result<Job, String> {
    let map = value
        .as_mapping()
        .ok_or_else(|| format!("job `{id}` must be a mapping"))?;
    let steps = match get(map, "steps") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Sequence(items)) => items
            .iter()
            .enumerate()
            .map(|(i, s)| parse_step(i, s))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(format!("`jobs.{id}.steps` must be a sequence")),
    };
    Ok(Job {
        name: get_str(map, "name"),
        needs: string_list(get(map, "needs")),
        if_cond: get_str(map, "if"),
        env: string_map(get(map, "env"), "env")?,
        matrix: parse_matrix(map)?,
        uses: get_str(map, "uses"),
        steps,
        id,
    })
}

/// The `on` value; YAML 1.1 readers turn the key into `true`.
fn trigger_value(map: &Mapping) -> Option<Value> {
    get(map, "on")
        .or_else(|| map.get(Value::Bool(true)))
        .cloned()
}

fn declared_inputs(on: Option<&Value>) -> IndexMap<String, Option<String>> {
    let mut out = IndexMap::new();
    let Some(Value::Mapping(events)) = on else {
        return out;
    };
    for event in ["workflow_call", "workflow_dispatch"] {
        let Some(inputs) = get(events, event)
            .and_then(Value::as_mapping)
            .and_then(|e| get(e, "inputs"))
            .and_then(Value::as_mapping)
        else {
            continue;
        };
        for (name, spec) in inputs {
            let Some(name) = scalar(name) else { continue };
            let default = spec.as_mapping().and_then(|s| get_str(s, "default"));
            out.entry(name).or_insert(default);
        }
    }
    out
}

/// Parse one workflow file's text.
pub fn parse_workflow(path: &str, text: &str) -> Result<Workflow, String> {
    let doc: Value = serde_yaml::from_str(text).map_err(|e| e.to_string())?;
    let map = doc
        .as_mapping()
        .ok_or_else(|| "workflow must be a mapping".to_owned())?;
    let on = trigger_value(map);
    let jobs = match get(map, "jobs") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Mapping(jobs)) => jobs
            .iter()
            .filter_map(|(k, v)| scalar(k).map(|k| (k, v)))
            .map(|(k, v)| parse_job(k, v))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err("`jobs` must be a mapping".to_owned()),
    };
    Ok(Workflow {
        path: path.to_owned(),
        name: get_str(map, "name"),
        inputs: declared_inputs(on.as_ref()),
        on,
        env: string_map(get(map, "env"), "env")?,
        jobs,
    })
}

/// Load every `.github/workflows/*.yml|yaml` under `repo_root`, sorted by path.
///
/// Files that fail to parse are reported and skipped.
pub fn parse_workflows(repo_root: &Path) -> (Vec<Workflow>, Vec<Diagnostic>) {
    let mut workflows = Vec::new();
    let mut diagnostics = Vec::new();
    let dir = repo_root.join(WORKFLOW_DIR);
    let Ok(entries) = fs::read_dir(&dir) else {
        return (workflows, diagnostics);
    };
    let mut files: Vec<_> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("yml" | "yaml")))
        .collect();
    files.sort();
    for file in files {
        let name = file.file_name().unwrap_or_default().to_string_lossy();
        let rel = format!("{WORKFLOW_DIR}/{name}");
        let parsed = fs::read(&file)
            .map_err(|e| e.to_string())
            .and_then(|bytes| parse_workflow(&rel, &String::from_utf8_lossy(&bytes)));
        match parsed {
            Ok(wf) => workflows.push(wf),
            Err(message) => diagnostics.push(Diagnostic::malformed_yaml(&rel, message)),
        }
    }
    (workflows, diagnostics)
}
