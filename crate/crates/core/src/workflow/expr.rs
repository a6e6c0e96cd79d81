//! Backward resolution of `${{ }}` expressions and shell variables.

use std::cell::RefCell;
use std::fmt;

use indexmap::IndexMap;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::document::{EnvMap, Matrix};

/// Upper bound on the variants a set-valued resolution may carry.
pub const MAX_SET_VARIANTS: usize = 16;
const MAX_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ResolvedValue {
    Literal(String),
    /// Two or more alternatives, e.g. from a matrix axis.
    Set(Vec<String>),
    SymbolicSecret(String),
    SymbolicContext(String),
}

impl ResolvedValue {
    pub fn kind(&self) -> &'static str {
        match self {
            ResolvedValue::Literal(_) => "LITERAL",
            ResolvedValue::Set(_) => "SET",
            ResolvedValue::SymbolicSecret(_) => "SYMBOLIC_SECRET",
            ResolvedValue::SymbolicContext(_) => "SYMBOLIC_CONTEXT",
        }
    }

    pub fn values(&self) -> Vec<String> {
        match self {
            ResolvedValue::Literal(v)
            | ResolvedValue::SymbolicSecret(v)
            | ResolvedValue::SymbolicContext(v) => {
                vec![v.clone()]
            }
            ResolvedValue::Set(vs) => vs.clone(),
        }
    }

    /// Concrete alternatives, if the value is not symbolic.
    pub fn concrete(&self) -> Option<Vec<String>> {
        match self {
            ResolvedValue::Literal(v) => Some(vec![v.clone()]),
            ResolvedValue::Set(vs) => Some(vs.clone()),
            _ => None,
        }
    }

    pub fn is_symbolic(&self) -> bool {
        self.concrete().is_none()
    }

    /// Build a value from alternatives: one becomes a literal, many a set.
    fn from_alternatives(
        mut values: Vec<String>,
        origin: &str,
        ctx: &ExprContext<'_>,
    ) -> ResolvedValue {
        let mut seen = std::collections::HashSet::new();
        values.retain(|v| seen.insert(v.clone()));
        match values.len() {
            0 => ResolvedValue::SymbolicContext(origin.to_owned()),
            1 => ResolvedValue::Literal(values.remove(0)),
            n if n > MAX_SET_VARIANTS => {
                ctx.note(format!(
                    "`{origin}` expands to {n} variants (limit {MAX_SET_VARIANTS}); left symbolic"
                ));
                ResolvedValue::SymbolicContext(origin.to_owned())
            }
            _ => ResolvedValue::Set(values),
        }
    }
}

impl fmt::Display for ResolvedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResolvedValue::Literal(v) => f.write_str(v),
            ResolvedValue::Set(vs) => write!(f, "{{{}}}", vs.join(", ")),
            ResolvedValue::SymbolicSecret(n) => write!(f, "secrets.{n}"),
            ResolvedValue::SymbolicContext(p) => write!(f, "<{p}>"),
        }
    }
}

impl Serialize for ResolvedValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("ResolvedValue", 2)?;
        s.serialize_field("kind", self.kind())?;
        s.serialize_field("values", &self.values())?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for ResolvedValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            kind: String,
            values: Vec<String>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let one = |mut v: Vec<String>| {
            if v.len() == 1 {
                Ok(v.remove(0))
            } else {
                Err(serde::de::Error::custom(format!(
                    "{} takes exactly one value",
                    raw.kind
                )))
            }
        };
        match raw.kind.as_str() {
            "LITERAL" => one(raw.values).map(ResolvedValue::Literal),
            "SET" if raw.values.len() >= 2 => Ok(ResolvedValue::Set(raw.values)),
            "SET" => Err(serde::de::Error::custom("SET needs at least two values")),
            "SYMBOLIC_SECRET" => one(raw.values).map(ResolvedValue::SymbolicSecret),
            "SYMBOLIC_CONTEXT" => one(raw.values).map(ResolvedValue::SymbolicContext),
            other => Err(serde::de::Error::unknown_variant(
                other,
                &["LITERAL", "SET", "SYMBOLIC_SECRET", "SYMBOLIC_CONTEXT"],
            )),
        }
    }
}

/// Declarations visible at one point of a workflow, innermost first.
#[derive(Debug, Default)]
pub struct ExprContext<'a> {
    /// Shell assignments preceding the command, latest last.
    pub shell: &'a [(String, String)],
    pub step_env: Option<&'a EnvMap>,
    pub job_env: Option<&'a EnvMap>,
    pub workflow_env: Option<&'a EnvMap>,
    pub matrix: Option<&'a Matrix>,
    pub inputs: Option<&'a IndexMap<String, Option<String>>>,
    notes: RefCell<Vec<String>>,
}

impl<'a> ExprContext<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_shell(mut self, shell: &'a [(String, String)]) -> Self {
        self.shell = shell;
        self
    }

    pub fn with_envs(
        mut self,
        step: Option<&'a EnvMap>,
        job: Option<&'a EnvMap>,
        workflow: Option<&'a EnvMap>,
    ) -> Self {
        self.step_env = step;
        self.job_env = job;
        self.workflow_env = workflow;
        self
    }

    pub fn with_matrix(mut self, matrix: &'a Matrix) -> Self {
        self.matrix = Some(matrix);
        self
    }

    pub fn with_inputs(mut self, inputs: &'a IndexMap<String, Option<String>>) -> Self {
        self.inputs = Some(inputs);
        self
    }

    /// Diagnostics raised while resolving.
    pub fn take_notes(&self) -> Vec<String> {
        std::mem::take(&mut self.notes.borrow_mut())
    }

    fn note(&self, message: String) {
        self.notes.borrow_mut().push(message);
    }

    /// Find `name` starting at scope `from` (0 shell, 1 step, 2 job, 3 workflow).
    fn lookup(&self, name: &str, from: usize) -> Option<(usize, &'a str)> {
        if from == 0 {
            if let Some((_, v)) = self.shell.iter().rev().find(|(k, _)| k == name) {
                return Some((0, v.as_str()));
            }
        }
        let scopes = [self.step_env, self.job_env, self.workflow_env];
        (from.max(1)..=3).find_map(|level| {
            scopes[level - 1]
                .and_then(|m| m.get(name))
                .map(|v| (level, v.as_str()))
        })
    }
}

/// Resolve an expression or templated string to its possible values.
pub fn resolve_expression(expr: &str, ctx: &ExprContext<'_>) -> ResolvedValue {
    resolve_text(expr.trim(), ctx, 0, 0)
}

/// Substitute every piece of `text` that resolves to a single literal,
/// leaving sets and symbolic references as written.
pub fn interpolate_literals(text: &str, ctx: &ExprContext<'_>) -> String {
    pieces(text)
        .into_iter()
        .map(|piece| match piece {
            Piece::Text(t) => t.to_owned(),
            Piece::Expr { raw, inner } => match resolve_inner(inner, ctx, 0, 0) {
                ResolvedValue::Literal(v) => v,
                _ => raw.to_owned(),
            },
            Piece::Var { raw, name } => match resolve_var(name, ctx, 0, 0) {
                ResolvedValue::Literal(v) => v,
                _ => raw.to_owned(),
            },
        })
        .collect()
}

#[derive(Debug)]
enum Piece<'t> {
    Text(&'t str),
    Expr { raw: &'t str, inner: &'t str },
    Var { raw: &'t str, name: &'t str },
}

fn is_var_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn is_var_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

fn pieces(text: &str) -> Vec<Piece<'_>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut literal_start = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'$' {
            i += 1;
            continue;
        }
        let piece_end;
        let piece;
        if text[i..].starts_with("${{") {
            let Some(close) = text[i + 3..].find("}}") else {
                break;
            };
            piece_end = i + 3 + close + 2;
            piece = Piece::Expr {
                raw: &text[i..piece_end],
                inner: text[i + 3..i + 3 + close].trim(),
            };
        } else if bytes.get(i + 1) == Some(&b'{') {
            let Some(close) = text[i + 2..].find('}') else {
                break;
            };
            let name = &text[i + 2..i + 2 + close];
            if name.is_empty()
                || !is_var_start(name.as_bytes()[0])
                || !name.bytes().all(is_var_char)
            {
                i += 1;
                continue;
            }
            piece_end = i + 2 + close + 1;
            piece = Piece::Var {
                raw: &text[i..piece_end],
                name,
            };
        } else if bytes.get(i + 1).copied().is_some_and(is_var_start) {
            let mut end = i + 2;
            while end < bytes.len() && is_var_char(bytes[end]) {
                end += 1;
            }
            piece_end = end;
            piece = Piece::Var {
                raw: &text[i..end],
                name: &text[i + 1..end],
            };
        } else {
            i += 1;
            continue;
        }
        if literal_start < i {
            out.push(Piece::Text(&text[literal_start..i]));
        }
        out.push(piece);
        i = piece_end;
        literal_start = i;
    }
    if literal_start < text.len() {
        out.push(Piece::Text(&text[literal_start..]));
    }
    out
}

fn resolve_text(text: &str, ctx: &ExprContext<'_>, depth: usize, from: usize) -> ResolvedValue {
    if depth > MAX_DEPTH {
        return ResolvedValue::SymbolicContext(text.to_owned());
    }
    let parts = pieces(text);
    match parts.as_slice() {
        [] => ResolvedValue::Literal(String::new()),
        [Piece::Text(t)] => ResolvedValue::Literal((*t).to_owned()),
        [Piece::Expr { inner, .. }] => resolve_inner(inner, ctx, depth, from),
        [Piece::Var { name, .. }] => resolve_var(name, ctx, depth, from),
        _ => {
            let mut variants = vec![String::new()];
            for piece in &parts {
                let alternatives = match piece {
                    Piece::Text(t) => vec![(*t).to_owned()],
                    Piece::Expr { inner, .. } => {
                        let v = resolve_inner(inner, ctx, depth, from);
                        match v.concrete() {
                            Some(vs) => vs,
                            None => return v,
                        }
                    }
                    Piece::Var { name, .. } => {
                        let v = resolve_var(name, ctx, depth, from);
                        match v.concrete() {
                            Some(vs) => vs,
                            None => return v,
                        }
                    }
                };
                if variants.len() * alternatives.len() > MAX_SET_VARIANTS {
                    ctx.note(format!(
                        "`{text}` expands past {MAX_SET_VARIANTS} variants; left symbolic"
                    ));
                    return ResolvedValue::SymbolicContext(text.to_owned());
                }
                variants = variants
                    .iter()
                    .flat_map(|prefix| alternatives.iter().map(move |alt| format!("{prefix}{alt}")))
                    .collect();
            }
            ResolvedValue::from_alternatives(variants, text, ctx)
        }
    }
}

fn resolve_env(
    name: &str,
    ctx: &ExprContext<'_>,
    depth: usize,
    from: usize,
    origin: &str,
) -> ResolvedValue {
    match ctx.lookup(name, from) {
        // A declaration's own value is resolved against the scopes outside it.
        Some((level, value)) => resolve_text(value, ctx, depth + 1, level + 1),
        None => ResolvedValue::SymbolicContext(origin.to_owned()),
    }
}

fn resolve_var(name: &str, ctx: &ExprContext<'_>, depth: usize, from: usize) -> ResolvedValue {
    resolve_env(name, ctx, depth, from, &format!("env.{name}"))
}

fn strip_quotes(inner: &str) -> Option<&str> {
    inner
        .strip_prefix('\'')
        .and_then(|s| s.strip_suffix('\''))
        .or_else(|| inner.strip_prefix('"').and_then(|s| s.strip_suffix('"')))
}

fn resolve_inner(inner: &str, ctx: &ExprContext<'_>, depth: usize, from: usize) -> ResolvedValue {
    let inner = inner.trim();
    if let Some(lit) = strip_quotes(inner) {
        return ResolvedValue::Literal(lit.replace("''", "'"));
    }
    if !inner.is_empty() && inner.parse::<f64>().is_ok() {
        return ResolvedValue::Literal(inner.to_owned());
    }
    let simple_path = inner
        .bytes()
        .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'));
    if !simple_path {
        return ResolvedValue::SymbolicContext(inner.to_owned());
    }
    let (head, rest) = inner.split_once('.').unwrap_or((inner, ""));
    match head {
        "matrix" if !rest.is_empty() => {
            let Some(values) = ctx.matrix.and_then(|m| m.axes.get(rest)) else {
                return ResolvedValue::SymbolicContext(inner.to_owned());
            };
            let mut alternatives = Vec::new();
            for value in values {
                match resolve_text(value, ctx, depth + 1, from).concrete() {
                    Some(vs) => alternatives.extend(vs),
                    None => return ResolvedValue::SymbolicContext(inner.to_owned()),
                }
            }
            ResolvedValue::from_alternatives(alternatives, inner, ctx)
        }
        "env" if !rest.is_empty() => resolve_env(rest, ctx, depth, from.max(1), inner),
        "secrets" if !rest.is_empty() => ResolvedValue::SymbolicSecret(rest.to_owned()),
        "inputs" if !rest.is_empty() => match ctx.inputs.and_then(|i| i.get(rest)) {
            Some(Some(default)) => resolve_text(default, ctx, depth + 1, from),
            _ => ResolvedValue::SymbolicContext(inner.to_owned()),
        },
        _ => ResolvedValue::SymbolicContext(inner.to_owned()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> EnvMap {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    fn matrix(key: &str, values: &[&str]) -> Matrix {
        let mut m = Matrix::default();
        m.axes.insert(
            key.to_owned(),
            values.iter().map(|v| v.to_string()).collect(),
        );
        m
    }

    #[test]
    fn matrix_axis_becomes_set() {
        let m = matrix("java", &["17", "21"]);
        let ctx = ExprContext::new().with_matrix(&m);
        assert_eq!(
            resolve_expression("${{ matrix.java }}", &ctx),
            ResolvedValue::Set(vec!["17".into(), "21".into()])
        );
        let one = matrix("java", &["11"]);
        let ctx = ExprContext::new().with_matrix(&one);
        assert_eq!(
            resolve_expression("${{matrix.java}}", &ctx),
            ResolvedValue::Literal("11".into())
        );
    }

    #[test]
    fn secrets_context_and_literals() {
        let ctx = ExprContext::new();
        assert_eq!(
            resolve_expression("${{ secrets.GPG_KEY_ID }}", &ctx),
            ResolvedValue::SymbolicSecret("GPG_KEY_ID".into())
        );
        assert_eq!(
            resolve_expression("${{ github.ref_name }}", &ctx),
            ResolvedValue::SymbolicContext("github.ref_name".into())
        );
        assert_eq!(
            resolve_expression("temurin", &ctx),
            ResolvedValue::Literal("temurin".into())
        );
        assert_eq!(
            resolve_expression("${{ 'x' }}", &ctx),
            ResolvedValue::Literal("x".into())
        );
    }

    #[test]
    fn env_lookup_prefers_innermost_scope() {
        let step = env(&[("V", "step")]);
        let job = env(&[("V", "job"), ("J", "only-job")]);
        let wf = env(&[("V", "wf"), ("W", "${{ env.J }}")]);
        let ctx = ExprContext::new().with_envs(Some(&step), Some(&job), Some(&wf));
        assert_eq!(
            resolve_expression("${{ env.V }}", &ctx),
            ResolvedValue::Literal("step".into())
        );
        assert_eq!(
            resolve_expression("$V", &ctx),
            ResolvedValue::Literal("step".into())
        );
        assert_eq!(
            resolve_expression("${J}", &ctx),
            ResolvedValue::Literal("only-job".into())
        );
        // workflow-level W refers to J which only exists in an inner scope
        assert_eq!(
            resolve_expression("${{ env.W }}", &ctx),
            ResolvedValue::SymbolicContext("env.J".into())
        );
        assert_eq!(
            resolve_expression("$MISSING", &ctx),
            ResolvedValue::SymbolicContext("env.MISSING".into())
        );
    }

    #[test]
    fn shell_assignments_shadow_env() {
        let shell = vec![("V".to_owned(), "shell".to_owned())];
        let step = env(&[("V", "step")]);
        let ctx = ExprContext::new()
            .with_shell(&shell)
            .with_envs(Some(&step), None, None);
        assert_eq!(
            resolve_expression("$V", &ctx),
            ResolvedValue::Literal("shell".into())
        );
        assert_eq!(
            resolve_expression("${{ env.V }}", &ctx),
            ResolvedValue::Literal("step".into())
        );
    }

    #[test]
    fn self_reference_terminates() {
        let step = env(&[("A", "${{ env.A }}")]);
        let job = env(&[("A", "base")]);
        let ctx = ExprContext::new().with_envs(Some(&step), Some(&job), None);
        assert_eq!(
            resolve_expression("${{ env.A }}", &ctx),
            ResolvedValue::Literal("base".into())
        );
    }

    #[test]
    fn input_defaults() {
        let mut inputs = IndexMap::new();
        inputs.insert("java".to_owned(), Some("11".to_owned()));
        inputs.insert("tag".to_owned(), None);
        let ctx = ExprContext::new().with_inputs(&inputs);
        assert_eq!(
            resolve_expression("${{ inputs.java }}", &ctx),
            ResolvedValue::Literal("11".into())
        );
        assert_eq!(
            resolve_expression("${{ inputs.tag }}", &ctx),
            ResolvedValue::SymbolicContext("inputs.tag".into())
        );
    }

    #[test]
    fn templates_expand_and_cap() {
        let m = matrix("java", &["17", "21"]);
        let ctx = ExprContext::new().with_matrix(&m);
        assert_eq!(
            resolve_expression("jdk-${{ matrix.java }}", &ctx),
            ResolvedValue::Set(vec!["jdk-17".into(), "jdk-21".into()])
        );
        assert_eq!(
            interpolate_literals("-Pv=${{ matrix.java }}", &ctx),
            "-Pv=${{ matrix.java }}"
        );

        let values: Vec<String> = (0..17).map(|i| i.to_string()).collect();
        let mut big = Matrix::default();
        big.axes.insert("n".into(), values);
        let ctx = ExprContext::new().with_matrix(&big);
        assert!(resolve_expression("${{ matrix.n }}", &ctx).is_symbolic());
        assert_eq!(ctx.take_notes().len(), 1);

        let four = matrix("a", &["1", "2", "3", "4"]);
        let ctx = ExprContext::new().with_matrix(&four);
        let r = resolve_expression("${{ matrix.a }}${{ matrix.a }}", &ctx);
        assert_eq!(r.values().len(), 16);
        let r = resolve_expression("${{ matrix.a }}${{ matrix.a }}${{ matrix.a }}", &ctx);
        assert!(r.is_symbolic());
    }

    #[test]
    fn serde_shape() {
        let v = ResolvedValue::Set(vec!["17".into(), "21".into()]);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"{"kind":"SET","values":["17","21"]}"#);
        assert_eq!(serde_json::from_str::<ResolvedValue>(&json).unwrap(), v);
        assert!(serde_json::from_str::<ResolvedValue>(r#"{"kind":"SET","values":["1"]}"#).is_err());
    }
}
