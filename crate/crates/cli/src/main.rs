mod live;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use reprospec::buildspec::{parse_buildspec, AnalysisStore, BuildSpec, BuildSpecError};
use reprospec::coordinates::{parse_purl, PackageCoordinate};
use reprospec::discovery::{
    DiscoveryError, FixtureMetadataClient, HostAllowlist, Liveness, LivenessProbe, MetadataClient,
    NoProvenance, ProvenanceLookup,
};
use reprospec::pipeline::{
    ArtifactSource, ClientError, Clients, Fixtures, Generation, Overrides, Pipeline, PipelineError,
    RepoCheckout, SourceLocation, TagSource,
};
use reprospec::rebuild::{
    audit_transparency, classify_log, rebuild, Container, DryRun, Executor, ExecutorError,
    FailureCategory, LocalShell, RebuildConfig, RebuildTrace, ScriptedFixture, TransparencyRecord,
};
use reprospec::workflow::{
    analyze_repository, ActionRegistry, CandidateReport, ScoreWeights, Trigger,
};
use serde::Serialize;
use serde_json::json;

const EXIT_CODES: &str = "\
Exit codes:
   0  success
   1  other error
   2  repository not found
   3  no tag matches the version
   4  no workflows in the repository (analyze)
   5  malformed metadata
   6  unsupported package (no Java content)
   7  JDK version unknown
   8  executor unavailable
  10  rebuild: expected artifact missing
  11  rebuild: JDK mismatch
  12  rebuild: missing dependency
  13  rebuild: plugin incompatibility
  14  rebuild: build tool failure
  15  rebuild: JVM crash
  16  rebuild: timed out
  17  rebuild: unsupported tool
  18  rebuild: unknown failure
  64  usage error";

mod code {
    pub const OK: u8 = 0;
    pub const ERROR: u8 = 1;
    pub const REPO_NOT_FOUND: u8 = 2;
    pub const NO_MATCHING_TAG: u8 = 3;
    pub const NO_WORKFLOWS: u8 = 4;
    pub const MALFORMED_METADATA: u8 = 5;
    pub const UNSUPPORTED_PACKAGE: u8 = 6;
    pub const JDK_UNKNOWN: u8 = 7;
    pub const EXECUTOR_UNAVAILABLE: u8 = 8;
    pub const USAGE: u8 = 64;
}

fn category_code(c: &FailureCategory) -> u8 {
    match c {
        FailureCategory::Success => code::OK,
        FailureCategory::MissingArtifact => 10,
        FailureCategory::JdkMismatch { .. } => 11,
        FailureCategory::MissingDependency => 12,
        FailureCategory::PluginIncompatibility => 13,
        FailureCategory::ToolExecution { .. } => 14,
        FailureCategory::JvmCritical => 15,
        FailureCategory::Timeout => 16,
        FailureCategory::UnsupportedTool => 17,
        FailureCategory::Unknown => 18,
    }
}

#[derive(Parser)]
#[command(
    name = "reprospec",
    version,
    about = "Find the source of a Maven artifact, infer its build from CI workflows, and rebuild it",
    after_help = EXIT_CODES
)]
struct Cli {
    #[command(flatten)]
    config: CliConfig,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Human,
    Json,
}

#[derive(Debug, Args)]
struct CliConfig {
    /// Directory of the analysis store.
    #[arg(
        long = "store",
        env = "REPROSPEC_STORE",
        default_value = ".reprospec-store",
        global = true
    )]
    store_root: PathBuf,
    /// Serve artifacts, tags, metadata and checkouts from this directory.
    #[arg(long = "fixtures", global = true)]
    fixtures_root: Option<PathBuf>,
    /// Never touch the network.
    #[arg(long, global = true)]
    offline: bool,
    #[arg(long, value_enum, default_value_t = Output::Human, global = true)]
    output: Output,
    /// JDK major version to use instead of the detected one.
    #[arg(long = "jdk", global = true)]
    jdk_override: Option<String>,
    /// Wall-clock budget per build, in seconds.
    #[arg(long = "budget", default_value_t = 3600, global = true)]
    budget_seconds: u64,
    /// Extra VCS host to accept besides github.com, gitlab.com and bitbucket.org.
    #[arg(long = "allow-host", global = true)]
    allow_hosts: Vec<String>,
    /// JSON list of extra action models.
    #[arg(long = "actions", global = true)]
    actions: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Locate the repository and tag a package was built from.
    FindSource {
        purl: String,
        #[command(flatten)]
        overrides: SourceOverrides,
    },
    /// Rank the build commands found in a checked-out repository's workflows.
    Analyze { repo_path: PathBuf },
    /// Write `<artifact>-<version>.buildspec` for a package and store the analysis.
    GenBuildspec {
        /// Package URL; omit with --batch.
        #[arg(required_unless_present = "batch")]
        purl: Option<String>,
        #[command(flatten)]
        overrides: SourceOverrides,
        /// Directory to write buildspecs into.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// File with one package URL per line.
        #[arg(long, conflicts_with = "purl")]
        batch: Option<PathBuf>,
        /// Packages processed concurrently in batch mode.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: u16,
    },
    /// Run a buildspec and report what happened.
    Rebuild {
        buildspec: PathBuf,
        #[arg(long, value_enum, default_value_t = ExecutorChoice::DryRun)]
        executor: ExecutorChoice,
        /// Scripted responses for `--executor scripted`.
        #[arg(long, required_if_eq("executor", "scripted"))]
        script: Option<PathBuf>,
        /// Working copy to build in.
        #[arg(long, default_value = ".")]
        workdir: PathBuf,
        /// Retry with suggested fixes (at most two).
        #[arg(long)]
        auto_fix: bool,
        /// Packaging of the artifact; `pom` expects a .pom instead of a .jar.
        #[arg(long)]
        packaging: Option<String>,
    },
    /// Classify how transparently a release was built.
    AuditTransparency { metadata: PathBuf },
    /// Categorize a build failure from its log ("-" reads stdin).
    ClassifyLog { log: PathBuf },
}

#[derive(Debug, Args)]
struct SourceOverrides {
    /// Use this repository instead of discovering one.
    #[arg(long)]
    repo: Option<String>,
    /// Build this tag instead of matching one.
    #[arg(long)]
    tag: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExecutorChoice {
    DryRun,
    Scripted,
    Local,
    Container,
}

/// Clients that only fail, for offline runs without fixtures.
struct Offline;

impl ArtifactSource for Offline {
    fn pom(&self, _: &PackageCoordinate) -> Result<Option<String>, ClientError> {
        Ok(None)
    }
    fn manifest(
        &self,
        _: &PackageCoordinate,
    ) -> Result<Option<reprospec::buildspec::Manifest>, ClientError> {
        Ok(None)
    }
}

impl TagSource for Offline {
    fn tags(
        &self,
        repo_url: &str,
    ) -> Result<std::collections::BTreeMap<String, String>, ClientError> {
        Err(ClientError(format!(
            "offline: cannot list tags of {repo_url} without --fixtures"
        )))
    }
}

impl RepoCheckout for Offline {
    fn checkout(&self, repo_url: &str, _: &str, _: &Path) -> Result<PathBuf, ClientError> {
        Err(ClientError(format!(
            "offline: cannot check out {repo_url} without --fixtures"
        )))
    }
}

impl LivenessProbe for Offline {
    fn probe(&self, _: &str) -> Liveness {
        Liveness::Unknown
    }
}

fn load_registry(config: &CliConfig) -> anyhow::Result<ActionRegistry> {
    match &config.actions {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| p.display().to_string())?;
            ActionRegistry::from_json(&text)
                .with_context(|| format!("action models in {}", p.display()))
        }
        None => Ok(ActionRegistry::builtin()),
    }
}

/// Wire name of a unit enum value, e.g. `POM_SCM`.
fn enum_name<T: Serialize>(value: &T) -> String {
    serde_json::to_value(value)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

struct Backend {
    artifacts: Box<dyn ArtifactSource>,
    tags: Box<dyn TagSource>,
    checkout: Box<dyn RepoCheckout>,
    provenance: Box<dyn ProvenanceLookup>,
    metadata: Box<dyn MetadataClient>,
    liveness: Box<dyn LivenessProbe>,
    allowlist: HostAllowlist,
    registry: ActionRegistry,
}

impl Backend {
    fn new(config: &CliConfig) -> anyhow::Result<Self> {
        let allowlist = HostAllowlist::with_extras(&config.allow_hosts);
        let registry = load_registry(config)?;
        if let Some(root) = &config.fixtures_root {
            let fx = Fixtures::new(root, allowlist.clone());
            return Ok(Backend {
                metadata: Box::new(fx.metadata_client()?),
                liveness: Box::new(fx.liveness()?),
                artifacts: Box::new(fx.clone()),
                tags: Box::new(fx.clone()),
                checkout: Box::new(fx.clone()),
                provenance: Box::new(fx),
                allowlist,
                registry,
            });
        }
        if config.offline {
            return Ok(Backend {
                artifacts: Box::new(Offline),
                tags: Box::new(Offline),
                checkout: Box::new(Offline),
                provenance: Box::new(NoProvenance),
                metadata: Box::new(FixtureMetadataClient::unavailable()),
                liveness: Box::new(Offline),
                allowlist,
                registry,
            });
        }
        Ok(Backend {
            artifacts: Box::new(live::MavenCentral),
            tags: Box::new(live::Git),
            checkout: Box::new(live::Git),
            provenance: Box::new(NoProvenance),
            metadata: Box::new(live::DepsDev),
            liveness: Box::new(live::Git),
            allowlist,
            registry,
        })
    }

    fn pipeline(&self, config: &CliConfig) -> Pipeline<'_> {
        let mut p = Pipeline::new(
            Clients {
                artifacts: self.artifacts.as_ref(),
                tags: self.tags.as_ref(),
                checkout: self.checkout.as_ref(),
                provenance: self.provenance.as_ref(),
                metadata: self.metadata.as_ref(),
                liveness: self.liveness.as_ref(),
                allowlist: &self.allowlist,
            },
            config.store_root.join("work"),
        );
        p.registry = self.registry.clone();
        p
    }
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    name: &'static str,
    message: String,
    details: Vec<String>,
}

impl Failure {
    fn new(code: u8, name: &'static str, message: impl Into<String>) -> Self {
        Failure {
            code,
            name,
            message: message.into(),
            details: Vec::new(),
        }
    }

    fn report(&self, output: Output) {
        match output {
            Output::Json => print_json(&json!({
                "error": self.name,
                "message": self.message,
                "details": self.details,
                "exit_code": self.code,
            })),
            Output::Human => {
                eprintln!("error: {}", self.message);
                for d in &self.details {
                    eprintln!("  {d}");
                }
            }
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::new(code::ERROR, "ERROR", format!("{e:#}"))
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let message = e.to_string();
        match e {
            PipelineError::Purl(_) => Failure::new(code::USAGE, "MALFORMED_PURL", message),
            PipelineError::Discovery(DiscoveryError::RepoNotFound { tried, .. }) => Failure {
                details: tried,
                ..Failure::new(code::REPO_NOT_FOUND, "REPO_NOT_FOUND", message)
            },
            PipelineError::Discovery(
                DiscoveryError::MalformedPom(_) | DiscoveryError::MalformedProvenance(_),
            ) => Failure::new(code::MALFORMED_METADATA, "MALFORMED_METADATA", message),
            PipelineError::NoMatchingTag { .. }
            | PipelineError::BuildSpec(BuildSpecError::MissingRevision) => {
                Failure::new(code::NO_MATCHING_TAG, "NO_MATCHING_TAG", message)
            }
            PipelineError::BuildSpec(BuildSpecError::UnsupportedPackage(_)) => {
                Failure::new(code::UNSUPPORTED_PACKAGE, "UNSUPPORTED_PACKAGE", message)
            }
            PipelineError::BuildSpec(BuildSpecError::JdkUnknown) => {
                Failure::new(code::JDK_UNKNOWN, "JDK_UNKNOWN", message)
            }
            _ => Failure::new(code::ERROR, "ERROR", message),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn print_json<T: Serialize + ?Sized>(value: &T) {
    let text = serde_json::to_string_pretty(value).expect("serializable output");
    // A reader that stops early (`| head`) is not an error.
    if let Err(e) = writeln!(io::stdout().lock(), "{text}") {
        if e.kind() != io::ErrorKind::BrokenPipe {
            eprintln!("error: writing output: {e}");
        }
    }
}

fn coordinate(purl: &str) -> Result<PackageCoordinate, Failure> {
    parse_purl(purl.trim()).map_err(|e| PipelineError::from(e).into())
}

fn overrides(config: &CliConfig, o: &SourceOverrides) -> Overrides {
    Overrides {
        repo: o.repo.clone(),
        tag: o.tag.clone(),
        jdk: config.jdk_override.clone(),
    }
}

fn find_source(config: &CliConfig, purl: &str, o: &SourceOverrides) -> CmdResult {
    let backend = Backend::new(config)?;
    let c = coordinate(purl)?;
    let location: SourceLocation = backend
        .pipeline(config)
        .find_source(&c, &overrides(config, o))?;
    match config.output {
        Output::Json => print_json(&location),
        Output::Human => {
            println!("repository  {}", location.resolution.repo_url);
            println!("via         {}", enum_name(&location.resolution.via));
            let commit = location
                .tag_match
                .as_ref()
                .and_then(|m| m.commit.clone())
                .or_else(|| location.resolution.pinned_commit.clone());
            match &location.tag_match {
                Some(m) => println!("tag         {}", m.tag()),
                None => println!("revision    {}", location.revision),
            }
            println!("commit      {}", commit.as_deref().unwrap_or("-"));
        }
    }
    Ok(code::OK)
}

fn trigger_label(t: &Trigger) -> String {
    match t {
        Trigger::Release { types } => format!("RELEASE[{}]", types.join(",")),
        Trigger::TagPush { patterns } => format!("TAG_PUSH[{}]", patterns.join(",")),
        Trigger::Other { name } => format!("OTHER({name})"),
        other => serde_json::to_value(other)
            .ok()
            .and_then(|v| v["event"].as_str().map(str::to_owned))
            .unwrap_or_default(),
    }
}

fn print_report_human(report: &CandidateReport) {
    println!(
        "{} workflow(s), {} candidate(s)",
        report.workflows.len(),
        report.candidates.len()
    );
    for c in &report.candidates {
        println!("{}  {}", c.confidence, c.command_text());
        println!("      at {}", c.location);
        let triggers: Vec<_> = c.triggers.iter().map(trigger_label).collect();
        if !triggers.is_empty() {
            println!("      triggers: {}", triggers.join(" "));
        }
        if let Some(j) = &c.jdk_facts {
            match &j.distribution {
                Some(d) => println!("      jdk: {} ({d})", j.version),
                None => println!("      jdk: {}", j.version),
            }
        }
        if !c.publishing_signals.is_empty() {
            let signals: Vec<_> = c.publishing_signals.iter().map(enum_name).collect();
            println!("      signals: {}", signals.join(" "));
        }
    }
    for d in &report.diagnostics {
        eprintln!("warning: {d}");
    }
}

fn analyze(config: &CliConfig, repo: &Path) -> CmdResult {
    if !repo.is_dir() {
        return Err(Failure::new(
            code::ERROR,
            "ERROR",
            format!("{} is not a directory", repo.display()),
        ));
    }
    let registry = load_registry(config)?;
    let analysis = analyze_repository(repo, &registry, &ScoreWeights::default());
    let report = analysis.report();
    match config.output {
        Output::Json => print_json(&report),
        Output::Human => print_report_human(&report),
    }
    Ok(if analysis.has_workflows() {
        code::OK
    } else {
        code::NO_WORKFLOWS
    })
}

#[derive(Serialize)]
struct Written<'a> {
    path: String,
    spec: &'a BuildSpec,
    dropped: &'a [String],
}

fn write_generation(
    config: &CliConfig,
    g: &Generation,
    out_dir: &Path,
    store: &Mutex<AnalysisStore>,
) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(out_dir).with_context(|| out_dir.display().to_string())?;
    let path = out_dir.join(g.record.chosen.file_name());
    fs::write(&path, &g.buildspec).with_context(|| path.display().to_string())?;
    store
        .lock()
        .map_err(|_| anyhow!("store lock poisoned"))?
        .store(&g.record)
        .with_context(|| format!("storing analysis in {}", config.store_root.display()))?;
    Ok(path)
}

fn gen_buildspec(config: &CliConfig, purl: &str, o: &SourceOverrides, out_dir: &Path) -> CmdResult {
    let backend = Backend::new(config)?;
    let c = coordinate(purl)?;
    let g = backend
        .pipeline(config)
        .generate(&c, &overrides(config, o))?;
    let store = Mutex::new(AnalysisStore::new(&config.store_root));
    let path = write_generation(config, &g, out_dir, &store)?;
    match config.output {
        Output::Json => print_json(&Written {
            path: path.display().to_string(),
            spec: &g.record.chosen,
            dropped: &g.dropped,
        }),
        Output::Human => {
            println!("{}", path.display());
            for w in &g.dropped {
                eprintln!("warning: dropped unresolved word `{w}` from the build command");
            }
        }
    }
    Ok(code::OK)
}

fn gen_batch(
    config: &CliConfig,
    list: &Path,
    o: &SourceOverrides,
    out_dir: &Path,
    jobs: usize,
) -> CmdResult {
    let text = fs::read_to_string(list).with_context(|| list.display().to_string())?;
    let purls: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let backend = Backend::new(config)?;
    let pipeline = backend.pipeline(config);
    let store = Mutex::new(AnalysisStore::new(&config.store_root));
    let results: Vec<Mutex<Option<Result<PathBuf, Failure>>>> =
        purls.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.min(purls.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(purl) = purls.get(i) else { break };
                let result = coordinate(purl).and_then(|c| {
                    let g = pipeline.generate(&c, &overrides(config, o))?;
                    Ok(write_generation(config, &g, out_dir, &store)?)
                });
                *results[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(result);
            });
        }
    });
    let mut exit = code::OK;
    let mut rows = Vec::new();
    for (purl, slot) in purls.iter().zip(results) {
        let result = slot
            .into_inner()
            .unwrap_or_else(|e| e.into_inner())
            .expect("every purl processed");
        match result {
            Ok(path) => {
                rows.push(json!({"purl": purl, "path": path.display().to_string(), "exit_code": 0}))
            }
            Err(f) => {
                if exit == code::OK {
                    exit = f.code;
                }
                rows.push(json!({"purl": purl, "error": f.name, "message": f.message, "exit_code": f.code}));
            }
        }
    }
    match config.output {
        Output::Json => print_json(&rows),
        Output::Human => {
            for r in &rows {
                match r.get("path") {
                    Some(p) => println!(
                        "{}\t{}",
                        r["purl"].as_str().unwrap_or(""),
                        p.as_str().unwrap_or("")
                    ),
                    None => println!(
                        "{}\t{} {}",
                        r["purl"].as_str().unwrap_or(""),
                        r["error"].as_str().unwrap_or(""),
                        r["message"].as_str().unwrap_or("")
                    ),
                }
            }
        }
    }
    Ok(exit)
}

fn print_trace_human(trace: &RebuildTrace) {
    for (i, a) in trace.attempts.iter().enumerate() {
        println!("attempt {}: jdk={} {}", i + 1, a.spec.jdk, a.spec.command);
        println!(
            "  exit {} in {:.1}s -> {}",
            a.outcome.exit_code, a.outcome.duration, a.report.category
        );
        if let Some(v) = &a.validation {
            println!("  validation: {}", v.reason);
        }
        if !a.report.evidence.is_empty() {
            println!("  evidence: {}", a.report.evidence.trim());
        }
        if let Some(f) = &a.fix {
            println!("  fix: {}", serde_json::to_string(f).unwrap_or_default());
        }
    }
    println!("result: {}", trace.final_category());
}

#[allow(clippy::too_many_arguments)]
fn rebuild_cmd(
    config: &CliConfig,
    path: &Path,
    executor: ExecutorChoice,
    script: Option<&Path>,
    workdir: &Path,
    auto_fix: bool,
    packaging: Option<String>,
) -> CmdResult {
    let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
    let mut spec = parse_buildspec(&text).with_context(|| path.display().to_string())?;
    if let Some(jdk) = &config.jdk_override {
        spec.jdk = reprospec::buildspec::normalize_jdk(jdk)
            .ok_or_else(|| {
                Failure::new(
                    code::USAGE,
                    "USAGE",
                    format!("--jdk {jdk} is not a JDK version"),
                )
            })?
            .to_string();
    }
    let executor: Box<dyn Executor> = match executor {
        ExecutorChoice::DryRun => Box::new(DryRun),
        ExecutorChoice::Scripted => {
            let script = script.ok_or_else(|| {
                Failure::new(code::USAGE, "USAGE", "--executor scripted needs --script")
            })?;
            Box::new(ScriptedFixture::from_file(script).map_err(|e| anyhow!(e))?)
        }
        ExecutorChoice::Local => Box::new(LocalShell),
        ExecutorChoice::Container => Box::new(Container),
    };
    let rebuild_config = RebuildConfig {
        budget: Duration::from_secs(config.budget_seconds),
        auto_fix,
        packaging,
        ..Default::default()
    };
    let trace = match rebuild(&spec, executor.as_ref(), workdir, &rebuild_config) {
        Ok(t) => t,
        Err(ExecutorError::Unavailable(kind)) => {
            return Err(Failure::new(
                code::EXECUTOR_UNAVAILABLE,
                "EXECUTOR_UNAVAILABLE",
                format!("executor {kind:?} is not available"),
            ))
        }
        Err(e) => return Err(anyhow!(e).into()),
    };
    let summary = json!({
        "purl": spec.coordinate.render(),
        "result": trace.final_category().name(),
        "attempts": trace.attempts.len(),
        "trace": &trace,
    });
    AnalysisStore::new(&config.store_root)
        .store_outcome(&spec.coordinate.render(), summary.clone())
        .with_context(|| format!("storing outcome in {}", config.store_root.display()))?;
    match config.output {
        Output::Json => print_json(&summary),
        Output::Human => print_trace_human(&trace),
    }
    Ok(category_code(&trace.final_category()))
}

fn audit(config: &CliConfig, path: &Path) -> CmdResult {
    let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
    let record = TransparencyRecord::from_json_str(&text).map_err(|e| {
        Failure::new(
            code::MALFORMED_METADATA,
            "MALFORMED_METADATA",
            format!("{}: {e}", path.display()),
        )
    })?;
    let finding = audit_transparency(&record);
    match config.output {
        Output::Json => print_json(&finding),
        Output::Human => println!("{}", enum_name(&finding.category)),
    }
    Ok(code::OK)
}

fn classify(config: &CliConfig, path: &Path) -> CmdResult {
    let mut bytes = Vec::new();
    if path == Path::new("-") {
        io::stdin()
            .read_to_end(&mut bytes)
            .context("reading stdin")?;
    } else {
        bytes = fs::read(path).with_context(|| path.display().to_string())?;
    }
    let report = classify_log(&String::from_utf8_lossy(&bytes));
    match config.output {
        Output::Json => print_json(&report),
        Output::Human => {
            println!("{}", report.category);
            if !report.evidence.is_empty() {
                println!("evidence: {}", report.evidence.trim());
            }
        }
    }
    Ok(code::OK)
}

fn run(cli: Cli) -> CmdResult {
    let config = &cli.config;
    match &cli.command {
        Cmd::FindSource { purl, overrides } => find_source(config, purl, overrides),
        Cmd::Analyze { repo_path } => analyze(config, repo_path),
        Cmd::GenBuildspec {
            purl,
            overrides,
            out_dir,
            batch,
            jobs,
        } => match (batch, purl) {
            (Some(list), _) => gen_batch(config, list, overrides, out_dir, usize::from(*jobs)),
            (None, Some(purl)) => gen_buildspec(config, purl, overrides, out_dir),
            (None, None) => Err(Failure::new(
                code::USAGE,
                "USAGE",
                "a package URL or --batch is required",
            )),
        },
        Cmd::Rebuild {
            buildspec,
            executor,
            script,
            workdir,
            auto_fix,
            packaging,
        } => rebuild_cmd(
            config,
            buildspec,
            *executor,
            script.as_deref(),
            workdir,
            *auto_fix,
            packaging.clone(),
        ),
        Cmd::AuditTransparency { metadata } => audit(config, metadata),
        Cmd::ClassifyLog { log } => classify(config, log),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                code::USAGE
            } else {
                code::OK
            });
        }
    };
    let output = cli.config.output;
    let code = match run(cli) {
        Ok(code) => code,
        Err(f) => {
            f.report(output);
            f.code
        }
    };
    let _ = io::stdout().flush();
    ExitCode::from(code)
}
