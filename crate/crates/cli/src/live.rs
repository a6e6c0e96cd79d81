//! Network-backed clients: Maven Central over HTTP, deps.dev for repository
//! links, and `git` for tags, liveness and checkouts.

use std::collections::BTreeMap;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use log::debug;
use reprospec::buildspec::{read_jar_manifest, Manifest};
use reprospec::coordinates::PackageCoordinate;
use reprospec::discovery::{DiscoveryError, Liveness, LivenessProbe, MetadataClient};
use reprospec::pipeline::{ArtifactSource, ClientError, RepoCheckout, TagSource};

/// Set to make every network call fail loudly. Used to check that offline
/// runs never reach this module.
pub const FORBID_ENV: &str = "REPROSPEC_FORBID_NETWORK";

const MAVEN_CENTRAL: &str = "https://repo1.maven.org/maven2";
const DEPS_DEV: &str = "https://api.deps.dev/v3/systems/maven/packages";
const MAX_JAR_BYTES: u64 = 512 * 1024 * 1024;

fn guard(what: &str) -> Result<(), ClientError> {
    if std::env::var_os(FORBID_ENV).is_some() {
        return Err(ClientError(format!(
            "network access attempted ({what}) while {FORBID_ENV} is set"
        )));
    }
    debug!("network: {what}");
    Ok(())
}

fn agent() -> ureq::Agent {
    ureq::AgentBuilder::new()
        .timeout_connect(Duration::from_secs(20))
        .timeout_read(Duration::from_secs(120))
        .build()
}

/// Body of `url`, or `None` on 404.
fn fetch(url: &str) -> Result<Option<Box<dyn Read + Send + Sync>>, ClientError> {
    guard(url)?;
    match agent().get(url).call() {
        Ok(resp) => Ok(Some(resp.into_reader())),
        Err(ureq::Error::Status(404, _)) => Ok(None),
        Err(e) => Err(ClientError(format!("GET {url}: {e}"))),
    }
}

fn fetch_string(url: &str) -> Result<Option<String>, ClientError> {
    let Some(mut body) = fetch(url)? else {
        return Ok(None);
    };
    let mut text = String::new();
    body.read_to_string(&mut text)?;
    Ok(Some(text))
}

#[derive(Debug, Clone, Default)]
pub struct MavenCentral;

impl MavenCentral {
    fn url(c: &PackageCoordinate, ext: &str) -> String {
        format!(
            "{MAVEN_CENTRAL}/{}/{}/{}/{}-{}.{ext}",
            c.group.replace('.', "/"),
            c.artifact,
            c.version,
            c.artifact,
            c.version
        )
    }
}

impl ArtifactSource for MavenCentral {
    fn pom(&self, coordinate: &PackageCoordinate) -> Result<Option<String>, ClientError> {
        fetch_string(&Self::url(coordinate, "pom"))
    }

    fn manifest(&self, coordinate: &PackageCoordinate) -> Result<Option<Manifest>, ClientError> {
        let Some(body) = fetch(&Self::url(coordinate, "jar"))? else {
            return Ok(None);
        };
        let mut bytes = Vec::new();
        body.take(MAX_JAR_BYTES).read_to_end(&mut bytes)?;
        read_jar_manifest(Cursor::new(bytes))
            .map_err(|e| ClientError(format!("jar of {}: {e}", coordinate.gav())))
    }
}

/// Source links from the deps.dev version endpoint.
#[derive(Debug, Clone, Default)]
pub struct DepsDev;

impl MetadataClient for DepsDev {
    fn links(&self, coordinate: &PackageCoordinate) -> Result<Vec<String>, DiscoveryError> {
        let url = format!(
            "{DEPS_DEV}/{}%3A{}/versions/{}",
            coordinate.group, coordinate.artifact, coordinate.version
        );
        let unavailable = |e: ClientError| DiscoveryError::ServiceUnavailable(e.0);
        let Some(text) = fetch_string(&url).map_err(unavailable)? else {
            return Ok(Vec::new());
        };
        let doc: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| DiscoveryError::ServiceUnavailable(format!("{url}: {e}")))?;
        Ok(doc["links"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|l| l["url"].as_str().map(str::to_owned))
            .collect())
    }
}

fn git(args: &[&str], cwd: Option<&Path>) -> Result<String, ClientError> {
    guard(&format!("git {}", args.join(" ")))?;
    let mut cmd = Command::new("git");
    cmd.args(args)
        .env("GIT_TERMINAL_PROMPT", "0")
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    if let Some(dir) = cwd {
        cmd.current_dir(dir);
    }
    let out = cmd.output().map_err(|e| ClientError(format!("git: {e}")))?;
    if !out.status.success() {
        return Err(ClientError(format!(
            "git {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

/// `git ls-remote --tags` output as tag -> commit, preferring peeled commits
/// of annotated tags.
pub fn parse_ls_remote(text: &str) -> BTreeMap<String, String> {
    let mut tags = BTreeMap::new();
    let mut peeled = BTreeMap::new();
    for line in text.lines() {
        let Some((commit, reference)) = line.split_once('\t') else {
            continue;
        };
        let Some(name) = reference.strip_prefix("refs/tags/") else {
            continue;
        };
        match name.strip_suffix("^{}") {
            Some(base) => {
                peeled.insert(base.to_owned(), commit.to_owned());
            }
            None => {
                tags.insert(name.to_owned(), commit.to_owned());
            }
        }
    }
    tags.extend(peeled);
    tags
}

#[derive(Debug, Clone, Default)]
pub struct Git;

impl TagSource for Git {
    fn tags(&self, repo_url: &str) -> Result<BTreeMap<String, String>, ClientError> {
        Ok(parse_ls_remote(&git(
            &["ls-remote", "--tags", repo_url],
            None,
        )?))
    }
}

impl LivenessProbe for Git {
    fn probe(&self, url: &str) -> Liveness {
        match git(&["ls-remote", "--exit-code", url, "HEAD"], None) {
            Ok(_) => Liveness::Alive,
            Err(e) if e.0.contains(FORBID_ENV) => Liveness::Unknown,
            Err(_) => Liveness::Dead,
        }
    }
}

impl RepoCheckout for Git {
    fn checkout(
        &self,
        repo_url: &str,
        revision: &str,
        scratch: &Path,
    ) -> Result<PathBuf, ClientError> {
        let tree = scratch.join("src");
        if !tree.join(".git").is_dir() {
            std::fs::create_dir_all(scratch)?;
            let dest = tree.to_string_lossy().into_owned();
            git(
                &["clone", "--quiet", "--no-checkout", repo_url, &dest],
                None,
            )?;
        }
        git(&["checkout", "--quiet", "--force", revision], Some(&tree))?;
        Ok(tree)
    }
}
