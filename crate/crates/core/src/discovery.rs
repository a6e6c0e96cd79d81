//! Finding the source repository of a package: provenance first, then POM
//! links, then a metadata service.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use url::Url;

use crate::coordinates::PackageCoordinate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Origin {
    Provenance,
    PomScm,
    PomUrl,
    MetadataService,
    /// Given on the command line.
    UserSupplied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Liveness {
    #[default]
    Unknown,
    Alive,
    Dead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProvenanceSource {
    File,
    RegistryFixture,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub repo_url: String,
    /// Lowercase hex, 40 or 64 characters.
    pub commit_digest: String,
    pub source: ProvenanceSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepositoryCandidate {
    pub url: String,
    pub origin: Origin,
    pub alive: Liveness,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepositoryResolution {
    pub coordinate: PackageCoordinate,
    pub repo_url: String,
    /// Set exactly when `via` is `PROVENANCE`.
    pub pinned_commit: Option<String>,
    pub via: Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    NonVcsWebsite,
    Malformed,
    UnsupportedHost,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::NonVcsWebsite => "NON_VCS_WEBSITE",
            RejectReason::Malformed => "MALFORMED",
            RejectReason::UnsupportedHost => "UNSUPPORTED_HOST",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiscoveryError {
    #[error("malformed POM: {0}")]
    MalformedPom(String),
    #[error("malformed provenance: {0}")]
    MalformedProvenance(String),
    #[error("metadata service unavailable: {0}")]
    ServiceUnavailable(String),
    #[error("no live repository found for {purl}")]
    RepoNotFound {
        purl: String,
        /// What was tried and why it was discarded.
        tried: Vec<String>,
    },
}

/// VCS hosts whose URLs are accepted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostAllowlist {
    hosts: Vec<String>,
}

pub const DEFAULT_HOSTS: &[&str] = &["github.com", "gitlab.com", "bitbucket.org"];

impl Default for HostAllowlist {
    fn default() -> Self {
        HostAllowlist {
            hosts: DEFAULT_HOSTS.iter().map(|h| (*h).to_owned()).collect(),
        }
    }
}

impl HostAllowlist {
    pub fn with_extras<I: IntoIterator<Item = S>, S: AsRef<str>>(extras: I) -> Self {
        let mut list = Self::default();
        for h in extras {
            let h = h.as_ref().trim().to_lowercase();
            if !h.is_empty() && !list.hosts.contains(&h) {
                list.hosts.push(h);
            }
        }
        list
    }

    pub fn allows(&self, host: &str) -> bool {
        let host = host.strip_prefix("www.").unwrap_or(host);
        self.hosts.iter().any(|h| h == host)
    }
}

/// Rewrite a repository link to `https://host/org/repo`, or say why not.
pub fn normalize_repo_url(text: &str, allowlist: &HostAllowlist) -> Result<String, RejectReason> {
    let mut s = text.trim();
    let mut vcs_syntax = false;
    loop {
        let stripped = ["scm:git:", "scm:svn:", "git+"].iter().find_map(|p| {
            s.get(..p.len())
                .filter(|h| h.eq_ignore_ascii_case(p))
                .map(|_| &s[p.len()..])
        });
        match stripped {
            Some(rest) => {
                s = rest;
                vcs_syntax = true;
            }
            None => break,
        }
    }
    if s.is_empty() || s.contains(char::is_whitespace) || s.contains("${") {
        return Err(RejectReason::Malformed);
    }
    let owned;
    if !s.contains("://") {
        // scp-like `git@host:org/repo.git`
        let Some((user_host, path)) = s.split_once(':') else {
            return Err(RejectReason::Malformed);
        };
        let host = user_host.rsplit('@').next().unwrap_or(user_host);
        if host.is_empty() || path.is_empty() || path.starts_with("//") {
            return Err(RejectReason::Malformed);
        }
        owned = format!("ssh://{host}/{}", path.trim_start_matches('/'));
        s = &owned;
        vcs_syntax = true;
    }
    let url = Url::parse(s).map_err(|_| RejectReason::Malformed)?;
    match url.scheme() {
        "http" | "https" => {}
        "ssh" | "git" | "git+ssh" | "svn" => vcs_syntax = true,
        _ => return Err(RejectReason::Malformed),
    }
    let Some(host) = url.host_str().map(str::to_lowercase) else {
        return Err(RejectReason::Malformed);
    };
    let segments: Vec<&str> = url
        .path_segments()
        .map(|p| p.filter(|s| !s.is_empty()).collect())
        .unwrap_or_default();
    let ends_git = segments.last().is_some_and(|s| s.ends_with(".git"));
    if !allowlist.allows(&host) {
        return Err(if vcs_syntax || ends_git {
            RejectReason::UnsupportedHost
        } else {
            RejectReason::NonVcsWebsite
        });
    }
    let host = host.strip_prefix("www.").unwrap_or(&host).to_owned();
    let keep = if host == "gitlab.com" {
        // GitLab allows nested groups; `/-/` starts the UI part of the path.
        segments
            .iter()
            .position(|s| *s == "-")
            .unwrap_or(segments.len())
    } else {
        2.min(segments.len())
    };
    let mut path: Vec<String> = segments[..keep].iter().map(|s| (*s).to_owned()).collect();
    if let Some(last) = path.last_mut() {
        while let Some(stripped) = last.strip_suffix(".git") {
            *last = stripped.to_owned();
        }
    }
    path.retain(|s| !s.is_empty());
    if path.iter().any(|s| matches!(s.as_str(), "." | ".." | "-")) {
        return Err(RejectReason::Malformed);
    }
    if path.len() < 2 {
        return Err(RejectReason::NonVcsWebsite);
    }
    let port = match (url.scheme(), url.port()) {
        ("http" | "https", Some(p)) => format!(":{p}"),
        _ => String::new(),
    };
    Ok(format!("https://{host}{port}/{}", path.join("/")))
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children()
        .find(|c| c.is_element() && c.tag_name().name() == name)
}

fn child_text(node: roxmltree::Node<'_, '_>, name: &str) -> Option<String> {
    child(node, name)
        .and_then(|c| c.text())
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
}

/// Facts read from a POM.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PomInfo {
    pub packaging: Option<String>,
    /// `(origin, raw link)` in field order, Maven properties substituted.
    pub links: Vec<(Origin, String)>,
}

fn interpolate(text: &str, props: &HashMap<String, String>) -> String {
    let mut out = text.to_owned();
    for _ in 0..4 {
        let mut next = String::with_capacity(out.len());
        let mut rest = out.as_str();
        while let Some(start) = rest.find("${") {
            let Some(len) = rest[start..].find('}') else {
                break;
            };
            let key = &rest[start + 2..start + len];
            next.push_str(&rest[..start]);
            match props.get(key) {
                Some(v) => next.push_str(v),
                None => next.push_str(&rest[start..=start + len]),
            }
            rest = &rest[start + len + 1..];
        }
        next.push_str(rest);
        if next == out {
            break;
        }
        out = next;
    }
    out
}

pub fn parse_pom(xml: &str) -> Result<PomInfo, DiscoveryError> {
    let doc =
        roxmltree::Document::parse(xml).map_err(|e| DiscoveryError::MalformedPom(e.to_string()))?;
    let project = doc.root_element();
    if project.tag_name().name() != "project" {
        return Err(DiscoveryError::MalformedPom(format!(
            "root element is <{}>, expected <project>",
            project.tag_name().name()
        )));
    }
    let mut props = HashMap::new();
    let parent = child(project, "parent");
    for key in ["groupId", "artifactId", "version"] {
        if let Some(v) =
            child_text(project, key).or_else(|| parent.and_then(|p| child_text(p, key)))
        {
            props.insert(format!("project.{key}"), v.clone());
            props.insert(key.to_owned(), v);
        }
    }
    if let Some(p) = child(project, "properties") {
        for prop in p.children().filter(|c| c.is_element()) {
            if let Some(t) = prop.text() {
                props.insert(prop.tag_name().name().to_owned(), t.trim().to_owned());
            }
        }
    }
    let mut links = Vec::new();
    if let Some(scm) = child(project, "scm") {
        for key in ["url", "connection", "developerConnection"] {
            if let Some(v) = child_text(scm, key) {
                links.push((Origin::PomScm, interpolate(&v, &props)));
            }
        }
    }
    if let Some(v) = child_text(project, "url") {
        links.push((Origin::PomUrl, interpolate(&v, &props)));
    }
    Ok(PomInfo {
        packaging: child_text(project, "packaging"),
        links,
    })
}

fn candidates_from(
    links: &[(Origin, String)],
    allowlist: &HostAllowlist,
    rejected: &mut Vec<String>,
) -> Vec<RepositoryCandidate> {
    let mut out: Vec<RepositoryCandidate> = Vec::new();
    for (origin, link) in links {
        match normalize_repo_url(link, allowlist) {
            Ok(url) if !out.iter().any(|c| c.url == url) => out.push(RepositoryCandidate {
                url,
                origin: *origin,
                alive: Liveness::Unknown,
            }),
            Ok(_) => {}
            Err(reason) => rejected.push(format!("{link}: {reason}")),
        }
    }
    out
}

/// Repository candidates from `scm/url`, `scm/connection`,
/// `scm/developerConnection` and `project/url`, in that order.
pub fn extract_scm_from_pom(
    xml: &str,
    allowlist: &HostAllowlist,
) -> Result<Vec<RepositoryCandidate>, DiscoveryError> {
    let info = parse_pom(xml)?;
    Ok(candidates_from(&info.links, allowlist, &mut Vec::new()))
}

pub trait MetadataClient: Send + Sync {
    /// Repository-ish links known for `coordinate`.
    fn links(&self, coordinate: &PackageCoordinate) -> Result<Vec<String>, DiscoveryError>;
}

pub trait LivenessProbe: Send + Sync {
    fn probe(&self, url: &str) -> Liveness;
}

pub trait ProvenanceLookup: Send + Sync {
    fn lookup(
        &self,
        coordinate: &PackageCoordinate,
    ) -> Result<Option<ProvenanceRecord>, DiscoveryError>;
}

/// Metadata client backed by a JSON file `{purl: [link, ...]}`.
#[derive(Debug, Clone, Default)]
pub struct FixtureMetadataClient {
    /// `None` models an offline client with no fixture.
    entries: Option<BTreeMap<String, Vec<String>>>,
}

impl FixtureMetadataClient {
    pub fn new(entries: BTreeMap<String, Vec<String>>) -> Self {
        FixtureMetadataClient {
            entries: Some(entries),
        }
    }

    pub fn unavailable() -> Self {
        FixtureMetadataClient { entries: None }
    }

    pub fn from_file(path: &Path) -> Result<Self, DiscoveryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DiscoveryError::ServiceUnavailable(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map(Self::new)
            .map_err(|e| DiscoveryError::ServiceUnavailable(format!("{}: {e}", path.display())))
    }
}

impl MetadataClient for FixtureMetadataClient {
    fn links(&self, coordinate: &PackageCoordinate) -> Result<Vec<String>, DiscoveryError> {
        let entries = self.entries.as_ref().ok_or_else(|| {
            DiscoveryError::ServiceUnavailable("offline and no metadata fixture".into())
        })?;
        Ok(entries
            .get(&coordinate.render())
            .cloned()
            .unwrap_or_default())
    }
}

/// Liveness from a JSON map `{url: "ALIVE" | "DEAD"}`; `"*"` sets the default.
#[derive(Debug, Clone, Default)]
pub struct FixtureLiveness {
    states: BTreeMap<String, Liveness>,
}

impl FixtureLiveness {
    pub fn new(states: BTreeMap<String, Liveness>) -> Self {
        FixtureLiveness { states }
    }

    pub fn all(state: Liveness) -> Self {
        FixtureLiveness {
            states: BTreeMap::from([("*".to_owned(), state)]),
        }
    }
}

impl LivenessProbe for FixtureLiveness {
    fn probe(&self, url: &str) -> Liveness {
        self.states
            .get(url)
            .or_else(|| self.states.get("*"))
            .copied()
            .unwrap_or(Liveness::Dead)
    }
}

/// Provenance lookup that never finds anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoProvenance;

impl ProvenanceLookup for NoProvenance {
    fn lookup(&self, _: &PackageCoordinate) -> Result<Option<ProvenanceRecord>, DiscoveryError> {
        Ok(None)
    }
}

fn is_commit_hex(s: &str) -> bool {
    matches!(s.len(), 40 | 64) && s.bytes().all(|b| b.is_ascii_hexdigit())
}

/// Repository and commit referenced by an in-toto statement's predicate.
fn statement_source(statement: &Value) -> Option<(String, String)> {
    let predicate = statement.get("predicate")?;
    let deps = predicate
        .pointer("/buildDefinition/resolvedDependencies")
        .or_else(|| predicate.get("materials"))
        .and_then(Value::as_array);
    let config = predicate.pointer("/invocation/configSource");
    let entries = deps.into_iter().flatten().chain(config);
    for entry in entries {
        let Some(uri) = entry.get("uri").and_then(Value::as_str) else {
            continue;
        };
        let digest = entry.get("digest");
        let commit = ["gitCommit", "sha1", "sha256"]
            .iter()
            .find_map(|k| digest.and_then(|d| d.get(*k)).and_then(Value::as_str));
        if let Some(commit) = commit {
            return Some((uri.to_owned(), commit.to_owned()));
        }
    }
    None
}

fn decode_envelope(doc: &Value) -> Result<Option<Value>, DiscoveryError> {
    let envelope = doc.get("dsseEnvelope").unwrap_or(doc);
    let Some(payload) = envelope.get("payload").and_then(Value::as_str) else {
        return Ok(None);
    };
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(payload)
        .or_else(|_| base64::engine::general_purpose::URL_SAFE.decode(payload))
        .map_err(|e| DiscoveryError::MalformedProvenance(format!("payload is not base64: {e}")))?;
    serde_json::from_slice(&bytes)
        .map(Some)
        .map_err(|e| DiscoveryError::MalformedProvenance(format!("payload is not JSON: {e}")))
}

/// Read the source repository and commit out of a provenance document.
///
/// Accepts a bare in-toto statement or a DSSE envelope around one.
/// Signatures are not checked.
pub fn parse_provenance(
    text: &str,
    source: ProvenanceSource,
    allowlist: &HostAllowlist,
) -> Result<ProvenanceRecord, DiscoveryError> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| DiscoveryError::MalformedProvenance(e.to_string()))?;
    let statement = decode_envelope(&doc)?.unwrap_or(doc);
    let (uri, commit) = statement_source(&statement).ok_or_else(|| {
        DiscoveryError::MalformedProvenance("no source material with a commit digest".into())
    })?;
    let commit = commit.to_lowercase();
    if !is_commit_hex(&commit) {
        return Err(DiscoveryError::MalformedProvenance(format!(
            "`{commit}` is not a commit digest"
        )));
    }
    let uri = uri.split('@').next().unwrap_or(&uri);
    let repo_url = normalize_repo_url(uri, allowlist).map_err(|r| {
        DiscoveryError::MalformedProvenance(format!("repository `{uri}` rejected: {r}"))
    })?;
    Ok(ProvenanceRecord {
        repo_url,
        commit_digest: commit,
        source,
    })
}

/// Candidates from the metadata service, normalised and in a stable order.
pub fn query_metadata_service(
    coordinate: &PackageCoordinate,
    client: &dyn MetadataClient,
    allowlist: &HostAllowlist,
) -> Result<Vec<RepositoryCandidate>, DiscoveryError> {
    let links: Vec<_> = client
        .links(coordinate)?
        .into_iter()
        .map(|l| (Origin::MetadataService, l))
        .collect();
    let mut out = candidates_from(&links, allowlist, &mut Vec::new());
    out.sort_by(|a, b| a.url.cmp(&b.url));
    Ok(out)
}

/// The injected clients `resolve_repository` consults.
pub struct DiscoveryClients<'a> {
    pub provenance: &'a dyn ProvenanceLookup,
    pub metadata: &'a dyn MetadataClient,
    pub liveness: &'a dyn LivenessProbe,
    pub allowlist: &'a HostAllowlist,
}

/// Pick the repository for `coordinate`.
///
/// Provenance wins outright. Otherwise the first live candidate among the
/// POM links and then the metadata service is used.
pub fn resolve_repository(
    coordinate: &PackageCoordinate,
    pom: Option<&str>,
    clients: &DiscoveryClients<'_>,
) -> Result<RepositoryResolution, DiscoveryError> {
    if let Some(record) = clients.provenance.lookup(coordinate)? {
        return Ok(RepositoryResolution {
            coordinate: coordinate.clone(),
            repo_url: record.repo_url,
            pinned_commit: Some(record.commit_digest),
            via: Origin::Provenance,
        });
    }
    let mut tried = Vec::new();
    let pom_candidates = match pom.map(parse_pom) {
        Some(Ok(info)) => {
            let mut c = candidates_from(&info.links, clients.allowlist, &mut tried);
            c.sort_by_key(|c| c.origin);
            c
        }
        Some(Err(e)) => {
            tried.push(e.to_string());
            Vec::new()
        }
        None => Vec::new(),
    };
    let pick = |candidates: &[RepositoryCandidate], tried: &mut Vec<String>| {
        candidates.iter().find_map(|c| {
            let state = clients.liveness.probe(&c.url);
            if state == Liveness::Alive {
                Some(c.clone())
            } else {
                tried.push(format!("{}: {:?}", c.url, state));
                None
            }
        })
    };
    let mut found = pick(&pom_candidates, &mut tried);
    if found.is_none() {
        match query_metadata_service(coordinate, clients.metadata, clients.allowlist) {
            Ok(service) => {
                let fresh: Vec<_> = service
                    .into_iter()
                    .filter(|c| !pom_candidates.iter().any(|p| p.url == c.url))
                    .collect();
                found = pick(&fresh, &mut tried);
            }
            Err(e) => tried.push(e.to_string()),
        }
    }
    match found {
        Some(c) => Ok(RepositoryResolution {
            coordinate: coordinate.clone(),
            repo_url: c.url,
            pinned_commit: None,
            via: c.origin,
        }),
        None => Err(DiscoveryError::RepoNotFound {
            purl: coordinate.render(),
            tried,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm(s: &str) -> Result<String, RejectReason> {
        normalize_repo_url(s, &HostAllowlist::default())
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(
            norm("scm:git:git@github.com:foo/bar.git").unwrap(),
            "https://github.com/foo/bar"
        );
        assert_eq!(
            norm("https://github.com/foo/bar.git/").unwrap(),
            "https://github.com/foo/bar"
        );
        assert_eq!(
            norm("https://example.com/product"),
            Err(RejectReason::NonVcsWebsite)
        );
        assert_eq!(
            norm("scm:git:https://git.example.org/a/b.git"),
            Err(RejectReason::UnsupportedHost)
        );
        assert_eq!(
            norm("http://GitHub.com/foo/bar/tree/main/sub").unwrap(),
            "https://github.com/foo/bar"
        );
        assert_eq!(
            norm("https://user:pw@github.com/foo/bar").unwrap(),
            "https://github.com/foo/bar"
        );
        assert_eq!(
            norm("https://gitlab.com/g/sub/repo/-/tree/x").unwrap(),
            "https://gitlab.com/g/sub/repo"
        );
        assert_eq!(
            norm("ssh://git@github.com/foo/bar.git").unwrap(),
            "https://github.com/foo/bar"
        );
        assert_eq!(
            norm("https://github.com/foo"),
            Err(RejectReason::NonVcsWebsite)
        );
        assert_eq!(norm("not a url"), Err(RejectReason::Malformed));
        assert_eq!(
            norm("https://github.com/${project.artifactId}"),
            Err(RejectReason::Malformed)
        );
        let extra = HostAllowlist::with_extras(["git.example.org"]);
        assert_eq!(
            normalize_repo_url("https://git.example.org:8443/a/b.git", &extra).unwrap(),
            "https://git.example.org:8443/a/b"
        );
    }

    #[test]
    fn pom_fields_in_order() {
        let pom = r#"<project xmlns="http://maven.apache.org/POM/4.0.0"><artifactId>b</artifactId>
            <url>https://github.com/a/other</url>
            <scm><connection>scm:git:git@github.com:a/b.git</connection>
                 <url>https://github.com/a/${project.artifactId}</url></scm></project>"#;
        let c = extract_scm_from_pom(pom, &HostAllowlist::default()).unwrap();
        let urls: Vec<_> = c.iter().map(|c| (c.url.as_str(), c.origin)).collect();
        assert_eq!(
            urls,
            [
                ("https://github.com/a/b", Origin::PomScm),
                ("https://github.com/a/other", Origin::PomUrl)
            ]
        );
        assert!(
            extract_scm_from_pom("<project/>", &HostAllowlist::default())
                .unwrap()
                .is_empty()
        );
        assert!(matches!(
            extract_scm_from_pom("<project>", &HostAllowlist::default()),
            Err(DiscoveryError::MalformedPom(_))
        ));
    }

    #[test]
    fn provenance_layouts() {
        let commit = "a".repeat(40);
        let v1 = serde_json::json!({
            "_type": "https://in-toto.io/Statement/v1",
            "predicateType": "https://slsa.dev/provenance/v1",
            "predicate": {"buildDefinition": {"resolvedDependencies": [
                {"uri": "git+https://github.com/o/r@refs/tags/v1", "digest": {"gitCommit": commit}}
            ]}}
        });
        let rec = parse_provenance(
            &v1.to_string(),
            ProvenanceSource::File,
            &HostAllowlist::default(),
        )
        .unwrap();
        assert_eq!(rec.repo_url, "https://github.com/o/r");
        assert_eq!(rec.commit_digest, commit);

        let v02 = serde_json::json!({"predicate": {"materials": [
            {"uri": "git+https://github.com/o/r.git", "digest": {"sha1": "B".repeat(40)}}]}});
        let payload = base64::engine::general_purpose::STANDARD.encode(v02.to_string());
        let env =
            serde_json::json!({"payloadType": "application/vnd.in-toto+json", "payload": payload});
        let rec = parse_provenance(
            &env.to_string(),
            ProvenanceSource::File,
            &HostAllowlist::default(),
        )
        .unwrap();
        assert_eq!(rec.commit_digest, "b".repeat(40));

        let bad = serde_json::json!({"predicate": {"materials": [{"uri": "git+https://github.com/o/r", "digest": {"sha1": "xyz"}}]}});
        assert!(parse_provenance(
            &bad.to_string(),
            ProvenanceSource::File,
            &HostAllowlist::default()
        )
        .is_err());
    }

    struct Fixed(Option<ProvenanceRecord>);
    impl ProvenanceLookup for Fixed {
        fn lookup(
            &self,
            _: &PackageCoordinate,
        ) -> Result<Option<ProvenanceRecord>, DiscoveryError> {
            Ok(self.0.clone())
        }
    }

    fn coord() -> PackageCoordinate {
        PackageCoordinate::new("g", "a", "1.0").unwrap()
    }

    const POM: &str = "<project><scm><url>https://github.com/o/pom</url></scm></project>";

    #[test]
    fn provenance_dominates() {
        let record = ProvenanceRecord {
            repo_url: "https://github.com/o/prov".into(),
            commit_digest: "c".repeat(40),
            source: ProvenanceSource::RegistryFixture,
        };
        let allow = HostAllowlist::default();
        let clients = DiscoveryClients {
            provenance: &Fixed(Some(record)),
            metadata: &FixtureMetadataClient::unavailable(),
            liveness: &FixtureLiveness::all(Liveness::Dead),
            allowlist: &allow,
        };
        let r = resolve_repository(&coord(), Some(POM), &clients).unwrap();
        assert_eq!(
            (r.via, r.repo_url.as_str()),
            (Origin::Provenance, "https://github.com/o/prov")
        );
        assert_eq!(r.pinned_commit, Some("c".repeat(40)));
    }

    #[test]
    fn pom_then_service_then_not_found() {
        let allow = HostAllowlist::default();
        let service = FixtureMetadataClient::new(BTreeMap::from([(
            coord().render(),
            vec![
                "https://github.com/o/z".to_owned(),
                "https://github.com/o/y.git".to_owned(),
            ],
        )]));
        let alive = FixtureLiveness::all(Liveness::Alive);
        let clients = DiscoveryClients {
            provenance: &NoProvenance,
            metadata: &service,
            liveness: &alive,
            allowlist: &allow,
        };
        let r = resolve_repository(&coord(), Some(POM), &clients).unwrap();
        assert_eq!((r.via, r.pinned_commit.is_none()), (Origin::PomScm, true));

        let only_service = FixtureLiveness::new(BTreeMap::from([
            ("https://github.com/o/pom".to_owned(), Liveness::Dead),
            ("*".to_owned(), Liveness::Alive),
        ]));
        let clients = DiscoveryClients {
            liveness: &only_service,
            ..clients
        };
        let r = resolve_repository(&coord(), Some(POM), &clients).unwrap();
        assert_eq!(
            (r.via, r.repo_url.as_str()),
            (Origin::MetadataService, "https://github.com/o/y")
        );

        let dead = FixtureLiveness::all(Liveness::Dead);
        let clients = DiscoveryClients {
            liveness: &dead,
            ..clients
        };
        assert!(matches!(
            resolve_repository(&coord(), Some(POM), &clients),
            Err(DiscoveryError::RepoNotFound { .. })
        ));
    }

    #[test]
    fn service_contract() {
        let allow = HostAllowlist::default();
        assert!(matches!(
            query_metadata_service(&coord(), &FixtureMetadataClient::unavailable(), &allow),
            Err(DiscoveryError::ServiceUnavailable(_))
        ));
        let empty = FixtureMetadataClient::new(BTreeMap::new());
        assert_eq!(
            query_metadata_service(&coord(), &empty, &allow).unwrap(),
            []
        );
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(
            scheme in prop::sample::select(vec!["https://", "http://", "scm:git:https://", "git@", "scm:git:git@", "git+https://"]),
            host in prop::sample::select(vec!["github.com", "GitLab.com", "bitbucket.org", "example.com"]),
            org in "[a-zA-Z0-9_.-]{1,8}",
            repo in "[a-zA-Z0-9_.-]{1,8}",
            tail in prop::sample::select(vec!["", ".git", "/", ".git/", "/tree/main"]),
        ) {
            let sep = if scheme.ends_with('@') { ":" } else { "/" };
            let raw = format!("{scheme}{host}{sep}{org}/{repo}{tail}");
            if let Ok(once) = norm(&raw) {
                prop_assert_eq!(norm(&once), Ok(once.clone()));
            }
        }

        #[test]
        fn service_order_is_stable(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut links: Vec<String> = (0..6).map(|i| format!("https://github.com/o/r{i}")).collect();
            let allow = HostAllowlist::default();
            let base = query_metadata_service(&coord(), &FixtureMetadataClient::new(BTreeMap::from([(coord().render(), links.clone())])), &allow).unwrap();
            links.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
            let shuffled = query_metadata_service(&coord(), &FixtureMetadataClient::new(BTreeMap::from([(coord().render(), links)])), &allow).unwrap();
            prop_assert_eq!(base, shuffled);
        }
    }
}
