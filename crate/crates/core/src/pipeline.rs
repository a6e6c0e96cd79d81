//! End-to-end flow from a coordinate to a stored buildspec, over injected
//! clients. [`Fixtures`] serves every client from a directory tree.
//!
//! Fixture layout:
//!
//! ```text
//! metadata.json                       {purl: [link, ...]}
//! liveness.json                       {url: "ALIVE" | "DEAD"}, "*" for the default
//! tags.json                           {repo_url: {tag: commit}}
//! maven/<group/path>/<a>/<v>/<a>-<v>.pom
//! maven/<group/path>/<a>/<v>/<a>-<v>.jar           (or <a>-<v>.MANIFEST.MF)
//! maven/<group/path>/<a>/<v>/<a>-<v>.provenance.json
//! repos/<host>/<org>/<repo>/          working tree
//! ```
//!
//! Without `liveness.json`, a repository is alive when it appears in
//! `tags.json` or under `repos/`.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buildspec::{
    self, emit, generate_buildspec, parse_manifest, read_jar_manifest, AnalysisRecord,
    BuildSpecError, GenerationInput, Manifest, StoreError,
};
use crate::coordinates::{MalformedPurl, PackageCoordinate};
use crate::discovery::{
    parse_pom, parse_provenance, resolve_repository, DiscoveryClients, DiscoveryError,
    FixtureMetadataClient, HostAllowlist, Liveness, LivenessProbe, MetadataClient, Origin,
    ProvenanceLookup, ProvenanceRecord, ProvenanceSource, RepositoryResolution,
};
use crate::tags::{find_tag, TagError, TagMatch};
use crate::workflow::{
    analyze_repository, ActionRegistry, Diagnostic, ScoreWeights, WorkflowAnalysis,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ClientError(pub String);

impl From<io::Error> for ClientError {
    fn from(e: io::Error) -> Self {
        ClientError(e.to_string())
    }
}

/// Published files of a package.
pub trait ArtifactSource: Send + Sync {
    fn pom(&self, coordinate: &PackageCoordinate) -> Result<Option<String>, ClientError>;
    fn manifest(&self, coordinate: &PackageCoordinate) -> Result<Option<Manifest>, ClientError>;
}

/// Tag name to commit for a repository.
pub trait TagSource: Send + Sync {
    fn tags(&self, repo_url: &str) -> Result<BTreeMap<String, String>, ClientError>;
}

pub trait RepoCheckout: Send + Sync {
    /// A working tree of `repo_url` at `revision`. `scratch` is a directory
    /// private to this call that the checkout may fill.
    fn checkout(
        &self,
        repo_url: &str,
        revision: &str,
        scratch: &Path,
    ) -> Result<PathBuf, ClientError>;
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Purl(#[from] MalformedPurl),
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error("{repo}: {source}")]
    NoMatchingTag { repo: String, source: TagError },
    #[error(transparent)]
    BuildSpec(#[from] BuildSpecError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0}")]
    Client(#[from] ClientError),
}

/// Fixture directory serving every client.
#[derive(Debug, Clone)]
pub struct Fixtures {
    root: PathBuf,
    allowlist: HostAllowlist,
}

impl Fixtures {
    pub fn new(root: impl Into<PathBuf>, allowlist: HostAllowlist) -> Self {
        Fixtures {
            root: root.into(),
            allowlist,
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn artifact_dir(&self, c: &PackageCoordinate) -> PathBuf {
        let mut dir = self.root.join("maven");
        dir.extend(c.group.split('.'));
        dir.join(&c.artifact).join(&c.version)
    }

    fn artifact_file(&self, c: &PackageCoordinate, suffix: &str) -> PathBuf {
        self.artifact_dir(c)
            .join(format!("{}-{}{suffix}", c.artifact, c.version))
    }

    /// `repos/<host>/<path>` for a normalized repository URL.
    pub fn repo_dir(&self, repo_url: &str) -> PathBuf {
        let rest = repo_url.split_once("://").map_or(repo_url, |(_, r)| r);
        let mut dir = self.root.join("repos");
        dir.extend(
            rest.split('/')
                .filter(|s| !s.is_empty())
                .map(|s| s.replace(':', "_")),
        );
        dir
    }

    fn read_optional(path: &Path) -> Result<Option<String>, ClientError> {
        match fs::read_to_string(path) {
            Ok(t) => Ok(Some(t)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(ClientError(format!("{}: {e}", path.display()))),
        }
    }

    fn tag_table(&self) -> Result<BTreeMap<String, BTreeMap<String, String>>, ClientError> {
        let path = self.root.join("tags.json");
        match Self::read_optional(&path)? {
            Some(text) => serde_json::from_str(&text)
                .map_err(|e| ClientError(format!("{}: {e}", path.display()))),
            None => Ok(BTreeMap::new()),
        }
    }

    /// Metadata client over `metadata.json`; unavailable when the file is absent.
    pub fn metadata_client(&self) -> Result<FixtureMetadataClient, DiscoveryError> {
        let path = self.root.join("metadata.json");
        if path.exists() {
            FixtureMetadataClient::from_file(&path)
        } else {
            Ok(FixtureMetadataClient::unavailable())
        }
    }

    /// Liveness over `liveness.json`, or from what the fixture holds.
    pub fn liveness(&self) -> Result<FixtureRepoLiveness, ClientError> {
        let path = self.root.join("liveness.json");
        let explicit = match Self::read_optional(&path)? {
            Some(text) => Some(
                serde_json::from_str(&text)
                    .map_err(|e| ClientError(format!("{}: {e}", path.display())))?,
            ),
            None => None,
        };
        Ok(FixtureRepoLiveness {
            fixtures: self.clone(),
            explicit,
            tagged: self.tag_table()?.into_keys().collect(),
        })
    }
}

impl ArtifactSource for Fixtures {
    fn pom(&self, coordinate: &PackageCoordinate) -> Result<Option<String>, ClientError> {
        Self::read_optional(&self.artifact_file(coordinate, ".pom"))
    }

    fn manifest(&self, coordinate: &PackageCoordinate) -> Result<Option<Manifest>, ClientError> {
        let jar = self.artifact_file(coordinate, ".jar");
        if jar.exists() {
            let file = fs::File::open(&jar)?;
            return read_jar_manifest(file)
                .map_err(|e| ClientError(format!("{}: {e}", jar.display())));
        }
        Ok(
            Self::read_optional(&self.artifact_file(coordinate, ".MANIFEST.MF"))?
                .map(|t| parse_manifest(&t)),
        )
    }
}

impl TagSource for Fixtures {
    fn tags(&self, repo_url: &str) -> Result<BTreeMap<String, String>, ClientError> {
        Ok(self.tag_table()?.remove(repo_url).unwrap_or_default())
    }
}

impl RepoCheckout for Fixtures {
    /// Fixture repositories hold a single tree, used for every revision.
    fn checkout(
        &self,
        repo_url: &str,
        _revision: &str,
        _scratch: &Path,
    ) -> Result<PathBuf, ClientError> {
        let dir = self.repo_dir(repo_url);
        if dir.is_dir() {
            Ok(dir)
        } else {
            Err(ClientError(format!(
                "no fixture checkout for {repo_url} at {}",
                dir.display()
            )))
        }
    }
}

impl ProvenanceLookup for Fixtures {
    fn lookup(
        &self,
        coordinate: &PackageCoordinate,
    ) -> Result<Option<ProvenanceRecord>, DiscoveryError> {
        let path = self.artifact_file(coordinate, ".provenance.json");
        match fs::read_to_string(&path) {
            Ok(text) => parse_provenance(&text, ProvenanceSource::File, &self.allowlist).map(Some),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(DiscoveryError::MalformedProvenance(format!(
                "{}: {e}",
                path.display()
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixtureRepoLiveness {
    fixtures: Fixtures,
    explicit: Option<BTreeMap<String, Liveness>>,
    tagged: Vec<String>,
}

impl LivenessProbe for FixtureRepoLiveness {
    fn probe(&self, url: &str) -> Liveness {
        if let Some(states) = &self.explicit {
            return states
                .get(url)
                .or_else(|| states.get("*"))
                .copied()
                .unwrap_or(Liveness::Dead);
        }
        if self.tagged.iter().any(|t| t == url) || self.fixtures.repo_dir(url).is_dir() {
            Liveness::Alive
        } else {
            Liveness::Dead
        }
    }
}

/// The clients a pipeline run uses.
#[derive(Clone, Copy)]
pub struct Clients<'a> {
    pub artifacts: &'a dyn ArtifactSource,
    pub tags: &'a dyn TagSource,
    pub checkout: &'a dyn RepoCheckout,
    pub provenance: &'a dyn ProvenanceLookup,
    pub metadata: &'a dyn MetadataClient,
    pub liveness: &'a dyn LivenessProbe,
    pub allowlist: &'a HostAllowlist,
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub repo: Option<String>,
    pub tag: Option<String>,
    pub jdk: Option<String>,
}

/// Where a package's source lives and which revision to build.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceLocation {
    pub resolution: RepositoryResolution,
    pub tag_match: Option<TagMatch>,
    /// Tag when one matched, otherwise the pinned commit or the given tag.
    pub revision: String,
}

#[derive(Debug, Clone)]
pub struct Generation {
    pub record: AnalysisRecord,
    pub buildspec: String,
    /// Words removed from the chosen command because they were unresolved.
    pub dropped: Vec<String>,
    pub diagnostics: Vec<Diagnostic>,
}

pub struct Pipeline<'a> {
    pub clients: Clients<'a>,
    pub registry: ActionRegistry,
    pub weights: ScoreWeights,
    /// Parent of the per-package scratch directories handed to checkouts.
    pub scratch: PathBuf,
}

impl<'a> Pipeline<'a> {
    pub fn new(clients: Clients<'a>, scratch: impl Into<PathBuf>) -> Self {
        Pipeline {
            clients,
            registry: ActionRegistry::builtin(),
            weights: ScoreWeights::default(),
            scratch: scratch.into(),
        }
    }

    fn resolve(
        &self,
        coordinate: &PackageCoordinate,
        pom: Option<&str>,
        overrides: &Overrides,
    ) -> Result<RepositoryResolution, PipelineError> {
        if let Some(repo) = &overrides.repo {
            return Ok(RepositoryResolution {
                coordinate: coordinate.clone(),
                repo_url: repo.clone(),
                pinned_commit: None,
                via: Origin::UserSupplied,
            });
        }
        let c = &self.clients;
        Ok(resolve_repository(
            coordinate,
            pom,
            &DiscoveryClients {
                provenance: c.provenance,
                metadata: c.metadata,
                liveness: c.liveness,
                allowlist: c.allowlist,
            },
        )?)
    }

    fn locate(
        &self,
        coordinate: &PackageCoordinate,
        pom: Option<&str>,
        overrides: &Overrides,
    ) -> Result<SourceLocation, PipelineError> {
        let resolution = self.resolve(coordinate, pom, overrides)?;
        if let Some(tag) = &overrides.tag {
            return Ok(SourceLocation {
                resolution,
                tag_match: None,
                revision: tag.clone(),
            });
        }
        let tags = self.clients.tags.tags(&resolution.repo_url)?;
        let matched = find_tag(&tags, coordinate);
        let (tag_match, revision) = match (&resolution.pinned_commit, matched) {
            // a pinned commit only accepts a tag that points at it
            (Some(pin), Ok(m))
                if m.commit
                    .as_deref()
                    .is_none_or(|c| c.eq_ignore_ascii_case(pin)) =>
            {
                let tag = m.tag().to_owned();
                (Some(m), tag)
            }
            (Some(pin), _) => (None, pin.clone()),
            (None, Ok(m)) => {
                let tag = m.tag().to_owned();
                (Some(m), tag)
            }
            (None, Err(source)) => {
                return Err(PipelineError::NoMatchingTag {
                    repo: resolution.repo_url.clone(),
                    source,
                })
            }
        };
        Ok(SourceLocation {
            resolution,
            tag_match,
            revision,
        })
    }

    pub fn find_source(
        &self,
        coordinate: &PackageCoordinate,
        overrides: &Overrides,
    ) -> Result<SourceLocation, PipelineError> {
        let pom = self.clients.artifacts.pom(coordinate)?;
        self.locate(coordinate, pom.as_deref(), overrides)
    }

    pub fn analyze(&self, repo_root: &Path) -> WorkflowAnalysis {
        analyze_repository(repo_root, &self.registry, &self.weights)
    }

    fn scratch_for(&self, coordinate: &PackageCoordinate) -> PathBuf {
        self.scratch
            .join(buildspec::store::file_stem(&coordinate.render()))
    }

    /// Locate, check out, analyse and emit. The record is returned, not stored.
    pub fn generate(
        &self,
        coordinate: &PackageCoordinate,
        overrides: &Overrides,
    ) -> Result<Generation, PipelineError> {
        let pom = self.clients.artifacts.pom(coordinate)?;
        let packaging = pom
            .as_deref()
            .and_then(|p| parse_pom(p).ok())
            .and_then(|info| info.packaging);
        if buildspec::is_webjar(coordinate, packaging.as_deref()) {
            return Err(BuildSpecError::UnsupportedPackage(format!(
                "{} is a webjar",
                coordinate.gav()
            ))
            .into());
        }
        let location = self.locate(coordinate, pom.as_deref(), overrides)?;
        let scratch = self.scratch_for(coordinate);
        let tree = self.clients.checkout.checkout(
            &location.resolution.repo_url,
            &location.revision,
            &scratch,
        )?;
        let analysis = self.analyze(&tree);
        let manifest = self.clients.artifacts.manifest(coordinate)?;
        let generated = generate_buildspec(
            coordinate,
            &GenerationInput {
                git_repo: &location.resolution.repo_url,
                tag_match: location.tag_match.as_ref(),
                revision: Some(&location.revision),
                candidates: &analysis.candidates,
                manifest: manifest.as_ref(),
                packaging: packaging.as_deref(),
                jdk_override: overrides.jdk.as_deref(),
                repo_root: Some(&tree),
            },
        )?;
        let text = emit(&generated.spec);
        Ok(Generation {
            record: AnalysisRecord::new(
                location.resolution,
                location.tag_match,
                analysis.candidates,
                generated.spec,
            ),
            buildspec: text,
            dropped: generated.dropped,
            diagnostics: analysis.diagnostics,
        })
    }
}
