//! Matching repository tags against an artifact version.
//!
//! A tag is decomposed into `prefix + version + suffix`, where the version run
//! must reproduce the artifact's version tokens. Candidates are ranked by a
//! lexicographic [`MatchScore`]; a cheap exact lookup short-circuits the full
//! evaluation when it cannot change the answer.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coordinates::{tokenize_version, tokens_equal, PackageCoordinate, VersionParts};

/// Prefix fragments that mark a release tag family.
pub const PREFIX_KEYWORDS: &[&str] = &["release", "rel", "version"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TagError {
    #[error("no tag matches version `{version}` ({candidates} tags examined)")]
    NoMatchingTag { version: String, candidates: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Relaxation {
    SuffixDropped,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagDecomposition {
    pub tag: String,
    pub prefix: String,
    pub matched_version: String,
    pub suffix: String,
    pub relaxation: Relaxation,
}

/// Ranking key for a decomposed tag. Larger is better.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchScore {
    /// 2 = exact, 1 = pre-release suffix dropped.
    pub exactness: u8,
    /// 2 = prefix is part of the artifact name, 1 = prefix has a keyword, 0 = other.
    pub prefix_class: u8,
    /// Negated prefix length.
    pub prefix_brevity: i64,
    /// 1 when the tag mentions `release`.
    pub keyword_bonus: u8,
    /// Final tie-break; the smaller tag text wins.
    pub tie_key: String,
}

impl Ord for MatchScore {
    fn cmp(&self, other: &Self) -> Ordering {
        (
            self.exactness,
            self.prefix_class,
            self.prefix_brevity,
            self.keyword_bonus,
        )
            .cmp(&(
                other.exactness,
                other.prefix_class,
                other.prefix_brevity,
                other.keyword_bonus,
            ))
            .then_with(|| other.tie_key.cmp(&self.tie_key))
    }
}

impl PartialOrd for MatchScore {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagMatch {
    pub decomposition: TagDecomposition,
    pub score: MatchScore,
    pub commit: Option<String>,
}

impl TagMatch {
    pub fn tag(&self) -> &str {
        &self.decomposition.tag
    }
}

/// Returns `version` or `v<version>` when present in `tags`, preferring the bare form.
pub fn quick_match<'a, I>(tags: I, version: &str) -> Option<&'a str>
where
    I: IntoIterator<Item = &'a str>,
{
    let prefixed = format!("v{version}");
    let mut found_prefixed = None;
    for tag in tags {
        if tag == version {
            return Some(tag);
        }
        if tag == prefixed {
            found_prefixed = Some(tag);
        }
    }
    found_prefixed
}

fn is_flexible_separator(sep: &str) -> bool {
    matches!(sep, "" | "." | "-" | "_")
}

fn separators_compatible(version_sep: &str, tag_sep: &str) -> bool {
    version_sep == tag_sep || (is_flexible_separator(version_sep) && is_flexible_separator(tag_sep))
}

fn run_is_isolated(tag: &str, start: usize, end: usize) -> bool {
    let before = &tag.as_bytes()[..start];
    let after = &tag.as_bytes()[end..];
    if before.last().is_some_and(u8::is_ascii_digit)
        || after.first().is_some_and(u8::is_ascii_digit)
    {
        return false;
    }
    // A dotted numeric continuation means a different version (`1.0` inside `1.0.1`).
    if before.len() >= 2
        && before[before.len() - 1] == b'.'
        && before[before.len() - 2].is_ascii_digit()
    {
        return false;
    }
    if after.len() >= 2 && after[0] == b'.' && after[1].is_ascii_digit() {
        return false;
    }
    true
}

/// With `bare_release` set, a run followed by a pre-release marker of the
/// tag's own (`0.25` in `0.25-rc2`) is skipped: that tag names another release.
fn find_run(
    tag: &str,
    tag_parts: &VersionParts,
    wanted: &[crate::coordinates::VersionToken],
    bare_release: bool,
) -> Option<(usize, usize)> {
    let tokens = &tag_parts.tokens;
    if wanted.is_empty() || tokens.len() < wanted.len() {
        return None;
    }
    'start: for start in 0..=tokens.len() - wanted.len() {
        for (k, want) in wanted.iter().enumerate() {
            let have = &tokens[start + k];
            if !tokens_equal(have, want) {
                continue 'start;
            }
            if k > 0 && !separators_compatible(&want.separator, &have.separator) {
                continue 'start;
            }
        }
        let begin = tokens[start].offset;
        let end = tokens[start + wanted.len() - 1].end();
        let marker_follows = bare_release
            && tokens
                .get(start + wanted.len())
                .is_some_and(crate::coordinates::is_marker);
        if run_is_isolated(tag, begin, end) && !marker_follows {
            return Some((begin, end));
        }
    }
    None
}

/// Locate the artifact version inside `tag`.
///
/// An exact run (including any pre-release suffix) is preferred; otherwise a
/// run matching only the release part is accepted when the version carries a
/// suffix. The leftmost qualifying run is used.
pub fn decompose_tag(tag: &str, version: &VersionParts) -> Option<TagDecomposition> {
    let tag_parts = tokenize_version(tag);
    let mut attempts = vec![(Relaxation::Exact, &version.tokens[..])];
    if !version.suffix().is_empty() && !version.parts().is_empty() {
        attempts.push((Relaxation::SuffixDropped, version.parts()));
    }
    attempts.into_iter().find_map(|(relaxation, wanted)| {
        find_run(
            tag,
            &tag_parts,
            wanted,
            relaxation == Relaxation::SuffixDropped,
        )
        .map(|(begin, end)| TagDecomposition {
            tag: tag.to_owned(),
            prefix: tag[..begin].to_owned(),
            matched_version: tag[begin..end].to_owned(),
            suffix: tag[end..].to_owned(),
            relaxation,
        })
    })
}

fn squash(text: &str) -> String {
    text.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Classify the prefix of a decomposition.
///
/// An empty prefix or a bare `v` carries no information about the artifact
/// and falls in the lowest class.
pub fn prefix_class(prefix: &str, artifact: &str) -> u8 {
    let squashed = squash(prefix);
    if squashed.is_empty() || squashed == "v" {
        return 0;
    }
    if squash(artifact).contains(&squashed) {
        return 2;
    }
    let lower = prefix.to_lowercase();
    if PREFIX_KEYWORDS.iter().any(|k| lower.contains(k)) {
        1
    } else {
        0
    }
}

pub fn score(decomposition: &TagDecomposition, coordinate: &PackageCoordinate) -> MatchScore {
    MatchScore {
        exactness: match decomposition.relaxation {
            Relaxation::Exact => 2,
            Relaxation::SuffixDropped => 1,
        },
        prefix_class: prefix_class(&decomposition.prefix, &coordinate.artifact),
        prefix_brevity: -(decomposition.prefix.len() as i64),
        keyword_bonus: u8::from(decomposition.tag.to_lowercase().contains("release")),
        tie_key: decomposition.tag.clone(),
    }
}

/// The early-termination answer: the bare or `v`-prefixed tag, provided no
/// other tag in the set also decomposes exactly.
pub fn early_match<'a>(
    tags: &'a BTreeMap<String, String>,
    version: &str,
    parts: &VersionParts,
) -> Option<&'a str> {
    let quick = quick_match(tags.keys().map(String::as_str), version)?;
    let prefixed = format!("v{version}");
    let contested = tags
        .keys()
        .filter(|t| t.as_str() != version && **t != prefixed)
        .any(|t| decompose_tag(t, parts).is_some_and(|d| d.relaxation == Relaxation::Exact));
    (!contested).then_some(quick)
}

fn commit_for(tags: &BTreeMap<String, String>, tag: &str) -> Option<String> {
    tags.get(tag).filter(|c| !c.is_empty()).cloned()
}

/// Pick the tag that best matches the coordinate's version.
pub fn find_tag(
    tags: &BTreeMap<String, String>,
    coordinate: &PackageCoordinate,
) -> Result<TagMatch, TagError> {
    let parts = tokenize_version(&coordinate.version);

    if let Some(tag) = early_match(tags, &coordinate.version, &parts) {
        let decomposition = decompose_tag(tag, &parts).unwrap_or_else(|| {
            let prefix_len = tag.len() - coordinate.version.len();
            TagDecomposition {
                tag: tag.to_owned(),
                prefix: tag[..prefix_len].to_owned(),
                matched_version: coordinate.version.clone(),
                suffix: String::new(),
                relaxation: Relaxation::Exact,
            }
        });
        return Ok(TagMatch {
            score: score(&decomposition, coordinate),
            commit: commit_for(tags, tag),
            decomposition,
        });
    }

    tags.keys()
        .filter_map(|tag| decompose_tag(tag, &parts))
        .map(|d| (score(&d, coordinate), d))
        .max_by(|a, b| a.0.cmp(&b.0))
        .map(|(score, decomposition)| TagMatch {
            commit: commit_for(tags, &decomposition.tag),
            score,
            decomposition,
        })
        .ok_or_else(|| TagError::NoMatchingTag {
            version: coordinate.version.clone(),
            candidates: tags.len(),
        })
}
