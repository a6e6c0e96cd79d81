//! Maven package identities and version tokenization.

use std::fmt;
use std::str::FromStr;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const PURL_PREFIX: &str = "pkg:maven/";

/// Characters that must be escaped inside a PURL namespace, name or version.
const PURL_SEGMENT: &AsciiSet = &CONTROLS
    .add(b' ')
    .add(b'"')
    .add(b'#')
    .add(b'%')
    .add(b'/')
    .add(b'?')
    .add(b'@')
    .add(b'<')
    .add(b'>');

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed purl `{input}`: {reason}")]
pub struct MalformedPurl {
    pub input: String,
    pub reason: &'static str,
}

/// A Maven group/artifact/version triple parsed from a `pkg:maven/` package URL.
///
/// Qualifiers and subpath are carried through untouched so that rendering a
/// canonical PURL reproduces it exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PackageCoordinate {
    pub purl: String,
    pub group: String,
    pub artifact: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qualifiers: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subpath: Option<String>,
}

impl PackageCoordinate {
    pub fn new(group: &str, artifact: &str, version: &str) -> Result<Self, MalformedPurl> {
        let mut coordinate = PackageCoordinate {
            purl: String::new(),
            group: group.to_owned(),
            artifact: artifact.to_owned(),
            version: version.to_owned(),
            qualifiers: None,
            subpath: None,
        };
        coordinate.validate(&format!("{group}:{artifact}:{version}"))?;
        coordinate.purl = coordinate.render();
        Ok(coordinate)
    }

    /// Render the coordinate back to PURL text.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{PURL_PREFIX}{}/{}@{}",
            utf8_percent_encode(&self.group, PURL_SEGMENT),
            utf8_percent_encode(&self.artifact, PURL_SEGMENT),
            utf8_percent_encode(&self.version, PURL_SEGMENT),
        );
        if let Some(q) = &self.qualifiers {
            out.push('?');
            out.push_str(q);
        }
        if let Some(s) = &self.subpath {
            out.push('#');
            out.push_str(s);
        }
        out
    }

    /// Packaging type from the `type` qualifier, if any.
    pub fn packaging_qualifier(&self) -> Option<&str> {
        self.qualifiers.as_deref().and_then(|q| {
            q.split('&')
                .filter_map(|kv| kv.split_once('='))
                .find(|(k, _)| *k == "type")
                .map(|(_, v)| v)
        })
    }

    /// `group:artifact:version`
    pub fn gav(&self) -> String {
        format!("{}:{}:{}", self.group, self.artifact, self.version)
    }

    fn validate(&self, input: &str) -> Result<(), MalformedPurl> {
        let err = |reason| MalformedPurl {
            input: input.to_owned(),
            reason,
        };
        if self.group.is_empty() {
            return Err(err("empty group"));
        }
        if self.artifact.is_empty() {
            return Err(err("empty artifact"));
        }
        if self.version.is_empty() {
            return Err(err("empty version"));
        }
        if self.version.contains('/') {
            return Err(err("version contains `/`"));
        }
        if self.group.contains('/') || self.artifact.contains('/') {
            return Err(err("too many path segments"));
        }
        Ok(())
    }
}

impl fmt::Display for PackageCoordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.purl)
    }
}

impl FromStr for PackageCoordinate {
    type Err = MalformedPurl;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_purl(s)
    }
}

fn decode(segment: &str, input: &str) -> Result<String, MalformedPurl> {
    percent_decode_str(segment)
        .decode_utf8()
        .map(|s| s.into_owned())
        .map_err(|_| MalformedPurl {
            input: input.to_owned(),
            reason: "invalid percent-encoding",
        })
}

/// Parse `pkg:maven/<group>/<artifact>@<version>[?qualifiers][#subpath]`.
pub fn parse_purl(text: &str) -> Result<PackageCoordinate, MalformedPurl> {
    let err = |reason| MalformedPurl {
        input: text.to_owned(),
        reason,
    };
    let rest = text.strip_prefix(PURL_PREFIX).ok_or_else(|| {
        if text.starts_with("pkg:") {
            err("only the maven type is supported")
        } else {
            err("missing `pkg:maven/` scheme")
        }
    })?;

    let (rest, subpath) = match rest.split_once('#') {
        Some((head, tail)) => (head, Some(tail.to_owned())),
        None => (rest, None),
    };
    let (rest, qualifiers) = match rest.split_once('?') {
        Some((head, tail)) => (head, Some(tail.to_owned())),
        None => (rest, None),
    };
    let (path, version) = rest
        .rsplit_once('@')
        .ok_or_else(|| err("missing `@version`"))?;
    let (group, artifact) = path
        .split_once('/')
        .ok_or_else(|| err("missing group or artifact segment"))?;

    let coordinate = PackageCoordinate {
        purl: String::new(),
        group: decode(group, text)?,
        artifact: decode(artifact, text)?,
        version: decode(version, text)?,
        qualifiers: qualifiers.filter(|q| !q.is_empty()),
        subpath: subpath.filter(|s| !s.is_empty()),
    };
    coordinate.validate(text)?;
    let purl = coordinate.render();
    Ok(PackageCoordinate { purl, ..coordinate })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TokenKind {
    Numeric,
    Alpha,
}

/// One alphanumeric run of a version string.
///
/// `separator` holds the (possibly empty) text between the previous token
/// and this one; `offset` is the byte offset of the token in the source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionToken {
    pub text: String,
    pub kind: TokenKind,
    pub separator: String,
    pub offset: usize,
}

impl VersionToken {
    pub fn end(&self) -> usize {
        self.offset + self.text.len()
    }

    fn same_as(&self, other: &VersionToken) -> bool {
        self.kind == other.kind && self.text.eq_ignore_ascii_case(&other.text)
    }
}

/// Pre-release markers recognised at the tail of a version.
pub const PRE_RELEASE_MARKERS: &[&str] = &["rc", "alpha", "beta", "m", "snapshot", "cr", "ea"];

pub(crate) fn is_marker(token: &VersionToken) -> bool {
    token.kind == TokenKind::Alpha
        && PRE_RELEASE_MARKERS
            .iter()
            .any(|m| token.text.eq_ignore_ascii_case(m))
}

/// A version split into alphanumeric tokens and the separators between them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionParts {
    pub tokens: Vec<VersionToken>,
    /// Separator text after the final token.
    pub trailing: String,
    /// Index of the first token belonging to the pre-release/build suffix.
    pub suffix_start: Option<usize>,
}

impl VersionParts {
    /// Tokens before the suffix.
    pub fn parts(&self) -> &[VersionToken] {
        &self.tokens[..self.suffix_start.unwrap_or(self.tokens.len())]
    }

    pub fn suffix(&self) -> &[VersionToken] {
        match self.suffix_start {
            Some(i) => &self.tokens[i..],
            None => &[],
        }
    }

    pub fn numeric_parts(&self) -> impl Iterator<Item = &str> {
        self.parts()
            .iter()
            .filter(|t| t.kind == TokenKind::Numeric)
            .map(|t| t.text.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for token in &self.tokens {
            out.push_str(&token.separator);
            out.push_str(&token.text);
        }
        out.push_str(&self.trailing);
        out
    }
}

/// Split a version (or any text) into digit runs and letter runs.
///
/// Every non-alphanumeric character is separator text. Trailing pre-release
/// markers with their numeric qualifiers, and anything after a `+`, form the
/// suffix.
pub fn tokenize_version(version: &str) -> VersionParts {
    let mut tokens: Vec<VersionToken> = Vec::new();
    let mut separator = String::new();
    let mut plus_at: Option<usize> = None;
    let mut chars = version.char_indices().peekable();

    while let Some((i, c)) = chars.next() {
        let kind = if c.is_ascii_digit() {
            TokenKind::Numeric
        } else if c.is_alphabetic() {
            TokenKind::Alpha
        } else {
            if c == '+' && plus_at.is_none() {
                plus_at = Some(tokens.len());
            }
            separator.push(c);
            continue;
        };
        let mut end = i + c.len_utf8();
        while let Some(&(j, next)) = chars.peek() {
            let same = match kind {
                TokenKind::Numeric => next.is_ascii_digit(),
                TokenKind::Alpha => next.is_alphabetic(),
            };
            if !same {
                break;
            }
            end = j + next.len_utf8();
            chars.next();
        }
        tokens.push(VersionToken {
            text: version[i..end].to_owned(),
            kind,
            separator: std::mem::take(&mut separator),
            offset: i,
        });
    }

    // Earliest marker such that every later token is a marker or numeric.
    let mut marker_start = None;
    for (i, token) in tokens.iter().enumerate().rev() {
        if is_marker(token) {
            marker_start = Some(i);
        } else if token.kind != TokenKind::Numeric {
            break;
        }
    }
    let plus_start = plus_at.filter(|&i| i < tokens.len());
    let suffix_start = match (marker_start, plus_start) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };

    VersionParts {
        tokens,
        trailing: separator,
        suffix_start,
    }
}

/// Token sequence equality, ignoring ASCII case.
pub(crate) fn tokens_equal(a: &VersionToken, b: &VersionToken) -> bool {
    a.same_as(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(tokens: &[VersionToken]) -> Vec<&str> {
        tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn parses_catboost_purl() {
        let c = parse_purl("pkg:maven/ai.catboost/catboost-spark-macros_2.11@0.25-rc1").unwrap();
        assert_eq!(c.group, "ai.catboost");
        assert_eq!(c.artifact, "catboost-spark-macros_2.11");
        assert_eq!(c.version, "0.25-rc1");
    }

    #[test]
    fn parses_jordan_purl() {
        let c = parse_purl("pkg:maven/zone.gryphon.jordan/jordan@1.0").unwrap();
        assert_eq!(
            (c.group.as_str(), c.artifact.as_str(), c.version.as_str()),
            ("zone.gryphon.jordan", "jordan", "1.0")
        );
        assert_eq!(c.purl, "pkg:maven/zone.gryphon.jordan/jordan@1.0");
    }

    #[test]
    fn rejects_non_maven_and_incomplete() {
        for bad in [
            "pkg:npm/left-pad@1.3.0",
            "maven/a/b@1",
            "pkg:maven/a/b",
            "pkg:maven/a@1.0",
            "pkg:maven//b@1.0",
            "pkg:maven/a/@1.0",
            "pkg:maven/a/b@",
            "pkg:maven/a/b/c@1",
        ] {
            assert!(parse_purl(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn percent_decoding_and_qualifiers() {
        let c = parse_purl("pkg:maven/org.example/my%20lib@1.0?type=pom").unwrap();
        assert_eq!(c.artifact, "my lib");
        assert_eq!(c.packaging_qualifier(), Some("pom"));
        assert_eq!(c.purl, "pkg:maven/org.example/my%20lib@1.0?type=pom");
    }

    #[test]
    fn tokenizes_rc_suffix() {
        let v = tokenize_version("0.25-rc1");
        assert_eq!(texts(v.parts()), ["0", "25"]);
        assert_eq!(texts(v.suffix()), ["rc", "1"]);
    }

    #[test]
    fn tokenizes_plain_versions() {
        let v = tokenize_version("1.0.1");
        assert_eq!(texts(v.parts()), ["1", "0", "1"]);
        assert!(v.suffix().is_empty());

        let v = tokenize_version("1.8.0_292");
        assert_eq!(texts(v.parts()), ["1", "8", "0", "292"]);
        assert!(v.suffix().is_empty());
    }

    #[test]
    fn unknown_trailing_alpha_is_not_suffix() {
        let v = tokenize_version("1.0.Final");
        assert_eq!(texts(v.parts()), ["1", "0", "Final"]);
        assert_eq!(v.suffix_start, None);
    }

    #[test]
    fn stacked_markers_and_build_metadata() {
        let v = tokenize_version("2.0.0-M1-SNAPSHOT");
        assert_eq!(texts(v.suffix()), ["M", "1", "SNAPSHOT"]);
        let v = tokenize_version("1.2.3+build.7");
        assert_eq!(texts(v.parts()), ["1", "2", "3"]);
        assert_eq!(texts(v.suffix()), ["build", "7"]);
    }

    proptest! {
        #[test]
        fn render_reproduces_input(v in "[A-Za-z0-9._+-]{0,24}") {
            let parts = tokenize_version(&v);
            prop_assert_eq!(parts.render(), v);
            for t in &parts.tokens {
                match t.kind {
                    TokenKind::Numeric => prop_assert!(t.text.chars().all(|c| c.is_ascii_digit())),
                    TokenKind::Alpha => prop_assert!(t.text.chars().all(|c| c.is_ascii_alphabetic())),
                }
            }
        }

        #[test]
        fn parse_purl_never_panics(s in "\\PC{0,40}") {
            let _ = parse_purl(&s);
        }

        #[test]
        fn canonical_purl_renders_identically(
            g in "[a-z][a-z0-9.]{0,12}",
            a in "[a-z][a-z0-9_-]{0,12}",
            v in "[0-9][A-Za-z0-9.-]{0,8}",
        ) {
            let text = format!("pkg:maven/{g}/{a}@{v}");
            let c = parse_purl(&text).unwrap();
            prop_assert_eq!(c.render(), text);
        }
    }
}
