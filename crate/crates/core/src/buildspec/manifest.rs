//! `META-INF/MANIFEST.MF` of a JAR.

use std::io::{Read, Seek};

use indexmap::IndexMap;

pub const MANIFEST_PATH: &str = "META-INF/MANIFEST.MF";

/// Main-section attributes of a manifest, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub attributes: IndexMap<String, String>,
}

impl Manifest {
    /// Attribute lookup; names are case-insensitive.
    pub fn get(&self, name: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

/// Parse manifest text, folding continuation lines (leading single space).
pub fn parse_manifest(text: &str) -> Manifest {
    let mut attributes: IndexMap<String, String> = IndexMap::new();
    let mut last: Option<String> = None;
    for line in text.split('\n') {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            // end of the main section
            if !attributes.is_empty() {
                break;
            }
            continue;
        }
        if let Some(cont) = line.strip_prefix(' ') {
            if let Some(v) = last.as_ref().and_then(|k| attributes.get_mut(k)) {
                v.push_str(cont);
            }
            continue;
        }
        if let Some((k, v)) = line.split_once(':') {
            let key = k.trim().to_owned();
            attributes.insert(key.clone(), v.strip_prefix(' ').unwrap_or(v).to_owned());
            last = Some(key);
        }
    }
    Manifest { attributes }
}

/// Read the manifest out of a JAR; `None` if the archive has none.
pub fn read_jar_manifest<R: Read + Seek>(
    jar: R,
) -> Result<Option<Manifest>, zip::result::ZipError> {
    let mut archive = zip::ZipArchive::new(jar)?;
    let mut entry = match archive.by_name(MANIFEST_PATH) {
        Ok(e) => e,
        Err(zip::result::ZipError::FileNotFound) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut bytes = Vec::new();
    entry.read_to_end(&mut bytes)?;
    Ok(Some(parse_manifest(&String::from_utf8_lossy(&bytes))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Cursor, Write};

    #[test]
    fn folds_continuations() {
        let m = parse_manifest("Manifest-Version: 1.0\r\nCreated-By: 1.8.0_292 (Adopt\r\n OpenJDK)\r\nbuild-jdk: 11\r\n\r\nName: x\r\nBuild-Jdk: 99\r\n");
        assert_eq!(m.get("Created-By"), Some("1.8.0_292 (AdoptOpenJDK)"));
        assert_eq!(m.get("Build-Jdk"), Some("11"));
    }

    #[test]
    fn reads_from_zip() {
        let mut buf = Cursor::new(Vec::new());
        {
            let mut w = zip::ZipWriter::new(&mut buf);
            w.start_file(MANIFEST_PATH, zip::write::SimpleFileOptions::default())
                .unwrap();
            w.write_all(b"Manifest-Version: 1.0\nBuild-Jdk-Spec: 17\n")
                .unwrap();
            w.finish().unwrap();
        }
        buf.set_position(0);
        let m = read_jar_manifest(buf).unwrap().unwrap();
        assert_eq!(m.get("Build-Jdk-Spec"), Some("17"));

        let mut empty = Cursor::new(Vec::new());
        zip::ZipWriter::new(&mut empty).finish().unwrap();
        empty.set_position(0);
        assert_eq!(read_jar_manifest(empty).unwrap(), None);
    }
}
