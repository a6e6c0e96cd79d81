//! Class-file major version to Java release.

use crate::buildspec::normalize_jdk;

const TABLE: &str = include_str!("../../data/classfile_versions.csv");

/// Lowest JDK a buildspec can name.
pub const MIN_BUILDSPEC_JDK: u32 = 6;

/// `(class_major, java)` rows of the checked-in table, e.g. `(52, "8")`.
pub fn table() -> Vec<(u32, &'static str)> {
    TABLE
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .filter_map(|l| {
            let (c, j) = l.split_once(',')?;
            Some((c.trim().parse().ok()?, j.trim()))
        })
        .collect()
}

/// Java release that emits class files of `class_major`, as written in the table.
pub fn java_release(class_major: u32) -> Option<&'static str> {
    table()
        .into_iter()
        .find(|(c, _)| *c == class_major)
        .map(|(_, j)| j)
}

/// JDK major a buildspec should use to handle `class_major` class files.
///
/// Versions past the table follow the one-per-release rule; anything older
/// than Java 6 is raised to 6.
pub fn jdk_for_class_version(class_major: u32) -> u32 {
    let major = match java_release(class_major) {
        Some(j) => normalize_jdk(j).unwrap_or(MIN_BUILDSPEC_JDK),
        None => class_major.saturating_sub(44),
    };
    major.max(MIN_BUILDSPEC_JDK)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent restatement of the JVM specification's numbering: 45 is
    // JDK 1.0.2/1.1 and every later release bumps the major by one, with
    // 1.2 through 1.4 keeping the "1." prefix.
    fn oracle(class_major: u32) -> String {
        match class_major {
            45 => "1.1".into(),
            46..=48 => format!("1.{}", class_major - 44),
            _ => (class_major - 44).to_string(),
        }
    }

    #[test]
    fn table_matches_brute_force() {
        let rows = table();
        assert_eq!(rows.first().map(|r| r.0), Some(45));
        for (i, (c, j)) in rows.iter().enumerate() {
            assert_eq!(*c, 45 + i as u32, "table is contiguous");
            assert_eq!(*j, oracle(*c));
        }
        assert!(rows.len() >= 25);
    }

    #[test]
    fn suggestions() {
        assert_eq!(jdk_for_class_version(61), 17);
        assert_eq!(jdk_for_class_version(52), 8);
        assert_eq!(jdk_for_class_version(55), 11);
        assert_eq!(jdk_for_class_version(46), 6);
        assert_eq!(jdk_for_class_version(90), 46);
    }
}
