//! Minimal shell text handling: command separation, word splitting, quoting.
//!
//! This is a reachability grammar, not a shell. Subshells, heredocs and
//! control flow are left as plain lines.

/// Split a script body into individual commands.
///
/// Backslash-newline continuations are joined; commands are separated by
/// newlines, `&&`, `||`, `;` and `|` outside quotes and `${{ }}` expressions.
/// Comment lines and trailing comments are dropped.
pub fn split_commands(script: &str) -> Vec<String> {
    let joined = join_continuations(script);
    let mut commands = Vec::new();
    for line in joined.lines() {
        split_line(line, &mut commands);
    }
    commands
}

fn join_continuations(script: &str) -> String {
    let mut out = String::with_capacity(script.len());
    let mut chars = script.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.peek() {
                Some('\n') => {
                    chars.next();
                    out.push(' ');
                    continue;
                }
                Some('\r') => {
                    chars.next();
                    if chars.peek() == Some(&'\n') {
                        chars.next();
                    }
                    out.push(' ');
                    continue;
                }
                _ => {}
            }
        }
        out.push(c);
    }
    out
}

fn push_segment(segment: &str, out: &mut Vec<String>) {
    let trimmed = segment.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_owned());
    }
}

fn split_line(line: &str, out: &mut Vec<String>) {
    let bytes = line.as_bytes();
    let mut start = 0;
    let mut i = 0;
    let mut single = false;
    let mut double = false;
    let mut expr_depth = 0usize;
    while i < bytes.len() {
        let b = bytes[i];
        if single {
            if b == b'\'' {
                single = false;
            }
            i += 1;
            continue;
        }
        if b == b'\\' {
            i += 2;
            continue;
        }
        if double {
            if b == b'"' {
                double = false;
            }
            i += 1;
            continue;
        }
        if line[i..].starts_with("${{") {
            expr_depth += 1;
            i += 3;
            continue;
        }
        if expr_depth > 0 {
            if line[i..].starts_with("}}") {
                expr_depth -= 1;
                i += 2;
            } else {
                i += 1;
            }
            continue;
        }
        match b {
            b'\'' => single = true,
            b'"' => double = true,
            b'#' if i == 0 || bytes[i - 1].is_ascii_whitespace() => {
                push_segment(&line[start..i], out);
                return;
            }
            b'&' | b'|' if bytes.get(i + 1) == Some(&b) => {
                push_segment(&line[start..i], out);
                i += 2;
                start = i;
                continue;
            }
            b';' | b'|' => {
                push_segment(&line[start..i], out);
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    push_segment(&line[start..], out);
}

/// Split a single command into words, removing quotes.
pub fn split_words(command: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    let mut in_word = false;
    let mut chars = command.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            c if c.is_whitespace() => {
                if in_word {
                    words.push(std::mem::take(&mut current));
                    in_word = false;
                }
            }
            // `${{ expr }}` is kept verbatim, spaces and quotes included.
            '$' if chars.clone().take(2).eq("{{".chars()) => {
                in_word = true;
                current.push('$');
                let mut prev = '\0';
                for q in chars.by_ref() {
                    current.push(q);
                    if prev == '}' && q == '}' {
                        break;
                    }
                    prev = q;
                }
            }
            '\'' => {
                in_word = true;
                for q in chars.by_ref() {
                    if q == '\'' {
                        break;
                    }
                    current.push(q);
                }
            }
            '"' => {
                in_word = true;
                while let Some(q) = chars.next() {
                    match q {
                        '"' => break,
                        '\\' => match chars.peek() {
                            Some(&e @ ('"' | '\\' | '$' | '`')) => {
                                current.push(e);
                                chars.next();
                            }
                            _ => current.push('\\'),
                        },
                        _ => current.push(q),
                    }
                }
            }
            '\\' => {
                in_word = true;
                if let Some(e) = chars.next() {
                    current.push(e);
                }
            }
            _ => {
                in_word = true;
                current.push(c);
            }
        }
    }
    if in_word {
        words.push(current);
    }
    words
}

fn is_plain(c: char) -> bool {
    c.is_ascii_alphanumeric() || "-_./:=@,+%^~!".contains(c)
}

/// Quote a word so that [`split_words`] returns it unchanged.
pub fn quote(word: &str) -> String {
    if !word.is_empty() && word.chars().all(is_plain) {
        return word.to_owned();
    }
    let mut out = String::with_capacity(word.len() + 2);
    out.push('"');
    for c in word.chars() {
        if matches!(c, '"' | '\\' | '$' | '`') {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// `NAME=value` shell assignment, if `word` is one.
pub fn as_assignment(word: &str) -> Option<(&str, &str)> {
    let (name, value) = word.split_once('=')?;
    let mut chars = name.chars();
    let first = chars.next()?;
    if !(first.is_ascii_alphabetic() || first == '_')
        || !chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
    {
        return None;
    }
    Some((name, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn splits_on_separators_and_continuations() {
        let script = "set -e\n./gradlew build \\\n  --no-daemon && echo ok; mvn -v | tee out\n# comment\nnpm ci # trailing";
        assert_eq!(
            split_commands(script),
            [
                "set -e",
                "./gradlew build    --no-daemon",
                "echo ok",
                "mvn -v",
                "tee out",
                "npm ci"
            ]
        );
    }

    #[test]
    fn keeps_quoted_and_expression_separators() {
        let script = "echo 'a && b' \"c;d\" ${{ env.A || 'x' }}";
        assert_eq!(split_commands(script).len(), 1);
    }

    #[test]
    fn word_splitting_handles_quotes() {
        assert_eq!(
            split_words(r#"mvn -Dargs="a b" 'c d' e\ f"#),
            ["mvn", "-Dargs=a b", "c d", "e f"]
        );
        assert_eq!(split_words(r#"x "" y"#), ["x", "", "y"]);
        assert_eq!(
            split_words("-Pjava=${{ matrix.java }} ${{ a && 'b c' }}"),
            ["-Pjava=${{ matrix.java }}", "${{ a && 'b c' }}"]
        );
    }

    #[test]
    fn assignments() {
        assert_eq!(
            as_assignment("JAVA_HOME=/opt/jdk"),
            Some(("JAVA_HOME", "/opt/jdk"))
        );
        assert_eq!(as_assignment("-Dx=1"), None);
        assert_eq!(as_assignment("=1"), None);
    }

    proptest! {
        #[test]
        fn quote_round_trips(word in "\\PC{0,20}") {
            prop_assert_eq!(split_words(&quote(&word)), vec![word]);
        }
    }
}
