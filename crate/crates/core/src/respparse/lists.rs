//! Bracketed list fragments: `[SDG 9, SDG 11]` and `[[9.5], [9.4, 9.b]]`.

use std::sync::OnceLock;

use regex::Regex;

use super::{strip_bold, ParseError, ParseSection};
use crate::taxonomy::{SdgId, TargetId};

fn sdg_token_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^SDG\s*-?\s*([0-9]{1,3})(?:\s*(?:\(.*\)|:.*|-.*|\s.*))?$").unwrap()
    })
}

fn is_empty_marker(s: &str) -> bool {
    matches!(
        s.to_ascii_lowercase().as_str(),
        "" | "none" | "n/a" | "na" | "-" | "empty" | "unknown"
    )
}

fn clean_fragment(fragment: &str) -> String {
    let s = strip_bold(fragment);
    s.trim().trim_end_matches(['.', ';']).trim().to_string()
}

/// Splits on `,`/`;` that are not nested inside parentheses or brackets.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' | ';' if depth <= 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

/// Parses an SDG list, preserving order and dropping duplicates with a
/// warning.
pub fn parse_sdg_list(fragment: &str) -> Result<(Vec<SdgId>, Vec<String>), ParseError> {
    let err = || ParseError::SdgList {
        section: ParseSection::Unknown,
        fragment: fragment.to_string(),
    };
    let s = clean_fragment(fragment);
    let inner = if let Some(rest) = s.strip_prefix('[') {
        rest.strip_suffix(']').ok_or_else(err)?.trim()
    } else {
        s.as_str()
    };
    if is_empty_marker(inner) {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut sdgs: Vec<SdgId> = Vec::new();
    let mut warnings = Vec::new();
    for token in split_top_level(inner) {
        let token = token.trim().trim_matches(|c| c == '"' || c == '\'').trim();
        if token.is_empty() {
            continue;
        }
        let caps = sdg_token_regex().captures(token).ok_or_else(err)?;
        let n: u8 = caps[1].parse().map_err(|_| err())?;
        let id = SdgId::new(n).map_err(|_| err())?;
        if sdgs.contains(&id) {
            warnings.push(format!("duplicate SDG {id} dropped"));
        } else {
            sdgs.push(id);
        }
    }
    Ok((sdgs, warnings))
}

/// Lenient variant for the IFR block: accepts `SDG 15`, `15`, `15.1` (mapped
/// to its goal); unparseable tokens become warnings.
pub fn parse_sdg_list_lenient(fragment: &str) -> (Vec<SdgId>, Vec<String>) {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"(?i)^(?:SDG\s*-?\s*)?([0-9]{1,3})(?:\.[0-9a-z]{1,2})?\b").unwrap()
    });
    let s = clean_fragment(fragment);
    let inner = s.trim_start_matches('[').trim_end_matches(']').trim();
    let mut sdgs = Vec::new();
    let mut warnings = Vec::new();
    if is_empty_marker(inner) {
        return (sdgs, warnings);
    }
    for token in split_top_level(inner) {
        let token = token.trim().trim_matches(|c| c == '"' || c == '\'').trim();
        if token.is_empty() {
            continue;
        }
        let parsed = re
            .captures(token)
            .and_then(|c| c[1].parse::<u8>().ok())
            .and_then(|n| SdgId::new(n).ok());
        match parsed {
            Some(id) if !sdgs.contains(&id) => sdgs.push(id),
            Some(_) => {}
            None => warnings.push(format!("unrecognized IFR SDG token {token:?} ignored")),
        }
    }
    (sdgs, warnings)
}

#[derive(Debug)]
enum Node {
    Atom(String),
    List(Vec<Node>),
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
}

impl Cursor<'_> {
    fn skip_ws(&mut self) {
        while self.chars.peek().is_some_and(|c| c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn list(&mut self, depth: usize) -> Option<Node> {
        if depth > 2 {
            return None;
        }
        // caller has consumed '['
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            match self.chars.peek()? {
                ']' => {
                    self.chars.next();
                    return Some(Node::List(items));
                }
                ',' => {
                    // empty slot or trailing comma
                    self.chars.next();
                }
                '[' => {
                    self.chars.next();
                    items.push(self.list(depth + 1)?);
                }
                _ => {
                    let mut atom = String::new();
                    while let Some(&c) = self.chars.peek() {
                        if c == ',' || c == ']' || c == '[' {
                            break;
                        }
                        atom.push(c);
                        self.chars.next();
                    }
                    items.push(Node::Atom(atom.trim().to_string()));
                }
            }
        }
    }
}

fn parse_target_atom(atom: &str) -> Option<TargetId> {
    let a = atom.trim().trim_matches(|c| c == '"' || c == '\'').trim();
    let a = a
        .strip_prefix("SDG")
        .or_else(|| a.strip_prefix("Target"))
        .unwrap_or(a)
        .trim();
    a.parse().ok()
}

/// Parses a nested target matrix. Inner list count may differ from the SDG
/// list; reconciliation happens during normalization.
pub fn parse_target_matrix(
    fragment: &str,
) -> Result<(Vec<Vec<TargetId>>, Vec<String>), ParseError> {
    let err = || ParseError::TargetMatrix {
        section: ParseSection::Unknown,
        fragment: fragment.to_string(),
    };
    let s = clean_fragment(fragment);
    if is_empty_marker(&s) {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut cursor = Cursor {
        chars: s.chars().peekable(),
    };
    cursor.skip_ws();
    if cursor.chars.next() != Some('[') {
        return Err(err());
    }
    let Node::List(items) = cursor.list(1).ok_or_else(err)? else {
        return Err(err());
    };
    let mut warnings = Vec::new();
    cursor.skip_ws();
    let trailing: String = cursor.chars.collect();
    if !trailing.is_empty() {
        warnings.push(format!("ignored text after target list: {trailing:?}"));
    }

    let mut matrix = Vec::new();
    let mut flat = Vec::new();
    for item in items {
        match item {
            Node::List(inner) => {
                let mut group = Vec::new();
                for node in inner {
                    match node {
                        Node::Atom(a) => group.push(parse_target_atom(&a).ok_or_else(err)?),
                        Node::List(_) => return Err(err()),
                    }
                }
                matrix.push(group);
            }
            Node::Atom(a) => flat.push(parse_target_atom(&a).ok_or_else(err)?),
        }
    }
    if !flat.is_empty() {
        warnings.push("ungrouped targets treated as their own group".to_string());
        matrix.push(flat);
    }
    Ok((matrix, warnings))
}
