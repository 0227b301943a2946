//! Splits a response into its numbered sections and extracts each field.
//!
//! Headers are lines like `1. SDGs and targets ...`, `Point 1. ...` or
//! `**1. ...**`. A header is accepted when its number exceeds the previous
//! header's and its text carries the section keyword; sections still missing
//! after that pass fall back to number-only matches between their neighbours.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

use super::lists::{parse_sdg_list, parse_sdg_list_lenient, parse_target_matrix};
use super::record::{IfrAlignment, MentionFlags, MentionKind, PaperType, ParsedResponse, SdgAssignment};
use super::{collapse_ws, strip_bold, ParseError, ParseMode, ParseSection};

const MANDATORY: [u8; 5] = [0, 1, 2, 3, 5];

fn header_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^(?:#+\s*)?(?:point\s+)?([0-5])\s*[.):]\s*(.*)$").unwrap())
}

fn keyword_matches(section: u8, rest: &str) -> bool {
    let r = rest.to_ascii_lowercase();
    match section {
        0 => r.contains("type"),
        1 => r.contains("motivat") || r.contains("aims"),
        2 => r.contains("relevant") || r.contains("technolog") || r.contains("align"),
        3 => r.contains("mention"),
        4 => r.contains("ifr"),
        5 => r.contains("reason"),
        _ => false,
    }
}

fn is_ruler(line: &str) -> bool {
    let t = line.trim();
    t.len() >= 3 && t.chars().all(|c| matches!(c, '-' | '=' | '_' | '*'))
}

/// Trimmed, bold-free view of a line.
fn clean(line: &str) -> String {
    strip_bold(line).trim().to_string()
}

/// Bullet text with its marker removed; `None` when the line is no bullet.
fn bullet_body(line: &str) -> Option<&str> {
    let t = line.trim_start();
    for marker in ["- ", "* ", "• ", "– "] {
        if let Some(rest) = t.strip_prefix(marker) {
            return Some(rest.trim());
        }
    }
    if t == "-" || t == "*" {
        return Some("");
    }
    None
}

struct Section {
    number: u8,
    header_rest: String,
    body: Vec<String>,
}

fn split_sections(lines: &[String]) -> Vec<Section> {
    let mut candidates: Vec<(usize, u8, String, bool)> = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if bullet_body(line).is_some() {
            continue;
        }
        if let Some(c) = header_regex().captures(line) {
            let n: u8 = c[1].parse().expect("single digit");
            let rest = c[2].trim().to_string();
            let kw = keyword_matches(n, &rest);
            candidates.push((i, n, rest, kw));
        }
    }

    let mut chosen: Vec<(usize, u8, String)> = Vec::new();
    for (i, n, rest, kw) in &candidates {
        if *kw && chosen.last().is_none_or(|(_, last, _)| n > last) {
            chosen.push((*i, *n, rest.clone()));
        }
    }
    for n in 0..=5u8 {
        if chosen.iter().any(|(_, m, _)| *m == n) {
            continue;
        }
        let lo = chosen
            .iter()
            .filter(|(_, m, _)| *m < n)
            .map(|(i, _, _)| *i)
            .max();
        let hi = chosen
            .iter()
            .filter(|(_, m, _)| *m > n)
            .map(|(i, _, _)| *i)
            .min();
        let found = candidates.iter().find(|(i, m, _, _)| {
            *m == n && lo.is_none_or(|lo| *i > lo) && hi.is_none_or(|hi| *i < hi)
        });
        if let Some((i, m, rest, _)) = found {
            chosen.push((*i, *m, rest.clone()));
            chosen.sort_by_key(|(i, _, _)| *i);
        }
    }

    let mut sections = Vec::with_capacity(chosen.len());
    for (k, (start, n, rest)) in chosen.iter().enumerate() {
        let end = chosen.get(k + 1).map(|c| c.0).unwrap_or(lines.len());
        sections.push(Section {
            number: *n,
            header_rest: rest.clone(),
            body: lines[start + 1..end].to_vec(),
        });
    }
    sections
}

/// Collects warnings or turns them into errors depending on the mode.
struct Ctx {
    mode: ParseMode,
    warnings: Vec<String>,
}

impl Ctx {
    fn fail_or_warn(&mut self, err: ParseError) -> Result<(), ParseError> {
        match self.mode {
            ParseMode::Strict => Err(err),
            ParseMode::Recover => {
                self.warnings.push(err.to_string());
                Ok(())
            }
        }
    }
}

pub(super) fn parse(raw: &str, mode: ParseMode) -> Result<ParsedResponse, ParseError> {
    let normalized = raw.replace("\r\n", "\n").replace("\\\"", "\"");
    let lines: Vec<String> = normalized.lines().map(clean).collect();
    let sections = split_sections(&lines);
    let mut ctx = Ctx {
        mode,
        warnings: Vec::new(),
    };

    for n in MANDATORY {
        if !sections.iter().any(|s| s.number == n) {
            ctx.fail_or_warn(ParseError::MissingSection(n))?;
        }
    }

    let mut out = ParsedResponse::default();
    for section in &sections {
        match section.number {
            0 => out.paper_type = paper_type(section, &mut ctx),
            1 => out.motivated = assignment(section, &mut ctx)?,
            2 => out.aligned = assignment(section, &mut ctx)?,
            3 => out.mentions = mentions_section(section, &mut ctx)?,
            4 => out.ifr = ifr_section(section, &mut ctx),
            5 => out.reasoning = reasoning(section),
            _ => unreachable!("header regex only admits 0-5"),
        }
    }
    if !sections.iter().any(|s| s.number == 0) {
        out.paper_type = BTreeSet::from([PaperType::Other]);
    }
    out.warnings = ctx.warnings;
    Ok(out)
}

fn paper_type(section: &Section, ctx: &mut Ctx) -> BTreeSet<PaperType> {
    static KEY: OnceLock<Regex> = OnceLock::new();
    let key = KEY.get_or_init(|| Regex::new(r"(?i)type\s*[:\-]\s*(.*)$").unwrap());
    let mut text = section.header_rest.clone();
    for line in &section.body {
        if is_ruler(line) {
            continue;
        }
        text.push(' ');
        text.push_str(line);
    }
    let value = key
        .captures(&section.header_rest)
        .map(|c| {
            let mut v = c[1].to_string();
            for line in section.body.iter().filter(|l| !is_ruler(l)) {
                v.push(' ');
                v.push_str(line);
            }
            v
        })
        .unwrap_or(text);
    let types: BTreeSet<PaperType> = value
        .split(|c: char| !c.is_ascii_alphabetic())
        .filter_map(PaperType::from_word)
        .collect();
    if types.is_empty() {
        ctx.warnings.push("type unknown".to_string());
        BTreeSet::from([PaperType::Other])
    } else {
        types
    }
}

enum FieldKey {
    Sdgs,
    Targets,
    Evidence,
}

fn assignment_key(text: &str) -> Option<(FieldKey, String)> {
    static SDGS: OnceLock<Regex> = OnceLock::new();
    static TARGETS: OnceLock<Regex> = OnceLock::new();
    static EVIDENCE: OnceLock<Regex> = OnceLock::new();
    let sdgs = SDGS.get_or_init(|| Regex::new(r"(?i)^SDGs?\s*:\s*(.*)$").unwrap());
    let targets = TARGETS.get_or_init(|| Regex::new(r"(?i)^Targets?\s*:\s*(.*)$").unwrap());
    let evidence = EVIDENCE.get_or_init(|| {
        Regex::new(r"(?i)^(?:quote|(?:brief\s+)?justification)[^:]*(?::\s*(.*))?$")
            .unwrap()
    });
    if let Some(c) = sdgs.captures(text) {
        return Some((FieldKey::Sdgs, c[1].trim().to_string()));
    }
    if let Some(c) = targets.captures(text) {
        return Some((FieldKey::Targets, c[1].trim().to_string()));
    }
    if let Some(c) = evidence.captures(text) {
        let rest = c.get(1).map(|m| m.as_str().trim()).unwrap_or("");
        return Some((FieldKey::Evidence, rest.to_string()));
    }
    None
}

fn brackets_balanced(s: &str) -> bool {
    s.chars().filter(|c| *c == '[').count() <= s.chars().filter(|c| *c == ']').count()
}

fn is_empty_inline(s: &str) -> bool {
    matches!(s.trim(), "" | "[]" | "None" | "none" | "N/A")
}

fn assignment(section: &Section, ctx: &mut Ctx) -> Result<SdgAssignment, ParseError> {
    let id = ParseSection::Section(section.number);
    let mut sdg_fragment: Option<String> = None;
    let mut target_fragment: Option<String> = None;
    let mut evidence: Vec<String> = Vec::new();
    // which list fragment is still open across lines
    let mut open: Option<FieldKey> = None;
    let mut in_evidence = false;

    for line in &section.body {
        if is_ruler(line) || line.is_empty() {
            continue;
        }
        if let Some(kind) = &open {
            let frag = match kind {
                FieldKey::Sdgs => sdg_fragment.as_mut(),
                _ => target_fragment.as_mut(),
            }
            .expect("open fragment exists");
            frag.push(' ');
            frag.push_str(line);
            if brackets_balanced(frag) {
                open = None;
            }
            continue;
        }
        let body = bullet_body(line);
        let keyed = assignment_key(body.unwrap_or(line));
        match keyed {
            Some((FieldKey::Sdgs, rest)) if sdg_fragment.is_none() => {
                if !brackets_balanced(&rest) {
                    open = Some(FieldKey::Sdgs);
                }
                sdg_fragment = Some(rest);
                in_evidence = false;
            }
            Some((FieldKey::Targets, rest)) if target_fragment.is_none() => {
                if !brackets_balanced(&rest) {
                    open = Some(FieldKey::Targets);
                }
                target_fragment = Some(rest);
                in_evidence = false;
            }
            Some((FieldKey::Evidence, rest)) if !in_evidence => {
                in_evidence = true;
                if !is_empty_inline(&rest) {
                    evidence.push(rest);
                }
            }
            _ => match body {
                Some(item) => {
                    in_evidence = true;
                    if !item.is_empty() {
                        evidence.push(item.to_string());
                    }
                }
                None if in_evidence => match evidence.last_mut() {
                    Some(last) => {
                        last.push(' ');
                        last.push_str(line);
                    }
                    None => evidence.push(line.clone()),
                },
                // header text wrapped onto following lines
                None => {}
            },
        }
    }

    let mut out = SdgAssignment {
        evidence: evidence.iter().map(|e| collapse_ws(e)).collect(),
        ..Default::default()
    };
    match sdg_fragment {
        Some(frag) => match parse_sdg_list(&frag) {
            Ok((sdgs, warnings)) => {
                out.sdgs = sdgs;
                ctx.warnings.extend(warnings);
            }
            Err(e) => ctx.fail_or_warn(e.in_section(id))?,
        },
        None => ctx
            .warnings
            .push(format!("section {}: no SDG list found", section.number)),
    }
    if let Some(frag) = target_fragment {
        match parse_target_matrix(&frag) {
            Ok((targets, warnings)) => {
                out.targets = targets;
                ctx.warnings.extend(warnings);
            }
            Err(e) => ctx.fail_or_warn(e.in_section(id))?,
        }
    }
    Ok(out)
}

fn mention_kind(key: &str) -> Option<MentionKind> {
    let k = key.to_ascii_lowercase();
    if k.contains("sdg") || k.contains("sustainable development goal") {
        Some(MentionKind::UnSdgs)
    } else if k.contains("sustainab") {
        Some(MentionKind::Sustainability)
    } else if k.contains("ecolog") || k.contains("environment") {
        Some(MentionKind::Ecological)
    } else if k.contains("social") {
        Some(MentionKind::Social)
    } else {
        None
    }
}

fn yes_no(value: &str) -> Option<bool> {
    let word: String = value
        .trim()
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .chars()
        .take_while(|c| c.is_alphanumeric())
        .collect();
    match word.to_ascii_lowercase().as_str() {
        "yes" | "y" | "true" => Some(true),
        "no" | "n" | "false" | "none" | "not" => Some(false),
        _ => None,
    }
}

/// Parses the four yes/no mention lines of section 3.
pub fn parse_mentions(fragment: &str) -> Result<(MentionFlags, Vec<String>), ParseError> {
    parse_mention_lines(fragment.lines(), ParseMode::Strict)
}

fn parse_mention_lines<'a>(
    lines: impl Iterator<Item = &'a str>,
    mode: ParseMode,
) -> Result<(MentionFlags, Vec<String>), ParseError> {
    let mut ctx = Ctx {
        mode,
        warnings: Vec::new(),
    };
    let mut flags = MentionFlags::default();
    let mut seen: BTreeSet<MentionKind> = BTreeSet::new();
    for raw in lines {
        let line = clean(raw);
        let body = bullet_body(&line).unwrap_or(&line);
        let Some((key, value)) = body.split_once(':') else {
            continue;
        };
        let Some(kind) = mention_kind(key) else {
            continue;
        };
        if !seen.insert(kind) {
            continue;
        }
        match yes_no(value) {
            Some(v) => flags.set(kind, v),
            None => ctx.fail_or_warn(ParseError::Mention {
                section: ParseSection::Section(3),
                line: body.to_string(),
            })?,
        }
    }
    for kind in MentionKind::ALL {
        if !seen.contains(&kind) {
            ctx.warnings
                .push(format!("mention flag {} missing; assumed no", kind.as_str()));
        }
    }
    Ok((flags, ctx.warnings))
}

fn mentions_section(section: &Section, ctx: &mut Ctx) -> Result<MentionFlags, ParseError> {
    let (flags, warnings) = parse_mention_lines(section.body.iter().map(String::as_str), ctx.mode)?;
    ctx.warnings.extend(warnings);
    Ok(flags)
}

enum IfrField {
    Sdgs,
    UseCases,
    Justification,
}

fn ifr_key(text: &str) -> Option<(IfrField, String)> {
    let (key, rest) = match text.split_once(':') {
        Some((k, r)) => (k, r.trim().to_string()),
        None => (text, String::new()),
    };
    let k = key.to_ascii_lowercase();
    let has_colon = text.contains(':');
    if k.contains("use case") {
        Some((IfrField::UseCases, rest))
    } else if has_colon && k.contains("ifr") && k.contains("sdg") {
        Some((IfrField::Sdgs, rest))
    } else if k.trim_start().starts_with("brief justification")
        || k.trim_start().starts_with("justification")
    {
        Some((IfrField::Justification, rest))
    } else {
        None
    }
}

fn strip_list_brackets(s: &str) -> String {
    let t = s.trim();
    match t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
        Some(inner) => inner.trim().to_string(),
        None => t.to_string(),
    }
}

fn ifr_section(section: &Section, ctx: &mut Ctx) -> IfrAlignment {
    let mut out = IfrAlignment::default();
    let mut current: Option<IfrField> = None;
    let mut justification: Vec<String> = Vec::new();

    for line in &section.body {
        if is_ruler(line) || line.is_empty() {
            continue;
        }
        let body = bullet_body(line);
        // keys only count on bullet lines or at the start of a fresh field
        if let Some((field, rest)) = ifr_key(body.unwrap_or(line)) {
            let is_key = body.is_some() || (current.is_none() && line.contains(':'));
            if is_key {
                match field {
                    IfrField::Sdgs => {
                        let (sdgs, warnings) = parse_sdg_list_lenient(&rest);
                        out.sdgs = sdgs;
                        ctx.warnings.extend(warnings);
                    }
                    IfrField::UseCases => {
                        if !is_empty_inline(&rest) {
                            out.use_cases.push(strip_list_brackets(&rest));
                        }
                    }
                    IfrField::Justification => {
                        if !rest.is_empty() {
                            justification.push(rest);
                        }
                    }
                }
                current = Some(field);
                continue;
            }
        }
        match (&current, body) {
            (Some(IfrField::UseCases), Some(item)) => {
                if !is_empty_inline(item) {
                    out.use_cases.push(strip_list_brackets(item));
                }
            }
            (Some(IfrField::UseCases), None) => match out.use_cases.last_mut() {
                Some(last) => {
                    last.push(' ');
                    last.push_str(line);
                }
                None => out.use_cases.push(line.clone()),
            },
            (Some(IfrField::Justification), _) => justification.push(body.unwrap_or(line).to_string()),
            _ => {}
        }
    }
    out.use_cases = out
        .use_cases
        .iter()
        .map(|u| collapse_ws(u))
        .filter(|u| !u.is_empty())
        .collect();
    out.justification = collapse_ws(&justification.join(" "));
    out
}

fn strip_one_quote_pair(s: &str) -> &str {
    for (open, close) in [("\"", "\""), ("\u{201c}", "\u{201d}")] {
        if s.len() >= open.len() + close.len() {
            if let Some(inner) = s.strip_prefix(open).and_then(|r| r.strip_suffix(close)) {
                return inner;
            }
        }
    }
    s
}

fn reasoning(section: &Section) -> String {
    static KEY: OnceLock<Regex> = OnceLock::new();
    let key = KEY.get_or_init(|| Regex::new(r"(?i)^reasoning\s*:?\s*(.*)$").unwrap());
    let mut parts: Vec<&str> = Vec::new();
    let first = key
        .captures(&section.header_rest)
        .and_then(|c| c.get(1))
        .map(|m| m.as_str())
        .unwrap_or(&section.header_rest);
    parts.push(first);
    for line in &section.body {
        if is_ruler(line) {
            break;
        }
        parts.push(line);
    }
    let joined = collapse_ws(&parts.join(" "));
    strip_one_quote_pair(&joined).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mention_examples() {
        let frag = "    - UN SDGs: no\n    - Sustainability impact: yes\n    - Ecological impact: yes\n    - Social impact: no\n";
        let (flags, warnings) = parse_mentions(frag).unwrap();
        assert_eq!(
            flags,
            MentionFlags {
                un_sdgs: false,
                sustainability: true,
                ecological: true,
                social: false
            }
        );
        assert!(warnings.is_empty());
    }

    #[test]
    fn mentions_all_no() {
        let frag = "- UN SDGs: no\n- Sustainability impact: no\n- Ecological impact: No\n- Social impact: NO";
        assert_eq!(parse_mentions(frag).unwrap().0, MentionFlags::default());
    }

    #[test]
    fn mention_trailing_period() {
        let (flags, _) = parse_mentions("- UN SDGs: No.\n- Sustainability impact: **Yes**.").unwrap();
        assert!(!flags.un_sdgs);
        assert!(flags.sustainability);
    }

    #[test]
    fn mention_missing_line_warns() {
        let (flags, warnings) = parse_mentions("- UN SDGs: yes").unwrap();
        assert!(flags.un_sdgs);
        assert_eq!(warnings.len(), 3);
    }

    #[test]
    fn mention_bad_value() {
        assert!(matches!(
            parse_mentions("- Social impact: maybe"),
            Err(ParseError::Mention { .. })
        ));
    }

    #[test]
    fn header_variants_are_found() {
        let lines: Vec<String> = [
            "Point 0. Paper type: survey",
            "**1. SDGs the paper is motivated by**",
            "## 2. Relevant technologies",
            "3) Authors mention",
            "5: Reasoning: x",
        ]
        .iter()
        .map(|l| clean(l))
        .collect();
        let numbers: Vec<u8> = split_sections(&lines).iter().map(|s| s.number).collect();
        assert_eq!(numbers, vec![0, 1, 2, 3, 5]);
    }

    #[test]
    fn numbered_evidence_does_not_steal_headers() {
        let lines: Vec<String> = [
            "0. Paper type: report",
            "1. SDGs motivated by",
            "- SDGs: []",
            "2. this numbered line is evidence text",
            "2. SDGs relevant to the technology",
            "- SDGs: [SDG 9]",
            "3. Authors mention in the text:",
            "5. Reasoning: r",
        ]
        .iter()
        .map(|l| clean(l))
        .collect();
        let sections = split_sections(&lines);
        let s2 = sections.iter().find(|s| s.number == 2).unwrap();
        assert_eq!(s2.header_rest, "SDGs relevant to the technology");
    }
}
