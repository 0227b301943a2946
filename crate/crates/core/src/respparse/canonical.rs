use std::fmt::Write;

use super::record::ClassificationRecord;
use crate::taxonomy::{SdgId, TargetId};

const RULER: &str = "---------------------------";

fn sdg_list(sdgs: &[SdgId]) -> String {
    let items: Vec<String> = sdgs.iter().map(|s| format!("SDG {s}")).collect();
    format!("[{}]", items.join(", "))
}

fn target_matrix(groups: &[Vec<TargetId>]) -> String {
    if groups.is_empty() {
        return "[]".to_string();
    }
    let inner: Vec<String> = groups
        .iter()
        .map(|g| {
            let items: Vec<String> = g.iter().map(ToString::to_string).collect();
            format!("[{}]", items.join(", "))
        })
        .collect();
    format!("[{}]", inner.join(", "))
}

fn yes_no(v: bool) -> &'static str {
    if v {
        "yes"
    } else {
        "no"
    }
}

/// Writes the record in the numbered response format. Warnings and
/// provenance fields are not part of the text.
pub fn serialize_record(record: &ClassificationRecord) -> String {
    let mut out = String::new();
    let types: Vec<&str> = record.paper_type.iter().map(|t| t.as_str()).collect();

    // writing to a String cannot fail
    let _ = writeln!(out, "{RULER}");
    let _ = writeln!(out, "0. Paper type: {}", types.join(", "));
    out.push('\n');

    let _ = writeln!(
        out,
        "1. SDGs and targets the paper is explicitly motivated by or aims to address:"
    );
    let _ = writeln!(out, "    - SDGs: {}", sdg_list(&record.motivated.sdgs));
    let _ = writeln!(out, "    - Targets: {}", target_matrix(&record.motivated.targets));
    let _ = writeln!(out, "    - Quote(s) from the motivation/introduction:");
    for e in &record.motivated.evidence {
        let _ = writeln!(out, "        - {e}");
    }
    out.push('\n');

    let _ = writeln!(
        out,
        "2. SDGs and targets relevant to the technologies or methods developed in the paper:"
    );
    let _ = writeln!(out, "    - SDGs: {}", sdg_list(&record.aligned.sdgs));
    let _ = writeln!(out, "    - Targets: {}", target_matrix(&record.aligned.targets));
    let _ = writeln!(out, "    - Brief justification for each:");
    for e in &record.aligned.evidence {
        let _ = writeln!(out, "        - {e}");
    }
    out.push('\n');

    let m = &record.mentions;
    let _ = writeln!(out, "3. Authors mention in the text:");
    let _ = writeln!(out, "    - UN SDGs: {}", yes_no(m.un_sdgs));
    let _ = writeln!(out, "    - Sustainability impact: {}", yes_no(m.sustainability));
    let _ = writeln!(out, "    - Ecological impact: {}", yes_no(m.ecological));
    let _ = writeln!(out, "    - Social impact: {}", yes_no(m.social));
    out.push('\n');

    let _ = writeln!(out, "4. IFR Proposals:");
    let _ = writeln!(out, "    - IFR-aligned SDGs/targets: {}", sdg_list(&record.ifr.sdgs));
    if record.ifr.use_cases.is_empty() {
        let _ = writeln!(
            out,
            "    - Matching IFR use cases (quote or paraphrase from IFR proposals): []"
        );
    } else {
        let _ = writeln!(
            out,
            "    - Matching IFR use cases (quote or paraphrase from IFR proposals):"
        );
        for u in &record.ifr.use_cases {
            let _ = writeln!(out, "        - {u}");
        }
    }
    let _ = writeln!(
        out,
        "    - Brief justification/explanation: {}",
        record.ifr.justification
    );
    out.push('\n');

    let _ = writeln!(out, "5. Reasoning: \"{}\"", record.reasoning);
    let _ = writeln!(out, "{RULER}");
    out
}
