use std::collections::BTreeSet;

use super::collapse_ws;
use super::record::{
    ClassificationRecord, IfrAlignment, PaperType, ParsedResponse, Provenance, SdgAssignment,
    SCHEMA_VERSION,
};
use crate::taxonomy::{validate_target, SdgId, TargetId, TargetValidity, Taxonomy};

/// Enforces record invariants. Total: every problem becomes a warning.
///
/// - aligned SDGs are completed with motivated ones (and their targets)
/// - target lists are reshaped to be parallel to the SDG list
/// - targets failing [`validate_target`] are dropped into the warnings
pub fn normalize_record(
    draft: ParsedResponse,
    taxonomy: &Taxonomy,
    provenance: Provenance,
) -> ClassificationRecord {
    let mut warnings = draft.warnings;

    let motivated = normalize_assignment(draft.motivated, "motivated", taxonomy, &mut warnings);
    let mut aligned = normalize_assignment(draft.aligned, "aligned", taxonomy, &mut warnings);

    let missing: Vec<SdgId> = motivated
        .sdgs
        .iter()
        .copied()
        .filter(|s| !aligned.contains(*s))
        .collect();
    if !missing.is_empty() {
        for sdg in &missing {
            aligned.sdgs.push(*sdg);
            aligned.targets.push(motivated.targets_for(*sdg).to_vec());
        }
        warnings.push("alignment completed from motivation".to_string());
    }

    let mut paper_type = draft.paper_type;
    if paper_type.is_empty() {
        paper_type = BTreeSet::from([PaperType::Other]);
        warnings.push("type unknown".to_string());
    }

    let ifr = normalize_ifr(draft.ifr, &mut warnings);

    ClassificationRecord {
        arxiv_id: provenance.arxiv_id,
        published: provenance.published,
        quarter: provenance.quarter,
        paper_type,
        motivated,
        aligned,
        mentions: draft.mentions,
        ifr,
        reasoning: collapse_ws(&draft.reasoning),
        model_id: provenance.model_id,
        prompt_digest: provenance.prompt_digest,
        run_id: provenance.run_id,
        run_index: provenance.run_index,
        decoding: provenance.decoding,
        schema_version: SCHEMA_VERSION.to_string(),
        warnings,
    }
}

fn normalize_assignment(
    a: SdgAssignment,
    label: &str,
    taxonomy: &Taxonomy,
    warnings: &mut Vec<String>,
) -> SdgAssignment {
    let mut sdgs: Vec<SdgId> = Vec::with_capacity(a.sdgs.len());
    for s in a.sdgs {
        if !sdgs.contains(&s) {
            sdgs.push(s);
        }
    }

    let any_target = a.targets.iter().any(|g| !g.is_empty());
    let groups: Vec<Vec<TargetId>> = if a.targets.len() == sdgs.len() {
        a.targets
    } else if !any_target {
        vec![Vec::new(); sdgs.len()]
    } else {
        warnings.push(format!(
            "{label} target lists reshaped from {} to {} groups",
            a.targets.len(),
            sdgs.len()
        ));
        let flat: Vec<TargetId> = a.targets.into_iter().flatten().collect();
        let mut regrouped = vec![Vec::new(); sdgs.len()];
        for t in flat {
            match sdgs.iter().position(|s| *s == t.goal()) {
                Some(i) => regrouped[i].push(t),
                None => warnings.push(format!(
                    "{label} target {t} has no matching SDG in the list; dropped"
                )),
            }
        }
        regrouped
    };

    let targets = sdgs
        .iter()
        .zip(groups)
        .map(|(sdg, group)| {
            let mut kept: Vec<TargetId> = Vec::with_capacity(group.len());
            for t in group {
                match validate_target(*sdg, t, taxonomy) {
                    TargetValidity::Valid => {
                        if !kept.contains(&t) {
                            kept.push(t);
                        }
                    }
                    TargetValidity::PrefixMismatch => warnings.push(format!(
                        "{label} target {t} listed under SDG {sdg}; dropped (prefix mismatch)"
                    )),
                    TargetValidity::UnknownTarget => warnings.push(format!(
                        "{label} target {t} is not in the taxonomy; dropped (unknown target)"
                    )),
                }
            }
            kept
        })
        .collect();

    let evidence = a
        .evidence
        .iter()
        .map(|e| collapse_ws(e))
        .filter(|e| !e.is_empty())
        .collect();

    SdgAssignment {
        sdgs,
        targets,
        evidence,
    }
}

fn normalize_ifr(ifr: IfrAlignment, warnings: &mut Vec<String>) -> IfrAlignment {
    let mut sdgs: Vec<SdgId> = Vec::new();
    for s in ifr.sdgs {
        if !sdgs.contains(&s) {
            sdgs.push(s);
        }
    }
    let mut use_cases: Vec<String> = ifr
        .use_cases
        .iter()
        .map(|u| collapse_ws(u))
        .filter(|u| !u.is_empty())
        .collect();
    if sdgs.is_empty() && !use_cases.is_empty() {
        warnings.push("IFR use cases without IFR SDGs dropped".to_string());
        use_cases.clear();
    }
    IfrAlignment {
        sdgs,
        use_cases,
        justification: collapse_ws(&ifr.justification),
    }
}
