//! Proptest generators for drafts and normalized records.

use std::sync::OnceLock;

use proptest::prelude::*;
use proptest::sample::Index;

use super::{normalize_record, ClassificationRecord, IfrAlignment, MentionFlags, PaperType, ParsedResponse, Provenance, SdgAssignment};
use crate::harvest::Quarter;
use crate::taxonomy::{bundled, SdgId, TargetId, Taxonomy};

fn taxonomy() -> &'static Taxonomy {
    static TAX: OnceLock<Taxonomy> = OnceLock::new();
    TAX.get_or_init(bundled)
}

fn phrase() -> impl Strategy<Value = String> {
    "[a-z]{1,8}( [a-z]{1,8}){0,5}"
}

fn assignment(max: usize) -> impl Strategy<Value = SdgAssignment> {
    (
        proptest::collection::vec((1u8..=17, proptest::collection::vec(any::<Index>(), 0..3)), 0..=max),
        proptest::collection::vec(phrase(), 0..3),
    )
        .prop_map(|(items, evidence)| {
            let taxonomy = taxonomy();
            let mut a = SdgAssignment {
                evidence,
                ..Default::default()
            };
            for (s, picks) in items {
                let sdg = SdgId::new(s).unwrap();
                let all: Vec<TargetId> = taxonomy.goal(sdg).unwrap().targets.keys().copied().collect();
                a.sdgs.push(sdg);
                a.targets.push(picks.iter().map(|i| *i.get(&all)).collect());
            }
            a
        })
}

pub(crate) fn draft() -> impl Strategy<Value = ParsedResponse> {
    (
        proptest::sample::subsequence(PaperType::ALL.to_vec(), 0..=2),
        assignment(2),
        assignment(4),
        any::<[bool; 4]>(),
        (
            proptest::collection::vec(1u8..=17, 0..3),
            proptest::collection::vec(phrase(), 0..3),
            phrase(),
        ),
        phrase(),
    )
        .prop_map(|(types, motivated, aligned, m, (ifr_sdgs, use_cases, justification), reasoning)| ParsedResponse {
            paper_type: types.into_iter().collect(),
            motivated,
            aligned,
            mentions: MentionFlags {
                un_sdgs: m[0],
                sustainability: m[1],
                ecological: m[2],
                social: m[3],
            },
            ifr: IfrAlignment {
                sdgs: ifr_sdgs.into_iter().map(|s| SdgId::new(s).unwrap()).collect(),
                use_cases,
                justification,
            },
            reasoning,
            warnings: Vec::new(),
        })
}

/// Normalized record with empty warnings and a quarter in 2019..2023.
pub(crate) fn record() -> impl Strategy<Value = ClassificationRecord> {
    (draft(), 2019i32..2023, 1u8..=4).prop_map(|(d, year, q)| {
        let mut r = normalize_record(
            d,
            taxonomy(),
            Provenance {
                quarter: Quarter::new(year, q),
                ..Default::default()
            },
        );
        r.warnings.clear();
        r
    })
}
