use std::collections::BTreeSet;

use sdgmine::prompting::build_paper_prompt;
use sdgmine::respparse::{
    normalize_record, parse_response, serialize_record, ClassificationRecord, MentionFlags, PaperType, Provenance,
};
use sdgmine::taxonomy::{bundled, SdgId, TargetId};

const EXAMPLE_A: &str = include_str!("fixtures/example_a_response.txt");
const EXAMPLE_B: &str = include_str!("fixtures/example_b_response.txt");
const SKELETON: &str = include_str!("fixtures/response_skeleton.txt");

fn sdgs(ids: &[u8]) -> Vec<SdgId> {
    ids.iter().map(|i| SdgId::new(*i).unwrap()).collect()
}

fn targets(rows: &[&[&str]]) -> Vec<Vec<TargetId>> {
    rows.iter()
        .map(|r| r.iter().map(|t| t.parse().unwrap()).collect())
        .collect()
}

fn record(raw: &str, id: &str) -> ClassificationRecord {
    let draft = parse_response(raw).unwrap();
    normalize_record(
        draft,
        &bundled(),
        Provenance {
            arxiv_id: id.into(),
            model_id: "DeepSeek-V3".into(),
            ..Default::default()
        },
    )
}

#[test]
fn example_a_matches_table() {
    let r = record(EXAMPLE_A, "1501.06862");
    assert!(r.motivated.sdgs.is_empty());
    assert!(r.motivated.all_targets().next().is_none());
    assert_eq!(r.aligned.sdgs, sdgs(&[9]));
    assert_eq!(r.aligned.targets, targets(&[&["9.5"]]));
    assert_eq!(r.mentions, MentionFlags::default());
    assert_eq!(r.paper_type, BTreeSet::from([PaperType::Survey]));
}

#[test]
fn example_b_matches_table() {
    let r = record(EXAMPLE_B, "2411.15159");
    assert_eq!(r.motivated.sdgs, sdgs(&[13, 15]));
    assert_eq!(r.motivated.targets, targets(&[&["13.1", "13.3"], &["15.1", "15.5"]]));
    let aligned: BTreeSet<SdgId> = r.aligned.sdgs.iter().copied().collect();
    assert_eq!(aligned, sdgs(&[9, 13, 15]).into_iter().collect());
    assert_eq!(r.aligned.targets_for(SdgId::new(9).unwrap()), targets(&[&["9.5"]])[0].as_slice());
    assert!(r.mentions.sustainability && r.mentions.ecological);
    assert!(!r.mentions.un_sdgs && !r.mentions.social);
    assert_eq!(r.ifr.sdgs, sdgs(&[15]));
    assert!(r.warnings.is_empty(), "{:?}", r.warnings);
}

#[test]
fn canonical_text_is_stable_and_reparses() {
    for (raw, id) in [(EXAMPLE_A, "1501.06862"), (EXAMPLE_B, "2411.15159")] {
        let r = record(raw, id);
        let first = serialize_record(&r);
        assert_eq!(serialize_record(&record(raw, id)), first);
        let again = record(&first, id);
        assert_eq!(serialize_record(&again), first);
        let mut a = again.clone();
        let mut b = r.clone();
        a.warnings.clear();
        b.warnings.clear();
        assert_eq!(a, b);
    }
}

#[test]
fn paper_prompt_embeds_skeleton_verbatim() {
    let p = build_paper_prompt("A title", "Body text.", 100_000).unwrap();
    assert!(p.text.contains(SKELETON.trim_end()), "skeleton missing from paper prompt");
    assert!(p.text.starts_with("Title: A title"));
}
