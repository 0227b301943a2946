use std::collections::{BTreeSet, HashMap, VecDeque};
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use async_trait::async_trait;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::{CallError, ChatProvider, ChatRequest, Completion};
use crate::respparse::{
    normalize_record, serialize_record, IfrAlignment, MentionFlags, PaperType, ParsedResponse,
    Provenance, SdgAssignment,
};
use crate::taxonomy::{bundled, SdgId, TargetId, Taxonomy};

/// One scripted reply.
#[derive(Debug, Clone, PartialEq)]
pub enum MockOutcome {
    Text(String),
    Status(u16),
    Timeout,
}

type Responder = Box<dyn Fn(&ChatRequest) -> Result<String, CallError> + Send + Sync>;

/// Offline provider. Reply order of precedence: scripted queue, canned
/// text for the paper id, custom responder, keyword classifier.
pub struct MockProvider {
    model_id: String,
    canned: HashMap<String, String>,
    script: Mutex<VecDeque<MockOutcome>>,
    responder: Option<Responder>,
    latency: Duration,
    variation: Option<(u64, f64)>,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
}

impl MockProvider {
    pub fn new(model_id: &str) -> Self {
        MockProvider {
            model_id: model_id.to_string(),
            canned: HashMap::new(),
            script: Mutex::new(VecDeque::new()),
            responder: None,
            latency: Duration::ZERO,
            variation: None,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
        }
    }

    pub fn scripted(outcomes: Vec<MockOutcome>) -> Self {
        let m = Self::new("mock-model");
        *m.script.lock().expect("fresh mutex") = outcomes.into();
        m
    }

    pub fn with_canned(mut self, paper_id: &str, text: &str) -> Self {
        self.canned.insert(paper_id.to_string(), text.to_string());
        self
    }

    pub fn with_responder(
        mut self,
        f: impl Fn(&ChatRequest) -> Result<String, CallError> + Send + Sync + 'static,
    ) -> Self {
        self.responder = Some(Box::new(f));
        self
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    /// Each detected SDG is independently dropped with probability `p`,
    /// from a generator seeded by `(seed, paper id, call number)`.
    pub fn with_variation(mut self, seed: u64, p: f64) -> Self {
        self.variation = Some((seed, p.clamp(0.0, 1.0)));
        self
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Highest number of concurrent `complete` calls observed.
    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    fn reply(&self, request: &ChatRequest, call: usize) -> Result<String, CallError> {
        let scripted = self.script.lock().unwrap_or_else(|e| e.into_inner()).pop_front();
        match scripted {
            Some(MockOutcome::Text(t)) => return Ok(t),
            Some(MockOutcome::Status(s)) if crate::retry::is_retryable_status(s) => {
                return Err(CallError::Transient(format!("HTTP {s}")))
            }
            Some(MockOutcome::Status(s)) => {
                return Err(CallError::Rejected {
                    status: s,
                    message: "scripted".into(),
                })
            }
            Some(MockOutcome::Timeout) => return Err(CallError::Transient("scripted timeout".into())),
            None => {}
        }
        if let Some(text) = request.paper_id.as_ref().and_then(|id| self.canned.get(id)) {
            return Ok(text.clone());
        }
        if let Some(f) = &self.responder {
            return f(request);
        }
        let drop = self.variation.map(|(seed, p)| {
            let mut h = DefaultHasher::new();
            (seed, request.paper_id.as_deref().unwrap_or(""), call).hash(&mut h);
            (StdRng::seed_from_u64(h.finish()), p)
        });
        Ok(keyword_response_with(&request.user, drop))
    }
}

struct InFlight<'a>(&'a AtomicUsize);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

#[async_trait]
impl ChatProvider for MockProvider {
    async fn complete(&self, request: &ChatRequest) -> Result<Completion, CallError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        let _guard = InFlight(&self.in_flight);
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        if !self.latency.is_zero() {
            tokio::time::sleep(self.latency).await;
        }
        self.reply(request, call).map(|text| Completion { text, usage: None })
    }
}

/// (SDG, keywords, representative target)
const KEYWORDS: &[(u8, &[&str], &str)] = &[
    (2, &["agricultur", "crop", "harvest", "farm"], "2.4"),
    (3, &["surg", "medical", "patient", "rehabilitat", "health"], "3.8"),
    (4, &["education", "students", "teaching"], "4.4"),
    (6, &["water", "pipe", "sanitation"], "6.4"),
    (7, &["energy", "solar", "battery", "power consumption"], "7.3"),
    (8, &["worker", "labour", "labor", "productivity"], "8.2"),
    (11, &["urban", "city", "cities", "traffic", "disaster"], "11.5"),
    (12, &["recycl", "waste", "circular"], "12.5"),
    (13, &["climate", "emission", "carbon"], "13.1"),
    (14, &["ocean", "marine", "underwater"], "14.1"),
    (15, &["forest", "soil", "biodiversity", "ecosystem", "wildlife"], "15.1"),
];

fn taxonomy() -> &'static Taxonomy {
    static TAX: OnceLock<Taxonomy> = OnceLock::new();
    TAX.get_or_init(bundled)
}

fn paper_body(user: &str) -> &str {
    let Some(start) = user.find("\"\"\"") else {
        return user;
    };
    let rest = &user[start + 3..];
    match rest.find("\"\"\"") {
        Some(end) => &rest[..end],
        None => rest,
    }
}

/// Deterministic classification from keyword hits, in the response format.
pub fn keyword_response(user: &str) -> String {
    keyword_response_with(user, None)
}

fn keyword_response_with(user: &str, mut drop: Option<(StdRng, f64)>) -> String {
    let body = paper_body(user).to_lowercase();
    let intro_end = body
        .char_indices()
        .nth(body.chars().count() / 5 + 200)
        .map(|(i, _)| i)
        .unwrap_or(body.len());
    let intro = &body[..intro_end];
    let has = |words: &[&str], hay: &str| words.iter().any(|w| hay.contains(w));

    let mut motivated = SdgAssignment::default();
    let mut aligned = SdgAssignment::default();
    for (goal, words, target) in KEYWORDS {
        if !has(words, &body) {
            continue;
        }
        if let Some((rng, p)) = drop.as_mut() {
            if rng.random_bool(*p) {
                continue;
            }
        }
        let sdg = SdgId::new(*goal).expect("keyword table goals are valid");
        let target: TargetId = target.parse().expect("keyword table targets are valid");
        if has(words, intro) && has(&["sustainab", "societ", "environment"], intro) {
            motivated.sdgs.push(sdg);
            motivated.targets.push(vec![target]);
            motivated
                .evidence
                .push(format!("The introduction discusses {}.", words[0]));
        }
        aligned.sdgs.push(sdg);
        aligned.targets.push(vec![target]);
        aligned
            .evidence
            .push(format!("SDG {goal}: the method applies to {}.", words[0]));
    }
    if aligned.sdgs.is_empty() {
        aligned.sdgs.push(SdgId::new(9).expect("valid"));
        aligned.targets.push(vec!["9.5".parse().expect("valid")]);
        aligned
            .evidence
            .push("SDG 9: the work advances robotics research and innovation.".into());
    }

    let mentions = MentionFlags {
        un_sdgs: has(&["sustainable development goal", "sdg"], &body),
        sustainability: has(&["sustainab"], &body),
        ecological: has(&["ecolog", "environmental impact"], &body),
        social: has(&["social impact", "societal"], &body),
    };

    let tax = taxonomy();
    let mut ifr = IfrAlignment::default();
    if let Some((sdg, cases)) = aligned
        .sdgs
        .iter()
        .find_map(|s| tax.ifr_proposals.get(s).filter(|c| !c.is_empty()).map(|c| (*s, c)))
    {
        ifr.sdgs.push(sdg);
        ifr.use_cases.push(cases[0].clone());
        ifr.justification = format!("The robotic application matches an IFR use case under SDG {sdg}.");
    } else {
        ifr.justification = "No matching IFR use case.".into();
    }

    let paper_type = if body.contains("survey") || body.contains("review of") {
        PaperType::Survey
    } else if body.contains("theorem") || body.contains("proof") {
        PaperType::Theoretical
    } else {
        PaperType::Experimental
    };

    let draft = ParsedResponse {
        paper_type: BTreeSet::from([paper_type]),
        reasoning: if motivated.sdgs.is_empty() {
            "The paper does not state a sustainability motivation.".into()
        } else {
            "The introduction frames the work around sustainability.".into()
        },
        motivated,
        aligned,
        mentions,
        ifr,
        warnings: Vec::new(),
    };
    serialize_record(&normalize_record(draft, tax, Provenance::default()))
}
