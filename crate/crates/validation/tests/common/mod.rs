#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::io::Cursor;

use chrono::Duration;
use topiclens::affiliation::{infer_affiliations, AffiliationResult, PartyRoster};
use topiclens::dynamics::{daily_counts, description_vectors, sliding_matrices, DailyCounts, Reference};
use topiclens::ingest::{active_users, parse_reader, CaptureConfig, TweetStore};
use topiclens::semantic_graph::{build_graph, CooccurrenceGraph};
use topiclens::similarity::{parse_requests, SimilaritySeries, SimilarityTracker};
use topiclens::synth::{generate, SynthSpec, SyntheticTweet};
use topiclens::topics::{detect_topics, TopicPartition};

pub struct Analysis {
    pub config: CaptureConfig,
    pub store: TweetStore,
    pub roster: PartyRoster,
    pub affiliations: AffiliationResult,
    pub graph: CooccurrenceGraph,
    pub partition: TopicPartition,
    pub daily: DailyCounts,
    pub series: Vec<SimilaritySeries>,
}

impl Analysis {
    pub fn series(&self, label: &str) -> &SimilaritySeries {
        self.series
            .iter()
            .find(|s| {
                let (a, b) = s.kind.parties();
                let name = match s.kind.label() {
                    "self" => format!("self_{}", self.roster.party(a).acronym),
                    _ => format!("cross_{}_{}", self.roster.party(a).acronym, self.roster.party(b).acronym),
                };
                name == label
            })
            .unwrap_or_else(|| panic!("no series {label}"))
    }
}

pub fn capture_for(spec: &SynthSpec) -> CaptureConfig {
    let mut config = CaptureConfig::new(spec.start, spec.start + Duration::days(i64::from(spec.days) - 1));
    config.utc_offset_minutes = spec.utc_offset_minutes;
    config
}

pub fn to_jsonl(tweets: &[SyntheticTweet]) -> Vec<u8> {
    let mut out = Vec::new();
    for t in tweets {
        serde_json::to_writer(&mut out, t).unwrap();
        out.push(b'\n');
    }
    out
}

/// The full pipeline in memory, with the documented defaults.
pub fn analyze_jsonl(
    jsonl: &[u8],
    follows: &[(String, String)],
    roster: &PartyRoster,
    config: &CaptureConfig,
    seed: u64,
    reference: &dyn Fn(&DailyCounts) -> Reference,
) -> Analysis {
    let parsed = parse_reader(Cursor::new(jsonl), config, None).unwrap();
    let active = active_users(&parsed.records, config);
    let store = parsed.retain_authors(&active);
    let cutoff = config.capture_end + Duration::days(1);
    let affiliations =
        infer_affiliations(&store, follows, roster, cutoff, config.date_timestamp(cutoff), 0.75).unwrap();
    let graph = build_graph(&store.records, 5);
    let partition = detect_topics(&graph, seed).unwrap();
    let daily = daily_counts(&store.records, &partition, &affiliations, config);
    let reference = reference(&daily);
    let requests = parse_requests("all", "all", roster).unwrap();
    let mut tracker = SimilarityTracker::new(&requests, roster.len()).unwrap();
    for m in sliding_matrices(&daily, config) {
        tracker.push(&description_vectors(&m, &reference), &affiliations);
    }
    Analysis {
        config: config.clone(),
        store,
        roster: roster.clone(),
        affiliations,
        graph,
        partition,
        daily,
        series: tracker.finish(),
    }
}

pub fn analyze(spec: &SynthSpec) -> (Analysis, topiclens::synth::SyntheticCorpus) {
    let corpus = generate(spec).unwrap();
    let analysis = analyze_jsonl(
        &to_jsonl(&corpus.tweets),
        &corpus.follows,
        &corpus.roster,
        &capture_for(spec),
        0,
        &|_| Reference::Window,
    );
    (analysis, corpus)
}

/// Normalized mutual information, arithmetic-mean normalization.
pub fn nmi<A: std::hash::Hash + Eq + Clone, B: std::hash::Hash + Eq + Clone>(labels: &[(A, B)]) -> f64 {
    let n = labels.len() as f64;
    let mut joint: HashMap<(A, B), f64> = HashMap::new();
    let mut left: HashMap<A, f64> = HashMap::new();
    let mut right: HashMap<B, f64> = HashMap::new();
    for (a, b) in labels {
        *joint.entry((a.clone(), b.clone())).or_default() += 1.0;
        *left.entry(a.clone()).or_default() += 1.0;
        *right.entry(b.clone()).or_default() += 1.0;
    }
    let entropy = |counts: Vec<f64>| -> f64 { counts.iter().map(|&c| -(c / n) * (c / n).ln()).sum() };
    let (ha, hb) = (entropy(left.values().copied().collect()), entropy(right.values().copied().collect()));
    let mut mi = 0.0;
    for ((a, b), &c) in &joint {
        mi += (c / n) * ((c * n) / (left[a] * right[b])).ln();
    }
    if ha + hb == 0.0 {
        return 1.0;
    }
    2.0 * mi / (ha + hb)
}

/// Planted topic vs detected topic for every planted hashtag; hashtags the
/// detector left out get their own singleton label.
pub fn planted_vs_detected(analysis: &Analysis, planted: &BTreeMap<String, usize>) -> Vec<(usize, i64)> {
    planted
        .iter()
        .enumerate()
        .map(|(k, (tag, &topic))| {
            let detected = analysis
                .store
                .interner
                .tag_id(tag)
                .and_then(|t| analysis.partition.topic_of(t))
                .map(|t| t as i64)
                .unwrap_or(-1 - k as i64);
            (topic, detected)
        })
        .collect()
}
