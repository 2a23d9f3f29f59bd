//! Staged pipeline driven by one run configuration.
//!
//! Stages run in order and leave their artifacts under the work directory.
//! `manifest.json` records, per stage, a fingerprint of everything the stage
//! depends on (its own settings, upstream fingerprints, input file hashes)
//! and a hash of each artifact. A stage whose fingerprint and artifacts are
//! unchanged is skipped.

use std::collections::{BTreeMap, HashSet};
use std::error::Error as StdError;
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::affiliation::{infer_affiliations, load_follows, AffiliationResult, PartyRoster};
use crate::artifacts::{self, DynamicsMeta, StoreMeta};
use crate::dynamics::{daily_counts, description_vectors, sliding_matrices, DailyCounts, DescriptionSet, Reference};
use crate::ingest::{active_users, parse_stream, CaptureConfig, TweetStore};
use crate::report::{self, UsageMode};
use crate::semantic_graph::{build_graph, political_scores, CooccurrenceGraph};
use crate::similarity::{parse_requests, SimilaritySeries, SimilarityTracker};
use crate::topics::{coreness, detect_topics, CorenessMap, Detector, TopicPartition};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Affiliate,
    Graph,
    Topics,
    Dynamics,
    Similarity,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Affiliate,
        Stage::Graph,
        Stage::Topics,
        Stage::Dynamics,
        Stage::Similarity,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Affiliate => "affiliate",
            Stage::Graph => "graph",
            Stage::Topics => "topics",
            Stage::Dynamics => "dynamics",
            Stage::Similarity => "similarity",
            Stage::Report => "report",
        }
    }

    fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Affiliate => &[Stage::Ingest],
            Stage::Graph => &[Stage::Ingest, Stage::Affiliate],
            Stage::Topics => &[Stage::Graph],
            Stage::Dynamics => &[Stage::Ingest, Stage::Affiliate, Stage::Topics],
            Stage::Similarity => &[Stage::Affiliate, Stage::Dynamics],
            Stage::Report => &[Stage::Affiliate, Stage::Graph, Stage::Topics, Stage::Dynamics, Stage::Similarity],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<dyn StdError + Send + Sync>,
    },
}

fn stage_error(stage: Stage) -> impl Fn(Box<dyn StdError + Send + Sync>) -> PipelineError {
    move |source| PipelineError::Stage { stage, source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub tweets: PathBuf,
    pub roster: PathBuf,
    #[serde(default)]
    pub follows: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffiliationSettings {
    /// Evidence strictly before this local date counts; defaults to the
    /// whole capture.
    #[serde(default)]
    pub cutoff: Option<NaiveDate>,
    #[serde(default = "default_affiliation_threshold")]
    pub threshold: f64,
}

fn default_affiliation_threshold() -> f64 {
    0.75
}

impl Default for AffiliationSettings {
    fn default() -> Self {
        Self {
            cutoff: None,
            threshold: default_affiliation_threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSettings {
    #[serde(default = "default_min_weight")]
    pub min_weight: u32,
    #[serde(default = "default_kl_threshold")]
    pub kl_threshold: f64,
    /// Keep only hashtags classified as political.
    #[serde(default)]
    pub political_only: bool,
}

fn default_min_weight() -> u32 {
    5
}

fn default_kl_threshold() -> f64 {
    0.5
}

impl Default for GraphSettings {
    fn default() -> Self {
        Self {
            min_weight: default_min_weight(),
            kl_threshold: default_kl_threshold(),
            political_only: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Louvain,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicSettings {
    #[serde(default = "default_detector")]
    pub detector: DetectorKind,
    #[serde(default)]
    pub seed: u64,
    /// Community file for the external detector.
    #[serde(default)]
    pub communities: Option<PathBuf>,
}

fn default_detector() -> DetectorKind {
    DetectorKind::Louvain
}

impl Default for TopicSettings {
    fn default() -> Self {
        Self {
            detector: default_detector(),
            seed: 0,
            communities: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// Column sums of each window.
    Window,
    /// Column sums over the whole capture.
    Global,
    /// Per window, the mean of each user's topic frequencies.
    UserWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSettings {
    #[serde(default = "default_reference")]
    pub reference: ReferenceKind,
    /// Also write every valid description vector.
    #[serde(default)]
    pub dump_vectors: bool,
}

fn default_reference() -> ReferenceKind {
    ReferenceKind::Window
}

impl Default for DynamicsSettings {
    fn default() -> Self {
        Self {
            reference: default_reference(),
            dump_vectors: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilaritySettings {
    #[serde(default = "default_all", rename = "self")]
    pub self_groups: String,
    #[serde(default = "default_all")]
    pub cross: String,
}

fn default_all() -> String {
    "all".to_owned()
}

impl Default for SimilaritySettings {
    fn default() -> Self {
        Self {
            self_groups: default_all(),
            cross: default_all(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSettings {
    /// Topics to export; all topics when absent.
    #[serde(default)]
    pub topics: Option<Vec<usize>>,
    #[serde(default = "default_true")]
    pub svg: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ReportSettings {
    fn default() -> Self {
        Self { topics: None, svg: true }
    }
}

/// Declarative run configuration. Relative paths resolve against the
/// directory of the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub capture: CaptureConfig,
    pub inputs: Inputs,
    #[serde(default)]
    pub affiliation: AffiliationSettings,
    #[serde(default)]
    pub graph: GraphSettings,
    #[serde(default)]
    pub topics: TopicSettings,
    #[serde(default)]
    pub dynamics: DynamicsSettings,
    #[serde(default)]
    pub similarity: SimilaritySettings,
    #[serde(default)]
    pub report: ReportSettings,
}

impl RunConfig {
    pub fn new(capture: CaptureConfig, tweets: PathBuf, roster: PathBuf, follows: Option<PathBuf>) -> Self {
        Self {
            capture,
            inputs: Inputs { tweets, roster, follows },
            affiliation: AffiliationSettings::default(),
            graph: GraphSettings::default(),
            topics: TopicSettings::default(),
            dynamics: DynamicsSettings::default(),
            similarity: SimilaritySettings::default(),
            report: ReportSettings::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.inputs.tweets);
        fix(&mut self.inputs.roster);
        if let Some(f) = &mut self.inputs.follows {
            fix(f);
        }
        if let Some(c) = &mut self.topics.communities {
            fix(c);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.capture
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let a = self.affiliation.threshold;
        if !(a > 0.5 && a <= 1.0) {
            return Err(PipelineError::Config(format!("affiliation threshold {a} outside (0.5, 1]")));
        }
        if !(self.graph.kl_threshold >= 0.0 && self.graph.kl_threshold.is_finite()) {
            return Err(PipelineError::Config(format!(
                "KL threshold {} must be a non-negative number of bits",
                self.graph.kl_threshold
            )));
        }
        if self.graph.min_weight == 0 {
            return Err(PipelineError::Config("min_weight must be at least 1".into()));
        }
        if self.topics.detector == DetectorKind::External && self.topics.communities.is_none() {
            return Err(PipelineError::Config("the external detector needs a communities file".into()));
        }
        Ok(())
    }

    pub fn cutoff(&self) -> NaiveDate {
        self.affiliation
            .cutoff
            .unwrap_or(self.capture.capture_end + Duration::days(1))
    }

    pub fn detector(&self) -> Detector {
        match self.topics.detector {
            DetectorKind::Louvain => Detector::Louvain { seed: self.topics.seed },
            DetectorKind::External => Detector::External {
                source: self
                    .topics
                    .communities
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
            },
        }
    }
}

/// Fixed layout under the work directory.
#[derive(Debug, Clone)]
pub struct WorkDir {
    pub root: PathBuf,
}

impl WorkDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn stage(&self, stage: Stage) -> PathBuf {
        self.root.join(stage.name())
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join(MANIFEST)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub fingerprint: String,
    /// Path relative to the work directory → sha256.
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub stages: BTreeMap<Stage, StageRecord>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            stages: BTreeMap::new(),
        }
    }
}

impl Manifest {
    pub fn load(work: &WorkDir) -> Manifest {
        artifacts::read_json::<Manifest>(&work.manifest())
            .ok()
            .filter(|m| m.format_version == FORMAT_VERSION)
            .unwrap_or_default()
    }
}

pub fn hash_file(path: &Path) -> std::io::Result<String> {
    let mut file = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn hash_parts(parts: &[String]) -> String {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update((p.len() as u64).to_le_bytes());
        hasher.update(p.as_bytes());
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Computed,
    Reused,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub work: PathBuf,
    pub stages: Vec<(Stage, StageStatus)>,
    pub manifest: Manifest,
}

impl RunSummary {
    pub fn status(&self, stage: Stage) -> Option<StageStatus> {
        self.stages.iter().find(|(s, _)| *s == stage).map(|(_, st)| *st)
    }
}

/// Lazily loaded intermediate results shared between stages of one run.
struct Context<'a> {
    config: &'a RunConfig,
    work: WorkDir,
    manifest: Manifest,
    store: Option<TweetStore>,
    roster: Option<PartyRoster>,
    affiliations: Option<AffiliationResult>,
    graph: Option<CooccurrenceGraph>,
    partition: Option<TopicPartition>,
    daily: Option<DailyCounts>,
    series: Option<Vec<SimilaritySeries>>,
}

type BoxError = Box<dyn StdError + Send + Sync>;

impl<'a> Context<'a> {
    fn store(&mut self) -> Result<&TweetStore, BoxError> {
        if self.store.is_none() {
            let (store, _) = artifacts::read_store(&self.work.stage(Stage::Ingest), &self.config.capture)?;
            self.store = Some(store);
        }
        Ok(self.store.as_ref().expect("loaded"))
    }

    fn roster(&mut self) -> Result<&PartyRoster, BoxError> {
        if self.roster.is_none() {
            self.roster = Some(PartyRoster::load(&self.config.inputs.roster)?);
        }
        Ok(self.roster.as_ref().expect("loaded"))
    }

    fn affiliations(&mut self) -> Result<&AffiliationResult, BoxError> {
        if self.affiliations.is_none() {
            self.store()?;
            self.roster()?;
            let store = self.store.as_ref().expect("loaded");
            let roster = self.roster.as_ref().expect("loaded");
            self.affiliations = Some(artifacts::read_affiliations(
                &self.work.stage(Stage::Affiliate),
                &store.interner,
                roster,
            )?);
        }
        Ok(self.affiliations.as_ref().expect("loaded"))
    }

    fn graph(&mut self) -> Result<&CooccurrenceGraph, BoxError> {
        if self.graph.is_none() {
            let dir = self.work.stage(Stage::Graph);
            let interner = &self.store()?.interner;
            let graph = artifacts::read_graph(&dir, interner)?;
            self.graph = Some(graph);
        }
        Ok(self.graph.as_ref().expect("loaded"))
    }

    fn partition(&mut self) -> Result<&TopicPartition, BoxError> {
        if self.partition.is_none() {
            self.graph()?;
            let graph = self.graph.as_ref().expect("loaded");
            let interner = &self.store.as_ref().expect("loaded").interner;
            let path = self.work.stage(Stage::Topics).join(artifacts::COMMUNITIES);
            self.partition = Some(artifacts::read_partition(&path, graph, interner)?);
        }
        Ok(self.partition.as_ref().expect("loaded"))
    }

    fn daily(&mut self) -> Result<&DailyCounts, BoxError> {
        if self.daily.is_none() {
            let dir = self.work.stage(Stage::Dynamics);
            let meta: DynamicsMeta = artifacts::read_json(&dir.join(artifacts::DYNAMICS_META))?;
            let capture = &self.config.capture;
            let interner = &self.store()?.interner;
            let daily = artifacts::read_daily(&dir.join(artifacts::DAILY), meta.n_topics, capture, interner)?;
            self.daily = Some(daily);
        }
        Ok(self.daily.as_ref().expect("loaded"))
    }

    fn series(&mut self) -> Result<&Vec<SimilaritySeries>, BoxError> {
        if self.series.is_none() {
            self.roster()?;
            let path = self.work.stage(Stage::Similarity).join(artifacts::SERIES);
            let series = artifacts::read_series(&path, &self.config.capture, self.roster.as_ref().expect("loaded"))?;
            self.series = Some(series);
        }
        Ok(self.series.as_ref().expect("loaded"))
    }

    fn input_hash(path: &Path) -> Result<String, BoxError> {
        hash_file(path).map_err(|e| format!("cannot read input {}: {e}", path.display()).into())
    }

    fn fingerprint(&self, stage: Stage) -> Result<String, BoxError> {
        let c = self.config;
        let mut parts = vec![stage.name().to_owned(), FORMAT_VERSION.to_string()];
        for up in stage.upstream() {
            let record = self
                .manifest
                .stages
                .get(up)
                .ok_or_else(|| format!("upstream stage `{up}` has no artifacts"))?;
            parts.push(record.fingerprint.clone());
        }
        match stage {
            Stage::Ingest => {
                parts.push(json(&c.capture));
                parts.push(Self::input_hash(&c.inputs.tweets)?);
            }
            Stage::Affiliate => {
                parts.push(json(&c.affiliation));
                parts.push(c.cutoff().to_string());
                parts.push(Self::input_hash(&c.inputs.roster)?);
                if let Some(f) = &c.inputs.follows {
                    parts.push(Self::input_hash(f)?);
                }
            }
            Stage::Graph => parts.push(json(&c.graph)),
            Stage::Topics => {
                parts.push(json(&c.topics.detector));
                match c.topics.detector {
                    DetectorKind::Louvain => parts.push(c.topics.seed.to_string()),
                    DetectorKind::External => {
                        let path = c.topics.communities.as_ref().ok_or("no communities file")?;
                        parts.push(Self::input_hash(path)?);
                    }
                }
            }
            Stage::Dynamics => {
                parts.push(json(&c.dynamics));
                parts.push(c.capture.window_days.to_string());
            }
            Stage::Similarity => parts.push(json(&c.similarity)),
            Stage::Report => parts.push(json(&c.report)),
        }
        Ok(hash_parts(&parts))
    }

    fn is_current(&self, stage: Stage, fingerprint: &str) -> bool {
        let Some(record) = self.manifest.stages.get(&stage) else {
            return false;
        };
        record.fingerprint == fingerprint
            && record
                .artifacts
                .iter()
                .all(|(rel, hash)| hash_file(&self.work.root.join(rel)).is_ok_and(|h| &h == hash))
    }

    fn record(&mut self, stage: Stage, fingerprint: String, files: Vec<PathBuf>) -> Result<(), BoxError> {
        let mut record = StageRecord {
            fingerprint,
            artifacts: BTreeMap::new(),
        };
        for f in files {
            let rel = f
                .strip_prefix(&self.work.root)
                .unwrap_or(&f)
                .to_string_lossy()
                .replace('\\', "/");
            record.artifacts.insert(rel, hash_file(&f)?);
        }
        self.manifest.stages.insert(stage, record);
        artifacts::write_json(&self.work.manifest(), &self.manifest)?;
        Ok(())
    }

    fn run(&mut self, stage: Stage) -> Result<Vec<PathBuf>, BoxError> {
        let dir = self.work.stage(stage);
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        match stage {
            Stage::Ingest => self.run_ingest(&dir),
            Stage::Affiliate => self.run_affiliate(&dir),
            Stage::Graph => self.run_graph(&dir),
            Stage::Topics => self.run_topics(&dir),
            Stage::Dynamics => self.run_dynamics(&dir),
            Stage::Similarity => self.run_similarity(&dir),
            Stage::Report => self.run_report(&dir),
        }
    }

    fn run_ingest(&mut self, dir: &Path) -> Result<Vec<PathBuf>, BoxError> {
        let parsed = parse_stream(&self.config.inputs.tweets, &self.config.capture)?;
        let authors: HashSet<_> = parsed.records.iter().map(|r| r.user).collect();
        let active = active_users(&parsed.records, &self.config.capture);
        let meta_stats = parsed.stats.clone();
        let store = parsed.retain_authors(&active);
        let meta = StoreMeta {
            stats: meta_stats,
            users_seen: authors.len(),
            active_users: active.len(),
            records_kept: store.records.len(),
        };
        let files = artifacts::write_store(dir, &store, &meta)?;
        self.store = Some(store);
        Ok(files)
    }

    fn run_affiliate(&mut self, dir: &Path) -> Result<Vec<PathBuf>, BoxError> {
        let roster_path = &self.config.inputs.roster;
        if !roster_path.exists() {
            return Err(format!("roster file {} not found", roster_path.display()).into());
        }
        self.roster()?;
        let follows = match &self.config.inputs.follows {
            Some(path) => load_follows(path)?,
            None => Vec::new(),
        };
        self.store()?;
        let store = self.store.as_ref().expect("loaded");
        let roster = self.roster.as_ref().expect("loaded");
        let cutoff = self.config.cutoff();
        let result = infer_affiliations(
            store,
            &follows,
            roster,
            cutoff,
            self.config.capture.date_timestamp(cutoff),
            self.config.affiliation.threshold,
        )?;
        let files = artifacts::write_affiliations(dir, &result, &store.interner, roster)?;
        self.affiliations = Some(result);
        Ok(files)
    }

    fn run_graph(&mut self, dir: &Path) -> Result<Vec<PathBuf>, BoxError> {
        let settings = self.config.graph.clone();
        self.affiliations()?;
        let store = self.store.as_ref().expect("loaded");
        let roster = self.roster.as_ref().expect("loaded");
        let affiliations = self.affiliations.as_ref().expect("loaded");
        let mut graph = build_graph(&store.records, settings.min_weight);
        let political_path = dir.join(artifacts::GRAPH_POLITICAL);
        let mut files = Vec::new();
        // Scores need at least two populated parties; without them the
        // classification is skipped unless it is required.
        match political_scores(&store.records, affiliations, settings.kl_threshold) {
            Ok(scores) => {
                if settings.political_only {
                    let keep = scores.iter().filter(|s| s.is_political).map(|s| s.tag).collect();
                    graph = graph.restrict(&keep);
                }
                artifacts::write_political(&political_path, &scores, &store.interner, roster)?;
                files.push(political_path);
            }
            Err(e) if settings.political_only => return Err(e.into()),
            Err(_) => {}
        }
        files.extend(artifacts::write_graph(dir, &graph, &store.interner)?);
        self.graph = Some(graph);
        self.partition = None;
        Ok(files)
    }

    fn run_topics(&mut self, dir: &Path) -> Result<Vec<PathBuf>, BoxError> {
        let detector = self.config.detector();
        self.graph()?;
        let graph = self.graph.as_ref().expect("loaded");
        let interner = &self.store.as_ref().expect("loaded").interner;
        let partition = match &self.config.topics.communities {
            Some(path) if self.config.topics.detector == DetectorKind::External => {
                let text = fs::read_to_string(path)?;
                let communities = crate::topics::parse_communities(&text, graph, interner)?;
                crate::topics::partition_from_communities(graph, &communities, detector.provenance())
            }
            _ => detect_topics(graph, self.config.topics.seed)?,
        };
        let communities = dir.join(artifacts::COMMUNITIES);
        artifacts::write_text(&communities, &artifacts::communities_text(&partition, interner))?;
        let maps = coreness_maps(graph, &partition)?;
        let coreness = dir.join("coreness.csv");
        if !maps.is_empty() {
            artifacts::write_text(&coreness, &report::coreness_csv(&maps, interner)?)?;
        } else {
            artifacts::write_text(&coreness, "tag,topic,coreness,degree\n")?;
        }
        self.partition = Some(partition);
        Ok(vec![communities, coreness])
    }

    fn run_dynamics(&mut self, dir: &Path) -> Result<Vec<PathBuf>, BoxError> {
        self.partition()?;
        self.affiliations()?;
        let store = self.store.as_ref().expect("loaded");
        let partition = self.partition.as_ref().expect("loaded");
        let affiliations = self.affiliations.as_ref().expect("loaded");
        let capture = &self.config.capture;
        let daily = daily_counts(&store.records, partition, affiliations, capture);
        let reference = self.reference(&daily);
        let sets = description_sets(&daily, capture, &reference);
        let mut files = Vec::new();
        let daily_path = dir.join(artifacts::DAILY);
        artifacts::write_daily(&daily_path, &daily, capture, &store.interner)?;
        files.push(daily_path);
        let global = dir.join(artifacts::GLOBAL);
        artifacts::write_text(&global, &artifacts::global_csv(&sets, daily.n_topics))?;
        files.push(global);
        if self.config.dynamics.dump_vectors {
            let vectors = dir.join(artifacts::VECTORS);
            artifacts::write_text(&vectors, &artifacts::vectors_csv(&sets, daily.n_topics, &store.interner))?;
            files.push(vectors);
        }
        let valid: usize = sets.iter().map(|s| s.valid().count()).sum();
        let total: usize = sets.iter().map(|s| s.vectors.len()).sum();
        let meta = DynamicsMeta {
            n_topics: daily.n_topics,
            window_days: capture.window_days,
            reference,
            windows: sets.len(),
            degenerate_windows: sets.iter().filter(|s| s.vectors.is_empty()).count(),
            valid_vectors: valid,
            invalid_vectors: total - valid,
        };
        let meta_path = dir.join(artifacts::DYNAMICS_META);
        artifacts::write_json(&meta_path, &meta)?;
        files.push(meta_path);
        self.daily = Some(daily);
        Ok(files)
    }

    fn reference(&self, daily: &DailyCounts) -> Reference {
        match self.config.dynamics.reference {
            ReferenceKind::Window => Reference::Window,
            ReferenceKind::Global => Reference::Global(daily.capture_totals()),
            ReferenceKind::UserWeighted => Reference::UserWeighted,
        }
    }

    fn run_similarity(&mut self, dir: &Path) -> Result<Vec<PathBuf>, BoxError> {
        self.daily()?;
        self.affiliations()?;
        let roster = self.roster.as_ref().expect("loaded");
        let daily = self.daily.as_ref().expect("loaded");
        let affiliations = self.affiliations.as_ref().expect("loaded");
        let requests = parse_requests(&self.config.similarity.self_groups, &self.config.similarity.cross, roster)?;
        let reference = self.reference(daily);
        let mut tracker = SimilarityTracker::new(&requests, roster.len())?;
        for matrix in sliding_matrices(daily, &self.config.capture) {
            tracker.push(&description_vectors(&matrix, &reference), affiliations);
        }
        let series = tracker.finish();
        let path = dir.join(artifacts::SERIES);
        artifacts::write_series(&path, &series, &self.config.capture, roster)?;
        self.series = Some(series);
        Ok(vec![path])
    }

    fn run_report(&mut self, dir: &Path) -> Result<Vec<PathBuf>, BoxError> {
        self.series()?;
        self.daily()?;
        self.partition()?;
        self.affiliations()?;
        let roster = self.roster.as_ref().expect("loaded");
        let series = self.series.as_ref().expect("loaded");
        let daily = self.daily.as_ref().expect("loaded");
        let partition = self.partition.as_ref().expect("loaded");
        let graph = self.graph.as_ref().expect("loaded");
        let affiliations = self.affiliations.as_ref().expect("loaded");
        let interner = &self.store.as_ref().expect("loaded").interner;
        let svg = self.config.report.svg;
        let mut files = Vec::new();
        let mut emit = |name: String, text: String| -> Result<(), BoxError> {
            let path = dir.join(name);
            artifacts::write_text(&path, &text)?;
            files.push(path);
            Ok(())
        };

        if series.iter().any(|s| !s.points.is_empty()) {
            emit("similarity_long.csv".into(), report::similarity_long_csv(series, roster)?)?;
            emit("similarity_wide.csv".into(), report::similarity_wide_csv(series, roster)?)?;
            if svg {
                emit("similarity.svg".into(), report::similarity_svg(series, roster)?)?;
            }
        }
        let topics: Vec<usize> = match &self.config.report.topics {
            Some(list) => list.clone(),
            None => (0..partition.n_topics()).collect(),
        };
        for topic in topics {
            let usage = report::topic_usage_from_daily(daily, affiliations, &self.config.capture, topic)?;
            emit(format!("topic_{topic}_usage.csv"), report::usage_csv(&usage, roster)?)?;
            if svg {
                for mode in [UsageMode::Rolling, UsageMode::Cumulative] {
                    emit(
                        format!("topic_{topic}_{}.svg", mode.label()),
                        report::usage_svg(&usage, roster, mode)?,
                    )?;
                }
            }
            let map = coreness(graph, partition, topic)?;
            emit(
                format!("topic_{topic}_coreness.csv"),
                report::coreness_csv(std::slice::from_ref(&map), interner)?,
            )?;
            if svg {
                emit(format!("topic_{topic}_coreness.svg"), report::coreness_svg(&map)?)?;
            }
        }
        Ok(files)
    }
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("settings serialize")
}

/// Stage outputs read back from a work directory.
pub struct Loaded {
    pub store: TweetStore,
    pub roster: PartyRoster,
    pub affiliations: Option<AffiliationResult>,
    pub graph: Option<CooccurrenceGraph>,
    pub partition: Option<TopicPartition>,
    pub daily: Option<DailyCounts>,
    pub series: Option<Vec<SimilaritySeries>>,
}

/// Load the artifacts of every stage up to `through` (report excluded).
pub fn load_outputs(config: &RunConfig, work: &Path, through: Stage) -> Result<Loaded, PipelineError> {
    let work = WorkDir::new(work);
    let mut ctx = Context {
        config,
        manifest: Manifest::load(&work),
        work,
        store: None,
        roster: None,
        affiliations: None,
        graph: None,
        partition: None,
        daily: None,
        series: None,
    };
    ctx.store().map_err(stage_error(Stage::Ingest))?;
    ctx.roster().map_err(stage_error(Stage::Affiliate))?;
    if through >= Stage::Affiliate {
        ctx.affiliations().map_err(stage_error(Stage::Affiliate))?;
    }
    if through >= Stage::Graph {
        ctx.graph().map_err(stage_error(Stage::Graph))?;
    }
    if through >= Stage::Topics {
        ctx.partition().map_err(stage_error(Stage::Topics))?;
    }
    if through >= Stage::Dynamics {
        ctx.daily().map_err(stage_error(Stage::Dynamics))?;
    }
    if through >= Stage::Similarity {
        ctx.series().map_err(stage_error(Stage::Similarity))?;
    }
    Ok(Loaded {
        store: ctx.store.expect("loaded"),
        roster: ctx.roster.expect("loaded"),
        affiliations: ctx.affiliations,
        graph: ctx.graph,
        partition: ctx.partition,
        daily: ctx.daily,
        series: ctx.series,
    })
}

pub fn coreness_maps(graph: &CooccurrenceGraph, partition: &TopicPartition) -> Result<Vec<CorenessMap>, crate::topics::TopicsError> {
    (0..partition.n_topics()).map(|t| coreness(graph, partition, t)).collect()
}

/// Description sets for every window of the capture.
pub fn description_sets(daily: &DailyCounts, capture: &CaptureConfig, reference: &Reference) -> Vec<DescriptionSet> {
    sliding_matrices(daily, capture)
        .iter()
        .map(|m| description_vectors(m, reference))
        .collect()
}

/// Run every stage up to and including `last`, reusing stages whose
/// fingerprint and artifacts are unchanged.
pub fn run_until(config: &RunConfig, work: &Path, last: Stage) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    let work = WorkDir::new(work);
    fs::create_dir_all(&work.root)
        .map_err(|e| PipelineError::Config(format!("cannot create {}: {e}", work.root.display())))?;
    let mut ctx = Context {
        config,
        manifest: Manifest::load(&work),
        work,
        store: None,
        roster: None,
        affiliations: None,
        graph: None,
        partition: None,
        daily: None,
        series: None,
    };
    let mut stages = Vec::new();
    for stage in Stage::ALL.into_iter().take_while(|s| *s <= last) {
        let fail = stage_error(stage);
        let fingerprint = ctx.fingerprint(stage).map_err(&fail)?;
        if ctx.is_current(stage, &fingerprint) {
            stages.push((stage, StageStatus::Reused));
            continue;
        }
        // Downstream records are stale once this stage recomputes.
        ctx.manifest.stages.retain(|s, _| *s < stage);
        let files = ctx.run(stage).map_err(&fail)?;
        ctx.record(stage, fingerprint, files).map_err(&fail)?;
        stages.push((stage, StageStatus::Computed));
    }
    Ok(RunSummary {
        work: ctx.work.root.clone(),
        stages,
        manifest: ctx.manifest,
    })
}

pub fn run_pipeline(config: &RunConfig, work: &Path) -> Result<RunSummary, PipelineError> {
    run_until(config, work, Stage::Report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_follow_the_documented_constants() {
        let text = r#"
            [capture]
            capture_start = "2019-01-01"
            capture_end = "2019-03-31"

            [inputs]
            tweets = "tweets.jsonl"
            roster = "roster.csv"
        "#;
        let mut config: RunConfig = toml::from_str(text).unwrap();
        config.resolve_paths(Path::new("/data"));
        assert_eq!(config.inputs.tweets, PathBuf::from("/data/tweets.jsonl"));
        assert_eq!(config.capture.window_days, 7);
        assert_eq!(config.graph.min_weight, 5);
        assert_eq!(config.graph.kl_threshold, 0.5);
        assert_eq!(config.affiliation.threshold, 0.75);
        assert_eq!(config.topics.detector, DetectorKind::Louvain);
        assert_eq!(config.cutoff(), NaiveDate::from_ymd_opt(2019, 4, 1).unwrap());
        config.validate().unwrap();
        let back: RunConfig = toml::from_str(&config.to_toml()).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn thresholds_are_range_checked() {
        let mut config = RunConfig::new(
            CaptureConfig::new(
                NaiveDate::from_ymd_opt(2019, 1, 1).unwrap(),
                NaiveDate::from_ymd_opt(2019, 1, 31).unwrap(),
            ),
            "t".into(),
            "r".into(),
            None,
        );
        config.affiliation.threshold = 0.5;
        assert!(matches!(config.validate(), Err(PipelineError::Config(_))));
        config.affiliation.threshold = 0.75;
        config.graph.min_weight = 0;
        assert!(config.validate().is_err());
        config.graph.min_weight = 5;
        config.topics.detector = DetectorKind::External;
        assert!(config.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"
            [capture]
            capture_start = "2019-01-01"
            capture_end = "2019-03-31"
            [inputs]
            tweets = "a"
            roster = "b"
            [graph]
            min_wieght = 3
        "#;
        assert!(toml::from_str::<RunConfig>(text).is_err());
    }
}
