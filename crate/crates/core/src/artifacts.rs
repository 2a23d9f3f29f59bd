//! On-disk stage artifacts. Every table is CSV with a header row; metadata
//! is pretty-printed JSON. Readers rebuild the in-memory types against the
//! ingest store's intern table.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affiliation::{AffiliationBasis, AffiliationResult, PartyId, PartyRoster, UserEvidence};
use crate::dynamics::{DailyCounts, DescriptionSet, Reference};
use crate::ingest::{parse_stream, CaptureConfig, IngestError, IngestStats, InternTable, TagId, TweetStore};
use crate::semantic_graph::{CooccurrenceGraph, GraphError, PoliticalScore};
use crate::similarity::{SeriesKind, SeriesPoint, SimilaritySeries};
use crate::topics::{parse_communities, partition_from_communities, TopicPartition, TopicsError};

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("bad artifact {path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Topics(#[from] TopicsError),
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_error(path: &Path, message: impl ToString) -> ArtifactError {
    ArtifactError::Format {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, ArtifactError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_error(parent))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_error(path))?))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, ArtifactError> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>, ArtifactError> {
    let file = File::open(path).map_err(io_error(path))?;
    Ok(csv::Reader::from_reader(file))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), ArtifactError> {
    let mut w = csv_writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| format_error(path, e))?;
    }
    w.flush().map_err(io_error(path))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, ArtifactError> {
    csv_reader(path)?
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| format_error(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| format_error(path, e))?;
    out.write_all(b"\n").map_err(io_error(path))?;
    out.flush().map_err(io_error(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&text).map_err(|e| format_error(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ArtifactError> {
    let mut out = create(path)?;
    out.write_all(text.as_bytes()).map_err(io_error(path))?;
    out.flush().map_err(io_error(path))
}

// ---- ingest -------------------------------------------------------------

pub const STORE_TWEETS: &str = "tweets.jsonl";
pub const STORE_STATS: &str = "stats.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub stats: IngestStats,
    /// Users before the activity filter.
    pub users_seen: usize,
    pub active_users: usize,
    pub records_kept: usize,
}

pub fn write_store(dir: &Path, store: &TweetStore, meta: &StoreMeta) -> Result<Vec<PathBuf>, ArtifactError> {
    let tweets = dir.join(STORE_TWEETS);
    let mut out = create(&tweets)?;
    store.write_jsonl(&mut out).map_err(io_error(&tweets))?;
    let stats = dir.join(STORE_STATS);
    write_json(&stats, meta)?;
    Ok(vec![tweets, stats])
}

/// Reload a normalized store. Re-parsing reproduces the same records and
/// intern table because the stored order is already canonical.
pub fn read_store(dir: &Path, config: &CaptureConfig) -> Result<(TweetStore, StoreMeta), ArtifactError> {
    let mut store = parse_stream(&dir.join(STORE_TWEETS), config)?;
    let meta: StoreMeta = read_json(&dir.join(STORE_STATS))?;
    store.stats = meta.stats.clone();
    store.stats.records = store.records.len();
    Ok((store, meta))
}

// ---- affiliation --------------------------------------------------------

pub const AFFILIATIONS: &str = "affiliations.csv";
pub const AFFILIATION_META: &str = "affiliation.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffiliationMeta {
    pub cutoff: NaiveDate,
    pub threshold: f64,
    pub parties: Vec<String>,
    pub party_sizes: Vec<usize>,
    pub by_retweets: usize,
    pub by_follows: usize,
    pub undecided: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct AffiliationRow {
    user_id: String,
    party: String,
    basis: AffiliationBasis,
    /// Candidate retweets per party, `;`-separated in roster order.
    retweets: String,
    /// Candidate follows per party as 0/1, `;`-separated.
    follows: String,
}

fn join<T: ToString>(values: impl IntoIterator<Item = T>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

pub fn affiliation_meta(result: &AffiliationResult, roster: &PartyRoster) -> AffiliationMeta {
    let count = |basis| result.users().filter(|(_, e)| e.basis == basis).count();
    AffiliationMeta {
        cutoff: result.cutoff,
        threshold: result.threshold,
        parties: roster.parties().iter().map(|p| p.acronym.clone()).collect(),
        party_sizes: result.party_sizes(),
        by_retweets: count(AffiliationBasis::Retweets),
        by_follows: count(AffiliationBasis::Follows),
        undecided: count(AffiliationBasis::Undecided),
    }
}

pub fn write_affiliations(
    dir: &Path,
    result: &AffiliationResult,
    interner: &InternTable,
    roster: &PartyRoster,
) -> Result<Vec<PathBuf>, ArtifactError> {
    let table = dir.join(AFFILIATIONS);
    write_rows(
        &table,
        result.users().map(|(user, e)| AffiliationRow {
            user_id: interner.user_name(user).to_owned(),
            party: e.party.map(|p| roster.party(p).acronym.clone()).unwrap_or_default(),
            basis: e.basis,
            retweets: join(&e.retweets),
            follows: join(e.follows.iter().map(|&f| u8::from(f))),
        }),
    )?;
    let meta = dir.join(AFFILIATION_META);
    write_json(&meta, &affiliation_meta(result, roster))?;
    Ok(vec![table, meta])
}

pub fn read_affiliations(
    dir: &Path,
    interner: &InternTable,
    roster: &PartyRoster,
) -> Result<AffiliationResult, ArtifactError> {
    let meta_path = dir.join(AFFILIATION_META);
    let meta: AffiliationMeta = read_json(&meta_path)?;
    let expected: Vec<&str> = roster.parties().iter().map(|p| p.acronym.as_str()).collect();
    if meta.parties != expected {
        return Err(format_error(&meta_path, "party list differs from the roster"));
    }
    let path = dir.join(AFFILIATIONS);
    let n = roster.len();
    let mut users = BTreeMap::new();
    for row in read_rows::<AffiliationRow>(&path)? {
        let user = interner
            .user_id(&row.user_id)
            .ok_or_else(|| format_error(&path, format!("unknown user {}", row.user_id)))?;
        let party = match row.party.as_str() {
            "" => None,
            key => Some(
                roster
                    .find(key)
                    .ok_or_else(|| format_error(&path, format!("unknown party {key}")))?,
            ),
        };
        let parse = |field: &str| -> Result<Vec<u32>, ArtifactError> {
            let values = field
                .split(';')
                .map(|v| v.parse::<u32>().map_err(|e| format_error(&path, e)))
                .collect::<Result<Vec<_>, _>>()?;
            if values.len() != n {
                return Err(format_error(&path, format!("expected {n} per-party values")));
            }
            Ok(values)
        };
        users.insert(
            user,
            UserEvidence {
                retweets: parse(&row.retweets)?,
                follows: parse(&row.follows)?.into_iter().map(|f| f != 0).collect(),
                party,
                basis: row.basis,
            },
        );
    }
    Ok(AffiliationResult::from_evidence(meta.cutoff, meta.threshold, n, users))
}

// ---- graph --------------------------------------------------------------

pub const GRAPH_NODES: &str = "nodes.csv";
pub const GRAPH_EDGES: &str = "edges.csv";
pub const GRAPH_POLITICAL: &str = "political.csv";
pub const INTERCHANGE_EDGES: &str = "interchange.edges";
pub const INTERCHANGE_NODES: &str = "interchange.nodes";

#[derive(Debug, Serialize, Deserialize)]
struct NodeRow {
    node: usize,
    tag: String,
    users: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRow {
    tag_a: String,
    tag_b: String,
    weight: u32,
}

/// Writes the graph tables and an integer edge list (`a b weight`, node
/// indices) for external community detectors.
pub fn write_graph(dir: &Path, graph: &CooccurrenceGraph, interner: &InternTable) -> Result<Vec<PathBuf>, ArtifactError> {
    let nodes = dir.join(GRAPH_NODES);
    write_rows(
        &nodes,
        (0..graph.n_nodes()).map(|v| NodeRow {
            node: v,
            tag: interner.tag_name(graph.tag(v)).to_owned(),
            users: graph.node_users(v),
        }),
    )?;
    let edges = dir.join(GRAPH_EDGES);
    write_rows(
        &edges,
        graph.edges().map(|(a, b, weight)| EdgeRow {
            tag_a: interner.tag_name(a).to_owned(),
            tag_b: interner.tag_name(b).to_owned(),
            weight,
        }),
    )?;
    let mut text = String::new();
    for &(a, b, w) in graph.index_edges() {
        text.push_str(&format!("{a} {b} {w}\n"));
    }
    let interchange = dir.join(INTERCHANGE_EDGES);
    write_text(&interchange, &text)?;
    let mut text = String::new();
    for v in 0..graph.n_nodes() {
        text.push_str(&format!("{v} {}\n", interner.tag_name(graph.tag(v))));
    }
    let interchange_nodes = dir.join(INTERCHANGE_NODES);
    write_text(&interchange_nodes, &text)?;
    Ok(vec![nodes, edges, interchange, interchange_nodes])
}

pub fn read_graph(dir: &Path, interner: &InternTable) -> Result<CooccurrenceGraph, ArtifactError> {
    let nodes_path = dir.join(GRAPH_NODES);
    let tag = |path: &Path, name: &str| {
        interner
            .tag_id(name)
            .ok_or_else(|| format_error(path, format!("unknown hashtag {name}")))
    };
    let usage = read_rows::<NodeRow>(&nodes_path)?
        .into_iter()
        .map(|r| Ok((tag(&nodes_path, &r.tag)?, r.users)))
        .collect::<Result<Vec<(TagId, u32)>, ArtifactError>>()?;
    let edges_path = dir.join(GRAPH_EDGES);
    let edges = read_rows::<EdgeRow>(&edges_path)?
        .into_iter()
        .map(|r| Ok((tag(&edges_path, &r.tag_a)?, tag(&edges_path, &r.tag_b)?, r.weight)))
        .collect::<Result<Vec<_>, ArtifactError>>()?;
    Ok(CooccurrenceGraph::from_parts(&usage, edges)?)
}

pub fn write_political(
    path: &Path,
    scores: &[PoliticalScore],
    interner: &InternTable,
    roster: &PartyRoster,
) -> Result<(), ArtifactError> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["tag".to_owned(), "users".to_owned()];
    header.extend(roster.parties().iter().map(|p| format!("users_{}", p.acronym)));
    header.extend(roster.parties().iter().map(|p| format!("share_{}", p.acronym)));
    header.extend(["dkl_bits".to_owned(), "political".to_owned()]);
    w.write_record(&header).map_err(|e| format_error(path, e))?;
    for s in scores {
        let mut row = vec![interner.tag_name(s.tag).to_owned(), s.users.to_string()];
        row.extend(s.party_users.iter().map(u32::to_string));
        row.extend(s.shares.iter().map(f64::to_string));
        row.extend([s.dkl_bits.to_string(), s.is_political.to_string()]);
        w.write_record(&row).map_err(|e| format_error(path, e))?;
    }
    w.flush().map_err(io_error(path))
}

// ---- topics -------------------------------------------------------------

pub const COMMUNITIES: &str = "communities.txt";

/// Native community file: a provenance comment, then `topic tag tag ...`.
pub fn communities_text(partition: &TopicPartition, interner: &InternTable) -> String {
    let mut text = format!("# detector {}\n", partition.provenance());
    for (topic, members) in partition.topics() {
        text.push_str(&topic.to_string());
        for tag in members {
            text.push(' ');
            text.push_str(interner.tag_name(*tag));
        }
        text.push('\n');
    }
    text
}

pub fn read_partition(
    path: &Path,
    graph: &CooccurrenceGraph,
    interner: &InternTable,
) -> Result<TopicPartition, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    let provenance = text
        .lines()
        .find_map(|l| l.strip_prefix("# detector "))
        .map(str::to_owned)
        .unwrap_or_else(|| format!("external:{}", path.display()));
    let communities = parse_communities(&text, graph, interner)?;
    Ok(partition_from_communities(graph, &communities, provenance))
}

// ---- dynamics -----------------------------------------------------------

pub const DAILY: &str = "daily.csv";
pub const GLOBAL: &str = "global.csv";
pub const DYNAMICS_META: &str = "dynamics.json";
pub const VECTORS: &str = "vectors.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsMeta {
    pub n_topics: usize,
    pub window_days: u32,
    pub reference: Reference,
    pub windows: usize,
    pub degenerate_windows: usize,
    pub valid_vectors: usize,
    pub invalid_vectors: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct DailyRow {
    date: NaiveDate,
    user_id: String,
    topic: u32,
    count: u32,
}

pub fn write_daily(path: &Path, daily: &DailyCounts, config: &CaptureConfig, interner: &InternTable) -> Result<(), ArtifactError> {
    write_rows(
        path,
        daily.days.iter().enumerate().flat_map(|(day, entries)| {
            let date = config.date_of_day(day);
            entries.iter().map(move |&(user, topic, count)| DailyRow {
                date,
                user_id: interner.user_name(user).to_owned(),
                topic,
                count,
            })
        }),
    )
}

pub fn read_daily(
    path: &Path,
    n_topics: usize,
    config: &CaptureConfig,
    interner: &InternTable,
) -> Result<DailyCounts, ArtifactError> {
    let mut days = vec![Vec::new(); config.n_days()];
    for row in read_rows::<DailyRow>(path)? {
        let day = config.day_of_date(row.date);
        if day < 0 || day as usize >= days.len() || row.topic as usize >= n_topics {
            return Err(format_error(path, format!("row outside capture or topic space: {row:?}")));
        }
        let user = interner
            .user_id(&row.user_id)
            .ok_or_else(|| format_error(path, format!("unknown user {}", row.user_id)))?;
        days[day as usize].push((user, row.topic, row.count));
    }
    for d in &mut days {
        d.sort_unstable();
    }
    Ok(DailyCounts { n_topics, days })
}

/// Per-window topic totals: `date,topic_0,...`.
pub fn global_csv(sets: &[DescriptionSet], n_topics: usize) -> String {
    let mut text = String::from("date");
    for t in 0..n_topics {
        text.push_str(&format!(",topic_{t}"));
    }
    text.push('\n');
    for set in sets {
        text.push_str(&set.date.to_string());
        for v in &set.global.totals {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    text
}

/// Valid description vectors: `date,user_id,d_0,...`.
pub fn vectors_csv(sets: &[DescriptionSet], n_topics: usize, interner: &InternTable) -> String {
    let mut text = String::from("date,user_id");
    for t in 0..n_topics {
        text.push_str(&format!(",d_{t}"));
    }
    text.push('\n');
    for set in sets {
        for d in set.valid() {
            text.push_str(&format!("{},{}", set.date, csv_field(interner.user_name(d.user))));
            for x in &d.components {
                text.push_str(&format!(",{x}"));
            }
            text.push('\n');
        }
    }
    text
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

// ---- similarity ---------------------------------------------------------

pub const SERIES: &str = "series.csv";

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRow {
    date: NaiveDate,
    kind: String,
    group_a: String,
    group_b: String,
    value: f64,
    n_a: usize,
    n_b: usize,
}

pub fn write_series(
    path: &Path,
    series: &[SimilaritySeries],
    config: &CaptureConfig,
    roster: &PartyRoster,
) -> Result<(), ArtifactError> {
    // Requests are recorded in the header comment so empty series survive.
    let mut w = create(path)?;
    let requests: Vec<String> = series
        .iter()
        .map(|s| {
            let (a, b) = s.kind.parties();
            format!("{}:{}:{}", s.kind.label(), roster.party(a).acronym, roster.party(b).acronym)
        })
        .collect();
    writeln!(w, "# series {}", requests.join(" ")).map_err(io_error(path))?;
    let mut c = csv::Writer::from_writer(w);
    for s in series {
        let (a, b) = s.kind.parties();
        for p in &s.points {
            c.serialize(SeriesRow {
                date: config.date_of_day(p.day),
                kind: s.kind.label().to_owned(),
                group_a: roster.party(a).acronym.clone(),
                group_b: roster.party(b).acronym.clone(),
                value: p.value,
                n_a: p.n_first,
                n_b: p.n_second,
            })
            .map_err(|e| format_error(path, e))?;
        }
    }
    if series.iter().all(|s| s.points.is_empty()) {
        c.write_record(["date", "kind", "group_a", "group_b", "value", "n_a", "n_b"])
            .map_err(|e| format_error(path, e))?;
    }
    c.flush().map_err(io_error(path))
}

pub fn read_series(path: &Path, config: &CaptureConfig, roster: &PartyRoster) -> Result<Vec<SimilaritySeries>, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    let (header, body) = text
        .split_once('\n')
        .ok_or_else(|| format_error(path, "empty series file"))?;
    let header = header
        .strip_prefix("# series")
        .ok_or_else(|| format_error(path, "missing series header"))?;
    let resolve = |key: &str| {
        roster
            .find(key)
            .ok_or_else(|| format_error(path, format!("unknown party {key}")))
    };
    let kind_of = |label: &str, a: &str, b: &str| -> Result<SeriesKind, ArtifactError> {
        let (a, b) = (resolve(a)?, resolve(b)?);
        match label {
            "self" if a == b => Ok(SeriesKind::SelfSimilarity { party: a }),
            "cross" => Ok(SeriesKind::Cross { first: a, second: b }),
            other => Err(format_error(path, format!("bad series kind {other}"))),
        }
    };
    let mut series: Vec<SimilaritySeries> = Vec::new();
    for request in header.split_whitespace() {
        let parts: Vec<&str> = request.split(':').collect();
        if parts.len() != 3 {
            return Err(format_error(path, format!("bad series request {request}")));
        }
        series.push(SimilaritySeries {
            kind: kind_of(parts[0], parts[1], parts[2])?,
            points: Vec::new(),
        });
    }
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    for row in reader.deserialize::<SeriesRow>() {
        let row = row.map_err(|e| format_error(path, e))?;
        let kind = kind_of(&row.kind, &row.group_a, &row.group_b)?;
        let target = series
            .iter_mut()
            .find(|s| s.kind == kind)
            .ok_or_else(|| format_error(path, "row for an undeclared series"))?;
        let day = config.day_of_date(row.date);
        if day < 0 {
            return Err(format_error(path, format!("date {} before capture", row.date)));
        }
        target.points.push(SeriesPoint {
            day: day as usize,
            date: row.date,
            value: row.value,
            n_first: row.n_a,
            n_second: row.n_b,
        });
    }
    Ok(series)
}

pub fn party_label(roster: &PartyRoster, party: PartyId) -> &str {
    &roster.party(party).acronym
}
