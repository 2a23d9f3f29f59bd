//! Tweet stream ingestion.
//!
//! Reads line-delimited JSON records, normalizes hashtags, drops records
//! outside the capture interval, resolves duplicate tweet ids and interns
//! user and hashtag strings into dense ids. The resulting [`TweetStore`] is
//! immutable and timestamp ordered.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::OnceLock;

use chrono::{DateTime, Duration, FixedOffset, NaiveDate, NaiveDateTime, TimeZone};
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

const SECONDS_PER_DAY: i64 = 86_400;
const PARSE_CHUNK_LINES: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{malformed} of {lines} lines are malformed; input does not look like a tweet record stream")]
    Format { malformed: usize, lines: usize },
    #[error("invalid capture configuration: {0}")]
    Config(String),
}

/// Dense user id, contiguous from 0 within one [`InternTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserId(pub u32);

/// Dense hashtag id, contiguous from 0 within one [`InternTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TagId(pub u32);

impl UserId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl TagId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub user: UserId,
    /// UTC seconds since the epoch.
    pub timestamp: i64,
    /// Normalized, deduplicated, in first-occurrence order.
    pub hashtags: Vec<TagId>,
    pub is_reply: bool,
    pub is_retweet: bool,
    pub is_quote: bool,
    pub retweeted_user: Option<UserId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TweetClass {
    Reply,
    SimpleRetweet,
    QuoteRetweet,
    Original,
}

impl TweetClass {
    /// Precedence: reply > simple retweet > quote retweet > original.
    pub fn from_flags(is_reply: bool, is_retweet: bool, is_quote: bool) -> Self {
        if is_reply {
            TweetClass::Reply
        } else if is_retweet {
            TweetClass::SimpleRetweet
        } else if is_quote {
            TweetClass::QuoteRetweet
        } else {
            TweetClass::Original
        }
    }
}

pub fn classify_tweet(record: &TweetRecord) -> TweetClass {
    TweetClass::from_flags(record.is_reply, record.is_retweet, record.is_quote)
}

/// Capture interval and calendar settings shared by every stage.
///
/// Capture dates are calendar dates in the configured fixed UTC offset, so
/// the capture interval and the daily window grid line up exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureConfig {
    pub capture_start: NaiveDate,
    /// Inclusive.
    pub capture_end: NaiveDate,
    #[serde(default = "default_window_days")]
    pub window_days: u32,
    #[serde(default = "default_probe_days")]
    pub activity_probe_days: u32,
    #[serde(default = "default_utc_offset_minutes")]
    pub utc_offset_minutes: i32,
}

fn default_window_days() -> u32 {
    7
}

fn default_probe_days() -> u32 {
    30
}

/// Argentina, UTC-3.
fn default_utc_offset_minutes() -> i32 {
    -180
}

impl CaptureConfig {
    pub fn new(capture_start: NaiveDate, capture_end: NaiveDate) -> Self {
        Self {
            capture_start,
            capture_end,
            window_days: default_window_days(),
            activity_probe_days: default_probe_days(),
            utc_offset_minutes: default_utc_offset_minutes(),
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.capture_start >= self.capture_end {
            return Err(IngestError::Config(format!(
                "capture start {} must precede capture end {}",
                self.capture_start, self.capture_end
            )));
        }
        if self.window_days < 1 {
            return Err(IngestError::Config("window_days must be at least 1".into()));
        }
        if self.utc_offset_minutes.abs() >= 24 * 60 {
            return Err(IngestError::Config(format!(
                "utc offset of {} minutes is out of range",
                self.utc_offset_minutes
            )));
        }
        Ok(())
    }

    pub fn offset(&self) -> FixedOffset {
        FixedOffset::east_opt(self.utc_offset_minutes * 60).expect("validated offset")
    }

    /// UTC seconds of local midnight starting `date`.
    pub fn date_timestamp(&self, date: NaiveDate) -> i64 {
        let local = date.and_hms_opt(0, 0, 0).expect("midnight exists");
        local.and_utc().timestamp() - i64::from(self.utc_offset_minutes) * 60
    }

    pub fn start_timestamp(&self) -> i64 {
        self.date_timestamp(self.capture_start)
    }

    /// First second after the capture interval.
    pub fn end_timestamp(&self) -> i64 {
        self.date_timestamp(self.capture_end) + SECONDS_PER_DAY
    }

    pub fn contains(&self, timestamp: i64) -> bool {
        timestamp >= self.start_timestamp() && timestamp < self.end_timestamp()
    }

    pub fn n_days(&self) -> usize {
        ((self.capture_end - self.capture_start).num_days() + 1) as usize
    }

    /// Local calendar day index relative to the capture start.
    pub fn day_index(&self, timestamp: i64) -> i64 {
        (timestamp - self.start_timestamp()).div_euclid(SECONDS_PER_DAY)
    }

    pub fn date_of_day(&self, day: usize) -> NaiveDate {
        self.capture_start + Duration::days(day as i64)
    }

    pub fn day_of_date(&self, date: NaiveDate) -> i64 {
        (date - self.capture_start).num_days()
    }

    fn probe_end_timestamp(&self) -> i64 {
        self.start_timestamp() + i64::from(self.activity_probe_days) * SECONDS_PER_DAY
    }
}

/// Bidirectional string <-> dense id maps for users and hashtags.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InternTable {
    users: Vec<String>,
    user_index: HashMap<String, UserId>,
    tags: Vec<String>,
    tag_index: HashMap<String, TagId>,
}

impl InternTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(users: Vec<String>, tags: Vec<String>) -> Self {
        let mut table = Self::new();
        for user in users {
            table.intern_user(&user);
        }
        for tag in tags {
            table.intern_tag(&tag);
        }
        table
    }

    pub fn intern_user(&mut self, name: &str) -> UserId {
        if let Some(&id) = self.user_index.get(name) {
            return id;
        }
        let id = UserId(self.users.len() as u32);
        self.users.push(name.to_owned());
        self.user_index.insert(name.to_owned(), id);
        id
    }

    pub fn intern_tag(&mut self, name: &str) -> TagId {
        if let Some(&id) = self.tag_index.get(name) {
            return id;
        }
        let id = TagId(self.tags.len() as u32);
        self.tags.push(name.to_owned());
        self.tag_index.insert(name.to_owned(), id);
        id
    }

    pub fn user_id(&self, name: &str) -> Option<UserId> {
        self.user_index.get(name).copied()
    }

    pub fn tag_id(&self, name: &str) -> Option<TagId> {
        self.tag_index.get(name).copied()
    }

    pub fn user_name(&self, id: UserId) -> &str {
        &self.users[id.index()]
    }

    pub fn tag_name(&self, id: TagId) -> &str {
        &self.tags[id.index()]
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_tags(&self) -> usize {
        self.tags.len()
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    /// Non-blank input lines.
    pub lines: usize,
    pub malformed: usize,
    pub out_of_range: usize,
    pub not_allowed: usize,
    pub duplicates: usize,
    pub records: usize,
}

/// Parsed, normalized, timestamp-ordered tweet stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TweetStore {
    pub records: Vec<TweetRecord>,
    pub interner: InternTable,
    pub stats: IngestStats,
}

/// Strip one leading '#', trim and lowercase. Returns `None` for tags that
/// end up empty or contain whitespace.
pub fn normalize_hashtag(raw: &str) -> Option<String> {
    let trimmed = raw.trim();
    let body = trimmed.strip_prefix('#').unwrap_or(trimmed);
    if body.is_empty() || body.starts_with('#') || body.chars().any(char::is_whitespace) {
        return None;
    }
    Some(body.to_lowercase())
}

/// True if `tag` is already in normalized form.
pub fn is_normalized_tag(tag: &str) -> bool {
    normalize_hashtag(tag).as_deref() == Some(tag)
}

fn hashtag_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"#([\p{L}\p{N}_]+)").expect("valid hashtag pattern"))
}

/// Hashtags found in free text, in order of appearance.
pub fn extract_hashtags(text: &str) -> Vec<String> {
    hashtag_pattern()
        .captures_iter(text)
        .map(|c| c[1].to_owned())
        .collect()
}

fn normalize_all<'a>(raw: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for tag in raw {
        if let Some(norm) = normalize_hashtag(tag) {
            if seen.insert(norm.clone()) {
                out.push(norm);
            }
        }
    }
    out
}

/// Accepts epoch seconds (number or numeric string), RFC 3339, naive
/// ISO-8601 (taken as UTC), bare dates and the Twitter `created_at` layout.
pub fn parse_timestamp(value: &Value) -> Option<i64> {
    match value {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().map(|f| f.floor() as i64)),
        Value::String(s) => parse_timestamp_str(s),
        _ => None,
    }
}

fn parse_timestamp_str(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(secs) = s.parse::<i64>() {
        return Some(secs);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for layout in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, layout) {
            return Some(naive.and_utc().timestamp());
        }
    }
    if let Ok(dt) = DateTime::parse_from_str(s, "%a %b %d %H:%M:%S %z %Y") {
        return Some(dt.timestamp());
    }
    if let Ok(date) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(FixedOffset::east_opt(0)?.from_utc_datetime(&date.and_hms_opt(0, 0, 0)?).timestamp());
    }
    None
}

fn id_string(value: &Value) -> Option<String> {
    match value {
        Value::String(s) if !s.trim().is_empty() => Some(s.trim().to_owned()),
        Value::Number(n) if n.is_u64() || n.is_i64() => Some(n.to_string()),
        _ => None,
    }
}

#[derive(Deserialize)]
struct RawRecord {
    tweet_id: Value,
    user_id: Value,
    timestamp: Value,
    #[serde(default)]
    hashtags: Option<Vec<String>>,
    #[serde(default)]
    text: Option<String>,
    is_reply: bool,
    is_retweet: bool,
    is_quote: bool,
    #[serde(default)]
    retweeted_user_id: Option<Value>,
}

#[derive(Debug)]
struct ParsedLine {
    tweet_id: String,
    user: String,
    timestamp: i64,
    hashtags: Vec<String>,
    flags: (bool, bool, bool),
    retweeted_user: Option<String>,
}

fn parse_line(line: &str) -> Option<ParsedLine> {
    let raw: RawRecord = serde_json::from_str(line).ok()?;
    let tweet_id = id_string(&raw.tweet_id)?;
    let user = id_string(&raw.user_id)?;
    let timestamp = parse_timestamp(&raw.timestamp)?;
    let hashtags = match (&raw.hashtags, &raw.text) {
        (Some(tags), _) => normalize_all(tags.iter().map(String::as_str)),
        (None, Some(text)) => {
            let found = extract_hashtags(text);
            normalize_all(found.iter().map(String::as_str))
        }
        (None, None) => Vec::new(),
    };
    let retweeted_user = match raw.retweeted_user_id {
        None | Some(Value::Null) => None,
        Some(v) => Some(id_string(&v)?),
    };
    Some(ParsedLine {
        tweet_id,
        user,
        timestamp,
        hashtags,
        flags: (raw.is_reply, raw.is_retweet, raw.is_quote),
        retweeted_user,
    })
}

enum LineOutcome {
    Blank,
    Malformed,
    OutOfRange,
    NotAllowed,
    Parsed(ParsedLine),
}

pub fn parse_stream(path: &Path, config: &CaptureConfig) -> Result<TweetStore, IngestError> {
    parse_stream_filtered(path, config, None)
}

/// As [`parse_stream`], keeping only authors present in `allow` when given.
pub fn parse_stream_filtered(
    path: &Path,
    config: &CaptureConfig,
    allow: Option<&HashSet<String>>,
) -> Result<TweetStore, IngestError> {
    let io_err = |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    parse_reader(BufReader::with_capacity(1 << 20, file), config, allow).map_err(|e| match e {
        IngestError::Io { source, .. } => io_err(source),
        other => other,
    })
}

pub fn parse_reader<R: BufRead>(
    reader: R,
    config: &CaptureConfig,
    allow: Option<&HashSet<String>>,
) -> Result<TweetStore, IngestError> {
    config.validate()?;
    let (start, end) = (config.start_timestamp(), config.end_timestamp());
    let mut stats = IngestStats::default();
    let mut interner = InternTable::new();
    let mut records: Vec<TweetRecord> = Vec::new();
    let mut by_tweet_id: HashMap<String, usize> = HashMap::new();

    let mut lines = reader.lines();
    loop {
        let mut chunk = Vec::with_capacity(PARSE_CHUNK_LINES);
        for line in lines.by_ref().take(PARSE_CHUNK_LINES) {
            chunk.push(line.map_err(|source| IngestError::Io {
                path: String::new(),
                source,
            })?);
        }
        if chunk.is_empty() {
            break;
        }
        let outcomes: Vec<LineOutcome> = chunk
            .par_iter()
            .map(|line| {
                if line.trim().is_empty() {
                    return LineOutcome::Blank;
                }
                match parse_line(line) {
                    None => LineOutcome::Malformed,
                    Some(p) if p.timestamp < start || p.timestamp >= end => LineOutcome::OutOfRange,
                    Some(p) if allow.is_some_and(|a| !a.contains(&p.user)) => LineOutcome::NotAllowed,
                    Some(p) => LineOutcome::Parsed(p),
                }
            })
            .collect();

        for outcome in outcomes {
            match outcome {
                LineOutcome::Blank => continue,
                LineOutcome::Malformed => stats.malformed += 1,
                LineOutcome::OutOfRange => stats.out_of_range += 1,
                LineOutcome::NotAllowed => stats.not_allowed += 1,
                LineOutcome::Parsed(p) => {
                    let record = TweetRecord {
                        user: interner.intern_user(&p.user),
                        timestamp: p.timestamp,
                        hashtags: p.hashtags.iter().map(|t| interner.intern_tag(t)).collect(),
                        is_reply: p.flags.0,
                        is_retweet: p.flags.1,
                        is_quote: p.flags.2,
                        retweeted_user: p.retweeted_user.as_deref().map(|u| interner.intern_user(u)),
                        tweet_id: p.tweet_id,
                    };
                    // Last record wins for repeated tweet ids.
                    match by_tweet_id.get(&record.tweet_id) {
                        Some(&slot) => {
                            stats.duplicates += 1;
                            records[slot] = record;
                        }
                        None => {
                            by_tweet_id.insert(record.tweet_id.clone(), records.len());
                            records.push(record);
                        }
                    }
                }
            }
            stats.lines += 1;
        }
    }

    if stats.malformed * 2 > stats.lines {
        return Err(IngestError::Format {
            malformed: stats.malformed,
            lines: stats.lines,
        });
    }

    records.sort_by_key(|r| r.timestamp);
    let (records, interner) = canonicalize(records, &interner);
    stats.records = records.len();
    Ok(TweetStore {
        records,
        interner,
        stats,
    })
}

/// Renumber users and tags by first appearance in record order, dropping
/// strings no record references. Two stores holding the same records in
/// the same order always end up with identical tables.
pub fn canonicalize(records: Vec<TweetRecord>, old: &InternTable) -> (Vec<TweetRecord>, InternTable) {
    let mut table = InternTable::new();
    let mut user_map: Vec<Option<UserId>> = vec![None; old.n_users()];
    let mut tag_map: Vec<Option<TagId>> = vec![None; old.n_tags()];
    let mut map_user = |table: &mut InternTable, u: UserId| {
        *user_map[u.index()].get_or_insert_with(|| table.intern_user(old.user_name(u)))
    };
    let records = records
        .into_iter()
        .map(|mut r| {
            r.user = map_user(&mut table, r.user);
            r.retweeted_user = r.retweeted_user.map(|u| map_user(&mut table, u));
            for tag in &mut r.hashtags {
                *tag = *tag_map[tag.index()].get_or_insert_with(|| table.intern_tag(old.tag_name(*tag)));
            }
            r
        })
        .collect();
    (records, table)
}

impl TweetStore {
    /// Keep only records authored by `users`, re-canonicalizing the tables.
    pub fn retain_authors(self, users: &BTreeSet<UserId>) -> TweetStore {
        let TweetStore {
            records,
            interner,
            mut stats,
        } = self;
        let kept: Vec<TweetRecord> = records.into_iter().filter(|r| users.contains(&r.user)).collect();
        let (records, interner) = canonicalize(kept, &interner);
        stats.records = records.len();
        TweetStore {
            records,
            interner,
            stats,
        }
    }

    /// Serialize in the input line format with normalized fields.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in &self.records {
            let line = serde_json::json!({
                "tweet_id": r.tweet_id,
                "user_id": self.interner.user_name(r.user),
                "timestamp": r.timestamp,
                "hashtags": r.hashtags.iter().map(|t| self.interner.tag_name(*t)).collect::<Vec<_>>(),
                "is_reply": r.is_reply,
                "is_retweet": r.is_retweet,
                "is_quote": r.is_quote,
                "retweeted_user_id": r.retweeted_user.map(|u| self.interner.user_name(u)),
            });
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

/// Users with at least one record in the activity probe period
/// `[capture_start, capture_start + activity_probe_days)`. Untagged tweets
/// count: activity is about posting.
pub fn active_users(records: &[TweetRecord], config: &CaptureConfig) -> BTreeSet<UserId> {
    let (start, probe_end) = (config.start_timestamp(), config.probe_end_timestamp());
    records
        .iter()
        .take_while(|r| r.timestamp < probe_end)
        .filter(|r| r.timestamp >= start)
        .map(|r| r.user)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> CaptureConfig {
        let mut c = CaptureConfig::new(
            NaiveDate::from_ymd_opt(2015, 7, 1).unwrap(),
            NaiveDate::from_ymd_opt(2015, 9, 30).unwrap(),
        );
        c.utc_offset_minutes = 0;
        c
    }

    fn line(id: &str, user: &str, ts: i64, tags: &[&str]) -> String {
        serde_json::json!({
            "tweet_id": id, "user_id": user, "timestamp": ts, "hashtags": tags,
            "is_reply": false, "is_retweet": false, "is_quote": false, "retweeted_user_id": null
        })
        .to_string()
    }

    fn parse(text: &str) -> Result<TweetStore, IngestError> {
        parse_reader(text.as_bytes(), &config(), None)
    }

    #[test]
    fn text_hashtags_are_case_folded_and_deduplicated() {
        let ts = config().start_timestamp() + 10;
        let l = serde_json::json!({
            "tweet_id": 1, "user_id": 7, "timestamp": ts, "text": "Vamos #Argentina #ARGENTINA",
            "is_reply": false, "is_retweet": false, "is_quote": false
        });
        let store = parse(&l.to_string()).unwrap();
        assert_eq!(store.records.len(), 1);
        let tags: Vec<&str> = store.records[0]
            .hashtags
            .iter()
            .map(|t| store.interner.tag_name(*t))
            .collect();
        assert_eq!(tags, ["argentina"]);
    }

    #[test]
    fn records_before_capture_are_dropped() {
        let start = config().start_timestamp();
        let text = [line("1", "a", start - 1, &[]), line("2", "a", start, &[])].join("\n");
        let store = parse(&text).unwrap();
        assert_eq!(store.records.len(), 1);
        assert_eq!(store.stats.out_of_range, 1);
    }

    #[test]
    fn end_date_is_inclusive() {
        let c = config();
        let text = [
            line("1", "a", c.end_timestamp() - 1, &[]),
            line("2", "a", c.end_timestamp(), &[]),
        ]
        .join("\n");
        let store = parse(&text).unwrap();
        assert_eq!(store.records.len(), 1);
        assert_eq!(store.stats.out_of_range, 1);
    }

    #[test]
    fn corrupt_line_is_counted_and_skipped() {
        let start = config().start_timestamp();
        let text = [
            line("1", "a", start + 5, &["#x"]),
            "{\"tweet_id\": 2, \"user_id\": ".to_string(),
            line("3", "b", start + 1, &["#y"]),
        ]
        .join("\n");
        let store = parse(&text).unwrap();
        assert_eq!(store.records.len(), 2);
        assert_eq!(store.stats.malformed, 1);
        // timestamp order
        assert_eq!(store.records[0].tweet_id, "3");
    }

    #[test]
    fn mostly_malformed_input_is_fatal() {
        let start = config().start_timestamp();
        let text = ["garbage".to_string(), "{}".to_string(), line("1", "a", start, &[])].join("\n");
        assert!(matches!(parse(&text), Err(IngestError::Format { malformed: 2, lines: 3 })));
    }

    #[test]
    fn missing_flags_are_malformed() {
        let text = r#"{"tweet_id": 1, "user_id": 2, "timestamp": 1435752000, "hashtags": []}"#;
        assert!(matches!(parse(text), Err(IngestError::Format { .. })));
    }

    #[test]
    fn duplicate_tweet_ids_keep_last() {
        let start = config().start_timestamp();
        let text = [line("1", "a", start, &["#x"]), line("1", "a", start + 3, &["#y"])].join("\n");
        let store = parse(&text).unwrap();
        assert_eq!(store.stats.duplicates, 1);
        assert_eq!(store.records.len(), 1);
        assert_eq!(store.interner.tag_name(store.records[0].hashtags[0]), "y");
        // the overwritten tag no longer appears in the table
        assert_eq!(store.interner.n_tags(), 1);
    }

    #[test]
    fn timestamp_layouts() {
        let expect = 1_435_752_000;
        for v in [
            Value::from(expect),
            Value::from("1435752000"),
            Value::from("2015-07-01T12:00:00Z"),
            Value::from("2015-07-01T09:00:00-03:00"),
            Value::from("2015-07-01 12:00:00"),
            Value::from("Wed Jul 01 12:00:00 +0000 2015"),
        ] {
            assert_eq!(parse_timestamp(&v), Some(expect), "{v}");
        }
        assert_eq!(parse_timestamp(&Value::from("yesterday")), None);
        assert_eq!(parse_timestamp(&Value::Bool(true)), None);
    }

    #[test]
    fn hashtag_normalization() {
        assert_eq!(normalize_hashtag("#Hola").as_deref(), Some("hola"));
        assert_eq!(normalize_hashtag("  #ÑANDÚ ").as_deref(), Some("ñandú"));
        assert_eq!(normalize_hashtag("#"), None);
        assert_eq!(normalize_hashtag(""), None);
        assert_eq!(normalize_hashtag("##x"), None);
        assert_eq!(normalize_hashtag("a b"), None);
        assert!(is_normalized_tag("macri2015"));
        assert!(!is_normalized_tag("#macri"));
    }

    #[test]
    fn classification_precedence_is_total() {
        use TweetClass::*;
        let table = [
            ((false, false, false), Original),
            ((false, false, true), QuoteRetweet),
            ((false, true, false), SimpleRetweet),
            ((false, true, true), SimpleRetweet),
            ((true, false, false), Reply),
            ((true, false, true), Reply),
            ((true, true, false), Reply),
            ((true, true, true), Reply),
        ];
        for ((r, rt, q), class) in table {
            assert_eq!(TweetClass::from_flags(r, rt, q), class);
        }
    }

    #[test]
    fn activity_probe_window() {
        let c = config();
        let day = |d: i64| c.start_timestamp() + d * SECONDS_PER_DAY + 60;
        let text = [line("1", "early", day(3), &[]), line("2", "late", day(45), &[])].join("\n");
        let store = parse(&text).unwrap();
        let active = active_users(&store.records, &c);
        let names: Vec<&str> = active.iter().map(|u| store.interner.user_name(*u)).collect();
        assert_eq!(names, ["early"]);
        assert!(active_users(&[], &c).is_empty());
    }

    #[test]
    fn local_offset_shifts_day_boundaries() {
        let mut c = config();
        c.utc_offset_minutes = -180;
        // 02:00 UTC on the start date is still the previous local day.
        let utc_midnight = NaiveDate::from_ymd_opt(2015, 7, 1)
            .unwrap()
            .and_hms_opt(2, 0, 0)
            .unwrap()
            .and_utc()
            .timestamp();
        assert!(!c.contains(utc_midnight));
        assert!(c.contains(utc_midnight + 3600));
        assert_eq!(c.day_index(utc_midnight + 3600), 0);
    }

    #[test]
    fn normalized_serialization_reparses_identically() {
        let start = config().start_timestamp();
        let text = [
            line("9", "b", start + 50, &["#Y", "#x"]),
            line("3", "a", start + 10, &["#X"]),
        ]
        .join("\n");
        let store = parse(&text).unwrap();
        let mut buf = Vec::new();
        store.write_jsonl(&mut buf).unwrap();
        let again = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(again.records, store.records);
        assert_eq!(again.interner, store.interner);
    }

    #[test]
    fn allow_list_filters_authors() {
        let start = config().start_timestamp();
        let text = [line("1", "a", start, &[]), line("2", "b", start, &[])].join("\n");
        let allow: HashSet<String> = ["a".to_string()].into();
        let store = parse_reader(text.as_bytes(), &config(), Some(&allow)).unwrap();
        assert_eq!(store.records.len(), 1);
        assert_eq!(store.stats.not_allowed, 1);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut c = config();
        c.capture_end = c.capture_start;
        assert!(c.validate().is_err());
        let mut c = config();
        c.window_days = 0;
        assert!(c.validate().is_err());
    }
}
