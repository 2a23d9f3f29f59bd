//! Synthetic tweet corpora with planted topics, party preferences, event
//! spikes and preference realignments.
//!
//! Output uses the same line format the ingest stage reads, plus roster and
//! follow tables and a ground-truth bundle. Generation is single-threaded
//! and fully determined by the seed.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affiliation::{Party, PartyRoster};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic corpus spec: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("cannot parse spec {path}: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParty {
    pub acronym: String,
    #[serde(default)]
    pub name: String,
    pub users: usize,
    /// Topic preference distribution; must sum to 1.
    pub preferences: Vec<f64>,
    #[serde(default = "default_candidates")]
    pub candidates: usize,
}

fn default_candidates() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthEvent {
    pub date: NaiveDate,
    pub party: String,
    pub topic: usize,
    /// Multiplier applied to the topic's preference weight that day.
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRealignment {
    pub date: NaiveDate,
    pub party: String,
    /// Adopt this party's preference profile from `date` on.
    #[serde(default)]
    pub toward_party: Option<String>,
    /// Or adopt an explicit profile.
    #[serde(default)]
    pub preferences: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub start: NaiveDate,
    pub days: u32,
    pub topics: usize,
    pub hashtags_per_topic: usize,
    pub parties: Vec<SynthParty>,
    /// Users with uniform preferences and no candidate evidence.
    #[serde(default)]
    pub unaffiliated_users: usize,
    #[serde(default = "default_tweets_per_user_day")]
    pub tweets_per_user_day: f64,
    #[serde(default = "default_tagged_fraction")]
    pub tagged_fraction: f64,
    #[serde(default = "default_max_tags")]
    pub max_tags_per_tweet: usize,
    /// Probability that a tagged tweet also carries one hashtag of a
    /// different, uniformly chosen topic.
    #[serde(default = "default_cross_topic_noise")]
    pub cross_topic_noise: f64,
    /// Share of retweets that retweet one of the author's own candidates.
    #[serde(default = "default_candidate_retweet_share")]
    pub candidate_retweet_share: f64,
    /// Probability that an affiliated user also follows a rival candidate.
    #[serde(default = "default_cross_follow")]
    pub cross_follow_probability: f64,
    #[serde(default)]
    pub events: Vec<SynthEvent>,
    #[serde(default)]
    pub realignments: Vec<SynthRealignment>,
    #[serde(default = "default_offset")]
    pub utc_offset_minutes: i32,
    #[serde(default)]
    pub seed: u64,
}

fn default_tweets_per_user_day() -> f64 {
    1.4
}

fn default_tagged_fraction() -> f64 {
    0.14
}

fn default_max_tags() -> usize {
    3
}

fn default_cross_topic_noise() -> f64 {
    0.02
}

fn default_candidate_retweet_share() -> f64 {
    0.2
}

fn default_cross_follow() -> f64 {
    0.1
}

fn default_offset() -> i32 {
    -180
}

impl SynthSpec {
    /// Two parties with disjoint preferences over `topics` topics.
    pub fn two_party(topics: usize, users_per_party: usize, days: u32, seed: u64) -> Self {
        let half = topics / 2;
        let profile = |range: std::ops::Range<usize>| {
            let mut p = vec![0.0; topics];
            for t in range.clone() {
                p[t] = 1.0 / range.len() as f64;
            }
            p
        };
        SynthSpec {
            start: NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date"),
            days,
            topics,
            hashtags_per_topic: 30,
            parties: vec![
                SynthParty {
                    acronym: "A".into(),
                    name: "Party A".into(),
                    users: users_per_party,
                    preferences: profile(0..half.max(1)),
                    candidates: 2,
                },
                SynthParty {
                    acronym: "B".into(),
                    name: "Party B".into(),
                    users: users_per_party,
                    preferences: profile(half.max(1)..topics),
                    candidates: 2,
                },
            ],
            unaffiliated_users: 0,
            tweets_per_user_day: default_tweets_per_user_day(),
            tagged_fraction: default_tagged_fraction(),
            max_tags_per_tweet: default_max_tags(),
            cross_topic_noise: default_cross_topic_noise(),
            candidate_retweet_share: default_candidate_retweet_share(),
            cross_follow_probability: default_cross_follow(),
            events: Vec::new(),
            realignments: Vec::new(),
            utc_offset_minutes: default_offset(),
            seed,
        }
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = fs::read_to_string(path).map_err(|source| SynthError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let parse_err = |message: String| SynthError::Parse {
            path: path.display().to_string(),
            message,
        };
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))
        }
    }

    pub fn end(&self) -> NaiveDate {
        self.start + Duration::days(i64::from(self.days) - 1)
    }

    pub fn hashtag(topic: usize, index: usize) -> String {
        format!("t{topic}h{index}")
    }

    fn party_index(&self, acronym: &str) -> Result<usize, SynthError> {
        self.parties
            .iter()
            .position(|p| p.acronym == acronym)
            .ok_or_else(|| SynthError::Config(format!("unknown party {acronym}")))
    }

    fn check_profile(&self, what: &str, p: &[f64]) -> Result<(), SynthError> {
        if p.len() != self.topics {
            return Err(SynthError::Config(format!(
                "{what}: {} preferences for {} topics",
                p.len(),
                self.topics
            )));
        }
        if p.iter().any(|x| !(*x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(SynthError::Config(format!("{what}: preferences must be non-negative and sum to 1")));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.topics == 0 || self.hashtags_per_topic == 0 {
            return Err(SynthError::Config("hashtag vocabulary is empty".into()));
        }
        if self.days == 0 {
            return Err(SynthError::Config("capture must span at least one day".into()));
        }
        if self.parties.len() < 2 {
            return Err(SynthError::Config("at least two parties are required".into()));
        }
        if self.max_tags_per_tweet == 0 {
            return Err(SynthError::Config("max_tags_per_tweet must be positive".into()));
        }
        for (name, p) in [
            ("tagged_fraction", self.tagged_fraction),
            ("cross_topic_noise", self.cross_topic_noise),
            ("candidate_retweet_share", self.candidate_retweet_share),
            ("cross_follow_probability", self.cross_follow_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::Config(format!("{name} must be a probability")));
            }
        }
        if !(self.tweets_per_user_day > 0.0) {
            return Err(SynthError::Config("tweets_per_user_day must be positive".into()));
        }
        for party in &self.parties {
            self.check_profile(&party.acronym, &party.preferences)?;
            if party.candidates == 0 {
                return Err(SynthError::Config(format!("party {} has no candidates", party.acronym)));
            }
        }
        let in_range = |d: NaiveDate| d >= self.start && d <= self.end();
        for event in &self.events {
            self.party_index(&event.party)?;
            if event.topic >= self.topics || !in_range(event.date) || !(event.intensity > 0.0) {
                return Err(SynthError::Config(format!("invalid event {event:?}")));
            }
        }
        for r in &self.realignments {
            self.party_index(&r.party)?;
            if !in_range(r.date) {
                return Err(SynthError::Config(format!("realignment date {} outside capture", r.date)));
            }
            match (&r.toward_party, &r.preferences) {
                (Some(target), None) => {
                    self.party_index(target)?;
                }
                (None, Some(p)) => self.check_profile("realignment", p)?,
                _ => {
                    return Err(SynthError::Config(
                        "a realignment needs exactly one of toward_party or preferences".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn roster(&self) -> PartyRoster {
        PartyRoster::new(
            self.parties
                .iter()
                .map(|p| Party {
                    id: p.acronym.to_lowercase(),
                    acronym: p.acronym.clone(),
                    name: p.name.clone(),
                    candidates: (0..p.candidates).map(|k| candidate_account(&p.acronym, k)).collect(),
                })
                .collect(),
        )
        .expect("validated spec gives a valid roster")
    }
}

fn candidate_account(acronym: &str, k: usize) -> String {
    format!("cand_{}_{k}", acronym.to_lowercase())
}

/// Planted truth behind a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// hashtag -> planted topic
    pub planted: BTreeMap<String, usize>,
    /// user -> party acronym, `None` for unaffiliated users
    pub affiliations: BTreeMap<String, Option<String>>,
    pub events: Vec<SynthEvent>,
    pub realignments: Vec<SynthRealignment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTweet {
    pub tweet_id: String,
    pub user_id: String,
    pub timestamp: i64,
    pub hashtags: Vec<String>,
    pub is_reply: bool,
    pub is_retweet: bool,
    pub is_quote: bool,
    pub retweeted_user_id: Option<String>,
}

pub struct SyntheticCorpus {
    pub tweets: Vec<SyntheticTweet>,
    pub follows: Vec<(String, String)>,
    pub roster: PartyRoster,
    pub truth: GroundTruth,
}

/// Paths written by [`write_corpus`].
#[derive(Debug, Clone)]
pub struct CorpusFiles {
    pub tweets: PathBuf,
    pub roster: PathBuf,
    pub follows: PathBuf,
    pub truth: PathBuf,
}

struct UserPlan {
    name: String,
    party: Option<usize>,
}

const OTHER_ACCOUNTS: usize = 500;

/// Generate a corpus in memory.
pub fn generate(spec: &SynthSpec) -> Result<SyntheticCorpus, SynthError> {
    let mut tweets = Vec::new();
    let (follows, roster, truth) = generate_with(spec, |t| {
        tweets.push(t);
        Ok(())
    })?;
    Ok(SyntheticCorpus {
        tweets,
        follows,
        roster,
        truth,
    })
}

/// Generate and stream tweets to `sink` in timestamp order.
pub fn generate_with(
    spec: &SynthSpec,
    mut sink: impl FnMut(SyntheticTweet) -> io::Result<()>,
) -> Result<(Vec<(String, String)>, PartyRoster, GroundTruth), SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let roster = spec.roster();
    let io_err = |source| SynthError::Io {
        path: "<sink>".into(),
        source,
    };

    let mut users = Vec::new();
    for (p, party) in spec.parties.iter().enumerate() {
        for _ in 0..party.users {
            users.push(UserPlan {
                name: format!("u{}", users.len()),
                party: Some(p),
            });
        }
    }
    for _ in 0..spec.unaffiliated_users {
        users.push(UserPlan {
            name: format!("u{}", users.len()),
            party: None,
        });
    }

    let mut follows = Vec::new();
    for user in &users {
        let Some(p) = user.party else { continue };
        let own = &spec.parties[p];
        follows.push((user.name.clone(), candidate_account(&own.acronym, rng.random_range(0..own.candidates))));
        if rng.random_bool(spec.cross_follow_probability) {
            let mut other = rng.random_range(0..spec.parties.len() - 1);
            if other >= p {
                other += 1;
            }
            let rival = &spec.parties[other];
            follows.push((user.name.clone(), candidate_account(&rival.acronym, rng.random_range(0..rival.candidates))));
        }
    }

    let uniform = vec![1.0 / spec.topics as f64; spec.topics];
    let class_weights = WeightedIndex::new([0.15, 0.55, 0.10, 0.20]).expect("valid class weights");
    let activity = Poisson::new(spec.tweets_per_user_day).map_err(|e| SynthError::Config(e.to_string()))?;
    let day_seconds = 86_400i64;
    let offset = i64::from(spec.utc_offset_minutes) * 60;
    let max_tags = spec.max_tags_per_tweet.min(spec.hashtags_per_topic);
    let mut next_id: u64 = 0;

    for day in 0..spec.days {
        let date = spec.start + Duration::days(i64::from(day));
        let midnight = date.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp() - offset;

        // Preferences in force today, per party.
        let mut profiles: Vec<Vec<f64>> = spec.parties.iter().map(|p| p.preferences.clone()).collect();
        for r in spec.realignments.iter().filter(|r| r.date <= date) {
            let p = spec.party_index(&r.party)?;
            profiles[p] = match (&r.toward_party, &r.preferences) {
                (Some(target), _) => spec.parties[spec.party_index(target)?].preferences.clone(),
                (None, Some(explicit)) => explicit.clone(),
                (None, None) => unreachable!("validated"),
            };
        }
        for event in spec.events.iter().filter(|e| e.date == date) {
            let p = spec.party_index(&event.party)?;
            profiles[p][event.topic] *= event.intensity;
        }
        let samplers: Vec<Option<WeightedIndex<f64>>> =
            profiles.iter().map(|p| WeightedIndex::new(p).ok()).collect();
        let uniform_sampler = WeightedIndex::new(&uniform).expect("uniform weights");

        let mut today: Vec<SyntheticTweet> = Vec::new();
        for user in &users {
            let n: f64 = activity.sample(&mut rng);
            for _ in 0..n as u64 {
                let timestamp = midnight + rng.random_range(0..day_seconds);
                let class = class_weights.sample(&mut rng);
                let (is_reply, is_retweet, is_quote) = (class == 0, class == 1, class == 2);
                let retweeted_user_id = if is_retweet || is_quote {
                    match user.party {
                        Some(p) if rng.random_bool(spec.candidate_retweet_share) => {
                            let own = &spec.parties[p];
                            Some(candidate_account(&own.acronym, rng.random_range(0..own.candidates)))
                        }
                        _ => Some(format!("acct{}", rng.random_range(0..OTHER_ACCOUNTS))),
                    }
                } else {
                    None
                };
                let mut hashtags = Vec::new();
                if rng.random_bool(spec.tagged_fraction) {
                    let sampler = match user.party {
                        Some(p) => samplers[p].as_ref().unwrap_or(&uniform_sampler),
                        None => &uniform_sampler,
                    };
                    let topic = sampler.sample(&mut rng);
                    let k = rng.random_range(1..=max_tags);
                    for i in sample(&mut rng, spec.hashtags_per_topic, k) {
                        hashtags.push(format!("#{}", SynthSpec::hashtag(topic, i)));
                    }
                    if spec.topics > 1 && rng.random_bool(spec.cross_topic_noise) {
                        let mut other = rng.random_range(0..spec.topics - 1);
                        if other >= topic {
                            other += 1;
                        }
                        let i = rng.random_range(0..spec.hashtags_per_topic);
                        hashtags.push(format!("#{}", SynthSpec::hashtag(other, i)));
                    }
                }
                today.push(SyntheticTweet {
                    tweet_id: String::new(),
                    user_id: user.name.clone(),
                    timestamp,
                    hashtags,
                    is_reply,
                    is_retweet,
                    is_quote,
                    retweeted_user_id,
                });
            }
        }
        today.sort_by_key(|t| t.timestamp);
        for mut tweet in today {
            tweet.tweet_id = next_id.to_string();
            next_id += 1;
            sink(tweet).map_err(io_err)?;
        }
    }

    let planted = (0..spec.topics)
        .flat_map(|t| (0..spec.hashtags_per_topic).map(move |i| (SynthSpec::hashtag(t, i), t)))
        .collect();
    let affiliations = users
        .iter()
        .map(|u| (u.name.clone(), u.party.map(|p| spec.parties[p].acronym.clone())))
        .collect();
    let truth = GroundTruth {
        planted,
        affiliations,
        events: spec.events.clone(),
        realignments: spec.realignments.clone(),
    };
    Ok((follows, roster, truth))
}

/// Write `tweets.jsonl`, `roster.csv`, `follows.csv` and `truth.json` into
/// `dir`, streaming the tweets.
pub fn write_corpus(spec: &SynthSpec, dir: &Path) -> Result<CorpusFiles, SynthError> {
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| SynthError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = CorpusFiles {
        tweets: dir.join("tweets.jsonl"),
        roster: dir.join("roster.csv"),
        follows: dir.join("follows.csv"),
        truth: dir.join("truth.json"),
    };
    let mut out = BufWriter::new(File::create(&files.tweets).map_err(io_err(&files.tweets))?);
    let (follows, roster, truth) = generate_with(spec, |t| {
        serde_json::to_writer(&mut out, &t)?;
        out.write_all(b"\n")
    })?;
    out.flush().map_err(io_err(&files.tweets))?;

    let roster_file = File::create(&files.roster).map_err(io_err(&files.roster))?;
    roster.write_csv(roster_file).map_err(|e| SynthError::Io {
        path: files.roster.display().to_string(),
        source: io::Error::other(e.to_string()),
    })?;

    let mut f = BufWriter::new(File::create(&files.follows).map_err(io_err(&files.follows))?);
    let write_follows = |f: &mut BufWriter<File>| -> io::Result<()> {
        writeln!(f, "user_id,candidate_id")?;
        for (u, c) in &follows {
            writeln!(f, "{u},{c}")?;
        }
        f.flush()
    };
    write_follows(&mut f).map_err(io_err(&files.follows))?;

    let truth_json = serde_json::to_string_pretty(&truth).expect("ground truth serializes");
    fs::write(&files.truth, truth_json + "\n").map_err(io_err(&files.truth))?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        let mut spec = SynthSpec::two_party(4, 50, 10, 3);
        spec.hashtags_per_topic = 6;
        spec
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.tweets, b.tweets);
        assert_eq!(a.follows, b.follows);
        let mut other = small();
        other.seed = 4;
        assert_ne!(generate(&other).unwrap().tweets, a.tweets);
    }

    #[test]
    fn tweets_are_ordered_and_in_range() {
        let spec = small();
        let corpus = generate(&spec).unwrap();
        assert!(corpus.tweets.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        let first = spec.start.and_hms_opt(3, 0, 0).unwrap().and_utc().timestamp();
        let last = first + i64::from(spec.days) * 86_400;
        assert!(corpus.tweets.iter().all(|t| t.timestamp >= first && t.timestamp < last));
        assert!(corpus.tweets.iter().any(|t| t.hashtags.is_empty()));
    }

    #[test]
    fn tags_follow_party_preferences() {
        let corpus = generate(&small()).unwrap();
        for t in corpus.tweets.iter().filter(|t| !t.hashtags.is_empty()) {
            let party = corpus.truth.affiliations[&t.user_id].clone().unwrap();
            let topic = corpus.truth.planted[t.hashtags[0].trim_start_matches('#')];
            // disjoint halves: A owns topics 0-1, B owns 2-3
            assert_eq!(party == "A", topic < 2, "{t:?}");
        }
    }

    #[test]
    fn candidate_retweets_match_truth() {
        let corpus = generate(&small()).unwrap();
        for t in &corpus.tweets {
            if let Some(c) = t.retweeted_user_id.as_deref().filter(|c| c.starts_with("cand_")) {
                let party = corpus.truth.affiliations[&t.user_id].clone().unwrap();
                assert_eq!(corpus.roster.party_of_candidate(c), corpus.roster.find(&party));
            }
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = small();
        s.hashtags_per_topic = 0;
        assert!(matches!(s.validate(), Err(SynthError::Config(_))));
        let mut s = small();
        s.parties[0].preferences[0] += 0.1;
        assert!(s.validate().is_err());
        let mut s = small();
        s.events.push(SynthEvent {
            date: s.start + Duration::days(100),
            party: "A".into(),
            topic: 0,
            intensity: 5.0,
        });
        assert!(s.validate().is_err());
        let mut s = small();
        s.realignments.push(SynthRealignment {
            date: s.start,
            party: "A".into(),
            toward_party: Some("B".into()),
            preferences: Some(vec![0.25; 4]),
        });
        assert!(s.validate().is_err());
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = small();
        let text = toml::to_string(&spec).unwrap();
        let back: SynthSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}
