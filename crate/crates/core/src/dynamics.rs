//! Sliding-window user-topic matrices and windowed description vectors.
//!
//! For each calendar day `t` the window covers days `[t - w + 1, t]`. The
//! matrix counts, per affiliated user and topic, every hashtag occurrence
//! of that topic in the window. A user's description vector is the
//! direction of their topic-frequency deviation from the reference
//! frequency, normally the column sums of the same window.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::affiliation::AffiliationResult;
use crate::ingest::{CaptureConfig, TweetRecord, UserId};
use crate::topics::TopicPartition;

/// Per-day `(user, topic, count)` triplets, sorted, for affiliated users.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DailyCounts {
    pub n_topics: usize,
    pub days: Vec<Vec<(UserId, u32, u32)>>,
}

pub fn daily_counts(
    records: &[TweetRecord],
    partition: &TopicPartition,
    affiliations: &AffiliationResult,
    config: &CaptureConfig,
) -> DailyCounts {
    let n_days = config.n_days();
    let mut days: Vec<BTreeMap<(UserId, u32), u32>> = vec![BTreeMap::new(); n_days];
    for r in records {
        if affiliations.party_of(r.user).is_none() {
            continue;
        }
        let day = config.day_index(r.timestamp);
        if day < 0 || day as usize >= n_days {
            continue;
        }
        for tag in &r.hashtags {
            if let Some(topic) = partition.topic_of(*tag) {
                *days[day as usize].entry((r.user, topic as u32)).or_insert(0) += 1;
            }
        }
    }
    DailyCounts {
        n_topics: partition.n_topics(),
        days: days
            .into_iter()
            .map(|d| d.into_iter().map(|((u, t), c)| (u, t, c)).collect())
            .collect(),
    }
}

impl DailyCounts {
    /// Column sums over the whole capture, for the capture-wide reference.
    pub fn capture_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.n_topics];
        for &(_, t, c) in self.days.iter().flatten() {
            totals[t as usize] += u64::from(c);
        }
        totals
    }
}

/// Sparse window matrix in compressed row form; rows sorted by user and
/// only users with a positive count are present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserTopicMatrix {
    pub day: usize,
    pub date: NaiveDate,
    pub n_topics: usize,
    users: Vec<UserId>,
    offsets: Vec<usize>,
    entries: Vec<(u32, u32)>,
}

impl UserTopicMatrix {
    pub fn from_triplets(day: usize, date: NaiveDate, n_topics: usize, triplets: impl IntoIterator<Item = (UserId, u32, u32)>) -> Self {
        let mut sorted: Vec<(UserId, u32, u32)> = triplets.into_iter().filter(|t| t.2 > 0).collect();
        sorted.sort_unstable();
        let mut users = Vec::new();
        let mut offsets = vec![0];
        let mut entries: Vec<(u32, u32)> = Vec::with_capacity(sorted.len());
        let mut last: Option<(UserId, u32)> = None;
        for (u, t, c) in sorted {
            if last == Some((u, t)) {
                entries.last_mut().expect("entry for last key").1 += c;
                continue;
            }
            if last.map(|l| l.0) != Some(u) {
                if !users.is_empty() {
                    offsets.push(entries.len());
                }
                users.push(u);
            }
            entries.push((t, c));
            last = Some((u, t));
        }
        if !users.is_empty() {
            offsets.push(entries.len());
        }
        Self {
            day,
            date,
            n_topics,
            users,
            offsets,
            entries,
        }
    }

    /// No tagged usage at all in the window.
    pub fn is_degenerate(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_rows(&self) -> usize {
        self.users.len()
    }

    pub fn rows(&self) -> impl Iterator<Item = (UserId, &[(u32, u32)])> {
        self.users
            .iter()
            .enumerate()
            .map(|(i, u)| (*u, &self.entries[self.offsets[i]..self.offsets[i + 1]]))
    }

    pub fn triplets(&self) -> impl Iterator<Item = (UserId, u32, u32)> + '_ {
        self.rows().flat_map(|(u, row)| row.iter().map(move |&(t, c)| (u, t, c)))
    }

    pub fn column_sums(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.n_topics];
        for &(t, c) in &self.entries {
            totals[t as usize] += u64::from(c);
        }
        totals
    }
}

/// Matrix for the window ending on `end_day`, summed day by day.
pub fn window_matrix_from_scratch(daily: &DailyCounts, config: &CaptureConfig, end_day: usize) -> UserTopicMatrix {
    let w = config.window_days as usize;
    let first = (end_day + 1).saturating_sub(w);
    let mut acc: BTreeMap<(UserId, u32), u32> = BTreeMap::new();
    for day in &daily.days[first..=end_day] {
        for &(u, t, c) in day {
            *acc.entry((u, t)).or_insert(0) += c;
        }
    }
    UserTopicMatrix::from_triplets(
        end_day,
        config.date_of_day(end_day),
        daily.n_topics,
        acc.into_iter().map(|((u, t), c)| (u, t, c)),
    )
}

/// One matrix per capture day, built incrementally: each step adds the new
/// day and subtracts the day leaving the window. Early windows are
/// truncated at the capture start.
pub fn sliding_matrices(daily: &DailyCounts, config: &CaptureConfig) -> Vec<UserTopicMatrix> {
    let w = config.window_days as usize;
    let mut acc: BTreeMap<(UserId, u32), u32> = BTreeMap::new();
    let mut out = Vec::with_capacity(daily.days.len());
    for (t, day) in daily.days.iter().enumerate() {
        for &(u, topic, c) in day {
            *acc.entry((u, topic)).or_insert(0) += c;
        }
        if t >= w {
            for &(u, topic, c) in &daily.days[t - w] {
                let slot = acc.get_mut(&(u, topic)).expect("count entered the window earlier");
                *slot -= c;
                if *slot == 0 {
                    acc.remove(&(u, topic));
                }
            }
        }
        out.push(UserTopicMatrix::from_triplets(
            t,
            config.date_of_day(t),
            daily.n_topics,
            acc.iter().map(|(&(u, topic), &c)| (u, topic, c)),
        ));
    }
    out
}

pub fn window_matrices(
    records: &[TweetRecord],
    partition: &TopicPartition,
    affiliations: &AffiliationResult,
    config: &CaptureConfig,
) -> Vec<UserTopicMatrix> {
    sliding_matrices(&daily_counts(records, partition, affiliations, config), config)
}

/// Reference topic usage that user frequencies are compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Column sums of the window's own matrix.
    Window,
    /// Fixed totals, e.g. column sums over the whole capture.
    Global(Vec<u64>),
    /// Mean of the window's row frequencies, so every user weighs the same
    /// regardless of activity.
    UserWeighted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalTopicVector {
    pub day: usize,
    pub date: NaiveDate,
    pub totals: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptionVector {
    pub user: UserId,
    pub day: usize,
    /// Unit vector when valid, zeros otherwise.
    pub components: Vec<f64>,
    pub valid: bool,
}

impl DescriptionVector {
    pub fn dim(&self) -> usize {
        self.components.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptionSet {
    pub day: usize,
    pub date: NaiveDate,
    pub global: GlobalTopicVector,
    /// One entry per matrix row, in row order.
    pub vectors: Vec<DescriptionVector>,
}

impl DescriptionSet {
    pub fn valid(&self) -> impl Iterator<Item = &DescriptionVector> {
        self.vectors.iter().filter(|d| d.valid)
    }
}

/// True when `row` is proportional to `reference`, decided on integers.
fn proportional(row: &[(u32, u32)], row_total: u64, reference: &[u64], reference_total: u64) -> bool {
    let mut k = 0;
    for (j, &r) in reference.iter().enumerate() {
        let u = match row.get(k) {
            Some(&(t, c)) if t as usize == j => {
                k += 1;
                u64::from(c)
            }
            _ => 0,
        };
        if u128::from(u) * u128::from(reference_total) != u128::from(r) * u128::from(row_total) {
            return false;
        }
    }
    true
}

/// Frequency deviation of one row from the reference frequency, and its
/// normalized direction. Returns `None` when the deviation is zero.
pub fn deviation(row: &[(u32, u32)], reference: &[u64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let row_total: u64 = row.iter().map(|&(_, c)| u64::from(c)).sum();
    let reference_total: u64 = reference.iter().sum();
    if row_total == 0 || reference_total == 0 || proportional(row, row_total, reference, reference_total) {
        return None;
    }
    let mut v: Vec<f64> = reference.iter().map(|&r| -(r as f64 / reference_total as f64)).collect();
    for &(t, c) in row {
        v[t as usize] += f64::from(c) / row_total as f64;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let d = v.iter().map(|x| x / norm).collect();
    Some((v, d))
}

/// Below this sup-norm a deviation from a float reference counts as zero.
pub const FREQUENCY_TOLERANCE: f64 = 1e-12;

/// Mean over rows of each row's topic frequencies.
pub fn user_weighted_frequency(matrix: &UserTopicMatrix) -> Vec<f64> {
    let mut freq = vec![0.0; matrix.n_topics];
    let mut rows = 0usize;
    for (_, row) in matrix.rows() {
        let total: u64 = row.iter().map(|&(_, c)| u64::from(c)).sum();
        if total == 0 {
            continue;
        }
        rows += 1;
        for &(t, c) in row {
            freq[t as usize] += f64::from(c) / total as f64;
        }
    }
    if rows > 0 {
        freq.iter_mut().for_each(|f| *f /= rows as f64);
    }
    freq
}

/// Like [`deviation`], against a reference already given as frequencies.
/// Deviations with every component within [`FREQUENCY_TOLERANCE`] of zero
/// are treated as zero.
pub fn deviation_from_frequency(row: &[(u32, u32)], frequency: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let row_total: u64 = row.iter().map(|&(_, c)| u64::from(c)).sum();
    if row_total == 0 {
        return None;
    }
    let mut v: Vec<f64> = frequency.iter().map(|f| -f).collect();
    for &(t, c) in row {
        v[t as usize] += f64::from(c) / row_total as f64;
    }
    if v.iter().all(|x| x.abs() <= FREQUENCY_TOLERANCE) {
        return None;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let d = v.iter().map(|x| x / norm).collect();
    Some((v, d))
}

/// Description vectors of every row of a window matrix.
pub fn description_vectors(matrix: &UserTopicMatrix, reference: &Reference) -> DescriptionSet {
    let totals = matrix.column_sums();
    let global = GlobalTopicVector {
        day: matrix.day,
        date: matrix.date,
        totals,
    };
    let frequency = match reference {
        Reference::UserWeighted => Some(user_weighted_frequency(matrix)),
        _ => None,
    };
    let deviate = |row: &[(u32, u32)]| match (reference, &frequency) {
        (_, Some(f)) => deviation_from_frequency(row, f),
        (Reference::Global(t), None) => deviation(row, t),
        _ => deviation(row, &global.totals),
    };
    let vectors = if matrix.is_degenerate() {
        Vec::new()
    } else {
        matrix
            .rows()
            .map(|(user, row)| match deviate(row) {
                Some((_, d)) => DescriptionVector {
                    user,
                    day: matrix.day,
                    components: d,
                    valid: true,
                },
                None => DescriptionVector {
                    user,
                    day: matrix.day,
                    components: vec![0.0; matrix.n_topics],
                    valid: false,
                },
            })
            .collect()
    };
    DescriptionSet {
        day: matrix.day,
        date: matrix.date,
        global,
        vectors,
    }
}
