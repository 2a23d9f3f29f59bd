//! Plot-ready exports: topic usage per party, similarity series and
//! coreness tables, as canonical CSV or small deterministic SVG charts.
//!
//! CSV output uses a header row, ISO dates, '.' as decimal separator and a
//! trailing newline. Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affiliation::{AffiliationResult, PartyId, PartyRoster};
use crate::dynamics::{daily_counts, DailyCounts};
use crate::ingest::{CaptureConfig, InternTable, TweetRecord};
use crate::similarity::{SeriesKind, SimilaritySeries};
use crate::topics::{CorenessMap, TopicPartition};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown topic {0}")]
    UnknownTopic(usize),
    #[error("nothing to render: {0}")]
    Empty(&'static str),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsageMode {
    Daily,
    Rolling,
    Cumulative,
}

impl UsageMode {
    pub fn label(self) -> &'static str {
        match self {
            UsageMode::Daily => "daily",
            UsageMode::Rolling => "rolling",
            UsageMode::Cumulative => "cumulative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicUsageSeries {
    pub topic: usize,
    pub party: PartyId,
    pub dates: Vec<NaiveDate>,
    pub daily: Vec<u64>,
    /// Trailing mean over the last `window` days; the first days average
    /// over the days available.
    pub rolling: Vec<f64>,
    pub cumulative: Vec<u64>,
}

impl TopicUsageSeries {
    pub fn values(&self, mode: UsageMode) -> Vec<f64> {
        match mode {
            UsageMode::Daily => self.daily.iter().map(|&c| c as f64).collect(),
            UsageMode::Rolling => self.rolling.clone(),
            UsageMode::Cumulative => self.cumulative.iter().map(|&c| c as f64).collect(),
        }
    }
}

/// Trailing mean over `window` days; day `t` divides by `min(window, t+1)`.
pub fn rolling_mean(daily: &[u64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut sum = 0u64;
    daily
        .iter()
        .enumerate()
        .map(|(t, &c)| {
            sum += c;
            if t >= window {
                sum -= daily[t - window];
            }
            sum as f64 / (t + 1).min(window) as f64
        })
        .collect()
}

pub fn cumulative(daily: &[u64]) -> Vec<u64> {
    daily
        .iter()
        .scan(0u64, |acc, &c| {
            *acc += c;
            Some(*acc)
        })
        .collect()
}

/// Usage of one topic by each party's supporters, from precomputed daily
/// counts.
pub fn topic_usage_from_daily(
    daily: &DailyCounts,
    affiliations: &AffiliationResult,
    config: &CaptureConfig,
    topic: usize,
) -> Result<Vec<TopicUsageSeries>, ReportError> {
    if topic >= daily.n_topics {
        return Err(ReportError::UnknownTopic(topic));
    }
    let n_parties = affiliations.n_parties();
    let n_days = daily.days.len();
    let mut counts = vec![vec![0u64; n_days]; n_parties];
    for (day, entries) in daily.days.iter().enumerate() {
        for &(user, t, c) in entries {
            if t as usize != topic {
                continue;
            }
            if let Some(p) = affiliations.party_of(user) {
                counts[p.index()][day] += u64::from(c);
            }
        }
    }
    let dates: Vec<NaiveDate> = (0..n_days).map(|d| config.date_of_day(d)).collect();
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(p, daily)| TopicUsageSeries {
            topic,
            party: PartyId(p as u16),
            dates: dates.clone(),
            rolling: rolling_mean(&daily, config.window_days as usize),
            cumulative: cumulative(&daily),
            daily,
        })
        .collect())
}

/// Usage of one topic by each party's supporters: every occurrence of a
/// topic hashtag in a supporter's tweet counts once.
pub fn topic_usage(
    records: &[TweetRecord],
    partition: &TopicPartition,
    affiliations: &AffiliationResult,
    config: &CaptureConfig,
    topic: usize,
) -> Result<Vec<TopicUsageSeries>, ReportError> {
    if topic >= partition.n_topics() {
        return Err(ReportError::UnknownTopic(topic));
    }
    let daily = daily_counts(records, partition, affiliations, config);
    topic_usage_from_daily(&daily, affiliations, config, topic)
}

fn acronym(roster: &PartyRoster, party: PartyId) -> &str {
    &roster.party(party).acronym
}

pub fn usage_csv(series: &[TopicUsageSeries], roster: &PartyRoster) -> Result<String, ReportError> {
    if series.is_empty() {
        return Err(ReportError::Empty("topic usage"));
    }
    let mut out = String::from("date,topic,party,daily,rolling,cumulative\n");
    for s in series {
        for (i, date) in s.dates.iter().enumerate() {
            writeln!(
                out,
                "{date},{},{},{},{},{}",
                s.topic,
                acronym(roster, s.party),
                s.daily[i],
                s.rolling[i],
                s.cumulative[i]
            )
            .expect("write to string");
        }
    }
    Ok(out)
}

fn series_name(kind: &SeriesKind, roster: &PartyRoster) -> String {
    match *kind {
        SeriesKind::SelfSimilarity { party } => format!("self_{}", acronym(roster, party)),
        SeriesKind::Cross { first, second } => {
            format!("cross_{}_{}", acronym(roster, first), acronym(roster, second))
        }
    }
}

/// One row per defined point: `date,kind,group_a,group_b,value,n_a,n_b`.
pub fn similarity_long_csv(series: &[SimilaritySeries], roster: &PartyRoster) -> Result<String, ReportError> {
    if series.is_empty() {
        return Err(ReportError::Empty("similarity series"));
    }
    let mut out = String::from("date,kind,group_a,group_b,value,n_a,n_b\n");
    for s in series {
        let (a, b) = s.kind.parties();
        for p in &s.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.date,
                s.kind.label(),
                acronym(roster, a),
                acronym(roster, b),
                p.value,
                p.n_first,
                p.n_second
            )
            .expect("write to string");
        }
    }
    Ok(out)
}

/// One column per series, one row per date where any series is defined;
/// gaps are empty cells.
pub fn similarity_wide_csv(series: &[SimilaritySeries], roster: &PartyRoster) -> Result<String, ReportError> {
    if series.is_empty() {
        return Err(ReportError::Empty("similarity series"));
    }
    let mut out = String::from("date");
    for s in series {
        out.push(',');
        out.push_str(&series_name(&s.kind, roster));
    }
    out.push('\n');
    let mut days: Vec<(usize, NaiveDate)> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| (p.day, p.date)))
        .collect();
    days.sort_unstable();
    days.dedup();
    for (day, date) in days {
        out.push_str(&date.to_string());
        for s in series {
            out.push(',');
            if let Some(v) = s.value_on(day) {
                out.push_str(&v.to_string());
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// `tag,topic,coreness,degree`, topics in the given order, tags by id.
pub fn coreness_csv(maps: &[CorenessMap], interner: &InternTable) -> Result<String, ReportError> {
    if maps.iter().all(|m| m.entries.is_empty()) {
        return Err(ReportError::Empty("coreness map"));
    }
    let mut out = String::from("tag,topic,coreness,degree\n");
    for map in maps {
        for e in &map.entries {
            writeln!(out, "{},{},{},{}", interner.tag_name(e.tag), map.topic, e.coreness, e.degree)
                .expect("write to string");
        }
    }
    Ok(out)
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn svg_open(out: &mut String, title: &str) {
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    )
    .expect("write to string");
    writeln!(out, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>").expect("write to string");
    writeln!(
        out,
        "<text x=\"{MARGIN}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{}</text>",
        escape(title)
    )
    .expect("write to string");
}

fn axes(out: &mut String, (x0, x1): (String, String), (y0, y1): (f64, f64)) {
    let bottom = HEIGHT - MARGIN;
    let right = WIDTH - MARGIN;
    writeln!(
        out,
        "<path d=\"M{MARGIN} {MARGIN} V{bottom} H{right}\" fill=\"none\" stroke=\"black\"/>"
    )
    .expect("write to string");
    for (x, y, anchor, label) in [
        (MARGIN, bottom + 16.0, "start", x0),
        (right, bottom + 16.0, "end", x1),
        (MARGIN - 4.0, bottom, "end", format!("{y0:.3}")),
        (MARGIN - 4.0, MARGIN + 4.0, "end", format!("{y1:.3}")),
    ] {
        writeln!(
            out,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>",
            escape(&label)
        )
        .expect("write to string");
    }
}

fn value_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

/// Line chart over `n` equally spaced x positions. Each line is a list of
/// optional y values; gaps split the line.
pub fn line_chart_svg(
    title: &str,
    x_labels: (String, String),
    n: usize,
    lines: &[(String, Vec<Option<f64>>)],
) -> Result<String, ReportError> {
    if n == 0 || lines.iter().all(|(_, ys)| ys.iter().all(Option::is_none)) {
        return Err(ReportError::Empty("chart"));
    }
    let (lo, hi) = value_range(lines.iter().flat_map(|(_, ys)| ys.iter().flatten().copied()));
    let sx = (WIDTH - 2.0 * MARGIN) / (n.max(2) - 1) as f64;
    let sy = (HEIGHT - 2.0 * MARGIN) / (hi - lo);
    let mut out = String::new();
    svg_open(&mut out, title);
    axes(&mut out, x_labels, (lo, hi));
    for (k, (name, ys)) in lines.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut path = String::new();
        let mut pen_down = false;
        for (i, y) in ys.iter().enumerate() {
            match y {
                Some(y) => {
                    let px = MARGIN + i as f64 * sx;
                    let py = HEIGHT - MARGIN - (y - lo) * sy;
                    write!(path, "{}{px:.2} {py:.2} ", if pen_down { "L" } else { "M" }).expect("write to string");
                    pen_down = true;
                }
                None => pen_down = false,
            }
        }
        writeln!(
            out,
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            path.trim_end()
        )
        .expect("write to string");
        writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"{color}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            WIDTH - MARGIN + 4.0,
            MARGIN + 14.0 * k as f64,
            escape(name)
        )
        .expect("write to string");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn usage_svg(series: &[TopicUsageSeries], roster: &PartyRoster, mode: UsageMode) -> Result<String, ReportError> {
    let first = series.first().ok_or(ReportError::Empty("topic usage"))?;
    let (Some(start), Some(end)) = (first.dates.first(), first.dates.last()) else {
        return Err(ReportError::Empty("topic usage"));
    };
    let lines: Vec<(String, Vec<Option<f64>>)> = series
        .iter()
        .map(|s| (acronym(roster, s.party).to_owned(), s.values(mode).into_iter().map(Some).collect()))
        .collect();
    line_chart_svg(
        &format!("topic {} usage ({})", first.topic, mode.label()),
        (start.to_string(), end.to_string()),
        first.dates.len(),
        &lines,
    )
}

pub fn similarity_svg(series: &[SimilaritySeries], roster: &PartyRoster) -> Result<String, ReportError> {
    let mut days: Vec<(usize, NaiveDate)> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| (p.day, p.date)))
        .collect();
    days.sort_unstable();
    days.dedup();
    let (Some(&(first_day, start)), Some(&(last_day, end))) = (days.first(), days.last()) else {
        return Err(ReportError::Empty("similarity series"));
    };
    let n = last_day - first_day + 1;
    let lines: Vec<(String, Vec<Option<f64>>)> = series
        .iter()
        .map(|s| {
            let mut ys = vec![None; n];
            for p in &s.points {
                ys[p.day - first_day] = Some(p.value);
            }
            (series_name(&s.kind, roster), ys)
        })
        .collect();
    line_chart_svg("similarity", (start.to_string(), end.to_string()), n, &lines)
}

/// Scatter of coreness against degree, one dot per hashtag.
pub fn coreness_svg(map: &CorenessMap) -> Result<String, ReportError> {
    if map.entries.is_empty() {
        return Err(ReportError::Empty("coreness map"));
    }
    let max_degree = map.entries.iter().map(|e| e.degree).max().unwrap_or(0).max(1) as f64;
    let max_core = map.entries.iter().map(|e| e.coreness).max().unwrap_or(0).max(1) as f64;
    let mut out = String::new();
    svg_open(&mut out, &format!("topic {} coreness vs degree", map.topic));
    axes(&mut out, ("0".into(), format!("{max_degree}")), (0.0, max_core));
    let sx = (WIDTH - 2.0 * MARGIN) / max_degree;
    let sy = (HEIGHT - 2.0 * MARGIN) / max_core;
    for e in &map.entries {
        writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>",
            MARGIN + f64::from(e.degree) * sx,
            HEIGHT - MARGIN - f64::from(e.coreness) * sy,
            PALETTE[0]
        )
        .expect("write to string");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn write_output(path: &Path, contents: &str) -> Result<(), ReportError> {
    let io_err = |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    fs::write(path, contents).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affiliation::Party;
    use crate::similarity::SeriesPoint;
    use proptest::prelude::*;

    fn roster(n: usize) -> PartyRoster {
        PartyRoster::new(
            (0..n)
                .map(|i| Party {
                    id: format!("p{i}"),
                    acronym: ["A", "B", "C", "D"][i].into(),
                    name: String::new(),
                    candidates: vec![format!("cand{i}")],
                })
                .collect(),
        )
        .unwrap()
    }

    fn date(day: usize) -> NaiveDate {
        NaiveDate::from_ymd_opt(2019, 1, 1).unwrap() + chrono::Duration::days(day as i64)
    }

    fn series(kind: SeriesKind, points: &[(usize, f64)]) -> SimilaritySeries {
        SimilaritySeries {
            kind,
            points: points
                .iter()
                .map(|&(day, value)| SeriesPoint {
                    day,
                    date: date(day),
                    value,
                    n_first: 3,
                    n_second: 4,
                })
                .collect(),
        }
    }

    #[test]
    fn constant_series_rolls_to_constant() {
        assert!(rolling_mean(&[7; 20], 7).iter().all(|&x| x == 7.0));
    }

    #[test]
    fn single_usage_is_a_unit_step() {
        let mut daily = vec![0; 10];
        daily[4] = 1;
        assert_eq!(cumulative(&daily), vec![0, 0, 0, 0, 1, 1, 1, 1, 1, 1]);
        let r = rolling_mean(&daily, 7);
        assert_eq!(r[3], 0.0);
        assert!((r[4] - 0.2).abs() < 1e-15);
        assert!((r[10 - 1] - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn gap_dates_are_omitted() {
        let r = roster(2);
        let s = vec![series(SeriesKind::SelfSimilarity { party: PartyId(0) }, &[(0, 0.5), (2, 0.25)])];
        let csv = similarity_long_csv(&s, &r).unwrap();
        assert_eq!(
            csv,
            "date,kind,group_a,group_b,value,n_a,n_b\n2019-01-01,self,A,A,0.5,3,4\n2019-01-03,self,A,A,0.25,3,4\n"
        );
        let wide = similarity_wide_csv(&s, &r).unwrap();
        assert_eq!(wide, "date,self_A\n2019-01-01,0.5\n2019-01-03,0.25\n");
    }

    #[test]
    fn three_parties_give_six_wide_columns() {
        let r = roster(3);
        let mut s = Vec::new();
        for p in 0..3 {
            s.push(series(SeriesKind::SelfSimilarity { party: PartyId(p) }, &[(0, 0.5), (1, 0.4)]));
        }
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            s.push(series(
                SeriesKind::Cross {
                    first: PartyId(a),
                    second: PartyId(b),
                },
                &[(1, -0.125)],
            ));
        }
        let wide = similarity_wide_csv(&s, &r).unwrap();
        assert_eq!(
            wide,
            "date,self_A,self_B,self_C,cross_A_B,cross_A_C,cross_B_C\n\
             2019-01-01,0.5,0.5,0.5,,,\n\
             2019-01-02,0.4,0.4,0.4,-0.125,-0.125,-0.125\n"
        );
    }

    #[test]
    fn svg_is_deterministic() {
        let r = roster(2);
        let s = vec![
            series(SeriesKind::SelfSimilarity { party: PartyId(0) }, &[(0, 0.5), (1, 0.6), (3, 0.2)]),
            series(
                SeriesKind::Cross {
                    first: PartyId(0),
                    second: PartyId(1),
                },
                &[(0, -0.1), (1, -0.2)],
            ),
        ];
        let a = similarity_svg(&s, &r).unwrap();
        assert_eq!(a, similarity_svg(&s, &r).unwrap());
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        // the gap on day 2 splits the self line into two subpaths
        let moves: usize = a
            .lines()
            .filter(|l| l.contains("stroke-width"))
            .map(|l| l.matches('M').count())
            .sum();
        assert_eq!(moves, 3);
        let map = CorenessMap {
            topic: 0,
            entries: vec![crate::topics::CorenessEntry {
                tag: crate::ingest::TagId(0),
                degree: 2,
                coreness: 2,
            }],
        };
        assert_eq!(coreness_svg(&map).unwrap(), coreness_svg(&map).unwrap());
    }

    #[test]
    fn empty_input_is_rejected() {
        let r = roster(2);
        assert!(matches!(similarity_long_csv(&[], &r), Err(ReportError::Empty(_))));
        let empty = vec![series(SeriesKind::SelfSimilarity { party: PartyId(0) }, &[])];
        assert!(matches!(similarity_svg(&empty, &r), Err(ReportError::Empty(_))));
        assert!(matches!(
            coreness_svg(&CorenessMap { topic: 0, entries: vec![] }),
            Err(ReportError::Empty(_))
        ));
    }

    proptest! {
        #[test]
        fn rolling_and_cumulative_share_a_base(daily in prop::collection::vec(0u64..50, 1..60), w in 1usize..10) {
            let cum = cumulative(&daily);
            prop_assert!(cum.windows(2).all(|p| p[0] <= p[1]));
            let roll = rolling_mean(&daily, w);
            for t in 0..daily.len() {
                let lo = t.saturating_sub(w - 1);
                let window_sum = cum[t] - if lo == 0 { 0 } else { cum[lo - 1] };
                let expected = window_sum as f64 / (t - lo + 1) as f64;
                prop_assert!((roll[t] - expected).abs() <= 1e-9 * expected.max(1.0));
            }
        }
    }
}
