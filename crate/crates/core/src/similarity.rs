//! Pairwise, intra-group and cross-group similarity of description vectors.
//!
//! Group similarities are computed from group mean vectors: the average of
//! all ordered pairwise inner products (including each member with itself)
//! equals the inner product of the two mean vectors.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affiliation::{AffiliationResult, PartyId, PartyRoster};
use crate::dynamics::{DescriptionSet, DescriptionVector};

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("description vectors come from different windows ({0} vs {1})")]
    WindowMismatch(usize, usize),
    #[error("description vectors have different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("description vector of user {0} is not valid")]
    Invalid(u32),
    #[error("unknown party {0}")]
    UnknownParty(String),
    #[error("malformed series request {0:?}")]
    Request(String),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity of two valid description vectors of the same window.
pub fn pair_similarity(a: &DescriptionVector, b: &DescriptionVector) -> Result<f64, SimilarityError> {
    if a.day != b.day {
        return Err(SimilarityError::WindowMismatch(a.day, b.day));
    }
    if a.dim() != b.dim() {
        return Err(SimilarityError::DimensionMismatch(a.dim(), b.dim()));
    }
    for d in [a, b] {
        if !d.valid {
            return Err(SimilarityError::Invalid(d.user.0));
        }
    }
    Ok(dot(&a.components, &b.components).clamp(-1.0, 1.0))
}

/// Mean description vector of one group in one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupVector {
    pub party: PartyId,
    pub day: usize,
    pub mean: Vec<f64>,
    pub members: usize,
}

/// Mean of the valid vectors among `members`; `None` for an empty group.
///
/// Members are summed in user order so the result does not depend on the
/// order they are passed in.
pub fn group_vector<'a>(
    party: PartyId,
    members: impl IntoIterator<Item = &'a DescriptionVector>,
) -> Option<GroupVector> {
    let mut valid: Vec<&DescriptionVector> = members.into_iter().filter(|d| d.valid).collect();
    let first = valid.first()?;
    let (day, dim) = (first.day, first.dim());
    valid.sort_by_key(|d| d.user);
    let mut mean = vec![0.0; dim];
    for d in &valid {
        for (m, x) in mean.iter_mut().zip(&d.components) {
            *m += x;
        }
    }
    let n = valid.len();
    for m in &mut mean {
        *m /= n as f64;
    }
    Some(GroupVector {
        party,
        day,
        mean,
        members: n,
    })
}

/// s(G,G) = ||D_G||^2.
pub fn self_from_group(g: &GroupVector) -> f64 {
    dot(&g.mean, &g.mean).clamp(0.0, 1.0)
}

/// s(G1,G2) = <D_G1, D_G2>.
pub fn cross_from_groups(a: &GroupVector, b: &GroupVector) -> f64 {
    dot(&a.mean, &b.mean).clamp(-1.0, 1.0)
}

/// Self-similarity and valid member count; `None` for an empty group.
pub fn self_similarity<'a>(group: impl IntoIterator<Item = &'a DescriptionVector>) -> Option<(f64, usize)> {
    group_vector(PartyId(0), group).map(|g| (self_from_group(&g), g.members))
}

pub fn cross_similarity<'a>(
    first: impl IntoIterator<Item = &'a DescriptionVector>,
    second: impl IntoIterator<Item = &'a DescriptionVector>,
) -> Option<f64> {
    let a = group_vector(PartyId(0), first)?;
    let b = group_vector(PartyId(1), second)?;
    Some(cross_from_groups(&a, &b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeriesKind {
    SelfSimilarity { party: PartyId },
    Cross { first: PartyId, second: PartyId },
}

impl SeriesKind {
    pub fn label(&self) -> &'static str {
        match self {
            SeriesKind::SelfSimilarity { .. } => "self",
            SeriesKind::Cross { .. } => "cross",
        }
    }

    pub fn parties(&self) -> (PartyId, PartyId) {
        match *self {
            SeriesKind::SelfSimilarity { party } => (party, party),
            SeriesKind::Cross { first, second } => (first, second),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub day: usize,
    pub date: NaiveDate,
    pub value: f64,
    pub n_first: usize,
    pub n_second: usize,
}

/// Dated values for one request. Days where a group is empty are gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySeries {
    pub kind: SeriesKind,
    pub points: Vec<SeriesPoint>,
}

impl SimilaritySeries {
    pub fn value_on(&self, day: usize) -> Option<f64> {
        self.points
            .binary_search_by_key(&day, |p| p.day)
            .ok()
            .map(|i| self.points[i].value)
    }
}

/// Parse `--self` and `--cross` style requests: `all` or a comma-separated
/// list of parties, and `A:B,C:D` pairs (or `all` for every unordered pair).
pub fn parse_requests(
    self_spec: &str,
    cross_spec: &str,
    roster: &PartyRoster,
) -> Result<Vec<SeriesKind>, SimilarityError> {
    let resolve = |key: &str| {
        roster
            .find(key.trim())
            .ok_or_else(|| SimilarityError::UnknownParty(key.trim().to_owned()))
    };
    let mut requests = Vec::new();
    match self_spec.trim() {
        "" | "none" => {}
        "all" => requests.extend(roster.ids().map(|party| SeriesKind::SelfSimilarity { party })),
        list => {
            for key in list.split(',') {
                requests.push(SeriesKind::SelfSimilarity { party: resolve(key)? });
            }
        }
    }
    match cross_spec.trim() {
        "" | "none" => {}
        "all" => {
            let ids: Vec<PartyId> = roster.ids().collect();
            for (i, &first) in ids.iter().enumerate() {
                for &second in &ids[i + 1..] {
                    requests.push(SeriesKind::Cross { first, second });
                }
            }
        }
        list => {
            for pair in list.split(',') {
                let (a, b) = pair
                    .split_once(':')
                    .ok_or_else(|| SimilarityError::Request(pair.to_owned()))?;
                requests.push(SeriesKind::Cross {
                    first: resolve(a)?,
                    second: resolve(b)?,
                });
            }
        }
    }
    Ok(requests)
}

/// Accumulates series points window by window, so description sets can be
/// dropped once consumed.
#[derive(Debug, Clone)]
pub struct SimilarityTracker {
    n_parties: usize,
    series: Vec<SimilaritySeries>,
}

impl SimilarityTracker {
    pub fn new(requests: &[SeriesKind], n_parties: usize) -> Result<Self, SimilarityError> {
        for request in requests {
            let (a, b) = request.parties();
            for p in [a, b] {
                if p.index() >= n_parties {
                    return Err(SimilarityError::UnknownParty(format!("#{}", p.0)));
                }
            }
        }
        Ok(Self {
            n_parties,
            series: requests
                .iter()
                .map(|&kind| SimilaritySeries { kind, points: Vec::new() })
                .collect(),
        })
    }

    /// Group vectors of every party for one window.
    pub fn group_vectors(set: &DescriptionSet, affiliations: &AffiliationResult, n_parties: usize) -> Vec<Option<GroupVector>> {
        let mut buckets: Vec<Vec<&DescriptionVector>> = vec![Vec::new(); n_parties];
        for d in set.valid() {
            if let Some(p) = affiliations.party_of(d.user) {
                buckets[p.index()].push(d);
            }
        }
        buckets
            .into_iter()
            .enumerate()
            .map(|(i, members)| group_vector(PartyId(i as u16), members))
            .collect()
    }

    pub fn push(&mut self, set: &DescriptionSet, affiliations: &AffiliationResult) {
        let groups = Self::group_vectors(set, affiliations, self.n_parties);
        for series in &mut self.series {
            let (a, b) = series.kind.parties();
            let (Some(ga), Some(gb)) = (&groups[a.index()], &groups[b.index()]) else {
                continue;
            };
            let value = match series.kind {
                SeriesKind::SelfSimilarity { .. } => self_from_group(ga),
                SeriesKind::Cross { .. } => cross_from_groups(ga, gb),
            };
            series.points.push(SeriesPoint {
                day: set.day,
                date: set.date,
                value,
                n_first: ga.members,
                n_second: gb.members,
            });
        }
    }

    pub fn finish(self) -> Vec<SimilaritySeries> {
        self.series
    }
}

pub fn similarity_series(
    sets: &[DescriptionSet],
    affiliations: &AffiliationResult,
    requests: &[SeriesKind],
) -> Result<Vec<SimilaritySeries>, SimilarityError> {
    let mut tracker = SimilarityTracker::new(requests, affiliations.n_parties())?;
    for set in sets {
        tracker.push(set, affiliations);
    }
    Ok(tracker.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::UserId;

    fn vector(user: u32, components: &[f64]) -> DescriptionVector {
        DescriptionVector {
            user: UserId(user),
            day: 0,
            components: components.to_vec(),
            valid: true,
        }
    }

    #[test]
    fn pair_cases() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let a = vector(0, &[h, -h]);
        let b = vector(1, &[1.0, 0.0]);
        assert!((pair_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((pair_similarity(&a, &vector(2, &[-h, h])).unwrap() + 1.0).abs() < 1e-15);
        assert!((pair_similarity(&a, &b).unwrap() - h).abs() < 1e-15);
    }

    #[test]
    fn pair_usage_errors() {
        let a = vector(0, &[1.0, 0.0]);
        let mut later = vector(1, &[1.0, 0.0]);
        later.day = 3;
        assert_eq!(pair_similarity(&a, &later), Err(SimilarityError::WindowMismatch(0, 3)));
        assert_eq!(
            pair_similarity(&a, &vector(1, &[1.0, 0.0, 0.0])),
            Err(SimilarityError::DimensionMismatch(2, 3))
        );
        let mut invalid = vector(5, &[0.0, 0.0]);
        invalid.valid = false;
        assert_eq!(pair_similarity(&a, &invalid), Err(SimilarityError::Invalid(5)));
    }

    #[test]
    fn group_cases() {
        let same = [vector(0, &[0.6, 0.8]), vector(1, &[0.6, 0.8])];
        assert!((self_similarity(&same).unwrap().0 - 1.0).abs() < 1e-15);
        let orthogonal = [vector(0, &[1.0, 0.0]), vector(1, &[0.0, 1.0])];
        assert_eq!(self_similarity(&orthogonal), Some((0.5, 2)));
        assert_eq!(self_similarity(&[vector(3, &[0.0, -1.0])]).unwrap().0, 1.0);
        assert_eq!(self_similarity(&[]), None);
        assert_eq!(cross_similarity(&same, &[]), None);
        let opposed = [vector(4, &[-0.6, -0.8])];
        assert!((cross_similarity(&same, &opposed).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_members_are_ignored() {
        let mut invalid = vector(1, &[0.0, 0.0]);
        invalid.valid = false;
        let g = group_vector(PartyId(0), [&vector(0, &[1.0, 0.0]), &invalid]).unwrap();
        assert_eq!(g.members, 1);
    }

    #[test]
    fn request_parsing() {
        use crate::affiliation::Party;
        let party = |id: &str| Party {
            id: id.to_lowercase(),
            acronym: id.into(),
            name: id.into(),
            candidates: vec![format!("c{id}")],
        };
        let roster = PartyRoster::new(vec![party("JPC"), party("FDT"), party("FIT")]).unwrap();
        let r = parse_requests("all", "JPC:FDT,fit:JPC", &roster).unwrap();
        assert_eq!(r.len(), 5);
        assert_eq!(
            r[3],
            SeriesKind::Cross {
                first: PartyId(0),
                second: PartyId(1)
            }
        );
        assert_eq!(parse_requests("none", "all", &roster).unwrap().len(), 3);
        assert_eq!(
            parse_requests("XYZ", "", &roster),
            Err(SimilarityError::UnknownParty("XYZ".into()))
        );
        assert!(matches!(parse_requests("", "JPC-FDT", &roster), Err(SimilarityError::Request(_))));
        assert!(SimilarityTracker::new(&[SeriesKind::SelfSimilarity { party: PartyId(9) }], 3).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn unit_vectors(dim: usize) -> impl Strategy<Value = Vec<DescriptionVector>> {
            proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, dim), 1..25).prop_map(|rows| {
                rows.into_iter()
                    .enumerate()
                    .filter_map(|(i, mut v)| {
                        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                        if n < 1e-6 {
                            return None;
                        }
                        v.iter_mut().for_each(|x| *x /= n);
                        Some(vector(i as u32, &v))
                    })
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn bounds_and_symmetry(a in unit_vectors(4), b in unit_vectors(4)) {
                if let (Some((s, _)), Some(c)) = (self_similarity(&a), cross_similarity(&a, &b)) {
                    prop_assert!((0.0..=1.0).contains(&s));
                    prop_assert!((-1.0..=1.0).contains(&c));
                    prop_assert_eq!(c, cross_similarity(&b, &a).unwrap());
                    prop_assert!((cross_similarity(&a, &a).unwrap() - s).abs() < 1e-15);
                }
            }

            #[test]
            fn member_order_is_irrelevant(a in unit_vectors(5), seed in any::<u64>()) {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                let mut shuffled = a.clone();
                shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                prop_assert_eq!(self_similarity(&a), self_similarity(&shuffled));
            }
        }
    }
}
