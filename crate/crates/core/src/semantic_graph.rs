//! Hashtag co-occurrence network and the relative-entropy political
//! hashtag classifier.
//!
//! Edge weights count distinct users, never tweets: a user who posts the
//! same pair a hundred times contributes one unit of weight.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affiliation::AffiliationResult;
use crate::ingest::{TagId, TweetRecord};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("political scores need at least two parties with affiliated users, found {0}")]
    TooFewPopulatedParties(usize),
    #[error("kl threshold {0} must be non-negative")]
    Threshold(f64),
    #[error("edge {0}-{1} references a node missing from the node table")]
    DanglingEdge(u32, u32),
    #[error("self-loop on node {0}")]
    SelfLoop(u32),
}

/// Undirected weighted hashtag graph over a compact node index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceGraph {
    /// Ascending tag ids; position is the node index.
    nodes: Vec<TagId>,
    /// Distinct users of each node's hashtag over the whole stream.
    node_users: Vec<u32>,
    /// `(a, b, weight)` node indices with `a < b`, sorted.
    edges: Vec<(u32, u32, u32)>,
    offsets: Vec<usize>,
    adjacency: Vec<(u32, u32)>,
}

impl CooccurrenceGraph {
    /// Assemble from tag-level parts. Nodes without edges are dropped.
    pub fn from_parts(
        node_users: &[(TagId, u32)],
        edges: impl IntoIterator<Item = (TagId, TagId, u32)>,
    ) -> Result<Self, GraphError> {
        let mut tag_edges: Vec<(TagId, TagId, u32)> = Vec::new();
        for (a, b, w) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a.0));
            }
            if w == 0 {
                continue;
            }
            tag_edges.push(if a < b { (a, b, w) } else { (b, a, w) });
        }
        tag_edges.sort_unstable();
        tag_edges.dedup_by(|next, prev| {
            if next.0 == prev.0 && next.1 == prev.1 {
                prev.2 += next.2;
                true
            } else {
                false
            }
        });

        let mut nodes: Vec<TagId> = tag_edges.iter().flat_map(|e| [e.0, e.1]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let mut usage = node_users.to_vec();
        usage.sort_unstable();
        let mut node_usage = Vec::with_capacity(nodes.len());
        for tag in &nodes {
            match usage.binary_search_by_key(tag, |(t, _)| *t) {
                Ok(i) => node_usage.push(usage[i].1),
                Err(_) => {
                    let e = tag_edges.iter().find(|e| e.0 == *tag || e.1 == *tag).expect("node from edge");
                    return Err(GraphError::DanglingEdge(e.0 .0, e.1 .0));
                }
            }
        }
        let index = |t: TagId| nodes.binary_search(&t).expect("node listed") as u32;
        let edges: Vec<(u32, u32, u32)> = tag_edges.iter().map(|&(a, b, w)| (index(a), index(b), w)).collect();
        Ok(Self::assemble(nodes, node_usage, edges))
    }

    fn assemble(nodes: Vec<TagId>, node_users: Vec<u32>, edges: Vec<(u32, u32, u32)>) -> Self {
        let n = nodes.len();
        let mut degree = vec![0usize; n];
        for &(a, b, _) in &edges {
            degree[a as usize] += 1;
            degree[b as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut adjacency = vec![(0u32, 0u32); offsets[n]];
        for &(a, b, w) in &edges {
            adjacency[fill[a as usize]] = (b, w);
            fill[a as usize] += 1;
            adjacency[fill[b as usize]] = (a, w);
            fill[b as usize] += 1;
        }
        for v in 0..n {
            adjacency[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Self {
            nodes,
            node_users,
            edges,
            offsets,
            adjacency,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[TagId] {
        &self.nodes
    }

    pub fn tag(&self, node: usize) -> TagId {
        self.nodes[node]
    }

    pub fn node_index(&self, tag: TagId) -> Option<usize> {
        self.nodes.binary_search(&tag).ok()
    }

    pub fn node_users(&self, node: usize) -> u32 {
        self.node_users[node]
    }

    /// Sorted `(neighbor, weight)` pairs.
    pub fn neighbors(&self, node: usize) -> &[(u32, u32)] {
        &self.adjacency[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn strength(&self, node: usize) -> u64 {
        self.neighbors(node).iter().map(|&(_, w)| u64::from(w)).sum()
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(|e| u64::from(e.2)).sum()
    }

    /// Node-index edges `(a, b, weight)` with `a < b`.
    pub fn index_edges(&self) -> &[(u32, u32, u32)] {
        &self.edges
    }

    pub fn edges(&self) -> impl Iterator<Item = (TagId, TagId, u32)> + '_ {
        self.edges
            .iter()
            .map(|&(a, b, w)| (self.nodes[a as usize], self.nodes[b as usize], w))
    }

    pub fn weight(&self, a: TagId, b: TagId) -> u32 {
        let (Some(i), Some(j)) = (self.node_index(a), self.node_index(b)) else {
            return 0;
        };
        let row = self.neighbors(i);
        row.binary_search_by_key(&(j as u32), |&(n, _)| n)
            .map(|k| row[k].1)
            .unwrap_or(0)
    }

    /// Drop edges lighter than `min_weight`, then isolated nodes.
    pub fn prune(&self, min_weight: u32) -> Self {
        self.filter_edges(|_, _, w| w >= min_weight)
    }

    /// Induced subgraph on `keep`, isolated nodes removed.
    pub fn restrict(&self, keep: &HashSet<TagId>) -> Self {
        self.filter_edges(|a, b, _| keep.contains(&a) && keep.contains(&b))
    }

    fn filter_edges(&self, mut keep: impl FnMut(TagId, TagId, u32) -> bool) -> Self {
        let usage: Vec<(TagId, u32)> = self.nodes.iter().copied().zip(self.node_users.iter().copied()).collect();
        let edges: Vec<(TagId, TagId, u32)> = self.edges().filter(|&(a, b, w)| keep(a, b, w)).collect();
        Self::from_parts(&usage, edges).expect("subgraph of a valid graph")
    }
}

fn pair_key(a: TagId, b: TagId) -> u64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    (u64::from(lo.0) << 32) | u64::from(hi.0)
}

/// Count distinct users per key from `(key, user)` observations.
fn distinct_user_counts<K: Ord + Copy + Send>(mut observations: Vec<(K, u32)>) -> Vec<(K, u32)> {
    observations.par_sort_unstable();
    observations.dedup();
    let mut counts: Vec<(K, u32)> = Vec::new();
    for (key, _) in observations {
        match counts.last_mut() {
            Some((k, c)) if *k == key => *c += 1,
            _ => counts.push((key, 1)),
        }
    }
    counts
}

/// Full co-occurrence graph without weight pruning.
pub fn build_unpruned(records: &[TweetRecord]) -> CooccurrenceGraph {
    let tag_users: Vec<(TagId, u32)> = records
        .par_iter()
        .flat_map_iter(|r| r.hashtags.iter().map(move |t| (*t, r.user.0)))
        .collect();
    let pair_users: Vec<(u64, u32)> = records
        .par_iter()
        .filter(|r| r.hashtags.len() >= 2)
        .flat_map_iter(|r| {
            let tags = &r.hashtags;
            (0..tags.len()).flat_map(move |i| (i + 1..tags.len()).map(move |j| (pair_key(tags[i], tags[j]), r.user.0)))
        })
        .collect();
    let usage = distinct_user_counts(tag_users);
    let edges = distinct_user_counts(pair_users)
        .into_iter()
        .map(|(key, w)| (TagId((key >> 32) as u32), TagId(key as u32), w));
    CooccurrenceGraph::from_parts(&usage, edges).expect("records yield a valid graph")
}

pub fn build_graph(records: &[TweetRecord], min_weight: u32) -> CooccurrenceGraph {
    build_unpruned(records).prune(min_weight.max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoliticalScore {
    pub tag: TagId,
    /// Distinct affiliated users of the tag.
    pub users: u32,
    pub party_users: Vec<u32>,
    /// P_h: share of the tag's affiliated users in each party.
    pub shares: Vec<f64>,
    pub dkl_bits: f64,
    pub is_political: bool,
}

/// Relative entropy in bits between the distribution given by `counts` and
/// the one given by `reference`, both as unnormalized integer counts.
///
/// Each log ratio is evaluated from the integer cross products, so the
/// result is exactly zero when the two distributions are equal. Zero-count
/// terms contribute nothing. `reference` must be positive wherever `counts`
/// is.
pub fn relative_entropy_bits(counts: &[u64], reference: &[u64]) -> f64 {
    assert_eq!(counts.len(), reference.len());
    let n: u64 = counts.iter().sum();
    let total: u64 = reference.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for (&c, &r) in counts.iter().zip(reference) {
        if c == 0 {
            continue;
        }
        assert!(r > 0, "reference mass missing where counts are positive");
        // P(i)/Q(i) = (c * total) / (n * r)
        let num = u128::from(c) * u128::from(total);
        let den = u128::from(n) * u128::from(r);
        if num == den {
            continue;
        }
        sum += (c as f64 / n as f64) * ((num as f64).log2() - (den as f64).log2());
    }
    sum.max(0.0)
}

/// Score every hashtag used by at least one affiliated user.
///
/// Q is the party-size distribution of affiliated users; P_h the party
/// distribution of the distinct affiliated users of hashtag h.
pub fn political_scores(
    records: &[TweetRecord],
    affiliations: &AffiliationResult,
    kl_threshold: f64,
) -> Result<Vec<PoliticalScore>, GraphError> {
    if !(kl_threshold >= 0.0) {
        return Err(GraphError::Threshold(kl_threshold));
    }
    let sizes: Vec<u64> = affiliations.party_sizes().iter().map(|&s| s as u64).collect();
    let populated = sizes.iter().filter(|&&s| s > 0).count();
    if populated < 2 {
        return Err(GraphError::TooFewPopulatedParties(populated));
    }
    let n_users = records
        .iter()
        .map(|r| r.user.index() + 1)
        .max()
        .unwrap_or(0);
    let party_of = affiliations.party_table(n_users);
    let observations: Vec<(TagId, u32)> = records
        .iter()
        .filter(|r| party_of[r.user.index()].is_some())
        .flat_map(|r| r.hashtags.iter().map(move |t| (*t, r.user.0)))
        .collect();
    let mut observations = observations;
    observations.par_sort_unstable();
    observations.dedup();

    let n_parties = sizes.len();
    let mut scores = Vec::new();
    let mut i = 0;
    while i < observations.len() {
        let tag = observations[i].0;
        let mut party_users = vec![0u32; n_parties];
        while i < observations.len() && observations[i].0 == tag {
            let party = party_of[observations[i].1 as usize].expect("filtered to affiliated");
            party_users[party.index()] += 1;
            i += 1;
        }
        let counts: Vec<u64> = party_users.iter().map(|&c| u64::from(c)).collect();
        let users: u32 = party_users.iter().sum();
        let dkl_bits = relative_entropy_bits(&counts, &sizes);
        scores.push(PoliticalScore {
            tag,
            users,
            shares: party_users.iter().map(|&c| f64::from(c) / f64::from(users)).collect(),
            party_users,
            dkl_bits,
            is_political: dkl_bits >= kl_threshold,
        });
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::UserId;

    fn tweet(id: usize, user: u32, tags: &[u32]) -> TweetRecord {
        TweetRecord {
            tweet_id: id.to_string(),
            user: UserId(user),
            timestamp: id as i64,
            hashtags: tags.iter().map(|&t| TagId(t)).collect(),
            is_reply: false,
            is_retweet: false,
            is_quote: false,
            retweeted_user: None,
        }
    }

    #[test]
    fn weights_count_distinct_users() {
        // users 0 and 1 once each, user 2 five times
        let mut records = vec![tweet(0, 0, &[0, 1]), tweet(1, 1, &[1, 0])];
        records.extend((2..7).map(|i| tweet(i, 2, &[0, 1])));
        let g = build_graph(&records, 1);
        assert_eq!(g.weight(TagId(0), TagId(1)), 3);
        assert_eq!(g.weight(TagId(1), TagId(0)), 3);
        assert_eq!(g.n_nodes(), 2);
        assert_eq!(g.node_users(0), 3);
    }

    #[test]
    fn single_triangle_tweet_is_pruned_at_five() {
        let records = vec![tweet(0, 0, &[0, 1, 2])];
        let raw = build_unpruned(&records);
        assert_eq!(raw.n_edges(), 3);
        assert!(raw.edges().all(|(_, _, w)| w == 1));
        let pruned = build_graph(&records, 5);
        assert!(pruned.is_empty());
        assert_eq!(pruned.n_edges(), 0);
    }

    #[test]
    fn empty_stream_gives_empty_graph() {
        assert!(build_graph(&[], 5).is_empty());
    }

    #[test]
    fn adjacency_is_symmetric() {
        let records: Vec<_> = (0..10).map(|i| tweet(i, i as u32, &[0, 1, (i % 3 + 2) as u32])).collect();
        let g = build_unpruned(&records);
        for v in 0..g.n_nodes() {
            for &(u, w) in g.neighbors(v) {
                assert!(g.neighbors(u as usize).contains(&(v as u32, w)));
            }
        }
    }

    #[test]
    fn relative_entropy_closed_forms() {
        assert_eq!(relative_entropy_bits(&[3, 2], &[6, 4]), 0.0);
        assert_eq!(relative_entropy_bits(&[5, 3, 2], &[50, 30, 20]), 0.0);
        assert!((relative_entropy_bits(&[7, 0], &[10, 10]) - 1.0).abs() < 1e-12);
        // P=(1/2,1/2), Q=(1/4,3/4): 0.5*log2(2) + 0.5*log2(2/3)
        let expected = 0.5 + 0.5 * (2.0f64 / 3.0).log2();
        assert!((relative_entropy_bits(&[1, 1], &[1, 3]) - expected).abs() < 1e-12);
    }

    #[test]
    fn graph_from_parts_rejects_self_loops_and_dangling_edges() {
        let usage = [(TagId(0), 1), (TagId(1), 1)];
        assert!(matches!(
            CooccurrenceGraph::from_parts(&usage, [(TagId(0), TagId(0), 2)]),
            Err(GraphError::SelfLoop(0))
        ));
        assert!(matches!(
            CooccurrenceGraph::from_parts(&usage, [(TagId(0), TagId(9), 2)]),
            Err(GraphError::DanglingEdge(0, 9))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn corpus() -> impl Strategy<Value = Vec<TweetRecord>> {
            proptest::collection::vec((0u32..8, proptest::collection::btree_set(0u32..10, 0..4)), 0..60).prop_map(
                |rows| {
                    rows.into_iter()
                        .enumerate()
                        .map(|(i, (u, tags))| tweet(i, u, &tags.into_iter().collect::<Vec<_>>()))
                        .collect()
                },
            )
        }

        proptest! {
            #[test]
            fn duplicating_a_users_tweets_keeps_weights(records in corpus(), user in 0u32..8, copies in 1usize..5) {
                let base = build_unpruned(&records);
                let mut more = records.clone();
                let extra: Vec<TweetRecord> = records.iter().filter(|r| r.user.0 == user).cloned().collect();
                for k in 0..copies {
                    for (j, r) in extra.iter().enumerate() {
                        let mut r = r.clone();
                        r.tweet_id = format!("dup-{k}-{j}");
                        more.push(r);
                    }
                }
                prop_assert_eq!(build_unpruned(&more), base);
            }

            #[test]
            fn pruning_only_removes(records in corpus(), lo in 1u32..4, step in 0u32..3) {
                let low = build_graph(&records, lo);
                let high = build_graph(&records, lo + step);
                for (a, b, w) in high.edges() {
                    prop_assert_eq!(low.weight(a, b), w);
                    prop_assert!(w >= lo + step);
                }
                prop_assert!(high.n_edges() <= low.n_edges());
            }

            #[test]
            fn weights_match_brute_force(records in corpus()) {
                let g = build_unpruned(&records);
                for a in 0..10u32 {
                    for b in (a + 1)..10 {
                        let users: HashSet<u32> = records
                            .iter()
                            .filter(|r| r.hashtags.contains(&TagId(a)) && r.hashtags.contains(&TagId(b)))
                            .map(|r| r.user.0)
                            .collect();
                        prop_assert_eq!(g.weight(TagId(a), TagId(b)), users.len() as u32);
                        prop_assert_eq!(g.weight(TagId(b), TagId(a)), users.len() as u32);
                    }
                }
            }

            #[test]
            fn relative_entropy_non_negative(
                pairs in proptest::collection::vec((0u64..50, 1u64..50), 2..6),
            ) {
                let (counts, reference): (Vec<u64>, Vec<u64>) = pairs.into_iter().unzip();
                prop_assert!(relative_entropy_bits(&counts, &reference) >= 0.0);
            }
        }
    }
}
