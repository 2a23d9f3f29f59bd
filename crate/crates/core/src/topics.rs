//! Topic detection on the co-occurrence graph and k-core decomposition of
//! topic subgraphs.
//!
//! The built-in detector is a seeded Louvain-style greedy maximization of
//! weighted modularity. External detectors (OSLOM and friends) plug in
//! through an integer edge list out and a community file in.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{InternTable, TagId};
use crate::semantic_graph::CooccurrenceGraph;

#[derive(Debug, Error)]
pub enum TopicsError {
    #[error("cannot detect topics on an empty graph")]
    EmptyGraph,
    #[error("community file references {0}, which is not a node of the graph")]
    UnknownNode(String),
    #[error("community file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("topic {0} does not exist")]
    UnknownTopic(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Detector {
    /// Greedy weighted-modularity maximization; node visit order from `seed`.
    Louvain { seed: u64 },
    /// Communities computed elsewhere, read from a community file.
    External { source: String },
}

impl Detector {
    pub fn provenance(&self) -> String {
        match self {
            Detector::Louvain { seed } => format!("louvain:seed={seed}"),
            Detector::External { source } => format!("external:{source}"),
        }
    }
}

/// Hashtag to topic assignment. Topic ids are contiguous from 0 and every
/// topic has at least two member hashtags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicPartition {
    members: Vec<Vec<TagId>>,
    assignment: Vec<Option<u32>>,
    provenance: String,
}

impl TopicPartition {
    /// Build from disjoint member lists. Lists with fewer than two members
    /// leave their hashtags unassigned. Topics are numbered by decreasing
    /// size, ties by smallest member tag.
    pub fn from_disjoint(communities: Vec<Vec<TagId>>, provenance: impl Into<String>) -> Self {
        let mut members: Vec<Vec<TagId>> = communities
            .into_iter()
            .map(|mut c| {
                c.sort_unstable();
                c.dedup();
                c
            })
            .filter(|c| c.len() >= 2)
            .collect();
        members.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a[0].cmp(&b[0])));
        let size = members.iter().flatten().map(|t| t.index() + 1).max().unwrap_or(0);
        let mut assignment = vec![None; size];
        for (topic, tags) in members.iter().enumerate() {
            for tag in tags {
                debug_assert!(assignment[tag.index()].is_none(), "communities must be disjoint");
                assignment[tag.index()] = Some(topic as u32);
            }
        }
        Self {
            members,
            assignment,
            provenance: provenance.into(),
        }
    }

    pub fn n_topics(&self) -> usize {
        self.members.len()
    }

    pub fn topic_of(&self, tag: TagId) -> Option<usize> {
        self.assignment.get(tag.index()).copied().flatten().map(|t| t as usize)
    }

    pub fn members(&self, topic: usize) -> Option<&[TagId]> {
        self.members.get(topic).map(Vec::as_slice)
    }

    pub fn topics(&self) -> impl Iterator<Item = (usize, &[TagId])> {
        self.members.iter().enumerate().map(|(i, m)| (i, m.as_slice()))
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn n_assigned(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }
}

/// Weighted modularity of a node membership vector.
pub fn modularity(graph: &CooccurrenceGraph, membership: &[usize]) -> f64 {
    let m = graph.total_weight() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let n_comms = membership.iter().max().map_or(0, |c| c + 1);
    let mut internal = vec![0.0; n_comms];
    let mut total = vec![0.0; n_comms];
    for &(a, b, w) in graph.index_edges() {
        if membership[a as usize] == membership[b as usize] {
            internal[membership[a as usize]] += f64::from(w);
        }
    }
    for (v, &c) in membership.iter().enumerate() {
        total[c] += graph.strength(v) as f64;
    }
    internal
        .iter()
        .zip(&total)
        .map(|(lin, tot)| lin / m - (tot / (2.0 * m)).powi(2))
        .sum()
}

/// Multilevel graph used while aggregating communities.
struct LevelGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
    /// Weight of edges folded inside each super-node.
    self_loops: Vec<f64>,
}

impl LevelGraph {
    fn from_graph(graph: &CooccurrenceGraph) -> Self {
        let adjacency = (0..graph.n_nodes())
            .map(|v| graph.neighbors(v).iter().map(|&(u, w)| (u as usize, f64::from(w))).collect())
            .collect();
        Self {
            adjacency,
            self_loops: vec![0.0; graph.n_nodes()],
        }
    }

    fn len(&self) -> usize {
        self.adjacency.len()
    }

    fn degree(&self, v: usize) -> f64 {
        2.0 * self.self_loops[v] + self.adjacency[v].iter().map(|&(_, w)| w).sum::<f64>()
    }

    fn aggregate(&self, community: &[usize], n_comms: usize) -> Self {
        let mut self_loops = vec![0.0; n_comms];
        let mut maps: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n_comms];
        for v in 0..self.len() {
            let cv = community[v];
            self_loops[cv] += self.self_loops[v];
            for &(u, w) in &self.adjacency[v] {
                let cu = community[u];
                if cu == cv {
                    // each internal edge is seen from both ends
                    self_loops[cv] += w / 2.0;
                } else {
                    *maps[cv].entry(cu).or_insert(0.0) += w;
                }
            }
        }
        Self {
            adjacency: maps.into_iter().map(|m| m.into_iter().collect()).collect(),
            self_loops,
        }
    }
}

/// One level of local moving. Returns the membership and whether any node
/// changed community.
fn local_moving(level: &LevelGraph, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    let n = level.len();
    let degree: Vec<f64> = (0..n).map(|v| level.degree(v)).collect();
    let two_m: f64 = degree.iter().sum();
    let mut community: Vec<usize> = (0..n).collect();
    let mut totals = degree.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut links = vec![0.0; n];
    let mut seen = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut moved_any = false;
    loop {
        let mut moved = false;
        for &v in &order {
            let own = community[v];
            totals[own] -= degree[v];
            touched.push(own);
            seen[own] = true;
            for &(u, w) in &level.adjacency[v] {
                let c = community[u];
                if !seen[c] {
                    seen[c] = true;
                    touched.push(c);
                }
                links[c] += w;
            }
            // Staying put wins ties; among other communities the lowest id.
            let gain = |c: usize| links[c] - totals[c] * degree[v] / two_m;
            let mut best = own;
            let mut best_gain = gain(own);
            for &c in &touched[1..] {
                let g = gain(c);
                if g > best_gain + 1e-12 || (best != own && (g - best_gain).abs() <= 1e-12 && c < best) {
                    best = c;
                    best_gain = g;
                }
            }
            for &c in &touched {
                links[c] = 0.0;
                seen[c] = false;
            }
            touched.clear();
            totals[best] += degree[v];
            if best != own {
                community[v] = best;
                moved = true;
                moved_any = true;
            }
        }
        if !moved {
            break;
        }
    }
    (community, moved_any)
}

fn relabel(community: &mut [usize]) -> usize {
    let mut map: HashMap<usize, usize> = HashMap::new();
    for c in community.iter_mut() {
        let next = map.len();
        *c = *map.entry(*c).or_insert(next);
    }
    map.len()
}

/// Seeded multilevel greedy modularity maximization. Returns a community
/// index per node.
pub fn louvain(graph: &CooccurrenceGraph, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = LevelGraph::from_graph(graph);
    let mut membership: Vec<usize> = (0..graph.n_nodes()).collect();
    loop {
        let (mut community, moved) = local_moving(&level, &mut rng);
        if !moved {
            break;
        }
        let n_comms = relabel(&mut community);
        for m in membership.iter_mut() {
            *m = community[*m];
        }
        if n_comms == level.len() {
            break;
        }
        level = level.aggregate(&community, n_comms);
    }
    relabel(&mut membership);
    membership
}

/// Run the built-in detector.
pub fn detect_topics(graph: &CooccurrenceGraph, seed: u64) -> Result<TopicPartition, TopicsError> {
    if graph.is_empty() {
        return Err(TopicsError::EmptyGraph);
    }
    let membership = louvain(graph, seed);
    let n_comms = membership.iter().max().map_or(0, |c| c + 1);
    let mut communities = vec![Vec::new(); n_comms];
    for (v, &c) in membership.iter().enumerate() {
        communities[c].push(graph.tag(v));
    }
    Ok(TopicPartition::from_disjoint(
        communities,
        Detector::Louvain { seed }.provenance(),
    ))
}

/// Reduce possibly overlapping communities (node indices) to a partition:
/// a node listed in several communities stays in the one where its summed
/// edge weight to the other members is highest, ties to the earliest.
pub fn reduce_overlaps(graph: &CooccurrenceGraph, communities: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut homes: Vec<Vec<usize>> = vec![Vec::new(); graph.n_nodes()];
    for (c, members) in communities.iter().enumerate() {
        for &v in members {
            if homes[v].last() != Some(&c) {
                homes[v].push(c);
            }
        }
    }
    let mut label: Vec<Option<usize>> = vec![None; graph.n_nodes()];
    for (v, candidates) in homes.iter().enumerate() {
        match candidates.as_slice() {
            [] => {}
            [only] => label[v] = Some(*only),
            many => {
                let strength = |c: usize| -> u64 {
                    graph
                        .neighbors(v)
                        .iter()
                        .filter(|(u, _)| homes[*u as usize].contains(&c))
                        .map(|&(_, w)| u64::from(w))
                        .sum()
                };
                let mut best = many[0];
                let mut best_strength = strength(best);
                for &c in &many[1..] {
                    let s = strength(c);
                    if s > best_strength {
                        best = c;
                        best_strength = s;
                    }
                }
                label[v] = Some(best);
            }
        }
    }
    let mut reduced = vec![Vec::new(); communities.len()];
    for (v, l) in label.iter().enumerate() {
        if let Some(c) = l {
            reduced[*c].push(v);
        }
    }
    reduced
}

/// Parse a community file against `graph`.
///
/// Two layouts are accepted. The native one has one community per line,
/// `topic_id tag tag ...`, naming hashtags. The OSLOM `tp` layout alternates
/// `#module <id> ...` header lines with lines of integer node ids from the
/// interchange edge list. Other lines starting with `#` are comments.
pub fn parse_communities(
    text: &str,
    graph: &CooccurrenceGraph,
    interner: &InternTable,
) -> Result<Vec<Vec<usize>>, TopicsError> {
    let oslom = text.lines().any(|l| l.trim_start().starts_with("#module"));
    let mut labelled: Vec<(i64, Vec<usize>)> = Vec::new();
    let mut pending: Option<i64> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        let format_err = |message: String| TopicsError::Format {
            line: lineno + 1,
            message,
        };
        if line.is_empty() {
            continue;
        }
        if oslom {
            if let Some(rest) = line.strip_prefix("#module") {
                let id = rest
                    .split_whitespace()
                    .next()
                    .and_then(|t| t.parse::<i64>().ok())
                    .ok_or_else(|| format_err("module header without id".into()))?;
                pending = Some(id);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let id = pending
                .take()
                .ok_or_else(|| format_err("member line without a module header".into()))?;
            let members = line
                .split_whitespace()
                .map(|tok| {
                    let v: usize = tok.parse().map_err(|_| format_err(format!("bad node id {tok:?}")))?;
                    if v >= graph.n_nodes() {
                        return Err(TopicsError::UnknownNode(format!("node id {v}")));
                    }
                    Ok(v)
                })
                .collect::<Result<Vec<_>, _>>()?;
            labelled.push((id, members));
        } else {
            if line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let id: i64 = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| format_err("line must start with an integer topic id".into()))?;
            let members = tokens
                .map(|tag| {
                    interner
                        .tag_id(tag)
                        .and_then(|t| graph.node_index(t))
                        .ok_or_else(|| TopicsError::UnknownNode(tag.to_owned()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            labelled.push((id, members));
        }
    }
    labelled.sort_by_key(|(id, _)| *id);
    Ok(labelled.into_iter().map(|(_, m)| m).collect())
}

/// Turn external communities into a topic partition.
pub fn partition_from_communities(
    graph: &CooccurrenceGraph,
    communities: &[Vec<usize>],
    provenance: impl Into<String>,
) -> TopicPartition {
    let reduced = reduce_overlaps(graph, communities);
    let tags = reduced
        .into_iter()
        .map(|c| c.into_iter().map(|v| graph.tag(v)).collect())
        .collect();
    TopicPartition::from_disjoint(tags, provenance)
}

/// Core numbers of a simple undirected graph given as adjacency lists,
/// by bucket peeling in O(n + m).
pub fn core_numbers(adjacency: &[Vec<usize>]) -> Vec<u32> {
    let n = adjacency.len();
    let mut degree: Vec<usize> = adjacency.iter().map(Vec::len).collect();
    let max_degree = degree.iter().copied().max().unwrap_or(0);
    // bin[d] = start of degree-d block in `order`
    let mut bin = vec![0usize; max_degree + 2];
    for &d in &degree {
        bin[d + 1] += 1;
    }
    for d in 1..bin.len() {
        bin[d] += bin[d - 1];
    }
    let mut position = vec![0usize; n];
    let mut order = vec![0usize; n];
    let mut next = bin.clone();
    for v in 0..n {
        position[v] = next[degree[v]];
        order[position[v]] = v;
        next[degree[v]] += 1;
    }
    for i in 0..n {
        let v = order[i];
        for &u in &adjacency[v] {
            if degree[u] > degree[v] {
                let du = degree[u];
                let first = order[bin[du]];
                let pu = position[u];
                if first != u {
                    order.swap(pu, bin[du]);
                    position[first] = pu;
                    position[u] = bin[du];
                }
                bin[du] += 1;
                degree[u] -= 1;
            }
        }
    }
    degree.into_iter().map(|d| d as u32).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorenessEntry {
    pub tag: TagId,
    /// Degree within the topic subgraph.
    pub degree: u32,
    pub coreness: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorenessMap {
    pub topic: usize,
    /// Sorted by tag id.
    pub entries: Vec<CorenessEntry>,
}

/// k-core decomposition of the unweighted subgraph induced by one topic.
pub fn coreness(
    graph: &CooccurrenceGraph,
    partition: &TopicPartition,
    topic: usize,
) -> Result<CorenessMap, TopicsError> {
    let members = partition.members(topic).ok_or(TopicsError::UnknownTopic(topic))?;
    let nodes: Vec<usize> = members.iter().filter_map(|t| graph.node_index(*t)).collect();
    let local: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let adjacency: Vec<Vec<usize>> = nodes
        .iter()
        .map(|&v| {
            graph
                .neighbors(v)
                .iter()
                .filter_map(|(u, _)| local.get(&(*u as usize)).copied())
                .collect()
        })
        .collect();
    let cores = core_numbers(&adjacency);
    let mut entries: Vec<CorenessEntry> = nodes
        .iter()
        .enumerate()
        .map(|(i, &v)| CorenessEntry {
            tag: graph.tag(v),
            degree: adjacency[i].len() as u32,
            coreness: cores[i],
        })
        .collect();
    entries.sort_by_key(|e| e.tag);
    Ok(CorenessMap { topic, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(u32, u32, u32)]) -> CooccurrenceGraph {
        let mut nodes: Vec<u32> = edges.iter().flat_map(|e| [e.0, e.1]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let usage: Vec<(TagId, u32)> = nodes.iter().map(|&t| (TagId(t), 1)).collect();
        CooccurrenceGraph::from_parts(&usage, edges.iter().map(|&(a, b, w)| (TagId(a), TagId(b), w))).unwrap()
    }

    fn clique(nodes: std::ops::Range<u32>, w: u32) -> Vec<(u32, u32, u32)> {
        let v: Vec<u32> = nodes.collect();
        let mut out = Vec::new();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                out.push((v[i], v[j], w));
            }
        }
        out
    }

    fn brute_core(adjacency: &[Vec<usize>]) -> Vec<u32> {
        let n = adjacency.len();
        let mut core = vec![0u32; n];
        for k in 1..=n {
            let mut alive = vec![true; n];
            loop {
                let mut changed = false;
                for v in 0..n {
                    if alive[v] && adjacency[v].iter().filter(|&&u| alive[u]).count() < k {
                        alive[v] = false;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
            for v in 0..n {
                if alive[v] {
                    core[v] = k as u32;
                }
            }
        }
        core
    }

    #[test]
    fn two_cliques_split_in_two() {
        let mut edges = clique(0..5, 5);
        edges.extend(clique(5..10, 5));
        edges.push((4, 5, 5));
        let g = graph(&edges);
        for seed in 0..10 {
            let p = detect_topics(&g, seed).unwrap();
            assert_eq!(p.n_topics(), 2, "seed {seed}");
            let a = p.topic_of(TagId(0)).unwrap();
            assert!((0..5).all(|t| p.topic_of(TagId(t)) == Some(a)));
            assert!((5..10).all(|t| p.topic_of(TagId(t)) == Some(1 - a)));
        }
    }

    #[test]
    fn complete_graph_is_one_topic() {
        let g = graph(&clique(0..8, 3));
        let p = detect_topics(&g, 7).unwrap();
        assert_eq!(p.n_topics(), 1);
        assert_eq!(p.n_assigned(), 8);
    }

    #[test]
    fn same_seed_same_partition() {
        let mut edges = clique(0..6, 2);
        edges.extend(clique(6..12, 3));
        edges.extend([(0, 6, 1), (1, 7, 1), (2, 12, 4), (12, 13, 4), (13, 3, 1)]);
        let g = graph(&edges);
        assert_eq!(detect_topics(&g, 11).unwrap(), detect_topics(&g, 11).unwrap());
        assert_eq!(louvain(&g, 11), louvain(&g, 11));
    }

    #[test]
    fn empty_graph_rejected() {
        let g = graph(&[]);
        assert!(matches!(detect_topics(&g, 0), Err(TopicsError::EmptyGraph)));
    }

    #[test]
    fn modularity_of_two_cliques() {
        let mut edges = clique(0..3, 1);
        edges.extend(clique(3..6, 1));
        edges.push((2, 3, 1));
        let g = graph(&edges);
        // m = 7; each side: 3 internal, degree sum 7
        let q = modularity(&g, &[0, 0, 0, 1, 1, 1]);
        let expected = 2.0 * (3.0 / 7.0 - (7.0f64 / 14.0).powi(2));
        assert!((q - expected).abs() < 1e-12);
        assert!(modularity(&g, &[0; 6]).abs() < 1e-12);
    }

    #[test]
    fn overlaps_go_to_strongest_community() {
        // node 2 sits in both; it is tied harder to {3,4}
        let g = graph(&[(0, 1, 5), (1, 2, 1), (0, 2, 1), (2, 3, 4), (3, 4, 5), (2, 4, 4)]);
        let reduced = reduce_overlaps(&g, &[vec![0, 1, 2], vec![2, 3, 4]]);
        assert_eq!(reduced, vec![vec![0, 1], vec![2, 3, 4]]);
        // equal strength: earliest community wins
        let g = graph(&[(0, 1, 1), (1, 2, 1)]);
        assert_eq!(reduce_overlaps(&g, &[vec![0, 1], vec![1, 2]]), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn singleton_communities_are_unassigned() {
        let g = graph(&[(0, 1, 1), (1, 2, 1)]);
        let p = partition_from_communities(&g, &[vec![0, 1], vec![2]], "test");
        assert_eq!(p.n_topics(), 1);
        assert_eq!(p.topic_of(TagId(2)), None);
    }

    #[test]
    fn native_and_oslom_files() {
        let g = graph(&[(0, 1, 1), (1, 2, 1), (2, 3, 1)]);
        let interner = InternTable::from_parts(vec![], vec!["a".into(), "b".into(), "c".into(), "d".into()]);
        let native = "# comment\n7 c d\n3 a b\n";
        assert_eq!(parse_communities(native, &g, &interner).unwrap(), vec![vec![0, 1], vec![2, 3]]);
        let oslom = "#module 0 size: 2 bs: 0.1\n0 1\n#module 1 size: 2 bs: 0.2\n2 3\n";
        assert_eq!(parse_communities(oslom, &g, &interner).unwrap(), vec![vec![0, 1], vec![2, 3]]);
        assert!(matches!(
            parse_communities("1 a zz\n", &g, &interner),
            Err(TopicsError::UnknownNode(t)) if t == "zz"
        ));
        assert!(matches!(
            parse_communities("#module 1 size: 1\n9\n", &g, &interner),
            Err(TopicsError::UnknownNode(_))
        ));
        assert!(matches!(parse_communities("x a b\n", &g, &interner), Err(TopicsError::Format { line: 1, .. })));
    }

    #[test]
    fn coreness_small_cases() {
        let triangle = vec![vec![1, 2], vec![0, 2], vec![0, 1]];
        assert_eq!(core_numbers(&triangle), vec![2, 2, 2]);
        let star: Vec<Vec<usize>> = std::iter::once((1..7).collect())
            .chain((1..7).map(|_| vec![0]))
            .collect();
        assert_eq!(core_numbers(&star), vec![1; 7]);
        let pendant = vec![vec![1, 2, 3], vec![0, 2, 3], vec![0, 1, 3], vec![0, 1, 2, 4], vec![3]];
        assert_eq!(core_numbers(&pendant), vec![3, 3, 3, 3, 1]);
        assert_eq!(brute_core(&pendant), vec![3, 3, 3, 3, 1]);
        assert!(core_numbers(&[]).is_empty());
    }

    #[test]
    fn topic_coreness_uses_induced_subgraph() {
        let mut edges = clique(0..4, 7);
        edges.push((3, 4, 9));
        edges.push((4, 5, 9));
        let g = graph(&edges);
        let p = TopicPartition::from_disjoint(vec![(0..5).map(TagId).collect()], "test");
        let map = coreness(&g, &p, 0).unwrap();
        let cores: Vec<u32> = map.entries.iter().map(|e| e.coreness).collect();
        let degrees: Vec<u32> = map.entries.iter().map(|e| e.degree).collect();
        assert_eq!(cores, vec![3, 3, 3, 3, 1]);
        // edge 4-5 leaves the topic
        assert_eq!(degrees, vec![3, 3, 3, 4, 1]);
        assert!(matches!(coreness(&g, &p, 3), Err(TopicsError::UnknownTopic(3))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_graph() -> impl Strategy<Value = Vec<Vec<usize>>> {
            (1usize..30).prop_flat_map(|n| {
                proptest::collection::vec((0..n, 0..n), 0..(n * 3)).prop_map(move |pairs| {
                    let mut adjacency = vec![Vec::new(); n];
                    for (a, b) in pairs {
                        if a != b && !adjacency[a].contains(&b) {
                            adjacency[a].push(b);
                            adjacency[b].push(a);
                        }
                    }
                    adjacency
                })
            })
        }

        proptest! {
            #[test]
            fn peeling_matches_brute_force(adjacency in random_graph()) {
                let cores = core_numbers(&adjacency);
                prop_assert_eq!(&cores, &brute_core(&adjacency));
                for (v, c) in cores.iter().enumerate() {
                    prop_assert!(*c as usize <= adjacency[v].len());
                }
            }
        }
    }
}
