use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Minimum number of shared selected words for an edge.
pub const MIN_SHARED_WORDS: usize = 2;

/// The parts of a tokenized, importance-profiled message that clustering needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolMember {
    pub tweet_id: String,
    /// Total token count of the message.
    pub token_count: usize,
    pub selected: BTreeSet<String>,
}

/// Shared selected words over the product of both token counts.
pub fn similarity(u: &PoolMember, v: &PoolMember) -> f64 {
    if u.token_count == 0 || v.token_count == 0 {
        return 0.0;
    }
    let shared = u.selected.intersection(&v.selected).count();
    shared as f64 / (u.token_count as f64 * v.token_count as f64)
}

/// Undirected weighted graph over pool members, stored as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetGraph {
    pub nodes: Vec<String>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl TweetGraph {
    /// Builds a graph from an explicit edge list; duplicate edges keep the last weight.
    pub fn from_edges(nodes: Vec<String>, edges: &[(usize, usize, f64)]) -> Self {
        let mut adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); nodes.len()];
        for &(u, v, w) in edges {
            if u == v {
                continue;
            }
            adj[u].insert(v, w);
            adj[v].insert(u, w);
        }
        TweetGraph {
            nodes,
            adjacency: adj.into_iter().map(|m| m.into_iter().collect()).collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.adjacency[u]
    }

    /// Edges with `u < v`, ordered by `(u, v)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, ns)| ns.iter().filter(move |(v, _)| *v > u).map(move |&(v, w)| (u, v, w)))
    }
}

/// Connects members sharing at least two selected words, weighted by
/// [`similarity`]. Candidate pairs come from a word -> members index, so
/// members with no selected word in common are never compared.
pub fn build_graph(pool: &[PoolMember]) -> TweetGraph {
    let mut postings: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, m) in pool.iter().enumerate() {
        for w in &m.selected {
            postings.entry(w.as_str()).or_default().push(i);
        }
    }
    let adjacency_upper: Vec<Vec<(usize, f64)>> = (0..pool.len())
        .into_par_iter()
        .map(|u| {
            let mut shared: HashMap<usize, usize> = HashMap::new();
            for w in &pool[u].selected {
                for &v in &postings[w.as_str()] {
                    if v > u {
                        *shared.entry(v).or_default() += 1;
                    }
                }
            }
            let mut out: Vec<(usize, f64)> = shared
                .into_iter()
                .filter(|&(_, c)| c >= MIN_SHARED_WORDS)
                .map(|(v, _)| (v, similarity(&pool[u], &pool[v])))
                .collect();
            out.sort_by_key(|&(v, _)| v);
            out
        })
        .collect();

    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); pool.len()];
    for (u, ns) in adjacency_upper.iter().enumerate() {
        for &(v, w) in ns {
            adjacency[u].push((v, w));
            adjacency[v].push((u, w));
        }
    }
    for ns in &mut adjacency {
        ns.sort_by_key(|&(v, _)| v);
    }
    TweetGraph {
        nodes: pool.iter().map(|m| m.tweet_id.clone()).collect(),
        adjacency,
    }
}
