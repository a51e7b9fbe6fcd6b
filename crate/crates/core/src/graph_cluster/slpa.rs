//! Speaker-listener label propagation with weighted voting.
//!
//! Every node starts with its own index as its only label. In each
//! iteration the nodes take turns as listener in a seeded random order; each
//! neighbor speaks one label drawn from its memory, and the listener stores
//! the label whose speakers carry the largest total edge weight.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{PoolMember, TweetGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeakerRule {
    /// Sample proportionally to memory counts.
    #[default]
    Sample,
    /// Always speak the most frequent label (debugging aid).
    Argmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlpaConfig {
    pub iterations: usize,
    /// Post-processing frequency threshold `r`.
    pub threshold: f64,
    pub speaker: SpeakerRule,
}

impl Default for SlpaConfig {
    fn default() -> Self {
        SlpaConfig {
            iterations: 100,
            threshold: 0.2,
            speaker: SpeakerRule::Sample,
        }
    }
}

impl SlpaConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.iterations == 0 {
            return Err("slpa.iterations must be >= 1".into());
        }
        if !(self.threshold > 0.0 && self.threshold <= 0.5) {
            return Err(format!("slpa.threshold {} outside (0, 0.5]", self.threshold));
        }
        Ok(())
    }
}

/// Per-node label memories and the propagation RNG.
#[derive(Debug, Clone)]
pub struct SlpaEngine<'g> {
    graph: &'g TweetGraph,
    /// Sorted by label.
    memory: Vec<Vec<(usize, u32)>>,
    rng: ChaCha8Rng,
    iteration: usize,
    speaker: SpeakerRule,
}

impl<'g> SlpaEngine<'g> {
    pub fn new(graph: &'g TweetGraph, speaker: SpeakerRule, seed: u64) -> Self {
        SlpaEngine {
            graph,
            memory: (0..graph.node_count()).map(|i| vec![(i, 1)]).collect(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            iteration: 0,
            speaker,
        }
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn memory(&self, node: usize) -> &[(usize, u32)] {
        &self.memory[node]
    }

    pub fn memory_sum(&self, node: usize) -> u32 {
        self.memory[node].iter().map(|&(_, c)| c).sum()
    }

    fn speak(&mut self, node: usize) -> usize {
        let mem = &self.memory[node];
        match self.speaker {
            SpeakerRule::Argmax => argmax_label(mem),
            SpeakerRule::Sample => {
                let total: u32 = mem.iter().map(|&(_, c)| c).sum();
                let mut x = self.rng.random_range(0..total);
                for &(label, c) in mem {
                    if x < c {
                        return label;
                    }
                    x -= c;
                }
                unreachable!("draw below memory total")
            }
        }
    }

    fn remember(&mut self, node: usize, label: usize) {
        let mem = &mut self.memory[node];
        match mem.binary_search_by_key(&label, |&(l, _)| l) {
            Ok(i) => mem[i].1 += 1,
            Err(i) => mem.insert(i, (label, 1)),
        }
    }

    /// One full pass in which every node listens once.
    pub fn step(&mut self) {
        let mut order: Vec<usize> = (0..self.graph.node_count()).collect();
        order.shuffle(&mut self.rng);
        let mut votes: HashMap<usize, f64> = HashMap::new();
        for listener in order {
            let neighbors = self.graph.neighbors(listener);
            let accepted = if neighbors.is_empty() {
                listener
            } else {
                votes.clear();
                for &(speaker, w) in neighbors {
                    let label = self.speak(speaker);
                    *votes.entry(label).or_insert(0.0) += w;
                }
                let mut best = (f64::NEG_INFINITY, usize::MAX);
                for (&label, &w) in &votes {
                    if w > best.0 || (w == best.0 && label < best.1) {
                        best = (w, label);
                    }
                }
                best.1
            };
            self.remember(listener, accepted);
        }
        self.iteration += 1;
    }

    pub fn run(&mut self, iterations: usize) {
        for _ in 0..iterations {
            self.step();
        }
    }

    /// Labels held by each node with relative frequency above `r`. A node
    /// with no such label keeps its most frequent one.
    pub fn memberships(&self, r: f64) -> Vec<Vec<usize>> {
        self.memory
            .iter()
            .map(|mem| {
                let total: u32 = mem.iter().map(|&(_, c)| c).sum();
                let mut labels: Vec<usize> = mem
                    .iter()
                    .filter(|&&(_, c)| c as f64 / total as f64 > r)
                    .map(|&(l, _)| l)
                    .collect();
                if labels.is_empty() {
                    labels.push(argmax_label(mem));
                }
                labels
            })
            .collect()
    }

    /// Connected groups of nodes sharing a label, deduplicated by member set.
    pub fn communities(&self, r: f64) -> Vec<Community> {
        let memberships = self.memberships(r);
        let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (node, labels) in memberships.iter().enumerate() {
            for &l in labels {
                by_label.entry(l).or_default().push(node);
            }
        }
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        let mut out = Vec::new();
        let mut in_label = vec![false; self.graph.node_count()];
        let mut visited = vec![false; self.graph.node_count()];
        for (label, nodes) in by_label {
            for &n in &nodes {
                in_label[n] = true;
            }
            for &start in &nodes {
                if visited[start] {
                    continue;
                }
                let mut comp = Vec::new();
                let mut queue = VecDeque::from([start]);
                visited[start] = true;
                while let Some(u) = queue.pop_front() {
                    comp.push(u);
                    for &(v, _) in self.graph.neighbors(u) {
                        if in_label[v] && !visited[v] {
                            visited[v] = true;
                            queue.push_back(v);
                        }
                    }
                }
                comp.sort_unstable();
                if seen.insert(comp.clone()) {
                    out.push(Community { label, nodes: comp });
                }
            }
            for &n in &nodes {
                in_label[n] = false;
                visited[n] = false;
            }
        }
        out
    }
}

fn argmax_label(mem: &[(usize, u32)]) -> usize {
    let mut best = mem[0];
    for &(l, c) in &mem[1..] {
        if c > best.1 {
            best = (l, c);
        }
    }
    best.0
}

/// A connected node set sharing one label, as node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Community {
    pub label: usize,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: String,
    /// Member tweet ids, sorted.
    pub members: Vec<String>,
    /// Up to ten most frequent selected words among the members.
    pub top_words: Vec<String>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Most frequent selected words among `members`, ties broken alphabetically.
pub fn top_words<'a, I>(members: I, limit: usize) -> Vec<String>
where
    I: IntoIterator<Item = &'a PoolMember>,
{
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for m in members {
        for w in &m.selected {
            *freq.entry(w.as_str()).or_default() += 1;
        }
    }
    let mut words: Vec<(&str, usize)> = freq.into_iter().collect();
    words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    words.into_iter().take(limit).map(|(w, _)| w.to_string()).collect()
}

/// Runs propagation on the pool graph and returns ranked clusters with ids
/// `c0000`, `c0001`, ... in rank order. `pool[i]` must describe graph node `i`.
pub fn slpa_cluster(graph: &TweetGraph, pool: &[PoolMember], config: &SlpaConfig, seed: u64) -> Vec<Cluster> {
    assert_eq!(graph.node_count(), pool.len(), "pool/graph size mismatch");
    if graph.node_count() == 0 {
        return Vec::new();
    }
    let mut engine = SlpaEngine::new(graph, config.speaker, seed);
    engine.run(config.iterations);
    let clusters = engine
        .communities(config.threshold)
        .into_iter()
        .map(|c| {
            let mut members: Vec<String> = c.nodes.iter().map(|&n| graph.nodes[n].clone()).collect();
            members.sort();
            Cluster {
                id: String::new(),
                members,
                top_words: top_words(c.nodes.iter().map(|&n| &pool[n]), 10),
            }
        })
        .collect();
    let mut ranked = rank_clusters(clusters);
    for (i, c) in ranked.iter_mut().enumerate() {
        c.id = format!("c{i:04}");
    }
    ranked
}

/// Largest first; equal sizes ordered by smallest member id.
pub fn rank_clusters(mut clusters: Vec<Cluster>) -> Vec<Cluster> {
    clusters.sort_by(|a, b| {
        b.size()
            .cmp(&a.size())
            .then_with(|| a.members.first().cmp(&b.members.first()))
            .then_with(|| a.members.cmp(&b.members))
    });
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_cluster::graph::TweetGraph;

    fn nodes(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{i}")).collect()
    }

    fn pool(n: usize) -> Vec<PoolMember> {
        nodes(n)
            .into_iter()
            .map(|id| PoolMember { tweet_id: id, token_count: 3, selected: BTreeSet::new() })
            .collect()
    }

    fn complete(n: usize) -> Vec<(usize, usize, f64)> {
        let mut e = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                e.push((u, v, 1.0));
            }
        }
        e
    }

    #[test]
    fn edgeless_graph_gives_singletons() {
        let g = TweetGraph::from_edges(nodes(4), &[]);
        let cs = slpa_cluster(&g, &pool(4), &SlpaConfig::default(), 1);
        assert_eq!(cs.len(), 4);
        assert!(cs.iter().all(|c| c.size() == 1));
    }

    #[test]
    fn empty_graph_gives_no_clusters() {
        let g = TweetGraph::from_edges(vec![], &[]);
        assert!(slpa_cluster(&g, &[], &SlpaConfig::default(), 1).is_empty());
    }

    #[test]
    fn complete_graph_is_one_cluster() {
        let g = TweetGraph::from_edges(nodes(4), &complete(4));
        let cs = slpa_cluster(&g, &pool(4), &SlpaConfig::default(), 7);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].size(), 4);
    }

    #[test]
    fn memory_sum_tracks_iterations() {
        let g = TweetGraph::from_edges(nodes(6), &[(0, 1, 1.0), (1, 2, 0.5), (3, 4, 2.0)]);
        let mut e = SlpaEngine::new(&g, SpeakerRule::Sample, 3);
        for it in 1..=20 {
            e.step();
            assert!((0..6).all(|n| e.memory_sum(n) as usize == it + 1));
        }
    }

    #[test]
    fn rank_examples() {
        let mk = |ids: &[&str]| Cluster {
            id: String::new(),
            members: ids.iter().map(|s| s.to_string()).collect(),
            top_words: vec![],
        };
        let ranked = rank_clusters(vec![mk(&["a", "b", "c"]), mk(&["m", "n", "o", "p", "q", "r", "s"]), mk(&["d", "e", "f", "g", "h", "i", "j"])]);
        assert_eq!(ranked.iter().map(|c| c.members[0].as_str()).collect::<Vec<_>>(), ["d", "m", "a"]);
        assert!(rank_clusters(vec![]).is_empty());
        assert_eq!(rank_clusters(vec![mk(&["x"])]).len(), 1);
    }

    #[test]
    fn top_words_rank_by_frequency() {
        let p = vec![
            PoolMember { tweet_id: "a".into(), token_count: 3, selected: ["x", "y"].iter().map(|s| s.to_string()).collect() },
            PoolMember { tweet_id: "b".into(), token_count: 3, selected: ["y", "z"].iter().map(|s| s.to_string()).collect() },
        ];
        assert_eq!(top_words(&p, 2), ["y", "x"]);
    }
}
