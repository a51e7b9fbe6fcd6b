//! Seeded fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tweetsense::classifier::{class_weights, ChannelBundle, WeightedTokens};
use tweetsense::ontology::NUM_CLASSES;
use tweetsense::{EmbeddingTable, PoolMember};

pub fn vocabulary(size: usize) -> Vec<String> {
    (0..size).map(|i| format!("w{i}")).collect()
}

/// A keyword pool whose members draw selected words from a few overlapping
/// topics, so the graph has realistic clustered structure.
pub fn pool(members: usize, seed: u64) -> Vec<PoolMember> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topics = 12;
    let per_topic = 25;
    (0..members)
        .map(|i| {
            let topic = rng.random_range(0..topics);
            let picks = rng.random_range(2..7);
            let selected = (0..picks)
                .map(|_| format!("w{}", topic * per_topic + rng.random_range(0..per_topic)))
                .collect::<std::collections::BTreeSet<_>>();
            PoolMember {
                tweet_id: format!("t{i:06}"),
                token_count: selected.len() + rng.random_range(3..15),
                selected,
            }
        })
        .collect()
}

pub fn embeddings(vocab: &[String], dim: usize, seed: u64) -> EmbeddingTable {
    EmbeddingTable::random(vocab.iter(), dim, seed)
}

pub fn sentence(vocab: &[String], len: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    (0..len).map(|_| vocab[rng.random_range(0..vocab.len())].clone()).collect()
}

/// A message with a full set of five contexts and five replies.
pub fn bundle(vocab: &[String], len: usize, seed: u64) -> ChannelBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ChannelBundle {
        tweet_id: "bench".into(),
        target: sentence(vocab, len, &mut rng),
        contexts: (0..5)
            .map(|m| WeightedTokens {
                tokens: sentence(vocab, len, &mut rng),
                weight: 0.8f64.powi(m),
            })
            .collect(),
        replies: (0..5).map(|_| sentence(vocab, len, &mut rng)).collect(),
    }
}

pub fn uniform_class_weights() -> Vec<f64> {
    class_weights(&[1; NUM_CLASSES])
}
