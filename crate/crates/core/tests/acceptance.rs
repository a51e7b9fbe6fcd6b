//! Acceptance suite. Every test prints one `PASS`/`FAIL` line with its
//! runtime and budget, then asserts. Tests hold a shared lock so budgets are
//! measured without competing for the CPU.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tweetsense::bootstrap::ScheduleConfig;
use tweetsense::classifier::{Channels, WeightedTokens, CONTEXT_DECAY};
use tweetsense::encoder::{encoder_forward_backward, importance_scores, select_important};
use tweetsense::eval::CategoryMetrics;
use tweetsense::graph_cluster::{SlpaEngine, SpeakerRule};
use tweetsense::ontology::{NUM_CLASSES, NUM_EVENTS};
use tweetsense::pipeline::Predictor;
use tweetsense::synth::{desk_config, generate, SynthConfig};
use tweetsense::*;

static SERIAL: Mutex<()> = Mutex::new(());

struct Criterion {
    name: &'static str,
    budget: Duration,
    start: Instant,
    _guard: std::sync::MutexGuard<'static, ()>,
}

impl Criterion {
    fn begin(name: &'static str, budget_secs: u64) -> Self {
        let guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
        Criterion {
            name,
            budget: Duration::from_secs(budget_secs),
            start: Instant::now(),
            _guard: guard,
        }
    }

    /// Prints the verdict line; panics on failure.
    fn finish(self, failures: Vec<String>, detail: String) {
        let elapsed = self.start.elapsed();
        let in_time = elapsed <= self.budget;
        let ok = failures.is_empty() && in_time;
        let line = format!(
            "{} {:<24} {:>8.2}s / {:>4}s  {}",
            if ok { "PASS" } else { "FAIL" },
            self.name,
            elapsed.as_secs_f64(),
            self.budget.as_secs(),
            detail
        );
        // Written to the raw handle so the line shows even under capture.
        let _ = writeln!(std::io::stdout().lock(), "{line}");
        assert!(in_time, "{}: {:.2}s exceeds the {}s budget", self.name, elapsed.as_secs_f64(), self.budget.as_secs());
        assert!(failures.is_empty(), "{}: {} failure(s), first: {}", self.name, failures.len(), failures[..failures.len().min(8)].join("\n"));
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- importance

fn column_winners(rows: &[Vec<f64>]) -> Vec<usize> {
    let width = rows[0].len();
    (0..width)
        .map(|d| {
            let mut best = 0;
            for t in 1..rows.len() {
                if rows[t][d] > rows[best][d] {
                    best = t;
                }
            }
            best
        })
        .collect()
}

#[test]
fn importance_scores_suite() {
    let c = Criterion::begin("importance_scores", 5);
    let mut r = rng(1);
    let mut failures = Vec::new();
    let mut ties = 0;
    for case in 0..1000 {
        let t_len = r.random_range(1..=12);
        let width = 2 * r.random_range(1..=32);
        // A third of the cases use a coarse grid so that column ties occur.
        let coarse = case % 3 == 0;
        let rows: Vec<Vec<f64>> = (0..t_len)
            .map(|_| {
                (0..width)
                    .map(|_| {
                        if coarse {
                            r.random_range(-2..=2) as f64 * 0.5
                        } else {
                            r.random_range(-1.0..1.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let hidden = HiddenMatrix::from_rows(&rows).unwrap();
        let scores = importance_scores(&hidden);
        let winners = column_winners(&rows);
        let mut expected = vec![0.0; t_len];
        for &t in &winners {
            expected[t] += 1.0 / width as f64;
        }
        if coarse {
            ties += 1;
        }
        let sum: f64 = scores.iter().sum();
        if scores.len() != t_len || scores.iter().any(|&s| s < 0.0) {
            failures.push(format!("case {case}: negative or misshapen scores"));
        }
        if (sum - 1.0).abs() > 1e-9 {
            failures.push(format!("case {case}: scores sum to {sum}"));
        }
        if scores.iter().zip(&expected).any(|(a, b)| (a - b).abs() > 1e-12) {
            failures.push(format!("case {case}: scores differ from argmax counts"));
        }
        let tokens: Vec<String> = (0..t_len).map(|i| format!("w{i}")).collect();
        let selected = select_important(&tokens, &scores);
        if selected.is_empty() {
            failures.push(format!("case {case}: nothing selected"));
        }
        let oracle: BTreeSet<String> = (0..t_len)
            .filter(|&i| expected[i] * t_len as f64 >= 1.0 - 1e-12)
            .map(|i| tokens[i].clone())
            .collect();
        if selected != oracle {
            failures.push(format!("case {case}: selection {selected:?} != {oracle:?}"));
        }
    }
    c.finish(failures, format!("1000 matrices, {ties} on a tie-prone grid"));
}

// --------------------------------------------------------------------- graph

fn random_pool(r: &mut ChaCha8Rng, n: usize) -> Vec<PoolMember> {
    let vocab: Vec<String> = (0..r.random_range(8..40)).map(|i| format!("v{i}")).collect();
    (0..n)
        .map(|i| {
            let k = r.random_range(0..=6.min(vocab.len()));
            let selected: BTreeSet<String> = vocab.choose_multiple(r, k).cloned().collect();
            PoolMember {
                tweet_id: format!("t{i:04}"),
                token_count: selected.len() + r.random_range(0..8),
                selected,
            }
        })
        .collect()
}

#[test]
fn graph_oracle_suite() {
    let c = Criterion::begin("graph_oracle", 30);
    let mut r = rng(2);
    let mut failures = Vec::new();
    let mut total_edges = 0;
    let mut one_shared = 0;
    for case in 0..50 {
        let n = r.random_range(0..=200);
        let pool = random_pool(&mut r, n);
        let graph = build_graph(&pool);
        let mut expected = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let shared = pool[u].selected.iter().filter(|w| pool[v].selected.contains(*w)).count();
                if shared == 1 {
                    one_shared += 1;
                }
                if shared >= 2 {
                    let w = shared as f64 / (pool[u].token_count as f64 * pool[v].token_count as f64);
                    expected.push((u, v, w));
                }
            }
        }
        let got: Vec<(usize, usize, f64)> = graph.edges().collect();
        total_edges += got.len();
        if graph.nodes.iter().zip(&pool).any(|(a, m)| *a != m.tweet_id) || graph.node_count() != n {
            failures.push(format!("pool {case}: node list differs"));
        }
        if got.len() != expected.len()
            || got.iter().zip(&expected).any(|(a, b)| a.0 != b.0 || a.1 != b.1 || (a.2 - b.2).abs() > 1e-15)
        {
            failures.push(format!("pool {case}: {} edges, brute force {}", got.len(), expected.len()));
        }
        for u in 0..n {
            for &(v, w) in graph.neighbors(u) {
                if !graph.neighbors(v).contains(&(u, w)) {
                    failures.push(format!("pool {case}: asymmetric edge {u}-{v}"));
                }
            }
        }
    }
    c.finish(failures, format!("50 pools, {total_edges} edges, {one_shared} one-word pairs rejected"));
}

// ---------------------------------------------------------------------- slpa

fn planted_pool(r: &mut ChaCha8Rng) -> Vec<PoolMember> {
    let sense_a: Vec<String> = (0..10).map(|i| format!("a{i}")).collect();
    let sense_b: Vec<String> = (0..10).map(|i| format!("b{i}")).collect();
    let mut pool = Vec::new();
    for (s, vocab) in [&sense_a, &sense_b].into_iter().enumerate() {
        for i in 0..50 {
            let k = r.random_range(3..=5);
            let mut selected: BTreeSet<String> = vocab.choose_multiple(r, k).cloned().collect();
            selected.insert("keyword".into());
            pool.push(PoolMember {
                tweet_id: format!("{s}-{i:02}"),
                token_count: selected.len() + r.random_range(1..6),
                selected,
            });
        }
    }
    pool
}

#[test]
fn slpa_suite() {
    let c = Criterion::begin("slpa", 60);
    let mut failures = Vec::new();
    let config = SlpaConfig::default();

    let mut r = rng(3);
    let pool = planted_pool(&mut r);
    let graph = build_graph(&pool);
    let mut engine = SlpaEngine::new(&graph, SpeakerRule::Sample, 99);
    for it in 1..=config.iterations {
        engine.step();
        if (0..graph.node_count()).any(|n| engine.memory_sum(n) as usize != it + 1) {
            failures.push(format!("memory sum broken after iteration {it}"));
            break;
        }
    }
    if slpa_cluster(&graph, &pool, &config, 7) != slpa_cluster(&graph, &pool, &config, 7) {
        failures.push("same seed gave different clusters".into());
    }

    let mut recovered = 0;
    let mut worst = f64::INFINITY;
    for seed in 0..50u64 {
        let mut r = rng(1000 + seed);
        let pool = planted_pool(&mut r);
        let graph = build_graph(&pool);
        let clusters = slpa_cluster(&graph, &pool, &config, seed);
        let purity_of = |cl: &Cluster| {
            let a = cl.members.iter().filter(|m| m.starts_with("0-")).count();
            let major = a.max(cl.size() - a);
            (major as f64 / cl.size() as f64, a * 2 >= cl.size())
        };
        if clusters.len() < 2 {
            worst = worst.min(0.0);
            continue;
        }
        let (p0, s0) = purity_of(&clusters[0]);
        let (p1, s1) = purity_of(&clusters[1]);
        // Both senses must be found, each by a large and pure cluster.
        let ok = p0 >= 0.9 && p1 >= 0.9 && s0 != s1 && clusters[1].size() >= 25;
        worst = worst.min(p0.min(p1));
        if ok {
            recovered += 1;
        }
    }
    if recovered < 45 {
        failures.push(format!("planted senses recovered for {recovered}/50 seeds"));
    }
    c.finish(failures, format!("recovered {recovered}/50, worst purity {worst:.3}"));
}

// ----------------------------------------------------------------- gradients

fn vocab_table(r: &mut ChaCha8Rng, dim: usize) -> (EmbeddingTable, Vec<String>) {
    let words: Vec<String> = (0..12).map(|i| format!("g{i}")).collect();
    let seed = r.random();
    (EmbeddingTable::random(words.iter().cloned(), dim, seed), words)
}

fn sentence(r: &mut ChaCha8Rng, words: &[String], t_max: usize) -> Vec<String> {
    let n = r.random_range(1..=t_max);
    (0..n).map(|_| words.choose(r).unwrap().clone()).collect()
}

/// Central differences of an O(10) loss in f64 carry about 1e-9 absolute
/// noise, so magnitudes below `GRAD_FLOOR` are compared on that scale.
const GRAD_FLOOR: f64 = 1e-5;
const EPS: f64 = 1e-5;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(GRAD_FLOOR)
}

#[test]
fn gradient_check_suite() {
    let c = Criterion::begin("gradient_checks", 60);
    let mut r = rng(4);
    let mut failures = Vec::new();
    let mut max_err: f64 = 0.0;
    let mut checked = 0usize;
    let mut skipped = 0usize;
    let mut tiny = 0usize;

    for case in 0..100 {
        let h = r.random_range(1..=8);
        let d = r.random_range(1..=4);
        let (emb, words) = vocab_table(&mut r, d);

        // Encoder alone under a smooth loss of the pooled embedding.
        let mut enc = EncoderParams::seeded(EncoderRole::Target, d, h, r.random());
        let batch: Vec<(String, Vec<String>)> = (0..2).map(|i| (format!("e{i}"), sentence(&mut r, &words, 6))).collect();
        let coef: Vec<f64> = (0..2 * h).map(|_| r.random_range(-1.0..1.0)).collect();
        let loss_fn = |_: usize, e: &[f64]| {
            let l: f64 = e.iter().zip(&coef).map(|(x, c)| c * x + 0.5 * x * x).sum();
            (l, e.iter().zip(&coef).map(|(x, c)| c + x).collect())
        };
        let analytic = encoder_forward_backward(&enc, &emb, &batch, loss_fn).unwrap();
        let grads: Vec<f64> = analytic.grads.iter().copied().collect();
        let argmaxes = |p: &EncoderParams| -> Vec<Vec<usize>> {
            batch.iter().map(|(_, t)| p.trace(&emb, t).unwrap().argmax().to_vec()).collect()
        };
        let base = argmaxes(&enc);
        for (k, &g) in grads.iter().enumerate() {
            let orig = *enc.param_mut(k);
            *enc.param_mut(k) = orig + EPS;
            let plus = encoder_forward_backward(&enc, &emb, &batch, loss_fn).unwrap().loss;
            let kink_p = argmaxes(&enc) != base;
            *enc.param_mut(k) = orig - EPS;
            let minus = encoder_forward_backward(&enc, &emb, &batch, loss_fn).unwrap().loss;
            let kink_m = argmaxes(&enc) != base;
            *enc.param_mut(k) = orig;
            if kink_p || kink_m {
                skipped += 1;
                continue;
            }
            let e = rel_err(g, (plus - minus) / (2.0 * EPS));
            max_err = max_err.max(e);
            checked += 1;
            tiny += usize::from(g.abs() < GRAD_FLOOR);
            if e >= 1e-4 {
                failures.push(format!("case {case} encoder param {k}: rel err {e:.2e}"));
            }
        }

        // Full classifier: three channels, weighted contexts, class weights.
        let cfg = TrainConfig {
            hidden: h,
            seed: r.random(),
            channels: if case % 10 == 9 { Channels::target_only() } else { Channels::default() },
            ..TrainConfig::default()
        };
        let weights: Vec<f64> = (0..NUM_CLASSES).map(|_| r.random_range(0.2..2.0)).collect();
        let mut model = ModelCheckpoint::init(&cfg, d, weights);
        for b in model.output_bias.iter_mut() {
            *b = r.random_range(-0.5..0.5);
        }
        let bundle = ChannelBundle {
            tweet_id: "x".into(),
            target: sentence(&mut r, &words, 6),
            contexts: (0..r.random_range(0..=3))
                .map(|m| WeightedTokens {
                    tokens: sentence(&mut r, &words, 6),
                    weight: CONTEXT_DECAY.powi(r.random_range(0..30) + m),
                })
                .collect(),
            replies: (0..r.random_range(0..=3)).map(|_| sentence(&mut r, &words, 6)).collect(),
        };
        let labels: LabelSet = EventCategory::ALL.into_iter().filter(|_| r.random_bool(0.3)).collect::<LabelSet>().normalized();
        let (_, mg) = model.loss_and_grad(&emb, &bundle, labels).unwrap();
        let analytic: Vec<Vec<f64>> = mg.slices().iter().map(|s| s.to_vec()).collect();
        let model_argmax = |m: &ModelCheckpoint| -> Vec<Vec<usize>> {
            let mut out = vec![m.target.trace(&emb, &bundle.target).unwrap().argmax().to_vec()];
            out.extend(bundle.contexts.iter().map(|c| m.context.trace(&emb, &c.tokens).unwrap().argmax().to_vec()));
            out.extend(bundle.replies.iter().map(|t| m.reply.trace(&emb, t).unwrap().argmax().to_vec()));
            out
        };
        let base = model_argmax(&model);
        for (s, block) in analytic.iter().enumerate() {
            for (k, &g) in block.iter().enumerate() {
                let orig = model.params_mut()[s][k];
                model.params_mut()[s][k] = orig + EPS;
                let plus = model.loss(&emb, &bundle, labels).unwrap();
                let kink_p = s < 6 && model_argmax(&model) != base;
                model.params_mut()[s][k] = orig - EPS;
                let minus = model.loss(&emb, &bundle, labels).unwrap();
                let kink_m = s < 6 && model_argmax(&model) != base;
                model.params_mut()[s][k] = orig;
                if kink_p || kink_m {
                    skipped += 1;
                    continue;
                }
                let e = rel_err(g, (plus - minus) / (2.0 * EPS));
                max_err = max_err.max(e);
                checked += 1;
                tiny += usize::from(g.abs() < GRAD_FLOOR);
                if e >= 1e-4 {
                    failures.push(format!("case {case} classifier block {s} param {k}: rel err {e:.2e} a {g:e} n {:e}", (plus - minus) / (2.0 * EPS)));
                }
            }
        }
    }
    c.finish(
        failures,
        format!("{checked} coordinates ({tiny} below {GRAD_FLOOR:e}), max rel err {max_err:.2e}, {skipped} skipped at pooling kinks"),
    );
}

// ---------------------------------------------------------------- identities

#[test]
fn channel_identity_suite() {
    let c = Criterion::begin("channel_identities", 30);
    let mut r = rng(5);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let h = r.random_range(1..=8);
        let d = r.random_range(1..=6);
        let (emb, words) = vocab_table(&mut r, d);
        let cfg = TrainConfig {
            hidden: h,
            seed: r.random(),
            ..TrainConfig::default()
        };
        let model = ModelCheckpoint::init(&cfg, d, vec![1.0; NUM_CLASSES]);
        let shared = sentence(&mut r, &words, 8);
        let contexts: Vec<WeightedTokens> = (0..r.random_range(1..=5))
            .map(|_| WeightedTokens {
                tokens: shared.clone(),
                weight: 10f64.powf(r.random_range(-30.0..30.0)),
            })
            .collect();
        let bundle = ChannelBundle {
            tweet_id: "x".into(),
            target: sentence(&mut r, &words, 8),
            contexts,
            replies: (0..r.random_range(0..=5)).map(|_| sentence(&mut r, &words, 8)).collect(),
        };
        let f = model.features(&emb, &bundle).unwrap();
        let phi = model.context.trace(&emb, &shared).unwrap().embedding().to_vec();
        let dev = f[2 * h..4 * h].iter().zip(&phi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(dev);
        if dev > 1e-12 {
            failures.push(format!("case {case}: R2 deviates by {dev:e}"));
        }

        // Ablation: the target-only model is a logistic layer over R1 alone.
        let mut ablated = model.clone();
        ablated.config.channels = Channels::target_only();
        let phi_t = model.target.trace(&emb, &bundle.target).unwrap().embedding().to_vec();
        let width = 6 * h;
        let expected: Vec<f64> = (0..NUM_CLASSES)
            .map(|k| {
                let row = &model.output_weights[k * width..k * width + 2 * h];
                let z = model.output_bias[k] + row.iter().zip(&phi_t).map(|(w, x)| w * x).sum::<f64>();
                1.0 / (1.0 + (-z).exp())
            })
            .collect();
        let with_all = ablated.forward(&emb, &bundle).unwrap();
        let bare = ablated.forward(&emb, &ChannelBundle::target_only("x", bundle.target.clone())).unwrap();
        let full_bare = model.forward(&emb, &ChannelBundle::target_only("x", bundle.target.clone())).unwrap();
        if with_all != bare || bare != full_bare {
            failures.push(format!("case {case}: ablated scores depend on context or reply inputs"));
        }
        if bare.iter().zip(&expected).any(|(a, b)| (a - b).abs() > 1e-15) {
            failures.push(format!("case {case}: ablated scores differ from the target-only oracle"));
        }
        let labels = LabelSet::single(EventCategory::Pre);
        let (_, g) = ablated.loss_and_grad(&emb, &bundle, labels).unwrap();
        let s = g.slices();
        if s[2..6].iter().any(|b| b.iter().any(|&v| v != 0.0)) {
            failures.push(format!("case {case}: ablated channels receive gradient"));
        }
        let f = ablated.features(&emb, &bundle).unwrap();
        if f[2 * h..].iter().any(|&v| v != 0.0) {
            failures.push(format!("case {case}: ablated features are not zero"));
        }
    }
    c.finish(failures, format!("200 cases, max R2 deviation {worst:.1e}"));
}

// ----------------------------------------------------------------- bootstrap

fn toy_problem(r: &mut ChaCha8Rng, dim: usize) -> (EmbeddingTable, Vec<LabeledExample>, Vec<String>, HashMap<String, ChannelBundle>) {
    let words: Vec<String> = (0..30).map(|i| format!("b{i}")).collect();
    let emb = EmbeddingTable::random(words.iter().cloned(), dim, r.random());
    let mut bundles = HashMap::new();
    let mut labeled = Vec::new();
    let mut pool = Vec::new();
    for i in 0..400 {
        let id = format!("p{i:04}");
        let n = r.random_range(2..=6);
        let toks: Vec<String> = (0..n).map(|_| words.choose(r).unwrap().clone()).collect();
        bundles.insert(id.clone(), ChannelBundle::target_only(id.clone(), toks));
        if i < 40 {
            let cat = if i % 2 == 0 { EventCategory::Pre } else { EventCategory::Res };
            labeled.push(LabeledExample {
                tweet_id: id,
                labels: LabelSet::single(cat),
                provenance: Provenance::Seed,
            });
        } else {
            pool.push(id);
        }
    }
    (emb, labeled, pool, bundles)
}

#[test]
fn bootstrap_schedule_suite() {
    let c = Criterion::begin("bootstrap_schedule", 5);
    let mut failures = Vec::new();

    let mut state = BootstrapState::new(ScheduleConfig::default());
    let mut trace = Vec::new();
    for s in [150, 80, 120, 50, 90, 60, 40] {
        match state.advance(s) {
            Some(t) => trace.push(format!("{t}")),
            None => trace.push("terminated".into()),
        }
    }
    let expected = ["0.9", "0.8", "0.8", "0.7", "0.6", "0.5", "terminated"];
    if trace != expected || !state.terminated {
        failures.push(format!("threshold trace {trace:?}"));
    }

    let mut r = rng(6);
    let lexicon = KeywordLexicon::default();
    let (emb, labeled, pool, bundles) = toy_problem(&mut r, 4);
    let train = TrainConfig {
        hidden: 3,
        epochs: 2,
        learning_rate: 0.05,
        seed: 3,
        ..TrainConfig::default()
    };
    let config = BootstrapConfig {
        schedule: ScheduleConfig {
            min_selected: 40,
            ..ScheduleConfig::default()
        },
        train: train.clone(),
        dropout_rate: 0.2,
        lexicon: &lexicon,
        seed: 8,
    };

    let mut quiet = ModelCheckpoint::init(&train, 4, vec![1.0; NUM_CLASSES]);
    quiet.output_weights.iter_mut().for_each(|w| *w = 0.0);
    quiet.output_bias.iter_mut().for_each(|b| *b = -40.0);
    let out = bootstrap_run(&labeled, &pool, &bundles, &emb, &config, Some(quiet)).unwrap();
    let rounds = out.state.history.len();
    if rounds != 5 || out.state.history.iter().any(|h| h.selected != 0 || h.retrained) {
        failures.push(format!("quiet pool ran {rounds} rounds"));
    }
    let thresholds: Vec<f64> = out.state.history.iter().map(|h| h.threshold).collect();
    if thresholds != [0.9, 0.8, 0.7, 0.6, 0.5] {
        failures.push(format!("quiet thresholds {thresholds:?}"));
    }

    let mut selected_total = 0;
    let mut busy_rounds = 0;
    for seed in 0..3u64 {
        let mut eager = ModelCheckpoint::init(&TrainConfig { seed, ..train.clone() }, 4, vec![1.0; NUM_CLASSES]);
        eager.output_weights.iter_mut().for_each(|w| *w *= 8.0);
        eager.output_bias.iter_mut().for_each(|b| *b = 0.5);
        let out = bootstrap_run(&labeled, &pool, &bundles, &emb, &config, Some(eager)).unwrap();
        let labeled_ids: HashSet<&str> = labeled.iter().map(|e| e.tweet_id.as_str()).collect();
        let mut seen = HashSet::new();
        for h in &out.state.history {
            if h.selected > 0 {
                busy_rounds += 1;
            }
            for id in &h.selected_ids {
                if !seen.insert(id.clone()) || labeled_ids.contains(id.as_str()) {
                    failures.push(format!("seed {seed}: {id} selected twice"));
                }
            }
        }
        selected_total += seen.len();
    }
    if busy_rounds < 2 {
        failures.push("the eager runs never selected across rounds".into());
    }
    c.finish(failures, format!("trace {trace:?}; quiet rounds {rounds}; {selected_total} adoptions all distinct"));
}

// ---------------------------------------------------------------- end to end

fn run_synthetic(seed: u64, synth: &SynthConfig, epochs: Option<usize>) -> (tempfile::TempDir, BTreeMap<String, EvalReport>) {
    let dir = tempfile::tempdir().unwrap();
    generate(&SynthConfig { seed, ..synth.clone() }, &KeywordLexicon::default())
        .write_to(dir.path())
        .unwrap();
    let mut cfg = desk_config(seed);
    cfg.paths = cfg.paths.relative_to(dir.path());
    if let Some(e) = epochs {
        cfg.classifier.epochs = e;
    }
    let summary = Pipeline::open(cfg).unwrap().run_all().unwrap();
    (dir, summary.reports)
}

#[test]
fn end_to_end_synthetic_suite() {
    let c = Criterion::begin("end_to_end_synthetic", 600);
    let mut failures = Vec::new();
    let mut detail = Vec::new();
    for seed in 1..=3u64 {
        let (_dir, reports) = run_synthetic(seed, &SynthConfig::default(), None);
        let kw = &reports["keyword"];
        let sd = &reports["seed"];
        let fin = &reports["final"];
        let dp = 100.0 * (fin.macro_precision - kw.macro_precision);
        let dr = 100.0 * (fin.macro_recall - sd.macro_recall);
        detail.push(format!("seed {seed}: P {:+.1} vs keyword, R {:+.1} vs seed model", dp, dr));
        if dp < 15.0 {
            failures.push(format!("seed {seed}: precision gain {dp:.1} points"));
        }
        if dr < 2.0 {
            failures.push(format!("seed {seed}: recall gain {dr:.1} points"));
        }
    }
    c.finish(failures, detail.join("; "));
}

// ---------------------------------------------------------------- evaluation

fn random_labels(r: &mut ChaCha8Rng) -> LabelSet {
    EventCategory::EVENTS
        .into_iter()
        .filter(|_| r.random_bool(0.2))
        .collect::<LabelSet>()
        .normalized()
}

#[test]
fn evaluation_oracle_suite() {
    let c = Criterion::begin("evaluation_oracle", 10);
    let mut failures = Vec::new();
    let mut r = rng(8);
    for trial in 0..20 {
        let mut pred = BTreeMap::new();
        let mut gold = BTreeMap::new();
        for i in 0..200 {
            pred.insert(format!("t{i}"), random_labels(&mut r));
            gold.insert(format!("t{i}"), random_labels(&mut r));
        }
        let report = evaluate(&pred, &gold).unwrap();
        let mut macro_p = 0.0;
        let mut macro_r = 0.0;
        let mut macro_f = 0.0;
        for cat in EventCategory::ALL {
            let (mut tp, mut fp, mut fn_) = (0, 0, 0);
            for (id, g) in &gold {
                let p = pred[id];
                let in_p = p.iter().any(|x| x == cat);
                let in_g = g.iter().any(|x| x == cat);
                tp += usize::from(in_p && in_g);
                fp += usize::from(in_p && !in_g);
                fn_ += usize::from(!in_p && in_g);
            }
            let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
            let rc = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
            let f = if p + rc == 0.0 { 0.0 } else { 2.0 * p * rc / (p + rc) };
            let m: &CategoryMetrics = report.category(cat);
            if (m.tp, m.fp, m.fn_) != (tp, fp, fn_) || (m.precision - p).abs() > 1e-12 || (m.recall - rc).abs() > 1e-12 || (m.f1 - f).abs() > 1e-12 {
                failures.push(format!("trial {trial} {cat}: {m:?} vs ({tp}, {fp}, {fn_})"));
            }
            if cat.is_event() {
                macro_p += p / NUM_EVENTS as f64;
                macro_r += rc / NUM_EVENTS as f64;
                macro_f += f / NUM_EVENTS as f64;
            }
        }
        if (report.macro_precision - macro_p).abs() > 1e-12
            || (report.macro_recall - macro_r).abs() > 1e-12
            || (report.macro_f1 - macro_f).abs() > 1e-12
        {
            failures.push(format!("trial {trial}: macro averages differ"));
        }
    }

    let labels = |cs: &[EventCategory]| cs.iter().copied().collect::<LabelSet>();
    let pred = BTreeMap::from([
        ("a".to_string(), labels(&[EventCategory::Cas, EventCategory::Res])),
        ("b".to_string(), LabelSet::other()),
    ]);
    let gold = BTreeMap::from([
        ("a".to_string(), labels(&[EventCategory::Cas])),
        ("b".to_string(), labels(&[EventCategory::Res])),
    ]);
    let report = evaluate(&pred, &gold).unwrap();
    let cas = report.category(EventCategory::Cas);
    let res = report.category(EventCategory::Res);
    if (cas.precision, cas.recall, cas.f1) != (1.0, 1.0, 1.0) {
        failures.push(format!("hand example CAS: {cas:?}"));
    }
    if (res.precision, res.recall, res.f1, res.tp, res.fp, res.fn_) != (0.0, 0.0, 0.0, 0, 1, 1) {
        failures.push(format!("hand example RES: {res:?}"));
    }
    c.finish(failures, "20 x 200 random instances plus the two-message example".into());
}

// --------------------------------------------------------------- determinism

#[test]
fn determinism_suite() {
    let c = Criterion::begin("determinism", 300);
    let small = SynthConfig {
        train_keyword: 40,
        train_plain: 20,
        train_background: 800,
        test_background: 150,
        ..SynthConfig::default()
    };
    let (a, _) = run_synthetic(21, &small, Some(4));
    let (b, _) = run_synthetic(21, &small, Some(4));
    let read = |d: &tempfile::TempDir| std::fs::read_to_string(d.path().join("work").join(pipeline::MANIFEST_FILE)).unwrap();
    let (ma, mb) = (read(&a), read(&b));
    let mut failures = Vec::new();
    if ma != mb {
        failures.push("manifests differ".into());
    }
    let m: pipeline::Manifest = serde_json::from_str(&ma).unwrap();
    let outputs: usize = m.stages.values().map(|s| s.outputs.len()).sum();
    if m.stages.len() < 12 {
        failures.push(format!("only {} stages recorded", m.stages.len()));
    }
    let preds = |d: &tempfile::TempDir| std::fs::read(d.path().join("work").join(Predictor::Final.predictions().file)).unwrap();
    if preds(&a) != preds(&b) {
        failures.push("final predictions differ".into());
    }
    c.finish(failures, format!("{} stages, {outputs} output hashes identical", m.stages.len()));
}
