//! Argument parsing and subcommand dispatch.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 internal error.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::{Arc, RwLock};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tweetsense::synth::{desk_config, generate, SynthConfig};
use tweetsense::{Error, ErrorClass, KeywordLexicon, Pipeline, PipelineConfig, Predictor};

use crate::server;

#[derive(Debug, Parser)]
#[command(name = "tweetsense", version, about = "Weakly supervised event recognition for short messages")]
pub struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, short, global = true, env = "TWEETSENSE_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub overrides: Overrides,

    /// Log more (repeat for debug output).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

/// Flags that take precedence over the configuration file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// Base seed of every random choice; replaces the configured one.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "TWEETSENSE_WORKDIR")]
    pub workdir: Option<PathBuf>,
    #[arg(long, global = true, env = "TWEETSENSE_CORPUS")]
    pub corpus: Option<PathBuf>,
    #[arg(long, global = true, env = "TWEETSENSE_EMBEDDINGS")]
    pub embeddings: Option<PathBuf>,
    #[arg(long, global = true, env = "TWEETSENSE_LEXICON")]
    pub lexicon: Option<PathBuf>,
    #[arg(long, global = true, env = "TWEETSENSE_GOLD")]
    pub gold: Option<PathBuf>,
    #[arg(long, global = true, env = "TWEETSENSE_TRUTH")]
    pub truth: Option<PathBuf>,
    /// Classifier training epochs.
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Classifier learning rate.
    #[arg(long, global = true)]
    pub learning_rate: Option<f64>,
    /// Decision threshold on class probabilities.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Classifier hidden units per direction.
    #[arg(long, global = true)]
    pub hidden: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Seed,
    Final,
}

impl From<ModelArg> for Predictor {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Seed => Predictor::Seed,
            ModelArg::Final => Predictor::Final,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineKind {
    Keyword,
    Slpa,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize the raw stream into a corpus snapshot.
    Ingest,
    /// Score word importance and collect per-category keyword pools.
    SelectWords,
    /// Build the similarity graph of every keyword pool.
    BuildGraph,
    /// Cluster every graph with SLPA.
    Cluster,
    /// Serve the annotation API, or answer every queue from the truth file.
    AnnotateServe {
        /// Decide clusters from the truth labels instead of serving.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Turn the decision journal into the cleaned labeled set.
    AssembleLabels,
    /// Train the seed classifier.
    Train,
    /// Grow the labeled set by self-training.
    Bootstrap,
    /// Classify the target messages.
    Predict {
        #[arg(long, value_enum, default_value = "final")]
        model: ModelArg,
    },
    /// Score predictions against the gold labels.
    Evaluate {
        #[arg(long, value_enum, default_value = "final")]
        model: ModelArg,
    },
    /// Predict and score a baseline.
    Baseline {
        #[arg(value_enum)]
        kind: BaselineKind,
    },
    /// Hourly per-category counts of the final predictions.
    Trend,
    /// Write a synthetic corpus and a matching configuration file.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage with the oracle annotator.
    Pipeline,
    /// Print the effective configuration.
    Config,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.class() {
            ErrorClass::Usage => 1,
            ErrorClass::Data => 2,
            ErrorClass::Internal => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

impl Cli {
    /// The configuration file (or `--seed` alone) with flag overrides applied.
    pub fn effective_config(&self) -> Result<PipelineConfig, Failure> {
        let o = &self.overrides;
        let mut cfg = match (&self.config, o.seed) {
            (Some(p), _) => PipelineConfig::load(p)?,
            (None, Some(seed)) => PipelineConfig::new(seed),
            (None, None) => return Err(usage("a seed is required: pass --config FILE or --seed N")),
        };
        if let Some(s) = o.seed {
            cfg.seed = s;
        }
        let p = &mut cfg.paths;
        let set = |dst: &mut PathBuf, src: &Option<PathBuf>| {
            if let Some(v) = src {
                *dst = v.clone();
            }
        };
        set(&mut p.workdir, &o.workdir);
        set(&mut p.corpus, &o.corpus);
        set(&mut p.embeddings, &o.embeddings);
        if o.lexicon.is_some() {
            p.lexicon = o.lexicon.clone();
        }
        if o.gold.is_some() {
            p.gold = o.gold.clone();
        }
        if o.truth.is_some() {
            p.truth = o.truth.clone();
        }
        let c = &mut cfg.classifier;
        c.epochs = o.epochs.unwrap_or(c.epochs);
        c.learning_rate = o.learning_rate.unwrap_or(c.learning_rate);
        c.threshold = o.threshold.unwrap_or(c.threshold);
        c.hidden = o.hidden.unwrap_or(c.hidden);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `args` and runs the command, printing errors to stderr.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let mut out = std::io::stdout().lock();
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(&cli, &mut out))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(3),
    }
}

fn io(e: std::io::Error) -> Failure {
    Error::from(e).into()
}

fn eval_line(out: &mut dyn Write, name: &str, r: &tweetsense::EvalReport) -> Result<(), Failure> {
    writeln!(
        out,
        "{name}: macro P {:.1} R {:.1} F1 {:.1}",
        100.0 * r.macro_precision,
        100.0 * r.macro_recall,
        100.0 * r.macro_f1
    )
    .map_err(io)
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    if let Command::Synth { out: dir } = &cli.command {
        return synth(cli.overrides.seed.unwrap_or(1), dir, out);
    }
    let cfg = cli.effective_config()?;
    if let Command::Config = cli.command {
        return write!(out, "{}", cfg.to_toml()?).map_err(io);
    }
    let p = Pipeline::open(cfg)?;
    match &cli.command {
        Command::Ingest => {
            let r = p.ingest()?;
            writeln!(
                out,
                "accepted {}; skipped {} malformed, {} duplicates; {} dangling replies",
                r.accepted, r.malformed, r.duplicates, r.dangling_replies
            )
            .map_err(io)?;
        }
        Command::SelectWords => {
            for (c, pool) in p.select_words()? {
                writeln!(out, "{c}\t{} messages\t{} keywords", pool.tweets.len(), pool.by_keyword.len()).map_err(io)?;
            }
        }
        Command::BuildGraph => {
            for (c, units) in p.build_graphs()? {
                let nodes: usize = units.iter().map(|u| u.graph.node_count()).sum();
                let edges: usize = units.iter().map(|u| u.graph.edge_count()).sum();
                writeln!(out, "{c}\t{} graphs\t{nodes} nodes\t{edges} edges", units.len()).map_err(io)?;
            }
        }
        Command::Cluster => {
            for (c, cl) in p.cluster()? {
                writeln!(out, "{c}\t{} clusters", cl.len()).map_err(io)?;
            }
        }
        Command::AnnotateServe { oracle: true, .. } => {
            let n = p.annotate_oracle(None)?;
            writeln!(out, "recorded {n} decisions").map_err(io)?;
        }
        Command::AnnotateServe { oracle: false, addr } => serve(&p, *addr, out)?,
        Command::AssembleLabels => {
            let (labeled, report) = p.assemble_labels()?;
            writeln!(
                out,
                "{} labeled messages; removed {} of {} keyword messages",
                labeled.len(),
                report.total_removed(),
                report.total_keyword_tweets()
            )
            .map_err(io)?;
            for w in &report.warnings {
                writeln!(out, "warning: {w}").map_err(io)?;
            }
        }
        Command::Train => {
            let (_, r) = p.train()?;
            writeln!(out, "final epoch loss {:.6}", r.epoch_losses.last().copied().unwrap_or(f64::NAN)).map_err(io)?;
        }
        Command::Bootstrap => {
            for r in p.bootstrap()? {
                writeln!(out, "round {}\tthreshold {:.1}\tselected {}", r.round, r.threshold, r.selected).map_err(io)?;
            }
        }
        Command::Predict { model } => {
            let preds = p.predict((*model).into())?;
            writeln!(out, "{} predictions", preds.len()).map_err(io)?;
        }
        Command::Evaluate { model } => {
            let r = p.evaluate((*model).into())?;
            write!(out, "{}", r.to_table()).map_err(io)?;
        }
        Command::Baseline { kind } => {
            let which = match kind {
                BaselineKind::Keyword => {
                    p.baseline_keyword()?;
                    Predictor::Keyword
                }
                BaselineKind::Slpa => {
                    p.baseline_slpa()?;
                    Predictor::Slpa
                }
            };
            if p.config().paths.gold.is_some() {
                let r = p.evaluate(which)?;
                write!(out, "{}", r.to_table()).map_err(io)?;
            }
        }
        Command::Trend => {
            write!(out, "{}", p.trend()?).map_err(io)?;
        }
        Command::Pipeline => {
            let s = p.run_all()?;
            writeln!(out, "{} decisions, {} bootstrap rounds", s.decisions, s.rounds).map_err(io)?;
            for (name, r) in &s.reports {
                eval_line(out, name, r)?;
            }
        }
        Command::Synth { .. } | Command::Config => unreachable!("handled above"),
    }
    Ok(())
}

fn synth(seed: u64, dir: &std::path::Path, out: &mut dyn Write) -> Result<(), Failure> {
    let corpus = generate(
        &SynthConfig {
            seed,
            ..SynthConfig::default()
        },
        &KeywordLexicon::default(),
    );
    corpus.write_to(dir)?;
    let cfg_path = dir.join("tweetsense.toml");
    std::fs::write(&cfg_path, desk_config(seed).to_toml()?).map_err(io)?;
    writeln!(
        out,
        "wrote {} messages and {} to {}",
        corpus.tweets.len(),
        cfg_path.display(),
        dir.display()
    )
    .map_err(io)
}

fn serve(p: &Pipeline, addr: SocketAddr, out: &mut dyn Write) -> Result<(), Failure> {
    let service = Arc::new(RwLock::new(p.annotation_service()?));
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(io)?;
    let listener = rt.block_on(tokio::net::TcpListener::bind(addr)).map_err(io)?;
    writeln!(out, "listening on http://{}", listener.local_addr().map_err(io)?).map_err(io)?;
    out.flush().map_err(io)?;
    rt.block_on(async {
        axum::serve(listener, server::router(service))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
    .map_err(io)?;
    p.record_annotation(Vec::new())?;
    Ok(())
}
