use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use prochart_core::classifier::{
    self, generate_corpus, EmbeddingProvider, HashingEmbedder, LabeledCorpus, SavedModel, TrainConfig,
};
use prochart_core::refine::Mode;
use prochart_core::segment::parse_replay;
use prochart_core::session::{
    compute_metrics, embedder_for, parse_labeled, parse_log, replay, replay_labeled, write_log, Engine,
    SessionConfig, SessionSettings, SESSION_KEYWORDS,
};

mod serve;

#[derive(Parser)]
#[command(name = "prochart", version, about = "Conversational chart assistant over station climate data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(name = "P", alias = "p", alias = "proactive")]
    P,
    #[value(name = "NP", alias = "np", alias = "non-proactive")]
    Np,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::P => Mode::Proactive,
            ModeArg::Np => Mode::NonProactive,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the seeded synthetic corpus as TSV.
    GenCorpus {
        #[arg(long, default_value_t = classifier::corpus::SHIPPED_CORPUS_SEED)]
        seed: u64,
        #[arg(long, default_value_t = classifier::corpus::SHIPPED_CORPUS_PER_CLASS)]
        per_class: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the utterance classifier and write a checkpoint.
    Train {
        /// A labelled TSV file, or `synthetic` for the seeded corpus.
        #[arg(long, default_value = "synthetic")]
        corpus: String,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy and confusion matrix of a checkpoint on a corpus.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "synthetic")]
        corpus: String,
        /// Environment variable with the key for a remote embedding model.
        #[arg(long)]
        api_key_env: Option<String>,
    },
    /// Run a recorded transcript through a fresh session.
    Replay {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        transcript: PathBuf,
        /// Overrides the configured mode.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// The transcript carries a label column; skip segmentation and
        /// classification.
        #[arg(long)]
        gold_labels: bool,
        #[arg(long)]
        log_out: Option<PathBuf>,
        #[arg(long)]
        metrics_out: Option<PathBuf>,
        /// Omit wall-clock stamps from the log.
        #[arg(long)]
        no_wall_clock: bool,
    },
    /// Session metrics of an existing event log.
    Metrics {
        #[arg(long)]
        log: PathBuf,
    },
    /// Serve one live session over a websocket at /ws.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8765")]
        addr: String,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
}

fn load_corpus(spec: &str, seed: u64) -> Result<LabeledCorpus> {
    if spec == "synthetic" {
        return Ok(generate_corpus(seed, classifier::corpus::SHIPPED_CORPUS_PER_CLASS));
    }
    LabeledCorpus::load(spec).with_context(|| format!("reading corpus {spec}"))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn train(corpus: &str, seed: u64, out: &Path) -> Result<()> {
    let corpus = load_corpus(corpus, seed)?;
    let embedder = HashingEmbedder::default();
    let cfg = TrainConfig::with_seed(seed);
    let started = Instant::now();
    let report = classifier::train(&corpus, &embedder, &cfg)?;
    for e in &report.epochs {
        println!("epoch {:>2}  train {:.4}  val {:.4}", e.epoch, e.train_loss, e.val_loss);
    }
    let sel = *report.selected();
    let eval = classifier::test_accuracy(&report, &corpus, &embedder)?;
    println!(
        "selected epoch {} (val {:.4}); test accuracy {:.4}; {:.1}s",
        sel.epoch,
        sel.val_loss,
        eval.accuracy,
        started.elapsed().as_secs_f64()
    );
    let saved = SavedModel {
        model: report.model,
        embedding: embedder.descriptor(),
        train_config: cfg,
        stats: sel,
    };
    saved.save(out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn eval(model: &Path, corpus: &str, api_key_env: Option<&str>) -> Result<()> {
    let saved = SavedModel::load(model).with_context(|| format!("loading {}", model.display()))?;
    let key = api_key_env.and_then(|v| std::env::var(v).ok());
    let embedder = embedder_for(&saved.embedding, key)?;
    let corpus = load_corpus(corpus, saved.train_config.seed)?;
    let report = classifier::evaluate(&saved.model, embedder.as_ref(), &corpus.examples)?;
    print!("{}", report.render());
    Ok(())
}

fn engine_for(config: &Path, mode: Option<ModeArg>) -> Result<(SessionConfig, Arc<Engine>)> {
    let mut cfg = SessionConfig::load(config)?;
    if let Some(m) = mode {
        cfg.mode = m.into();
    }
    let engine = Engine::from_config(&cfg).context("building the session engine")?;
    Ok((cfg, Arc::new(engine)))
}

#[allow(clippy::too_many_arguments)]
fn run_replay(
    config: &Path,
    transcript: &Path,
    mode: Option<ModeArg>,
    gold: bool,
    log_out: Option<&Path>,
    metrics_out: Option<&Path>,
    no_wall_clock: bool,
) -> Result<()> {
    let (cfg, engine) = engine_for(config, mode)?;
    let mut settings = SessionSettings::from(&cfg);
    settings.wall_clock = !no_wall_clock;
    let text = fs::read_to_string(transcript).with_context(|| format!("reading {}", transcript.display()))?;
    let log = if gold {
        replay_labeled(engine, settings, &parse_labeled(&text)?)
    } else {
        replay(engine, settings, &parse_replay(text.as_bytes())?)?
    };
    let jsonl = write_log(&log);
    match log_out {
        Some(p) => fs::write(p, &jsonl).with_context(|| format!("writing {}", p.display()))?,
        None if metrics_out.is_none() => print!("{jsonl}"),
        None => {}
    }
    if let Some(p) = metrics_out {
        write_json(p, &compute_metrics(&log, &SESSION_KEYWORDS))?;
    }
    let charts = log.iter().filter(|e| e.kind() == "chart_generated").count();
    eprintln!("{} events, {} charts", log.len(), charts);
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::GenCorpus { seed, per_class, out } => {
            if per_class == 0 {
                bail!("--per-class must be positive");
            }
            fs::write(&out, generate_corpus(seed, per_class).to_tsv())?;
            println!("wrote {} examples to {}", per_class * 3, out.display());
        }
        Command::Train { corpus, seed, out } => train(&corpus, seed, &out)?,
        Command::Eval { model, corpus, api_key_env } => eval(&model, &corpus, api_key_env.as_deref())?,
        Command::Replay {
            config,
            transcript,
            mode,
            gold_labels,
            log_out,
            metrics_out,
            no_wall_clock,
        } => run_replay(
            &config,
            &transcript,
            mode,
            gold_labels,
            log_out.as_deref(),
            metrics_out.as_deref(),
            no_wall_clock,
        )?,
        Command::Metrics { log } => {
            let text = fs::read_to_string(&log).with_context(|| format!("reading {}", log.display()))?;
            let events = parse_log(&text)?;
            println!("{}", serde_json::to_string_pretty(&compute_metrics(&events, &SESSION_KEYWORDS))?);
        }
        Command::Serve { config, addr, mode } => {
            let (cfg, engine) = engine_for(&config, mode)?;
            serve::run(engine, SessionSettings::from(&cfg), &addr)?;
        }
    }
    Ok(())
}
