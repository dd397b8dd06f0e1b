use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use sentisarc::checkpoint;
use sentisarc::data::{
    self, Averaging, CorpusFormat, Dimensions,
};
use sentisarc::error::{Error, Result};
use sentisarc::manifest;
use sentisarc_core::models::{coerce, Model, ModelConfig, Variant};
use sentisarc_core::training::TrainConfig;

#[derive(Parser)]
#[command(name = "sentisarc", version, about = "Joint sentiment and sarcasm classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a source-release corpus to the canonical csv layout
    Prepare {
        /// Input file (csv, or tsv by extension)
        input: PathBuf,
        /// Output canonical csv
        output: PathBuf,
    },
    /// Train one model on the full corpus and write a checkpoint
    Train(RunArgs),
    /// Stratified k-fold cross-validation; prints a per-task metrics table
    Crossval(RunArgs),
    /// Predict labels for text from a checkpoint
    Predict {
        /// Checkpoint produced by `train`
        #[arg(long)]
        checkpoint: PathBuf,
        /// GloVe text file; must hash to the vectors used at training time
        #[arg(long)]
        glove: PathBuf,
        /// Sentence to classify
        text: String,
    },
    /// Print per-token attention weights for a sentence
    Attention {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        glove: PathBuf,
        text: String,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Corpus csv with columns id, text, sentiment, sarcasm
    #[arg(long)]
    corpus: PathBuf,
    /// GloVe text file
    #[arg(long)]
    glove: PathBuf,
    /// Optional toml config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model variant
    #[arg(long)]
    variant: Option<String>,
    /// Cross-validation folds
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sentiment loss weight
    #[arg(long)]
    w_sen: Option<f64>,
    /// Sarcasm loss weight
    #[arg(long)]
    w_sar: Option<f64>,
    /// Metric averaging: weighted or macro
    #[arg(long)]
    averaging: Option<String>,
    /// Concurrent fold workers
    #[arg(long)]
    jobs: Option<usize>,
    /// Where to write the checkpoint (train) or report json (crossval)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Where to write the run manifest json
    #[arg(long)]
    manifest: Option<PathBuf>,
}

/// Optional toml config; any field a flag also sets.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    variant: Option<String>,
    folds: Option<usize>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    seed: Option<u64>,
    w_sen: Option<f64>,
    w_sar: Option<f64>,
    averaging: Option<String>,
    jobs: Option<usize>,
    d_g: Option<usize>,
    d_gru: Option<usize>,
    d_t: Option<usize>,
    d_ntn: Option<usize>,
}

struct ResolvedRun {
    variant: Variant,
    dims: Dimensions,
    train_cfg: TrainConfig,
    folds: usize,
    averaging: Averaging,
    jobs: usize,
}

fn parse_averaging(s: &str) -> Result<Averaging> {
    match s {
        "weighted" => Ok(Averaging::Weighted),
        "macro" => Ok(Averaging::Macro),
        other => Err(Error::Core(sentisarc_core::Error::Config(format!(
            "unknown averaging '{other}' (expected weighted or macro)"
        )))),
    }
}

fn resolve(args: &RunArgs) -> Result<ResolvedRun> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str(&text).map_err(|e| {
                Error::Core(sentisarc_core::Error::Config(format!(
                    "{}: {e}",
                    path.display()
                )))
            })?
        }
        None => FileConfig::default(),
    };
    let variant_name = args
        .variant
        .clone()
        .or(file.variant)
        .unwrap_or_else(|| "multitask-fusion-shared-attention".into());
    let variant = Variant::parse(&variant_name)?;
    let defaults = Dimensions::default();
    let dims = Dimensions {
        d_g: file.d_g.unwrap_or(defaults.d_g),
        d_gru: file.d_gru.unwrap_or(defaults.d_gru),
        d_t: file.d_t.unwrap_or(defaults.d_t),
        d_ntn: file.d_ntn.unwrap_or(defaults.d_ntn),
        c: 2,
    };
    let base = TrainConfig::default();
    let train_cfg = TrainConfig {
        epochs: args.epochs.or(file.epochs).unwrap_or(base.epochs),
        batch_size: args.batch_size.or(file.batch_size).unwrap_or(base.batch_size),
        learning_rate: args
            .learning_rate
            .or(file.learning_rate)
            .unwrap_or(base.learning_rate),
        seed: args.seed.or(file.seed).unwrap_or(base.seed),
        w_sen: args.w_sen.or(file.w_sen).unwrap_or(base.w_sen),
        w_sar: args.w_sar.or(file.w_sar).unwrap_or(base.w_sar),
        ..base
    };
    let averaging = parse_averaging(
        args.averaging
            .clone()
            .or(file.averaging)
            .unwrap_or_else(|| "weighted".into())
            .as_str(),
    )?;
    Ok(ResolvedRun {
        variant,
        dims,
        train_cfg,
        folds: args.folds.or(file.folds).unwrap_or(10),
        averaging,
        jobs: args.jobs.or(file.jobs).unwrap_or(1),
    })
}

fn load_inputs(
    corpus_path: &Path,
    glove_path: &Path,
    d_g: usize,
) -> Result<(data::Corpus, sentisarc_core::layers::EmbeddingTable)> {
    let corpus = data::load_corpus(corpus_path, CorpusFormat::from_path(corpus_path))?;
    let vocab = corpus.vocabulary();
    let (table, stats) = data::load_glove(glove_path, &vocab, d_g)?;
    eprintln!(
        "corpus: {} samples, L = {}, {} positive, {} sarcastic",
        corpus.len(),
        corpus.l,
        corpus.positives(),
        corpus.sarcastic()
    );
    eprintln!(
        "embeddings: {}/{} vocabulary tokens covered ({:.1}%)",
        stats.found, stats.vocabulary, stats.coverage_percent
    );
    Ok((corpus, table))
}

fn write_run_manifest(args: &RunArgs, run: &ResolvedRun) -> Result<()> {
    if let Some(path) = &args.manifest {
        let m = manifest::build_manifest(
            run.variant.name(),
            &run.dims,
            &run.train_cfg,
            run.folds,
            run.averaging,
            run.jobs,
            &args.corpus,
            &args.glove,
        )?;
        manifest::write_manifest(path, &m)?;
        eprintln!("manifest written to {}", path.display());
    }
    Ok(())
}

fn cmd_train(args: &RunArgs) -> Result<()> {
    let run = resolve(args)?;
    if run.variant == Variant::Coerced {
        return Err(Error::Core(sentisarc_core::Error::Config(
            "the coerced variant has no single checkpoint; train its two standalone models".into(),
        )));
    }
    let (corpus, table) = load_inputs(&args.corpus, &args.glove, run.dims.d_g)?;
    let samples: Vec<_> = corpus
        .samples
        .iter()
        .map(|s| sentisarc_core::training::TrainSample {
            tokens: s.tokens.clone(),
            sentiment: Some(s.sentiment),
            sarcasm: Some(s.sarcasm),
        })
        .collect();
    let config: ModelConfig =
        run.dims.to_model_config(run.variant, corpus.l, run.train_cfg.seed);
    let mut model = Model::build(config)?;
    let trace = sentisarc_core::training::train(&mut model, &samples, &table, &run.train_cfg)?;
    for record in &trace {
        let fmt_loss = |l: Option<f64>| match l {
            Some(v) => format!("{v:.6}"),
            None => "--".to_string(),
        };
        eprintln!(
            "epoch {:>3}  joint {:.6}  sentiment {}  sarcasm {}",
            record.epoch,
            record.joint,
            fmt_loss(record.j_sen),
            fmt_loss(record.j_sar)
        );
    }
    let output = args
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.ckpt", run.variant.name())));
    checkpoint::save(&output, &model, &table)?;
    write_run_manifest(args, &run)?;
    println!("checkpoint written to {}", output.display());
    Ok(())
}

fn cmd_crossval(args: &RunArgs) -> Result<()> {
    let run = resolve(args)?;
    let (corpus, table) = load_inputs(&args.corpus, &args.glove, run.dims.d_g)?;
    let cv = data::cross_validate(
        run.variant,
        &corpus,
        &table,
        &run.dims,
        &run.train_cfg,
        run.folds,
        run.averaging,
        run.jobs,
    )?;
    print!("{}", cv.report.render());
    if let Some(path) = &args.output {
        std::fs::write(path, serde_json::to_string_pretty(&cv.report)?)
            .map_err(|e| Error::io(path, e))?;
        eprintln!("report written to {}", path.display());
    }
    write_run_manifest(args, &run)?;
    Ok(())
}

fn load_for_inference(
    ckpt: &Path,
    glove: &Path,
) -> Result<(Model, sentisarc_core::layers::EmbeddingTable)> {
    let (model, header) = checkpoint::load(ckpt)?;
    let vocab = header.vocab.iter().cloned().collect();
    let (table, _) = data::load_glove(glove, &vocab, model.config.d_g)?;
    checkpoint::verify_vocab(&header, &table)?;
    Ok((model, table))
}

fn cmd_predict(ckpt: &Path, glove: &Path, text: &str) -> Result<()> {
    let (model, table) = load_for_inference(ckpt, glove)?;
    let tokens = data::tokenize(text)?;
    let out = model.forward(&tokens, &table)?;
    if let (Some(label), Some(probs)) = (out.label_sen, &out.probs_sen) {
        let name = if let Some(sar) = out.label_sar {
            // report the coerced label when a sarcasm head is present
            let c = coerce(label, sar);
            if c == 1 { "positive" } else { "negative" }
        } else if label == 1 {
            "positive"
        } else {
            "negative"
        };
        println!("sentiment: {name}  p(neg)={:.4} p(pos)={:.4}", probs[0], probs[1]);
    }
    if let (Some(label), Some(probs)) = (out.label_sar, &out.probs_sar) {
        let name = if label == 1 { "sarcastic" } else { "literal" };
        println!("sarcasm:   {name}  p(no)={:.4} p(yes)={:.4}", probs[0], probs[1]);
    }
    Ok(())
}

fn cmd_attention(ckpt: &Path, glove: &Path, text: &str) -> Result<()> {
    let (model, table) = load_for_inference(ckpt, glove)?;
    if !model.config.variant.has_attention() {
        return Err(Error::Core(sentisarc_core::Error::Config(format!(
            "variant {} has no attention layer",
            model.config.variant
        ))));
    }
    let tokens = data::tokenize(text)?;
    let out = model.forward(&tokens, &table)?;
    let print_weights = |task: &str, alpha: &Option<Vec<f64>>| {
        if let Some(alpha) = alpha {
            println!("{task}:");
            for (token, weight) in tokens.iter().zip(alpha) {
                println!("  {token:<20} {weight:.4}");
            }
        }
    };
    print_weights("sentiment attention", &out.alpha_sen);
    print_weights("sarcasm attention", &out.alpha_sar);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Prepare { input, output } => {
            let rows = data::prepare(input, output, CorpusFormat::from_path(input))?;
            println!("wrote {rows} samples to {}", output.display());
            Ok(())
        }
        Command::Train(args) => cmd_train(args),
        Command::Crossval(args) => cmd_crossval(args),
        Command::Predict { checkpoint, glove, text } => cmd_predict(checkpoint, glove, text),
        Command::Attention { checkpoint, glove, text } => cmd_attention(checkpoint, glove, text),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
