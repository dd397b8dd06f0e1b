//! Corpus ingestion, tokenization, GloVe loading, stratified k-fold
//! splitting, metric computation, and the cross-validation harness.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use sentisarc_core::layers::EmbeddingTable;
use sentisarc_core::models::{coerce, Model, ModelConfig, Variant};
use sentisarc_core::rng::Rng;
use sentisarc_core::training::{train, EpochRecord, TrainConfig, TrainSample};

use crate::error::{Error, Result};

/// One labeled sentence. Sentiment: 0 negative, 1 positive. Sarcasm: 1 yes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub sentiment: usize,
    pub sarcasm: usize,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub samples: Vec<Sample>,
    /// Token count of the longest sentence; the padded length L.
    pub l: usize,
}

impl Corpus {
    pub fn from_samples(samples: Vec<Sample>) -> Result<Corpus> {
        if samples.is_empty() {
            return Err(Error::Schema("corpus contains no samples".into()));
        }
        let l = samples.iter().map(|s| s.tokens.len()).max().unwrap_or(0);
        Ok(Corpus { samples, l })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.samples.iter().filter(|s| s.sentiment == 1).count()
    }

    pub fn sarcastic(&self) -> usize {
        self.samples.iter().filter(|s| s.sarcasm == 1).count()
    }

    /// All distinct tokens, sorted.
    pub fn vocabulary(&self) -> BTreeSet<String> {
        self.samples.iter().flat_map(|s| s.tokens.iter().cloned()).collect()
    }
}

/// Lowercase, split punctuation into standalone tokens, then split on
/// whitespace. Idempotent on its own space-joined output.
pub fn tokenize(text: &str) -> Result<Vec<String>> {
    if text.trim().is_empty() {
        return Err(Error::Core(sentisarc_core::Error::Input(
            "tokenize: whitespace-only text".into(),
        )));
    }
    let mut spaced = String::with_capacity(text.len() + 8);
    for ch in text.to_lowercase().chars() {
        if ch.is_ascii_punctuation() {
            spaced.push(' ');
            spaced.push(ch);
            spaced.push(' ');
        } else {
            spaced.push(ch);
        }
    }
    Ok(spaced.split_whitespace().map(str::to_owned).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Csv,
    Tsv,
}

impl CorpusFormat {
    pub fn delimiter(&self) -> u8 {
        match self {
            CorpusFormat::Csv => b',',
            CorpusFormat::Tsv => b'\t',
        }
    }

    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") => CorpusFormat::Tsv,
            _ => CorpusFormat::Csv,
        }
    }
}

fn parse_binary_label(raw: &str, id: &str, column: &str) -> Result<usize> {
    match raw.trim().to_lowercase().as_str() {
        "0" | "no" | "false" | "negative" | "neg" | "n" => Ok(0),
        "1" | "yes" | "true" | "positive" | "pos" | "y" => Ok(1),
        other => Err(Error::Schema(format!(
            "sample '{id}': non-binary {column} label '{other}'"
        ))),
    }
}

/// Load a canonical corpus file: delimited text with header columns
/// id, text, sentiment, sarcasm (labels 0/1). Any other columns — e.g.
/// gaze measurements carried over from the source release — are ignored.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .flexible(false)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| {
                Error::Schema(format!(
                    "missing column '{name}'; found columns: {:?}",
                    headers.iter().collect::<Vec<_>>()
                ))
            })
    };
    let (ci, ct, csen, csar) = (col("id")?, col("text")?, col("sentiment")?, col("sarcasm")?);
    let mut samples = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let id = record.get(ci).unwrap_or("").to_string();
        let text = record.get(ct).unwrap_or("").to_string();
        let tokens = tokenize(&text).map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: line + 2,
            message: format!("sample '{id}' has empty text"),
        })?;
        let sentiment = parse_binary_label(record.get(csen).unwrap_or(""), &id, "sentiment")?;
        let sarcasm = parse_binary_label(record.get(csar).unwrap_or(""), &id, "sarcasm")?;
        samples.push(Sample { id, text, tokens, sentiment, sarcasm });
    }
    Corpus::from_samples(samples)
}

/// Convert a source-release corpus file to the canonical layout
/// (columns id, text, sentiment, sarcasm), dropping everything else —
/// notably per-word gaze/fixation measurement columns. Column names are
/// matched loosely ("Sentence ID", "sarcasm_label", etc.).
pub fn prepare(input: &Path, output: &Path, format: CorpusFormat) -> Result<usize> {
    let file = File::open(input).map_err(|e| Error::io(input, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .flexible(true)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let normalize = |h: &str| {
        h.trim()
            .to_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
    };
    let find = |candidates: &[&str], label: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| candidates.contains(&normalize(h).as_str()))
            .ok_or_else(|| {
                Error::Schema(format!(
                    "no column recognizable as {label}; found columns: {:?}",
                    headers.iter().collect::<Vec<_>>()
                ))
            })
    };
    let ci = find(&["id", "sentenceid", "sentid", "textid"], "id")?;
    let ct = find(&["text", "sentence", "sentencetext"], "text")?;
    let csen = find(&["sentiment", "sentimentlabel", "polarity"], "sentiment")?;
    let csar = find(&["sarcasm", "sarcasmlabel", "irony"], "sarcasm")?;

    let out = File::create(output).map_err(|e| Error::io(output, e))?;
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["id", "text", "sentiment", "sarcasm"])?;
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record?;
        let id = record.get(ci).unwrap_or("").trim();
        let sen = parse_binary_label(record.get(csen).unwrap_or(""), id, "sentiment")?;
        let sar = parse_binary_label(record.get(csar).unwrap_or(""), id, "sarcasm")?;
        writer.write_record([
            id,
            record.get(ct).unwrap_or("").trim(),
            &sen.to_string(),
            &sar.to_string(),
        ])?;
        rows += 1;
    }
    writer.flush().map_err(|e| Error::io(output, e))?;
    if rows == 0 {
        return Err(Error::Schema(format!("{}: no data rows", input.display())));
    }
    Ok(rows)
}

/// Coverage statistics from restricting a GloVe file to a vocabulary.
#[derive(Debug, Clone, Serialize)]
pub struct GloveStats {
    pub vocabulary: usize,
    pub found: usize,
    pub coverage_percent: f64,
}

/// Load a GloVe text file (token followed by `dim` decimals per line),
/// keeping only rows for tokens in `vocabulary`.
pub fn load_glove(
    path: &Path,
    vocabulary: &BTreeSet<String>,
    dim: usize,
) -> Result<(EmbeddingTable, GloveStats)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: "empty line".into(),
        })?;
        if !vocabulary.contains(token) || seen.contains(token) {
            // still validate dimensionality lazily only for kept rows
            continue;
        }
        let values: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: format!("bad number '{p}': {e}"),
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("expected {dim} dimensions, found {}", values.len()),
            });
        }
        seen.insert(token.to_string());
        entries.push((token.to_string(), values));
    }
    let found = entries.len();
    let table = EmbeddingTable::new(entries, dim)?;
    let stats = GloveStats {
        vocabulary: vocabulary.len(),
        found,
        coverage_percent: if vocabulary.is_empty() {
            0.0
        } else {
            100.0 * found as f64 / vocabulary.len() as f64
        },
    };
    Ok((table, stats))
}

// ── fold planning ────────────────────────────────────────────────────

/// A stratified k-way partition of corpus indices.
#[derive(Debug, Clone, Serialize)]
pub struct FoldPlan {
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
    /// Stratification key: the joint (sentiment, sarcasm) pair.
    pub stratified: bool,
}

/// Stratified k-fold partition over the joint (sentiment, sarcasm) label.
/// A single round-robin pointer runs across the shuffled label groups, so
/// fold sizes differ by at most one and each group spreads evenly.
pub fn make_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 || corpus.len() < k {
        return Err(Error::Core(sentisarc_core::Error::Input(format!(
            "make_folds: corpus of {} samples cannot be split into {k} folds",
            corpus.len()
        ))));
    }
    let mut groups: [Vec<usize>; 4] = Default::default();
    for (i, s) in corpus.samples.iter().enumerate() {
        groups[s.sentiment * 2 + s.sarcasm].push(i);
    }
    let mut rng = Rng::seed_from(seed);
    let mut folds = vec![Vec::new(); k];
    let mut cursor = 0usize;
    for group in &mut groups {
        rng.shuffle(group);
        for &idx in group.iter() {
            folds[cursor % k].push(idx);
            cursor += 1;
        }
    }
    Ok(FoldPlan { folds, seed, stratified: true })
}

// ── evaluation ───────────────────────────────────────────────────────

/// How per-class precision/recall/F combine into a task score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Averaging {
    /// Weighted by gold class support.
    Weighted,
    /// Unweighted mean over classes.
    Macro,
}

impl fmt::Display for Averaging {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Averaging::Weighted => "weighted",
            Averaging::Macro => "macro",
        })
    }
}

/// Task metrics as percentages.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

/// Precision/recall/F from the binary confusion matrix, combined across
/// classes per the chosen averaging. Reported as percentages.
pub fn evaluate(predictions: &[usize], gold: &[usize], averaging: Averaging) -> Result<TaskMetrics> {
    if predictions.len() != gold.len() {
        return Err(Error::Core(sentisarc_core::Error::Input(format!(
            "evaluate: {} predictions vs {} gold labels",
            predictions.len(),
            gold.len()
        ))));
    }
    if predictions.is_empty() {
        return Err(Error::Core(sentisarc_core::Error::Input(
            "evaluate: empty prediction list".into(),
        )));
    }
    let classes = 2usize;
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fn_ = vec![0usize; classes];
    let mut support = vec![0usize; classes];
    for (&p, &g) in predictions.iter().zip(gold) {
        support[g] += 1;
        if p == g {
            tp[g] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let mut precision = 0.0;
    let mut recall = 0.0;
    let mut f_score = 0.0;
    let total: usize = support.iter().sum();
    for c in 0..classes {
        let p = ratio(tp[c], tp[c] + fp[c]);
        let r = ratio(tp[c], tp[c] + fn_[c]);
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        let weight = match averaging {
            Averaging::Weighted => support[c] as f64 / total as f64,
            Averaging::Macro => 1.0 / classes as f64,
        };
        precision += weight * p;
        recall += weight * r;
        f_score += weight * f;
    }
    Ok(TaskMetrics {
        precision: 100.0 * precision,
        recall: 100.0 * recall,
        f_score: 100.0 * f_score,
    })
}

/// Per-task scores averaged over folds, mirroring one results-table row.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub variant: String,
    pub sentiment: Option<TaskMetrics>,
    pub sarcasm: Option<TaskMetrics>,
    /// Mean of the two task F-scores, when both tasks are evaluated.
    pub average_f: Option<f64>,
    pub folds: usize,
    pub seed: u64,
    pub stratified: bool,
    pub averaging: Averaging,
}

impl EvalReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("variant: {}\n", self.variant));
        out.push_str(&format!(
            "folds: {}  seed: {}  stratified: {}  averaging: {}\n",
            self.folds, self.seed, self.stratified, self.averaging
        ));
        out.push_str("task       precision   recall    f-score\n");
        let row = |name: &str, m: &TaskMetrics| {
            format!("{name:<10} {:>9.2} {:>8.2} {:>10.2}\n", m.precision, m.recall, m.f_score)
        };
        match &self.sentiment {
            Some(m) => out.push_str(&row("sentiment", m)),
            None => out.push_str("sentiment         --       --         --\n"),
        }
        match &self.sarcasm {
            Some(m) => out.push_str(&row("sarcasm", m)),
            None => out.push_str("sarcasm           --       --         --\n"),
        }
        match self.average_f {
            Some(f) => out.push_str(&format!("average f-score: {f:.2}\n")),
            None => out.push_str("average f-score: --\n"),
        }
        out
    }
}

fn mean_metrics(per_fold: &[TaskMetrics]) -> TaskMetrics {
    let n = per_fold.len() as f64;
    TaskMetrics {
        precision: per_fold.iter().map(|m| m.precision).sum::<f64>() / n,
        recall: per_fold.iter().map(|m| m.recall).sum::<f64>() / n,
        f_score: per_fold.iter().map(|m| m.f_score).sum::<f64>() / n,
    }
}

/// Dimension settings shared by every fold's model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dimensions {
    pub d_g: usize,
    pub d_gru: usize,
    pub d_t: usize,
    pub d_ntn: usize,
    pub c: usize,
}

impl Default for Dimensions {
    fn default() -> Self {
        Dimensions { d_g: 300, d_gru: 500, d_t: 300, d_ntn: 100, c: 2 }
    }
}

impl Dimensions {
    pub fn to_model_config(&self, variant: Variant, l: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            variant,
            d_g: self.d_g,
            d_gru: self.d_gru,
            d_t: self.d_t,
            d_ntn: self.d_ntn,
            c: self.c,
            l,
            seed,
        }
    }
}

/// Trained models and loss traces of one cross-validation fold.
pub struct FoldOutcome {
    pub fold: usize,
    /// One model for ordinary variants; sentiment + sarcasm standalones for
    /// the coerced composition.
    pub models: Vec<Model>,
    pub traces: Vec<Vec<EpochRecord>>,
    pub sentiment: Option<TaskMetrics>,
    pub sarcasm: Option<TaskMetrics>,
}

pub struct CrossValidation {
    pub report: EvalReport,
    pub outcomes: Vec<FoldOutcome>,
}

fn train_samples(corpus: &Corpus, indices: &[usize]) -> Vec<TrainSample> {
    indices
        .iter()
        .map(|&i| {
            let s = &corpus.samples[i];
            TrainSample {
                tokens: s.tokens.clone(),
                sentiment: Some(s.sentiment),
                sarcasm: Some(s.sarcasm),
            }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    variant: Variant,
    corpus: &Corpus,
    table: &EmbeddingTable,
    dims: &Dimensions,
    train_cfg: &TrainConfig,
    plan: &FoldPlan,
    fold: usize,
    averaging: Averaging,
) -> Result<FoldOutcome> {
    let test_idx = &plan.folds[fold];
    let train_idx: Vec<usize> = plan
        .folds
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != fold)
        .flat_map(|(_, f)| f.iter().copied())
        .collect();
    let samples = train_samples(corpus, &train_idx);
    let fold_seed = train_cfg.seed.wrapping_add(fold as u64);
    let fold_train_cfg = TrainConfig { seed: fold_seed, ..train_cfg.clone() };

    let variants_to_train: Vec<Variant> = if variant == Variant::Coerced {
        vec![Variant::StandaloneSentiment, Variant::StandaloneSarcasm]
    } else {
        vec![variant]
    };
    let mut models = Vec::new();
    let mut traces = Vec::new();
    for v in variants_to_train {
        let mut model = Model::build(dims.to_model_config(v, corpus.l, fold_seed))?;
        let trace = train(&mut model, &samples, table, &fold_train_cfg)?;
        traces.push(trace);
        models.push(model);
    }

    let gold_sen: Vec<usize> = test_idx.iter().map(|&i| corpus.samples[i].sentiment).collect();
    let gold_sar: Vec<usize> = test_idx.iter().map(|&i| corpus.samples[i].sarcasm).collect();
    let mut pred_sen = Vec::new();
    let mut pred_sar = Vec::new();
    for &i in test_idx {
        let tokens = &corpus.samples[i].tokens;
        if variant == Variant::Coerced {
            let sen = models[0].forward(tokens, table)?.label_sen.expect("sentiment head");
            let sar = models[1].forward(tokens, table)?.label_sar.expect("sarcasm head");
            pred_sen.push(coerce(sen, sar));
        } else {
            let out = models[0].forward(tokens, table)?;
            if let Some(l) = out.label_sen {
                pred_sen.push(l);
            }
            if let Some(l) = out.label_sar {
                pred_sar.push(l);
            }
        }
    }
    let sentiment = (!pred_sen.is_empty())
        .then(|| evaluate(&pred_sen, &gold_sen, averaging))
        .transpose()?;
    let sarcasm = (!pred_sar.is_empty())
        .then(|| evaluate(&pred_sar, &gold_sar, averaging))
        .transpose()?;
    Ok(FoldOutcome { fold, models, traces, sentiment, sarcasm })
}

/// k-fold cross-validation: train on k−1 folds, test on the held-out fold,
/// average metrics over folds. `jobs` caps concurrent fold workers; results
/// are identical for any jobs value.
#[allow(clippy::too_many_arguments)]
pub fn cross_validate(
    variant: Variant,
    corpus: &Corpus,
    table: &EmbeddingTable,
    dims: &Dimensions,
    train_cfg: &TrainConfig,
    k: usize,
    averaging: Averaging,
    jobs: usize,
) -> Result<CrossValidation> {
    let plan = make_folds(corpus, k, train_cfg.seed)?;
    let jobs = jobs.max(1);
    let mut outcomes: Vec<Option<FoldOutcome>> = (0..k).map(|_| None).collect();
    for chunk_start in (0..k).step_by(jobs) {
        let chunk_end = (chunk_start + jobs).min(k);
        let results: Vec<Result<FoldOutcome>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (chunk_start..chunk_end)
                .map(|fold| {
                    let plan = &plan;
                    scope.spawn(move || {
                        run_fold(variant, corpus, table, dims, train_cfg, plan, fold, averaging)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("fold worker panicked")).collect()
        });
        for (i, r) in results.into_iter().enumerate() {
            outcomes[chunk_start + i] = Some(r?);
        }
    }
    let outcomes: Vec<FoldOutcome> = outcomes.into_iter().map(|o| o.unwrap()).collect();

    let sen_folds: Vec<TaskMetrics> = outcomes.iter().filter_map(|o| o.sentiment).collect();
    let sar_folds: Vec<TaskMetrics> = outcomes.iter().filter_map(|o| o.sarcasm).collect();
    let sentiment = (!sen_folds.is_empty()).then(|| mean_metrics(&sen_folds));
    let sarcasm = (!sar_folds.is_empty()).then(|| mean_metrics(&sar_folds));
    let average_f = match (&sentiment, &sarcasm) {
        (Some(a), Some(b)) => Some((a.f_score + b.f_score) / 2.0),
        _ => None,
    };
    Ok(CrossValidation {
        report: EvalReport {
            variant: variant.name().to_string(),
            sentiment,
            sarcasm,
            average_f,
            folds: k,
            seed: train_cfg.seed,
            stratified: plan.stratified,
            averaging,
        },
        outcomes,
    })
}
