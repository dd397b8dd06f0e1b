//! Synthetic corpora and small dimension settings shared by the
//! acceptance suite.

use sentisarc::data::{Corpus, Dimensions, Sample};
use sentisarc_core::layers::EmbeddingTable;
use sentisarc_core::rng::Rng;

pub const POSITIVE: &[&str] = &["great", "wonderful", "lovely", "enjoy"];
pub const NEGATIVE: &[&str] = &["terrible", "awful", "boring", "hate"];
pub const MARKERS: &[&str] = &["yeah", "sure", "totally"];
pub const FILLERS: &[&str] = &["the", "movie", "day", "alarm", "monday"];

/// Dimensions small enough to train in seconds.
pub fn small_dims() -> Dimensions {
    Dimensions { d_g: 8, d_gru: 10, d_t: 6, d_ntn: 4, c: 2 }
}

/// Seeded random embedding table covering the whole synthetic vocabulary.
pub fn toy_table(d_g: usize) -> EmbeddingTable {
    let mut rng = Rng::seed_from(99);
    let entries = POSITIVE
        .iter()
        .chain(NEGATIVE)
        .chain(MARKERS)
        .chain(FILLERS)
        .map(|t| (t.to_string(), (0..d_g).map(|_| rng.uniform(-1.0, 1.0)).collect()))
        .collect();
    EmbeddingTable::new(entries, d_g).unwrap()
}

fn make_sample(id: usize, tokens: Vec<&str>, sentiment: usize, sarcasm: usize) -> Sample {
    let tokens: Vec<String> = tokens.into_iter().map(str::to_owned).collect();
    Sample { id: format!("syn{id}"), text: tokens.join(" "), tokens, sentiment, sarcasm }
}

/// A trivially separable corpus for the overfitting check: every label is a
/// deterministic function of which content words appear.
pub fn separable_corpus(n: usize) -> Corpus {
    let samples = (0..n)
        .map(|i| match i % 3 {
            0 => make_sample(i, vec!["great", "wonderful", "day"], 1, 0),
            1 => make_sample(i, vec!["terrible", "awful", "day"], 0, 0),
            _ => make_sample(i, vec!["great", "wonderful", "yeah", "alarm"], 0, 1),
        })
        .collect();
    Corpus::from_samples(samples).unwrap()
}

/// Corpus where sarcasm implies negative sentiment behind a positive
/// surface: sarcastic sentences use positive words plus a marker, and
/// markers also show up in some literal negatives so the marker alone
/// does not decide sentiment.
pub fn sarcasm_corpus(n: usize, seed: u64) -> Corpus {
    let mut rng = Rng::seed_from(seed);
    fn pick(rng: &mut Rng, set: &[&'static str]) -> &'static str {
        let i = (rng.uniform(0.0, set.len() as f64) as usize).min(set.len() - 1);
        set[i]
    }
    let samples = (0..n)
        .map(|i| match i % 3 {
            0 => {
                let tokens =
                    vec![pick(&mut rng, POSITIVE), pick(&mut rng, POSITIVE), pick(&mut rng, FILLERS)];
                make_sample(i, tokens, 1, 0)
            }
            1 => {
                let mut tokens =
                    vec![pick(&mut rng, NEGATIVE), pick(&mut rng, NEGATIVE), pick(&mut rng, FILLERS)];
                if rng.uniform(0.0, 1.0) < 0.2 {
                    tokens.push(pick(&mut rng, MARKERS));
                }
                make_sample(i, tokens, 0, 0)
            }
            _ => {
                let tokens = vec![
                    pick(&mut rng, POSITIVE),
                    pick(&mut rng, MARKERS),
                    pick(&mut rng, POSITIVE),
                    pick(&mut rng, FILLERS),
                ];
                make_sample(i, tokens, 0, 1)
            }
        })
        .collect();
    Corpus::from_samples(samples).unwrap()
}
