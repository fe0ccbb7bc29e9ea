//! Evaluation metrics: subtoken F1, ROUGE-N, ROUGE-L, and corpus BLEU.
//!
//! Preprocessing is fixed across the toolkit: tokens are lowercased, with
//! no stemming and no stop-word removal. Corpus-level F1/ROUGE scores are
//! means of per-sample scores; BLEU is corpus-level by definition.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Corpus-level scores, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub f1: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    pub bleu: f64,
}

impl MetricReport {
    /// All scores as display lines, BLEU scaled by 100.
    pub fn display_lines(&self) -> Vec<String> {
        vec![
            format!("f1 {:.4}", self.f1),
            format!("rouge1 {:.4}", self.rouge1),
            format!("rouge2 {:.4}", self.rouge2),
            format!("rougeL {:.4}", self.rouge_l),
            format!("bleu {:.2}", self.bleu * 100.0),
        ]
    }
}

fn normalize(tokens: &[String]) -> Vec<String> {
    tokens.iter().map(|t| t.to_lowercase()).collect()
}

fn counts(tokens: &[String]) -> HashMap<&str, usize> {
    let mut map = HashMap::new();
    for t in tokens {
        *map.entry(t.as_str()).or_insert(0) += 1;
    }
    map
}

/// Multiset precision/recall/F1 over subtokens. Empty vs empty counts as a
/// perfect match; one-sided empty as a complete miss.
pub fn f1_subtoken(predicted: &[String], reference: &[String]) -> (f64, f64, f64) {
    let predicted = normalize(predicted);
    let reference = normalize(reference);
    if predicted.is_empty() && reference.is_empty() {
        return (1.0, 1.0, 1.0);
    }
    if predicted.is_empty() || reference.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let pred_counts = counts(&predicted);
    let ref_counts = counts(&reference);
    let mut overlap = 0usize;
    for (tok, &c) in &pred_counts {
        if let Some(&r) = ref_counts.get(tok) {
            overlap += c.min(r);
        }
    }
    let precision = overlap as f64 / predicted.len() as f64;
    let recall = overlap as f64 / reference.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f1)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut map = HashMap::new();
    if n == 0 || tokens.len() < n {
        return map;
    }
    for w in tokens.windows(n) {
        let key: Vec<&str> = w.iter().map(String::as_str).collect();
        *map.entry(key).or_insert(0) += 1;
    }
    map
}

/// ROUGE-N F-score from clipped n-gram multiset overlap. Zero when either
/// side has no n-grams.
pub fn rouge_n(candidate: &[String], reference: &[String], n: usize) -> f64 {
    assert!(n >= 1, "rouge_n needs n >= 1");
    let candidate = normalize(candidate);
    let reference = normalize(reference);
    let cand = ngram_counts(&candidate, n);
    let refs = ngram_counts(&reference, n);
    let cand_total: usize = cand.values().sum();
    let ref_total: usize = refs.values().sum();
    if cand_total == 0 || ref_total == 0 {
        return 0.0;
    }
    let mut overlap = 0usize;
    for (gram, &c) in &cand {
        if let Some(&r) = refs.get(gram) {
            overlap += c.min(r);
        }
    }
    let p = overlap as f64 / cand_total as f64;
    let r = overlap as f64 / ref_total as f64;
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// ROUGE-L F-score from the longest common subsequence.
pub fn rouge_l(candidate: &[String], reference: &[String]) -> f64 {
    let candidate = normalize(candidate);
    let reference = normalize(reference);
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(&candidate, &reference) as f64;
    let p = lcs / candidate.len() as f64;
    let r = lcs / reference.len() as f64;
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Corpus BLEU-4: geometric mean of clipped 1..4-gram precisions with a
/// brevity penalty. Higher orders with zero matches get add-one smoothing
/// so one unlucky order cannot zero the whole score; a corpus with no
/// unigram overlap at all scores 0.
pub fn bleu(candidates: &[Vec<String>], references: &[Vec<String>]) -> Result<f64, MetricError> {
    if candidates.len() != references.len() {
        return Err(MetricError::CorpusSizeMismatch {
            candidates: candidates.len(),
            references: references.len(),
        });
    }
    if candidates.is_empty() {
        return Ok(0.0);
    }
    let candidates: Vec<Vec<String>> = candidates.iter().map(|c| normalize(c)).collect();
    let references: Vec<Vec<String>> = references.iter().map(|r| normalize(r)).collect();

    let mut cand_len = 0usize;
    let mut ref_len = 0usize;
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    for (cand, reference) in candidates.iter().zip(&references) {
        cand_len += cand.len();
        ref_len += reference.len();
        for n in 1..=4 {
            let cand_grams = ngram_counts(cand, n);
            let ref_grams = ngram_counts(reference, n);
            totals[n - 1] += cand_grams.values().sum::<usize>();
            for (gram, &c) in &cand_grams {
                if let Some(&r) = ref_grams.get(gram) {
                    matches[n - 1] += c.min(r);
                }
            }
        }
    }

    if matches[0] == 0 {
        // No unigram overlap anywhere in the corpus.
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 0..4 {
        let p = if totals[n] == 0 {
            // Candidates too short for this order everywhere: neutral.
            1.0
        } else if matches[n] == 0 {
            // Add-one smoothing for empty higher-order counts.
            1.0 / (totals[n] as f64 + 1.0)
        } else {
            matches[n] as f64 / totals[n] as f64
        };
        log_sum += p.ln();
    }
    let geo_mean = (log_sum / 4.0).exp();
    let bp = if cand_len >= ref_len || cand_len == 0 {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    Ok((bp * geo_mean).min(1.0))
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("corpus size mismatch: {candidates} candidates vs {references} references")]
    CorpusSizeMismatch {
        candidates: usize,
        references: usize,
    },
}

/// Evaluates a whole corpus of (prediction, reference) token sequences.
pub fn evaluate_corpus(
    predictions: &[Vec<String>],
    references: &[Vec<String>],
) -> Result<MetricReport, MetricError> {
    if predictions.len() != references.len() {
        return Err(MetricError::CorpusSizeMismatch {
            candidates: predictions.len(),
            references: references.len(),
        });
    }
    let n = predictions.len().max(1) as f64;
    let mut f1 = 0.0;
    let mut r1 = 0.0;
    let mut r2 = 0.0;
    let mut rl = 0.0;
    for (p, r) in predictions.iter().zip(references) {
        f1 += f1_subtoken(p, r).2;
        r1 += rouge_n(p, r, 1);
        r2 += rouge_n(p, r, 2);
        rl += rouge_l(p, r);
    }
    Ok(MetricReport {
        f1: f1 / n,
        rouge1: r1 / n,
        rouge2: r2 / n,
        rouge_l: rl / n,
        bleu: bleu(predictions, references)?,
    })
}
