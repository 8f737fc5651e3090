use std::collections::HashMap;
use std::hash::Hash;

use serde::Serialize;

use super::{Checkpoint, EncodedPair};
use crate::error::{Error, Result};
use crate::model::{generate, sequence_nll, EvalEcMode, ExtEdParams, Mode, ModelConfig};

/// `exp(total NLL / total targets)`, teacher-forced, EOS counted once per
/// response. Per-pair terms are summed in id order so the value does not
/// depend on corpus order.
pub fn perplexity(p: &ExtEdParams, cfg: &ModelConfig, data: &[EncodedPair], ec_mode: EvalEcMode) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Input("perplexity of an empty corpus".into()));
    }
    let mut terms = Vec::with_capacity(data.len());
    for pair in data {
        let (nll, n) = sequence_nll(p, &pair.example, pair.ec.as_ref(), cfg, ec_mode)
            .map_err(|e| annotate(e, &pair.id))?;
        terms.push((pair.id.as_str(), nll, n));
    }
    terms.sort_by(|a, b| a.0.cmp(b.0));
    let (nll, tokens) = terms
        .iter()
        .fold((0.0, 0usize), |(s, t), &(_, nll, n)| (s + nll, t + n));
    Ok((nll / tokens as f64).exp())
}

fn annotate(e: Error, id: &str) -> Error {
    match e {
        Error::Input(msg) => Error::Input(format!("pair {id:?}: {msg}")),
        other => other,
    }
}

fn ngram_counts<T: Eq + Hash>(seq: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut m = HashMap::new();
    if seq.len() >= n {
        for w in seq.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Sentence-level BLEU-4.
///
/// Modified n-gram precision for n = 1..4, with add-one smoothing of both
/// numerator and denominator for n >= 2, geometric mean, times the brevity
/// penalty `exp(min(0, 1 - |ref| / |hyp|))`. An empty hypothesis scores 0.
pub fn bleu4<T: Eq + Hash>(hypothesis: &[T], reference: &[T]) -> f64 {
    if hypothesis.is_empty() {
        return 0.0;
    }
    let mut product = 1.0;
    for n in 1..=4 {
        let hyp = ngram_counts(hypothesis, n);
        let refc = ngram_counts(reference, n);
        let total = hypothesis.len().saturating_sub(n - 1);
        let matched: usize = hyp
            .iter()
            .map(|(g, &c)| c.min(refc.get(g).copied().unwrap_or(0)))
            .sum();
        let precision = if n == 1 {
            matched as f64 / total as f64
        } else {
            (matched + 1) as f64 / (total + 1) as f64
        };
        product *= precision;
    }
    let bp = (1.0 - reference.len() as f64 / hypothesis.len() as f64).min(0.0).exp();
    bp * product.powf(0.25)
}

/// Mean sentence BLEU-4 of greedy generations against the references,
/// summed in id order.
pub fn corpus_bleu4(
    p: &ExtEdParams,
    cfg: &ModelConfig,
    data: &[EncodedPair],
    ec_mode: EvalEcMode,
    max_len: usize,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Input("BLEU of an empty corpus".into()));
    }
    let gen_cfg = ModelConfig {
        eval_ec_mode: ec_mode,
        ..cfg.clone()
    };
    let mut scores = Vec::with_capacity(data.len());
    for pair in data {
        let hyp = generate(p, &pair.example.context, max_len, &gen_cfg, pair.ec.as_ref())
            .map_err(|e| annotate(e, &pair.id))?;
        scores.push((pair.id.as_str(), bleu4(&hyp, &pair.example.response)));
    }
    scores.sort_by(|a, b| a.0.cmp(b.0));
    Ok(scores.iter().map(|s| s.1).sum::<f64>() / scores.len() as f64)
}

/// One checkpoint to evaluate, under a display label.
pub struct ReportEntry<'a> {
    pub label: String,
    pub checkpoint: &'a Checkpoint,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub mode: String,
    pub ppl: f64,
    pub bleu4: f64,
}

/// Perplexity and BLEU-4 per model. Vanilla checkpoints give one row;
/// external-context checkpoints give a row under their configured eval ec
/// mode and an `_ablation` row evaluated with the zero vector.
pub fn evaluate_report(entries: &[ReportEntry<'_>], data: &[EncodedPair], max_len: usize) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for entry in entries {
        let cfg = &entry.checkpoint.config;
        let p = &entry.checkpoint.params;
        let mut modes = vec![(entry.label.clone(), cfg.eval_ec_mode)];
        if cfg.mode != Mode::Vanilla {
            modes.push((format!("{}_ablation", entry.label), EvalEcMode::Zero));
        }
        for (label, ec_mode) in modes {
            rows.push(ReportRow {
                mode: label,
                ppl: perplexity(p, cfg, data, ec_mode)?,
                bleu4: corpus_bleu4(p, cfg, data, ec_mode, max_len)?,
            });
        }
    }
    Ok(rows)
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut s = String::from("mode,ppl,bleu4\n");
    for r in rows {
        s.push_str(&format!("{},{},{}\n", r.mode, r.ppl, r.bleu4));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identity_is_one() {
        let s = t("the quick brown fox jumps");
        assert_eq!(bleu4(&s, &s), 1.0);
    }

    #[test]
    fn hand_computed_example() {
        let b = bleu4(&t("a b c d"), &t("a b c e"));
        let want = (0.75f64 * 0.75 * (2.0 / 3.0) * 0.5).powf(0.25);
        assert_eq!(b, want);
        assert!((b - 0.6580).abs() < 5e-5);
    }

    #[test]
    fn no_overlap_is_small() {
        assert!(bleu4(&t("w x y z"), &t("a b c d")) < 0.1);
    }

    #[test]
    fn empty_hypothesis_is_zero() {
        assert_eq!(bleu4::<&str>(&[], &t("a b")), 0.0);
    }

    #[test]
    fn brevity_penalty_applies() {
        let b = bleu4(&t("a b c d"), &t("a b c d e f g h"));
        assert!((b - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn relabeling_invariance() {
        let hyp = t("a b a c d a");
        let reference = t("a b c d a b");
        let map = |s: &[&str]| s.iter().map(|w| format!("tok_{}", w.len() * 7 + w.as_bytes()[0] as usize)).collect::<Vec<_>>();
        assert_eq!(bleu4(&hyp, &reference), bleu4(&map(&hyp), &map(&reference)));
    }
}
