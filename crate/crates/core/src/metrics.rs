//! Text-generation metrics: BLEU, ROUGE-1/2/L and CIDEr-D, plus macro F1.
//!
//! All metrics share [`tokenize`]: lowercase, then every maximal run of
//! alphanumeric characters is a token (whitespace and punctuation separate
//! tokens and are dropped). BLEU and ROUGE use the 0–100 scale, CIDEr-D
//! the conventional ×10 scale.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub use crate::classifier::Evaluation;
use crate::error::{Error, Result};

/// Bumped whenever [`tokenize`] changes behavior.
pub const TOKENIZER_VERSION: u32 = 1;

const CIDER_SIGMA: f64 = 6.0;
const CIDER_MAX_N: usize = 4;

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

type Counts = HashMap<Vec<String>, usize>;

fn ngrams(tokens: &[String], n: usize) -> Counts {
    let mut out = Counts::new();
    if n == 0 || tokens.len() < n {
        return out;
    }
    for w in tokens.windows(n) {
        *out.entry(w.to_vec()).or_insert(0) += 1;
    }
    out
}

/// Clipped matches and total candidate n-grams of order `n`; clipping uses
/// the maximum count over references.
fn clipped(cand: &[String], refs: &[Vec<String>], n: usize) -> (usize, usize) {
    let c = ngrams(cand, n);
    let mut max_ref = Counts::new();
    for r in refs {
        for (g, k) in ngrams(r, n) {
            let e = max_ref.entry(g).or_insert(0);
            *e = (*e).max(k);
        }
    }
    let matched = c.iter().map(|(g, &k)| k.min(max_ref.get(g).copied().unwrap_or(0))).sum();
    (matched, c.values().sum())
}

/// Reference length closest to `len`; ties go to the shorter reference.
fn closest_ref_len(len: usize, refs: &[Vec<String>]) -> usize {
    refs.iter().map(Vec::len).min_by_key(|&r| (r.abs_diff(len), r)).unwrap_or(0)
}

fn bleu_from_totals(matched: &[usize], total: &[usize], cand_len: usize, ref_len: usize) -> f64 {
    if cand_len == 0 {
        return 0.0;
    }
    // orders without any candidate n-gram (text shorter than n) are skipped
    let orders: Vec<usize> = (0..matched.len()).filter(|&k| total[k] > 0).collect();
    if orders.iter().any(|&k| matched[k] == 0) {
        return 0.0;
    }
    let log_p: f64 = orders.iter().map(|&k| (matched[k] as f64 / total[k] as f64).ln()).sum::<f64>() / orders.len() as f64;
    let bp = if cand_len >= ref_len { 1.0 } else { (1.0 - ref_len as f64 / cand_len as f64).exp() };
    100.0 * bp * log_p.exp()
}

fn tokenized_refs<S: AsRef<str>>(references: &[S]) -> Result<Vec<Vec<String>>> {
    if references.is_empty() {
        return Err(Error::validation("at least one reference is required"));
    }
    Ok(references.iter().map(|r| tokenize(r.as_ref())).collect())
}

/// Sentence-level BLEU-n (uniform weights, no smoothing).
pub fn bleu<S: AsRef<str>>(candidate: &str, references: &[S], n: usize) -> Result<f64> {
    corpus_bleu(&[candidate], &[references], n)
}

/// Corpus-level BLEU-n: clipped counts and lengths summed over the corpus
/// before the precisions and brevity penalty are formed.
pub fn corpus_bleu<C: AsRef<str>, R: AsRef<[S]>, S: AsRef<str>>(candidates: &[C], references: &[R], n: usize) -> Result<f64> {
    if !(1..=4).contains(&n) {
        return Err(Error::validation(format!("BLEU order {n} outside 1..=4")));
    }
    if candidates.len() != references.len() {
        return Err(Error::Shape(format!("{} candidates vs {} reference sets", candidates.len(), references.len())));
    }
    let mut matched = vec![0; n];
    let mut total = vec![0; n];
    let (mut cand_len, mut ref_len) = (0, 0);
    for (c, r) in candidates.iter().zip(references) {
        let c = tokenize(c.as_ref());
        let r = tokenized_refs(r.as_ref())?;
        for k in 0..n {
            let (m, t) = clipped(&c, &r, k + 1);
            matched[k] += m;
            total[k] += t;
        }
        cand_len += c.len();
        ref_len += closest_ref_len(c.len(), &r);
    }
    Ok(bleu_from_totals(&matched, &total, cand_len, ref_len))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RougeVariant {
    One,
    Two,
    L,
}

fn f_measure(overlap: f64, cand: usize, reference: usize) -> f64 {
    if overlap == 0.0 || cand == 0 || reference == 0 {
        return 0.0;
    }
    let p = overlap / cand as f64;
    let r = overlap / reference as f64;
    2.0 * p * r / (p + r)
}

/// Length of the longest common subsequence.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0; b.len() + 1];
    let mut cur = vec![0; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE F-measure (β = 1), maximum over references.
pub fn rouge<S: AsRef<str>>(candidate: &str, references: &[S], variant: RougeVariant) -> Result<f64> {
    let c = tokenize(candidate);
    let refs = tokenized_refs(references)?;
    let score = refs
        .iter()
        .map(|r| match variant {
            RougeVariant::One | RougeVariant::Two => {
                let n = if variant == RougeVariant::One { 1 } else { 2 };
                let (cg, rg) = (ngrams(&c, n), ngrams(r, n));
                let overlap: usize = cg.iter().map(|(g, &k)| k.min(rg.get(g).copied().unwrap_or(0))).sum();
                f_measure(overlap as f64, cg.values().sum(), rg.values().sum())
            }
            RougeVariant::L => f_measure(lcs_len(&c, r) as f64, c.len(), r.len()),
        })
        .fold(0.0, f64::max);
    Ok(100.0 * score)
}

/// Corpus CIDEr-D and the per-candidate scores.
///
/// Document frequencies come from the reference sets (one document per
/// candidate). A corpus of a single document makes every IDF zero; it is
/// scored with IDF smoothed to `ln(2 / df)` and a warning.
pub fn cider<C: AsRef<str>, R: AsRef<[S]>, S: AsRef<str>>(candidates: &[C], references: &[R]) -> Result<(f64, Vec<f64>)> {
    if candidates.is_empty() || candidates.len() != references.len() {
        return Err(Error::Shape(format!("{} candidates vs {} reference sets", candidates.len(), references.len())));
    }
    let cands: Vec<Vec<String>> = candidates.iter().map(|c| tokenize(c.as_ref())).collect();
    let refs: Vec<Vec<Vec<String>>> = references.iter().map(|r| tokenized_refs(r.as_ref())).collect::<Result<_>>()?;
    let docs = cands.len();
    let smoothed = docs == 1;
    if smoothed {
        log::warn!("CIDEr-D on a single-document corpus: IDF is degenerate, using smoothed IDF");
    }
    let log_docs = if smoothed { 2f64.ln() } else { (docs as f64).ln() };

    let mut scores = vec![0.0; docs];
    for n in 1..=CIDER_MAX_N {
        let mut df: HashMap<Vec<String>, usize> = HashMap::new();
        for rs in &refs {
            let seen: HashSet<Vec<String>> = rs.iter().flat_map(|r| ngrams(r, n).into_keys()).collect();
            for g in seen {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        let vector = |tokens: &[String]| -> HashMap<Vec<String>, f64> {
            ngrams(tokens, n)
                .into_iter()
                .map(|(g, k)| {
                    let d = df.get(&g).copied().unwrap_or(0).max(1) as f64;
                    let w = k as f64 * (log_docs - d.ln());
                    (g, w)
                })
                .collect()
        };
        for (i, (c, rs)) in cands.iter().zip(&refs).enumerate() {
            let vc = vector(c);
            let norm_c: f64 = vc.values().map(|v| v * v).sum();
            let mut sum = 0.0;
            for r in rs {
                let vr = vector(r);
                let norm_r: f64 = vr.values().map(|v| v * v).sum();
                let denom = (norm_c * norm_r).sqrt();
                if denom == 0.0 {
                    continue;
                }
                // CIDEr-D clips the candidate weights by the reference weights
                let dot: f64 = vc.iter().map(|(g, &w)| vr.get(g).map_or(0.0, |&wr| w.min(wr) * wr)).sum();
                let delta = c.len() as f64 - r.len() as f64;
                sum += dot / denom * (-delta * delta / (2.0 * CIDER_SIGMA * CIDER_SIGMA)).exp();
            }
            scores[i] += sum / rs.len() as f64;
        }
    }
    for s in &mut scores {
        *s = *s / CIDER_MAX_N as f64 * 10.0;
    }
    let mean = scores.iter().sum::<f64>() / docs as f64;
    Ok((mean, scores))
}

/// How BLEU is aggregated over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BleuMode {
    #[default]
    Corpus,
    SentenceMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub bleu1: f64,
    pub bleu4: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub cider: f64,
    pub candidates: usize,
    pub references: usize,
    pub bleu_mode: BleuMode,
    pub tokenizer_version: u32,
}

impl ScoreReport {
    pub const CSV_HEADER: &'static str = "bleu1,bleu4,rouge1,rouge2,rougeL,cider,candidates,references";

    pub fn to_csv(&self) -> String {
        format!(
            "{}\n{},{},{},{},{},{},{},{}\n",
            Self::CSV_HEADER,
            self.bleu1,
            self.bleu4,
            self.rouge1,
            self.rouge2,
            self.rouge_l,
            self.cider,
            self.candidates,
            self.references
        )
    }
}

/// All metrics over a corpus; ROUGE is the mean of per-candidate scores.
pub fn score_corpus<C: AsRef<str>, R: AsRef<[S]>, S: AsRef<str>>(
    candidates: &[C],
    references: &[R],
    mode: BleuMode,
) -> Result<ScoreReport> {
    if candidates.is_empty() || candidates.len() != references.len() {
        return Err(Error::Shape(format!("{} candidates vs {} reference sets", candidates.len(), references.len())));
    }
    let n = candidates.len() as f64;
    let bleu_at = |k: usize| -> Result<f64> {
        match mode {
            BleuMode::Corpus => corpus_bleu(candidates, references, k),
            BleuMode::SentenceMean => {
                let mut s = 0.0;
                for (c, r) in candidates.iter().zip(references) {
                    s += bleu(c.as_ref(), r.as_ref(), k)?;
                }
                Ok(s / n)
            }
        }
    };
    let rouge_mean = |v: RougeVariant| -> Result<f64> {
        let mut s = 0.0;
        for (c, r) in candidates.iter().zip(references) {
            s += rouge(c.as_ref(), r.as_ref(), v)?;
        }
        Ok(s / n)
    };
    Ok(ScoreReport {
        bleu1: bleu_at(1)?,
        bleu4: bleu_at(4)?,
        rouge1: rouge_mean(RougeVariant::One)?,
        rouge2: rouge_mean(RougeVariant::Two)?,
        rouge_l: rouge_mean(RougeVariant::L)?,
        cider: cider(candidates, references)?.0,
        candidates: candidates.len(),
        references: references.iter().map(|r| r.as_ref().len()).sum(),
        bleu_mode: mode,
        tokenizer_version: TOKENIZER_VERSION,
    })
}

/// Unweighted mean of per-class F1 over the classes that occur.
pub fn macro_f1(truth: &[usize], predicted: &[usize], classes: usize) -> Result<f64> {
    Ok(Evaluation::from_predictions(truth, predicted, classes, &[])?.macro_f1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenizer_drops_punctuation_and_case() {
        assert_eq!(tokenize("Keep the Back straight, knees-bent!"), vec!["keep", "the", "back", "straight", "knees", "bent"]);
        assert!(tokenize(" ,. ").is_empty());
    }

    #[test]
    fn identical_text_is_maximal() {
        let t = "lift the arms slowly above the head";
        for n in 1..=4 {
            assert_eq!(bleu(t, &[t], n).unwrap(), 100.0);
        }
        for v in [RougeVariant::One, RougeVariant::Two, RougeVariant::L] {
            assert_eq!(rouge(t, &[t], v).unwrap(), 100.0);
        }
        let docs = ["bend both knees slowly", "lift the arms slowly", "turn the trunk to the left side"];
        let refs: Vec<Vec<&str>> = docs.iter().map(|d| vec![*d]).collect();
        assert_eq!(cider(&docs, &refs).unwrap().0, 10.0);
    }

    #[test]
    fn empty_and_disjoint_score_zero() {
        assert_eq!(bleu("", &["a b c"], 1).unwrap(), 0.0);
        assert_eq!(rouge("", &["a b c"], RougeVariant::L).unwrap(), 0.0);
        assert_eq!(rouge("x y", &["a b c"], RougeVariant::One).unwrap(), 0.0);
        let (c, _) = cider(&["x y z", "u v"], &[vec!["a b c"], vec!["d e"]]).unwrap();
        assert_eq!(c, 0.0);
        assert!(bleu("a", &[] as &[&str], 1).is_err());
    }

    #[test]
    fn lcs_matches_exhaustive_subsequence_search() {
        let a = tokenize("a b c b d a b");
        let b = tokenize("b d c a b a");
        // brute force: longest subsequence of `a` that is also a subsequence of `b`
        let is_subseq = |s: &[&String], t: &[String]| {
            let mut it = t.iter();
            s.iter().all(|x| it.any(|y| y == *x))
        };
        let mut best = 0;
        for mask in 0u32..(1 << a.len()) {
            let s: Vec<&String> = (0..a.len()).filter(|&i| mask >> i & 1 == 1).map(|i| &a[i]).collect();
            if s.len() > best && is_subseq(&s, &b) {
                best = s.len();
            }
        }
        assert_eq!(lcs_len(&a, &b), best);
        assert_eq!(best, 4);
    }

    proptest! {
        #[test]
        fn self_reference_is_maximal(words in proptest::collection::vec("[a-e]{1,3}", 1..12)) {
            let t = words.join(" ");
            prop_assert_eq!(rouge(&t, &[&t], RougeVariant::L).unwrap(), 100.0);
            prop_assert_eq!(rouge(&t, &[&t], RougeVariant::One).unwrap(), 100.0);
            prop_assert_eq!(bleu(&t, &[&t], 4).unwrap(), 100.0);
        }

        #[test]
        fn deleting_a_matched_unigram_never_raises_rouge1(
            words in proptest::collection::vec("[a-d]", 2..12),
            reference in proptest::collection::vec("[a-d]", 1..12),
            idx in 0usize..12,
        ) {
            let i = idx % words.len();
            let w = &words[i];
            let in_cand = words.iter().filter(|x| *x == w).count();
            let in_ref = reference.iter().filter(|x| *x == w).count();
            // every copy of the word is matched, so deleting one loses a match
            prop_assume!(in_ref >= in_cand);
            let r = reference.join(" ");
            let mut shorter = words.clone();
            shorter.remove(i);
            let before = rouge(&words.join(" "), &[&r], RougeVariant::One).unwrap();
            let after = rouge(&shorter.join(" "), &[&r], RougeVariant::One).unwrap();
            prop_assert!(after <= before + 1e-9);
        }
    }
}
