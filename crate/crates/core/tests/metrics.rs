//! Metric values checked against hand computations and an independent
//! CIDEr-D implementation.

use kinetext::metrics::{bleu, cider, corpus_bleu, macro_f1, rouge, score_corpus, BleuMode, RougeVariant};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn bleu1_brevity_penalty_worked_case() {
    // 3 matching unigrams against a 5-token reference
    let got = bleu("the cat sat", &["the cat sat on mats"], 1).unwrap();
    let want = 100.0 * (1.0f64 - 5.0 / 3.0).exp();
    assert!(close(got, want, 1e-9), "{got} vs {want}");
}

#[test]
fn bleu2_geometric_mean_by_hand() {
    // unigrams 3/4, bigrams 1/3, equal lengths
    let got = bleu("a b c d", &["a b x d"], 2).unwrap();
    assert!(close(got, 50.0, 1e-9), "{got}");
}

#[test]
fn bleu_clips_repeated_words() {
    let got = bleu("the the the the", &["the cat"], 1).unwrap();
    assert!(close(got, 25.0, 1e-9), "{got}");
}

#[test]
fn corpus_bleu_pools_counts() {
    // pooled unigrams 4/5, candidate length 5 against references 3 + 3
    let got = corpus_bleu(&["a b c", "d e"], &[vec!["a b c"], vec!["d x f"]], 1).unwrap();
    let want = 100.0 * (1.0f64 - 6.0 / 5.0).exp() * 0.8;
    assert!(close(got, want, 1e-9), "{got} vs {want}");
}

#[test]
fn rouge_by_hand() {
    // overlap 2, P = 2/3, R = 1/2
    let r1 = rouge("a b c", &["a b d e"], RougeVariant::One).unwrap();
    assert!(close(r1, 100.0 * 4.0 / 7.0, 1e-9), "{r1}");
    // LCS 3 of 4 on both sides
    let rl = rouge("a b c d", &["a c b d"], RougeVariant::L).unwrap();
    assert!(close(rl, 75.0, 1e-9), "{rl}");
    // bigrams ab, bc, cd vs ab, bx, xd: one shared
    let r2 = rouge("a b c d", &["a b x d"], RougeVariant::Two).unwrap();
    assert!(close(r2, 100.0 / 3.0, 1e-9), "{r2}");
    // best reference wins
    let best = rouge("a b c", &["x y z", "a b c"], RougeVariant::One).unwrap();
    assert!(close(best, 100.0, 1e-9));
}

const CANDS: [&str; 3] = ["a man is squatting deeply", "the person bends to the side", "someone walks forward slowly"];

fn refs() -> Vec<Vec<&'static str>> {
    vec![
        vec!["a man squats deeply", "the man is squatting"],
        vec!["the person bends sideways", "a side bend is performed"],
        vec!["someone walks slowly", "a person walks forward"],
    ]
}

#[test]
fn cider_matches_independent_oracle() {
    // reference values from a separate straightforward CIDEr-D implementation
    let (mean, per) = cider(&CANDS, &refs()).unwrap();
    let want = [3.3611161668298917, 1.9117067326680481, 2.8427784007003094];
    for (g, w) in per.iter().zip(want) {
        assert!(close(*g, w, 1e-9), "{g} vs {w}");
    }
    assert!(close(mean, 2.705200433399417, 1e-9), "{mean}");
}

#[test]
fn score_report_is_consistent_with_single_metrics() {
    let r = refs();
    let rep = score_corpus(&CANDS, &r, BleuMode::SentenceMean).unwrap();
    let mean_b1: f64 = CANDS.iter().zip(&r).map(|(c, rs)| bleu(c, rs, 1).unwrap()).sum::<f64>() / 3.0;
    assert!(close(rep.bleu1, mean_b1, 1e-9));
    let corpus = score_corpus(&CANDS, &r, BleuMode::Corpus).unwrap();
    assert!(close(corpus.bleu4, corpus_bleu(&CANDS, &r, 4).unwrap(), 1e-9));
    assert!(close(corpus.cider, 2.705200433399417, 1e-9));
    assert_eq!((corpus.candidates, corpus.references), (3, 6));
    assert!(score_corpus(&CANDS, &r[..2], BleuMode::Corpus).is_err());
}

#[test]
fn macro_f1_by_hand() {
    // class 0: P 1, R 1/2 -> 2/3; class 1: P 2/3, R 1 -> 4/5
    let f = macro_f1(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
    assert!(close(f, (2.0 / 3.0 + 0.8) / 2.0, 1e-12), "{f}");
}
