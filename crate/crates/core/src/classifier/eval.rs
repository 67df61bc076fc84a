use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of the largest value; ties go to the lowest index. NaN never wins.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Classification quality on a labeled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub per_class_f1: Vec<f64>,
    pub support: Vec<usize>,
    /// Classes that take part in the macro average.
    pub scored: Vec<bool>,
    pub macro_f1: f64,
    pub accuracy: f64,
}

impl Evaluation {
    /// Build from class indices. Classes flagged in `masked` are excluded
    /// from the macro average; so are classes that never occur in either
    /// the truth or the predictions.
    pub fn from_predictions(truth: &[usize], predicted: &[usize], classes: usize, masked: &[bool]) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::validation("cannot evaluate an empty test set"));
        }
        if truth.len() != predicted.len() {
            return Err(Error::Shape(format!("{} labels vs {} predictions", truth.len(), predicted.len())));
        }
        if let Some(&bad) = truth.iter().chain(predicted).find(|&&c| c >= classes) {
            return Err(Error::validation(format!("class index {bad} out of range 0..{classes}")));
        }
        let mut confusion = vec![vec![0usize; classes]; classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        let support: Vec<usize> = confusion.iter().map(|row| row.iter().sum()).collect();
        let predicted_count: Vec<usize> = (0..classes).map(|c| confusion.iter().map(|row| row[c]).sum()).collect();
        let per_class_f1: Vec<f64> = (0..classes)
            .map(|c| {
                let tp = confusion[c][c] as f64;
                let denom = (support[c] + predicted_count[c]) as f64;
                if denom == 0.0 {
                    0.0
                } else {
                    2.0 * tp / denom
                }
            })
            .collect();
        let scored: Vec<bool> = (0..classes)
            .map(|c| !masked.get(c).copied().unwrap_or(false) && (support[c] > 0 || predicted_count[c] > 0))
            .collect();
        let n_scored = scored.iter().filter(|&&s| s).count();
        let macro_f1 = if n_scored == 0 {
            0.0
        } else {
            (0..classes).filter(|&c| scored[c]).map(|c| per_class_f1[c]).sum::<f64>() / n_scored as f64
        };
        let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
        Ok(Self { confusion, per_class_f1, support, scored, macro_f1, accuracy: correct as f64 / truth.len() as f64 })
    }

    /// Confusion matrix as CSV with a header of class labels.
    pub fn confusion_csv(&self, labels: &[String]) -> String {
        let mut out = String::from("true\\predicted");
        for l in labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            out.push_str(labels.get(i).map_or("?", String::as_str));
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}
