use serde::{Deserialize, Serialize};

use super::data::Examples;
use super::model::Cnn3;
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    /// `None` for classes with no examples.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub total: u64,
}

impl Metrics {
    pub fn from_predictions(num_classes: usize, labels: &[usize], predicted: &[usize]) -> Self {
        let mut confusion = vec![vec![0u64; num_classes]; num_classes];
        for (&t, &p) in labels.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        let total = labels.len() as u64;
        let correct: u64 = (0..num_classes).map(|c| confusion[c][c]).sum();
        let per_class_accuracy = confusion
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let n: u64 = row.iter().sum();
                (n > 0).then(|| row[c] as f64 / n as f64)
            })
            .collect();
        Self {
            accuracy: if total == 0 {
                0.0
            } else {
                correct as f64 / total as f64
            },
            confusion,
            per_class_accuracy,
            total,
        }
    }

    /// Confusion matrix as CSV with a `true\predicted` header row.
    pub fn confusion_csv(&self) -> String {
        let n = self.confusion.len();
        let mut s = String::from("true\\predicted");
        for c in 0..n {
            s.push_str(&format!(",{c}"));
        }
        s.push('\n');
        for (t, row) in self.confusion.iter().enumerate() {
            s.push_str(&t.to_string());
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn argmax(xs: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Predicted class of every example.
pub fn predict(model: &Cnn3<f32>, data: &Examples, parallel: bool) -> Result<Vec<usize>> {
    par::map_range(0..data.len(), parallel, |i| {
        model.forward_one(data.input(i)).map(|p| argmax(&p))
    })
    .into_iter()
    .collect()
}

pub fn evaluate(model: &Cnn3<f32>, data: &Examples, parallel: bool) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::invalid("test split", "must not be empty"));
    }
    let classes = model.spec().num_classes;
    if let Some(max) = data.max_label() {
        if max >= classes {
            return Err(Error::Shape(format!(
                "data has label {max} but the model only has {classes} classes"
            )));
        }
    }
    if data.n_rows != model.spec().n_rows {
        return Err(Error::Shape(format!(
            "data has {} rows per session, model expects {}",
            data.n_rows,
            model.spec().n_rows
        )));
    }
    let predicted = predict(model, data, parallel)?;
    Ok(Metrics::from_predictions(classes, &data.labels, &predicted))
}
