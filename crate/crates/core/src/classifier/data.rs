use crate::dataset::{Corpus, Split};
use crate::session::{SessionRecord, NUM_COLUMNS};
use crate::{Error, Result};

/// Labelled `n x 8` inputs stored back to back. The label is the device id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Examples {
    pub n_rows: usize,
    pub inputs: Vec<f32>,
    pub labels: Vec<usize>,
}

impl Examples {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a SessionRecord>) -> Result<Self> {
        let mut out = Examples::default();
        for r in records {
            if out.labels.is_empty() {
                out.n_rows = r.n_samples;
            } else if r.n_samples != out.n_rows {
                return Err(Error::Shape(format!(
                    "mixed session lengths {} and {}",
                    out.n_rows, r.n_samples
                )));
            }
            out.inputs.extend_from_slice(&r.samples);
            out.labels.push(r.device_id as usize);
        }
        Ok(out)
    }

    pub fn from_corpus(corpus: &Corpus, split: Split) -> Result<Self> {
        Self::from_records(corpus.split(split))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f32] {
        let len = self.n_rows * NUM_COLUMNS;
        &self.inputs[i * len..(i + 1) * len]
    }

    pub fn max_label(&self) -> Option<usize> {
        self.labels.iter().copied().max()
    }

    /// Relabels every example through `perm` (`new = perm[old]`).
    pub fn permute_labels(&self, perm: &[usize]) -> Self {
        Self {
            n_rows: self.n_rows,
            inputs: self.inputs.clone(),
            labels: self.labels.iter().map(|&l| perm[l]).collect(),
        }
    }
}
