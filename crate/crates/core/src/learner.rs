//! Incremental k-nearest-neighbour feasibility classifier over fingerprints.

use std::cmp::Ordering;

use serde::Serialize;

use crate::fingerprint::{jaccard, Fingerprint, Ratio};

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_RECACHE_THRESHOLD: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub fp: Fingerprint,
    /// 1 feasible, 0 infeasible.
    pub label: u8,
    pub sequence_no: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub label: u8,
    pub voting: u8,
    pub avg_similarity: Ratio,
    pub trained_on: usize,
}

/// Append-only training set.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    examples: Vec<TrainingExample>,
    last_recache_size: usize,
}

impl TrainingSet {
    pub fn new() -> TrainingSet {
        TrainingSet::default()
    }

    pub fn examples(&self) -> &[TrainingExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Appends an example and returns its sequence number.
    pub fn add_example(&mut self, fp: Fingerprint, label: u8) -> u64 {
        assert!(label <= 1, "labels are 0 or 1");
        let sequence_no = self.examples.len() as u64;
        self.examples.push(TrainingExample {
            fp,
            label,
            sequence_no,
        });
        sequence_no
    }

    pub fn last_recache_size(&self) -> usize {
        self.last_recache_size
    }

    pub fn needs_recache(&self, threshold: usize) -> bool {
        self.examples.len() - self.last_recache_size >= threshold
    }

    pub fn mark_recached(&mut self) {
        self.last_recache_size = self.examples.len();
    }

    /// One line per example: the label, a space, then the 1024 bits in hex.
    pub fn dump(&self) -> String {
        self.examples
            .iter()
            .map(|e| format!("{} {}\n", e.label, e.fp.to_hex()))
            .collect()
    }
}

/// Classifies `fp` by its `k` most similar training examples; ties in
/// similarity go to the older example. With fewer than `k` examples the
/// verdict is optimistic: label 1, unanimous, similarity 0.
pub fn classify(fp: &Fingerprint, ts: &TrainingSet, k: usize) -> Classification {
    assert!(k >= 1, "k must be positive");
    let trained_on = ts.len();
    if trained_on < k {
        return Classification {
            label: 1,
            voting: k as u8,
            avg_similarity: Ratio::ZERO,
            trained_on,
        };
    }
    // Kept sorted best-first; the examples are already in sequence order,
    // so a strictly-better test leaves earlier equal entries ahead.
    let mut best: Vec<(Ratio, &TrainingExample)> = Vec::with_capacity(k + 1);
    for e in ts.examples() {
        let sim = jaccard(fp, &e.fp);
        if best.len() == k && sim <= best[k - 1].0 {
            continue;
        }
        let at = best
            .iter()
            .position(|(s, _)| sim.cmp(s) == Ordering::Greater)
            .unwrap_or(best.len());
        best.insert(at, (sim, e));
        best.truncate(k);
    }
    let ones = best.iter().filter(|(_, e)| e.label == 1).count();
    let zeros = k - ones;
    let (label, voting) = if ones >= zeros { (1, ones) } else { (0, zeros) };
    let sims: Vec<Ratio> = best.iter().map(|(s, _)| *s).collect();
    Classification {
        label,
        voting: voting as u8,
        avg_similarity: Ratio::mean(&sims),
        trained_on,
    }
}
