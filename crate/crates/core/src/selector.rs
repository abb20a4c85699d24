//! Two-stage random choice of the next pending path condition.
//!
//! Stage one draws a bucket keyed by (label, voting) with fixed
//! probabilities, falling through to the next non-empty bucket in cyclic
//! order. Stage two draws an entry from that bucket with probability
//! proportional to its average neighbour similarity.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::fingerprint::Fingerprint;
use crate::learner::Classification;
use crate::symcore::PathCondition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Bucket {
    Label1Voting3,
    Label1Voting2,
    Label0Voting2,
    Label0Voting3,
}

impl Bucket {
    pub const ORDER: [Bucket; 4] = [
        Bucket::Label1Voting3,
        Bucket::Label1Voting2,
        Bucket::Label0Voting2,
        Bucket::Label0Voting3,
    ];

    /// Bucket for a verdict. Unclassified entries count as the optimistic
    /// cold-start verdict.
    pub fn of(c: Option<&Classification>) -> Bucket {
        match c.map(|c| (c.label, c.voting)) {
            None => Bucket::Label1Voting3,
            Some((1, v)) if v >= 3 => Bucket::Label1Voting3,
            Some((1, _)) => Bucket::Label1Voting2,
            Some((_, v)) if v >= 3 => Bucket::Label0Voting3,
            Some(_) => Bucket::Label0Voting2,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BucketProbs(pub [f64; 4]);

impl Default for BucketProbs {
    fn default() -> Self {
        BucketProbs([0.50, 0.30, 0.15, 0.05])
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectError {
    #[error("no pending entry to pick")]
    Empty,
    #[error("bucket probabilities must be non-negative and sum to 1, got {0:?}")]
    BadProbs([f64; 4]),
}

impl BucketProbs {
    pub fn new(p: [f64; 4]) -> Result<BucketProbs, SelectError> {
        let sum: f64 = p.iter().sum();
        if p.iter().any(|x| !x.is_finite() || *x < 0.0) || (sum - 1.0).abs() > 1e-6 {
            return Err(SelectError::BadProbs(p));
        }
        Ok(BucketProbs(p))
    }
}

#[derive(Debug, Clone)]
pub struct PendingEntry {
    /// The alternative as synthesized.
    pub pc: PathCondition,
    /// Its slice, the form that is fingerprinted and solved.
    pub sliced: PathCondition,
    pub fp: Fingerprint,
    pub classification: Option<Classification>,
    pub enqueue_no: u64,
}

/// Pending entries partitioned by classification, in [`Bucket::ORDER`].
#[derive(Debug, Clone, Default)]
pub struct BucketSet {
    buckets: [Vec<PendingEntry>; 4],
}

pub fn bucketize(pending: Vec<PendingEntry>) -> BucketSet {
    let mut set = BucketSet::default();
    for e in pending {
        set.insert(e);
    }
    set
}

/// Index selected by `r` among the cumulative intervals of `weights`:
/// entry `i` owns `[w_0 + .. + w_{i-1}, w_0 + .. + w_i)`. Zero-weight
/// entries own an empty interval and are never chosen.
pub fn cumulative_pick(weights: &[f64], r: f64) -> usize {
    let mut acc = 0.0;
    let mut last = None;
    for (i, w) in weights.iter().enumerate() {
        if *w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(i);
        if r < acc {
            return i;
        }
    }
    // Only reachable through rounding at the top end.
    last.expect("cumulative pick needs a positive weight")
}

impl BucketSet {
    pub fn insert(&mut self, e: PendingEntry) {
        self.buckets[Bucket::of(e.classification.as_ref()).index()].push(e);
    }

    pub fn bucket(&self, b: Bucket) -> &[PendingEntry] {
        &self.buckets[b.index()]
    }

    pub fn sizes(&self) -> [usize; 4] {
        [0, 1, 2, 3].map(|i| self.buckets[i].len())
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Removes every entry, ordered by enqueue number.
    pub fn drain_all(&mut self) -> Vec<PendingEntry> {
        let mut all: Vec<_> = self.buckets.iter_mut().flat_map(std::mem::take).collect();
        all.sort_by_key(|e| e.enqueue_no);
        all
    }

    pub fn iter(&self) -> impl Iterator<Item = &PendingEntry> {
        self.buckets.iter().flatten()
    }

    /// Stage one: the drawn bucket, or the next non-empty one after it.
    pub fn draw_bucket<R: Rng + ?Sized>(&self, probs: &BucketProbs, rng: &mut R) -> Option<Bucket> {
        if self.is_empty() {
            return None;
        }
        let drawn = cumulative_pick(&probs.0, rng.gen::<f64>() * probs.0.iter().sum::<f64>());
        (0..4)
            .map(|step| Bucket::ORDER[(drawn + step) % 4])
            .find(|b| !self.buckets[b.index()].is_empty())
    }

    /// Stage two: position within `bucket`, weighted by average similarity,
    /// uniform when every weight is zero.
    pub fn draw_within<R: Rng + ?Sized>(&self, bucket: Bucket, rng: &mut R) -> usize {
        let entries = &self.buckets[bucket.index()];
        let weights: Vec<f64> = entries
            .iter()
            .map(|e| e.classification.map_or(0.0, |c| c.avg_similarity.to_f64()))
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            rng.gen_range(0..entries.len())
        } else {
            cumulative_pick(&weights, rng.gen::<f64>() * total)
        }
    }

    /// Draws and removes one entry.
    pub fn pick<R: Rng + ?Sized>(&mut self, probs: &BucketProbs, rng: &mut R) -> Result<(Bucket, PendingEntry), SelectError> {
        let bucket = self.draw_bucket(probs, rng).ok_or(SelectError::Empty)?;
        let at = self.draw_within(bucket, rng);
        Ok((bucket, self.buckets[bucket.index()].remove(at)))
    }

    /// Removes the entry enqueued first, regardless of bucket.
    pub fn pick_oldest(&mut self) -> Result<(Bucket, PendingEntry), SelectError> {
        let (b, at) = Bucket::ORDER
            .iter()
            .flat_map(|b| {
                self.buckets[b.index()]
                    .iter()
                    .enumerate()
                    .map(move |(i, e)| (e.enqueue_no, *b, i))
            })
            .min()
            .map(|(_, b, i)| (b, i))
            .ok_or(SelectError::Empty)?;
        Ok((b, self.buckets[b.index()].remove(at)))
    }
}
