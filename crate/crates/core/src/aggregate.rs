//! Aggregators collapsing a tuple of noisy labels into a single aggregate.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::task::{pair_of, TaskLoss};

/// The value of an aggregator: a label witness, a score vector, or the
/// sentinel `⋆` produced by the ranking aggregator when some item never loses.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Aggregate {
    Label(usize),
    Scores(Vec<f64>),
    Star,
}

impl Aggregate {
    pub fn kind(&self) -> &'static str {
        match self {
            Aggregate::Label(_) => "label",
            Aggregate::Scores(_) => "score vector",
            Aggregate::Star => "star",
        }
    }
}

/// Label counts of a tuple.
pub fn counts(z: &[usize], k: usize) -> Result<Vec<u32>> {
    let mut c = vec![0u32; k];
    for &y in z {
        if y >= k {
            return Err(Error::InvalidLabel { label: y, k });
        }
        c[y] += 1;
    }
    Ok(c)
}

/// `argmin_y sum_j counts[j] * l(y, j)`; lowest index on ties.
pub fn gmv_from_counts(counts: &[u32], loss: &TaskLoss) -> usize {
    let k = counts.len();
    if matches!(loss, TaskLoss::ZeroOne) {
        // total loss is m - counts[y]
        let mut best = 0;
        for y in 1..k {
            if counts[y] > counts[best] {
                best = y;
            }
        }
        return best;
    }
    let totals: Vec<f64> = (0..k)
        .map(|y| counts.iter().enumerate().filter(|(_, c)| **c > 0).map(|(j, c)| *c as f64 * loss.value(y, j)).sum())
        .collect();
    math::argmin(&totals)
}

/// Generalized majority vote over a label tuple in a space of size `k`.
pub fn generalized_majority_vote(z: &[usize], loss: &TaskLoss, k: usize) -> Result<usize> {
    if z.is_empty() {
        return Err(Error::EmptyTuple);
    }
    Ok(gmv_from_counts(&counts(z, k)?, loss))
}

/// Majority vote followed by the certificate's witness for the winning label.
pub fn mv_to_witness(z: &[usize], loss: &TaskLoss, witnesses: &[Aggregate]) -> Result<Aggregate> {
    let y = generalized_majority_vote(z, loss, witnesses.len())?;
    Ok(witnesses[y].clone())
}

/// Frequency aggregate over ranking pairs `(winner, loser)` on `items` items:
/// entry `i` is `sum_j m_ij / m_j`, or `⋆` if some item never appears as loser.
pub fn ranking_frequency_aggregate(z: &[usize], items: usize) -> Result<Aggregate> {
    let k = items * (items - 1);
    let mut m = vec![0u32; items * items];
    let mut col = vec![0u32; items];
    for &label in z {
        if label >= k {
            return Err(Error::InvalidLabel { label, k });
        }
        let (i, j) = pair_of(items, label);
        m[i * items + j] += 1;
        col[j] += 1;
    }
    if col.iter().any(|c| *c == 0) {
        return Ok(Aggregate::Star);
    }
    let s = (0..items)
        .map(|i| (0..items).map(|j| m[i * items + j] as f64 / col[j] as f64).sum())
        .collect();
    Ok(Aggregate::Scores(s))
}

/// Generalized majority vote over the `kk` nearest neighbours of `anchor`
/// (Euclidean, stable in the original index on distance ties).
pub fn knn_aggregate(anchor: &[f64], points: &[Vec<f64>], labels: &[usize], kk: usize, loss: &TaskLoss, k: usize) -> Result<usize> {
    let n = points.len();
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    if kk == 0 || kk > n {
        return Err(Error::InvalidArgument(alloc::format!("need 1 <= K <= n, got K={kk}, n={n}")));
    }
    let mut dist = Vec::with_capacity(n);
    for (i, p) in points.iter().enumerate() {
        if p.len() != anchor.len() {
            return Err(Error::DimensionMismatch { expected: anchor.len(), got: p.len() });
        }
        dist.push((p.iter().zip(anchor).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i));
    }
    dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let nearest: Vec<usize> = dist[..kk].iter().map(|(_, i)| labels[*i]).collect();
    generalized_majority_vote(&nearest, loss, k)
}
