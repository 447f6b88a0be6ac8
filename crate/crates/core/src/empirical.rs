//! Rank normalization, the empirical correspondence curve, and the category
//! counts that feed the multinomial likelihood.

use serde::Serialize;

use crate::error::Result;
use crate::types::{CutoffGrid, Orientation, ScorePairs, UniformRanks};

/// The empirical correspondence curve evaluated on a cutoff grid:
/// `psi[m]` is the fraction of candidates whose ranks fall in the top
/// `t_{m+1}` fraction in *both* replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCurve {
    /// Report cutoffs `t_1, ..., t_M` (the final entry is 1).
    pub t: Vec<f64>,
    /// Curve values aligned with `t`; nondecreasing, ends at exactly 1.
    pub psi: Vec<f64>,
}

/// Per-category candidate counts for one workflow: `counts[m]` is the number
/// of candidates with `t_m < max(u1, u2) <= t_{m+1}` (0-indexed categories).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryCounts {
    pub counts: Vec<u64>,
    /// Total candidates; always equals `counts.iter().sum()`.
    pub n: usize,
}

/// Ranks one score column, mapping stronger candidates to ranks near `n`.
/// Ties keep input order: the earlier candidate gets the smaller rank.
fn column_ranks(y: &[f64], orientation: Orientation) -> Vec<f64> {
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    match orientation {
        // Ascending: largest score ends up with rank n.
        Orientation::HigherIsStronger => {
            order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
        }
        // Descending: smallest score ends up with rank n.
        Orientation::LowerIsStronger => {
            order.sort_by(|&a, &b| y[b].total_cmp(&y[a]).then(a.cmp(&b)));
        }
    }
    let mut u = vec![0.0; n];
    for (r, &i) in order.iter().enumerate() {
        u[i] = (r + 1) as f64 / n as f64;
    }
    u
}

/// Converts raw scores to marginal uniform ranks in `{1/n, ..., 1}`, with
/// stronger candidates mapped toward 1 in both replicates.
pub fn to_uniform_ranks(pairs: &ScorePairs, orientation: Orientation) -> Result<UniformRanks> {
    pairs.validate()?;
    Ok(UniformRanks {
        workflow_id: pairs.workflow_id.clone(),
        u1: column_ranks(&pairs.y1, orientation),
        u2: column_ranks(&pairs.y2, orientation),
    })
}

/// Cumulative counts of `max(u1, u2)` at each report cutoff.
///
/// Computed by one sweep of the sorted max-rank vector, so the cumulative
/// counts (and with them the curve and the category counts) are exact
/// integers — no floating-point thresholding discrepancies between the curve
/// and the counts are possible.
fn cumulative_counts(ranks: &UniformRanks, grid: &CutoffGrid) -> Vec<u64> {
    let mut max_rank: Vec<f64> = ranks
        .u1
        .iter()
        .zip(&ranks.u2)
        .map(|(a, b)| a.max(*b))
        .collect();
    max_rank.sort_unstable_by(f64::total_cmp);

    let mut cumulative = Vec::with_capacity(grid.m());
    let mut i = 0;
    for &t in grid.cutoffs() {
        while i < max_rank.len() && max_rank[i] <= t {
            i += 1;
        }
        cumulative.push(i as u64);
    }
    cumulative
}

/// Evaluates the empirical correspondence curve on the grid cutoffs.
pub fn empirical_curve(ranks: &UniformRanks, grid: &CutoffGrid) -> EmpiricalCurve {
    let n = ranks.n() as f64;
    let psi = cumulative_counts(ranks, grid)
        .into_iter()
        .map(|c| c as f64 / n)
        .collect();
    EmpiricalCurve {
        t: grid.cutoffs().to_vec(),
        psi,
    }
}

/// Counts candidates per grid category. Every candidate lands in exactly one
/// category because `max(u1, u2) <= 1 = t_M`.
pub fn category_counts(ranks: &UniformRanks, grid: &CutoffGrid) -> CategoryCounts {
    let cumulative = cumulative_counts(ranks, grid);
    let mut counts = Vec::with_capacity(cumulative.len());
    let mut prev = 0;
    for c in cumulative {
        counts.push(c - prev);
        prev = c;
    }
    CategoryCounts {
        counts,
        n: ranks.n(),
    }
}
