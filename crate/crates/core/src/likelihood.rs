//! The segmented concordance model: piecewise-linear basis in log report
//! depth, the multinomial log-likelihood over grid categories, and its
//! analytic gradient in the coefficients.
//!
//! For a workflow with design vector `x` (intercept first) the model says
//!
//! ```text
//! log psi(t | x) = a1 * w1(t, tau) + a2 * w2(t, tau),   a_j = sum_s x_s beta_sj
//! ```
//!
//! with basis `w1 = min(log t - log tau, 0)` and
//! `w2 = log tau + max(log t - log tau, 0)`. Since `w1 + w2 = log t`, equal
//! slope pairs collapse to the homogeneous power law `psi(t) = t^a` and the
//! change point becomes unidentifiable — which is exactly what the
//! change-point existence test in [`crate::inference`] exploits.

use serde::Serialize;

use crate::empirical::{category_counts, CategoryCounts};
use crate::error::{Error, Result};
use crate::types::{CutoffGrid, Orientation, ScorePairs, SegmentedParams};

/// One workflow's contribution to the likelihood: its full design vector
/// (intercept prepended) and its per-category candidate counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkflowData {
    pub workflow_id: String,
    design: Vec<f64>,
    pub counts: CategoryCounts,
}

impl WorkflowData {
    /// Builds the workflow entry from covariates *without* the intercept;
    /// the leading 1 is prepended here so it can never be forgotten.
    pub fn new(
        workflow_id: impl Into<String>,
        covariates: &[f64],
        counts: CategoryCounts,
    ) -> Result<Self> {
        for (index, v) in covariates.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "covariates",
                    index,
                });
            }
        }
        if counts.counts.iter().sum::<u64>() != counts.n as u64 {
            return Err(Error::InvalidDesign(
                "category counts do not sum to the sample size".into(),
            ));
        }
        let mut design = Vec::with_capacity(covariates.len() + 1);
        design.push(1.0);
        design.extend_from_slice(covariates);
        Ok(Self {
            workflow_id: workflow_id.into(),
            design,
            counts,
        })
    }

    /// Full design vector, intercept included.
    pub fn design(&self) -> &[f64] {
        &self.design
    }
}

/// The complete data a fit consumes: one or more workflows with conformable
/// design vectors and a shared category grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignSet {
    workflows: Vec<WorkflowData>,
}

impl DesignSet {
    pub fn new(workflows: Vec<WorkflowData>) -> Result<Self> {
        let Some(first) = workflows.first() else {
            return Err(Error::InvalidDesign("no workflows".into()));
        };
        let p = first.design.len();
        let m = first.counts.counts.len();
        for wf in &workflows {
            if wf.design.len() != p {
                return Err(Error::InvalidDesign(format!(
                    "workflow '{}' has {} design coordinates, expected {}",
                    wf.workflow_id,
                    wf.design.len(),
                    p
                )));
            }
            if wf.counts.counts.len() != m {
                return Err(Error::InvalidDesign(format!(
                    "workflow '{}' has {} categories, expected {}",
                    wf.workflow_id,
                    wf.counts.counts.len(),
                    m
                )));
            }
        }
        Ok(Self { workflows })
    }

    /// Ranks, bins, and assembles every workflow against one shared grid.
    pub fn from_score_pairs(
        all: &[ScorePairs],
        orientation: Orientation,
        grid: &CutoffGrid,
    ) -> Result<Self> {
        let workflows = all
            .iter()
            .map(|pairs| {
                let ranks = crate::empirical::to_uniform_ranks(pairs, orientation)?;
                WorkflowData::new(
                    pairs.workflow_id.clone(),
                    &pairs.covariates,
                    category_counts(&ranks, grid),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(workflows)
    }

    pub fn workflows(&self) -> &[WorkflowData] {
        &self.workflows
    }

    /// Number of design coordinates including the intercept (`S + 1`).
    pub fn n_coeffs(&self) -> usize {
        self.workflows[0].design.len()
    }

    /// Number of covariates excluding the intercept (`S`).
    pub fn n_covariates(&self) -> usize {
        self.n_coeffs() - 1
    }

    /// Total candidates across workflows.
    pub fn total_n(&self) -> usize {
        self.workflows.iter().map(|wf| wf.counts.n).sum()
    }
}

/// The two-piece basis at report depth `t` with change point `tau`.
///
/// Exactly `(0, 0)` at `t = 1`, and `w1 + w2 = log t` for all `t`.
pub fn basis_w(t: f64, tau: f64) -> Result<(f64, f64)> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Domain {
            name: "t",
            value: t,
            domain: "(0, 1]",
        });
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain {
            name: "tau",
            value: tau,
            domain: "(0, 1)",
        });
    }
    Ok(basis_w_unchecked(t, tau))
}

#[inline]
fn basis_w_unchecked(t: f64, tau: f64) -> (f64, f64) {
    let log_tau = tau.ln();
    let d = t.ln() - log_tau;
    if d < 0.0 {
        (d, log_tau)
    } else {
        (0.0, log_tau + d)
    }
}

/// Model curve on the log scale for one workflow at one report depth.
/// `covariates` excludes the intercept, matching [`ScorePairs::covariates`].
pub fn model_log_psi(params: &SegmentedParams, covariates: &[f64], t: f64) -> Result<f64> {
    if covariates.len() + 1 != params.beta.len() {
        return Err(Error::InvalidDesign(format!(
            "{} covariates against {} slope pairs (intercept included)",
            covariates.len(),
            params.beta.len()
        )));
    }
    let (w1, w2) = basis_w(t, params.tau)?;
    let mut design = Vec::with_capacity(params.beta.len());
    design.push(1.0);
    design.extend_from_slice(covariates);
    let (a1, a2) = params.effective_slopes(&design);
    if a1 <= 0.0 || a2 <= 0.0 {
        return Err(Error::NonmonotoneModel(format!(
            "effective slopes ({a1}, {a2}) must both be positive"
        )));
    }
    Ok(a1 * w1 + a2 * w2)
}

/// Checks both effective slopes are positive for this workflow and returns
/// them; positivity is what makes the model curve strictly increasing.
fn checked_slopes(params: &SegmentedParams, wf: &WorkflowData) -> Result<(f64, f64)> {
    let (a1, a2) = params.effective_slopes(&wf.design);
    if a1 <= 0.0 || a2 <= 0.0 {
        return Err(Error::NonmonotoneModel(format!(
            "workflow '{}' has effective slopes ({a1}, {a2})",
            wf.workflow_id
        )));
    }
    Ok((a1, a2))
}

fn check_dims(params: &SegmentedParams, data: &DesignSet, grid: &CutoffGrid) -> Result<()> {
    if params.beta.len() != data.n_coeffs() {
        return Err(Error::InvalidDesign(format!(
            "{} slope pairs against {} design coordinates",
            params.beta.len(),
            data.n_coeffs()
        )));
    }
    if data.workflows[0].counts.counts.len() != grid.m() {
        return Err(Error::GridMismatch {
            left: data.workflows[0].counts.counts.len(),
            right: grid.m(),
        });
    }
    Ok(())
}

/// Total multinomial log-likelihood over all workflows.
///
/// Category probabilities are increments of the model curve; the curve value
/// at the final cutoff is exactly 1 and at depth 0 exactly 0, so the
/// probabilities always sum to 1. Any non-positive increment means the
/// candidate coefficients do not describe an increasing curve, which is
/// reported as [`Error::NonmonotoneModel`] rather than silently clamped.
pub fn log_likelihood(
    params: &SegmentedParams,
    data: &DesignSet,
    grid: &CutoffGrid,
) -> Result<f64> {
    check_dims(params, data, grid)?;
    let basis: Vec<(f64, f64)> = grid
        .cutoffs()
        .iter()
        .map(|&t| basis_w_unchecked(t, params.tau))
        .collect();
    if !(params.tau > 0.0 && params.tau < 1.0) {
        return Err(Error::Domain {
            name: "tau",
            value: params.tau,
            domain: "(0, 1)",
        });
    }

    let mut ll = 0.0;
    for wf in &data.workflows {
        let (a1, a2) = checked_slopes(params, wf)?;
        let mut prev = 0.0;
        for (m, &(w1, w2)) in basis.iter().enumerate() {
            let e = (a1 * w1 + a2 * w2).exp();
            let p = e - prev;
            if !(p > 0.0) {
                return Err(Error::NonmonotoneModel(format!(
                    "category {} of workflow '{}' has probability {p:e}",
                    m + 1,
                    wf.workflow_id
                )));
            }
            let count = wf.counts.counts[m];
            if count > 0 {
                ll += count as f64 * p.ln();
            }
            prev = e;
        }
    }
    Ok(ll)
}

/// Analytic gradient of [`log_likelihood`] in the flattened coefficients.
///
/// Flattening puts the slope pair of design coordinate `s` at positions
/// `2s` (lower segment) and `2s + 1` (upper segment).
pub fn score_beta(
    params: &SegmentedParams,
    data: &DesignSet,
    grid: &CutoffGrid,
) -> Result<Vec<f64>> {
    check_dims(params, data, grid)?;
    let basis: Vec<(f64, f64)> = grid
        .cutoffs()
        .iter()
        .map(|&t| basis_w_unchecked(t, params.tau))
        .collect();

    let mut g = vec![0.0; 2 * data.n_coeffs()];
    for wf in &data.workflows {
        let (a1, a2) = checked_slopes(params, wf)?;
        let mut prev_e = 0.0;
        // e * w accumulated from the previous knot; zero at depth 0 because
        // the curve vanishes there faster than the basis diverges.
        let mut prev_ew = (0.0, 0.0);
        for (m, &(w1, w2)) in basis.iter().enumerate() {
            let e = (a1 * w1 + a2 * w2).exp();
            let p = e - prev_e;
            if !(p > 0.0) {
                return Err(Error::NonmonotoneModel(format!(
                    "category {} of workflow '{}' has probability {p:e}",
                    m + 1,
                    wf.workflow_id
                )));
            }
            let count = wf.counts.counts[m];
            if count > 0 {
                let scale = count as f64 / p;
                let d1 = e * w1 - prev_ew.0;
                let d2 = e * w2 - prev_ew.1;
                for (s, &x) in wf.design.iter().enumerate() {
                    g[2 * s] += scale * x * d1;
                    g[2 * s + 1] += scale * x * d2;
                }
            }
            prev_e = e;
            prev_ew = (e * w1, e * w2);
        }
    }
    Ok(g)
}

/// Log-likelihood of the homogeneous (no change point) model
/// `log psi(t | x) = (sum_s x_s b_s) log t`, one slope per design coordinate.
pub fn log_likelihood_homogeneous(
    slopes: &[f64],
    data: &DesignSet,
    grid: &CutoffGrid,
) -> Result<f64> {
    if slopes.len() != data.n_coeffs() {
        return Err(Error::InvalidDesign(format!(
            "{} slopes against {} design coordinates",
            slopes.len(),
            data.n_coeffs()
        )));
    }
    let log_t: Vec<f64> = grid.cutoffs().iter().map(|&t| t.ln()).collect();

    let mut ll = 0.0;
    for wf in &data.workflows {
        let a: f64 = wf.design.iter().zip(slopes).map(|(x, b)| x * b).sum();
        if a <= 0.0 {
            return Err(Error::NonmonotoneModel(format!(
                "workflow '{}' has effective slope {a}",
                wf.workflow_id
            )));
        }
        let mut prev = 0.0;
        for (m, &lt) in log_t.iter().enumerate() {
            let e = (a * lt).exp();
            let p = e - prev;
            if !(p > 0.0) {
                return Err(Error::NonmonotoneModel(format!(
                    "category {} of workflow '{}' has probability {p:e}",
                    m + 1,
                    wf.workflow_id
                )));
            }
            let count = wf.counts.counts[m];
            if count > 0 {
                ll += count as f64 * p.ln();
            }
            prev = e;
        }
    }
    Ok(ll)
}

/// Analytic gradient of [`log_likelihood_homogeneous`] in the slopes.
pub fn score_homogeneous(slopes: &[f64], data: &DesignSet, grid: &CutoffGrid) -> Result<Vec<f64>> {
    if slopes.len() != data.n_coeffs() {
        return Err(Error::InvalidDesign(format!(
            "{} slopes against {} design coordinates",
            slopes.len(),
            data.n_coeffs()
        )));
    }
    let log_t: Vec<f64> = grid.cutoffs().iter().map(|&t| t.ln()).collect();

    let mut g = vec![0.0; data.n_coeffs()];
    for wf in &data.workflows {
        let a: f64 = wf.design.iter().zip(slopes).map(|(x, b)| x * b).sum();
        if a <= 0.0 {
            return Err(Error::NonmonotoneModel(format!(
                "workflow '{}' has effective slope {a}",
                wf.workflow_id
            )));
        }
        let mut prev_e = 0.0;
        let mut prev_el = 0.0;
        for (m, &lt) in log_t.iter().enumerate() {
            let e = (a * lt).exp();
            let p = e - prev_e;
            if !(p > 0.0) {
                return Err(Error::NonmonotoneModel(format!(
                    "category {} of workflow '{}' has probability {p:e}",
                    m + 1,
                    wf.workflow_id
                )));
            }
            let count = wf.counts.counts[m];
            if count > 0 {
                let d = count as f64 / p * (e * lt - prev_el);
                for (s, &x) in wf.design.iter().enumerate() {
                    g[s] += d * x;
                }
            }
            prev_e = e;
            prev_el = e * lt;
        }
    }
    Ok(g)
}

/// Per-category score vectors of the segmented model for a single workflow
/// with common slope `slope` in both segments (the restricted point used by
/// the change-point existence test). Entry `m` is
/// `(e_m W_m - e_{m-1} W_{m-1}) / p_m` with `e_m = t_m^slope`.
pub(crate) fn category_score_segmented(
    slope: f64,
    grid: &CutoffGrid,
    tau: f64,
) -> Result<Vec<[f64; 2]>> {
    if slope <= 0.0 {
        return Err(Error::NonmonotoneModel(format!("slope {slope} must be positive")));
    }
    let mut out = Vec::with_capacity(grid.m());
    let mut prev_e = 0.0;
    let mut prev_ew = (0.0, 0.0);
    for &t in grid.cutoffs() {
        let (w1, w2) = basis_w_unchecked(t, tau);
        let e = (slope * t.ln()).exp();
        let p = e - prev_e;
        if !(p > 0.0) {
            return Err(Error::NonmonotoneModel(format!(
                "degenerate category probability {p:e} at depth {t}"
            )));
        }
        out.push([(e * w1 - prev_ew.0) / p, (e * w2 - prev_ew.1) / p]);
        prev_e = e;
        prev_ew = (e * w1, e * w2);
    }
    Ok(out)
}

/// Per-category scalar scores of the homogeneous model at `slope`, the
/// restricted-model analog of [`category_score_segmented`]. Entry `m` is
/// `(e_m log t_m - e_{m-1} log t_{m-1}) / p_m`.
pub(crate) fn category_score_homogeneous(slope: f64, grid: &CutoffGrid) -> Result<Vec<f64>> {
    if slope <= 0.0 {
        return Err(Error::NonmonotoneModel(format!("slope {slope} must be positive")));
    }
    let mut out = Vec::with_capacity(grid.m());
    let mut prev_e = 0.0;
    let mut prev_el = 0.0;
    for &t in grid.cutoffs() {
        let lt = t.ln();
        let e = (slope * lt).exp();
        let p = e - prev_e;
        if !(p > 0.0) {
            return Err(Error::NonmonotoneModel(format!(
                "degenerate category probability {p:e} at depth {t}"
            )));
        }
        out.push((e * lt - prev_el) / p);
        prev_e = e;
        prev_el = e * lt;
    }
    Ok(out)
}
