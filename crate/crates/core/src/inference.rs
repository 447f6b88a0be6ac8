//! Uncertainty quantification: candidate-level nonparametric bootstrap,
//! Wald tests for covariate effects, and a likelihood-ratio test for the
//! existence of a change point with a multiplier-simulated null.

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::empirical::{category_counts, to_uniform_ranks};
use crate::error::{Error, Result};
use crate::estimation::{fit_segmented, FitResult};
use crate::exec;
use crate::likelihood::{category_score_homogeneous, category_score_segmented, DesignSet};
use crate::types::{CutoffGrid, Orientation, ScorePairs, SeededRng};

/// Flat parameter order used by the bootstrap: the change point first, then
/// the slope pairs in design order, lower segment before upper.
pub fn parameter_names(n_coeffs: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(1 + 2 * n_coeffs);
    names.push("tau".to_string());
    for s in 0..n_coeffs {
        names.push(format!("beta_{s}_1"));
        names.push(format!("beta_{s}_2"));
    }
    names
}

fn flatten_params(fit: &FitResult) -> Vec<f64> {
    let mut row = Vec::with_capacity(1 + 2 * fit.params.beta.len());
    row.push(fit.params.tau);
    for b in &fit.params.beta {
        row.push(b[0]);
        row.push(b[1]);
    }
    row
}

/// Bootstrap distribution of the full parameter vector.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BootstrapResult {
    /// Replicates requested.
    pub b: usize,
    /// Replicates whose refit converged; rows of `estimates`.
    pub b_used: usize,
    /// Replicates dropped for failing to converge.
    pub failures: usize,
    /// Parameter labels for the columns, `tau` first.
    pub parameter_names: Vec<String>,
    /// One row per surviving replicate, in replicate order.
    pub estimates: Vec<Vec<f64>>,
    /// Per-parameter sample standard deviation across replicates.
    pub se: Vec<f64>,
    /// Per-parameter 2.5% percentile.
    pub ci_lower: Vec<f64>,
    /// Per-parameter 97.5% percentile.
    pub ci_upper: Vec<f64>,
}

/// Linearly interpolated sample quantile of already sorted values.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Nonparametric bootstrap: resamples candidates with replacement within
/// each workflow, refits the segmented model on the same change-point grid,
/// and summarizes the surviving parameter vectors.
///
/// Replicate `r` uses stream `r` of `seed`, so replicates can run in any
/// order or in parallel without changing the result. Replicates whose refit
/// errors or fails to converge are dropped; more than 20% of them dropped is
/// an error.
pub fn bootstrap(
    pairs: &[ScorePairs],
    orientation: Orientation,
    grid: &CutoffGrid,
    tau_grid: &[f64],
    b: usize,
    seed: SeededRng,
) -> Result<BootstrapResult> {
    if b < 2 {
        return Err(Error::Domain {
            name: "b",
            value: b as f64,
            domain: "[2, inf)",
        });
    }
    for p in pairs {
        p.validate()?;
    }

    let replicates: Vec<Option<Vec<f64>>> = exec::map_indexed(b, |r| {
        let mut rng = seed.with_stream(r as u64).rng();
        let resampled: Vec<ScorePairs> = pairs
            .iter()
            .map(|wf| {
                let n = wf.n();
                let mut y1 = Vec::with_capacity(n);
                let mut y2 = Vec::with_capacity(n);
                for _ in 0..n {
                    let i = rng.random_range(0..n);
                    y1.push(wf.y1[i]);
                    y2.push(wf.y2[i]);
                }
                ScorePairs {
                    workflow_id: wf.workflow_id.clone(),
                    y1,
                    y2,
                    covariates: wf.covariates.clone(),
                }
            })
            .collect();

        let data = DesignSet::from_score_pairs(&resampled, orientation, grid).ok()?;
        let fit = fit_segmented(&data, grid, tau_grid).ok()?;
        if !fit.converged {
            return None;
        }
        Some(flatten_params(&fit))
    });

    let estimates: Vec<Vec<f64>> = replicates.into_iter().flatten().collect();
    let failures = b - estimates.len();
    if failures as f64 > 0.2 * b as f64 {
        return Err(Error::TooManyFailures {
            failed: failures,
            total: b,
            limit: (0.2 * b as f64).floor() as usize,
        });
    }

    let p = estimates[0].len();
    let b_used = estimates.len();
    let mut se = Vec::with_capacity(p);
    let mut ci_lower = Vec::with_capacity(p);
    let mut ci_upper = Vec::with_capacity(p);
    for k in 0..p {
        let column: Vec<f64> = estimates.iter().map(|row| row[k]).collect();
        let mean = column.iter().sum::<f64>() / b_used as f64;
        let var =
            column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (b_used - 1) as f64;
        se.push(var.sqrt());
        let mut sorted = column;
        sorted.sort_unstable_by(f64::total_cmp);
        ci_lower.push(sorted_quantile(&sorted, 0.025));
        ci_upper.push(sorted_quantile(&sorted, 0.975));
    }

    Ok(BootstrapResult {
        b,
        b_used,
        failures,
        parameter_names: parameter_names(pairs[0].covariates.len() + 1),
        estimates,
        se,
        ci_lower,
        ci_upper,
    })
}

/// A two-sided Wald test for one covariate slope.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct WaldTest {
    pub parameter: String,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Wald tests for every covariate slope (the intercept pair is not tested),
/// using bootstrap standard errors. Empty when the fit has no covariates.
pub fn wald_tests(fit: &FitResult, boot: &BootstrapResult) -> Vec<WaldTest> {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut tests = Vec::new();
    for s in 1..fit.params.beta.len() {
        for j in 0..2 {
            let estimate = fit.params.beta[s][j];
            let se = boot.se[1 + 2 * s + j];
            let (z, p_value) = if se > 0.0 && se.is_finite() {
                let z = estimate / se;
                (z, 2.0 * (1.0 - normal.cdf(z.abs())))
            } else {
                (f64::NAN, f64::NAN)
            };
            tests.push(WaldTest {
                parameter: format!("beta_{s}_{}", j + 1),
                estimate,
                se,
                z,
                p_value,
            });
        }
    }
    tests
}

/// Change-point existence test summary.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct QlrResult {
    /// Observed likelihood-ratio statistic: segmented profile maximum minus
    /// homogeneous maximum, on the total log-likelihood scale.
    pub qlr: f64,
    /// Simulated null statistics, one per multiplier draw.
    pub null_draws: Vec<f64>,
    /// Fraction of null draws strictly exceeding the observed statistic.
    pub p_value: f64,
    pub nb: usize,
    /// Change-point candidates dropped because their information matrix was
    /// singular even after regularization (typically the grid edges).
    pub skipped_candidates: usize,
}

/// Observed statistic for the change-point existence test on one workflow:
/// the profiled segmented log-likelihood minus the homogeneous one.
/// Covariates on `pairs` are ignored; the test concerns a single workflow's
/// curve. Also returns the underlying segmented fit.
pub fn qlr_statistic(
    pairs: &ScorePairs,
    orientation: Orientation,
    grid: &CutoffGrid,
    tau_grid: &[f64],
) -> Result<(f64, FitResult)> {
    let stripped = ScorePairs {
        covariates: vec![],
        ..pairs.clone()
    };
    let data = DesignSet::from_score_pairs(std::slice::from_ref(&stripped), orientation, grid)?;
    let fit = fit_segmented(&data, grid, tau_grid)?;
    Ok((fit.loglik - fit.homogeneous.loglik, fit))
}

/// Per-candidate quantities reused across all multiplier draws.
struct CandidateKernel {
    /// Per-category score vectors at the restricted estimate.
    v: Vec<[f64; 2]>,
    /// Inverse information, row-major upper triangle (i11, i12, i22).
    inv: [f64; 3],
}

fn invert_information(counts: &[u64], n: f64, v: &[[f64; 2]]) -> Option<[f64; 3]> {
    let mut i11 = 0.0;
    let mut i12 = 0.0;
    let mut i22 = 0.0;
    for (c, vm) in counts.iter().zip(v) {
        let w = *c as f64 / n;
        i11 += w * vm[0] * vm[0];
        i12 += w * vm[0] * vm[1];
        i22 += w * vm[1] * vm[1];
    }
    let invert = |a11: f64, a12: f64, a22: f64| -> Option<[f64; 3]> {
        let det = a11 * a22 - a12 * a12;
        if det > 1e-12 * (a11 * a22).max(f64::MIN_POSITIVE) {
            Some([a22 / det, -a12 / det, a11 / det])
        } else {
            None
        }
    };
    // One shot of ridge regularization before giving up on the candidate.
    invert(i11, i12, i22).or_else(|| {
        let ridge = 1e-10 * (i11 + i22);
        invert(i11 + ridge, i12, i22 + ridge)
    })
}

/// Simulates the null distribution of the change-point statistic and returns
/// the test summary.
///
/// Under the no-change-point null the statistic behaves like the supremum
/// over candidates of a quadratic form in the restricted score process minus
/// its one-dimensional homogeneous counterpart. Both processes depend on the
/// data only through per-category score sums, so each multiplier draw
/// perturbs the categories with independent normals scaled by the category
/// counts. Draw `j` uses stream `j` of `seed`.
pub fn qlr_null_pvalue(
    pairs: &ScorePairs,
    orientation: Orientation,
    grid: &CutoffGrid,
    tau_grid: &[f64],
    nb: usize,
    seed: SeededRng,
) -> Result<QlrResult> {
    if nb < 1 {
        return Err(Error::Domain {
            name: "nb",
            value: nb as f64,
            domain: "[1, inf)",
        });
    }
    let (qlr, fit) = qlr_statistic(pairs, orientation, grid, tau_grid)?;

    let stripped = ScorePairs {
        covariates: vec![],
        ..pairs.clone()
    };
    let ranks = to_uniform_ranks(&stripped, orientation)?;
    let counts = category_counts(&ranks, grid);
    let n = counts.n as f64;
    let restricted_slope = fit.homogeneous.slopes[0];

    // Homogeneous direction: scalar per-category scores and information.
    let r = category_score_homogeneous(restricted_slope, grid)?;
    let info1: f64 = counts
        .counts
        .iter()
        .zip(&r)
        .map(|(c, rm)| *c as f64 / n * rm * rm)
        .sum();
    if !(info1 > 0.0) {
        return Err(Error::SingularInformation);
    }

    let mut kernels = Vec::with_capacity(tau_grid.len());
    let mut skipped_candidates = 0;
    for &tau in tau_grid {
        let v = category_score_segmented(restricted_slope, grid, tau)?;
        match invert_information(&counts.counts, n, &v) {
            Some(inv) => kernels.push(CandidateKernel { v, inv }),
            None => skipped_candidates += 1,
        }
    }
    if kernels.is_empty() {
        return Err(Error::SingularInformation);
    }

    let sqrt_counts: Vec<f64> = counts.counts.iter().map(|&c| (c as f64).sqrt()).collect();
    let sqrt_n = n.sqrt();

    let null_draws: Vec<f64> = exec::map_indexed(nb, |j| {
        let mut rng = seed.with_stream(j as u64).rng();
        // One normal per category, scaled to the category's count: the
        // multiplier sum over candidates collapses to its per-category sums.
        let z: Vec<f64> = sqrt_counts
            .iter()
            .map(|&s| s * rng.sample::<f64, _>(StandardNormal) / sqrt_n)
            .collect();

        let g1: f64 = z.iter().zip(&r).map(|(zm, rm)| zm * rm).sum();
        let restricted_term = g1 * g1 / info1;

        let mut best = f64::NEG_INFINITY;
        for kernel in &kernels {
            let mut ga = 0.0;
            let mut gb = 0.0;
            for (zm, vm) in z.iter().zip(&kernel.v) {
                ga += zm * vm[0];
                gb += zm * vm[1];
            }
            let quad = kernel.inv[0] * ga * ga
                + 2.0 * kernel.inv[1] * ga * gb
                + kernel.inv[2] * gb * gb;
            if quad > best {
                best = quad;
            }
        }
        0.5 * (best - restricted_term)
    });

    let exceed = null_draws.iter().filter(|&&d| d > qlr).count();
    Ok(QlrResult {
        qlr,
        p_value: exceed as f64 / nb as f64,
        null_draws,
        nb,
        skipped_candidates,
    })
}
