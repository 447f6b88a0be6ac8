//! Result-document assembly. Every run writes one JSON document with the
//! top-level keys {model, estimates, profile, curves, tests, provenance};
//! sections that do not apply to a subcommand are null. Plot data goes to a
//! separate tab-separated export.
//!
//! Documents contain no timestamps or host details, so rerunning with the
//! same inputs and seed reproduces them byte for byte. Non-finite numbers
//! (a failed profile point, an undefined p-value) serialize as null.

use serde_json::{json, Value};

use segccr_core::{
    BootstrapResult, CutoffGrid, EmpiricalCurve, FitResult, QlrResult, ScorePairs, WaldTest,
};

/// JSON number, or null when the value is not finite.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn num_vec(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

/// Provenance block shared by all subcommands: the seed, the crate version,
/// and digests of the exact input bytes.
pub struct Provenance {
    pub seed: u64,
    pub scores_sha256: String,
    pub covariates_sha256: Option<String>,
}

impl Provenance {
    fn to_value(&self, command: &str) -> Value {
        json!({
            "command": command,
            "seed": self.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "scores_sha256": self.scores_sha256,
            "covariates_sha256": self.covariates_sha256,
        })
    }
}

fn model_block(
    orientation: &str,
    grid: &CutoffGrid,
    tau_grid: &[f64],
    pairs: &[ScorePairs],
    covariate_names: &[String],
) -> Value {
    json!({
        "orientation": orientation,
        "cutoffs": grid.m(),
        "cutoff_values": num_vec(grid.cutoffs()),
        "tau_grid": num_vec(tau_grid),
        "workflows": pairs.iter().map(|p| p.workflow_id.clone()).collect::<Vec<_>>(),
        "pairs_per_workflow": pairs.iter().map(|p| p.n()).collect::<Vec<_>>(),
        "covariate_names": covariate_names,
    })
}

fn bootstrap_block(boot: &BootstrapResult) -> Value {
    json!({
        "b": boot.b,
        "b_used": boot.b_used,
        "failures": boot.failures,
        "parameter_names": boot.parameter_names,
        "se": num_vec(&boot.se),
        "ci_lower": num_vec(&boot.ci_lower),
        "ci_upper": num_vec(&boot.ci_upper),
    })
}

fn wald_block(tests: &[WaldTest]) -> Value {
    Value::Array(
        tests
            .iter()
            .map(|t| {
                json!({
                    "parameter": t.parameter,
                    "estimate": num(t.estimate),
                    "se": num(t.se),
                    "z": num(t.z),
                    "p_value": num(t.p_value),
                })
            })
            .collect(),
    )
}

fn curves_block(
    pairs: &[ScorePairs],
    empirical: &[EmpiricalCurve],
    fitted: Option<&[Vec<f64>]>,
) -> Value {
    Value::Array(
        pairs
            .iter()
            .enumerate()
            .map(|(w, p)| {
                json!({
                    "workflow": p.workflow_id,
                    "t": num_vec(&empirical[w].t),
                    "empirical": num_vec(&empirical[w].psi),
                    "fitted": fitted.map(|f| num_vec(&f[w])),
                })
            })
            .collect(),
    )
}

/// Document for `fit`: estimates with bootstrap intervals, the profile
/// trace, per-workflow curves, and Wald tests when covariates are present.
#[allow(clippy::too_many_arguments)]
pub fn fit_document(
    orientation: &str,
    grid: &CutoffGrid,
    tau_grid: &[f64],
    pairs: &[ScorePairs],
    covariate_names: &[String],
    fit: &FitResult,
    boot: Option<&BootstrapResult>,
    wald: Option<&[WaldTest]>,
    empirical: &[EmpiricalCurve],
    provenance: &Provenance,
) -> Value {
    let beta: Vec<Value> = fit
        .params
        .beta
        .iter()
        .map(|b| json!([num(b[0]), num(b[1])]))
        .collect();
    let profile: Vec<Value> = fit
        .profile
        .iter()
        .map(|p| {
            json!({
                "tau": num(p.tau),
                "loglik": num(p.loglik),
                "converged": p.converged,
                "iterations": p.iterations,
            })
        })
        .collect();
    json!({
        "model": model_block(orientation, grid, tau_grid, pairs, covariate_names),
        "estimates": {
            "tau": num(fit.params.tau),
            "beta": beta,
            "loglik": num(fit.loglik),
            "converged": fit.converged,
            "homogeneous": {
                "slopes": num_vec(&fit.homogeneous.slopes),
                "loglik": num(fit.homogeneous.loglik),
                "converged": fit.homogeneous.converged,
            },
            "bootstrap": boot.map(bootstrap_block),
        },
        "profile": profile,
        "curves": curves_block(pairs, empirical, Some(&fit.fitted_curves)),
        "tests": {
            "wald": wald.map(wald_block),
            "qlr": Value::Null,
        },
        "provenance": provenance.to_value("fit"),
    })
}

/// One per-workflow entry of the `test` document.
pub struct QlrEntry {
    pub workflow: String,
    pub cutoffs: usize,
    pub tau_hat: f64,
    pub segment_slopes: [f64; 2],
    pub homogeneous_slope: f64,
    pub result: QlrResult,
}

/// Document for `test`: one change-point existence test per workflow.
pub fn test_document(orientation: &str, entries: &[QlrEntry], provenance: &Provenance) -> Value {
    let qlr: Vec<Value> = entries
        .iter()
        .map(|e| {
            json!({
                "workflow": e.workflow,
                "cutoffs": e.cutoffs,
                "qlr": num(e.result.qlr),
                "p_value": num(e.result.p_value),
                "nb": e.result.nb,
                "skipped_candidates": e.result.skipped_candidates,
                "tau_hat": num(e.tau_hat),
                "segment_slopes": [num(e.segment_slopes[0]), num(e.segment_slopes[1])],
                "homogeneous_slope": num(e.homogeneous_slope),
            })
        })
        .collect();
    json!({
        "model": { "orientation": orientation },
        "estimates": Value::Null,
        "profile": Value::Null,
        "curves": Value::Null,
        "tests": { "wald": Value::Null, "qlr": qlr },
        "provenance": provenance.to_value("test"),
    })
}

/// Tab-separated plot data: one row per workflow and cutoff. `psi_fitted` is
/// `NA` when only the empirical curve was computed.
pub fn plot_data(
    pairs: &[ScorePairs],
    empirical: &[EmpiricalCurve],
    fitted: Option<&[Vec<f64>]>,
) -> String {
    let mut out = String::from("workflow\tt\tpsi_empirical\tpsi_fitted\n");
    for (w, p) in pairs.iter().enumerate() {
        for (k, &t) in empirical[w].t.iter().enumerate() {
            let fitted_field = match fitted {
                Some(f) => f[w][k].to_string(),
                None => "NA".to_string(),
            };
            out.push_str(&format!(
                "{}\t{t}\t{}\t{fitted_field}\n",
                p.workflow_id, empirical[w].psi[k]
            ));
        }
    }
    out
}
