//! Segmented correspondence curve regression.
//!
//! Given paired scores from two replicates of an experiment, the
//! correspondence curve tracks how consistently the top-ranked candidates of
//! one replicate reappear among the top-ranked candidates of the other as
//! the report depth grows. This crate models that curve with a two-segment
//! power law in log depth: reproducible candidates dominate above a
//! change-point depth and behave differently below it, and workflow-level
//! covariates shift the slopes of both segments.
//!
//! The pipeline is: rank-normalize scores ([`empirical`]), bin candidates
//! into report-depth categories and evaluate the multinomial likelihood
//! ([`likelihood`]), profile it over a change-point grid ([`estimation`]),
//! then quantify uncertainty by bootstrap and test whether a change point
//! exists at all ([`inference`]). [`simulation`] and [`benchmark`] generate
//! synthetic mixtures with known change points and measure recovery, error,
//! and test power over replicated runs.
//!
//! Everything randomized takes a [`SeededRng`] and is bitwise reproducible
//! for a fixed seed, independent of thread count; disable the default
//! `parallel` feature to run single-threaded with identical results.

pub mod benchmark;
pub mod empirical;
pub mod error;
pub mod estimation;
pub mod exec;
pub mod inference;
pub mod likelihood;
pub mod simulation;
pub mod types;

pub use empirical::{category_counts, empirical_curve, to_uniform_ranks, CategoryCounts, EmpiricalCurve};
pub use error::{Error, Result};
pub use estimation::{
    default_tau_grid, default_test_tau_grid, fit_beta_given_tau, fit_homogeneous, fit_segmented, fit_segmented_warm,
    fitted_curve, fitted_curve_homogeneous, FitResult, HomogeneousFit, ProfilePoint,
};
pub use inference::{
    bootstrap, parameter_names, qlr_null_pvalue, qlr_statistic, wald_tests, BootstrapResult,
    QlrResult, WaldTest,
};
pub use likelihood::{
    basis_w, log_likelihood, log_likelihood_homogeneous, model_log_psi, score_beta,
    score_homogeneous, DesignSet, WorkflowData,
};
pub use simulation::{
    generate_scenario1, generate_scenario2, mise, sample_gumbel_copula, ScenarioSpec,
};
pub use types::{
    validate_score_pairs, CutoffGrid, Orientation, ScorePairs, SeededRng, SegmentedParams,
    UniformRanks,
};
pub use benchmark::{
    run_benchmark, standard_rows, BenchRow, BenchmarkConfig, BenchmarkReport, RowReport,
};
