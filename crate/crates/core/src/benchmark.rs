//! Desk-scale benchmark harness: replicated simulation rows measuring
//! change-point recovery and curve accuracy, covariate effect detection,
//! and power of the change-point existence test.

use serde::Serialize;

use crate::empirical::{empirical_curve, to_uniform_ranks};
use crate::error::{Error, Result};
use crate::estimation::{
    default_tau_grid, default_test_tau_grid, fit_segmented, fitted_curve_homogeneous,
};
use crate::exec;
use crate::inference::{bootstrap, qlr_null_pvalue, wald_tests};
use crate::likelihood::DesignSet;
use crate::simulation::{generate_scenario1, generate_scenario2, mise, ScenarioSpec};
use crate::types::{CutoffGrid, Orientation, ScorePairs, SeededRng};

/// Seed-derivation tags for the nested randomized stages of one replicate.
const TAG_DATA_ALT: u64 = 1;
const TAG_BOOTSTRAP: u64 = 2;
const TAG_MULTIPLIER: u64 = 3;

/// One benchmark row: a data-generating configuration and what to measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BenchRow {
    /// Fit one simulated workflow; record the change point and the
    /// integrated squared error of the segmented and homogeneous curves.
    Baseline {
        /// 1 = copula mixture, 2 = normal mixture.
        scenario: u8,
        pi1: f64,
        theta1: f64,
        theta2: f64,
    },
    /// Fit two workflows differing in one binary covariate; record
    /// coefficient estimates, bootstrap standard errors, and Wald rejections.
    Covariate {
        pi1: f64,
        /// Strong-component dependence of the reference workflow.
        theta2_ref: f64,
        /// Strong-component dependence of the contrast workflow.
        theta2_alt: f64,
        /// Bootstrap replicates per fit.
        b: usize,
    },
    /// Run the change-point existence test; record its rejection rate at
    /// the 5% level.
    QlrPower {
        pi1: f64,
        theta2: f64,
        /// Multiplier draws per test.
        nb: usize,
    },
}

impl BenchRow {
    fn label(&self) -> String {
        match self {
            BenchRow::Baseline {
                scenario,
                pi1,
                theta1,
                theta2,
            } => format!("scenario{scenario}_pi{pi1:.2}_t1_{theta1:.1}_t2_{theta2:.1}"),
            BenchRow::Covariate {
                pi1,
                theta2_ref,
                theta2_alt,
                ..
            } => format!("covariate_pi{pi1:.2}_ref{theta2_ref:.1}_alt{theta2_alt:.1}"),
            BenchRow::QlrPower { pi1, theta2, .. } => {
                format!("qlr_pi{pi1:.2}_t2_{theta2:.1}")
            }
        }
    }
}

/// A benchmark run: which rows, how many replicates each, at what size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkConfig {
    pub rows: Vec<BenchRow>,
    pub replicates: usize,
    /// Candidates per simulated workflow.
    pub n: usize,
    /// Report cutoff count (equally spaced).
    pub cutoffs: usize,
    pub seed: u64,
}

impl BenchmarkConfig {
    /// Quick desk-scale defaults for the given rows.
    pub fn fast(rows: Vec<BenchRow>, seed: u64) -> Self {
        Self {
            rows,
            replicates: 25,
            n: 4000,
            cutoffs: 100,
            seed,
        }
    }

    /// Full-size defaults: 100 replicates of n = 10000 per row.
    pub fn full(rows: Vec<BenchRow>, seed: u64) -> Self {
        Self {
            rows,
            replicates: 100,
            n: 10_000,
            cutoffs: 100,
            seed,
        }
    }
}

/// Named summary statistics for one row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowReport {
    pub label: String,
    pub replicates: usize,
    pub stats: Vec<(String, f64)>,
}

impl RowReport {
    /// Looks up one statistic by name.
    pub fn stat(&self, name: &str) -> Option<f64> {
        self.stats
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| *v)
    }
}

/// All rows of one benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub rows: Vec<RowReport>,
}

impl BenchmarkReport {
    /// Tab-separated rendering: one line per (row, statistic).
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("row\treplicates\tstatistic\tvalue\n");
        for row in &self.rows {
            for (name, value) in &row.stats {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{:.6}\n",
                    row.label, row.replicates, name, value
                ));
            }
        }
        out
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

fn rate(flags: &[bool]) -> f64 {
    flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64
}

fn generate(row_spec: &ScenarioSpec, scenario: u8, seed: SeededRng) -> Result<ScorePairs> {
    match scenario {
        1 => generate_scenario1(row_spec, seed),
        2 => generate_scenario2(row_spec, seed),
        other => Err(Error::Domain {
            name: "scenario",
            value: other as f64,
            domain: "{1, 2}",
        }),
    }
}

struct BaselineRep {
    tau: f64,
    mise_segmented: f64,
    mise_homogeneous: f64,
    converged: bool,
}

fn run_baseline(
    scenario: u8,
    pi1: f64,
    theta1: f64,
    theta2: f64,
    config: &BenchmarkConfig,
    row_seed: SeededRng,
) -> Result<RowReport> {
    let grid = CutoffGrid::uniform(config.cutoffs)?;
    let tau_grid = default_tau_grid(&grid);
    let spec = ScenarioSpec {
        n: config.n,
        pi1,
        theta1,
        theta2,
        ..if scenario == 1 {
            ScenarioSpec::scenario1(config.n, pi1, theta2)
        } else {
            ScenarioSpec::scenario2(config.n, pi1, theta1)
        }
    };

    let reps: Vec<Result<BaselineRep>> = exec::map_indexed(config.replicates, |r| {
        let pairs = generate(&spec, scenario, row_seed.with_stream(r as u64))?;
        let ranks = to_uniform_ranks(&pairs, Orientation::HigherIsStronger)?;
        let data = DesignSet::from_score_pairs(
            std::slice::from_ref(&pairs),
            Orientation::HigherIsStronger,
            &grid,
        )?;
        let fit = fit_segmented(&data, &grid, &tau_grid)?;
        let emp = empirical_curve(&ranks, &grid);
        let homog_curve = fitted_curve_homogeneous(&fit.homogeneous.slopes, &[], &grid)?;
        Ok(BaselineRep {
            tau: fit.params.tau,
            mise_segmented: mise(&fit.fitted_curves[0], &emp)?,
            mise_homogeneous: mise(&homog_curve, &emp)?,
            converged: fit.converged,
        })
    });
    let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;

    let taus: Vec<f64> = reps.iter().map(|r| r.tau).collect();
    let mise_s: Vec<f64> = reps.iter().map(|r| r.mise_segmented).collect();
    let mise_h: Vec<f64> = reps.iter().map(|r| r.mise_homogeneous).collect();
    let better: Vec<bool> = reps
        .iter()
        .map(|r| r.mise_segmented < r.mise_homogeneous)
        .collect();
    let converged: Vec<bool> = reps.iter().map(|r| r.converged).collect();

    Ok(RowReport {
        label: BenchRow::Baseline {
            scenario,
            pi1,
            theta1,
            theta2,
        }
        .label(),
        replicates: config.replicates,
        stats: vec![
            ("tau_mean".into(), mean(&taus)),
            ("tau_sd".into(), sd(&taus)),
            ("mise_segmented_mean".into(), mean(&mise_s)),
            ("mise_homogeneous_mean".into(), mean(&mise_h)),
            ("segmented_better_rate".into(), rate(&better)),
            ("converged_rate".into(), rate(&converged)),
        ],
    })
}

struct CovariateRep {
    estimates: [f64; 5],
    ses: [f64; 5],
    reject_lower: bool,
    reject_upper: bool,
}

fn run_covariate(
    pi1: f64,
    theta2_ref: f64,
    theta2_alt: f64,
    b: usize,
    config: &BenchmarkConfig,
    row_seed: SeededRng,
) -> Result<RowReport> {
    let grid = CutoffGrid::uniform(config.cutoffs)?;
    let tau_grid = default_tau_grid(&grid);

    let reps: Vec<Result<CovariateRep>> = exec::map_indexed(config.replicates, |r| {
        let rep_seed = row_seed.with_stream(r as u64);
        let mut reference =
            generate_scenario1(&ScenarioSpec::scenario1(config.n, pi1, theta2_ref), rep_seed)?;
        reference.workflow_id = "w0".into();
        let mut contrast = generate_scenario1(
            &ScenarioSpec::scenario1(config.n, pi1, theta2_alt),
            rep_seed.derive(TAG_DATA_ALT),
        )?;
        contrast.workflow_id = "w1".into();
        contrast.covariates = vec![1.0];
        reference.covariates = vec![0.0];
        let pairs = [reference, contrast];

        let data =
            DesignSet::from_score_pairs(&pairs, Orientation::HigherIsStronger, &grid)?;
        let fit = fit_segmented(&data, &grid, &tau_grid)?;
        let boot = bootstrap(
            &pairs,
            Orientation::HigherIsStronger,
            &grid,
            &tau_grid,
            b,
            rep_seed.derive(TAG_BOOTSTRAP),
        )?;
        let tests = wald_tests(&fit, &boot);

        Ok(CovariateRep {
            estimates: [
                fit.params.tau,
                fit.params.beta[0][0],
                fit.params.beta[0][1],
                fit.params.beta[1][0],
                fit.params.beta[1][1],
            ],
            ses: [boot.se[0], boot.se[1], boot.se[2], boot.se[3], boot.se[4]],
            reject_lower: tests[0].p_value < 0.05,
            reject_upper: tests[1].p_value < 0.05,
        })
    });
    let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;

    let names = ["tau", "beta_0_1", "beta_0_2", "beta_1_1", "beta_1_2"];
    let mut stats = Vec::new();
    for (k, name) in names.iter().enumerate() {
        let col: Vec<f64> = reps.iter().map(|r| r.estimates[k]).collect();
        let ses: Vec<f64> = reps.iter().map(|r| r.ses[k]).collect();
        stats.push((format!("{name}_mean"), mean(&col)));
        stats.push((format!("{name}_sd"), sd(&col)));
        stats.push((format!("{name}_boot_se_mean"), mean(&ses)));
    }
    let lower: Vec<bool> = reps.iter().map(|r| r.reject_lower).collect();
    let upper: Vec<bool> = reps.iter().map(|r| r.reject_upper).collect();
    stats.push(("reject_beta_1_1_rate".into(), rate(&lower)));
    stats.push(("reject_beta_1_2_rate".into(), rate(&upper)));

    Ok(RowReport {
        label: BenchRow::Covariate {
            pi1,
            theta2_ref,
            theta2_alt,
            b,
        }
        .label(),
        replicates: config.replicates,
        stats,
    })
}

fn run_qlr_power(
    pi1: f64,
    theta2: f64,
    nb: usize,
    config: &BenchmarkConfig,
    row_seed: SeededRng,
) -> Result<RowReport> {
    let grid = CutoffGrid::uniform(config.cutoffs)?;
    let tau_grid = default_test_tau_grid(&grid);
    let spec = ScenarioSpec::scenario1(config.n, pi1, theta2);

    let reps: Vec<Result<(f64, bool)>> = exec::map_indexed(config.replicates, |r| {
        let rep_seed = row_seed.with_stream(r as u64);
        let pairs = generate_scenario1(&spec, rep_seed)?;
        let out = qlr_null_pvalue(
            &pairs,
            Orientation::HigherIsStronger,
            &grid,
            &tau_grid,
            nb,
            rep_seed.derive(TAG_MULTIPLIER),
        )?;
        Ok((out.qlr, out.p_value < 0.05))
    });
    let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;

    let qlrs: Vec<f64> = reps.iter().map(|r| r.0).collect();
    let rejections: Vec<bool> = reps.iter().map(|r| r.1).collect();

    Ok(RowReport {
        label: BenchRow::QlrPower { pi1, theta2, nb }.label(),
        replicates: config.replicates,
        stats: vec![
            ("reject_rate".into(), rate(&rejections)),
            ("qlr_mean".into(), mean(&qlrs)),
        ],
    })
}

/// Runs every row of the configuration. Row `i` draws from an independent
/// seed derived from `config.seed` and row index, so adding or removing rows
/// never changes another row's numbers.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if config.rows.is_empty() {
        return Err(Error::InvalidDesign("benchmark has no rows".into()));
    }
    if config.replicates == 0 {
        return Err(Error::Domain {
            name: "replicates",
            value: 0.0,
            domain: "[1, inf)",
        });
    }
    let mut rows = Vec::with_capacity(config.rows.len());
    for (i, row) in config.rows.iter().enumerate() {
        let row_seed = SeededRng::new(config.seed).derive(1000 + i as u64);
        let report = match *row {
            BenchRow::Baseline {
                scenario,
                pi1,
                theta1,
                theta2,
            } => run_baseline(scenario, pi1, theta1, theta2, config, row_seed)?,
            BenchRow::Covariate {
                pi1,
                theta2_ref,
                theta2_alt,
                b,
            } => run_covariate(pi1, theta2_ref, theta2_alt, b, config, row_seed)?,
            BenchRow::QlrPower { pi1, theta2, nb } => {
                run_qlr_power(pi1, theta2, nb, config, row_seed)?
            }
        };
        rows.push(report);
    }
    Ok(BenchmarkReport {
        config: config.clone(),
        rows,
    })
}

/// The standard row sets, keyed by what they measure: change-point recovery
/// for the copula mixture ("copula") and the normal mixture ("normal"),
/// covariate effect detection ("covariate"), existence-test power ("power"),
/// or everything ("all").
pub fn standard_rows(which: &str) -> Result<Vec<BenchRow>> {
    let copula: Vec<BenchRow> = [1.2, 3.0]
        .iter()
        .flat_map(|&theta2| {
            [0.6, 0.8, 0.9, 0.95].iter().map(move |&pi1| BenchRow::Baseline {
                scenario: 1,
                pi1,
                theta1: 1.0,
                theta2,
            })
        })
        .collect();
    let normal: Vec<BenchRow> = [0.0, 0.4]
        .iter()
        .flat_map(|&theta1| {
            [0.6, 0.8, 0.9, 0.95].iter().map(move |&pi1| BenchRow::Baseline {
                scenario: 2,
                pi1,
                theta1,
                theta2: 0.9,
            })
        })
        .collect();
    let covariate: Vec<BenchRow> = [0.6, 0.8, 0.9]
        .iter()
        .flat_map(|&pi1| {
            [(1.2, 1.2), (1.2, 2.0)]
                .iter()
                .map(move |&(theta2_ref, theta2_alt)| BenchRow::Covariate {
                    pi1,
                    theta2_ref,
                    theta2_alt,
                    b: 100,
                })
        })
        .collect();
    let power: Vec<BenchRow> = [0.0, 0.8, 0.9, 0.95, 0.96, 0.97, 0.98, 0.99, 1.0]
        .iter()
        .map(|&pi1| BenchRow::QlrPower {
            pi1,
            theta2: 1.2,
            nb: 1000,
        })
        .collect();

    match which {
        "copula" => Ok(copula),
        "normal" => Ok(normal),
        "covariate" => Ok(covariate),
        "power" => Ok(power),
        "all" => Ok([copula, normal, covariate, power].concat()),
        other => Err(Error::InvalidDesign(format!(
            "unknown benchmark row set '{other}' (expected copula, normal, covariate, power, or all)"
        ))),
    }
}
