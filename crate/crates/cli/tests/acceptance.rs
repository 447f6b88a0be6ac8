//! Acceptance suite: one test per shipped acceptance criterion. Each test
//! prints a single `ACCEPTANCE <n> PASS|FAIL` line followed by its component
//! checks (run with `--nocapture` to see them), then asserts the verdict.
//!
//! Criteria 2-4 are desk-scale Monte Carlo studies and dominate the runtime;
//! each asserts its own wall-clock budget.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use tempfile::TempDir;

use segccr_core::{
    bootstrap, category_counts, default_tau_grid, empirical_curve, fit_homogeneous, fit_segmented,
    fitted_curve, generate_scenario1, log_likelihood, mise, model_log_psi, qlr_null_pvalue,
    qlr_statistic, run_benchmark, sample_gumbel_copula, score_beta, to_uniform_ranks, BenchRow,
    BenchmarkConfig, CutoffGrid, DesignSet, Orientation, ScenarioSpec, ScorePairs, SeededRng,
    SegmentedParams, WorkflowData,
};

/// Collects per-criterion checks and prints the one-line verdict.
struct Criterion {
    number: usize,
    name: &'static str,
    checks: Vec<(String, bool)>,
}

impl Criterion {
    fn new(number: usize, name: &'static str) -> Self {
        Self {
            number,
            name,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.checks.push((detail, ok));
    }

    fn budget(&mut self, started: Instant, limit: Duration) {
        let elapsed = started.elapsed();
        self.check(
            elapsed < limit,
            format!("runtime {:.1}s within {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()),
        );
    }

    fn finish(self) {
        let pass = self.checks.iter().all(|c| c.1);
        println!(
            "ACCEPTANCE {} {}: {}",
            self.number,
            if pass { "PASS" } else { "FAIL" },
            self.name
        );
        for (detail, ok) in &self.checks {
            println!("  [{}] {detail}", if *ok { "ok" } else { "FAIL" });
        }
        assert!(pass, "acceptance criterion {} failed", self.number);
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn single_workflow(y1: Vec<f64>, y2: Vec<f64>) -> ScorePairs {
    ScorePairs::new("w", y1, y2, vec![]).expect("valid workflow")
}

fn design_for(
    pairs: &ScorePairs,
    orientation: Orientation,
    grid: &CutoffGrid,
) -> DesignSet {
    DesignSet::from_score_pairs(std::slice::from_ref(pairs), orientation, grid)
        .expect("valid design")
}

#[test]
fn acceptance_1_homogeneous_slope_recovery() {
    let started = Instant::now();
    let mut c = Criterion::new(1, "homogeneous slope recovery on pure copula samples");
    let grid = CutoffGrid::default_for(10_000);
    for (tag, theta, target) in [(1u64, 1.0, 2.0), (2u64, 2.0, std::f64::consts::SQRT_2)] {
        let mut slopes = Vec::with_capacity(25);
        for r in 0..25u64 {
            let mut rng = SeededRng::new(101).derive(tag).with_stream(r).rng();
            let uv = sample_gumbel_copula(theta, 10_000, &mut rng).unwrap();
            let (y1, y2): (Vec<f64>, Vec<f64>) = uv.into_iter().unzip();
            let pairs = single_workflow(y1, y2);
            let data = design_for(&pairs, Orientation::HigherIsStronger, &grid);
            let fit = fit_homogeneous(&data, &grid).unwrap();
            assert!(fit.converged);
            slopes.push(fit.slopes[0]);
        }
        let m = mean(&slopes);
        let se = sd(&slopes) / (slopes.len() as f64).sqrt();
        c.check(
            (m - target).abs() <= 3.0 * se,
            format!("theta={theta}: mean slope {m:.4} within 3 MC SEs (3x{se:.4}) of {target:.5}"),
        );
    }
    c.budget(started, Duration::from_secs(60));
    c.finish();
}

#[test]
fn acceptance_2_mixture_change_point_recovery() {
    let started = Instant::now();
    let mut c = Criterion::new(2, "copula-mixture change-point recovery at study scale");
    let targets = [(0.6, 0.557), (0.8, 0.773), (0.9, 0.882), (0.95, 0.938)];
    let rows: Vec<BenchRow> = targets
        .iter()
        .map(|&(pi1, _)| BenchRow::Baseline {
            scenario: 1,
            pi1,
            theta1: 1.0,
            theta2: 1.2,
        })
        .collect();
    let config = BenchmarkConfig {
        rows,
        replicates: 25,
        n: 10_000,
        cutoffs: 100,
        seed: 20_240_202,
    };
    let report = run_benchmark(&config).unwrap();
    let mut better_rates = Vec::new();
    for (row, &(pi1, target)) in report.rows.iter().zip(&targets) {
        let tau_mean = row.stat("tau_mean").unwrap();
        c.check(
            (tau_mean - target).abs() <= 0.03,
            format!("pi1={pi1}: mean change point {tau_mean:.4} within 0.03 of {target}"),
        );
        better_rates.push(row.stat("segmented_better_rate").unwrap());
    }
    let pooled = mean(&better_rates);
    c.check(
        pooled >= 0.90,
        format!("segmented fit beats homogeneous in {:.0}% of replicates (>= 90%)", pooled * 100.0),
    );
    c.budget(started, Duration::from_secs(600));
    c.finish();
}

#[test]
fn acceptance_3_covariate_effect_detection() {
    let started = Instant::now();
    let mut c = Criterion::new(3, "Wald detection of a strong-segment covariate effect");
    let config = BenchmarkConfig {
        rows: vec![BenchRow::Covariate {
            pi1: 0.6,
            theta2_ref: 1.2,
            theta2_alt: 2.0,
            b: 100,
        }],
        replicates: 25,
        n: 10_000,
        cutoffs: 100,
        seed: 20_240_303,
    };
    let report = run_benchmark(&config).unwrap();
    let row = &report.rows[0];
    let reject_strong = row.stat("reject_beta_1_2_rate").unwrap();
    let reject_weak = row.stat("reject_beta_1_1_rate").unwrap();
    c.check(
        reject_strong >= 0.85,
        format!("strong-segment effect rejected in {:.0}% of replicates (>= 85%)", reject_strong * 100.0),
    );
    c.check(
        reject_weak <= 0.25,
        format!("weak-segment null rejected in {:.0}% of replicates (<= 25%)", reject_weak * 100.0),
    );
    c.budget(started, Duration::from_secs(1800));
    c.finish();
}

#[test]
fn acceptance_4_change_point_test_power_curve() {
    let started = Instant::now();
    let mut c = Criterion::new(4, "change-point test power and size across mixing weights");
    let powered = [0.80, 0.90, 0.95];
    let null_like = [0.0, 0.99, 1.0];
    let rows: Vec<BenchRow> = powered
        .iter()
        .chain(&null_like)
        .map(|&pi1| BenchRow::QlrPower {
            pi1,
            theta2: 1.2,
            nb: 200,
        })
        .collect();
    let config = BenchmarkConfig {
        rows,
        replicates: 25,
        n: 10_000,
        cutoffs: 100,
        seed: 20_240_404,
    };
    let report = run_benchmark(&config).unwrap();
    for (i, &pi1) in powered.iter().enumerate() {
        let rate = report.rows[i].stat("reject_rate").unwrap();
        c.check(
            rate >= 0.85,
            format!("pi1={pi1}: rejection rate {:.2} >= 0.85", rate),
        );
    }
    for (i, &pi1) in null_like.iter().enumerate() {
        let rate = report.rows[powered.len() + i].stat("reject_rate").unwrap();
        c.check(
            rate <= 0.15,
            format!("pi1={pi1}: rejection rate {:.2} <= 0.15", rate),
        );
    }
    c.budget(started, Duration::from_secs(1800));
    c.finish();
}

#[test]
fn acceptance_5_score_matches_finite_differences() {
    let started = Instant::now();
    let mut c = Criterion::new(5, "analytic score equals central finite differences");
    let grid = CutoffGrid::uniform(10).unwrap();
    let mut rng = SeededRng::new(505).rng();
    let mut worst = 0.0f64;
    for draw in 0..100 {
        let n_covariates = draw % 2;
        // Random counts over the categories, 200 candidates per workflow.
        let mut workflows = Vec::new();
        let n_workflows = if n_covariates == 0 { 1 } else { 2 };
        for w in 0..n_workflows {
            let mut counts = vec![0u64; grid.m()];
            for _ in 0..200 {
                let k = rng.random_range(0..grid.m());
                counts[k] += 1;
            }
            let counts = segccr_core::CategoryCounts { counts, n: 200 };
            let covariates = if n_covariates == 0 {
                vec![]
            } else {
                vec![w as f64]
            };
            workflows.push(WorkflowData::new(format!("w{w}"), &covariates, counts).unwrap());
        }
        let data = DesignSet::new(workflows).unwrap();

        let tau = 0.2 + 0.6 * rng.random::<f64>();
        let mut beta = vec![[
            1.0 + 2.0 * rng.random::<f64>(),
            1.0 + 2.0 * rng.random::<f64>(),
        ]];
        for _ in 0..n_covariates {
            beta.push([
                0.6 * rng.random::<f64>() - 0.3,
                0.6 * rng.random::<f64>() - 0.3,
            ]);
        }
        let params = SegmentedParams::new(tau, beta.clone()).unwrap();
        let analytic = score_beta(&params, &data, &grid).unwrap();

        let h = 1e-5;
        for j in 0..analytic.len() {
            let perturbed = |delta: f64| -> f64 {
                let mut b = beta.clone();
                b[j / 2][j % 2] += delta;
                let p = SegmentedParams::new(tau, b).unwrap();
                log_likelihood(&p, &data, &grid).unwrap()
            };
            let fd = (perturbed(h) - perturbed(-h)) / (2.0 * h);
            let rel = (fd - analytic[j]).abs() / analytic[j].abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    c.check(
        worst < 1e-6,
        format!("max relative error over 100 draws: {worst:.2e} < 1e-6"),
    );
    c.budget(started, Duration::from_secs(60));
    c.finish();
}

#[test]
fn acceptance_6_empirical_curve_matches_brute_force() {
    let started = Instant::now();
    let mut c = Criterion::new(6, "curve and counts match brute-force double loops exactly");
    let mut rng = SeededRng::new(606).rng();
    let mut cases = 0usize;
    let mut exact = true;
    for _ in 0..1000 {
        let n = rng.random_range(2..=50usize);
        let m = rng.random_range(1..=12usize);
        let grid = CutoffGrid::uniform(m).unwrap();
        let orientation = if rng.random::<f64>() < 0.5 {
            Orientation::LowerIsStronger
        } else {
            Orientation::HigherIsStronger
        };
        // Mix continuous scores with lattice values so ties are common.
        fn draw_scores<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
            (0..n)
                .map(|_| {
                    if rng.random::<f64>() < 0.4 {
                        (rng.random::<f64>() * 4.0).round() / 4.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect()
        }
        let y1 = draw_scores(&mut rng, n);
        let y2 = draw_scores(&mut rng, n);
        let pairs = single_workflow(y1, y2);
        let ranks = to_uniform_ranks(&pairs, orientation).unwrap();
        let curve = empirical_curve(&ranks, &grid);
        let counts = category_counts(&ranks, &grid);

        for (k, &t) in grid.cutoffs().iter().enumerate() {
            let mut hits = 0usize;
            for i in 0..n {
                if ranks.u1[i] <= t && ranks.u2[i] <= t {
                    hits += 1;
                }
            }
            let psi = hits as f64 / n as f64;
            exact &= curve.psi[k].to_bits() == psi.to_bits();
        }
        let knots = grid.knots();
        for k in 0..m {
            let mut hits = 0u64;
            for i in 0..n {
                let max_u = ranks.u1[i].max(ranks.u2[i]);
                if max_u > knots[k] && max_u <= knots[k + 1] {
                    hits += 1;
                }
            }
            exact &= counts.counts[k] == hits;
        }
        cases += 1;
    }
    c.check(exact, format!("{cases} random cases compared bitwise"));
    c.budget(started, Duration::from_secs(60));
    c.finish();
}

#[test]
fn acceptance_7_structural_invariants() {
    let started = Instant::now();
    let mut c = Criterion::new(7, "structural invariants of fits and tests");
    let mut rng = SeededRng::new(707).rng();

    // Exact unit endpoint and change-point continuity for random parameters.
    let grid = CutoffGrid::uniform(37).unwrap();
    let mut endpoint_exact = true;
    let mut max_jump = 0.0f64;
    for _ in 0..50 {
        let tau = 0.1 + 0.8 * rng.random::<f64>();
        let beta = vec![
            [0.5 + 2.0 * rng.random::<f64>(), 0.5 + 2.0 * rng.random::<f64>()],
            [0.4 * rng.random::<f64>() - 0.2, 0.4 * rng.random::<f64>() - 0.2],
        ];
        let params = SegmentedParams::new(tau, beta).unwrap();
        let x = [rng.random::<f64>()];
        let curve = fitted_curve(&params, &x, &grid).unwrap();
        endpoint_exact &= curve.last().unwrap().to_bits() == 1.0f64.to_bits();
        let left = model_log_psi(&params, &x, tau - 1e-12).unwrap();
        let right = model_log_psi(&params, &x, tau + 1e-12).unwrap();
        max_jump = max_jump.max((left - right).abs());
    }
    c.check(endpoint_exact, "fitted curve ends at exactly 1".to_string());
    c.check(
        max_jump < 1e-9,
        format!("log-curve jump at the change point {max_jump:.2e} < 1e-9"),
    );

    // The statistic is never materially negative, and the reported profile
    // maximum matches an exhaustive scan.
    let report_grid = CutoffGrid::uniform(40).unwrap();
    let tau_grid = default_tau_grid(&report_grid);
    let mut qlr_ok = true;
    let mut argmax_ok = true;
    for r in 0..20u64 {
        let pi1 = 0.3 + 0.5 * ((r % 5) as f64 / 5.0);
        let spec = ScenarioSpec::scenario1(600, pi1, 1.0 + (r % 3) as f64);
        let pairs = generate_scenario1(&spec, SeededRng::new(7070).with_stream(r)).unwrap();
        let (qlr, fit) = qlr_statistic(&pairs, Orientation::HigherIsStronger, &report_grid, &tau_grid)
            .unwrap();
        qlr_ok &= qlr >= -1e-6 * pairs.n() as f64;

        let best = fit
            .profile
            .iter()
            .filter(|p| p.loglik.is_finite())
            .max_by(|a, b| a.loglik.total_cmp(&b.loglik))
            .unwrap();
        argmax_ok &= fit.loglik == best.loglik;
        let first_at_max = fit
            .profile
            .iter()
            .find(|p| p.loglik == best.loglik)
            .unwrap();
        argmax_ok &= fit.params.tau == first_at_max.tau;
    }
    c.check(qlr_ok, "statistic >= -1e-6 n on 20 random datasets".to_string());
    c.check(argmax_ok, "profile argmax matches exhaustive scan".to_string());

    // Rank invariance: strictly monotone transforms leave every reported
    // number bitwise unchanged, including bootstrap summaries.
    let spec = ScenarioSpec::scenario1(400, 0.7, 1.6);
    let raw = generate_scenario1(&spec, SeededRng::new(7171)).unwrap();
    let exp = ScorePairs::new(
        "w",
        raw.y1.iter().map(|&v| v.exp()).collect(),
        raw.y2.iter().map(|&v| v.exp()).collect(),
        vec![],
    )
    .unwrap();
    let negated = ScorePairs::new(
        "w",
        raw.y1.iter().map(|&v| -v).collect(),
        raw.y2.iter().map(|&v| -v).collect(),
        vec![],
    )
    .unwrap();
    let small_grid = CutoffGrid::uniform(25).unwrap();
    let small_tau = default_tau_grid(&small_grid);
    let fit_of = |p: &ScorePairs, o: Orientation| {
        fit_segmented(&design_for(p, o, &small_grid), &small_grid, &small_tau).unwrap()
    };
    let base = fit_of(&raw, Orientation::HigherIsStronger);
    let fit_exp = fit_of(&exp, Orientation::HigherIsStronger);
    let fit_neg = fit_of(&negated, Orientation::LowerIsStronger);
    c.check(
        base == fit_exp && base == fit_neg,
        "fits are bitwise invariant under monotone transforms".to_string(),
    );
    let boot_of = |p: &ScorePairs| {
        bootstrap(
            std::slice::from_ref(p),
            Orientation::HigherIsStronger,
            &small_grid,
            &small_tau,
            12,
            SeededRng::new(7272),
        )
        .unwrap()
    };
    c.check(
        boot_of(&raw) == boot_of(&exp),
        "bootstrap summaries are bitwise invariant too".to_string(),
    );

    c.budget(started, Duration::from_secs(120));
    c.finish();
}

#[test]
fn acceptance_8_thread_count_determinism() {
    let started = Instant::now();
    let mut c = Criterion::new(8, "byte-identical results across 1, 2, and 8 worker threads");

    let spec = ScenarioSpec::scenario1(2_000, 0.8, 1.5);
    let pairs = generate_scenario1(&spec, SeededRng::new(808)).unwrap();
    let grid = CutoffGrid::uniform(50).unwrap();
    let tau_grid = default_tau_grid(&grid);

    let boot_doc = || {
        serde_json::to_string(
            &bootstrap(
                std::slice::from_ref(&pairs),
                Orientation::HigherIsStronger,
                &grid,
                &tau_grid,
                16,
                SeededRng::new(81),
            )
            .unwrap(),
        )
        .unwrap()
    };
    let qlr_doc = || {
        serde_json::to_string(
            &qlr_null_pvalue(
                &pairs,
                Orientation::HigherIsStronger,
                &grid,
                &tau_grid,
                64,
                SeededRng::new(82),
            )
            .unwrap(),
        )
        .unwrap()
    };
    let under_pool = |threads: usize, f: &(dyn Fn() -> String + Sync)| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(move || f())
    };
    let boot_docs: Vec<String> = [1, 2, 8].iter().map(|&k| under_pool(k, &boot_doc)).collect();
    let qlr_docs: Vec<String> = [1, 2, 8].iter().map(|&k| under_pool(k, &qlr_doc)).collect();
    c.check(
        boot_docs[0] == boot_docs[1] && boot_docs[0] == boot_docs[2],
        "bootstrap document identical across pools".to_string(),
    );
    c.check(
        qlr_docs[0] == qlr_docs[1] && qlr_docs[0] == qlr_docs[2],
        "test document identical across pools".to_string(),
    );

    // The same property end to end through the binary.
    let dir = TempDir::new().unwrap();
    let scores = dir.path().join("scores.tsv");
    let status = Command::new(env!("CARGO_BIN_EXE_segccr"))
        .args([
            "simulate", "--scenario", "1", "--n", "1500", "--pi1", "0.8", "--theta2", "1.6",
            "--seed", "5", "--out",
        ])
        .arg(&scores)
        .status()
        .unwrap();
    assert!(status.success());
    let mut documents = Vec::new();
    for threads in ["1", "2", "8"] {
        let out = dir.path().join(format!("fit_{threads}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_segccr"))
            .env("SEGCCR_THREADS", threads)
            .args([
                "fit", "--orientation", "high", "--bootstrap", "12", "--seed", "3", "--scores",
            ])
            .arg(&scores)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        documents.push(fs::read(&out).unwrap());
    }
    c.check(
        documents[0] == documents[1] && documents[0] == documents[2],
        "fit document from the binary identical across SEGCCR_THREADS".to_string(),
    );

    c.budget(started, Duration::from_secs(300));
    c.finish();
}

#[test]
fn acceptance_9_salmon_example_reference_values() {
    let started = Instant::now();
    let mut c = Criterion::new(9, "bundled salmon example reproduces its reference analysis");
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/skeena.tsv");
    let text = fs::read_to_string(&path).expect("bundled data/skeena.tsv");
    let mut y1 = Vec::new();
    let mut y2 = Vec::new();
    for line in text.lines().skip(1) {
        let mut fields = line.split('\t');
        let _workflow = fields.next().unwrap();
        y1.push(fields.next().unwrap().parse::<f64>().unwrap());
        y2.push(fields.next().unwrap().parse::<f64>().unwrap());
    }
    assert_eq!(y1.len(), 28, "expected the 28-pair table");

    let pairs = single_workflow(y1, y2);
    let grid = CutoffGrid::uniform(28).unwrap();
    let tau_grid = default_tau_grid(&grid);
    let data = design_for(&pairs, Orientation::HigherIsStronger, &grid);
    let fit = fit_segmented(&data, &grid, &tau_grid).unwrap();
    let ranks = to_uniform_ranks(&pairs, Orientation::HigherIsStronger).unwrap();
    let empirical = empirical_curve(&ranks, &grid);
    let mise_seg = mise(&fit.fitted_curves[0], &empirical).unwrap();
    let homog_curve =
        segccr_core::fitted_curve_homogeneous(&fit.homogeneous.slopes, &[], &grid).unwrap();
    let mise_hom = mise(&homog_curve, &empirical).unwrap();

    let a1 = fit.params.beta[0][0];
    let a2 = fit.params.beta[0][1];
    c.check(
        (a1 - 1.102).abs() <= 0.05,
        format!("weak-segment slope {a1:.3} within 0.05 of 1.102"),
    );
    c.check(
        (a2 - 1.753).abs() <= 0.05,
        format!("strong-segment slope {a2:.3} within 0.05 of 1.753"),
    );
    c.check(
        (fit.params.tau - 0.629).abs() <= 0.05,
        format!("change point {:.3} within 0.05 of 0.629", fit.params.tau),
    );
    c.check(
        (mise_seg - 0.0011).abs() <= 0.2 * 0.0011,
        format!("segmented MISE {mise_seg:.5} within 20% of 0.0011"),
    );
    c.check(
        (mise_hom - 0.0019).abs() <= 0.2 * 0.0019,
        format!("homogeneous MISE {mise_hom:.5} within 20% of 0.0019"),
    );
    c.budget(started, Duration::from_secs(60));
    c.finish();
}
