//! Synthetic data generators for benchmarking: a Gumbel copula sampler, two
//! mixture scenarios (copula mixture and bivariate normal mixture), and the
//! integrated squared error between a fitted and an empirical curve.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::empirical::EmpiricalCurve;
use crate::error::{Error, Result};
use crate::types::{ScorePairs, SeededRng};

/// Uniform draw strictly inside (0, 1); safe under `ln` and quantile maps.
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let v: f64 = rng.random();
        if v > 0.0 && v < 1.0 {
            return v;
        }
    }
}

/// One pair from the Gumbel copula with parameter `theta >= 1` via the
/// frailty construction: a positive stable variable (Chambers–Mallows–Stuck)
/// divided into two exponentials.
///
/// Draw order per pair is fixed: stable angle, stable exponential, then the
/// two coordinate exponentials. `theta = 1` short-circuits to two plain
/// uniforms (independence), consuming two draws instead of four.
fn gumbel_pair(theta: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    if theta == 1.0 {
        return (open_unit(rng), open_unit(rng));
    }
    let alpha = 1.0 / theta;
    let angle = std::f64::consts::PI * open_unit(rng);
    let w = -open_unit(rng).ln();
    let v = (alpha * angle).sin() / angle.sin().powf(theta)
        * (((1.0 - alpha) * angle).sin() / w).powf(theta - 1.0);
    let e1 = -open_unit(rng).ln();
    let e2 = -open_unit(rng).ln();
    let u1 = (-(e1 / v).powf(alpha)).exp();
    let u2 = (-(e2 / v).powf(alpha)).exp();
    (u1, u2)
}

/// Samples `n` pairs from the Gumbel copula with parameter `theta >= 1`.
pub fn sample_gumbel_copula(
    theta: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(f64, f64)>> {
    if !(theta >= 1.0 && theta.is_finite()) {
        return Err(Error::Domain {
            name: "theta",
            value: theta,
            domain: "[1, inf)",
        });
    }
    Ok((0..n).map(|_| gumbel_pair(theta, rng)).collect())
}

/// Mixture scenario parameters shared by both generators.
///
/// A candidate belongs to the weak component with probability `pi1` and to
/// the strong component otherwise. `theta1`/`theta2` parameterize the
/// within-pair dependence of the two components: a Gumbel copula parameter
/// in [`generate_scenario1`] (>= 1), a correlation in [`generate_scenario2`]
/// ((-1, 1)). `mu1`/`mu2` shift the normal score marginals.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ScenarioSpec {
    pub n: usize,
    pub pi1: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl ScenarioSpec {
    /// Copula-mixture scenario with its customary defaults: independent weak
    /// component at mean 0, dependent strong component at mean 3.
    pub fn scenario1(n: usize, pi1: f64, theta2: f64) -> Self {
        Self {
            n,
            pi1,
            theta1: 1.0,
            theta2,
            mu1: 0.0,
            mu2: 3.0,
        }
    }

    /// Normal-mixture scenario defaults: weak component at mean 0 with
    /// correlation `theta1`, strong component at mean 2.5 with correlation
    /// 0.9.
    pub fn scenario2(n: usize, pi1: f64, theta1: f64) -> Self {
        Self {
            n,
            pi1,
            theta1,
            theta2: 0.9,
            mu1: 0.0,
            mu2: 2.5,
        }
    }

    fn validate_common(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooFew { min: 2, got: self.n });
        }
        if !(0.0..=1.0).contains(&self.pi1) {
            return Err(Error::Domain {
                name: "pi1",
                value: self.pi1,
                domain: "[0, 1]",
            });
        }
        for (name, v) in [("mu1", self.mu1), ("mu2", self.mu2)] {
            if !v.is_finite() {
                return Err(Error::Domain {
                    name,
                    value: v,
                    domain: "finite reals",
                });
            }
        }
        Ok(())
    }
}

/// Copula-mixture scores: each pair is drawn from a Gumbel copula (weak or
/// strong component) and mapped through a shifted normal quantile, so the
/// marginals are normal mixtures and the rank dependence is the mixed
/// copula. Scores come out with higher-is-stronger polarity.
///
/// Per candidate the draw order is: component uniform, then the component's
/// copula pair.
pub fn generate_scenario1(spec: &ScenarioSpec, seed: SeededRng) -> Result<ScorePairs> {
    spec.validate_common()?;
    for (name, theta) in [("theta1", spec.theta1), ("theta2", spec.theta2)] {
        if !(theta >= 1.0 && theta.is_finite()) {
            return Err(Error::Domain {
                name,
                value: theta,
                domain: "[1, inf)",
            });
        }
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut rng = seed.rng();
    let mut y1 = Vec::with_capacity(spec.n);
    let mut y2 = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let weak = rng.random::<f64>() < spec.pi1;
        let (mu, theta) = if weak {
            (spec.mu1, spec.theta1)
        } else {
            (spec.mu2, spec.theta2)
        };
        let (u1, u2) = gumbel_pair(theta, &mut rng);
        y1.push(mu + normal.inverse_cdf(u1));
        y2.push(mu + normal.inverse_cdf(u2));
    }
    ScorePairs::new("sim", y1, y2, vec![])
}

/// Normal-mixture scores: each pair is bivariate normal with the component's
/// mean and correlation. Higher-is-stronger polarity.
///
/// Per candidate the draw order is: component uniform, then two standard
/// normals.
pub fn generate_scenario2(spec: &ScenarioSpec, seed: SeededRng) -> Result<ScorePairs> {
    spec.validate_common()?;
    for (name, rho) in [("theta1", spec.theta1), ("theta2", spec.theta2)] {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::Domain {
                name,
                value: rho,
                domain: "(-1, 1)",
            });
        }
    }
    let mut rng = seed.rng();
    let mut y1 = Vec::with_capacity(spec.n);
    let mut y2 = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let weak = rng.random::<f64>() < spec.pi1;
        let (mu, rho) = if weak {
            (spec.mu1, spec.theta1)
        } else {
            (spec.mu2, spec.theta2)
        };
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        y1.push(mu + z1);
        y2.push(mu + rho * z1 + (1.0 - rho * rho).sqrt() * z2);
    }
    ScorePairs::new("sim", y1, y2, vec![])
}

/// Integrated squared difference between a fitted curve and the empirical
/// curve, both evaluated on the empirical curve's cutoffs, using the grid
/// cell widths as integration weights.
pub fn mise(fitted: &[f64], empirical: &EmpiricalCurve) -> Result<f64> {
    if fitted.len() != empirical.t.len() {
        return Err(Error::GridMismatch {
            left: fitted.len(),
            right: empirical.t.len(),
        });
    }
    let mut total = 0.0;
    let mut prev_t = 0.0;
    for ((f, p), &t) in fitted.iter().zip(&empirical.psi).zip(&empirical.t) {
        let d = f - p;
        total += d * d * (t - prev_t);
        prev_t = t;
    }
    Ok(total)
}
