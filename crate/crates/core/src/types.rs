//! Core domain types: validated score pairs, rank vectors, cutoff grids,
//! segmented-model parameters, and reproducible seeded randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Which end of the score scale marks a strong (reproducible) candidate.
///
/// Rank normalization maps stronger candidates to ranks near 1, which is the
/// upper segment of the model regardless of the raw score polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Smaller scores are stronger (p-values, FDR, distances).
    LowerIsStronger,
    /// Larger scores are stronger (fold changes, abundances, intensities).
    HigherIsStronger,
}

/// Paired replicate scores for one workflow, plus the workflow's covariates.
///
/// The intercept is implicit: a workflow with covariates `[x1, ..., xS]`
/// enters the model with design vector `(1, x1, ..., xS)`. Workflows that
/// share the reference covariate level simply use an empty covariate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorePairs {
    /// Label carried through to outputs; never interpreted numerically.
    pub workflow_id: String,
    /// Scores from replicate 1, one per candidate.
    pub y1: Vec<f64>,
    /// Scores from replicate 2, aligned with `y1` by candidate.
    pub y2: Vec<f64>,
    /// Workflow-level covariates, excluding the implicit intercept.
    pub covariates: Vec<f64>,
}

impl ScorePairs {
    pub fn new(
        workflow_id: impl Into<String>,
        y1: Vec<f64>,
        y2: Vec<f64>,
        covariates: Vec<f64>,
    ) -> Result<Self> {
        let pairs = Self {
            workflow_id: workflow_id.into(),
            y1,
            y2,
            covariates,
        };
        pairs.validate()?;
        Ok(pairs)
    }

    /// Number of candidate pairs.
    pub fn n(&self) -> usize {
        self.y1.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.y1.len() != self.y2.len() {
            return Err(Error::LengthMismatch {
                left: self.y1.len(),
                right: self.y2.len(),
            });
        }
        if self.y1.len() < 2 {
            return Err(Error::TooFew {
                min: 2,
                got: self.y1.len(),
            });
        }
        for (index, v) in self.y1.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "replicate 1 scores",
                    index,
                });
            }
        }
        for (index, v) in self.y2.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "replicate 2 scores",
                    index,
                });
            }
        }
        for (index, v) in self.covariates.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "covariates",
                    index,
                });
            }
        }
        Ok(())
    }
}

/// Validates and returns the input unchanged. Idempotent by construction.
pub fn validate_score_pairs(pairs: ScorePairs) -> Result<ScorePairs> {
    pairs.validate()?;
    Ok(pairs)
}

/// Marginal uniform ranks `rank / n` for both replicates of one workflow.
///
/// Entries lie in `{1/n, 2/n, ..., 1}`; larger means stronger.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformRanks {
    pub workflow_id: String,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl UniformRanks {
    pub fn n(&self) -> usize {
        self.u1.len()
    }
}

/// An increasing grid of report cutoffs `0 = t_0 < t_1 < ... < t_M = 1`.
///
/// The interior points partition candidates into categories: candidate `i`
/// falls in category `m` when `t_{m-1} < max(u_{i1}, u_{i2}) <= t_m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffGrid {
    t: Vec<f64>,
}

impl CutoffGrid {
    /// Builds a grid from the full knot vector including both endpoints.
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if t.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 knots (0 and 1), got {}",
                t.len()
            )));
        }
        if t[0] != 0.0 {
            return Err(Error::InvalidGrid(format!("first knot must be 0, got {}", t[0])));
        }
        if *t.last().unwrap() != 1.0 {
            return Err(Error::InvalidGrid(format!(
                "last knot must be 1, got {}",
                t.last().unwrap()
            )));
        }
        for w in t.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidGrid(format!(
                    "knots must be strictly increasing, found {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { t })
    }

    /// Equally spaced grid with `m` categories: `t_k = k / m`.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidGrid("need at least one category".into()));
        }
        let t = (0..=m).map(|k| k as f64 / m as f64).collect();
        Self::new(t)
    }

    /// Default resolution for a sample of `n` candidates: `min(100, n)`
    /// equally spaced categories.
    pub fn default_for(n: usize) -> Self {
        Self::uniform(n.min(100).max(1)).expect("uniform grid with m >= 1 is always valid")
    }

    /// Number of categories `M`.
    pub fn m(&self) -> usize {
        self.t.len() - 1
    }

    /// All knots, including `t_0 = 0` and `t_M = 1`.
    pub fn knots(&self) -> &[f64] {
        &self.t
    }

    /// The report cutoffs `t_1, ..., t_M` (excludes the leading 0).
    pub fn cutoffs(&self) -> &[f64] {
        &self.t[1..]
    }
}

/// Coefficients of the segmented model: a change point `tau` and one slope
/// pair per design coordinate (intercept first).
///
/// Row `s` of `beta` holds `(beta_s1, beta_s2)`: the lower- and upper-segment
/// slopes contributed by design coordinate `s`. The model is well defined
/// only when both effective slopes `sum_s x_s beta_sj` are positive for every
/// observed design vector, which fitting enforces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentedParams {
    pub tau: f64,
    pub beta: Vec<[f64; 2]>,
}

impl SegmentedParams {
    pub fn new(tau: f64, beta: Vec<[f64; 2]>) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Domain {
                name: "tau",
                value: tau,
                domain: "(0, 1)",
            });
        }
        if beta.is_empty() {
            return Err(Error::InvalidDesign(
                "need at least the intercept slope pair".into(),
            ));
        }
        for (s, row) in beta.iter().enumerate() {
            if !row[0].is_finite() || !row[1].is_finite() {
                return Err(Error::NonFinite {
                    context: "coefficients",
                    index: s,
                });
            }
        }
        Ok(Self { tau, beta })
    }

    /// The effective slope pair `(a_1, a_2)` for a full design vector
    /// (intercept included), i.e. `a_j = sum_s x_s beta_sj`.
    pub fn effective_slopes(&self, design: &[f64]) -> (f64, f64) {
        let mut a1 = 0.0;
        let mut a2 = 0.0;
        for (x, b) in design.iter().zip(&self.beta) {
            a1 += x * b[0];
            a2 += x * b[1];
        }
        (a1, a2)
    }
}

/// SplitMix64 step, used to derive well-separated child seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A reproducible generator identity: a base seed plus a stream index.
///
/// Parallel work items each take their own stream of the same seed, so
/// results never depend on scheduling order. Nested randomized stages
/// (bootstrap inside a simulation replicate, say) derive a child seed with a
/// stage tag instead of sharing streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SeededRng {
    pub seed: u64,
    pub stream_index: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            stream_index: 0,
        }
    }

    /// Same seed, different stream. Streams never overlap.
    pub fn with_stream(self, stream_index: u64) -> Self {
        Self {
            seed: self.seed,
            stream_index,
        }
    }

    /// A child identity for a nested randomized stage. Mixes the tag and the
    /// current stream into a fresh seed so child streams are independent of
    /// the parent's and of any sibling stage's.
    pub fn derive(self, tag: u64) -> Self {
        let child = splitmix64(self.seed ^ splitmix64(tag ^ self.stream_index.rotate_left(17)));
        Self {
            seed: child,
            stream_index: 0,
        }
    }

    /// Instantiates the actual generator.
    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }
}
