//! Synthetic ground-truth instances and noisy, budgeted sampling oracles.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, ArmSet, KernelSpec};
use crate::linalg::cholesky_with_jitter;
use crate::rng::{stream, Stream};
use crate::robust::SamplingOracle;

/// How the arm locations and true function values are produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// `f ~ N(0, K)` on an evenly spaced grid over `[0, 1]^dim`.
    GpDraw {
        lengthscale: f64,
        n_per_dim: usize,
        #[serde(default = "one")]
        dim: usize,
    },
    /// `f(x) = cos(freq * x)` on `n_points` evenly spaced points of `[0, 1]`.
    Cosine1d { freq: f64, n_points: usize },
    /// `f(x, y) = cos(2 pi x) sin(2 pi y)` on an evenly spaced grid.
    CosineSine2d { n_per_dim: usize },
    /// Linear benchmark: `x_1 = theta = e_1`, `x_2 = e_2`, and the rest at angle
    /// `pi/4 (1 + xi)` in the `(e_1, e_2)` plane with `xi ~ U(-xi_range, xi_range)`.
    Soare {
        n: usize,
        d: usize,
        #[serde(default = "default_xi_range")]
        xi_range: f64,
    },
    /// `f(x) = <theta, x>` on given points.
    ExplicitLinear { theta: Vec<f64>, points: Vec<Vec<f64>> },
    /// Independent arms, encoded as one-hot points under the linear kernel.
    Bandit { means: Vec<f64> },
}

fn one() -> usize {
    1
}

fn default_xi_range() -> f64 {
    0.2
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdSpec {
    Explicit { alpha: f64 },
    /// Explicit threshold placed so that a `1 - q` fraction of arms lies above it.
    Quantile { q: f64 },
    Implicit { epsilon: f64 },
}

/// A threshold after resolving quantiles against the true values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Threshold {
    Explicit { alpha: f64 },
    Implicit { epsilon: f64 },
}

impl Threshold {
    /// The numeric threshold for the given true values.
    pub fn level(&self, values: &[f64]) -> f64 {
        match *self {
            Threshold::Explicit { alpha } => alpha,
            Threshold::Implicit { epsilon } => {
                (1.0 - epsilon) * values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub generator: Generator,
    pub threshold: ThresholdSpec,
    #[serde(default)]
    pub sigma: f64,
    /// Kernel handed to the algorithms; defaults per generator.
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    /// Signal bound `B`; defaults to `max |f|` rounded up to an integer.
    #[serde(default)]
    pub signal_bound: Option<f64>,
    #[serde(default)]
    pub budget: Option<u64>,
    /// Uniform perturbation added to every arm's value (misspecification), in `[-h, h]`.
    #[serde(default)]
    pub misspecification: f64,
}

impl InstanceSpec {
    pub fn new(generator: Generator, threshold: ThresholdSpec) -> Self {
        Self {
            generator,
            threshold,
            sigma: 0.0,
            kernel: None,
            signal_bound: None,
            budget: None,
            misspecification: 0.0,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_kernel(mut self, kernel: KernelSpec) -> Self {
        self.kernel = Some(kernel);
        self
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, msg: &str| Err(Error::config(path, msg));
        match &self.generator {
            Generator::GpDraw { lengthscale, n_per_dim, dim } => {
                if !(*lengthscale > 0.0) {
                    return bad("generator.lengthscale", "must be positive");
                }
                if *n_per_dim < 1 || *dim < 1 {
                    return bad("generator.n_per_dim", "grid must be nonempty");
                }
            }
            Generator::Cosine1d { freq, n_points } => {
                if !freq.is_finite() || *n_points < 1 {
                    return bad("generator", "need finite frequency and at least one point");
                }
            }
            Generator::CosineSine2d { n_per_dim } => {
                if *n_per_dim < 1 {
                    return bad("generator.n_per_dim", "grid must be nonempty");
                }
            }
            Generator::Soare { n, d, xi_range } => {
                if *n < 2 || *d < 2 {
                    return bad("generator", "soare instance needs n >= 2 and d >= 2");
                }
                if !(*xi_range >= 0.0) {
                    return bad("generator.xi_range", "must be nonnegative");
                }
            }
            Generator::ExplicitLinear { theta, points } => {
                if points.is_empty() || points.iter().any(|p| p.len() != theta.len()) {
                    return bad("generator.points", "points must be nonempty and match theta's dimension");
                }
            }
            Generator::Bandit { means } => {
                if means.is_empty() || means.iter().any(|m| !m.is_finite()) {
                    return bad("generator.means", "need at least one finite mean");
                }
            }
        }
        match self.threshold {
            ThresholdSpec::Quantile { q } if !(0.0..1.0).contains(&q) => {
                return bad("threshold.q", "quantile must lie in [0, 1)");
            }
            ThresholdSpec::Implicit { epsilon } if !(epsilon > 0.0 && epsilon < 1.0) => {
                return bad("threshold.epsilon", "epsilon must lie in (0, 1)");
            }
            ThresholdSpec::Explicit { alpha } if !alpha.is_finite() => {
                return bad("threshold.alpha", "alpha must be finite");
            }
            _ => {}
        }
        if !(self.sigma >= 0.0) {
            return bad("sigma", "noise level must be nonnegative");
        }
        if let Some(b) = self.signal_bound {
            if !(b > 0.0) {
                return bad("signal_bound", "must be positive");
            }
        }
        if !(self.misspecification >= 0.0) {
            return bad("misspecification", "must be nonnegative");
        }
        if let Some(k) = &self.kernel {
            k.validate().map_err(|e| Error::config("kernel", e.to_string()))?;
        }
        Ok(())
    }

    fn default_kernel(&self) -> KernelSpec {
        match &self.generator {
            Generator::GpDraw { lengthscale, .. } => KernelSpec::SquaredExponential {
                lengthscale: *lengthscale,
            },
            Generator::Cosine1d { .. } | Generator::CosineSine2d { .. } => {
                KernelSpec::SquaredExponential { lengthscale: 0.1 }
            }
            _ => KernelSpec::Linear,
        }
    }
}

fn linspace(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5];
    }
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

fn grid(n_per_dim: usize, dim: usize) -> Vec<Vec<f64>> {
    let axis = linspace(n_per_dim);
    let mut points = vec![Vec::new()];
    for _ in 0..dim {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    points
}

/// Serializable snapshot for exact replay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDocument {
    pub spec: InstanceSpec,
    pub seed: u64,
    pub points: Vec<Vec<f64>>,
    pub true_f: Vec<f64>,
    pub threshold: Threshold,
    pub signal_bound: f64,
    pub theta: Option<Vec<f64>>,
}

/// A ground-truth instance plus its noisy oracle. Owned by one run.
#[derive(Clone, Debug)]
pub struct Environment {
    arms: ArmSet,
    true_f: Vec<f64>,
    threshold: Threshold,
    sigma: f64,
    signal_bound: f64,
    budget: Option<u64>,
    samples_used: u64,
    theta: Option<Vec<f64>>,
    spec: InstanceSpec,
    seed: u64,
    noise: ChaCha8Rng,
}

/// Builds a deterministic instance for `seed`.
pub fn generate(spec: &InstanceSpec, seed: u64) -> Result<Environment> {
    spec.validate()?;
    let mut rng = stream(seed, Stream::Instance);
    let kernel = spec.kernel.unwrap_or_else(|| spec.default_kernel());
    let (points, mut true_f, theta) = match &spec.generator {
        Generator::GpDraw { lengthscale, n_per_dim, dim } => {
            let points = grid(*n_per_dim, *dim);
            let k = KernelSpec::SquaredExponential {
                lengthscale: *lengthscale,
            };
            let mut g = gram_matrix(&k, &points);
            let n = points.len();
            let jitter = 1e-8 * g.trace() / n as f64;
            for i in 0..n {
                g[(i, i)] += jitter;
            }
            let chol = cholesky_with_jitter(&g, "GP draw covariance")?;
            let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let f = chol.l() * z;
            (points, f.iter().copied().collect(), None)
        }
        Generator::Cosine1d { freq, n_points } => {
            let points: Vec<Vec<f64>> = linspace(*n_points).into_iter().map(|x| vec![x]).collect();
            let f = points.iter().map(|p| (freq * p[0]).cos()).collect();
            (points, f, None)
        }
        Generator::CosineSine2d { n_per_dim } => {
            let points = grid(*n_per_dim, 2);
            let tau = std::f64::consts::TAU;
            let f = points.iter().map(|p| (tau * p[0]).cos() * (tau * p[1]).sin()).collect();
            (points, f, None)
        }
        Generator::Soare { n, d, xi_range } => {
            let mut points = Vec::with_capacity(*n);
            let mut e1 = vec![0.0; *d];
            e1[0] = 1.0;
            let mut e2 = vec![0.0; *d];
            e2[1] = 1.0;
            points.push(e1.clone());
            points.push(e2);
            for _ in 2..*n {
                let xi: f64 = if *xi_range > 0.0 {
                    rng.gen_range(-*xi_range..*xi_range)
                } else {
                    0.0
                };
                let angle = std::f64::consts::FRAC_PI_4 * (1.0 + xi);
                let mut x = vec![0.0; *d];
                x[0] = angle.cos();
                x[1] = angle.sin();
                points.push(x);
            }
            let f = points.iter().map(|x| x[0]).collect();
            (points, f, Some(e1))
        }
        Generator::ExplicitLinear { theta, points } => {
            let f = points.iter().map(|x| crate::linalg::dot(x, theta)).collect();
            (points.clone(), f, Some(theta.clone()))
        }
        Generator::Bandit { means } => {
            let k = means.len();
            let points = (0..k)
                .map(|i| {
                    let mut e = vec![0.0; k];
                    e[i] = 1.0;
                    e
                })
                .collect();
            (points, means.clone(), Some(means.clone()))
        }
    };
    if spec.misspecification > 0.0 {
        let h = spec.misspecification;
        for f in &mut true_f {
            *f += rng.gen_range(-h..=h);
        }
    }
    let arms = ArmSet::new(points, kernel)?;
    let threshold = resolve_threshold(&spec.threshold, &true_f);
    let signal_bound = spec.signal_bound.unwrap_or_else(|| default_signal_bound(&true_f));
    Ok(Environment {
        arms,
        true_f,
        threshold,
        sigma: spec.sigma,
        signal_bound,
        budget: spec.budget,
        samples_used: 0,
        theta,
        spec: spec.clone(),
        seed,
        noise: stream(seed, Stream::Noise),
    })
}

fn default_signal_bound(f: &[f64]) -> f64 {
    let m = f.iter().fold(0.0f64, |a, b| a.max(b.abs())).ceil();
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Quantile thresholds sit midway between the two sorted values that straddle the cut, so
/// exactly `round((1 - q) n)` arms lie above.
pub fn resolve_threshold(spec: &ThresholdSpec, values: &[f64]) -> Threshold {
    match *spec {
        ThresholdSpec::Explicit { alpha } => Threshold::Explicit { alpha },
        ThresholdSpec::Implicit { epsilon } => Threshold::Implicit { epsilon },
        ThresholdSpec::Quantile { q } => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len();
            let above = (((1.0 - q) * n as f64).round() as usize).min(n);
            let alpha = if above == 0 {
                sorted[n - 1] + 1.0
            } else if above == n {
                sorted[0] - 1.0
            } else {
                0.5 * (sorted[n - above - 1] + sorted[n - above])
            };
            Threshold::Explicit { alpha }
        }
    }
}

impl Environment {
    pub fn arms(&self) -> &ArmSet {
        &self.arms
    }

    pub fn true_f(&self) -> &[f64] {
        &self.true_f
    }

    pub fn threshold(&self) -> Threshold {
        self.threshold
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn signal_bound(&self) -> f64 {
        self.signal_bound
    }

    pub fn theta(&self) -> Option<&[f64]> {
        self.theta.as_deref()
    }

    pub fn spec(&self) -> &InstanceSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_budget(&mut self, budget: Option<u64>) {
        self.budget = budget;
    }

    /// Restarts the noise stream and sample counter, keeping the instance.
    pub fn reset(&mut self, noise_seed: u64) {
        self.samples_used = 0;
        self.noise = stream(noise_seed, Stream::Noise);
    }

    pub fn truth(&self) -> TruthSummary {
        true_sets_and_gaps(&self.true_f, self.threshold)
    }

    pub fn to_document(&self) -> InstanceDocument {
        InstanceDocument {
            spec: self.spec.clone(),
            seed: self.seed,
            points: self.arms.points().to_vec(),
            true_f: self.true_f.clone(),
            threshold: self.threshold,
            signal_bound: self.signal_bound,
            theta: self.theta.clone(),
        }
    }

    pub fn from_document(doc: &InstanceDocument) -> Result<Self> {
        let kernel = doc.spec.kernel.unwrap_or_else(|| doc.spec.default_kernel());
        if doc.points.len() != doc.true_f.len() {
            return Err(Error::DimensionMismatch(doc.points.len(), doc.true_f.len()));
        }
        Ok(Self {
            arms: ArmSet::new(doc.points.clone(), kernel)?,
            true_f: doc.true_f.clone(),
            threshold: doc.threshold,
            sigma: doc.spec.sigma,
            signal_bound: doc.signal_bound,
            budget: doc.spec.budget,
            samples_used: 0,
            theta: doc.theta.clone(),
            spec: doc.spec.clone(),
            seed: doc.seed,
            noise: stream(doc.seed, Stream::Noise),
        })
    }
}

impl SamplingOracle for Environment {
    fn observe(&mut self, arm: usize) -> Result<f64> {
        if arm >= self.true_f.len() {
            return Err(Error::invalid(format!("arm {arm} out of range")));
        }
        if let Some(b) = self.budget {
            if self.samples_used >= b {
                return Err(Error::BudgetExhausted {
                    used: self.samples_used,
                });
            }
        }
        self.samples_used += 1;
        let mut y = self.true_f[arm];
        if self.sigma > 0.0 {
            let g: f64 = self.noise.sample(StandardNormal);
            y += self.sigma * g;
        }
        Ok(y)
    }

    fn samples_used(&self) -> u64 {
        self.samples_used
    }

    fn remaining_budget(&self) -> Option<u64> {
        self.budget.map(|b| b.saturating_sub(self.samples_used))
    }
}

/// Ground-truth level set, per-arm gaps to the threshold, and the smallest gap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthSummary {
    pub level: f64,
    pub set: Vec<usize>,
    pub gaps: Vec<f64>,
    pub delta_min: f64,
    /// Some arm sits exactly on the threshold.
    pub degenerate: bool,
}

/// `G = {x : f(x) >= level}` with `level = alpha` or `(1 - eps) max f`.
pub fn true_sets_and_gaps(values: &[f64], threshold: Threshold) -> TruthSummary {
    let level = threshold.level(values);
    let gaps: Vec<f64> = values.iter().map(|f| (f - level).abs()).collect();
    let set = values
        .iter()
        .enumerate()
        .filter(|(_, &f)| f >= level)
        .map(|(i, _)| i)
        .collect();
    let delta_min = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    TruthSummary {
        level,
        set,
        gaps,
        delta_min,
        degenerate: delta_min == 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_linear_level_set() {
        let spec = InstanceSpec::new(
            Generator::ExplicitLinear {
                theta: vec![1.0, 0.0],
                points: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            },
            ThresholdSpec::Explicit { alpha: 0.5 },
        );
        let env = generate(&spec, 0).unwrap();
        let t = env.truth();
        assert_eq!(t.set, vec![0]);
        assert_eq!(t.gaps, vec![0.5, 0.5]);
        assert_eq!(t.delta_min, 0.5);
    }

    #[test]
    fn implicit_gaps() {
        let t = true_sets_and_gaps(&[1.0, 0.9, 0.2], Threshold::Implicit { epsilon: 0.2 });
        assert!((t.level - 0.8).abs() < 1e-12);
        assert_eq!(t.set, vec![0, 1]);
        for (g, e) in t.gaps.iter().zip([0.2, 0.1, 0.6]) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_function_is_degenerate() {
        let t = true_sets_and_gaps(&[0.5; 4], Threshold::Explicit { alpha: 0.5 });
        assert_eq!(t.delta_min, 0.0);
        assert!(t.degenerate);
    }

    #[test]
    fn noiseless_observation_is_exact() {
        let spec = InstanceSpec::new(Generator::Bandit { means: vec![0.3, 0.7] }, ThresholdSpec::Explicit { alpha: 0.5 });
        let mut env = generate(&spec, 3).unwrap();
        assert_eq!(env.observe(1).unwrap(), 0.7);
        assert_eq!(env.samples_used(), 1);
    }

    #[test]
    fn budget_is_enforced() {
        let spec = InstanceSpec::new(Generator::Bandit { means: vec![0.3] }, ThresholdSpec::Explicit { alpha: 0.5 })
            .with_sigma(1.0)
            .with_budget(2);
        let mut env = generate(&spec, 3).unwrap();
        env.observe(0).unwrap();
        assert_eq!(env.remaining_budget(), Some(1));
        env.observe(0).unwrap();
        assert!(matches!(env.observe(0), Err(Error::BudgetExhausted { used: 2 })));
        assert_eq!(env.samples_used(), 2);
    }

    #[test]
    fn quantile_threshold_places_fraction_above() {
        let values: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let Threshold::Explicit { alpha } = resolve_threshold(&ThresholdSpec::Quantile { q: 0.7 }, &values) else {
            panic!()
        };
        assert_eq!(alpha, 6.5);
    }

    #[test]
    fn invalid_spec_reports_field() {
        let spec = InstanceSpec::new(Generator::Soare { n: 1, d: 5, xi_range: 0.2 }, ThresholdSpec::Explicit { alpha: 0.5 });
        match generate(&spec, 0) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "generator"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
