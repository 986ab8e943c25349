//! Catoni's robust mean and the robust inverse-propensity-scoring (RIPS) estimator.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::kernels::{ArmSet, FeatureCombo, InverseOperator};

/// Access to noisy function evaluations. One oracle is owned by exactly one run.
pub trait SamplingOracle {
    /// One observation `f(x_arm) + noise`; fails once the budget is spent.
    fn observe(&mut self, arm: usize) -> Result<f64>;
    fn samples_used(&self) -> u64;
    /// `None` when unbounded.
    fn remaining_budget(&self) -> Option<u64>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustMeanParams {
    /// Per-call failure probability.
    pub delta_prime: f64,
    /// Bound on the second moment of the samples.
    pub variance_bound: f64,
}

impl RobustMeanParams {
    fn log_term(&self) -> f64 {
        (2.0 / self.delta_prime).ln()
    }

    /// Smallest admissible sample count is strictly above this.
    pub fn min_samples(&self) -> f64 {
        2.0 * self.log_term()
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.delta_prime > 0.0 && self.delta_prime < 1.0) {
            return Err(Error::invalid(format!("delta' must lie in (0, 1), got {}", self.delta_prime)));
        }
        if !(self.variance_bound > 0.0 && self.variance_bound.is_finite()) {
            return Err(Error::invalid(format!(
                "variance bound must be positive, got {}",
                self.variance_bound
            )));
        }
        let need = self.min_samples();
        if (n as f64) <= need {
            return Err(Error::InsufficientSamples { got: n, need });
        }
        Ok(())
    }

    /// Scale of the influence function for `n` samples.
    fn influence_scale(&self, n: usize) -> f64 {
        let l = self.log_term();
        let n = n as f64;
        (2.0 * l / (n * self.variance_bound * (1.0 + 2.0 * l / (n - 2.0 * l)))).sqrt()
    }
}

/// A run of samples `scale * values[k]`, each repeated `weight` times.
#[derive(Clone, Copy, Debug)]
pub(crate) struct SampleGroup<'a> {
    pub scale: f64,
    pub values: &'a [f64],
    pub weight: f64,
}

#[inline]
fn psi(x: f64) -> f64 {
    let a = x.abs();
    (a + 0.5 * a * a).ln_1p().copysign(x)
}

#[inline]
fn psi_prime(x: f64) -> f64 {
    let a = x.abs();
    (1.0 + a) / (1.0 + a + 0.5 * a * a)
}

/// Catoni's M-estimator: the root of `sum_i psi(s (z_i - mu)) = 0` with
/// `psi(x) = sign(x) ln(1 + |x| + x^2/2)`.
pub fn catoni_mean(samples: &[f64], params: &RobustMeanParams) -> Result<f64> {
    params.validate(samples.len())?;
    let groups = [SampleGroup {
        scale: 1.0,
        values: samples,
        weight: 1.0,
    }];
    Ok(catoni_root(&groups, params.influence_scale(samples.len())))
}

pub(crate) fn catoni_grouped(groups: &[SampleGroup<'_>], n: usize, params: &RobustMeanParams) -> Result<f64> {
    params.validate(n)?;
    Ok(catoni_root(groups, params.influence_scale(n)))
}

/// The sum is strictly decreasing in `mu`, positive at the sample minimum and negative at the
/// maximum, so the root is bracketed by the sample range. Newton steps are taken when they
/// stay inside the bracket, bisection otherwise, until the bracket or step is below 1e-10.
fn catoni_root(groups: &[SampleGroup<'_>], s: f64) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut total_w = 0.0;
    let mut mean = 0.0;
    for g in groups {
        for &v in g.values {
            let z = g.scale * v;
            lo = lo.min(z);
            hi = hi.max(z);
            mean += g.weight * z;
            total_w += g.weight;
        }
    }
    if !(hi > lo) {
        return lo;
    }
    mean /= total_w;
    let eval = |mu: f64| {
        let mut f = 0.0;
        let mut df = 0.0;
        for g in groups {
            let mut fg = 0.0;
            let mut dfg = 0.0;
            for &v in g.values {
                let x = s * (g.scale * v - mu);
                fg += psi(x);
                dfg += psi_prime(x);
            }
            f += g.weight * fg;
            df += g.weight * dfg;
        }
        (f, -s * df)
    };
    let mut mu = mean.clamp(lo, hi);
    for _ in 0..200 {
        let (f, df) = eval(mu);
        if f == 0.0 {
            return mu;
        }
        if f > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        if hi - lo <= 1e-10 {
            break;
        }
        let newton = mu - f / df;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let step = (next - mu).abs();
        mu = next;
        if step <= 1e-12 * (1.0 + mu.abs()) {
            break;
        }
    }
    mu.clamp(lo, hi)
}

/// Noise model constants used for the per-target variance bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RipsParams {
    /// Bound `B` on the noiseless signal.
    pub signal_bound: f64,
    /// Noise standard deviation.
    pub sigma: f64,
}

impl RipsParams {
    pub fn second_moment(&self) -> f64 {
        self.signal_bound * self.signal_bound + self.sigma * self.sigma
    }
}

/// Robust IPS estimates `W(v)` of `<theta*, v>` for each target, all computed from one shared
/// batch of `tau` draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateTable {
    pub estimates: Vec<f64>,
    /// `|v|^2_{A(lambda)^{-1}}` per target.
    pub norms_sq: Vec<f64>,
    pub design: Design,
    pub tau: usize,
    /// Draw counts per arm.
    pub pulls: Vec<u64>,
}

/// Draws `tau` arms i.i.d. from `lambda`, observes each once, and returns the Catoni mean of
/// the scalar IPS samples `<v, A^{-1} phi(x_j)> y_j` for every target `v`.
#[allow(clippy::too_many_arguments)]
pub fn rips<R: Rng + ?Sized>(
    arms: &ArmSet,
    targets: &[FeatureCombo],
    lambda: &Design,
    gamma: f64,
    tau: usize,
    delta: f64,
    params: &RipsParams,
    oracle: &mut dyn SamplingOracle,
    rng: &mut R,
) -> Result<EstimateTable> {
    let op = InverseOperator::new(arms, lambda, gamma)?;
    rips_with_operator(arms, &op, targets, lambda, tau, delta, params, oracle, rng)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn rips_with_operator<R: Rng + ?Sized>(
    arms: &ArmSet,
    op: &InverseOperator,
    targets: &[FeatureCombo],
    lambda: &Design,
    tau: usize,
    delta: f64,
    params: &RipsParams,
    oracle: &mut dyn SamplingOracle,
    rng: &mut R,
) -> Result<EstimateTable> {
    if targets.is_empty() {
        return Err(Error::invalid("RIPS needs at least one target"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if lambda.len() != arms.len() {
        return Err(Error::DimensionMismatch(arms.len(), lambda.len()));
    }
    let need = 2.0 * (targets.len() as f64 / delta).ln();
    if (tau as f64) < need {
        return Err(Error::InsufficientSamples { got: tau, need });
    }
    for t in targets {
        t.check_for(arms)?;
    }
    if let Some(left) = oracle.remaining_budget() {
        if left < tau as u64 {
            return Err(Error::BudgetExhausted {
                used: oracle.samples_used(),
            });
        }
    }

    let n = arms.len();
    let sampler = WeightedIndex::new(lambda.weights())
        .map_err(|e| Error::invalid(format!("cannot sample from design: {e}")))?;
    // identical observations at an arm (noiseless oracle) are kept as one value with a count
    let mut by_arm: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut uniform = vec![true; n];
    let mut pulls = vec![0u64; n];
    for _ in 0..tau {
        let a = sampler.sample(rng);
        let y = oracle.observe(a)?;
        let ys = &mut by_arm[a];
        if ys.is_empty() {
            ys.push(y);
        } else if uniform[a] {
            if y != ys[0] {
                uniform[a] = false;
                *ys = vec![ys[0]; pulls[a] as usize];
                ys.push(y);
            }
        } else {
            ys.push(y);
        }
        pulls[a] += 1;
    }

    let delta_prime = delta / targets.len() as f64;
    let mut estimates = Vec::with_capacity(targets.len());
    let mut norms_sq = Vec::with_capacity(targets.len());
    let mut groups: Vec<SampleGroup<'_>> = Vec::with_capacity(n);
    for v in targets {
        let norm_sq = op.norm_sq(v)?;
        let row = op.arm_row(v);
        groups.clear();
        for a in 0..n {
            if by_arm[a].is_empty() {
                continue;
            }
            groups.push(SampleGroup {
                scale: row[a],
                values: &by_arm[a],
                weight: if uniform[a] { pulls[a] as f64 } else { 1.0 },
            });
        }
        let rm = RobustMeanParams {
            delta_prime,
            variance_bound: params.second_moment() * norm_sq,
        };
        estimates.push(catoni_grouped(&groups, tau, &rm)?);
        norms_sq.push(norm_sq);
    }
    Ok(EstimateTable {
        estimates,
        norms_sq,
        design: lambda.clone(),
        tau,
        pulls,
    })
}

/// Right-hand side of the RIPS deviation guarantee for `W(v)`, to be scaled by
/// `|v|_{A^{-1}}`: `2 sqrt(gamma) |theta| + 2h + 4 sqrt((B^2 + sigma^2) ln(2 |V| / delta) / tau)`.
pub fn rips_deviation_bound(gamma: f64, theta_norm: f64, h: f64, second_moment: f64, n_targets: usize, delta: f64, tau: usize) -> f64 {
    2.0 * gamma.sqrt() * theta_norm
        + 2.0 * h
        + 4.0 * (second_moment * (2.0 * n_targets as f64 / delta).ln() / tau as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n_var: f64) -> RobustMeanParams {
        RobustMeanParams {
            delta_prime: 0.05,
            variance_bound: n_var,
        }
    }

    #[test]
    fn constant_samples() {
        let z = vec![5.0; 30];
        assert_eq!(catoni_mean(&z, &params(1.0)).unwrap(), 5.0);
    }

    #[test]
    fn symmetric_samples() {
        let z: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        assert!(catoni_mean(&z, &params(1.0)).unwrap().abs() < 1e-9);
    }

    #[test]
    fn too_few_samples() {
        // 2 ln(40) ~ 7.38
        let z = vec![1.0; 7];
        assert!(matches!(
            catoni_mean(&z, &params(1.0)),
            Err(Error::InsufficientSamples { got: 7, .. })
        ));
        assert!(catoni_mean(&[1.0; 8], &params(1.0)).is_ok());
    }

    #[test]
    fn nonpositive_variance_bound() {
        assert!(matches!(catoni_mean(&[1.0; 50], &params(0.0)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn heavy_outlier_is_damped() {
        let mut z = vec![0.0; 99];
        z.push(1e6);
        let m = catoni_mean(&z, &params(1.0)).unwrap();
        assert!(m < 1.0, "catoni mean {m}");
        assert!(m >= 0.0);
    }

    #[test]
    fn grouped_matches_expanded() {
        let a = [0.3, -1.2, 2.0];
        let b = [1.5];
        let mut expanded: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        expanded.extend(std::iter::repeat_n(-0.5 * 1.5, 7));
        let groups = [
            SampleGroup { scale: 2.0, values: &a, weight: 1.0 },
            SampleGroup { scale: -0.5, values: &b, weight: 7.0 },
        ];
        let p = params(2.0);
        let g = catoni_grouped(&groups, 10, &p).unwrap();
        let e = catoni_mean(&expanded, &p).unwrap();
        assert!((g - e).abs() < 1e-9);
    }
}
