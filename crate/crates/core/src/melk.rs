//! Explicit-threshold level set estimation by phased experimental design.

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::design::{beta_bar, frank_wolfe_design, Design, DesignProblem, FwConfig, LevelObjective};
use crate::env::Threshold;
use crate::error::{Error, Result};
use crate::gp::{ConfidenceWidth, GpPosterior};
use crate::kernels::{ArmSet, FeatureCombo, InverseOperator};
use crate::rng::{stream, Stream};
use crate::robust::{rips_with_operator, RipsParams, SamplingOracle};
use crate::run::{complement, members, record, RoundHistory, RunResult, Snapshot, StopReason, TargetEstimate};

pub const DEFAULT_MAX_ROUNDS: usize = 60;

/// Regularization per design computation: a constant, or `base / (10 i)` at the i-th one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaSchedule {
    Fixed { gamma: f64 },
    Decaying { base: f64 },
}

impl GammaSchedule {
    pub fn at(&self, i: usize) -> f64 {
        match *self {
            GammaSchedule::Fixed { gamma } => gamma,
            GammaSchedule::Decaying { base } => base / (10.0 * i.max(1) as f64),
        }
    }

    pub fn validate(&self, arms: &ArmSet) -> Result<()> {
        let g = match *self {
            GammaSchedule::Fixed { gamma } => gamma,
            GammaSchedule::Decaying { base } => base,
        };
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::config("gamma", "must be finite and nonnegative"));
        }
        if g == 0.0 && !arms.kernel().is_linear() {
            return Err(Error::config("gamma", "must be positive for non-linear kernels"));
        }
        Ok(())
    }
}

impl Default for GammaSchedule {
    fn default() -> Self {
        GammaSchedule::Fixed { gamma: 0.0 }
    }
}

/// Fixed-size batches with interval-based elimination in place of the `N_t` schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchMode {
    pub batch_size: usize,
    #[serde(default)]
    pub width: ConfidenceWidth,
    pub noise_var: f64,
    pub max_batches: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MelkConfig {
    pub alpha: f64,
    pub delta: f64,
    #[serde(default)]
    pub gamma: GammaSchedule,
    #[serde(default)]
    pub beta_tilde: f64,
    pub signal_bound: f64,
    pub sigma: f64,
    #[serde(default)]
    pub fw: FwConfig,
    #[serde(default)]
    pub batch_mode: Option<BatchMode>,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    /// Stop before a round that would push the total past this many samples.
    #[serde(default)]
    pub max_samples: Option<u64>,
}

fn default_max_rounds() -> usize {
    DEFAULT_MAX_ROUNDS
}

impl MelkConfig {
    pub fn new(alpha: f64, delta: f64, signal_bound: f64, sigma: f64) -> Self {
        Self {
            alpha,
            delta,
            gamma: GammaSchedule::default(),
            beta_tilde: 0.0,
            signal_bound,
            sigma,
            fw: FwConfig::default(),
            batch_mode: None,
            max_rounds: DEFAULT_MAX_ROUNDS,
            max_samples: None,
        }
    }

    pub fn validate(&self, arms: &ArmSet) -> Result<()> {
        if !self.alpha.is_finite() {
            return Err(Error::config("alpha", "must be finite"));
        }
        validate_common(self.delta, self.beta_tilde, self.signal_bound, self.sigma, self.max_rounds)?;
        self.gamma.validate(arms)?;
        self.fw.validate()?;
        if let Some(b) = &self.batch_mode {
            if b.batch_size == 0 {
                return Err(Error::config("batch_mode.batch_size", "must be at least 1"));
            }
            if !(b.noise_var > 0.0) {
                return Err(Error::config("batch_mode.noise_var", "must be positive"));
            }
        }
        Ok(())
    }
}

pub(crate) fn validate_common(delta: f64, beta_tilde: f64, b: f64, sigma: f64, max_rounds: usize) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config("delta", "must lie in (0, 1)"));
    }
    if !(beta_tilde >= 0.0) {
        return Err(Error::config("beta_tilde", "must be nonnegative"));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::config("signal_bound", "must be positive"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::config("sigma", "must be nonnegative"));
    }
    if max_rounds == 0 {
        return Err(Error::config("max_rounds", "must be at least 1"));
    }
    Ok(())
}

/// `ceil(log2(4 / beta_tilde))`, or `None` (no cap) when `beta_tilde = 0`.
pub fn round_cap(beta_tilde: f64) -> Option<usize> {
    if beta_tilde == 0.0 {
        None
    } else {
        Some((4.0 / beta_tilde).log2().ceil().max(0.0) as usize)
    }
}

/// `delta_t = delta / (2 t^2)`.
pub fn round_confidence(delta: f64, t: usize) -> f64 {
    delta / (2.0 * (t * t) as f64)
}

/// `N_t = ceil(max{16 4^t g (B^2 + sigma^2) ln(2 t^2 |X|^2 / delta), 2 ln(|X| / delta)})`, raised
/// if needed so the robust mean of every target is defined (`N > 2 ln(2 |V| / delta_t)`).
pub fn samples_for_round(t: usize, design_value: f64, second_moment: f64, n_arms: usize, n_targets: usize, delta: f64) -> f64 {
    let n = n_arms as f64;
    let tt = (t * t) as f64;
    let q = 16.0 * 4f64.powi(t as i32) * design_value * second_moment * (2.0 * tt * n * n / delta).ln();
    let floor = 2.0 * (n / delta).ln();
    let catoni = (2.0 * (2.0 * n_targets as f64 / round_confidence(delta, t)).ln()).floor() + 1.0;
    q.max(floor).ceil().max(catoni)
}

/// Upper limit on `N_t` before it is treated as unaffordable.
const SAMPLE_CEILING: f64 = 1e12;
/// Noisy rounds keep every observation in memory; cap them separately.
const NOISY_SAMPLE_CEILING: f64 = 2e8;

pub(crate) enum RoundOutcome {
    Estimates {
        design: Design,
        design_value: f64,
        n_samples: u64,
        estimates: Vec<f64>,
    },
    OutOfBudget,
}

/// Design, sample count, draws and robust estimates for one round.
#[allow(clippy::too_many_arguments)]
pub(crate) fn estimate_round(
    arms: &ArmSet,
    targets: Vec<FeatureCombo>,
    t: usize,
    gamma: f64,
    delta: f64,
    params: &RipsParams,
    fw: &FwConfig,
    used: u64,
    max_samples: Option<u64>,
    oracle: &mut dyn SamplingOracle,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<RoundOutcome> {
    let n_targets = targets.len();
    let problem = DesignProblem::new(arms, targets, gamma)?;
    let fw_res = frank_wolfe_design(&problem, fw)?;
    if !fw_res.value.is_finite() {
        return Err(Error::Numerical {
            what: format!("design value in round {t}"),
            condition: f64::INFINITY,
        });
    }
    let n_t = samples_for_round(t, fw_res.value, params.second_moment(), arms.len(), n_targets, delta);
    if n_t > SAMPLE_CEILING || (params.sigma > 0.0 && n_t > NOISY_SAMPLE_CEILING) {
        return Ok(RoundOutcome::OutOfBudget);
    }
    let n_t = n_t as u64;
    if max_samples.is_some_and(|m| used + n_t > m) || oracle.remaining_budget().is_some_and(|r| r < n_t) {
        return Ok(RoundOutcome::OutOfBudget);
    }
    let op = InverseOperator::new(arms, &fw_res.design, gamma)?;
    let delta_t = round_confidence(delta, t);
    let table = match rips_with_operator(
        arms,
        &op,
        problem.targets(),
        &fw_res.design,
        n_t as usize,
        delta_t,
        params,
        oracle,
        rng,
    ) {
        Ok(t) => t,
        Err(Error::BudgetExhausted { .. }) => return Ok(RoundOutcome::OutOfBudget),
        Err(e) => return Err(e),
    };
    Ok(RoundOutcome::Estimates {
        design: fw_res.design,
        design_value: fw_res.value,
        n_samples: n_t,
        estimates: table.estimates,
    })
}

fn declared(good: &[bool], active: &[bool], last_estimate: &[Option<f64>], alpha: f64) -> Vec<usize> {
    (0..good.len())
        .filter(|&i| good[i] || (active[i] && last_estimate[i].is_some_and(|w| w >= alpha)))
        .collect()
}

fn snapshot(samples: u64, round: usize, good: &[bool], bad: &[bool], active: &[bool], est: &[Option<f64>], alpha: f64) -> Snapshot {
    Snapshot {
        samples,
        round,
        declared: declared(good, active, est, alpha),
        good: members(good),
        n_bad: bad.iter().filter(|&&b| b).count(),
        n_active: active.iter().filter(|&&b| b).count(),
    }
}

/// Runs MELK. Deterministic given `seed` and the oracle's own noise stream.
pub fn run_melk(arms: &ArmSet, oracle: &mut dyn SamplingOracle, cfg: &MelkConfig, seed: u64) -> Result<RunResult> {
    cfg.validate(arms)?;
    if let Some(batch) = cfg.batch_mode {
        return run_melk_batched(arms, oracle, cfg, &batch, seed);
    }
    let n = arms.len();
    let mut rng = stream(seed, Stream::DesignDraws);
    let params = RipsParams {
        signal_bound: cfg.signal_bound,
        sigma: cfg.sigma,
    };
    let cap = round_cap(cfg.beta_tilde);
    let mut good = vec![false; n];
    let mut bad = vec![false; n];
    let mut active = vec![true; n];
    let mut est: Vec<Option<f64>> = vec![None; n];
    let mut rounds = Vec::new();
    let mut trajectory = Vec::new();
    let mut total = 0u64;
    record(&mut trajectory, snapshot(0, 0, &good, &bad, &active, &est, cfg.alpha));

    let mut t = 1;
    let stop_reason = loop {
        let active_idx = members(&active);
        if active_idx.is_empty() {
            break StopReason::AllClassified;
        }
        if cap.is_some_and(|c| t > c) {
            break StopReason::ToleranceRoundCap;
        }
        if t > cfg.max_rounds {
            break StopReason::BudgetExhausted;
        }
        let gamma = cfg.gamma.at(t);
        let targets: Vec<FeatureCombo> = active_idx.iter().map(|&i| FeatureCombo::arm(i)).collect();
        let outcome = estimate_round(
            arms,
            targets,
            t,
            gamma,
            cfg.delta,
            &params,
            &cfg.fw,
            total,
            cfg.max_samples,
            oracle,
            &mut rng,
        )?;
        let RoundOutcome::Estimates {
            design,
            design_value,
            n_samples,
            estimates,
        } = outcome
        else {
            break StopReason::BudgetExhausted;
        };
        total += n_samples;
        let margin = 2.0 * 0.5f64.powi(t as i32);
        let mut newly_good = Vec::new();
        let mut newly_bad = Vec::new();
        let mut round_est = Vec::with_capacity(active_idx.len());
        for (&i, &w) in active_idx.iter().zip(&estimates) {
            est[i] = Some(w);
            round_est.push(TargetEstimate {
                arm: i,
                other: None,
                value: w,
            });
            if w < cfg.alpha - margin {
                bad[i] = true;
                active[i] = false;
                newly_bad.push(i);
            } else if w > cfg.alpha + margin {
                good[i] = true;
                active[i] = false;
                newly_good.push(i);
            }
        }
        rounds.push(RoundHistory {
            round: t,
            delta_t: round_confidence(cfg.delta, t),
            gamma,
            design: design.weights().to_vec(),
            design_value,
            n_samples,
            estimates: round_est,
            newly_good,
            newly_bad,
            n_active_after: active.iter().filter(|&&a| a).count(),
        });
        record(&mut trajectory, snapshot(total, t, &good, &bad, &active, &est, cfg.alpha));
        t += 1;
    };

    Ok(RunResult {
        algorithm: "melk".into(),
        good: members(&good),
        bad: members(&bad),
        active: members(&active),
        returned: complement(n, &bad),
        rounds,
        total_samples: total,
        stop_reason,
        trajectory,
    })
}

/// Batched variant: each batch draws `batch_size` arms from the current design over the
/// active arms and classifies with posterior confidence intervals.
fn run_melk_batched(
    arms: &ArmSet,
    oracle: &mut dyn SamplingOracle,
    cfg: &MelkConfig,
    batch: &BatchMode,
    seed: u64,
) -> Result<RunResult> {
    let n = arms.len();
    let mut rng = stream(seed, Stream::DesignDraws);
    let mut gp = GpPosterior::new(arms, batch.noise_var)?;
    let mut good = vec![false; n];
    let mut bad = vec![false; n];
    let mut active = vec![true; n];
    let mut rounds = Vec::new();
    let mut trajectory = Vec::new();
    let mut total = 0u64;
    let mut est: Vec<Option<f64>> = vec![None; n];
    record(&mut trajectory, snapshot(0, 0, &good, &bad, &active, &est, cfg.alpha));

    let mut i = 1;
    let stop_reason = loop {
        let active_idx = members(&active);
        if active_idx.is_empty() {
            break StopReason::AllClassified;
        }
        if i > batch.max_batches
            || cfg.max_samples.is_some_and(|m| total + batch.batch_size as u64 > m)
            || oracle.remaining_budget().is_some_and(|r| r < batch.batch_size as u64)
        {
            break StopReason::BudgetExhausted;
        }
        let gamma = cfg.gamma.at(i);
        let targets: Vec<FeatureCombo> = active_idx.iter().map(|&a| FeatureCombo::arm(a)).collect();
        let problem = DesignProblem::new(arms, targets, gamma)?;
        let fw_res = frank_wolfe_design(&problem, &cfg.fw)?;
        let sampler = WeightedIndex::new(fw_res.design.weights())
            .map_err(|e| Error::invalid(format!("cannot sample from design: {e}")))?;
        for _ in 0..batch.batch_size {
            let a = sampler.sample(&mut rng);
            let y = oracle.observe(a)?;
            gp.update(a, y)?;
        }
        total += batch.batch_size as u64;
        let beta_sqrt = batch.width.beta_sqrt(total, n);
        let mut newly_good = Vec::new();
        let mut newly_bad = Vec::new();
        let mut round_est = Vec::new();
        for &a in &active_idx {
            let mu = gp.mean(a);
            let half = beta_sqrt * gp.variance(a).sqrt();
            est[a] = Some(mu);
            round_est.push(TargetEstimate {
                arm: a,
                other: None,
                value: mu,
            });
            if mu + half < cfg.alpha {
                bad[a] = true;
                active[a] = false;
                newly_bad.push(a);
            } else if mu - half > cfg.alpha {
                good[a] = true;
                active[a] = false;
                newly_good.push(a);
            }
        }
        rounds.push(RoundHistory {
            round: i,
            delta_t: round_confidence(cfg.delta, i),
            gamma,
            design: fw_res.design.weights().to_vec(),
            design_value: fw_res.value,
            n_samples: batch.batch_size as u64,
            estimates: round_est,
            newly_good,
            newly_bad,
            n_active_after: active.iter().filter(|&&a| a).count(),
        });
        record(&mut trajectory, snapshot(total, i, &good, &bad, &active, &est, cfg.alpha));
        i += 1;
    };
    Ok(RunResult {
        algorithm: "melk".into(),
        good: members(&good),
        bad: members(&bad),
        active: members(&active),
        returned: complement(n, &bad),
        rounds,
        total_samples: total,
        stop_reason,
        trajectory,
    })
}

/// `sum_t 4^t lambda_t / sum_t 4^t` over the recorded rounds.
pub fn weighted_allocation(result: &RunResult) -> Result<Design> {
    let first = result
        .rounds
        .first()
        .ok_or_else(|| Error::invalid("run has no rounds"))?;
    let n = first.design.len();
    let mut acc = vec![0.0; n];
    // weights relative to the last round keep 4^t finite
    let last = result.rounds.last().map_or(0, |r| r.round) as i32;
    let mut total = 0.0;
    for r in &result.rounds {
        let w = 4f64.powi(r.round as i32 - last);
        for (a, x) in acc.iter_mut().zip(&r.design) {
            *a += w * x;
        }
        total += w;
    }
    for a in &mut acc {
        *a /= total;
    }
    let s: f64 = acc.iter().sum();
    for a in &mut acc {
        *a /= s;
    }
    Design::new(acc)
}

/// Containment checks of a finished run against ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeReport {
    pub beta_bar: f64,
    pub level: f64,
    /// Arms with `f >= level + beta_bar` that were eliminated.
    pub missed_above: Vec<usize>,
    /// Returned arms with `f < level - beta_tilde - beta_bar`.
    pub returned_far_below: Vec<usize>,
    /// Arms with `f >= level + beta_tilde + beta_bar` missing from the good set.
    pub good_variant_missed: Vec<usize>,
    /// Good-set arms with `f < level - beta_bar`.
    pub good_variant_far_below: Vec<usize>,
}

impl GuaranteeReport {
    pub fn holds(&self) -> bool {
        self.missed_above.is_empty()
            && self.returned_far_below.is_empty()
            && self.good_variant_missed.is_empty()
            && self.good_variant_far_below.is_empty()
    }
}

/// Checks both containments of the returned set, and of the good set, against the true
/// values `true_f`. `h` is the misspecification level and `theta_norm` bounds `|theta*|`.
#[allow(clippy::too_many_arguments)]
pub fn classification_guarantee_check(
    result: &RunResult,
    arms: &ArmSet,
    true_f: &[f64],
    objective: LevelObjective,
    beta_tilde: f64,
    gamma: f64,
    h: f64,
    theta_norm: f64,
    fw: &FwConfig,
) -> Result<GuaranteeReport> {
    let bb = beta_bar(arms, true_f, theta_norm, h, gamma, objective, fw)?;
    let level = match objective {
        LevelObjective::Explicit { alpha } => alpha,
        LevelObjective::Implicit { epsilon } => Threshold::Implicit { epsilon }.level(true_f),
    };
    let n = true_f.len();
    let mut returned = vec![false; n];
    for &i in &result.returned {
        returned[i] = true;
    }
    let mut good = vec![false; n];
    for &i in &result.good {
        good[i] = true;
    }
    let pick = |pred: &dyn Fn(usize) -> bool| (0..n).filter(|&i| pred(i)).collect::<Vec<_>>();
    Ok(GuaranteeReport {
        beta_bar: bb,
        level,
        missed_above: pick(&|i| true_f[i] >= level + bb && !returned[i]),
        returned_far_below: pick(&|i| returned[i] && true_f[i] < level - beta_tilde - bb),
        good_variant_missed: pick(&|i| {
            result.stop_reason != StopReason::BudgetExhausted
                && true_f[i] >= level + beta_tilde + bb
                && !good[i]
        }),
        good_variant_far_below: pick(&|i| good[i] && true_f[i] < level - bb),
    })
}

pub fn melk_classification_guarantee_check(
    result: &RunResult,
    arms: &ArmSet,
    true_f: &[f64],
    cfg: &MelkConfig,
    h: f64,
    theta_norm: f64,
) -> Result<GuaranteeReport> {
    classification_guarantee_check(
        result,
        arms,
        true_f,
        LevelObjective::Explicit { alpha: cfg.alpha },
        cfg.beta_tilde,
        cfg.gamma.at(1),
        h,
        theta_norm,
        &cfg.fw,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate, Generator, InstanceSpec, ThresholdSpec};
    use crate::kernels::KernelSpec;

    fn three_arm() -> (ArmSet, crate::env::Environment) {
        let spec = InstanceSpec::new(
            Generator::ExplicitLinear {
                theta: vec![1.0, 0.0],
                points: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.8, 0.6]],
            },
            ThresholdSpec::Explicit { alpha: 0.5 },
        );
        let env = generate(&spec, 7).unwrap();
        (env.arms().clone(), env)
    }

    #[test]
    fn noiseless_three_arm_instance() {
        let (arms, mut env) = three_arm();
        let cfg = MelkConfig::new(0.5, 0.1, 1.0, 0.0);
        let res = run_melk(&arms, &mut env, &cfg, 1).unwrap();
        assert_eq!(res.good, vec![0, 2]);
        assert_eq!(res.bad, vec![1]);
        assert_eq!(res.returned, vec![0, 2]);
        // the margin 2 * 2^-t first clears every gap (0.5, 0.3) at t = 3
        assert_eq!(res.rounds.len(), 3);
        assert_eq!(res.stop_reason, StopReason::AllClassified);
        assert_eq!(res.total_samples, res.rounds.iter().map(|r| r.n_samples).sum::<u64>());
    }

    #[test]
    fn tolerance_four_takes_no_rounds() {
        let (arms, mut env) = three_arm();
        let mut cfg = MelkConfig::new(0.5, 0.1, 1.0, 0.0);
        cfg.beta_tilde = 4.0;
        let res = run_melk(&arms, &mut env, &cfg, 1).unwrap();
        assert_eq!(res.returned, vec![0, 1, 2]);
        assert_eq!(res.total_samples, 0);
        assert_eq!(res.stop_reason, StopReason::ToleranceRoundCap);
    }

    #[test]
    fn round_cap_values() {
        assert_eq!(round_cap(0.0), None);
        assert_eq!(round_cap(4.0), Some(0));
        assert_eq!(round_cap(1.0), Some(2));
        assert_eq!(round_cap(0.3), Some(4));
    }

    #[test]
    fn sample_count_respects_floor() {
        let n = samples_for_round(1, 1e-12, 1.0, 10, 10, 0.1);
        assert!(n >= 2.0 * (10.0f64 / 0.1).ln());
        assert!(n > 2.0 * (2.0 * 10.0 / round_confidence(0.1, 1)).ln());
    }

    #[test]
    fn budget_exhaustion_gives_partial_result() {
        let (arms, mut env) = three_arm();
        env.set_budget(Some(50));
        let cfg = MelkConfig::new(0.5, 0.1, 1.0, 0.0);
        let res = run_melk(&arms, &mut env, &cfg, 1).unwrap();
        assert_eq!(res.stop_reason, StopReason::BudgetExhausted);
        assert_eq!(res.returned, vec![0, 1, 2]);
    }

    #[test]
    fn weighted_allocation_favours_late_rounds() {
        let mk = |round, design: Vec<f64>| RoundHistory {
            round,
            delta_t: 0.1,
            gamma: 0.0,
            design,
            design_value: 1.0,
            n_samples: 1,
            estimates: vec![],
            newly_good: vec![],
            newly_bad: vec![],
            n_active_after: 0,
        };
        let res = RunResult {
            algorithm: "melk".into(),
            good: vec![],
            bad: vec![],
            active: vec![],
            returned: vec![],
            rounds: vec![mk(1, vec![1.0, 0.0]), mk(2, vec![0.0, 1.0])],
            total_samples: 2,
            stop_reason: StopReason::AllClassified,
            trajectory: vec![],
        };
        let w = weighted_allocation(&res).unwrap();
        assert!((w.weights()[0] - 0.2).abs() < 1e-12);
        assert!((w.weights()[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn exact_recovery_satisfies_guarantee() {
        let (arms, mut env) = three_arm();
        let cfg = MelkConfig::new(0.5, 0.1, 1.0, 0.0);
        let res = run_melk(&arms, &mut env, &cfg, 3).unwrap();
        let report = melk_classification_guarantee_check(&res, &arms, env.true_f(), &cfg, 0.0, 1.0).unwrap();
        assert_eq!(report.beta_bar, 0.0);
        assert!(report.holds());
    }

    #[test]
    fn empty_level_set_is_vacuous() {
        let arms = ArmSet::new(vec![vec![1.0], vec![0.5]], KernelSpec::Linear).unwrap();
        let res = RunResult {
            algorithm: "melk".into(),
            good: vec![],
            bad: vec![0, 1],
            active: vec![],
            returned: vec![],
            rounds: vec![],
            total_samples: 0,
            stop_reason: StopReason::AllClassified,
            trajectory: vec![],
        };
        let cfg = MelkConfig::new(2.0, 0.1, 1.0, 0.0);
        let report = melk_classification_guarantee_check(&res, &arms, &[-1.0, -1.5], &cfg, 0.0, 1.0).unwrap();
        assert!(report.holds());
    }
}
