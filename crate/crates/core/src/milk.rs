//! Implicit-threshold (`f(x) >= (1 - eps) max f`) level set estimation over pairwise
//! differences.

use serde::{Deserialize, Serialize};

use crate::design::{FwConfig, LevelObjective};
use crate::error::{Error, Result};
use crate::kernels::{ArmSet, FeatureCombo};
use crate::melk::{
    classification_guarantee_check, estimate_round, round_cap, round_confidence, validate_common, GammaSchedule,
    GuaranteeReport, RoundOutcome, DEFAULT_MAX_ROUNDS,
};
use crate::rng::{stream, Stream};
use crate::robust::{RipsParams, SamplingOracle};
use crate::run::{complement, members, record, RoundHistory, RunResult, Snapshot, StopReason, TargetEstimate};

/// Active ordered pairs `(x, x')`, `x != x'`, with per-arm counts of pairs where the arm is
/// the first coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSet {
    n: usize,
    active: Vec<bool>,
    outstanding: Vec<usize>,
}

impl PairSet {
    pub fn full(n: usize) -> Self {
        let mut active = vec![true; n * n];
        for i in 0..n {
            active[i * n + i] = false;
        }
        Self {
            n,
            active,
            outstanding: vec![n.saturating_sub(1); n],
        }
    }

    pub fn n_arms(&self) -> usize {
        self.n
    }

    pub fn contains(&self, x: usize, xp: usize) -> bool {
        self.active[x * self.n + xp]
    }

    /// Active pairs in row-major order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|x| (0..self.n).map(move |xp| (x, xp)))
            .filter(|&(x, xp)| self.contains(x, xp))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.outstanding.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn outstanding(&self, x: usize) -> usize {
        self.outstanding[x]
    }

    /// Removes a single pair. Returns whether it was active.
    pub fn remove(&mut self, x: usize, xp: usize) -> bool {
        let k = x * self.n + xp;
        if self.active[k] {
            self.active[k] = false;
            self.outstanding[x] -= 1;
            true
        } else {
            false
        }
    }

    /// Removes every pair containing `x` in either position.
    pub fn remove_arm(&mut self, x: usize) {
        for other in 0..self.n {
            self.remove(x, other);
            self.remove(other, x);
        }
    }
}

/// `phi(x) - (1 - eps) phi(x')` for each pair.
pub fn y_eps(pairs: &[(usize, usize)], epsilon: f64) -> Result<Vec<FeatureCombo>> {
    pairs
        .iter()
        .map(|&(x, xp)| FeatureCombo::difference(x, xp, 1.0 - epsilon))
        .collect()
}

/// `f(arm) >= (1 - eps) max f`.
pub fn membership_check(true_f: &[f64], epsilon: f64, arm: usize) -> bool {
    let fmax = true_f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    true_f[arm] >= (1.0 - epsilon) * fmax
}

/// The same membership decided from the signs of all pair differences
/// `f(arm) - (1 - eps) f(x')`.
pub fn pairwise_membership(true_f: &[f64], epsilon: f64, arm: usize) -> bool {
    true_f.iter().all(|&fp| true_f[arm] - (1.0 - epsilon) * fp >= 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilkConfig {
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default)]
    pub gamma: GammaSchedule,
    #[serde(default)]
    pub beta_tilde: f64,
    pub signal_bound: f64,
    pub sigma: f64,
    #[serde(default)]
    pub fw: FwConfig,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default)]
    pub max_samples: Option<u64>,
}

fn default_max_rounds() -> usize {
    DEFAULT_MAX_ROUNDS
}

impl MilkConfig {
    pub fn new(epsilon: f64, delta: f64, signal_bound: f64, sigma: f64) -> Self {
        Self {
            epsilon,
            delta,
            gamma: GammaSchedule::default(),
            beta_tilde: 0.0,
            signal_bound,
            sigma,
            fw: FwConfig::default(),
            max_rounds: DEFAULT_MAX_ROUNDS,
            max_samples: None,
        }
    }

    pub fn validate(&self, arms: &ArmSet) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config("epsilon", "must lie in (0, 1)"));
        }
        validate_common(self.delta, self.beta_tilde, self.signal_bound, self.sigma, self.max_rounds)?;
        self.gamma.validate(arms)?;
        self.fw.validate()
    }
}

/// Arms declared good so far, plus active arms whose every estimated pair difference
/// (from the latest round it was estimated) is nonnegative.
fn declared(good: &[bool], active: &[bool], min_diff: &[Option<f64>]) -> Vec<usize> {
    (0..good.len())
        .filter(|&i| good[i] || (active[i] && min_diff[i].is_some_and(|w| w >= 0.0)))
        .collect()
}

pub fn run_milk(arms: &ArmSet, oracle: &mut dyn SamplingOracle, cfg: &MilkConfig, seed: u64) -> Result<RunResult> {
    cfg.validate(arms)?;
    let n = arms.len();
    let mut rng = stream(seed, Stream::DesignDraws);
    let params = RipsParams {
        signal_bound: cfg.signal_bound,
        sigma: cfg.sigma,
    };
    let cap = round_cap(cfg.beta_tilde);
    let mut pairs = PairSet::full(n);
    let mut good = vec![false; n];
    let mut bad = vec![false; n];
    let mut min_diff: Vec<Option<f64>> = vec![None; n];
    let mut rounds = Vec::new();
    let mut trajectory = Vec::new();
    let mut total = 0u64;
    let unclassified = |good: &[bool], bad: &[bool]| -> Vec<bool> { (0..n).map(|i| !good[i] && !bad[i]).collect() };
    let snap = |samples, round, good: &[bool], bad: &[bool], min_diff: &[Option<f64>]| {
        let active = unclassified(good, bad);
        Snapshot {
            samples,
            round,
            declared: declared(good, &active, min_diff),
            good: members(good),
            n_bad: bad.iter().filter(|&&b| b).count(),
            n_active: active.iter().filter(|&&b| b).count(),
        }
    };

    // a lone arm has no pairs and is trivially in G_eps
    for (i, g) in good.iter_mut().enumerate() {
        if pairs.outstanding(i) == 0 {
            *g = true;
        }
    }
    record(&mut trajectory, snap(0, 0, &good, &bad, &min_diff));

    let mut t = 1;
    let stop_reason = loop {
        if good.iter().zip(&bad).all(|(g, b)| *g || *b) {
            break StopReason::AllClassified;
        }
        if cap.is_some_and(|c| t > c) {
            break StopReason::ToleranceRoundCap;
        }
        if t > cfg.max_rounds {
            break StopReason::BudgetExhausted;
        }
        let active_pairs = pairs.pairs();
        if active_pairs.is_empty() {
            // unreachable while some arm is unclassified: an unclassified arm keeps its first-coordinate pairs
            return Err(Error::invalid("no active pairs left for unclassified arms"));
        }
        let gamma = cfg.gamma.at(t);
        let targets = y_eps(&active_pairs, cfg.epsilon)?;
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
        let mut round_est = Vec::with_capacity(active_pairs.len());
        let mut round_min: Vec<Option<f64>> = vec![None; n];
        for (&(x, xp), &w) in active_pairs.iter().zip(&estimates) {
            round_est.push(TargetEstimate {
                arm: x,
                other: Some(xp),
                value: w,
            });
            round_min[x] = Some(round_min[x].map_or(w, |m: f64| m.min(w)));
        }
        for (&(x, xp), &w) in active_pairs.iter().zip(&estimates) {
            if bad[x] || good[x] {
                continue;
            }
            if w < -margin {
                bad[x] = true;
                newly_bad.push(x);
                pairs.remove_arm(x);
            } else if w > margin {
                pairs.remove(x, xp);
            }
        }
        for x in 0..n {
            if !good[x] && !bad[x] && pairs.outstanding(x) == 0 {
                good[x] = true;
                newly_good.push(x);
            }
            if round_min[x].is_some() {
                min_diff[x] = round_min[x];
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
            n_active_after: (0..n).filter(|&i| !good[i] && !bad[i]).count(),
        });
        record(&mut trajectory, snap(total, t, &good, &bad, &min_diff));
        t += 1;
    };

    let active_flags = unclassified(&good, &bad);
    Ok(RunResult {
        algorithm: "milk".into(),
        good: members(&good),
        bad: members(&bad),
        active: members(&active_flags),
        returned: complement(n, &bad),
        rounds,
        total_samples: total,
        stop_reason,
        trajectory,
    })
}

pub fn milk_classification_guarantee_check(
    result: &RunResult,
    arms: &ArmSet,
    true_f: &[f64],
    cfg: &MilkConfig,
    h: f64,
    theta_norm: f64,
) -> Result<GuaranteeReport> {
    classification_guarantee_check(
        result,
        arms,
        true_f,
        LevelObjective::Implicit { epsilon: cfg.epsilon },
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

    #[test]
    fn y_eps_coefficients() {
        let c = y_eps(&[(0, 1)], 0.5).unwrap();
        assert_eq!(c[0].terms(), &[(0, 1.0), (1, -0.5)]);
        let c = y_eps(&[(0, 0)], 0.25).unwrap();
        assert_eq!(c[0].terms(), &[(0, 0.25)]);
    }

    #[test]
    fn full_pair_set_excludes_self_pairs() {
        let p = PairSet::full(3);
        assert_eq!(p.len(), 6);
        assert!(!p.contains(1, 1));
        assert!(p.contains(1, 0) && p.contains(0, 1));
        let combos = y_eps(&p.pairs(), 0.1).unwrap();
        for (c, (x, xp)) in combos.iter().zip(p.pairs()) {
            assert_eq!(c.terms().len(), 2);
            assert!(c.terms().contains(&(x, 1.0)));
            assert!(c.terms().contains(&(xp, -0.9)));
        }
    }

    #[test]
    fn removing_arm_clears_both_positions() {
        let mut p = PairSet::full(4);
        p.remove_arm(2);
        for o in 0..4 {
            assert!(!p.contains(2, o) && !p.contains(o, 2));
        }
        assert_eq!(p.outstanding(0), 2);
        assert_eq!(p.outstanding(2), 0);
    }

    #[test]
    fn membership_examples() {
        let f = [1.0, 0.95, 0.3];
        assert!(membership_check(&f, 0.1, 0));
        assert!(membership_check(&f, 0.1, 1));
        assert!(!membership_check(&f, 0.1, 2));
        let g = [0.2, 0.0, 1.0];
        assert!(membership_check(&g, 0.999, 0));
        assert!(membership_check(&g, 0.5, 2));
    }

    fn linear_env(values: &[f64]) -> crate::env::Environment {
        // f = <e_1, x> with x = (f_i, 1)
        let points = values.iter().map(|&v| vec![v, 1.0]).collect();
        let spec = InstanceSpec::new(
            Generator::ExplicitLinear {
                theta: vec![1.0, 0.0],
                points,
            },
            ThresholdSpec::Implicit { epsilon: 0.2 },
        );
        generate(&spec, 11).unwrap()
    }

    #[test]
    fn noiseless_three_arm_instance() {
        let mut env = linear_env(&[1.0, 0.9, 0.2]);
        let arms = env.arms().clone();
        let cfg = MilkConfig::new(0.2, 0.1, 1.0, 0.0);
        let res = run_milk(&arms, &mut env, &cfg, 5).unwrap();
        assert_eq!(res.good, vec![0, 1]);
        assert_eq!(res.bad, vec![2]);
        assert_eq!(res.returned, vec![0, 1]);
    }

    #[test]
    fn singleton_domain() {
        let arms = ArmSet::new(vec![vec![1.0]], KernelSpec::Linear).unwrap();
        let spec = InstanceSpec::new(
            Generator::ExplicitLinear {
                theta: vec![0.7],
                points: vec![vec![1.0]],
            },
            ThresholdSpec::Implicit { epsilon: 0.3 },
        );
        let mut env = generate(&spec, 1).unwrap();
        let res = run_milk(&arms, &mut env, &MilkConfig::new(0.3, 0.1, 1.0, 0.0), 1).unwrap();
        assert_eq!(res.good, vec![0]);
        assert_eq!(res.total_samples, 0);
    }
}
