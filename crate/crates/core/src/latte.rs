//! Fixed-budget implicit thresholding bandit: find a near-best arm, estimate the threshold
//! from it, then run APT against the estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::robust::SamplingOracle;
use crate::run::{RunResult, Snapshot, StopReason};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    pub means: Vec<f64>,
    pub sigma: f64,
    pub budget: u64,
    pub epsilon: f64,
    #[serde(default)]
    pub apt_tolerance: f64,
    /// Use `tau = mu_hat - eps` instead of `(1 - eps) mu_hat`.
    #[serde(default)]
    pub additive_threshold: bool,
}

impl BanditInstance {
    pub fn new(means: Vec<f64>, sigma: f64, budget: u64, epsilon: f64) -> Self {
        Self {
            means,
            sigma,
            budget,
            epsilon,
            apt_tolerance: 0.0,
            additive_threshold: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.means.len();
        if k == 0 {
            return Err(Error::config("means", "need at least one arm"));
        }
        if self.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::config("means", "must be finite"));
        }
        if self.budget < 3 * k as u64 {
            return Err(Error::config(
                "budget",
                format!("budget {} is below 3 pulls per arm ({})", self.budget, 3 * k),
            ));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::config("sigma", "must be nonnegative"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config("epsilon", "must lie in (0, 1)"));
        }
        if !(self.apt_tolerance >= 0.0) {
            return Err(Error::config("apt_tolerance", "must be nonnegative"));
        }
        Ok(())
    }

    /// The true threshold `(1 - eps) max mu` (or `max mu - eps`).
    pub fn true_threshold(&self) -> f64 {
        let best = self.means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        threshold_from(best, self.epsilon, self.additive_threshold)
    }

    pub fn true_set(&self) -> Vec<usize> {
        let tau = self.true_threshold();
        (0..self.means.len()).filter(|&i| self.means[i] >= tau).collect()
    }
}

fn threshold_from(best: f64, epsilon: f64, additive: bool) -> f64 {
    if additive {
        best - epsilon
    } else {
        (1.0 - epsilon) * best
    }
}

/// `sqrt(N) (|mu_hat - tau| + gamma)`, zero for an unpulled arm.
pub fn apt_index(pulls: u64, mean_hat: f64, tau: f64, gamma_apt: f64) -> f64 {
    if pulls == 0 {
        return 0.0;
    }
    (pulls as f64).sqrt() * ((mean_hat - tau).abs() + gamma_apt)
}

/// `max_i i (max{Delta_(i), omega})^{-2}` with gaps to `(1 - eps) max mu` sorted increasingly.
pub fn h2_omega(means: &[f64], epsilon: f64, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::invalid("omega must be positive"));
    }
    let best = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tau = (1.0 - epsilon) * best;
    let mut gaps: Vec<f64> = means.iter().map(|m| (m - tau).abs().max(omega)).collect();
    gaps.sort_by(f64::total_cmp);
    Ok(gaps
        .iter()
        .enumerate()
        .map(|(i, g)| (i + 1) as f64 / (g * g))
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EliminationRound {
    pub m: usize,
    pub gap_guess: f64,
    pub pulls_per_arm: u64,
    pub radius: f64,
    pub active_after: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatteOutcome {
    pub selected: Vec<usize>,
    pub best_arm: usize,
    pub tau: f64,
    pub psi: f64,
    pub rounds: Vec<EliminationRound>,
    pub phase_pulls: [u64; 3],
    pub pulls: Vec<u64>,
    pub means_hat: Vec<f64>,
    /// Declared set `{mu_hat >= tau_hat}` at the end of each phase and periodically in phase 3.
    pub trajectory: Vec<Snapshot>,
}

impl LatteOutcome {
    pub fn total_pulls(&self) -> u64 {
        self.pulls.iter().sum()
    }

    pub fn to_run_result(&self) -> RunResult {
        let k = self.pulls.len();
        RunResult {
            algorithm: "latte".into(),
            good: self.selected.clone(),
            bad: (0..k).filter(|i| !self.selected.contains(i)).collect(),
            active: Vec::new(),
            returned: self.selected.clone(),
            rounds: Vec::new(),
            total_samples: self.total_pulls(),
            stop_reason: StopReason::BudgetExhausted,
            trajectory: self.trajectory.clone(),
        }
    }
}

struct Stats {
    pulls: Vec<u64>,
    sums: Vec<f64>,
    total: u64,
}

impl Stats {
    fn pull(&mut self, oracle: &mut dyn SamplingOracle, arm: usize) -> Result<()> {
        let y = oracle.observe(arm)?;
        self.pulls[arm] += 1;
        self.sums[arm] += y;
        self.total += 1;
        Ok(())
    }

    fn mean(&self, i: usize) -> f64 {
        if self.pulls[i] == 0 {
            0.0
        } else {
            self.sums[i] / self.pulls[i] as f64
        }
    }

    fn snapshot(&self, tau: f64, round: usize) -> Snapshot {
        let declared: Vec<usize> = (0..self.pulls.len()).filter(|&i| self.mean(i) >= tau).collect();
        let n_good = declared.len();
        Snapshot {
            samples: self.total,
            round,
            n_bad: self.pulls.len() - n_good,
            good: declared.clone(),
            declared,
            n_active: 0,
        }
    }
}

fn argmax_mean(stats: &Stats, among: impl Iterator<Item = usize>) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for i in among {
        let m = stats.mean(i);
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((i, m));
        }
    }
    best.map(|(i, _)| i).unwrap_or(0)
}

/// `max{ln(T 2^{-m} / 3), 1}`.
fn log_term(budget: u64, m: usize) -> f64 {
    (budget as f64 * 0.5f64.powi(m as i32) / 3.0).ln().max(1.0)
}

/// Number of elimination rounds, `ceil(log2(T / 3e) / 2)`, at least one.
pub fn elimination_rounds(budget: u64) -> usize {
    let v = 0.5 * (budget as f64 / (3.0 * std::f64::consts::E)).log2();
    v.ceil().max(1.0) as usize
}

/// Three equal phases; the remainder of `T / 3` goes to phase 3. `seed` is accepted for
/// interface uniformity: all randomness comes from the oracle.
pub fn run_latte(instance: &BanditInstance, oracle: &mut dyn SamplingOracle, _seed: u64) -> Result<LatteOutcome> {
    instance.validate()?;
    let k = instance.means.len();
    let t_total = instance.budget;
    let phase = t_total / 3;
    let phase3 = t_total - 2 * phase;
    let mut stats = Stats {
        pulls: vec![0; k],
        sums: vec![0.0; k],
        total: 0,
    };
    let mut trajectory = Vec::new();

    // phase 1: gap elimination with doubling per-arm pull counts
    let big_m = elimination_rounds(t_total);
    let per_arm_cap = phase / k as u64;
    let psi = per_arm_cap as f64 / (2f64.powi(big_m as i32 - 1) * log_term(t_total, big_m));
    let mut active: Vec<usize> = (0..k).collect();
    let mut rounds = Vec::new();
    let mut gap_guess = 1.0;
    let mut n_prev = 0u64;
    for m in 1..=big_m {
        if active.len() == 1 {
            break;
        }
        let n_m = ((psi * 2f64.powi(m as i32 - 1) * log_term(t_total, m)).ceil() as u64)
            .clamp(n_prev.max(1), per_arm_cap.max(1));
        for &i in &active {
            while stats.pulls[i] < n_m {
                stats.pull(oracle, i)?;
            }
        }
        n_prev = n_m;
        let radius = instance.sigma * (2.0 * log_term(t_total, m) / n_m as f64).sqrt();
        let top = active.iter().map(|&i| stats.mean(i)).fold(f64::NEG_INFINITY, f64::max);
        active.retain(|&i| stats.mean(i) + radius >= top - radius);
        rounds.push(EliminationRound {
            m,
            gap_guess,
            pulls_per_arm: n_m,
            radius,
            active_after: active.clone(),
        });
        gap_guess /= 2.0;
    }
    if active.len() == 1 {
        let i = active[0];
        while stats.total < phase {
            stats.pull(oracle, i)?;
        }
    }
    let best_arm = argmax_mean(&stats, active.iter().copied());
    let phase1_pulls = stats.total;
    let est = threshold_from(stats.mean(best_arm), instance.epsilon, instance.additive_threshold);
    trajectory.push(stats.snapshot(est, 1));

    // phase 2: threshold from the chosen arm
    for _ in 0..phase {
        stats.pull(oracle, best_arm)?;
    }
    let tau = threshold_from(stats.mean(best_arm), instance.epsilon, instance.additive_threshold);
    trajectory.push(stats.snapshot(tau, 2));

    // phase 3: APT against tau
    let every = (phase3 / 100).max(1);
    for s in 0..phase3 {
        let arm = match (0..k).find(|&i| stats.pulls[i] == 0) {
            Some(i) => i,
            None => {
                let mut best = (0, f64::INFINITY);
                for i in 0..k {
                    let b = apt_index(stats.pulls[i], stats.mean(i), tau, instance.apt_tolerance);
                    if b < best.1 {
                        best = (i, b);
                    }
                }
                best.0
            }
        };
        stats.pull(oracle, arm)?;
        if (s + 1) % every == 0 {
            let snap = stats.snapshot(tau, 3);
            if trajectory.last().is_none_or(|l: &Snapshot| l.declared != snap.declared) {
                trajectory.push(snap);
            }
        }
    }
    let final_snap = stats.snapshot(tau, 3);
    let selected = final_snap.declared.clone();
    if trajectory.last().is_none_or(|l| l.samples != final_snap.samples) {
        trajectory.push(final_snap);
    }
    let means_hat = (0..k).map(|i| stats.mean(i)).collect();
    Ok(LatteOutcome {
        selected,
        best_arm,
        tau,
        psi,
        rounds,
        phase_pulls: [phase1_pulls, phase, phase3],
        pulls: stats.pulls,
        means_hat,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate, Generator, InstanceSpec, ThresholdSpec};

    fn env(means: &[f64], sigma: f64, seed: u64) -> crate::env::Environment {
        let spec = InstanceSpec::new(
            Generator::Bandit { means: means.to_vec() },
            ThresholdSpec::Implicit { epsilon: 0.5 },
        )
        .with_sigma(sigma);
        generate(&spec, seed).unwrap()
    }

    #[test]
    fn apt_index_values() {
        assert!((apt_index(4, 0.8, 0.5, 0.1) - 0.8).abs() < 1e-12);
        assert_eq!(apt_index(9, 0.5, 0.5, 0.0), 0.0);
        let a = apt_index(4, 0.7, 0.5, 0.0);
        assert!((apt_index(16, 0.7, 0.5, 0.0) - 2.0 * a).abs() < 1e-12);
        assert_eq!(apt_index(0, 3.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn h2_examples() {
        assert!((h2_omega(&[1.0, 0.5], 0.4, 0.05).unwrap() - 100.0).abs() < 1e-9);
        let h = h2_omega(&[1.0, 1.0, 1.0], 1e-6, 0.5).unwrap();
        assert!((h - 3.0 / 0.25).abs() < 1e-9);
        let h = h2_omega(&[2.0], 0.3, 0.01).unwrap();
        assert!((h - 1.0 / 0.36).abs() < 1e-9);
    }

    #[test]
    fn noiseless_recovery() {
        let inst = BanditInstance::new(vec![1.0, 0.9, 0.1], 0.0, 300, 0.5);
        let mut e = env(&inst.means, 0.0, 1);
        let out = run_latte(&inst, &mut e, 1).unwrap();
        assert_eq!(out.selected, vec![0, 1]);
        assert!(out.total_pulls() <= 300);
    }

    #[test]
    fn single_arm() {
        let inst = BanditInstance::new(vec![0.3], 1.0, 30, 0.5);
        let mut e = env(&inst.means, 1.0, 2);
        let out = run_latte(&inst, &mut e, 2).unwrap();
        assert_eq!(out.selected, vec![0]);
    }

    #[test]
    fn budget_below_three_per_arm_rejected() {
        let inst = BanditInstance::new(vec![1.0, 0.5], 1.0, 5, 0.5);
        assert!(inst.validate().is_err());
    }

    #[test]
    fn phase_budgets_and_remainder() {
        let inst = BanditInstance::new(vec![1.0, 0.8, 0.3, 0.1], 0.5, 1001, 0.5);
        let mut e = env(&inst.means, 0.5, 3);
        let out = run_latte(&inst, &mut e, 3).unwrap();
        assert!(out.phase_pulls[0] <= 333);
        assert_eq!(out.phase_pulls[1], 333);
        assert_eq!(out.phase_pulls[2], 335);
        assert!(out.total_pulls() <= 1001);
    }

    #[test]
    fn noiseless_phase3_focuses_on_closest_arm() {
        let inst = BanditInstance::new(vec![1.0, 0.7, 0.52, 0.1], 0.0, 600, 0.5);
        let mut e = env(&inst.means, 0.0, 4);
        let out = run_latte(&inst, &mut e, 4).unwrap();
        let phase3: Vec<u64> = {
            let mut p = out.pulls.clone();
            p[out.best_arm] -= out.phase_pulls[1];
            p
        };
        let closest = 2;
        let others_max = (0..4).filter(|&i| i != closest && i != out.best_arm).map(|i| phase3[i]).max().unwrap();
        assert!(phase3[closest] >= others_max);
    }
}
