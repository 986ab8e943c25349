//! Gaussian-process posterior over a finite arm set and the acquisition-function baselines
//! (Straddle, LSE, LSE-imp, TruVar).
//!
//! The posterior keeps the full mean vector and covariance over all arms. Each observation is
//! a rank-one update; every `refresh_every` updates the posterior is recomputed from the
//! per-arm sufficient statistics `(count, sum)`, which is exact because repeated Gaussian
//! observations of one arm are equivalent to their average observed with variance
//! `noise / count`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::env::Threshold;
use crate::error::{Error, Result};
use crate::kernels::ArmSet;
use crate::linalg::cholesky_with_jitter;
use crate::robust::SamplingOracle;
use crate::run::{RunResult, Snapshot, StopReason};

const DEFAULT_REFRESH: usize = 512;

#[derive(Clone, Debug)]
pub struct GpPosterior {
    gram: DMatrix<f64>,
    noise_var: f64,
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    counts: Vec<u64>,
    sums: Vec<f64>,
    n_obs: u64,
    since_refresh: usize,
    refresh_every: usize,
}

impl GpPosterior {
    pub fn new(arms: &ArmSet, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::invalid(format!("noise variance must be positive, got {noise_var}")));
        }
        let n = arms.len();
        Ok(Self {
            gram: arms.gram().clone(),
            noise_var,
            mean: vec![0.0; n],
            cov: arms.gram().clone(),
            counts: vec![0; n],
            sums: vec![0.0; n],
            n_obs: 0,
            since_refresh: 0,
            refresh_every: DEFAULT_REFRESH,
        })
    }

    /// Recompute from sufficient statistics after this many rank-one updates (0 = every update).
    pub fn with_refresh_every(mut self, every: usize) -> Self {
        self.refresh_every = every;
        self
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn n_observations(&self) -> u64 {
        self.n_obs
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    /// Posterior variance, clamped at zero.
    pub fn variance(&self, i: usize) -> f64 {
        self.cov[(i, i)].max(0.0)
    }

    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        self.cov[(i, j)]
    }

    /// Incorporates `y` observed at `arm`.
    pub fn update(&mut self, arm: usize, y: f64) -> Result<()> {
        if arm >= self.len() {
            return Err(Error::invalid(format!("arm {arm} out of range")));
        }
        self.counts[arm] += 1;
        self.sums[arm] += y;
        self.n_obs += 1;
        self.since_refresh += 1;
        if self.since_refresh >= self.refresh_every {
            return self.refresh();
        }
        let n = self.len();
        let denom = self.cov[(arm, arm)] + self.noise_var;
        let col: Vec<f64> = (0..n).map(|i| self.cov[(i, arm)]).collect();
        let resid = (y - self.mean[arm]) / denom;
        for (m, c) in self.mean.iter_mut().zip(&col) {
            *m += c * resid;
        }
        for (j, &c) in col.iter().enumerate() {
            let cj = c / denom;
            if cj == 0.0 {
                continue;
            }
            for (i, ci) in col.iter().enumerate() {
                self.cov[(i, j)] -= ci * cj;
            }
        }
        Ok(())
    }

    /// Fresh solve from the aggregated observations.
    pub fn refresh(&mut self) -> Result<()> {
        self.since_refresh = 0;
        let observed: Vec<usize> = (0..self.len()).filter(|&i| self.counts[i] > 0).collect();
        let n = self.len();
        if observed.is_empty() {
            self.mean = vec![0.0; n];
            self.cov = self.gram.clone();
            return Ok(());
        }
        let s = observed.len();
        let mut m = DMatrix::zeros(s, s);
        for (a, &i) in observed.iter().enumerate() {
            for (b, &j) in observed.iter().enumerate() {
                m[(a, b)] = self.gram[(i, j)];
            }
            m[(a, a)] += self.noise_var / self.counts[i] as f64;
        }
        let chol = cholesky_with_jitter(&m, "GP posterior (K + noise) solve")?;
        let ybar = DVector::from_iterator(s, observed.iter().map(|&i| self.sums[i] / self.counts[i] as f64));
        let k_ns = DMatrix::from_fn(n, s, |i, a| self.gram[(i, observed[a])]);
        let alpha = chol.solve(&ybar);
        let mean = &k_ns * alpha;
        let solved = chol.solve(&k_ns.transpose());
        self.cov = &self.gram - &k_ns * solved;
        self.mean = mean.iter().copied().collect();
        Ok(())
    }

    /// Posterior variance of `target` if `arm` were observed once more.
    pub fn lookahead_variance(&self, target: usize, arm: usize) -> f64 {
        let c = self.cov[(target, arm)];
        (self.cov[(target, target)] - c * c / (self.cov[(arm, arm)] + self.noise_var)).max(0.0)
    }

    /// Total variance removed from `targets` by one more observation of `arm`.
    pub fn lookahead_reduction(&self, arm: usize, targets: impl Iterator<Item = usize>) -> f64 {
        let denom = self.cov[(arm, arm)] + self.noise_var;
        targets.map(|t| self.cov[(t, arm)] * self.cov[(t, arm)]).sum::<f64>() / denom
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Straddle,
    Lse,
    LseImp,
    #[serde(rename = "truvar")]
    TruVar,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Straddle => "straddle",
            Policy::Lse => "lse",
            Policy::LseImp => "lse_imp",
            Policy::TruVar => "truvar",
        }
    }
}

/// Half-width multiplier `beta^{1/2}` of the confidence intervals `mu +- beta^{1/2} sigma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConfidenceWidth {
    Fixed { beta_sqrt: f64 },
    /// `beta_t = (B^2 + sigma^2) ln(2 t^2 |X|^2 / delta)` at sample `t`.
    Frequentist {
        signal_bound: f64,
        sigma: f64,
        delta: f64,
    },
}

impl Default for ConfidenceWidth {
    fn default() -> Self {
        ConfidenceWidth::Fixed { beta_sqrt: 3.0 }
    }
}

impl ConfidenceWidth {
    pub fn beta_sqrt(&self, t: u64, n_arms: usize) -> f64 {
        match *self {
            ConfidenceWidth::Fixed { beta_sqrt } => beta_sqrt,
            ConfidenceWidth::Frequentist {
                signal_bound,
                sigma,
                delta,
            } => {
                let t = t.max(1) as f64;
                let n = n_arms as f64;
                ((signal_bound * signal_bound + sigma * sigma) * (2.0 * t * t * n * n / delta).ln()).sqrt()
            }
        }
    }
}

pub const STRADDLE_WIDTH: f64 = 1.96;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArmStatus {
    Unclassified,
    Above,
    Below,
}

/// Classification state of a baseline: `U_t`, `H_t`, `L_t` and the nested intervals `C_t`.
#[derive(Clone, Debug)]
pub struct BaselineState {
    pub policy: Policy,
    pub threshold: Threshold,
    pub status: Vec<ArmStatus>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BaselineState {
    pub fn new(policy: Policy, threshold: Threshold, n: usize) -> Self {
        Self {
            policy,
            threshold,
            status: vec![ArmStatus::Unclassified; n],
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn unclassified(&self) -> impl Iterator<Item = usize> + '_ {
        self.status
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == ArmStatus::Unclassified)
            .map(|(i, _)| i)
    }

    pub fn count(&self, status: ArmStatus) -> usize {
        self.status.iter().filter(|&&s| s == status).count()
    }

    /// Intersects each arm's interval with `mu +- beta_sqrt * sigma`. An empty intersection
    /// restarts from the fresh interval.
    pub fn intersect(&mut self, gp: &GpPosterior, beta_sqrt: f64) {
        for i in 0..self.status.len() {
            let half = beta_sqrt * gp.variance(i).sqrt();
            let lo = gp.mean(i) - half;
            let hi = gp.mean(i) + half;
            let new_lo = self.lower[i].max(lo);
            let new_hi = self.upper[i].min(hi);
            if new_lo <= new_hi {
                self.lower[i] = new_lo;
                self.upper[i] = new_hi;
            } else {
                self.lower[i] = lo;
                self.upper[i] = hi;
            }
        }
    }

    /// `(f_opt, f_pes)`: max over still-candidate arms (unclassified or above) of the upper
    /// and lower interval ends.
    pub fn max_estimates(&self) -> (f64, f64) {
        let mut opt = f64::NEG_INFINITY;
        let mut pes = f64::NEG_INFINITY;
        for (i, s) in self.status.iter().enumerate() {
            if *s != ArmStatus::Below {
                opt = opt.max(self.upper[i]);
                pes = pes.max(self.lower[i]);
            }
        }
        (opt, pes)
    }
}

/// Moves arms out of `U_t`: explicit thresholds compare interval ends with `alpha`;
/// implicit ones compare the lower end with `(1 - eps) f_opt` and the upper end with
/// `(1 - eps) f_pes`.
pub fn classify_step(state: &mut BaselineState) {
    match state.threshold {
        Threshold::Explicit { alpha } => {
            for i in 0..state.status.len() {
                if state.status[i] != ArmStatus::Unclassified {
                    continue;
                }
                if state.lower[i] > alpha {
                    state.status[i] = ArmStatus::Above;
                } else if state.upper[i] < alpha {
                    state.status[i] = ArmStatus::Below;
                }
            }
        }
        Threshold::Implicit { epsilon } => {
            let (opt, pes) = state.max_estimates();
            let scale = 1.0 - epsilon;
            for i in 0..state.status.len() {
                if state.status[i] != ArmStatus::Unclassified {
                    continue;
                }
                if state.lower[i] >= scale * opt {
                    state.status[i] = ArmStatus::Above;
                } else if state.upper[i] <= scale * pes {
                    state.status[i] = ArmStatus::Below;
                }
            }
        }
    }
}

/// Next arm to sample from `U_t` (lowest index on ties), or `None` once everything is
/// classified.
pub fn acquire_next(state: &BaselineState, gp: &GpPosterior) -> Option<usize> {
    let level = match state.threshold {
        Threshold::Explicit { alpha } => alpha,
        Threshold::Implicit { .. } => 0.0,
    };
    let mut best: Option<(usize, f64)> = None;
    for i in state.unclassified() {
        let score = match state.policy {
            Policy::Lse | Policy::Straddle => (state.upper[i] - level).min(level - state.lower[i]),
            Policy::LseImp => state.upper[i] - state.lower[i],
            Policy::TruVar => gp.lookahead_reduction(i, state.unclassified()),
        };
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((i, score));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub policy: Policy,
    pub threshold: Threshold,
    #[serde(default)]
    pub width: ConfidenceWidth,
    /// Observation noise variance assumed by the posterior.
    pub noise_var: f64,
    /// Maximum number of samples.
    pub budget: u64,
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_var > 0.0) {
            return Err(Error::config("noise_var", "must be positive"));
        }
        if let Threshold::Implicit { epsilon } = self.threshold {
            if !(epsilon > 0.0 && epsilon < 1.0) {
                return Err(Error::config("threshold.epsilon", "must lie in (0, 1)"));
            }
        }
        if matches!(self.policy, Policy::Lse | Policy::Straddle | Policy::TruVar)
            && matches!(self.threshold, Threshold::Implicit { .. })
        {
            return Err(Error::config("policy", "only lse_imp handles implicit thresholds"));
        }
        Ok(())
    }

    fn beta_sqrt(&self, t: u64, n: usize) -> f64 {
        match self.policy {
            Policy::Straddle => STRADDLE_WIDTH,
            _ => self.width.beta_sqrt(t, n),
        }
    }
}

fn declared_set(state: &BaselineState, gp: &GpPosterior, out: &mut Vec<usize>) {
    let level = match state.threshold {
        Threshold::Explicit { alpha } => alpha,
        Threshold::Implicit { .. } => state.threshold.level(gp.means()),
    };
    out.clear();
    for (i, s) in state.status.iter().enumerate() {
        let declared = match s {
            ArmStatus::Above => true,
            ArmStatus::Below => false,
            ArmStatus::Unclassified => gp.mean(i) >= level,
        };
        if declared {
            out.push(i);
        }
    }
}

/// Acquire, observe, update, classify until every arm is classified or the budget runs out.
pub fn run_baseline(arms: &ArmSet, oracle: &mut dyn SamplingOracle, cfg: &BaselineConfig) -> Result<RunResult> {
    cfg.validate()?;
    let n = arms.len();
    let mut gp = GpPosterior::new(arms, cfg.noise_var)?;
    let mut state = BaselineState::new(cfg.policy, cfg.threshold, n);
    let mut trajectory: Vec<Snapshot> = Vec::new();
    let mut buf = Vec::with_capacity(n);
    let mut samples = 0u64;
    let stop_reason;
    loop {
        state.intersect(&gp, cfg.beta_sqrt(samples + 1, n));
        classify_step(&mut state);
        declared_set(&state, &gp, &mut buf);
        push_if_changed(&mut trajectory, &buf, &state, samples);
        let Some(arm) = acquire_next(&state, &gp) else {
            stop_reason = StopReason::AllClassified;
            break;
        };
        if samples >= cfg.budget || oracle.remaining_budget() == Some(0) {
            stop_reason = StopReason::BudgetExhausted;
            break;
        }
        let y = match oracle.observe(arm) {
            Ok(y) => y,
            Err(Error::BudgetExhausted { .. }) => {
                stop_reason = StopReason::BudgetExhausted;
                break;
            }
            Err(e) => return Err(e),
        };
        samples += 1;
        gp.update(arm, y)?;
    }
    let good: Vec<usize> = (0..n).filter(|&i| state.status[i] == ArmStatus::Above).collect();
    let bad: Vec<usize> = (0..n).filter(|&i| state.status[i] == ArmStatus::Below).collect();
    let active: Vec<usize> = state.unclassified().collect();
    declared_set(&state, &gp, &mut buf);
    Ok(RunResult {
        algorithm: cfg.policy.name().to_string(),
        good,
        bad,
        active,
        returned: buf.clone(),
        rounds: Vec::new(),
        total_samples: samples,
        stop_reason,
        trajectory,
    })
}

fn push_if_changed(trajectory: &mut Vec<Snapshot>, declared: &[usize], state: &BaselineState, samples: u64) {
    let n_good = state.count(ArmStatus::Above);
    let n_bad = state.count(ArmStatus::Below);
    let n_active = state.status.len() - n_good - n_bad;
    if let Some(last) = trajectory.last() {
        if last.declared == declared && last.good.len() == n_good && last.n_bad == n_bad {
            return;
        }
    }
    trajectory.push(Snapshot {
        samples,
        round: samples as usize,
        declared: declared.to_vec(),
        good: (0..state.status.len()).filter(|&i| state.status[i] == ArmStatus::Above).collect(),
        n_bad,
        n_active,
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;

    fn grid_arms(n: usize, l: f64) -> ArmSet {
        let pts = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
        ArmSet::new(pts, KernelSpec::squared_exponential(l).unwrap()).unwrap()
    }

    #[test]
    fn prior_matches_kernel() {
        let arms = grid_arms(5, 0.3);
        let gp = GpPosterior::new(&arms, 0.1).unwrap();
        for i in 0..5 {
            assert_eq!(gp.mean(i), 0.0);
            assert_eq!(gp.variance(i), 1.0);
        }
    }

    #[test]
    fn near_noiseless_interpolation() {
        let arms = grid_arms(5, 0.3);
        let mut gp = GpPosterior::new(&arms, 1e-12).unwrap();
        gp.update(0, 3.0).unwrap();
        assert!((gp.mean(0) - 3.0).abs() < 1e-6);
        assert!(gp.variance(0) < 1e-6);
    }

    #[test]
    fn variance_shrinks_with_repeats() {
        let arms = grid_arms(4, 0.5);
        let mut gp = GpPosterior::new(&arms, 0.5).unwrap();
        let mut last = gp.variance(2);
        for k in 0..20 {
            gp.update(2, k as f64 * 0.1).unwrap();
            assert!(gp.variance(2) <= last + 1e-12);
            last = gp.variance(2);
        }
    }

    #[test]
    fn lse_prefers_ambiguous_arm() {
        let arms = grid_arms(2, 0.5);
        let gp = GpPosterior::new(&arms, 1.0).unwrap();
        let mut st = BaselineState::new(Policy::Lse, Threshold::Explicit { alpha: 0.5 }, 2);
        st.lower = vec![0.4, 0.0];
        st.upper = vec![0.6, 0.2];
        assert_eq!(acquire_next(&st, &gp), Some(0));
    }

    #[test]
    fn truvar_single_unclassified_arm() {
        let arms = grid_arms(3, 0.5);
        let gp = GpPosterior::new(&arms, 1.0).unwrap();
        let mut st = BaselineState::new(Policy::TruVar, Threshold::Explicit { alpha: 0.5 }, 3);
        st.status = vec![ArmStatus::Above, ArmStatus::Unclassified, ArmStatus::Below];
        assert_eq!(acquire_next(&st, &gp), Some(1));
        st.status[1] = ArmStatus::Above;
        assert_eq!(acquire_next(&st, &gp), None);
    }

    #[test]
    fn lse_imp_prior_tie_breaks_to_first_arm() {
        let arms = grid_arms(6, 0.2);
        let gp = GpPosterior::new(&arms, 1.0).unwrap();
        let mut st = BaselineState::new(Policy::LseImp, Threshold::Implicit { epsilon: 0.1 }, 6);
        st.intersect(&gp, 3.0);
        assert_eq!(acquire_next(&st, &gp), Some(0));
    }

    #[test]
    fn explicit_classification_rules() {
        let mut st = BaselineState::new(Policy::Lse, Threshold::Explicit { alpha: 0.5 }, 3);
        st.lower = vec![0.7, 0.3, 0.1];
        st.upper = vec![0.9, 0.6, 0.4];
        classify_step(&mut st);
        assert_eq!(st.status, vec![ArmStatus::Above, ArmStatus::Unclassified, ArmStatus::Below]);
    }

    #[test]
    fn implicit_classification_rule() {
        let mut st = BaselineState::new(Policy::LseImp, Threshold::Implicit { epsilon: 0.1 }, 2);
        // f_opt = 1.0 from arm 0's upper end
        st.lower = vec![0.95, 0.2];
        st.upper = vec![1.0, 0.5];
        classify_step(&mut st);
        assert_eq!(st.status[0], ArmStatus::Above);
        // f_pes = 0.95 after arm 0 is above; 0.5 <= 0.855
        assert_eq!(st.status[1], ArmStatus::Below);
    }

    #[test]
    fn classified_arms_stay_classified() {
        let arms = grid_arms(3, 0.5);
        let gp = GpPosterior::new(&arms, 1.0).unwrap();
        let mut st = BaselineState::new(Policy::Lse, Threshold::Explicit { alpha: 0.5 }, 3);
        st.status[0] = ArmStatus::Above;
        st.intersect(&gp, 3.0);
        classify_step(&mut st);
        assert_eq!(st.status[0], ArmStatus::Above);
    }

    #[test]
    fn implicit_threshold_rejected_for_explicit_policies() {
        let cfg = BaselineConfig {
            policy: Policy::Lse,
            threshold: Threshold::Implicit { epsilon: 0.2 },
            width: ConfidenceWidth::default(),
            noise_var: 1.0,
            budget: 10,
        };
        assert!(cfg.validate().is_err());
    }
}
