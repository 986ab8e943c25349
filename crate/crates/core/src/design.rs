//! Experimental designs over a finite arm set and their Frank-Wolfe minimization.
//!
//! The objective is `g(lambda) = max_v w_v |v|^2_{A(lambda)^{-1}}` where
//! `A(lambda) = sum_i lambda_i phi(x_i) phi(x_i)^T + gamma I`. Targets can additionally be
//! grouped so that a group contributes the *minimum* over its members; this is only used by
//! the implicit oracle allocation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{ArmSet, FeatureCombo, InverseOperator};

const SIMPLEX_TOL: f64 = 1e-9;

/// Probability vector over arms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    weights: Vec<f64>,
}

impl Design {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("design must cover at least one arm"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("design weights must be finite and nonnegative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!("design weights sum to {sum}, not 1")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn vertex(n: usize, i: usize) -> Result<Self> {
        if i >= n {
            return Err(Error::invalid(format!("vertex {i} out of range for {n} arms")));
        }
        let mut weights = vec![0.0; n];
        weights[i] = 1.0;
        Ok(Self { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Arms with strictly positive weight.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, &w)| (i, w))
    }

    /// `(1 - eta) * self + eta * e_j`, renormalized against drift.
    fn step_toward(&mut self, j: usize, eta: f64) {
        for w in &mut self.weights {
            *w *= 1.0 - eta;
        }
        self.weights[j] += eta;
        self.renormalize();
    }

    fn mix_uniform(&mut self, eta: f64) {
        let u = 1.0 / self.weights.len() as f64;
        for w in &mut self.weights {
            *w = (1.0 - eta) * *w + eta * u;
        }
        self.renormalize();
    }

    fn renormalize(&mut self) {
        let sum: f64 = self.weights.iter().sum();
        for w in &mut self.weights {
            *w /= sum;
        }
    }

    /// Total-variation distance `0.5 * sum |a_i - b_i|`.
    pub fn total_variation(&self, other: &Design) -> f64 {
        0.5 * self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `eta_t = 1 / (t + 2)`
    Harmonic,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FwInit {
    Uniform,
    Vertex(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FwConfig {
    pub max_iters: usize,
    pub step_rule: StepRule,
    pub init: FwInit,
    /// Stop once the linearized improvement stays below `stop_tol * value` for
    /// [`FW_PATIENCE`] consecutive iterations. Zero disables early stopping.
    pub stop_tol: f64,
}

pub const FW_PATIENCE: usize = 5;

impl Default for FwConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            step_rule: StepRule::Harmonic,
            init: FwInit::Uniform,
            stop_tol: 1e-6,
        }
    }
}

impl FwConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if let StepRule::Fixed(eta) = self.step_rule {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::invalid(format!("fixed step must be in (0, 1], got {eta}")));
            }
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::invalid("stop_tol must be nonnegative"));
        }
        Ok(())
    }
}

/// Targets, optional per-target weights and grouping, and the regularization level.
#[derive(Clone, Debug)]
pub struct DesignProblem<'a> {
    arms: &'a ArmSet,
    targets: Vec<FeatureCombo>,
    weights: Vec<f64>,
    /// Max over groups of min over members. Singleton groups by default.
    groups: Vec<Vec<usize>>,
    gamma: f64,
}

impl<'a> DesignProblem<'a> {
    pub fn new(arms: &'a ArmSet, targets: Vec<FeatureCombo>, gamma: f64) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::invalid("design problem needs at least one target"));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::invalid(format!("gamma must be nonnegative, got {gamma}")));
        }
        if gamma == 0.0 && !arms.kernel().is_linear() {
            return Err(Error::invalid("gamma = 0 is only supported for the linear kernel"));
        }
        for t in &targets {
            t.check_for(arms)?;
        }
        let n = targets.len();
        Ok(Self {
            arms,
            targets,
            weights: vec![1.0; n],
            groups: (0..n).map(|i| vec![i]).collect(),
            gamma,
        })
    }

    /// Multiplies each target's inverse norm by a positive weight.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.targets.len() {
            return Err(Error::DimensionMismatch(self.targets.len(), weights.len()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("target weights must be positive and finite"));
        }
        self.weights = weights;
        Ok(self)
    }

    /// Replaces the singleton grouping. Every target must appear in exactly one group.
    pub fn with_groups(mut self, groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; self.targets.len()];
        for g in &groups {
            if g.is_empty() {
                return Err(Error::invalid("empty target group"));
            }
            for &m in g {
                if m >= seen.len() || seen[m] {
                    return Err(Error::invalid("target groups must partition the targets"));
                }
                seen[m] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("target groups must partition the targets"));
        }
        self.groups = groups;
        Ok(self)
    }

    pub fn arms(&self) -> &ArmSet {
        self.arms
    }

    pub fn targets(&self) -> &[FeatureCombo] {
        &self.targets
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn evaluate_with(&self, op: &InverseOperator) -> (f64, usize) {
        let mut best = f64::NEG_INFINITY;
        let mut best_target = self.groups[0][0];
        for group in &self.groups {
            let mut gmin = f64::INFINITY;
            let mut gmin_target = group[0];
            for &m in group {
                let t = &self.targets[m];
                let v = if op.in_range(t) {
                    self.weights[m] * op.bilinear_unchecked(t, t)
                } else {
                    f64::INFINITY
                };
                if v < gmin {
                    gmin = v;
                    gmin_target = m;
                }
            }
            if gmin > best {
                best = gmin;
                best_target = gmin_target;
            }
        }
        (best, best_target)
    }
}

/// `(max_v w_v |v|^2_{A(lambda)^{-1}}, argmax target)` with lowest-index tie-breaking.
/// Targets outside the range of a singular `A` (linear kernel, `gamma = 0`) evaluate to `+inf`.
pub fn design_objective(p: &DesignProblem<'_>, lambda: &Design) -> Result<(f64, usize)> {
    if lambda.len() != p.arms.len() {
        return Err(Error::DimensionMismatch(p.arms.len(), lambda.len()));
    }
    let op = InverseOperator::new(p.arms, lambda, p.gamma)?;
    Ok(p.evaluate_with(&op))
}

#[derive(Clone, Debug)]
pub struct FwResult {
    pub design: Design,
    pub value: f64,
    pub iters: usize,
}

/// Frank-Wolfe over the simplex using the subgradient of the current argmax target:
/// coordinate `i` is `-w (<v*, A^{-1} phi(x_i)>)^2`. Returns the best iterate seen.
pub fn frank_wolfe_design(p: &DesignProblem<'_>, cfg: &FwConfig) -> Result<FwResult> {
    cfg.validate()?;
    let n = p.arms.len();
    let mut lambda = match cfg.init {
        FwInit::Uniform => Design::uniform(n),
        FwInit::Vertex(i) => Design::vertex(n, i)?,
    };
    let mut best: Option<(Design, f64)> = None;
    let mut small_gap_run = 0;
    let mut iters = 0;
    for t in 0..cfg.max_iters {
        iters = t + 1;
        let op = InverseOperator::new(p.arms, &lambda, p.gamma)?;
        let (value, target) = p.evaluate_with(&op);
        if best.as_ref().is_none_or(|(_, b)| value < *b) {
            best = Some((lambda.clone(), value));
        }
        let eta = match cfg.step_rule {
            StepRule::Harmonic => 1.0 / (t as f64 + 2.0),
            StepRule::Fixed(eta) => eta,
        };
        if !value.is_finite() {
            lambda.mix_uniform(eta.min(0.5));
            continue;
        }
        let row = op.arm_row(&p.targets[target]);
        let mut j = 0;
        let mut jmax = f64::NEG_INFINITY;
        let mut avg = 0.0;
        for (i, r) in row.iter().enumerate() {
            let s = r * r;
            if s > jmax {
                jmax = s;
                j = i;
            }
            avg += lambda.weights[i] * s;
        }
        let improvement = p.weights[target] * (jmax - avg);
        if cfg.stop_tol > 0.0 && improvement < cfg.stop_tol * value {
            small_gap_run += 1;
            if small_gap_run >= FW_PATIENCE {
                break;
            }
        } else {
            small_gap_run = 0;
        }
        lambda.step_toward(j, eta);
    }
    if iters == cfg.max_iters {
        // the final step's iterate was never scored
        let (value, _) = design_objective(p, &lambda)?;
        if best.as_ref().is_none_or(|(_, b)| value < *b) {
            best = Some((lambda, value));
        }
    }
    let (design, value) = best.expect("at least one iteration");
    Ok(FwResult { design, value, iters })
}

/// Which lower-bound objective an oracle allocation or misspecification limit refers to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevelObjective {
    Explicit { alpha: f64 },
    Implicit { epsilon: f64 },
}

impl LevelObjective {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LevelObjective::Explicit { alpha } if !alpha.is_finite() => {
                Err(Error::invalid("alpha must be finite"))
            }
            LevelObjective::Implicit { epsilon } if !(epsilon > 0.0 && epsilon < 1.0) => {
                Err(Error::invalid(format!("epsilon must lie in (0, 1), got {epsilon}")))
            }
            _ => Ok(()),
        }
    }
}

/// Per-arm `<theta, x_i>` for an explicit linear parameter.
pub fn linear_values(arms: &ArmSet, theta: &[f64]) -> Result<Vec<f64>> {
    if theta.len() != arms.dim() {
        return Err(Error::DimensionMismatch(arms.dim(), theta.len()));
    }
    Ok(arms.points().iter().map(|x| crate::linalg::dot(x, theta)).collect())
}

/// Builds the gap-weighted lower-bound design problem.
///
/// Explicit: targets `phi(x)` weighted by `1 / (f(x) - alpha)^2`.
/// Implicit: for `x` in `G_eps`, every pair `phi(x) - (1 - eps) phi(x')` is its own target
/// weighted by the inverse squared pair gap; for `x` outside `G_eps` the pairs form one group
/// whose value is the minimum over `x'`.
pub fn oracle_problem<'a>(
    arms: &'a ArmSet,
    values: &[f64],
    objective: LevelObjective,
    gamma: f64,
) -> Result<DesignProblem<'a>> {
    objective.validate()?;
    if values.len() != arms.len() {
        return Err(Error::DimensionMismatch(arms.len(), values.len()));
    }
    let n = arms.len();
    match objective {
        LevelObjective::Explicit { alpha } => {
            let mut weights = Vec::with_capacity(n);
            for (i, f) in values.iter().enumerate() {
                let gap = f - alpha;
                if gap == 0.0 {
                    return Err(Error::DegenerateInstance(format!(
                        "arm {i} sits exactly on the threshold"
                    )));
                }
                weights.push(1.0 / (gap * gap));
            }
            let targets = (0..n).map(FeatureCombo::arm).collect();
            DesignProblem::new(arms, targets, gamma)?.with_weights(weights)
        }
        LevelObjective::Implicit { epsilon } => {
            let scale = 1.0 - epsilon;
            let fmax = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut targets = Vec::new();
            let mut weights = Vec::new();
            let mut groups = Vec::new();
            for x in 0..n {
                let good = values[x] >= scale * fmax;
                let mut group = Vec::new();
                for xp in 0..n {
                    let gap = values[x] - scale * values[xp];
                    if gap == 0.0 {
                        if good {
                            return Err(Error::DegenerateInstance(format!(
                                "pair ({x}, {xp}) has zero gap"
                            )));
                        }
                        continue;
                    }
                    let Ok(combo) = FeatureCombo::difference(x, xp, scale) else {
                        continue;
                    };
                    targets.push(combo);
                    weights.push(1.0 / (gap * gap));
                    if good {
                        groups.push(vec![targets.len() - 1]);
                    } else {
                        group.push(targets.len() - 1);
                    }
                }
                if !good {
                    if group.is_empty() {
                        return Err(Error::DegenerateInstance(format!(
                            "arm {x} has no informative pair"
                        )));
                    }
                    groups.push(group);
                }
            }
            DesignProblem::new(arms, targets, gamma)?
                .with_weights(weights)?
                .with_groups(groups)
        }
    }
}

/// Minimizer of the gap-weighted lower-bound objective for known per-arm values
/// `<theta*, phi(x_i)>` (diagnostic use only).
pub fn oracle_allocation(
    arms: &ArmSet,
    values: &[f64],
    objective: LevelObjective,
    gamma: f64,
    cfg: &FwConfig,
) -> Result<FwResult> {
    let p = oracle_problem(arms, values, objective, gamma)?;
    frank_wolfe_design(&p, cfg)
}

/// Smallest `beta > 0` with `4 (sqrt(gamma) |theta| + h) (2 + sqrt(min_l max_{gap <= beta} |v|^2)) <= beta`.
///
/// The left side is a step function of `beta` that only changes at the sorted gaps, so the
/// minimum is found exactly by scanning those breakpoints. Returns `f64::INFINITY` when no
/// finite `beta` qualifies (only possible if an inner design value is infinite).
pub fn beta_bar(
    arms: &ArmSet,
    values: &[f64],
    theta_norm: f64,
    h: f64,
    gamma: f64,
    objective: LevelObjective,
    cfg: &FwConfig,
) -> Result<f64> {
    objective.validate()?;
    if values.len() != arms.len() {
        return Err(Error::DimensionMismatch(arms.len(), values.len()));
    }
    if !(theta_norm >= 0.0 && h >= 0.0) {
        return Err(Error::invalid("theta_norm and h must be nonnegative"));
    }
    let c = 4.0 * (gamma.sqrt() * theta_norm + h);
    if c == 0.0 {
        return Ok(0.0);
    }
    let mut gapped: Vec<(f64, FeatureCombo)> = match objective {
        LevelObjective::Explicit { alpha } => (0..arms.len())
            .map(|i| ((values[i] - alpha).abs(), FeatureCombo::arm(i)))
            .collect(),
        LevelObjective::Implicit { epsilon } => {
            let scale = 1.0 - epsilon;
            let mut v = Vec::new();
            for x in 0..arms.len() {
                for xp in 0..arms.len() {
                    if x == xp {
                        continue;
                    }
                    if let Ok(combo) = FeatureCombo::difference(x, xp, scale) {
                        v.push(((values[x] - scale * values[xp]).abs(), combo));
                    }
                }
            }
            v
        }
    };
    gapped.sort_by(|a, b| a.0.total_cmp(&b.0));

    // beta below the smallest gap: empty set, inner value 0
    let first_gap = gapped.first().map_or(f64::INFINITY, |g| g.0);
    if 2.0 * c < first_gap {
        return Ok(2.0 * c);
    }
    let mut k = 0;
    while k < gapped.len() {
        let level = gapped[k].0;
        while k < gapped.len() && gapped[k].0 == level {
            k += 1;
        }
        let next = gapped.get(k).map_or(f64::INFINITY, |g| g.0);
        let targets: Vec<FeatureCombo> = gapped[..k].iter().map(|g| g.1.clone()).collect();
        let p = DesignProblem::new(arms, targets, gamma)?;
        let inner = frank_wolfe_design(&p, cfg)?.value;
        let lhs = c * (2.0 + inner.max(0.0).sqrt());
        let candidate = lhs.max(level).max(f64::MIN_POSITIVE);
        if candidate < next {
            return Ok(candidate);
        }
    }
    Ok(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;

    fn basis2() -> ArmSet {
        ArmSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], KernelSpec::Linear).unwrap()
    }

    #[test]
    fn design_validation() {
        assert!(Design::new(vec![0.5, 0.6]).is_err());
        assert!(Design::new(vec![-0.1, 1.1]).is_err());
        assert!(Design::new(vec![]).is_err());
        assert!(Design::vertex(2, 2).is_err());
        assert_eq!(Design::new(vec![0.25, 0.75]).unwrap().support().count(), 2);
    }

    #[test]
    fn objective_symmetric_instance_ties_to_lowest_index() {
        let arms = basis2();
        let p = DesignProblem::new(&arms, vec![FeatureCombo::arm(0), FeatureCombo::arm(1)], 0.0).unwrap();
        let (v, arg) = design_objective(&p, &Design::uniform(2)).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        assert_eq!(arg, 0);
    }

    #[test]
    fn objective_single_direction_fully_sampled() {
        let arms = basis2();
        let p = DesignProblem::new(&arms, vec![FeatureCombo::arm(0)], 0.0).unwrap();
        let (v, _) = design_objective(&p, &Design::vertex(2, 0).unwrap()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn objective_is_infinite_for_unreachable_target() {
        let arms = basis2();
        let p = DesignProblem::new(&arms, vec![FeatureCombo::arm(1)], 0.0).unwrap();
        let (v, _) = design_objective(&p, &Design::vertex(2, 0).unwrap()).unwrap();
        assert!(v.is_infinite());
    }

    #[test]
    fn zero_gamma_requires_linear_kernel() {
        let arms = ArmSet::new(vec![vec![0.0], vec![1.0]], KernelSpec::squared_exponential(1.0).unwrap()).unwrap();
        assert!(DesignProblem::new(&arms, vec![FeatureCombo::arm(0)], 0.0).is_err());
    }

    #[test]
    fn fw_config_validation() {
        let mut cfg = FwConfig { max_iters: 0, ..FwConfig::default() };
        assert!(cfg.validate().is_err());
        cfg.max_iters = 10;
        cfg.step_rule = StepRule::Fixed(1.5);
        assert!(cfg.validate().is_err());
        cfg.step_rule = StepRule::Fixed(1.0);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn fw_converges_on_orthonormal_basis() {
        let arms = basis2();
        let p = DesignProblem::new(&arms, vec![FeatureCombo::arm(0), FeatureCombo::arm(1)], 0.0).unwrap();
        let cfg = FwConfig { max_iters: 500, stop_tol: 0.0, ..FwConfig::default() };
        let r = frank_wolfe_design(&p, &cfg).unwrap();
        assert!((r.design.weights()[0] - 0.5).abs() < 0.02);
        assert!((r.value - 2.0).abs() < 0.04);
    }

    #[test]
    fn fw_never_worse_than_initial_design() {
        let pts = vec![vec![0.0], vec![0.2], vec![0.5], vec![0.55], vec![1.0]];
        let arms = ArmSet::new(pts, KernelSpec::squared_exponential(0.2).unwrap()).unwrap();
        let targets = (0..5).map(FeatureCombo::arm).collect();
        let p = DesignProblem::new(&arms, targets, 0.05).unwrap();
        let cfg = FwConfig { init: FwInit::Vertex(2), max_iters: 50, ..FwConfig::default() };
        let (v0, _) = design_objective(&p, &Design::vertex(5, 2).unwrap()).unwrap();
        let r = frank_wolfe_design(&p, &cfg).unwrap();
        assert!(r.value <= v0 + 1e-9);
        let (check, _) = design_objective(&p, &r.design).unwrap();
        assert!((check - r.value).abs() < 1e-9 * (1.0 + check));
    }

    #[test]
    fn oracle_rejects_zero_gap() {
        let arms = basis2();
        let err = oracle_allocation(&arms, &[0.5, 0.2], LevelObjective::Explicit { alpha: 0.5 }, 0.0, &FwConfig::default());
        assert!(matches!(err, Err(Error::DegenerateInstance(_))));
    }

    #[test]
    fn beta_bar_vanishes_without_misspecification() {
        let arms = basis2();
        let b = beta_bar(&arms, &[1.0, 0.0], 1.0, 0.0, 0.0, LevelObjective::Explicit { alpha: 0.5 }, &FwConfig::default()).unwrap();
        assert_eq!(b, 0.0);
    }

    #[test]
    fn beta_bar_with_unit_design_term() {
        // one arm, fully identified by its own design: design term 1, beta_bar = 4 h (2 + 1)
        let arms = ArmSet::new(vec![vec![1.0, 0.0]], KernelSpec::Linear).unwrap();
        let b = beta_bar(&arms, &[1.0], 1.0, 0.1, 0.0, LevelObjective::Explicit { alpha: 0.5 }, &FwConfig::default()).unwrap();
        assert!((b - 1.2).abs() < 1e-9);
    }

    #[test]
    fn beta_bar_respects_monotone_upper_bound() {
        // every |phi(x)|^2 under the uniform design is 2; the optimum over the subset is at most 2
        let arms = basis2();
        let b = beta_bar(&arms, &[1.0, 0.0], 1.0, 0.1, 0.0, LevelObjective::Explicit { alpha: 0.5 }, &FwConfig::default()).unwrap();
        assert!(b <= 0.4 * (2.0 + 2f64.sqrt()) + 1e-9);
        assert!(b >= 0.8 - 1e-12);
    }
}
