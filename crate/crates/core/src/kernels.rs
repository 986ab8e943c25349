//! Kernels, arm sets, feature combinations and the regularized inverse bilinear form
//! `<u, (sum_i lambda_i phi(x_i) phi(x_i)^T + gamma I)^{-1} v>`.
//!
//! Feature maps are never materialized. Every vector the algorithms care about is a finite
//! combination `sum_i c_i phi(x_i)` over arms, so all inner products reduce to the cached Gram
//! matrix. Two routes are provided:
//!
//! * the kernel trick (any kernel, `gamma > 0`), which only factors an `s x s` matrix where `s`
//!   is the support size of the design;
//! * an explicit `d x d` route for the linear kernel, which also admits `gamma = 0` through a
//!   pseudo-inverse.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, psd_pseudo_inverse};

/// Relative eigenvalue cutoff for the `gamma = 0` pseudo-inverse.
const PINV_REL_TOL: f64 = 1e-10;
/// Relative tolerance for declaring a vector outside the range of a singular design matrix.
const RANGE_REL_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    /// `k(x, y) = exp(-|x - y|^2 / (2 l^2))`
    SquaredExponential { lengthscale: f64 },
}

impl KernelSpec {
    pub fn squared_exponential(lengthscale: f64) -> Result<Self> {
        let k = KernelSpec::SquaredExponential { lengthscale };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::SquaredExponential { lengthscale } => {
                if lengthscale.is_finite() && lengthscale > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("lengthscale must be positive, got {lengthscale}")))
                }
            }
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, KernelSpec::Linear)
    }

    /// Unchecked evaluation; callers guarantee equal lengths.
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            KernelSpec::SquaredExponential { lengthscale } => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * lengthscale * lengthscale)).exp()
            }
        }
    }
}

/// Evaluates `k(x, y)`.
pub fn kernel_eval(k: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(x.len(), y.len()));
    }
    k.validate()?;
    Ok(k.eval_unchecked(x, y))
}

/// Gram matrix `K[i, j] = k(x_i, x_j)` over a point set of equal dimension.
pub fn gram_matrix(k: &KernelSpec, points: &[Vec<f64>]) -> DMatrix<f64> {
    let n = points.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = k.eval_unchecked(&points[i], &points[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Finite design space: ordered points in R^d and a kernel. Immutable after construction.
#[derive(Clone, Debug)]
pub struct ArmSet {
    points: Vec<Vec<f64>>,
    kernel: KernelSpec,
    gram: DMatrix<f64>,
}

impl ArmSet {
    pub fn new(points: Vec<Vec<f64>>, kernel: KernelSpec) -> Result<Self> {
        kernel.validate()?;
        let first = points.first().ok_or_else(|| Error::invalid("arm set must be nonempty"))?;
        let d = first.len();
        if d == 0 {
            return Err(Error::invalid("arm dimension must be at least 1"));
        }
        for p in &points {
            if p.len() != d {
                return Err(Error::DimensionMismatch(d, p.len()));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("arm coordinates must be finite"));
            }
        }
        let gram = gram_matrix(&kernel, &points);
        Ok(Self { points, kernel, gram })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    #[inline]
    pub fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[(i, j)]
    }

    /// `<u, v>` in feature space.
    pub fn inner(&self, u: &FeatureCombo, v: &FeatureCombo) -> f64 {
        let mut s = 0.0;
        for &(i, a) in u.terms() {
            for &(j, b) in v.terms() {
                s += a * b * self.gram[(i, j)];
            }
        }
        s
    }

    /// Explicit vector `sum_i c_i x_i`; meaningful for the linear kernel.
    pub(crate) fn linear_vector(&self, c: &FeatureCombo) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        for &(i, a) in c.terms() {
            for (k, x) in self.points[i].iter().enumerate() {
                v[k] += a * x;
            }
        }
        v
    }
}

/// Sparse combination `sum_i c_i phi(x_i)` over arm indices. Terms are sorted by index,
/// merged, and nonzero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureCombo {
    terms: Vec<(usize, f64)>,
}

impl FeatureCombo {
    pub fn new(terms: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut terms: Vec<(usize, f64)> = terms.into_iter().collect();
        if terms.iter().any(|(_, c)| !c.is_finite()) {
            return Err(Error::invalid("combo coefficients must be finite"));
        }
        terms.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (i, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => merged.push((i, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        if merged.is_empty() {
            return Err(Error::invalid("feature combo needs at least one nonzero coefficient"));
        }
        Ok(Self { terms: merged })
    }

    /// `phi(x_i)`.
    pub fn arm(i: usize) -> Self {
        Self { terms: vec![(i, 1.0)] }
    }

    /// `phi(x_i) - scale * phi(x_j)`.
    pub fn difference(i: usize, j: usize, scale: f64) -> Result<Self> {
        Self::new([(i, 1.0), (j, -scale)])
    }

    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn check_for(&self, arms: &ArmSet) -> Result<()> {
        match self.terms.iter().find(|&&(i, _)| i >= arms.len()) {
            Some(&(i, _)) => Err(Error::invalid(format!(
                "combo refers to arm {i} but only {} arms exist",
                arms.len()
            ))),
            None => Ok(()),
        }
    }

    /// `<theta, v>` given per-arm values `f(x_i) = <theta, phi(x_i)>`.
    pub fn evaluate(&self, per_arm: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * per_arm[i]).sum()
    }

    /// `sum_i c_i row[i]`.
    #[inline]
    pub fn dot_row(&self, row: &[f64]) -> f64 {
        self.evaluate(row)
    }
}

fn check_gamma_positive(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "gamma must be positive for the kernel route, got {gamma}; use the dense route for gamma = 0"
        )))
    }
}

/// `<u, (A(lambda) + gamma I)^{-1} v>` through the kernel trick:
/// `(k(u,v) - k_l(u)^T (K_l + gamma I_s)^{-1} k_l(v)) / gamma`, with
/// `[k_l(x)]_i = sqrt(lambda_i) k(x_i, x)` and `[K_l]_ij = sqrt(lambda_i lambda_j) k(x_i, x_j)`
/// over the support of `lambda`.
pub fn reg_inv_quadform(
    arms: &ArmSet,
    u: &FeatureCombo,
    v: &FeatureCombo,
    lambda: &Design,
    gamma: f64,
) -> Result<f64> {
    check_gamma_positive(gamma)?;
    check_design(arms, lambda)?;
    u.check_for(arms)?;
    v.check_for(arms)?;
    let support: Vec<(usize, f64)> = lambda.support().collect();
    let s = support.len();
    let mut k_lambda = DMatrix::zeros(s, s);
    for (a, &(i, li)) in support.iter().enumerate() {
        for (b, &(j, lj)) in support.iter().enumerate() {
            k_lambda[(a, b)] = (li * lj).sqrt() * arms.k(i, j);
        }
        k_lambda[(a, a)] += gamma;
    }
    let chol = cholesky_with_jitter(&k_lambda, "K_lambda + gamma I")?;
    let embed = |c: &FeatureCombo| {
        DVector::from_iterator(
            s,
            support.iter().map(|&(i, li)| {
                li.sqrt() * c.terms().iter().map(|&(j, cj)| cj * arms.k(i, j)).sum::<f64>()
            }),
        )
    };
    let ku = embed(u);
    let kv = embed(v);
    let solved = chol.solve(&kv);
    Ok((arms.inner(u, v) - ku.dot(&solved)) / gamma)
}

/// Explicit `d x d` route for the linear kernel: `u^T (sum_i lambda_i x_i x_i^T + gamma I)^{-1} v`.
/// With `gamma = 0` a pseudo-inverse is used, and both vectors must lie in the range of `A`.
pub fn dense_inv_quadform(
    arms: &ArmSet,
    u: &FeatureCombo,
    v: &FeatureCombo,
    lambda: &Design,
    gamma: f64,
) -> Result<f64> {
    if !arms.kernel().is_linear() {
        return Err(Error::invalid("dense route requires the linear kernel"));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::invalid(format!("gamma must be nonnegative, got {gamma}")));
    }
    check_design(arms, lambda)?;
    u.check_for(arms)?;
    v.check_for(arms)?;
    let a = design_matrix(arms, lambda, gamma);
    let uv = arms.linear_vector(u);
    let vv = arms.linear_vector(v);
    if gamma > 0.0 {
        if let Some(chol) = a.clone().cholesky() {
            return Ok(uv.dot(&chol.solve(&vv)));
        }
    }
    let (pinv, null) = psd_pseudo_inverse(&a, PINV_REL_TOL);
    check_in_range(&null, &uv)?;
    check_in_range(&null, &vv)?;
    Ok(uv.dot(&(pinv * vv)))
}

fn design_matrix(arms: &ArmSet, lambda: &Design, gamma: f64) -> DMatrix<f64> {
    let d = arms.dim();
    let mut a = DMatrix::identity(d, d) * gamma;
    for (i, w) in lambda.support() {
        let x = DVector::from_column_slice(arms.point(i));
        a += (&x * x.transpose()) * w;
    }
    a
}

fn check_in_range(null: &DMatrix<f64>, v: &DVector<f64>) -> Result<()> {
    if null.ncols() == 0 {
        return Ok(());
    }
    let outside = (null.transpose() * v).norm();
    if outside > RANGE_REL_TOL * v.norm().max(1.0) {
        Err(Error::RankDeficient(format!(
            "vector has component {outside:.3e} outside the range of the design matrix"
        )))
    } else {
        Ok(())
    }
}

fn check_design(arms: &ArmSet, lambda: &Design) -> Result<()> {
    if lambda.len() != arms.len() {
        return Err(Error::DimensionMismatch(arms.len(), lambda.len()));
    }
    Ok(())
}

/// Precomputed `Q[i, j] = <phi(x_i), (A(lambda) + gamma I)^{-1} phi(x_j)>` for one design,
/// so bilinear forms of any combos reduce to `c_u^T Q c_v`.
#[derive(Clone, Debug)]
pub struct InverseOperator {
    q: DMatrix<f64>,
    /// Orthonormal basis of the null space of `A` (linear kernel, `gamma = 0` only), stored
    /// row-wise in arm space: `null_arm[(k, i)] = <n_k, x_i>`.
    null_arm: Option<DMatrix<f64>>,
}

impl InverseOperator {
    /// Picks the explicit route for the linear kernel and the kernel trick otherwise.
    pub fn new(arms: &ArmSet, lambda: &Design, gamma: f64) -> Result<Self> {
        if arms.kernel().is_linear() {
            Self::dense(arms, lambda, gamma)
        } else {
            Self::kernel_trick(arms, lambda, gamma)
        }
    }

    pub fn kernel_trick(arms: &ArmSet, lambda: &Design, gamma: f64) -> Result<Self> {
        check_gamma_positive(gamma)?;
        check_design(arms, lambda)?;
        let n = arms.len();
        let support: Vec<(usize, f64)> = lambda.support().collect();
        let s = support.len();
        let mut k_lambda = DMatrix::zeros(s, s);
        let mut b = DMatrix::zeros(s, n);
        for (a, &(i, li)) in support.iter().enumerate() {
            let ri = li.sqrt();
            for (c, &(j, lj)) in support.iter().enumerate() {
                k_lambda[(a, c)] = ri * lj.sqrt() * arms.k(i, j);
            }
            k_lambda[(a, a)] += gamma;
            for j in 0..n {
                b[(a, j)] = ri * arms.k(i, j);
            }
        }
        let chol = cholesky_with_jitter(&k_lambda, "K_lambda + gamma I")?;
        let l = chol.l();
        let w = l
            .solve_lower_triangular(&b)
            .ok_or_else(|| Error::Numerical {
                what: "triangular solve in kernel route".into(),
                condition: crate::linalg::condition_estimate(&k_lambda),
            })?;
        let mut q = arms.gram().clone();
        q -= w.transpose() * &w;
        q /= gamma;
        Ok(Self { q, null_arm: None })
    }

    pub fn dense(arms: &ArmSet, lambda: &Design, gamma: f64) -> Result<Self> {
        if !arms.kernel().is_linear() {
            return Err(Error::invalid("dense route requires the linear kernel"));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::invalid(format!("gamma must be nonnegative, got {gamma}")));
        }
        check_design(arms, lambda)?;
        let n = arms.len();
        let d = arms.dim();
        let x = DMatrix::from_fn(n, d, |i, k| arms.point(i)[k]);
        let a = design_matrix(arms, lambda, gamma);
        let chol = if gamma > 0.0 { a.clone().cholesky() } else { None };
        match chol {
            Some(chol) => {
                let solved = chol.solve(&x.transpose());
                Ok(Self { q: &x * solved, null_arm: None })
            }
            None => {
                let (pinv, null) = psd_pseudo_inverse(&a, PINV_REL_TOL);
                let q = &x * pinv * x.transpose();
                let null_arm = (null.ncols() > 0).then(|| null.transpose() * x.transpose());
                Ok(Self { q, null_arm })
            }
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    fn check_range(&self, c: &FeatureCombo) -> Result<()> {
        let Some(null_arm) = &self.null_arm else {
            return Ok(());
        };
        let mut outside = 0.0;
        let mut scale = 0.0;
        for k in 0..null_arm.nrows() {
            let comp: f64 = c.terms().iter().map(|&(i, a)| a * null_arm[(k, i)]).sum();
            outside += comp * comp;
        }
        for &(_, a) in c.terms() {
            scale += a * a;
        }
        if outside.sqrt() > RANGE_REL_TOL * scale.sqrt().max(1.0) {
            Err(Error::RankDeficient(format!(
                "vector has component {:.3e} outside the range of the design matrix",
                outside.sqrt()
            )))
        } else {
            Ok(())
        }
    }

    /// `<u, A^{-1} v>`.
    pub fn bilinear(&self, u: &FeatureCombo, v: &FeatureCombo) -> Result<f64> {
        self.check_range(u)?;
        self.check_range(v)?;
        Ok(self.bilinear_unchecked(u, v))
    }

    pub(crate) fn bilinear_unchecked(&self, u: &FeatureCombo, v: &FeatureCombo) -> f64 {
        let mut s = 0.0;
        for &(i, a) in u.terms() {
            for &(j, b) in v.terms() {
                s += a * b * self.q[(i, j)];
            }
        }
        s
    }

    /// `|v|^2_{A^{-1}}`.
    pub fn norm_sq(&self, v: &FeatureCombo) -> Result<f64> {
        self.bilinear(v, v)
    }

    /// `(<v, A^{-1} phi(x_i)>)_i` for every arm.
    pub fn arm_row(&self, v: &FeatureCombo) -> Vec<f64> {
        let n = self.q.nrows();
        let mut row = vec![0.0; n];
        for &(j, c) in v.terms() {
            for (i, r) in row.iter_mut().enumerate() {
                *r += c * self.q[(i, j)];
            }
        }
        row
    }

    /// Whether `v` lies in the range of the design matrix (always true for `gamma > 0`).
    pub fn in_range(&self, v: &FeatureCombo) -> bool {
        self.check_range(v).is_ok()
    }
}
