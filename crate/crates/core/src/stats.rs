//! Primitive samplers and densities: Dirichlet, categorical,
//! Normal-Inverse-Wishart, Gaussian log-density, and the sampler for a
//! Gaussian restricted to an affine subspace `{x : Gx = r}`.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, chol_solve, cholesky_jittered, cholesky_strict};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Normal-Inverse-Wishart hyperparameters `(μ₀, λ₀, Ψ₀, ν₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NiwParams {
    pub mu0: DVector<f64>,
    pub lambda0: f64,
    pub psi0: DMatrix<f64>,
    pub nu0: f64,
}

impl NiwParams {
    /// `μ₀ = 0`, `λ₀ = 10`, `Ψ₀ = I`, `ν₀ = dim + 2`.
    pub fn standard(dim: usize) -> Self {
        NiwParams {
            mu0: DVector::zeros(dim),
            lambda0: 10.0,
            psi0: DMatrix::identity(dim, dim),
            nu0: dim as f64 + 2.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.psi0.nrows() != d || self.psi0.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: self.psi0.nrows() });
        }
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return Err(Error::InvalidParams("lambda0 must be positive".to_string()));
        }
        if !(self.nu0 > d as f64 - 1.0) {
            return Err(Error::InvalidParams("nu0 must exceed dim - 1".to_string()));
        }
        let scale = self.psi0.amax().max(f64::MIN_POSITIVE);
        for i in 0..d {
            for j in (i + 1)..d {
                if (self.psi0[(i, j)] - self.psi0[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParams("psi0 must be symmetric".to_string()));
                }
            }
        }
        if cholesky_strict(&self.psi0).is_none() {
            return Err(Error::InvalidParams("psi0 must be positive definite".to_string()));
        }
        Ok(())
    }
}

/// A Gaussian `N(μ, Σ)` with its lower Cholesky factor cached.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl GaussianComponent {
    /// Factorizes `sigma` (symmetrized first). When jitter is needed to
    /// factorize, the stored covariance includes it so that `Σ = LLᵀ` holds.
    pub fn new(mu: DVector<f64>, mut sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != mu.len() || sigma.ncols() != mu.len() {
            return Err(Error::DimensionMismatch { expected: mu.len(), found: sigma.nrows() });
        }
        linalg::symmetrize(&mut sigma);
        let (chol, jitter) = cholesky_jittered(&sigma)?;
        if jitter > 0.0 {
            for i in 0..mu.len() {
                sigma[(i, i)] += jitter;
            }
        }
        Ok(GaussianComponent { mu, sigma, chol })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Restricts the component to a subset of coordinates (marginal).
    pub fn marginal(&self, coords: &[usize]) -> Result<Self> {
        let mu = DVector::from_fn(coords.len(), |i, _| self.mu[coords[i]]);
        let sigma = DMatrix::from_fn(coords.len(), coords.len(), |i, j| {
            self.sigma[(coords[i], coords[j])]
        });
        GaussianComponent::new(mu, sigma)
    }
}

fn standard_normal_vec<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| StandardNormal.sample(rng))
}

/// Draws `π ~ Dirichlet(α)` by normalizing independent gamma variates.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if alpha.is_empty() || alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidAlpha);
    }
    if alpha.len() == 1 {
        return Ok(alloc::vec![1.0]);
    }
    let gammas: Vec<Gamma<f64>> = alpha
        .iter()
        .map(|a| Gamma::new(*a, 1.0).map_err(|_| Error::InvalidAlpha))
        .collect::<Result<_>>()?;
    loop {
        let draws: Vec<f64> = gammas.iter().map(|g| g.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return Ok(draws.into_iter().map(|g| g / total).collect());
        }
    }
}

/// Draws an index `k` (0-based) with probability `p[k]`.
pub fn sample_categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> Result<usize> {
    let sum: f64 = p.iter().sum();
    if p.is_empty() || p.iter().any(|v| !(*v >= -1e-12) || !v.is_finite()) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::NotASimplex { sum });
    }
    let u: f64 = rng.random::<f64>() * sum;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, v) in p.iter().enumerate() {
        if *v > 0.0 {
            last_positive = k;
        }
        acc += v.max(0.0);
        if u < acc {
            return Ok(k);
        }
    }
    Ok(last_positive)
}

/// Draws `Σ ~ W⁻¹(Ψ, ν)` via the Bartlett decomposition.
///
/// With `Ψ = CCᵀ` and Bartlett factor `A` of `Wishart(I, ν)`, the draw is
/// `Σ = (C A⁻ᵀ)(C A⁻ᵀ)ᵀ`, which never forms `Ψ⁻¹`.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(
    psi: &DMatrix<f64>,
    nu: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let d = psi.nrows();
    if !(nu > d as f64 - 1.0) {
        return Err(Error::InvalidParams("nu must exceed dim - 1".to_string()));
    }
    let (c, _) = cholesky_jittered(psi)?;
    let mut a = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        let shape = 0.5 * (nu - i as f64);
        let chi2: f64 = Gamma::new(shape, 2.0)
            .map_err(|_| Error::InvalidParams("bad chi-square shape".to_string()))?
            .sample(rng);
        a[(i, i)] = chi2.sqrt();
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let a_inv = a
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or(Error::CholeskyFailure)?;
    let b = c * a_inv.transpose();
    let mut sigma = &b * b.transpose();
    linalg::symmetrize(&mut sigma);
    Ok(sigma)
}

/// Draws `(μ, Σ)` with `Σ ~ W⁻¹(Ψ₀, ν₀)` and `μ | Σ ~ N(μ₀, Σ/λ₀)`.
pub fn sample_niw<R: Rng + ?Sized>(params: &NiwParams, rng: &mut R) -> Result<GaussianComponent> {
    params.validate()?;
    let sigma = sample_inverse_wishart(&params.psi0, params.nu0, rng)?;
    let placeholder = GaussianComponent::new(params.mu0.clone(), sigma)?;
    let z = standard_normal_vec(params.dim(), rng);
    let mu = &params.mu0 + placeholder.chol() * z / params.lambda0.sqrt();
    Ok(GaussianComponent { mu, ..placeholder })
}

/// Draws `x ~ N(μ, Σ)`.
pub fn sample_mvn<R: Rng + ?Sized>(comp: &GaussianComponent, rng: &mut R) -> DVector<f64> {
    let z = standard_normal_vec(comp.dim(), rng);
    comp.mu() + comp.chol() * z
}

/// Maps an unconstrained draw `u` onto `{x : Gx = r}`:
/// solve `(GΣGᵀ)β = r − Gu` by Cholesky, return `x = u + ΣGᵀβ`.
///
/// One round of iterative refinement tightens the residual when `GΣGᵀ` is
/// poorly conditioned.
pub fn project_onto_constraints(
    comp: &GaussianComponent,
    g: &DMatrix<f64>,
    r: &DVector<f64>,
    u: DVector<f64>,
) -> Result<DVector<f64>> {
    if g.ncols() != comp.dim() {
        return Err(Error::DimensionMismatch { expected: comp.dim(), found: g.ncols() });
    }
    if g.nrows() != r.len() {
        return Err(Error::DimensionMismatch { expected: g.nrows(), found: r.len() });
    }
    if g.nrows() == 0 {
        return Ok(u);
    }
    let sigma_gt = comp.sigma() * g.transpose();
    let mut s = g * &sigma_gt;
    linalg::symmetrize(&mut s);
    let l = cholesky_strict(&s).ok_or_else(Error::singular)?;
    let mut x = u;
    let tol_scale = 1.0 + r.amax();
    for _ in 0..3 {
        let resid = r - g * &x;
        if resid.amax() <= 1e-12 * tol_scale {
            break;
        }
        let beta = chol_solve(&l, &resid);
        x += &sigma_gt * beta;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::singular());
    }
    Ok(x)
}

/// Draws from `N(μ, Σ)` truncated to the hyperplane `{x : Gx = r}`.
pub fn sample_truncated_mvn<R: Rng + ?Sized>(
    comp: &GaussianComponent,
    g: &DMatrix<f64>,
    r: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let u = sample_mvn(comp, rng);
    project_onto_constraints(comp, g, r, u)
}

/// Gaussian log-density through the cached Cholesky factor.
pub fn log_mvn_pdf(x: &DVector<f64>, comp: &GaussianComponent) -> Result<f64> {
    if x.len() != comp.dim() {
        return Err(Error::DimensionMismatch { expected: comp.dim(), found: x.len() });
    }
    Ok(log_mvn_pdf_chol(x, comp.mu(), comp.chol()))
}

pub(crate) fn log_mvn_pdf_chol(x: &DVector<f64>, mu: &DVector<f64>, l: &DMatrix<f64>) -> f64 {
    let d = x.len();
    if d == 0 {
        return 0.0;
    }
    let diff = x - mu;
    let y = l.solve_lower_triangular(&diff).expect("nonzero diagonal");
    let log_det_half: f64 = (0..d).map(|i| libm::log(l[(i, i)])).sum();
    -0.5 * (d as f64 * LN_2PI + y.norm_squared()) - log_det_half
}

/// Univariate normal log-density.
pub fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (libm::log(2.0 * PI * var) + d * d / var)
}

/// `log Σ exp(vᵢ)` with max subtraction.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + libm::log(values.iter().map(|v| libm::exp(v - max)).sum::<f64>())
}
