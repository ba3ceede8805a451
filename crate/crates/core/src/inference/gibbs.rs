use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::niw::niw_posterior;
use super::standardize::{fit_standardizer, transform_pair, Standardizer};
use super::variant::{variant_projection, ModelVariant};
use crate::error::{Error, Result};
use crate::linalg::min_norm_solution;
use crate::pair::{BusPairObservation, Dataset, RouteSpec};
use crate::rng::RngState;
use crate::stats::{
    log_mvn_pdf_chol, log_sum_exp, sample_categorical, sample_dirichlet, sample_niw, sample_truncated_mvn,
    GaussianComponent, NiwParams,
};
use crate::trajectory::PeriodConfig;

const TAG_INIT: u64 = 0;
const TAG_PARAMS: u64 = 1;
const TAG_PAIRS: u64 = 2;

/// Settings for one Gibbs run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub k: usize,
    /// Dirichlet concentration, one entry per component.
    pub alpha: Vec<f64>,
    pub niw: NiwParams,
    /// Burn-in iterations.
    pub d1: usize,
    /// Stored iterations.
    pub d2: usize,
    pub seed: u64,
    pub variant: ModelVariant,
}

impl FitConfig {
    /// `α = 0.2`, the standard NIW prior for the variant's dimension,
    /// `d1 = 9000`, `d2 = 1000`.
    pub fn new(k: usize, n_links: usize, variant: ModelVariant) -> Self {
        FitConfig {
            k,
            alpha: vec![0.2; k],
            niw: NiwParams::standard(variant.dim(n_links)),
            d1: 9000,
            d2: 1000,
            seed: 0,
            variant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParams("K must be at least 1".to_string()));
        }
        if self.d1 == 0 || self.d2 == 0 {
            return Err(Error::InvalidParams("d1 and d2 must be at least 1".to_string()));
        }
        if self.alpha.len() != self.k {
            return Err(Error::LengthMismatch { left: self.alpha.len(), right: self.k });
        }
        if self.alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidAlpha);
        }
        self.niw.validate()
    }
}

/// One draw of the mixture: weights per period and shared components, on the
/// standardized scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    /// `pis[t - 1]` is the weight vector of period `t`.
    pub pis: Vec<Vec<f64>>,
    pub components: Vec<GaussianComponent>,
}

impl MixtureParams {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn periods(&self) -> usize {
        self.pis.len()
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.dim())
    }

    /// Relabels components so that new component `i` is old `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        MixtureParams {
            pis: self.pis.iter().map(|p| perm.iter().map(|&j| p[j]).collect()).collect(),
            components: perm.iter().map(|&j| self.components[j].clone()).collect(),
        }
    }
}

/// Stored draws and everything needed to interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub draws: Vec<MixtureParams>,
    /// Transform over all `3n` augmented coordinates.
    pub standardizer: Standardizer,
    pub fit_config: FitConfig,
    pub route: RouteSpec,
    pub period_config: PeriodConfig,
}

impl PosteriorSamples {
    /// Augmented coordinates the fitted variant models.
    pub fn coords(&self) -> Vec<usize> {
        self.fit_config.variant.coords(self.route.n_links())
    }

    pub fn k(&self) -> usize {
        self.fit_config.k
    }

    pub fn periods(&self) -> usize {
        self.period_config.count
    }

    /// Draw-averaged mean and covariance of each component. Only
    /// meaningful when labels do not switch, for example with `K = 1`.
    pub fn mean_components(&self) -> Result<Vec<GaussianComponent>> {
        let d2 = self.draws.len() as f64;
        let dim = self.draws[0].dim();
        (0..self.k())
            .map(|k| {
                let mut mu = DVector::zeros(dim);
                let mut sigma = DMatrix::zeros(dim, dim);
                for d in &self.draws {
                    mu += d.components[k].mu();
                    sigma += d.components[k].sigma();
                }
                GaussianComponent::new(mu / d2, sigma / d2)
            })
            .collect()
    }
}

/// Posterior class probabilities `∝ π_k^t N(x | μ_k, Σ_k)` for 1-based
/// period `t`.
pub fn responsibilities(x: &DVector<f64>, params: &MixtureParams, t: usize) -> Result<Vec<f64>> {
    if t == 0 || t > params.periods() {
        return Err(Error::IndexOutOfRange { index: t, valid: "1 <= t <= T" });
    }
    if x.len() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), found: x.len() });
    }
    let logs: Vec<f64> = params
        .components
        .iter()
        .zip(&params.pis[t - 1])
        .map(|(c, p)| libm::log(*p) + log_mvn_pdf_chol(x, c.mu(), c.chol()))
        .collect();
    Ok(normalize_log_weights(&logs))
}

pub(crate) fn normalize_log_weights(logs: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logs);
    if !lse.is_finite() {
        // Every component underflowed: fall back to the finite maxima.
        let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let hits = logs.iter().filter(|v| **v == mx).count() as f64;
        return logs.iter().map(|v| if *v == mx { 1.0 / hits } else { 0.0 }).collect();
    }
    let mut w: Vec<f64> = logs.iter().map(|v| libm::exp(v - lse)).collect();
    let s: f64 = w.iter().sum();
    for v in &mut w {
        *v /= s;
    }
    w
}

/// The Gibbs chain with its latent state exposed.
#[derive(Debug, Clone)]
pub struct GibbsSampler {
    cfg: FitConfig,
    periods: usize,
    pairs: Vec<BusPairObservation>,
    x: Vec<DVector<f64>>,
    z: Vec<usize>,
    params: Option<MixtureParams>,
    rng: RngState,
    iteration: u64,
}

impl GibbsSampler {
    /// Prepares the chain with uniformly random initial assignments.
    pub fn new(dataset: &Dataset, cfg: FitConfig, standardizer: &Standardizer, rng: RngState) -> Result<Self> {
        let mut init = rng.substream(TAG_INIT).rng();
        let k = cfg.k.max(1);
        let z = (0..dataset.pairs.len()).map(|_| init.random_range(0..k)).collect();
        GibbsSampler::with_assignments(dataset, cfg, standardizer, rng, z)
    }

    /// Prepares the chain from explicit 0-based initial assignments.
    pub fn with_assignments(
        dataset: &Dataset,
        cfg: FitConfig,
        standardizer: &Standardizer,
        rng: RngState,
        z: Vec<usize>,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = dataset.route.n_links();
        let dim = cfg.variant.dim(n);
        if cfg.niw.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: cfg.niw.dim() });
        }
        if standardizer.dim() != 3 * n {
            return Err(Error::DimensionMismatch { expected: 3 * n, found: standardizer.dim() });
        }
        if z.len() != dataset.pairs.len() {
            return Err(Error::LengthMismatch { left: z.len(), right: dataset.pairs.len() });
        }
        if let Some(bad) = z.iter().find(|&&v| v >= cfg.k) {
            return Err(Error::IndexOutOfRange { index: *bad, valid: "0 <= z < K" });
        }
        if let Some(t) = dataset.period_counts().iter().position(|c| *c == 0) {
            return Err(Error::EmptyPeriod { period: t + 1 });
        }
        let pairs: Vec<BusPairObservation> = dataset
            .pairs
            .iter()
            .map(|p| transform_pair(&variant_projection(p, cfg.variant), standardizer))
            .collect();
        let x = pairs
            .iter()
            .map(|p| min_norm_solution(&p.g, &p.r).map_err(|e| e.with_pair(&p.pair_id)))
            .collect::<Result<Vec<_>>>()?;
        Ok(GibbsSampler { cfg, periods: dataset.periods, pairs, x, z, params: None, rng, iteration: 0 })
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Standardized, variant-projected systems `(G̃, r̃)` of each pair.
    pub fn pairs(&self) -> &[BusPairObservation] {
        &self.pairs
    }

    pub fn latents(&self) -> &[DVector<f64>] {
        &self.x
    }

    /// 0-based component assignments.
    pub fn assignments(&self) -> &[usize] {
        &self.z
    }

    /// Parameters drawn in the latest iteration.
    pub fn params(&self) -> Option<&MixtureParams> {
        self.params.as_ref()
    }

    fn draw_params(&self) -> Result<MixtureParams> {
        let mut rng = self.rng.substream2(TAG_PARAMS, self.iteration).rng();
        let k = self.cfg.k;
        let mut counts = vec![vec![0.0; k]; self.periods];
        for (p, z) in self.pairs.iter().zip(&self.z) {
            counts[p.period - 1][*z] += 1.0;
        }
        let pis = counts
            .iter()
            .map(|c| {
                let a: Vec<f64> = c.iter().zip(&self.cfg.alpha).map(|(m, a)| m + a).collect();
                sample_dirichlet(&a, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let components = (0..k)
            .map(|c| {
                let members = self.x.iter().zip(&self.z).filter(|(_, z)| **z == c).map(|(x, _)| x);
                let post = niw_posterior(members, &self.cfg.niw);
                sample_niw(&post, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MixtureParams { pis, components })
    }

    fn update_pair(&self, params: &MixtureParams, i: usize) -> Result<(usize, DVector<f64>)> {
        let pair = &self.pairs[i];
        let mut rng = self.rng.substream(TAG_PAIRS).substream2(self.iteration, i as u64).rng();
        let w = responsibilities(&self.x[i], params, pair.period)?;
        let z = sample_categorical(&w, &mut rng)?;
        let x = sample_truncated_mvn(&params.components[z], &pair.g, &pair.r, &mut rng)
            .map_err(|e| e.with_pair(&pair.pair_id))?;
        Ok((z, x))
    }

    /// One sweep: weights, components, then per-pair assignment and latent
    /// imputation.
    pub fn step(&mut self) -> Result<()> {
        let params = self.draw_params()?;
        let updates: Vec<(usize, DVector<f64>)> = {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                (0..self.pairs.len()).into_par_iter().map(|i| self.update_pair(&params, i)).collect::<Result<_>>()?
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..self.pairs.len()).map(|i| self.update_pair(&params, i)).collect::<Result<_>>()?
            }
        };
        for (i, (z, x)) in updates.into_iter().enumerate() {
            self.z[i] = z;
            self.x[i] = x;
        }
        self.params = Some(params);
        self.iteration += 1;
        Ok(())
    }
}

/// Runs `d1` burn-in and `d2` stored iterations and returns the stored
/// parameter draws.
pub fn gibbs_fit(dataset: &Dataset, cfg: &FitConfig, rng: RngState) -> Result<PosteriorSamples> {
    gibbs_fit_with_progress(dataset, cfg, rng, &mut |_, _| {})
}

/// [`gibbs_fit`] reporting `(iterations done, total)` after each sweep.
pub fn gibbs_fit_with_progress(
    dataset: &Dataset,
    cfg: &FitConfig,
    rng: RngState,
    progress: &mut dyn FnMut(usize, usize),
) -> Result<PosteriorSamples> {
    cfg.validate()?;
    let standardizer = fit_standardizer(&dataset.pairs, dataset.route.n_links())?;
    let mut sampler = GibbsSampler::new(dataset, cfg.clone(), &standardizer, rng)?;
    let total = cfg.d1 + cfg.d2;
    let mut draws = Vec::with_capacity(cfg.d2);
    for it in 0..total {
        sampler.step()?;
        if it >= cfg.d1 {
            draws.push(sampler.params.clone().expect("set by step"));
        }
        progress(it + 1, total);
    }
    Ok(PosteriorSamples {
        draws,
        standardizer,
        fit_config: cfg.clone(),
        route: dataset.route.clone(),
        period_config: dataset.period_config,
    })
}
