use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::system::ForecastSystem;
use crate::error::{Error, Result};
use crate::inference::{PosteriorSamples, Standardizer};
use crate::linalg::{chol_solve, chol_solve_mat, cholesky_strict, symmetrize};
use crate::metrics::{quantile_sorted, DensityEvaluator};
use crate::pair::{coordinate_label, LinkSlot, LinkTimeSeries};
use crate::rng::RngState;
use crate::stats::{log_mvn_pdf_chol, log_normal_pdf, log_sum_exp, project_onto_constraints, sample_categorical, sample_mvn};

/// Quantile levels reported in every summary.
pub const QUANTILE_LEVELS: [f64; 6] = [0.10, 0.25, 0.40, 0.60, 0.75, 0.90];

/// A forecast quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Following-bus link, 0-based.
    Link(usize),
    /// Travel time between 1-based stops `from < to`.
    Trip { from: usize, to: usize },
}

impl Target {
    pub fn label(&self, n_links: usize) -> String {
        match *self {
            Target::Link(j) => coordinate_label(n_links, j),
            Target::Trip { from, to } => format!("trip_{from}_{to}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSummary {
    pub mean: f64,
    pub sd: f64,
    /// At [`QUANTILE_LEVELS`].
    pub quantiles: [f64; 6],
    /// Share of samples below zero.
    pub negative_fraction: f64,
}

impl TargetSummary {
    pub fn from_samples(samples: &[f64]) -> Self {
        let m = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / m;
        let constant = samples.iter().all(|v| *v == samples[0]);
        let sd = if constant || samples.len() < 2 {
            0.0
        } else {
            libm::sqrt(samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0))
        };
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut quantiles = [0.0; 6];
        for (q, p) in quantiles.iter_mut().zip(QUANTILE_LEVELS) {
            *q = quantile_sorted(&sorted, p);
        }
        TargetSummary {
            mean: if constant { samples[0] } else { mean },
            sd,
            quantiles,
            negative_fraction: samples.iter().filter(|v| **v < 0.0).count() as f64 / m,
        }
    }
}

/// Mixture of Gaussians over the targets, one term per (draw, component),
/// on the raw scale. This is the Rao-Blackwellized predictive density.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMixture {
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
}

/// Variance floor for targets that the constraints pin exactly.
const VAR_FLOOR: f64 = 1e-9;

impl ConditionalMixture {
    /// Log-density of target `idx` alone at `y`.
    pub fn log_density_marginal(&self, idx: usize, y: f64) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(self.means.iter().zip(&self.covs))
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, (m, c))| libm::log(*w) + log_normal_pdf(y, m[idx], c[(idx, idx)].max(VAR_FLOOR)))
            .collect();
        log_sum_exp(&terms)
    }

    /// Joint log-density of all targets at `y`.
    pub fn log_density_joint(&self, y: &DVector<f64>) -> f64 {
        let mut terms = Vec::with_capacity(self.weights.len());
        for (w, (m, c)) in self.weights.iter().zip(self.means.iter().zip(&self.covs)) {
            if *w <= 0.0 {
                continue;
            }
            let mut c = c.clone();
            let floor = VAR_FLOOR * (1.0 + c.diagonal().amax());
            for i in 0..c.nrows() {
                c[(i, i)] += floor;
            }
            match cholesky_strict(&c) {
                Some(l) => terms.push(libm::log(*w) + log_mvn_pdf_chol(y, m, &l)),
                None => terms.push(f64::NEG_INFINITY),
            }
        }
        log_sum_exp(&terms)
    }

    /// The mixture of `aᵀX + c`.
    pub fn linear(&self, a: &DVector<f64>, c: f64) -> ConditionalMixture {
        ConditionalMixture {
            weights: self.weights.clone(),
            means: self.means.iter().map(|m| DVector::from_element(1, a.dot(m) + c)).collect(),
            covs: self.covs.iter().map(|s| DMatrix::from_element(1, 1, (s * a).dot(a))).collect(),
        }
    }
}

/// Univariate view of one target of a [`ConditionalMixture`].
pub struct MarginalDensity<'a> {
    pub mixture: &'a ConditionalMixture,
    pub index: usize,
}

impl DensityEvaluator for MarginalDensity<'_> {
    fn log_density(&self, y: f64) -> f64 {
        self.mixture.log_density_marginal(self.index, y)
    }
}

/// Predictive draws over the targets with their summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDistribution {
    pub pair_id: String,
    pub n_links: usize,
    pub targets: Vec<Target>,
    /// One row per stored posterior draw, seconds.
    pub samples: DMatrix<f64>,
    pub summary: Vec<TargetSummary>,
    pub mixture: ConditionalMixture,
}

impl PredictiveDistribution {
    fn new(pair_id: String, n_links: usize, targets: Vec<Target>, samples: DMatrix<f64>, mixture: ConditionalMixture) -> Self {
        let summary = (0..samples.ncols())
            .map(|c| TargetSummary::from_samples(samples.column(c).as_slice()))
            .collect();
        PredictiveDistribution { pair_id, n_links, targets, samples, summary, mixture }
    }

    pub fn labels(&self) -> Vec<String> {
        self.targets.iter().map(|t| t.label(self.n_links)).collect()
    }

    pub fn column_of(&self, target: Target) -> Option<usize> {
        self.targets.iter().position(|t| *t == target)
    }

    pub fn target_samples(&self, idx: usize) -> Vec<f64> {
        self.samples.column(idx).iter().copied().collect()
    }

    pub fn marginal(&self, idx: usize) -> MarginalDensity<'_> {
        MarginalDensity { mixture: &self.mixture, index: idx }
    }
}

struct DrawOutcome {
    x_std: DVector<f64>,
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covs: Vec<DMatrix<f64>>,
}

fn raw_target_moments(
    s: &Standardizer,
    coords: &[usize],
    targets: &[usize],
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let sd = |i: usize| s.sds()[coords[targets[i]]];
    let m = DVector::from_fn(targets.len(), |i, _| mean[targets[i]] * sd(i) + s.means()[coords[targets[i]]]);
    let c = DMatrix::from_fn(targets.len(), targets.len(), |i, j| cov[(targets[i], targets[j])] * sd(i) * sd(j));
    (m, c)
}

fn draw_one(posterior: &PosteriorSamples, system: &ForecastSystem, rho: usize, rng: RngState) -> Result<DrawOutcome> {
    let params = &posterior.draws[rho];
    let (g, r) = system.standardized(&posterior.standardizer, rho);
    let tc = &system.target_columns;
    let mut logs = Vec::with_capacity(params.k());
    let mut means = Vec::with_capacity(params.k());
    let mut covs = Vec::with_capacity(params.k());
    for (comp, pi) in params.components.iter().zip(&params.pis[system.period - 1]) {
        let (log_lik, mean, cov) = if g.nrows() == 0 {
            (0.0, comp.mu().clone(), comp.sigma().clone())
        } else {
            let sigma_gt = comp.sigma() * g.transpose();
            let mut s = &g * &sigma_gt;
            symmetrize(&mut s);
            let l = cholesky_strict(&s).ok_or_else(|| Error::singular().with_pair(&system.pair_id))?;
            let gmu = &g * comp.mu();
            let alpha = chol_solve(&l, &(&r - &gmu));
            let mean = comp.mu() + &sigma_gt * alpha;
            let a = DMatrix::from_fn(tc.len(), g.nrows(), |i, j| sigma_gt[(tc[i], j)]);
            let sub = DMatrix::from_fn(tc.len(), tc.len(), |i, j| comp.sigma()[(tc[i], tc[j])]);
            let cov_t = sub - &a * chol_solve_mat(&l, &a.transpose());
            // Only target rows/cols are needed; embed at their positions.
            let mut cov = DMatrix::zeros(comp.dim(), comp.dim());
            for (i, &ti) in tc.iter().enumerate() {
                for (j, &tj) in tc.iter().enumerate() {
                    cov[(ti, tj)] = cov_t[(i, j)];
                }
            }
            (log_mvn_pdf_chol(&r, &gmu, &l), mean, cov)
        };
        logs.push(libm::log(*pi) + log_lik);
        let (m, c) = raw_target_moments(&posterior.standardizer, &system.coords, tc, &mean, &cov);
        means.push(m);
        covs.push(c);
    }
    let weights = crate::inference::normalize_log_weights(&logs);
    let mut rng = rng.rng();
    let z = sample_categorical(&weights, &mut rng)?;
    let u = sample_mvn(&params.components[z], &mut rng);
    let x_std = project_onto_constraints(&params.components[z], &g, &r, u).map_err(|e| e.with_pair(&system.pair_id))?;
    Ok(DrawOutcome { x_std, weights, means, covs })
}

fn run_draws(posterior: &PosteriorSamples, system: &ForecastSystem, rng: RngState) -> Result<Vec<DrawOutcome>> {
    if system.coords != posterior.coords() {
        return Err(Error::DimensionMismatch { expected: posterior.coords().len(), found: system.coords.len() });
    }
    if system.period == 0 || system.period > posterior.periods() {
        return Err(Error::IndexOutOfRange { index: system.period, valid: "1 <= t <= T" });
    }
    let work = |rho: usize| draw_one(posterior, system, rho, rng.substream(rho as u64));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..posterior.draws.len()).into_par_iter().map(work).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..posterior.draws.len()).map(work).collect()
    }
}

/// Full standardized predictive draws over the variant's coordinates, one
/// per stored posterior draw. Draw `ρ` satisfies `system.standardized(_, ρ)`.
pub fn sample_predictive(posterior: &PosteriorSamples, system: &ForecastSystem, rng: RngState) -> Result<Vec<DVector<f64>>> {
    Ok(run_draws(posterior, system, rng)?.into_iter().map(|d| d.x_std).collect())
}

/// Predictive distribution of the system's targets: for each stored draw,
/// pick a component by its marginal likelihood of the constraints, then
/// draw the latent vector on the constraint set.
pub fn forecast_pair(posterior: &PosteriorSamples, system: &ForecastSystem, rng: RngState) -> Result<PredictiveDistribution> {
    let draws = run_draws(posterior, system, rng)?;
    let s = &posterior.standardizer;
    let tc = &system.target_columns;
    let samples = DMatrix::from_fn(draws.len(), tc.len(), |rho, i| {
        let c = system.coords[tc[i]];
        draws[rho].x_std[tc[i]] * s.sds()[c] + s.means()[c]
    });
    let d2 = draws.len() as f64;
    let mut mixture = ConditionalMixture { weights: vec![], means: vec![], covs: vec![] };
    for d in draws {
        for ((w, m), c) in d.weights.into_iter().zip(d.means).zip(d.covs) {
            mixture.weights.push(w / d2);
            mixture.means.push(m);
            mixture.covs.push(c);
        }
    }
    let targets = tc.iter().map(|&c| Target::Link(system.coords[c])).collect();
    Ok(PredictiveDistribution::new(system.pair_id.clone(), system.n_links, targets, samples, mixture))
}

/// Travel time from stop `j1` to stop `j2` (1-based): observed links enter
/// as constants, the rest from the predictive samples.
pub fn trip_time_distribution(
    pred: &PredictiveDistribution,
    j1: usize,
    j2: usize,
    observed: &LinkTimeSeries,
) -> Result<PredictiveDistribution> {
    let n = observed.n_links();
    if j1 == 0 || j1 >= j2 || j2 > n + 1 {
        return Err(Error::RangeError { j1, j2 });
    }
    let mut constant = 0.0;
    let mut a = DVector::zeros(pred.targets.len());
    for j in (j1 - 1)..(j2 - 1) {
        match (observed.entries()[j], pred.column_of(Target::Link(j))) {
            (LinkSlot::Observed(v), _) => constant += v,
            (_, Some(c)) => a[c] += 1.0,
            _ => return Err(Error::RangeError { j1, j2 }),
        }
    }
    let samples = DMatrix::from_fn(pred.samples.nrows(), 1, |rho, _| constant + pred.samples.row(rho).transpose().dot(&a));
    let mixture = pred.mixture.linear(&a, constant);
    Ok(PredictiveDistribution::new(
        pred.pair_id.clone(),
        pred.n_links,
        vec![Target::Trip { from: j1, to: j2 }],
        samples,
        mixture,
    ))
}
