#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pairmix_core::inference::{FitConfig, MixtureParams, ModelVariant, PosteriorSamples, Standardizer};
use pairmix_core::stats::GaussianComponent;
use pairmix_core::synth::lift_matrix;
use pairmix_core::{PeriodConfig, RngState, RouteSpec};
use rand_distr::{Distribution, StandardNormal};

/// A 3n-dimensional component living near the headway hyperplane, built
/// from a random free-coordinate covariance plus a small isotropic part.
pub fn random_component(n: usize, seed: u64) -> GaussianComponent {
    let mut rng = RngState::new(seed).rng();
    let d = 2 * n + 1;
    let a: DMatrix<f64> = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    let free = &a * a.transpose() / d as f64 + DMatrix::identity(d, d) * 0.3;
    let lift = lift_matrix(n);
    let sigma = &lift * free * lift.transpose() + DMatrix::identity(3 * n, 3 * n) * 0.05;
    let mu = DVector::from_fn(3 * n, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        0.3 * z
    });
    GaussianComponent::new(mu, sigma).unwrap()
}

/// A posterior whose every stored draw is the same fixed mixture.
pub fn fixed_posterior(
    n: usize,
    components: Vec<GaussianComponent>,
    pis: Vec<Vec<f64>>,
    draws: usize,
    standardizer: Standardizer,
) -> PosteriorSamples {
    let k = components.len();
    let periods = pis.len();
    let params = MixtureParams { pis, components };
    let mut cfg = FitConfig::new(k, n, ModelVariant::C);
    cfg.d1 = 1;
    cfg.d2 = draws;
    PosteriorSamples {
        draws: vec![params; draws],
        standardizer,
        fit_config: cfg,
        route: RouteSpec::with_links("R", n).unwrap(),
        period_config: PeriodConfig::new(6 * 3600, 60, periods).unwrap(),
    }
}

/// Seconds-scale standardizer with link means near 120 s.
pub fn route_standardizer(n: usize) -> Standardizer {
    let means = DVector::from_fn(3 * n, |i, _| if i < 2 * n { 120.0 + i as f64 } else { 300.0 });
    let sds = DVector::from_fn(3 * n, |i, _| if i < 2 * n { 15.0 } else { 40.0 });
    Standardizer::new(means, sds).unwrap()
}
