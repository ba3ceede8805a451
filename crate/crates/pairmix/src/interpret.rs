//! Cluster summaries written alongside a fitted posterior: mixing weights
//! per period, component means and component correlation matrices.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use pairmix_core::inference::{MixtureParams, PosteriorSamples};
use pairmix_core::pair::coordinate_label;
use pairmix_core::synth::align_means;

/// Draws relabelled to match the last stored draw. Large K is left as is.
pub fn aligned_draws(post: &PosteriorSamples) -> Vec<MixtureParams> {
    let Some(reference) = post.draws.last() else {
        return Vec::new();
    };
    let ref_mus: Vec<DVector<f64>> = reference.components.iter().map(|c| c.mu().clone()).collect();
    post.draws
        .iter()
        .map(|d| {
            let mus: Vec<DVector<f64>> = d.components.iter().map(|c| c.mu().clone()).collect();
            match align_means(&mus, &ref_mus) {
                Ok(a) => d.permuted(&a.perm),
                Err(_) => d.clone(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interpretation {
    /// `weights[t][k]` as (mean, sd) over draws.
    pub weights: Vec<Vec<(f64, f64)>>,
    /// Standardized component means.
    pub means: Vec<DVector<f64>>,
    /// Raw-scale (seconds) component means.
    pub raw_means: Vec<DVector<f64>>,
    pub correlations: Vec<DMatrix<f64>>,
    pub labels: Vec<String>,
}

fn mean_sd(vals: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = vals.clone().count() as f64;
    let m = vals.clone().sum::<f64>() / n;
    let var = if n > 1.0 { vals.map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var.sqrt())
}

pub fn interpret(post: &PosteriorSamples) -> Interpretation {
    let draws = aligned_draws(post);
    let coords = post.coords();
    let n = post.route.n_links();
    let (k, periods) = (post.k(), post.periods());
    let weights = (0..periods)
        .map(|t| (0..k).map(|c| mean_sd(draws.iter().map(move |d| d.pis[t][c]))).collect())
        .collect();
    let d2 = draws.len() as f64;
    let mut means = Vec::with_capacity(k);
    let mut correlations = Vec::with_capacity(k);
    for c in 0..k {
        let mu = draws.iter().fold(DVector::zeros(coords.len()), |acc, d| acc + d.components[c].mu()) / d2;
        let sigma = draws.iter().fold(DMatrix::zeros(coords.len(), coords.len()), |acc, d| acc + d.components[c].sigma()) / d2;
        let sd = sigma.diagonal().map(f64::sqrt);
        correlations.push(DMatrix::from_fn(sigma.nrows(), sigma.ncols(), |i, j| sigma[(i, j)] / (sd[i] * sd[j])));
        means.push(mu);
    }
    let raw_means = means.iter().map(|m| post.standardizer.to_raw(m, &coords)).collect();
    Interpretation { weights, means, raw_means, correlations, labels: coords.iter().map(|&c| coordinate_label(n, c)).collect() }
}

impl Interpretation {
    pub fn weights_tsv(&self) -> String {
        let mut s = String::from("period\tcomponent\tweight_mean\tweight_sd\n");
        for (t, row) in self.weights.iter().enumerate() {
            for (c, (m, sd)) in row.iter().enumerate() {
                let _ = writeln!(s, "{}\t{}\t{m}\t{sd}", t + 1, c + 1);
            }
        }
        s
    }

    pub fn means_tsv(&self) -> String {
        let mut s = String::from("component\tcoordinate\tmean_std\tmean_seconds\n");
        for (c, (m, raw)) in self.means.iter().zip(&self.raw_means).enumerate() {
            for (i, label) in self.labels.iter().enumerate() {
                let _ = writeln!(s, "{}\t{label}\t{}\t{}", c + 1, m[i], raw[i]);
            }
        }
        s
    }

    pub fn correlations_tsv(&self) -> String {
        let mut s = String::from("component\tcoordinate");
        for l in &self.labels {
            s.push('\t');
            s.push_str(l);
        }
        s.push('\n');
        for (c, m) in self.correlations.iter().enumerate() {
            for (i, label) in self.labels.iter().enumerate() {
                let _ = write!(s, "{}\t{label}", c + 1);
                for j in 0..m.ncols() {
                    let _ = write!(s, "\t{}", m[(i, j)]);
                }
                s.push('\n');
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pairmix_core::inference::{FitConfig, ModelVariant, Standardizer};
    use pairmix_core::stats::GaussianComponent;
    use pairmix_core::{PeriodConfig, RouteSpec};

    fn comp(m: f64, dim: usize) -> GaussianComponent {
        let mut s = DMatrix::identity(dim, dim) * 4.0;
        s[(0, 1)] = 2.0;
        s[(1, 0)] = 2.0;
        GaussianComponent::new(DVector::from_element(dim, m), s).unwrap()
    }

    fn posterior(draws: Vec<MixtureParams>) -> PosteriorSamples {
        let dim = 6;
        PosteriorSamples {
            draws,
            standardizer: Standardizer::new(DVector::from_element(dim, 100.0), DVector::from_element(dim, 10.0)).unwrap(),
            fit_config: FitConfig::new(2, 2, ModelVariant::C),
            route: RouteSpec::with_links("R", 2).unwrap(),
            period_config: PeriodConfig::new(0, 60, 1).unwrap(),
        }
    }

    #[test]
    fn switched_labels_are_undone() {
        let a = MixtureParams { pis: vec![vec![0.3, 0.7]], components: vec![comp(-1.0, 6), comp(1.0, 6)] };
        let b = a.permuted(&[1, 0]);
        let it = interpret(&posterior(vec![a.clone(), b, a]));
        assert_eq!(it.weights[0][0], (0.3, 0.0));
        assert_eq!(it.means[0][0], -1.0);
        assert_eq!(it.raw_means[1][0], 110.0);
        assert!((it.correlations[0][(0, 1)] - 0.5).abs() < 1e-15);
        assert_eq!(it.correlations[0][(2, 2)], 1.0);
    }

    #[test]
    fn tables_have_one_row_per_entry() {
        let a = MixtureParams { pis: vec![vec![0.5, 0.5]], components: vec![comp(0.0, 6), comp(2.0, 6)] };
        let it = interpret(&posterior(vec![a]));
        assert_eq!(it.weights_tsv().lines().count(), 1 + 2);
        assert_eq!(it.means_tsv().lines().count(), 1 + 12);
        let corr = it.correlations_tsv();
        assert_eq!(corr.lines().count(), 1 + 12);
        assert!(corr.starts_with("component\tcoordinate\tfollowing_link_1"));
    }
}
