use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pair::{coordinate_label, BusPairObservation};

/// Per-coordinate affine map `x̃ = (x − m) / s` on the augmented variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    means: DVector<f64>,
    sds: DVector<f64>,
}

impl Standardizer {
    pub fn new(means: DVector<f64>, sds: DVector<f64>) -> Result<Self> {
        if means.len() != sds.len() {
            return Err(Error::DimensionMismatch { expected: means.len(), found: sds.len() });
        }
        if sds.iter().any(|s| !(*s > 0.0 && s.is_finite())) || means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParams("standardizer sds must be positive and finite".to_string()));
        }
        Ok(Standardizer { means, sds })
    }

    pub fn identity(dim: usize) -> Self {
        Standardizer { means: DVector::zeros(dim), sds: DVector::from_element(dim, 1.0) }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &DVector<f64> {
        &self.means
    }

    pub fn sds(&self) -> &DVector<f64> {
        &self.sds
    }

    /// Standardizes a raw-scale vector over the listed coordinates.
    pub fn to_std(&self, x: &DVector<f64>, coords: &[usize]) -> DVector<f64> {
        DVector::from_fn(coords.len(), |i, _| (x[i] - self.means[coords[i]]) / self.sds[coords[i]])
    }

    /// Maps a standardized vector over the listed coordinates to seconds.
    pub fn to_raw(&self, x: &DVector<f64>, coords: &[usize]) -> DVector<f64> {
        DVector::from_fn(coords.len(), |i, _| x[i] * self.sds[coords[i]] + self.means[coords[i]])
    }

    /// `G̃ = G·D`, `r̃ = r − G·m` with `D`, `m` restricted to `coords`.
    pub fn transform_system(
        &self,
        g: &DMatrix<f64>,
        r: &DVector<f64>,
        coords: &[usize],
    ) -> (DMatrix<f64>, DVector<f64>) {
        let m = DVector::from_fn(coords.len(), |i, _| self.means[coords[i]]);
        let gt = DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| g[(i, j)] * self.sds[coords[j]]);
        let rt = if g.nrows() == 0 { r.clone() } else { r - g * m };
        (gt, rt)
    }
}

/// Per-coordinate sample mean and SD from directly observed entries.
/// Ragged sums do not contribute.
pub fn fit_standardizer(pairs: &[BusPairObservation], n_links: usize) -> Result<Standardizer> {
    let dim = 3 * n_links;
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); dim];
    for p in pairs {
        for (c, v) in p.direct_observations() {
            values[c].push(v);
        }
    }
    let mut means = DVector::zeros(dim);
    let mut sds = DVector::zeros(dim);
    for (c, vals) in values.iter().enumerate() {
        if vals.len() < 2 {
            return Err(Error::InsufficientData {
                coordinate: coordinate_label(n_links, c),
                reason: "fewer than two direct observations",
            });
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let sd = libm::sqrt(var);
        if !(sd > 1e-9 * (1.0 + mean.abs())) {
            return Err(Error::InsufficientData { coordinate: coordinate_label(n_links, c), reason: "zero spread" });
        }
        means[c] = mean;
        sds[c] = sd;
    }
    Standardizer::new(means, sds)
}

/// Standardized copy of a raw-scale pair.
pub fn transform_pair(obs: &BusPairObservation, s: &Standardizer) -> BusPairObservation {
    let (g, r) = s.transform_system(&obs.g, &obs.r, &obs.coords);
    BusPairObservation { g, r, ..obs.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pair::{build_augmented_pair, HeadwaySeries, LinkSlot, LinkTimeSeries, RaggedGroup};
    use crate::rng::RngState;
    use rand::Rng;

    fn full_pair(f: &[f64], l: &[f64], h1: f64) -> BusPairObservation {
        let mut h = vec![h1];
        for j in 0..f.len() - 1 {
            h.push(h[j] + f[j] - l[j]);
        }
        build_augmented_pair(
            "p",
            &LinkTimeSeries::observed("l", 0, l).unwrap(),
            &LinkTimeSeries::observed("f", 0, f).unwrap(),
            &HeadwaySeries::new(h.into_iter().map(Some).collect()).unwrap(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn two_point_moments() {
        let pairs = [full_pair(&[100.0, 50.0], &[80.0, 40.0], 300.0), full_pair(&[120.0, 70.0], &[90.0, 45.0], 320.0)];
        let s = fit_standardizer(&pairs, 2).unwrap();
        assert!((s.means()[0] - 110.0).abs() < 1e-12);
        assert!((s.sds()[0] - 14.142_135_623_730_95).abs() < 1e-9);
    }

    #[test]
    fn constant_coordinate_rejected() {
        let pairs = [
            full_pair(&[60.0, 50.0], &[80.0, 40.0], 300.0),
            full_pair(&[60.0, 70.0], &[90.0, 45.0], 320.0),
            full_pair(&[60.0, 75.0], &[85.0, 46.0], 310.0),
        ];
        match fit_standardizer(&pairs, 2) {
            Err(Error::InsufficientData { coordinate, .. }) => assert_eq!(coordinate, "following_link_1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identity_leaves_system_unchanged() {
        let p = full_pair(&[100.0, 50.0], &[80.0, 40.0], 300.0);
        let t = transform_pair(&p, &Standardizer::identity(6));
        assert_eq!(t, p);
    }

    #[test]
    fn full_observation_solves_to_z_scores() {
        let p = full_pair(&[100.0, 50.0], &[80.0, 40.0], 300.0);
        let s = Standardizer::new(
            DVector::from_vec(vec![90.0, 40.0, 70.0, 30.0, 250.0, 260.0]),
            DVector::from_vec(vec![10.0, 5.0, 2.0, 4.0, 25.0, 50.0]),
        )
        .unwrap();
        let t = transform_pair(&p, &s);
        let z: Vec<f64> = (0..6).map(|i| (p.r[i] - s.means()[i]) / s.sds()[i]).collect();
        for i in 0..6 {
            assert!((t.r[i] - (p.r[i] - s.means()[i])).abs() < 1e-12);
            assert!((t.g[(i, i)] - s.sds()[i]).abs() < 1e-12);
        }
        // G̃x̃ = r̃ solved directly recovers the z-scores.
        let xt = t.g.clone().lu().solve(&t.r).unwrap();
        for i in 0..6 {
            assert!((xt[i] - z[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn ragged_system_round_trips_solutions() {
        let leading = LinkTimeSeries::observed("lead", 0, &[100.0, 120.0, 110.0, 130.0]).unwrap();
        let following = LinkTimeSeries::new(
            "follow",
            300,
            vec![LinkSlot::Observed(110.0), LinkSlot::Ragged(0), LinkSlot::Ragged(0), LinkSlot::Observed(140.0)],
            vec![RaggedGroup { start: 1, len: 2, total: 240.0 }],
        )
        .unwrap();
        let headways = HeadwaySeries::new(vec![Some(300.0), Some(310.0), None, Some(320.0)]).unwrap();
        let p = build_augmented_pair("p", &leading, &following, &headways, 1).unwrap();
        let mut rng = RngState::new(5).rng();
        for _ in 0..20 {
            let s = Standardizer::new(
                DVector::from_fn(12, |_, _| rng.random_range(-200.0..200.0)),
                DVector::from_fn(12, |_, _| rng.random_range(0.5..60.0)),
            )
            .unwrap();
            // Any raw solution: the true x plus a multiple of the null direction.
            let a = rng.random_range(-50.0..50.0);
            let x = DVector::from_vec(vec![
                110.0, 120.0 + a, 120.0 - a, 140.0, 100.0, 120.0, 110.0, 130.0, 300.0, 310.0, 310.0 + a, 320.0,
            ]);
            assert!(crate::linalg::residual_inf(&p.g, &x, &p.r) < 1e-9);
            let t = transform_pair(&p, &s);
            let xt = s.to_std(&x, &p.coords);
            assert!(crate::linalg::residual_inf(&t.g, &xt, &t.r) < 1e-9);
            let back = s.to_raw(&xt, &p.coords);
            assert!((back - &x).amax() < 1e-10 * x.amax());
            // And a standardized solution maps back to a raw solution.
            let xs = crate::linalg::min_norm_solution(&t.g, &t.r).unwrap();
            let xr = s.to_raw(&xs, &p.coords);
            assert!(crate::linalg::residual_inf(&p.g, &xr, &p.r) < 1e-7);
        }
    }
}
