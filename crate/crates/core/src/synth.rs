//! Synthetic ground truth, data generation, and brute-force oracles.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::inference::MixtureParams;
use crate::pair::{Dataset, RouteSpec};
use crate::rng::RngState;
use crate::stats::{sample_categorical, sample_mvn, sample_truncated_mvn, GaussianComponent};
use crate::trajectory::{build_dataset, PeriodConfig, Trajectory, SECONDS_PER_DAY};

/// 2016-12-01 as days since the epoch.
pub const DEFAULT_BASE_DAY: i64 = 17_136;

/// How pair labels are drawn within a period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Assignment {
    /// Independent categorical draws from `π^t`.
    #[default]
    Categorical,
    /// Exactly `round(π_k^t · M^t)` pairs per component, shuffled.
    Stratified,
}

/// A component on the free coordinates `[ℓ_i | ℓ_{i−1} | h_{i,1}]`
/// (dimension `2n + 1`), in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeComponent {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub route: RouteSpec,
    pub period_config: PeriodConfig,
    /// `pis[t - 1]` are the true weights of period `t`.
    pub pis: Vec<Vec<f64>>,
    pub components: Vec<FreeComponent>,
    pub pairs_per_period: Vec<usize>,
    /// Drop rate of last-stop arrivals, which leaves the final links
    /// missing. First-stop arrivals are always kept so that dispatch order
    /// is observable.
    pub missing_rate: f64,
    /// Drop rate of interior arrivals, which creates ragged sums.
    pub ragged_rate: f64,
    pub assignment: Assignment,
    /// Buses per same-day chain; 2 gives independent pairs.
    pub chain_length: usize,
    pub base_day: i64,
    pub seed: u64,
}

/// Linear map from free coordinates to the augmented `3n` vector:
/// `h_{j+1} = h_j + ℓ_{i,j} − ℓ_{i−1,j}`.
pub fn lift_matrix(n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(3 * n, 2 * n + 1);
    for j in 0..2 * n {
        a[(j, j)] = 1.0;
    }
    for j in 0..n {
        a[(2 * n + j, 2 * n)] = 1.0;
        for i in 0..j {
            a[(2 * n + j, i)] += 1.0;
            a[(2 * n + j, n + i)] -= 1.0;
        }
    }
    a
}

/// Parameters of the structured generator used by the simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredSpec {
    pub n_links: usize,
    pub k: usize,
    pub periods: usize,
    pub pairs_per_period: usize,
    pub link_mean: f64,
    pub link_sd: f64,
    /// Added to every link mean per component index.
    pub separation: f64,
    /// Correlation between the two buses' times on the same link.
    pub cross_corr: f64,
    /// Lag-one correlation between a bus's consecutive links.
    pub within_corr: f64,
    pub headway_mean: f64,
    pub headway_sd: f64,
    pub missing_rate: f64,
    pub ragged_rate: f64,
    pub chain_length: usize,
    pub assignment: Assignment,
    pub seed: u64,
}

impl Default for StructuredSpec {
    fn default() -> Self {
        StructuredSpec {
            n_links: 4,
            k: 2,
            periods: 2,
            pairs_per_period: 200,
            link_mean: 120.0,
            link_sd: 15.0,
            separation: 60.0,
            cross_corr: 0.6,
            within_corr: 0.2,
            headway_mean: 300.0,
            headway_sd: 40.0,
            missing_rate: 0.1,
            ragged_rate: 0.1,
            chain_length: 2,
            assignment: Assignment::Categorical,
            seed: 1,
        }
    }
}

/// Weights favouring a different component in each period.
pub fn rotating_weights(k: usize, periods: usize) -> Vec<Vec<f64>> {
    (0..periods)
        .map(|t| {
            let raw: Vec<f64> = (0..k).map(|c| if (c + t) % k == k - 1 { 3.0 } else { 1.0 }).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        })
        .collect()
}

impl GroundTruth {
    pub fn structured(spec: &StructuredSpec) -> Result<Self> {
        let n = spec.n_links;
        let d = 2 * n + 1;
        let mut cov = DMatrix::zeros(d, d);
        for a in 0..2 * n {
            for b in 0..2 * n {
                let (ja, jb) = (a % n, b % n);
                let lag = ja.abs_diff(jb) as i32;
                let same_bus = (a < n) == (b < n);
                let rho = libm::pow(spec.within_corr, lag as f64) * if same_bus { 1.0 } else { spec.cross_corr };
                cov[(a, b)] = rho * spec.link_sd * spec.link_sd;
            }
        }
        cov[(2 * n, 2 * n)] = spec.headway_sd * spec.headway_sd;
        let components = (0..spec.k)
            .map(|c| {
                let mut mean = DVector::from_element(d, spec.link_mean + c as f64 * spec.separation);
                mean[2 * n] = spec.headway_mean;
                FreeComponent { mean, cov: cov.clone() }
            })
            .collect();
        let gt = GroundTruth {
            route: RouteSpec::with_links("R1", n)?,
            period_config: PeriodConfig::new(6 * 3600, 60, spec.periods)?,
            pis: rotating_weights(spec.k, spec.periods),
            components,
            pairs_per_period: vec![spec.pairs_per_period; spec.periods],
            missing_rate: spec.missing_rate,
            ragged_rate: spec.ragged_rate,
            assignment: spec.assignment,
            chain_length: spec.chain_length,
            base_day: DEFAULT_BASE_DAY,
            seed: spec.seed,
        };
        gt.validate()?;
        Ok(gt)
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.route.n_links();
        let t = self.period_config.count;
        if self.components.is_empty() {
            return Err(Error::InvalidParams("ground truth needs at least one component".to_string()));
        }
        if self.pis.len() != t || self.pairs_per_period.len() != t {
            return Err(Error::LengthMismatch { left: self.pis.len(), right: t });
        }
        for p in &self.pis {
            if p.len() != self.k() || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 || p.iter().any(|v| *v < 0.0) {
                return Err(Error::NotASimplex { sum: p.iter().sum() });
            }
        }
        for c in &self.components {
            if c.mean.len() != 2 * n + 1 || c.cov.nrows() != 2 * n + 1 {
                return Err(Error::DimensionMismatch { expected: 2 * n + 1, found: c.mean.len() });
            }
            if crate::linalg::cholesky_strict(&c.cov).is_none() {
                return Err(Error::InvalidParams("true covariance must be positive definite".to_string()));
            }
        }
        for (name, rate) in [("missing_rate", self.missing_rate), ("ragged_rate", self.ragged_rate)] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::InvalidParams(format!("{name} must lie in [0, 1]")));
            }
            if rate >= 1.0 {
                return Err(Error::InvalidParams(format!("{name} = 1 leaves no usable observations")));
            }
        }
        if self.chain_length < 2 {
            return Err(Error::InvalidParams("chain_length must be at least 2".to_string()));
        }
        Ok(())
    }

    /// True means on the augmented scale (seconds).
    pub fn augmented_means(&self) -> Vec<DVector<f64>> {
        let a = lift_matrix(self.route.n_links());
        self.components.iter().map(|c| &a * &c.mean).collect()
    }

    /// True covariances on the augmented scale (rank `2n + 1`).
    pub fn augmented_covs(&self) -> Vec<DMatrix<f64>> {
        let a = lift_matrix(self.route.n_links());
        self.components.iter().map(|c| &a * &c.cov * a.transpose()).collect()
    }

    /// The truth as [`MixtureParams`] over an arbitrary affine rescaling
    /// `(x − shift) / scale`, e.g. a fitted standardizer. Covariances
    /// receive the minimal jitter needed to factorize.
    pub fn mixture(&self, shift: &DVector<f64>, scale: &DVector<f64>) -> Result<MixtureParams> {
        let components = self
            .augmented_means()
            .into_iter()
            .zip(self.augmented_covs())
            .map(|(m, c)| {
                let mu = DVector::from_fn(m.len(), |i, _| (m[i] - shift[i]) / scale[i]);
                let sigma = DMatrix::from_fn(m.len(), m.len(), |i, j| c[(i, j)] / (scale[i] * scale[j]));
                GaussianComponent::new(mu, sigma)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MixtureParams { pis: self.pis.clone(), components })
    }
}

/// The unmasked truth of one generated pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    pub pair_id: String,
    pub period: usize,
    /// 0-based true component.
    pub component: usize,
    /// Augmented vector in seconds, computed from the rounded timestamps.
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub truth: Vec<TruthRecord>,
    /// Masked trajectories in dispatch order.
    pub trajectories: Vec<Trajectory>,
    /// The same trajectories before masking.
    pub full_trajectories: Vec<Trajectory>,
}

const MAX_REDRAWS: usize = 10_000;

fn positive_links(y: &DVector<f64>, n: usize) -> bool {
    (0..2 * n).all(|j| y[j] >= 1.0)
}

fn free_gaussian(c: &FreeComponent) -> Result<GaussianComponent> {
    GaussianComponent::new(c.mean.clone(), c.cov.clone())
}

fn labels_for_period<R: Rng + ?Sized>(gt: &GroundTruth, t: usize, rng: &mut R) -> Result<Vec<usize>> {
    let m = gt.pairs_per_period[t];
    let pi = &gt.pis[t];
    match gt.assignment {
        Assignment::Categorical => (0..m).map(|_| sample_categorical(pi, rng)).collect(),
        Assignment::Stratified => {
            let raw: Vec<f64> = pi.iter().map(|p| p * m as f64).collect();
            let mut counts: Vec<usize> = raw.iter().map(|v| libm::floor(*v) as usize).collect();
            let mut order: Vec<usize> = (0..pi.len()).collect();
            order.sort_by(|&a, &b| (raw[b] - counts[b] as f64).total_cmp(&(raw[a] - counts[a] as f64)).then(a.cmp(&b)));
            let mut short = m - counts.iter().sum::<usize>();
            for &k in order.iter().cycle() {
                if short == 0 {
                    break;
                }
                counts[k] += 1;
                short -= 1;
            }
            let mut labels: Vec<usize> = counts.iter().enumerate().flat_map(|(k, c)| vec![k; *c]).collect();
            labels.shuffle(rng);
            Ok(labels)
        }
    }
}

fn mask<R: Rng + ?Sized>(arrivals: &[i64], gt: &GroundTruth, rng: &mut R) -> Vec<Option<i64>> {
    let last = arrivals.len() - 1;
    arrivals
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let rate = match j {
                0 => 0.0,
                _ if j == last => gt.missing_rate,
                _ => gt.ragged_rate,
            };
            if rng.random::<f64>() < rate { None } else { Some(*a) }
        })
        .collect()
}

/// Draws the pairs, their timestamps, and the masked observations.
///
/// Every chain of buses runs on its own service day, so adjacent-trip
/// pairing of the output reproduces exactly the generated pairs.
pub fn generate_dataset(gt: &GroundTruth) -> Result<SyntheticData> {
    gt.validate()?;
    let n = gt.route.n_links();
    let base = RngState::new(gt.seed);
    let comps: Vec<GaussianComponent> = gt.components.iter().map(free_gaussian).collect::<Result<_>>()?;
    // Conditioning on a known leading bus fixes the leading-link block.
    let g_lead = DMatrix::from_fn(n, 2 * n + 1, |i, j| if j == n + i { 1.0 } else { 0.0 });
    let period_len = gt.period_config.period_minutes as i64 * 60;
    let mut day = gt.base_day;
    let mut truth = Vec::new();
    let mut full = Vec::new();
    let mut masked = Vec::new();
    for t in 0..gt.period_config.count {
        let mut rng = base.substream2(0, t as u64).rng();
        let labels = labels_for_period(gt, t, &mut rng)?;
        for chain in labels.chunks(gt.chain_length - 1) {
            let mut crng = base.substream2(1, day as u64).rng();
            let start = day * SECONDS_PER_DAY
                + gt.period_config.period_start(t + 1)
                + crng.random_range(0..(period_len / 5).max(1));
            let mut lead_links: Option<DVector<f64>> = None;
            let mut lead_arr: Vec<i64> = Vec::new();
            let mut trips: Vec<(String, Vec<i64>)> = Vec::new();
            for (b, &z) in chain.iter().enumerate() {
                let mut y = None;
                for _ in 0..MAX_REDRAWS {
                    let cand = match &lead_links {
                        None => sample_mvn(&comps[z], &mut crng),
                        Some(l) => sample_truncated_mvn(&comps[z], &g_lead, l, &mut crng)?,
                    };
                    if positive_links(&cand, n) {
                        y = Some(cand);
                        break;
                    }
                }
                let y = y.ok_or_else(|| Error::InvalidParams("could not draw positive link times".to_string()))?;
                if b == 0 {
                    let mut arr = vec![start];
                    for j in 0..n {
                        arr.push(arr[j] + libm::round(y[n + j]).max(1.0) as i64);
                    }
                    lead_arr = arr;
                    trips.push((format!("D{day}-{b:02}"), lead_arr.clone()));
                }
                let mut follow = vec![lead_arr[0] + libm::round(y[2 * n]) as i64];
                for j in 0..n {
                    follow.push(follow[j] + libm::round(y[j]).max(1.0) as i64);
                }
                let x: Vec<f64> = (0..n)
                    .map(|j| (follow[j + 1] - follow[j]) as f64)
                    .chain((0..n).map(|j| (lead_arr[j + 1] - lead_arr[j]) as f64))
                    .chain((0..n).map(|j| (follow[j] - lead_arr[j]) as f64))
                    .collect();
                let lead_id = trips.last().expect("leader pushed").0.clone();
                let follow_id = format!("D{day}-{:02}", b + 1);
                truth.push(TruthRecord { pair_id: format!("{lead_id}>{follow_id}"), period: t + 1, component: z, x });
                lead_links = Some(DVector::from_fn(n, |j, _| (follow[j + 1] - follow[j]) as f64));
                lead_arr = follow.clone();
                trips.push((follow_id, follow));
            }
            for (b, (trip, arr)) in trips.into_iter().enumerate() {
                let vehicle = format!("V{b:02}");
                let m = mask(&arr, gt, &mut crng);
                full.push(Trajectory::new(vehicle.clone(), trip.clone(), arr.into_iter().map(Some).collect())?);
                masked.push(Trajectory::new(vehicle, trip, m)?);
            }
            day += 1;
        }
    }
    let build = build_dataset(&gt.route, &gt.period_config, masked.clone())?;
    if let Some(s) = build.skipped.first() {
        return Err(Error::InvalidParams(format!("generated pair {} unusable: {}", s.pair_id, s.reason)));
    }
    debug_assert!(build.dataset.pairs.iter().zip(&truth).all(|(p, t)| p.pair_id == t.pair_id));
    Ok(SyntheticData { dataset: build.dataset, truth, trajectories: masked, full_trajectories: full })
}

/// Exact first two moments of `N(μ, Σ)` conditioned on `Gx = r`, by dense
/// LU solves.
pub fn conditional_gaussian_oracle(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    g: &DMatrix<f64>,
    r: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if g.nrows() == 0 {
        return Ok((mu.clone(), sigma.clone()));
    }
    let s = g * sigma * g.transpose();
    let lu = s.lu();
    let sg = sigma * g.transpose();
    let beta = lu.solve(&(r - g * mu)).ok_or_else(Error::singular)?;
    let k = lu.solve(&sg.transpose()).ok_or_else(Error::singular)?;
    let mean = mu + &sg * beta;
    let mut cov = sigma - &sg * k;
    crate::linalg::symmetrize(&mut cov);
    Ok((mean, cov))
}

/// Label matching between estimated and true components.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// `perm[i]` is the estimated component matched to true component `i`.
    pub perm: Vec<usize>,
    /// Euclidean mean distance of each matched pair.
    pub distances: Vec<f64>,
    pub total: f64,
}

/// Minimum total Euclidean mean distance over all `K!` matchings.
pub fn align_means(estimated: &[DVector<f64>], truth: &[DVector<f64>]) -> Result<Alignment> {
    let k = truth.len();
    if estimated.len() != k {
        return Err(Error::KMismatch { left: estimated.len(), right: k });
    }
    if k > 8 {
        return Err(Error::InvalidParams("permutation search is limited to K <= 8".to_string()));
    }
    let dist = |i: usize, j: usize| (&estimated[j] - &truth[i]).norm();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    // Heap's algorithm over all permutations.
    let mut c = vec![0usize; k];
    let mut consider = |p: &[usize]| {
        let total: f64 = p.iter().enumerate().map(|(i, &j)| dist(i, j)).sum();
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, p.to_vec()));
        }
    };
    consider(&perm);
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 { perm.swap(0, i) } else { perm.swap(c[i], i) }
            consider(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    let (total, perm) = best.unwrap_or((0.0, Vec::new()));
    let distances = perm.iter().enumerate().map(|(i, &j)| dist(i, j)).collect();
    Ok(Alignment { perm, distances, total })
}

/// [`align_means`] on the component means of two mixtures.
pub fn permutation_align(estimated: &MixtureParams, truth: &MixtureParams) -> Result<Alignment> {
    let e: Vec<DVector<f64>> = estimated.components.iter().map(|c| c.mu().clone()).collect();
    let t: Vec<DVector<f64>> = truth.components.iter().map(|c| c.mu().clone()).collect();
    align_means(&e, &t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pair::headway_constraint_row;
    use rand_distr::{Distribution, StandardNormal};

    fn small_gt(missing: f64, ragged: f64) -> GroundTruth {
        GroundTruth::structured(&StructuredSpec {
            pairs_per_period: 30,
            missing_rate: missing,
            ragged_rate: ragged,
            ..StructuredSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn lift_satisfies_identities() {
        let n = 5;
        let a = lift_matrix(n);
        for j in 1..n {
            let row = DVector::from_vec(headway_constraint_row(j, n).unwrap());
            assert!((a.transpose() * row).amax() < 1e-15);
        }
    }

    #[test]
    fn unmasked_pairs_are_identity_systems() {
        let data = generate_dataset(&small_gt(0.0, 0.0)).unwrap();
        assert_eq!(data.dataset.pairs.len(), 60);
        for (p, t) in data.dataset.pairs.iter().zip(&data.truth) {
            assert_eq!(p.g, DMatrix::identity(12, 12));
            assert_eq!(p.r.as_slice(), t.x.as_slice());
            assert_eq!(p.period, t.period);
        }
    }

    #[test]
    fn truth_satisfies_identities_and_masks_are_consistent() {
        let data = generate_dataset(&small_gt(0.2, 0.3)).unwrap();
        for (p, t) in data.dataset.pairs.iter().zip(&data.truth) {
            let x = DVector::from_vec(t.x.clone());
            assert!(crate::linalg::residual_inf(&p.g, &x, &p.r) < 1e-9);
            for j in 1..4 {
                let row = DVector::from_vec(headway_constraint_row(j, 4).unwrap());
                assert_eq!(row.dot(&x), 0.0);
            }
            assert_eq!(p.period, t.period);
        }
        assert!(data.dataset.pairs.iter().any(|p| p.rows() < 12));
    }

    #[test]
    fn fixed_seed_reproduces() {
        assert_eq!(generate_dataset(&small_gt(0.1, 0.1)).unwrap(), generate_dataset(&small_gt(0.1, 0.1)).unwrap());
    }

    #[test]
    fn full_masking_rejected() {
        let mut gt = small_gt(0.0, 0.0);
        gt.missing_rate = 1.0;
        assert!(matches!(gt.validate(), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn chains_condition_on_the_leader() {
        let gt = GroundTruth::structured(&StructuredSpec { chain_length: 4, pairs_per_period: 9, ..StructuredSpec::default() })
            .unwrap();
        let data = generate_dataset(&gt).unwrap();
        assert_eq!(data.dataset.pairs.len(), 18);
        // Consecutive pairs in a chain share a bus.
        for w in data.truth.windows(2) {
            let a = w[0].pair_id.split('>').nth(1).unwrap();
            let b = w[1].pair_id.split('>').next().unwrap();
            if a == b {
                assert_eq!(&w[0].x[0..4], &w[1].x[4..8]);
            }
        }
    }

    #[test]
    fn stratified_counts_match_weights() {
        let gt = GroundTruth::structured(&StructuredSpec {
            assignment: Assignment::Stratified,
            pairs_per_period: 41,
            ..StructuredSpec::default()
        })
        .unwrap();
        let data = generate_dataset(&gt).unwrap();
        let in_p1: Vec<usize> = data.truth.iter().filter(|t| t.period == 1).map(|t| t.component).collect();
        let ones = in_p1.iter().filter(|c| **c == 1).count();
        assert_eq!(ones, 31); // round(0.75 · 41) by largest remainder
    }

    #[test]
    fn oracle_examples() {
        let (m, c) = conditional_gaussian_oracle(
            &DVector::from_vec(vec![1.0, 2.0]),
            &DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
            &DMatrix::identity(2, 2),
            &DVector::from_vec(vec![4.0, 5.0]),
        )
        .unwrap();
        assert!((m - DVector::from_vec(vec![4.0, 5.0])).amax() < 1e-12);
        assert!(c.amax() < 1e-12);
        let (m, c) = conditional_gaussian_oracle(
            &DVector::zeros(2),
            &DMatrix::identity(2, 2),
            &DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            &DVector::zeros(1),
        )
        .unwrap();
        assert!(m.amax() < 1e-15);
        assert!((c - DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5])).amax() < 1e-12);
    }

    #[test]
    fn oracle_covariance_annihilates_constraints() {
        let mut rng = RngState::new(8).rng();
        let a: DMatrix<f64> = DMatrix::from_fn(6, 6, |_, _| StandardNormal.sample(&mut rng));
        let sigma = &a * a.transpose() + DMatrix::identity(6, 6);
        let g: DMatrix<f64> = DMatrix::from_fn(2, 6, |_, _| StandardNormal.sample(&mut rng));
        let r = DVector::from_vec(vec![1.0, -2.0]);
        let (m, c) = conditional_gaussian_oracle(&DVector::zeros(6), &sigma, &g, &r).unwrap();
        assert!((&c * g.transpose()).amax() < 1e-8);
        assert!((&g * m - r).amax() < 1e-10);
    }

    #[test]
    fn alignment_examples() {
        let t = vec![DVector::from_vec(vec![0.0, 0.0]), DVector::from_vec(vec![5.0, 5.0]), DVector::from_vec(vec![9.0, 0.0])];
        let same = align_means(&t, &t).unwrap();
        assert_eq!(same.perm, vec![0, 1, 2]);
        assert_eq!(same.total, 0.0);
        let swapped = vec![t[2].clone(), t[0].clone(), t[1].clone()];
        let al = align_means(&swapped, &t).unwrap();
        assert_eq!(al.perm, vec![1, 2, 0]);
        assert_eq!(al.total, 0.0);
        let eps = DVector::from_vec(vec![0.3, -0.2]);
        let moved: Vec<DVector<f64>> = t.iter().map(|v| v + &eps).collect();
        let al = align_means(&moved, &t).unwrap();
        assert!(al.total <= 3.0 * eps.norm() + 1e-12);
        assert_eq!(align_means(&t[..2], &t).unwrap_err(), Error::KMismatch { left: 2, right: 3 });
    }
}
