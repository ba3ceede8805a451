//! Point and probabilistic scores: RMSE, MAPE, sample CRPS, log score.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One scored target.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub label: String,
    pub truth: f64,
    pub point: f64,
    pub samples: Vec<f64>,
    pub log_density: Option<f64>,
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    Ok(())
}

/// `√(mean (y − ŷ)²)`.
pub fn rmse(truths: &[f64], forecasts: &[f64]) -> Result<f64> {
    check_lengths(truths, forecasts)?;
    let sse: f64 = truths.iter().zip(forecasts).map(|(y, f)| (y - f) * (y - f)).sum();
    Ok(libm::sqrt(sse / truths.len() as f64))
}

/// `mean |y − ŷ| / y` as a fraction.
pub fn mape(truths: &[f64], forecasts: &[f64]) -> Result<f64> {
    check_lengths(truths, forecasts)?;
    if let Some(index) = truths.iter().position(|y| !(*y > 0.0)) {
        return Err(Error::ZeroTruth { index });
    }
    let s: f64 = truths.iter().zip(forecasts).map(|(y, f)| (y - f).abs() / y).sum();
    Ok(s / truths.len() as f64)
}

/// Energy-form CRPS estimate `mean|Xᵢ − y| − (1/2m²) ΣᵢΣⱼ|Xᵢ − Xⱼ|`.
///
/// The double sum is evaluated in `O(m log m)` as `2 Σ (2i − m − 1) X₍ᵢ₎`
/// over the order statistics.
pub fn crps_from_samples(samples: &[f64], y: f64) -> Result<f64> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: m });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mf = m as f64;
    let abs_err = sorted.iter().map(|x| (x - y).abs()).sum::<f64>() / mf;
    let spread: f64 = sorted.iter().enumerate().map(|(i, x)| (2.0 * (i as f64 + 1.0) - mf - 1.0) * x).sum();
    Ok((abs_err - spread / (mf * mf)).max(0.0))
}

/// Closed-form CRPS of `N(μ, σ²)` at `y`.
pub fn gaussian_crps(mu: f64, sigma: f64, y: f64) -> f64 {
    let z = (y - mu) / sigma;
    let phi = libm::exp(-0.5 * z * z) / libm::sqrt(2.0 * core::f64::consts::PI);
    let cdf = 0.5 * (1.0 + libm::erf(z / core::f64::consts::SQRT_2));
    sigma * (z * (2.0 * cdf - 1.0) + 2.0 * phi - 1.0 / libm::sqrt(core::f64::consts::PI))
}

/// Linear interpolation between order statistics at level `p ∈ [0, 1]`.
/// `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Something that can evaluate a predictive log-density.
pub trait DensityEvaluator {
    fn log_density(&self, y: f64) -> f64;
}

impl<F: Fn(f64) -> f64> DensityEvaluator for F {
    fn log_density(&self, y: f64) -> f64 {
        self(y)
    }
}

/// Log predictive density at the observation (higher is better).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScore {
    pub log_density: f64,
    /// The density underflowed; `log_density` is `−∞`.
    pub zero_density: bool,
}

impl LogScore {
    pub fn from_log_density(v: f64) -> Self {
        if v.is_finite() || v == f64::INFINITY {
            LogScore { log_density: v, zero_density: false }
        } else {
            LogScore { log_density: f64::NEG_INFINITY, zero_density: true }
        }
    }

    /// The textbook `−log f(y)`.
    pub fn neg_log_score(&self) -> f64 {
        -self.log_density
    }
}

pub fn log_score<D: DensityEvaluator + ?Sized>(pred: &D, y: f64) -> LogScore {
    LogScore::from_log_density(pred.log_density(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;
    use crate::stats::{log_normal_pdf, log_sum_exp};
    use alloc::vec;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn naive_crps(s: &[f64], y: f64) -> f64 {
        let m = s.len() as f64;
        let a: f64 = s.iter().map(|x| (x - y).abs()).sum::<f64>() / m;
        let mut b = 0.0;
        for x in s {
            for w in s {
                b += (x - w).abs();
            }
        }
        a - b / (2.0 * m * m)
    }

    #[test]
    fn point_scores() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[1.0, 2.0], &[2.0, 4.0]).unwrap() - 1.581_138_830_084_19).abs() < 1e-12);
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
        assert!((mape(&[100.0], &[110.0]).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(mape(&[5.0, 6.0], &[5.0, 6.0]).unwrap(), 0.0);
        assert_eq!(mape(&[5.0, 0.0], &[5.0, 6.0]), Err(Error::ZeroTruth { index: 1 }));
    }

    #[test]
    fn point_scores_match_loops() {
        let mut rng = RngState::new(3).rng();
        let y: Vec<f64> = (0..257).map(|_| rng.random_range(10.0..500.0)).collect();
        let f: Vec<f64> = (0..257).map(|_| rng.random_range(0.0..600.0)).collect();
        let mut se = 0.0;
        let mut ape = 0.0;
        for i in 0..y.len() {
            se += (y[i] - f[i]).powi(2);
            ape += ((y[i] - f[i]) / y[i]).abs();
        }
        assert!((rmse(&y, &f).unwrap() - libm::sqrt(se / 257.0)).abs() < 1e-12);
        assert!((mape(&y, &f).unwrap() - ape / 257.0).abs() < 1e-12);
    }

    #[test]
    fn crps_degenerate_cases() {
        assert_eq!(crps_from_samples(&[3.0; 10], 3.0).unwrap(), 0.0);
        assert!((crps_from_samples(&[4.0; 10], 3.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(crps_from_samples(&[1.0], 1.0), Err(Error::TooFewSamples { needed: 2, got: 1 }));
    }

    #[test]
    fn crps_matches_pairwise_sum() {
        let mut rng = RngState::new(4).rng();
        for m in [2usize, 3, 17, 200] {
            let s: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
            let y = rng.random_range(-6.0..6.0);
            assert!((crps_from_samples(&s, y).unwrap() - naive_crps(&s, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn crps_scale_equivariant_and_nonnegative() {
        let mut rng = RngState::new(5).rng();
        let s: Vec<f64> = (0..50).map(|_| rng.random_range(-5.0..5.0)).collect();
        let c = crps_from_samples(&s, 0.7).unwrap();
        assert!(c > 0.0);
        let scaled: Vec<f64> = s.iter().map(|v| 3.5 * v).collect();
        assert!((crps_from_samples(&scaled, 2.45).unwrap() - 3.5 * c).abs() < 1e-12);
    }

    #[test]
    fn crps_converges_to_gaussian_closed_form() {
        let exact = gaussian_crps(0.0, 1.0, 0.0);
        assert!((exact - (core::f64::consts::SQRT_2 - 1.0) / libm::sqrt(core::f64::consts::PI)).abs() < 1e-12);
        let mut errs = vec![];
        for (seed, m) in [(1u64, 1_000usize), (2, 10_000), (3, 100_000)] {
            let mut rng = RngState::new(seed).rng();
            // Average over replicates so the shrinking trend is not noise.
            let reps = 8;
            let mut e = 0.0;
            for _ in 0..reps {
                let s: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
                e += (crps_from_samples(&s, 0.0).unwrap() - exact).abs();
            }
            errs.push(e / reps as f64);
        }
        assert!(errs[0] > errs[2], "{errs:?}");
        assert!(errs[2] < 0.01 * exact);
    }

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&s, 0.5), 3.0);
        assert!((quantile_sorted(&s, 0.1) - 1.4).abs() < 1e-12);
        assert_eq!(quantile_sorted(&s, 1.0), 5.0);
    }

    #[test]
    fn log_scores() {
        let std_normal = |y: f64| log_normal_pdf(y, 0.0, 1.0);
        let ls = log_score(&std_normal, 0.0);
        assert!((ls.log_density + 0.918_938_533_204_672_7).abs() < 1e-12);
        assert!((ls.neg_log_score() - 0.918_938_533_204_672_7).abs() < 1e-12);
        let two = |y: f64| log_sum_exp(&[std_normal(y), std_normal(y)]) - libm::log(2.0);
        assert!((log_score(&two, 0.3).log_density - std_normal(0.3)).abs() < 1e-12);
        let zero = |_: f64| f64::NEG_INFINITY;
        assert!(log_score(&zero, 1.0).zero_density);
    }

    #[test]
    fn log_density_matches_quadrature_normalization() {
        // Integrating exp(log f) over a fine grid recovers 1, so the
        // evaluated log-density is the normalized one.
        let f = |y: f64| log_normal_pdf(y, 2.0, 0.49);
        let h = 1e-4;
        let total: f64 = (0..200_000).map(|i| libm::exp(f(-8.0 + (i as f64 + 0.5) * h)) * h).sum();
        assert!((total - 1.0).abs() < 1e-8);
    }
}
