use nalgebra::{DMatrix, DVector};

use crate::stats::NiwParams;

/// Conjugate update of a Normal-Inverse-Wishart prior given member vectors:
///
/// ```text
/// μ₀* = (λ₀μ₀ + M x̄) / (λ₀ + M)      λ₀* = λ₀ + M      ν₀* = ν₀ + M
/// Ψ₀* = Ψ₀ + S + λ₀M/(λ₀ + M) · (x̄ − μ₀)(x̄ − μ₀)ᵀ,   S = Σ (xᵢ − x̄)(xᵢ − x̄)ᵀ
/// ```
pub fn niw_posterior<'a, I>(members: I, prior: &NiwParams) -> NiwParams
where
    I: IntoIterator<Item = &'a DVector<f64>>,
    I::IntoIter: Clone,
{
    let it = members.into_iter();
    let d = prior.dim();
    let mut m = 0usize;
    let mut sum = DVector::zeros(d);
    for x in it.clone() {
        sum += x;
        m += 1;
    }
    if m == 0 {
        return prior.clone();
    }
    let mf = m as f64;
    let xbar = sum / mf;
    let mut scatter = DMatrix::zeros(d, d);
    for x in it {
        let c = x - &xbar;
        scatter.ger(1.0, &c, &c, 1.0);
    }
    let lambda = prior.lambda0 + mf;
    let shift = &xbar - &prior.mu0;
    let mut psi = &prior.psi0 + scatter;
    psi.ger(prior.lambda0 * mf / lambda, &shift, &shift, 1.0);
    crate::linalg::symmetrize(&mut psi);
    NiwParams {
        mu0: (&prior.mu0 * prior.lambda0 + &xbar * mf) / lambda,
        lambda0: lambda,
        psi0: psi,
        nu0: prior.nu0 + mf,
    }
}

/// Log-density of the 1-D Normal-Inverse-Wishart (Normal-Inverse-Gamma)
/// at `(μ, σ²)`.
pub fn niw_log_density_1d(params: &NiwParams, mu: f64, var: f64) -> f64 {
    let (m0, l0, psi, nu) = (params.mu0[0], params.lambda0, params.psi0[(0, 0)], params.nu0);
    let a = nu / 2.0;
    let b = psi / 2.0;
    let log_ig = a * libm::log(b) - libm::lgamma(a) - (a + 1.0) * libm::log(var) - b / var;
    log_ig + crate::stats::log_normal_pdf(mu, m0, var / l0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;
    use alloc::vec::Vec;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn empty_members_return_prior() {
        let prior = NiwParams::standard(3);
        let none: Vec<DVector<f64>> = Vec::new();
        assert_eq!(niw_posterior(&none, &prior), prior);
    }

    #[test]
    fn counts_update() {
        let prior = NiwParams::standard(2);
        let xs: Vec<DVector<f64>> = (0..5).map(|i| DVector::from_vec(alloc::vec![i as f64, 1.0])).collect();
        let post = niw_posterior(&xs, &prior);
        assert_eq!(post.lambda0, 15.0);
        assert_eq!(post.nu0, prior.nu0 + 5.0);
        assert!((post.mu0[0] - 10.0 / 15.0).abs() < 1e-12);
        // S adds 10 on (0,0); shift term 10·5/15·(2)² on (0,0).
        assert!((post.psi0[(0, 0)] - (1.0 + 10.0 + 50.0 / 15.0 * 4.0)).abs() < 1e-12);
    }

    /// Total-variation distance between the closed-form posterior and a grid
    /// normalization of prior × likelihood.
    pub(crate) fn quadrature_tv(prior: &NiwParams, data: &[f64]) -> f64 {
        let xs: Vec<DVector<f64>> = data.iter().map(|v| DVector::from_element(1, *v)).collect();
        let post = niw_posterior(&xs, prior);
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let var_hat = data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        // Grid wide enough to carry essentially all posterior mass.
        let s_lo = (var_hat * 0.05).max(1e-4);
        let s_hi = var_hat * 6.0 + 1.0;
        let mu_half = 8.0 * libm::sqrt(s_hi / post.lambda0);
        let (nm, ns) = (600usize, 900usize);
        let dm = 2.0 * mu_half / nm as f64;
        let ds = (s_hi - s_lo) / ns as f64;
        let mut unnorm = Vec::with_capacity(nm * ns);
        let mut closed = Vec::with_capacity(nm * ns);
        for a in 0..nm {
            let mu = post.mu0[0] - mu_half + (a as f64 + 0.5) * dm;
            for b in 0..ns {
                let s = s_lo + (b as f64 + 0.5) * ds;
                let mut lp = niw_log_density_1d(prior, mu, s);
                for x in data {
                    lp += crate::stats::log_normal_pdf(*x, mu, s);
                }
                unnorm.push(lp);
                closed.push(libm::exp(niw_log_density_1d(&post, mu, s)));
            }
        }
        let mx = unnorm.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let numeric: Vec<f64> = unnorm.iter().map(|v| libm::exp(v - mx)).collect();
        let z: f64 = numeric.iter().sum::<f64>() * dm * ds;
        0.5 * numeric.iter().zip(&closed).map(|(p, q)| (p / z - q).abs()).sum::<f64>() * dm * ds
    }

    #[test]
    fn one_dimensional_posterior_matches_quadrature() {
        let mut rng = RngState::new(11).rng();
        for _ in 0..3 {
            let m = rng.random_range(20..60);
            let loc: f64 = rng.random_range(-1.0..1.0);
            let data: Vec<f64> = (0..m)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    loc + z
                })
                .collect();
            let tv = quadrature_tv(&NiwParams::standard(1), &data);
            assert!(tv < 1e-3, "tv = {tv}");
        }
    }
}
