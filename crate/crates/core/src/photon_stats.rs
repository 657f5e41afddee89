//! Finite photon-number distributions.
//!
//! A [`Pmf`] stores `P(n)` for `n = 0..=n_max` together with the probability
//! mass discarded when the tail was truncated. Mass is never renormalized, so
//! every transform carries the truncation error forward instead of hiding it.
//!
//! Loss of any kind (optics, sample, detector) is binomial thinning, and
//! thinnings compose multiplicatively:
//!
//! ```
//! use subshot::photon_stats::{apply_loss, poisson_pmf, TRUNCATION_EPS};
//!
//! let p = poisson_pmf(2.0, TRUNCATION_EPS).unwrap();
//! let twice = apply_loss(&apply_loss(&p, 0.5).unwrap(), 0.8).unwrap();
//! let once = apply_loss(&p, 0.4).unwrap();
//! assert!(twice.max_abs_diff(&once) < 1e-12);
//! ```

use rand::Rng;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{check_probability, Error, Result};

/// Tail mass allowed to be discarded when truncating a distribution.
pub const TRUNCATION_EPS: f64 = 1e-12;

/// Trailing entries carrying less than this much mass in total are dropped.
const TRIM_MASS: f64 = 1e-20;

/// Photon-number probability mass function truncated at `n_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pmf {
    probs: Vec<f64>,
    cutoff_mass: f64,
}

/// Mean, variance and Fano factor of a photon-number distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    /// `variance / mean`; `None` for the vacuum.
    pub fano: Option<f64>,
}

impl Pmf {
    /// Validates user-supplied probabilities: every entry in `[0, 1]` and a
    /// total within [`TRUNCATION_EPS`] of one.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Numeric("a pmf needs at least one entry".into()));
        }
        for &p in &probs {
            if !p.is_finite() {
                return Err(Error::domain("pmf entry", p, "finite"));
            }
            check_probability("pmf entry", p)?;
        }
        let total: f64 = probs.iter().sum();
        if !(1.0 - TRUNCATION_EPS..=1.0 + TRUNCATION_EPS).contains(&total) {
            return Err(Error::domain("pmf total mass", total, "[1 - 1e-12, 1]"));
        }
        Ok(Self::from_raw(probs))
    }

    /// Builds a pmf from entries produced by an exact transform of valid pmfs.
    pub(crate) fn from_raw(mut probs: Vec<f64>) -> Self {
        let mut tail = 0.0;
        while probs.len() > 1 {
            let last = *probs.last().unwrap();
            if tail + last >= TRIM_MASS {
                break;
            }
            tail += last;
            probs.pop();
        }
        if probs.is_empty() {
            probs.push(0.0);
        }
        let total: f64 = probs.iter().sum();
        Pmf {
            probs,
            cutoff_mass: (1.0 - total).max(0.0),
        }
    }

    /// All mass at `n = 0`.
    pub fn vacuum() -> Self {
        Pmf {
            probs: vec![1.0],
            cutoff_mass: 0.0,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `P(n)`, zero beyond the truncation point.
    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn cutoff_mass(&self) -> f64 {
        self.cutoff_mass
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    pub fn moments(&self) -> Moments {
        moments(self)
    }

    /// Largest entrywise difference, treating missing entries as zero.
    pub fn max_abs_diff(&self, other: &Pmf) -> f64 {
        let len = self.probs.len().max(other.probs.len());
        (0..len)
            .map(|n| (self.prob(n) - other.prob(n)).abs())
            .fold(0.0, f64::max)
    }

    /// `weight * self + (1 - weight) * other`.
    pub fn mix(&self, other: &Pmf, weight: f64) -> Result<Pmf> {
        check_probability("mixture weight", weight)?;
        let len = self.probs.len().max(other.probs.len());
        let probs = (0..len)
            .map(|n| weight * self.prob(n) + (1.0 - weight) * other.prob(n))
            .collect();
        Ok(Pmf::from_raw(probs))
    }

    /// Precomputed cumulative table for repeated inverse-CDF draws.
    pub fn sampler(&self) -> PmfSampler {
        let mut acc = 0.0;
        let cdf = self
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        PmfSampler { cdf }
    }
}

/// Inverse-CDF sampler over a truncated pmf. The residual tail mass is
/// assigned to `n_max`.
#[derive(Debug, Clone)]
pub struct PmfSampler {
    cdf: Vec<f64>,
}

impl PmfSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.invert(rng.random::<f64>())
    }

    /// Photon count for a uniform variate `u` in `[0, 1)`.
    pub fn invert(&self, u: f64) -> usize {
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.cdf.len() - 1)
    }
}

/// Poisson distribution with mean `mu`, truncated once the remaining tail is
/// provably below `eps`.
pub fn poisson_pmf(mu: f64, eps: f64) -> Result<Pmf> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::domain("mu", mu, "finite and >= 0"));
    }
    if !(eps > 0.0 && eps <= 1e-9) {
        return Err(Error::domain("eps", eps, "(0, 1e-9]"));
    }
    if mu == 0.0 {
        return Ok(Pmf::vacuum());
    }
    let ln_mu = mu.ln();
    let mut probs = Vec::new();
    let mut n = 0usize;
    loop {
        let nf = n as f64;
        let p = (nf * ln_mu - mu - ln_gamma(nf + 1.0)).exp();
        probs.push(p);
        // For n + 2 > mu the tail after n is dominated by a geometric series
        // with ratio mu / (n + 2).
        if nf + 2.0 > mu {
            let next = p * mu / (nf + 1.0);
            let bound = next / (1.0 - mu / (nf + 2.0));
            if bound < eps {
                break;
            }
        }
        n += 1;
    }
    Ok(Pmf::from_raw(probs))
}

/// Number state with exactly `n` photons.
pub fn fock_pmf(n: usize) -> Pmf {
    let mut probs = vec![0.0; n + 1];
    probs[n] = 1.0;
    Pmf {
        probs,
        cutoff_mass: 0.0,
    }
}

/// Binomial thinning: each photon survives independently with probability
/// `transmission`.
pub fn apply_loss(pmf: &Pmf, transmission: f64) -> Result<Pmf> {
    check_probability("transmission", transmission)?;
    let keep = transmission;
    let lose = 1.0 - transmission;
    let mut out = vec![0.0; pmf.probs.len()];
    // Row n of the binomial table, built by Pascal's rule so that keep = 0
    // and keep = 1 are exact.
    let mut row = vec![1.0];
    for (n, &p) in pmf.probs.iter().enumerate() {
        if n > 0 {
            row.push(0.0);
            for k in (1..=n).rev() {
                row[k] = lose * row[k] + keep * row[k - 1];
            }
            row[0] *= lose;
        }
        if p == 0.0 {
            continue;
        }
        for (k, b) in row.iter().enumerate() {
            out[k] += p * b;
        }
    }
    Ok(Pmf::from_raw(out))
}

/// Distribution of the sum of independent draws from `a` and `b`.
pub fn convolve(a: &Pmf, b: &Pmf) -> Pmf {
    let mut out = vec![0.0; a.probs.len() + b.probs.len() - 1];
    for (i, &pa) in a.probs.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        for (j, &pb) in b.probs.iter().enumerate() {
            out[i + j] += pa * pb;
        }
    }
    Pmf::from_raw(out)
}

/// Total count over `nu` independent repetitions, by repeated squaring.
///
/// The discarded tail grows to roughly `nu * pmf.cutoff_mass()`.
pub fn iid_sum(pmf: &Pmf, nu: usize) -> Result<Pmf> {
    if nu == 0 {
        return Err(Error::domain("nu", 0.0, ">= 1"));
    }
    let mut result: Option<Pmf> = None;
    let mut power = pmf.clone();
    let mut remaining = nu;
    loop {
        if remaining & 1 == 1 {
            result = Some(match result {
                None => power.clone(),
                Some(r) => convolve(&r, &power),
            });
        }
        remaining >>= 1;
        if remaining == 0 {
            break;
        }
        power = convolve(&power, &power);
    }
    Ok(result.expect("nu >= 1"))
}

/// Moments by direct summation over the stored entries.
pub fn moments(pmf: &Pmf) -> Moments {
    let mean = pmf.mean();
    let variance = pmf
        .probs
        .iter()
        .enumerate()
        .map(|(n, p)| {
            let d = n as f64 - mean;
            d * d * p
        })
        .sum();
    Moments {
        mean,
        variance,
        fano: (mean > 0.0).then(|| variance / mean),
    }
}

/// One photon count drawn by inverse-CDF lookup.
pub fn sample<R: Rng + ?Sized>(pmf: &Pmf, rng: &mut R) -> usize {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    for (n, p) in pmf.probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return n;
        }
    }
    pmf.n_max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn poisson(mu: f64) -> Pmf {
        poisson_pmf(mu, TRUNCATION_EPS).unwrap()
    }

    /// Closed form e^{-mu} mu^n / n!, evaluated by the product recurrence.
    fn poisson_closed_form(mu: f64, n: usize) -> f64 {
        (1..=n).fold((-mu).exp(), |p, k| p * mu / k as f64)
    }

    #[test]
    fn poisson_zero_is_vacuum() {
        assert_eq!(poisson(0.0), Pmf::vacuum());
    }

    #[test]
    fn poisson_unit_mean_has_unit_fano() {
        let m = poisson(1.0).moments();
        assert!((m.mean - 1.0).abs() < 1e-9);
        assert!((m.fano.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn poisson_half_vacuum_term() {
        let p = poisson(0.5);
        assert!((p.prob(0) - 0.606_530_659_712_633_4).abs() < 1e-15);
        for n in 0..=p.n_max() {
            assert!((p.prob(n) - poisson_closed_form(0.5, n)).abs() < 1e-15);
        }
    }

    #[test]
    fn poisson_truncation_respects_eps() {
        for mu in [0.01, 0.7, 3.0, 25.0, 180.0] {
            let p = poisson(mu);
            assert!(p.cutoff_mass() <= TRUNCATION_EPS, "mu={mu}");
            assert!(p.total_mass() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn poisson_rejects_bad_arguments() {
        assert!(poisson_pmf(-0.1, TRUNCATION_EPS).is_err());
        assert!(poisson_pmf(1.0, 0.0).is_err());
        assert!(poisson_pmf(1.0, 1e-6).is_err());
        assert!(poisson_pmf(f64::NAN, TRUNCATION_EPS).is_err());
    }

    #[test]
    fn fock_states() {
        assert_eq!(fock_pmf(0), Pmf::vacuum());
        assert_eq!(fock_pmf(1).probs(), &[0.0, 1.0]);
        let m = fock_pmf(3).moments();
        assert_eq!(m.mean, 3.0);
        assert_eq!(m.variance, 0.0);
    }

    #[test]
    fn new_validates_entries() {
        assert!(Pmf::new(vec![0.5, 0.5]).is_ok());
        assert!(Pmf::new(vec![0.5, 0.4]).is_err());
        assert!(Pmf::new(vec![1.5, -0.5]).is_err());
        assert!(Pmf::new(vec![]).is_err());
    }

    #[test]
    fn loss_identity_and_opaque() {
        let p = poisson(1.3);
        assert_eq!(apply_loss(&p, 1.0).unwrap().max_abs_diff(&p), 0.0);
        let opaque = apply_loss(&p, 0.0).unwrap();
        assert_eq!(opaque.n_max(), 0);
        assert!(opaque.max_abs_diff(&Pmf::vacuum()) < 1e-12);
        assert!(apply_loss(&p, 1.01).is_err());
        assert!(apply_loss(&p, -0.01).is_err());
    }

    #[test]
    fn thinned_poisson_is_poisson() {
        for (mu, tau) in [(1.0, 0.72), (4.0, 0.3), (0.2, 0.99)] {
            let thinned = apply_loss(&poisson(mu), tau).unwrap();
            assert!(thinned.max_abs_diff(&poisson(mu * tau)) < 1e-10);
        }
    }

    #[test]
    fn fock_thinning_is_bernoulli() {
        let b = apply_loss(&fock_pmf(1), 0.72).unwrap();
        assert!((b.prob(0) - 0.28).abs() < 1e-15);
        assert!((b.prob(1) - 0.72).abs() < 1e-15);
    }

    #[test]
    fn convolution_identities() {
        let b = poisson(0.8);
        assert_eq!(convolve(&Pmf::vacuum(), &b), b);
        assert_eq!(convolve(&fock_pmf(1), &fock_pmf(2)), fock_pmf(3));
        let sum = convolve(&poisson(0.4), &poisson(1.1));
        assert!(sum.max_abs_diff(&poisson(1.5)) < 1e-10);
    }

    #[test]
    fn iid_sums() {
        let p = poisson(0.9);
        assert_eq!(iid_sum(&p, 1).unwrap(), p);
        assert_eq!(iid_sum(&fock_pmf(1), 200).unwrap(), fock_pmf(200));
        let total = iid_sum(&p, 200).unwrap();
        assert!(total.max_abs_diff(&poisson(180.0)) < 1e-10);
        assert!((total.mean() / 180.0 - 1.0).abs() < 1e-6);
        assert!(iid_sum(&p, 0).is_err());
    }

    #[test]
    fn moments_of_reference_states() {
        let m = moments(&fock_pmf(1));
        assert_eq!((m.mean, m.variance), (1.0, 0.0));
        assert_eq!(moments(&Pmf::vacuum()).fano, None);
        let m = moments(&poisson(2.0));
        assert!((m.mean - 2.0).abs() < 1e-9);
        assert!((m.variance - 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| sample(&fock_pmf(1), &mut rng) == 1));
        assert!((0..1000).all(|_| sample(&Pmf::vacuum(), &mut rng) == 0));
        let s = fock_pmf(1).sampler();
        assert!((0..1000).all(|_| s.sample(&mut rng) == 1));
    }

    #[test]
    fn poisson_sampling_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = poisson(1.0);
        let draws = 1_000_000;
        let total: usize = (0..draws).map(|_| sample(&p, &mut rng)).sum();
        let mean = total as f64 / draws as f64;
        // Var = 1, so the standard error is 1e-3.
        assert!((mean - 1.0).abs() < 4e-3, "mean {mean}");
    }

    #[test]
    fn sampling_chi_square_consistency() {
        let p = poisson(1.7);
        let sampler = p.sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 1_000_000;
        let mut counts = vec![0usize; p.n_max() + 1];
        for _ in 0..draws {
            counts[sampler.sample(&mut rng)] += 1;
        }
        // Pool bins with expected count below 5 into the last cell.
        let mut chi2 = 0.0;
        let mut dof = 0;
        let (mut obs_tail, mut exp_tail) = (0.0, 0.0);
        for (n, &c) in counts.iter().enumerate() {
            let e = p.prob(n) * draws as f64;
            if e >= 5.0 {
                chi2 += (c as f64 - e).powi(2) / e;
                dof += 1;
            } else {
                obs_tail += c as f64;
                exp_tail += e;
            }
        }
        chi2 += (obs_tail - exp_tail).powi(2) / exp_tail;
        // dof + 1 cells, one constraint.
        let limit = ChiSquared::new(dof as f64).unwrap().inverse_cdf(0.999);
        assert!(dof >= 8);
        assert!(chi2 < limit, "chi2 {chi2} limit {limit}");
    }

    #[test]
    fn sampler_inverts_edges() {
        let s = Pmf::new(vec![0.25, 0.5, 0.25]).unwrap().sampler();
        assert_eq!(s.invert(0.0), 0);
        assert_eq!(s.invert(0.25), 1);
        assert_eq!(s.invert(0.7499), 1);
        assert_eq!(s.invert(0.75), 2);
        assert_eq!(s.invert(0.999_999), 2);
    }

    fn arb_pmf() -> impl Strategy<Value = Pmf> {
        prop::collection::vec(0.0f64..1.0, 1..8).prop_filter_map("nonzero", |w| {
            let total: f64 = w.iter().sum();
            (total > 1e-3).then(|| Pmf::from_raw(w.iter().map(|x| x / total).collect()))
        })
    }

    proptest! {
        #[test]
        fn thinning_composes(p in arb_pmf(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let twice = apply_loss(&apply_loss(&p, a).unwrap(), b).unwrap();
            let once = apply_loss(&p, a * b).unwrap();
            prop_assert!(twice.max_abs_diff(&once) < 1e-10);
        }

        #[test]
        fn thinning_scales_mean(p in arb_pmf(), tau in 0.0f64..=1.0) {
            let thinned = apply_loss(&p, tau).unwrap();
            prop_assert!((thinned.mean() - tau * p.mean()).abs() < 1e-9);
            prop_assert!((thinned.total_mass() - p.total_mass()).abs() < 1e-12);
        }

        #[test]
        fn convolution_commutes_and_associates(a in arb_pmf(), b in arb_pmf(), c in arb_pmf()) {
            prop_assert!(convolve(&a, &b).max_abs_diff(&convolve(&b, &a)) < 1e-12);
            let left = convolve(&convolve(&a, &b), &c);
            let right = convolve(&a, &convolve(&b, &c));
            prop_assert!(left.max_abs_diff(&right) < 1e-12);
            prop_assert!((convolve(&a, &b).mean() - a.mean() - b.mean()).abs() < 1e-9);
        }

        #[test]
        fn transforms_stay_normalized(p in arb_pmf(), tau in 0.0f64..=1.0, nu in 1usize..20) {
            for q in [apply_loss(&p, tau).unwrap(), iid_sum(&p, nu).unwrap()] {
                let total = q.total_mass();
                prop_assert!((1.0 - 1e-12..=1.0 + 1e-12).contains(&total));
                prop_assert!(q.probs().iter().all(|&x| (0.0..=1.0 + 1e-15).contains(&x)));
            }
        }
    }
}
