//! Photon-number statistics of the light sources at the sample plane.
//!
//! The multiplexed source works as follows. The SPDC crystal emits a
//! Poisson number of pairs into each of `2^m` temporal windows per clock
//! period. An idler click heralds a window; the earliest heralded window is
//! routed through the `m`-stage binary delay network to the clock tick, and
//! every signal photon crosses all `m` stages. Periods without any herald
//! emit vacuum.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::photon_stats::{apply_loss, fock_pmf, poisson_pmf, Pmf, TRUNCATION_EPS};

/// Herald detection efficiency used when none is configured.
pub const DEFAULT_ETA_HERALD: f64 = 0.85;
/// Per-stage signal transmission used when none is configured.
pub const DEFAULT_ETA_STAGE: f64 = 0.88;
/// Source-to-sample optical transmission.
pub const DEFAULT_ETA_OPTICS: f64 = 0.9;

const MAX_BISECTION_STEPS: usize = 200;
const TUNE_TOLERANCE: f64 = 1e-9;

/// Physical description of the multiplexing hardware, independent of pump power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinMuxNetwork {
    /// Number of binary correction stages.
    pub m: u32,
    /// Probability that a single idler photon is detected by the herald.
    pub eta_herald: f64,
    /// Signal transmission of one delay stage.
    pub eta_stage: f64,
    /// Transmission between the source output and the sample.
    pub eta_optics: f64,
}

impl BinMuxNetwork {
    pub fn new(m: u32) -> Self {
        BinMuxNetwork {
            m,
            eta_herald: DEFAULT_ETA_HERALD,
            eta_stage: DEFAULT_ETA_STAGE,
            eta_optics: DEFAULT_ETA_OPTICS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=30).contains(&self.m) {
            return Err(Error::domain("m", self.m as f64, "1..=30"));
        }
        check_probability("eta_herald", self.eta_herald)?;
        check_probability("eta_stage", self.eta_stage)?;
        check_probability("eta_optics", self.eta_optics)
    }

    /// Temporal windows addressed per clock period, `2^m`.
    pub fn windows(&self) -> u64 {
        1u64 << self.m
    }

    /// Signal transmission through the full delay network.
    pub fn eta_network(&self) -> f64 {
        self.eta_stage.powi(self.m as i32)
    }

    pub fn with_mu(self, mu: f64) -> BinMuxParams {
        BinMuxParams { network: self, mu }
    }
}

/// A multiplexed source at a fixed pump strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinMuxParams {
    pub network: BinMuxNetwork,
    /// Mean number of SPDC pairs per temporal window.
    pub mu: f64,
}

impl BinMuxParams {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::domain("mu", self.mu, "finite and >= 0"));
        }
        Ok(())
    }

    /// Probability that a single window is heralded, `1 - exp(-mu eta_herald)`.
    pub fn window_herald_probability(&self) -> f64 {
        -(-self.mu * self.network.eta_herald).exp_m1()
    }

    /// Probability that at least one of the `2^m` windows is heralded.
    pub fn sync_probability(&self) -> f64 {
        let pw = self.window_herald_probability();
        let windows = self.network.windows() as f64;
        -(windows * (-pw).ln_1p()).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    /// Poissonian light with the given mean photon number at the sample.
    Coherent {
        mean: f64,
    },
    /// Exactly `n` photons, delivered without loss.
    Fock {
        n: usize,
    },
    BinMux(BinMuxParams),
}

impl SourceSpec {
    /// Multiplexed source with the pump tuned to `target_mean` photons at the sample.
    pub fn binmux_tuned(network: BinMuxNetwork, target_mean: f64) -> Result<Self> {
        let mu = tune_mu(&network, target_mean)?;
        Ok(SourceSpec::BinMux(network.with_mu(mu)))
    }

    pub fn label(&self) -> &'static str {
        match self {
            SourceSpec::Coherent { .. } => "coherent",
            SourceSpec::Fock { .. } => "fock",
            SourceSpec::BinMux(_) => "binmux",
        }
    }

    /// Number of correction stages, for multiplexed sources.
    pub fn stages(&self) -> Option<u32> {
        match self {
            SourceSpec::BinMux(p) => Some(p.network.m),
            _ => None,
        }
    }

    pub fn pump_mu(&self) -> Option<f64> {
        match self {
            SourceSpec::BinMux(p) => Some(p.mu),
            _ => None,
        }
    }
}

/// `1 - (1 - eta)^n`: probability that at least one of `n` photons is detected.
pub(crate) fn at_least_one(eta: f64, n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => eta,
        _ if eta >= 1.0 => 1.0,
        _ => -(n as f64 * (-eta).ln_1p()).exp_m1(),
    }
}

/// Photon-number distribution of the multiplexed source at the sample plane.
pub fn binmux_output_pmf(p: &BinMuxParams) -> Result<Pmf> {
    p.validate()?;
    let net = &p.network;
    if p.mu == 0.0 || net.eta_herald == 0.0 {
        return Ok(Pmf::vacuum());
    }
    let pw = p.window_herald_probability();
    // Conditioning on a herald divides by pw, so the pair tail must be cut that
    // much finer to keep the output cutoff below TRUNCATION_EPS.
    let pairs = poisson_pmf(p.mu, (TRUNCATION_EPS * pw).max(f64::MIN_POSITIVE))?;
    // Pair number in the routed window, given that it heralded. Identical
    // windows make this independent of which window was selected.
    let heralded: Vec<f64> = pairs
        .probs()
        .iter()
        .enumerate()
        .map(|(n, &pn)| pn * at_least_one(net.eta_herald, n) / pw)
        .collect();
    let heralded = Pmf::from_raw(heralded);
    let routed = apply_loss(&heralded, net.eta_network())?;
    let emitted = routed.mix(&Pmf::vacuum(), p.sync_probability())?;
    apply_loss(&emitted, net.eta_optics)
}

/// Mean photon number at the sample for a given pump strength.
pub fn binmux_mean(network: &BinMuxNetwork, mu: f64) -> Result<f64> {
    Ok(binmux_output_pmf(&network.with_mu(mu))?.mean())
}

/// Pump strength `mu` that delivers `target_mean` photons at the sample.
///
/// Bisection on the mean, which is continuous and strictly increasing in
/// `mu` and unbounded, so every finite positive target has a solution.
pub fn tune_mu(network: &BinMuxNetwork, target_mean: f64) -> Result<f64> {
    network.validate()?;
    if !(target_mean > 0.0 && target_mean.is_finite()) {
        return Err(Error::domain("target_mean", target_mean, "finite and > 0"));
    }
    if network.eta_herald == 0.0 || network.eta_stage == 0.0 || network.eta_optics == 0.0 {
        return Err(Error::Numeric(format!(
            "target mean {target_mean} unreachable: the network transmits no photons"
        )));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while binmux_mean(network, hi)? < target_mean {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::Numeric(format!(
                "no pump strength below {hi} reaches mean {target_mean}"
            )));
        }
    }
    let mut best = (f64::INFINITY, hi);
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let residual = binmux_mean(network, mid)? - target_mean;
        if residual.abs() < best.0 {
            best = (residual.abs(), mid);
        }
        if residual.abs() < 0.01 * TUNE_TOLERANCE || mid == lo || mid == hi {
            break;
        }
        if residual < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 < TUNE_TOLERANCE {
        Ok(best.1)
    } else {
        Err(Error::Numeric(format!(
            "bisection for mean {target_mean} stalled at residual {:e}",
            best.0
        )))
    }
}

/// Photon-number distribution incident on the sample.
///
/// A coherent mean is specified at the sample plane directly, since upstream
/// loss only rescales a Poisson distribution.
pub fn source_pmf_at_sample(s: &SourceSpec) -> Result<Pmf> {
    match s {
        SourceSpec::Coherent { mean } => poisson_pmf(*mean, TRUNCATION_EPS),
        SourceSpec::Fock { n } => Ok(fock_pmf(*n)),
        SourceSpec::BinMux(p) => binmux_output_pmf(p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lossless(m: u32) -> BinMuxNetwork {
        BinMuxNetwork {
            m,
            eta_herald: 1.0,
            eta_stage: 1.0,
            eta_optics: 1.0,
        }
    }

    #[test]
    fn no_pump_no_photons() {
        let p = BinMuxNetwork::new(3).with_mu(0.0);
        assert_eq!(binmux_output_pmf(&p).unwrap(), Pmf::vacuum());
    }

    #[test]
    fn blind_herald_gives_vacuum() {
        let mut net = BinMuxNetwork::new(2);
        net.eta_herald = 0.0;
        assert_eq!(binmux_output_pmf(&net.with_mu(0.4)).unwrap(), Pmf::vacuum());
    }

    #[test]
    fn lossless_bright_limit_is_zero_truncated_poisson() {
        let mu = 12.0;
        let out = binmux_output_pmf(&lossless(1).with_mu(mu)).unwrap();
        assert!(out.prob(0) < 1e-9);
        let pairs = poisson_pmf(mu, TRUNCATION_EPS).unwrap();
        let norm = 1.0 - pairs.prob(0);
        for n in 1..=pairs.n_max() {
            assert!((out.prob(n) - pairs.prob(n) / norm).abs() < 1e-9);
        }
    }

    #[test]
    fn herald_probability_closed_form_matches_series() {
        for (mu, eh) in [(0.05, 0.85), (0.3, 0.5), (1.5, 0.2), (4.0, 1.0)] {
            let p = BinMuxNetwork {
                eta_herald: eh,
                ..BinMuxNetwork::new(2)
            }
            .with_mu(mu);
            let pairs = poisson_pmf(mu, TRUNCATION_EPS).unwrap();
            let series: f64 = pairs
                .probs()
                .iter()
                .enumerate()
                .map(|(n, pn)| pn * (1.0 - (1.0 - eh).powi(n as i32)))
                .sum();
            assert!((series - p.window_herald_probability()).abs() < 1e-12);
        }
    }

    #[test]
    fn validation() {
        assert!(BinMuxNetwork::new(0).validate().is_err());
        let mut net = BinMuxNetwork::new(2);
        net.eta_stage = 1.2;
        assert!(net.validate().is_err());
        assert!(BinMuxNetwork::new(2).with_mu(-1.0).validate().is_err());
        assert!(binmux_output_pmf(&BinMuxNetwork::new(2).with_mu(f64::NAN)).is_err());
    }

    #[test]
    fn tuned_mean_residual() {
        for target in [0.1, 0.5, 1.0] {
            let net = BinMuxNetwork::new(2);
            let mu = tune_mu(&net, target).unwrap();
            assert!((binmux_mean(&net, mu).unwrap() - target).abs() < 1e-9);
        }
    }

    #[test]
    fn tuned_collapsed_model() {
        // With no losses and m = 1 the mean is
        // (1 - e^{-2 mu}) * mu / (1 - e^{-mu}) = mu (1 + e^{-mu}).
        let mu = tune_mu(&lossless(1), 1.0).unwrap();
        let collapsed = mu * (1.0 + (-mu).exp());
        assert!((collapsed - 1.0).abs() < 1e-9, "mu {mu}");
    }

    #[test]
    fn tiny_target_forces_tiny_pump() {
        let mu = tune_mu(&BinMuxNetwork::new(3), 1e-6).unwrap();
        assert!(mu > 0.0 && mu < 1e-5);
    }

    #[test]
    fn tune_errors() {
        let net = BinMuxNetwork::new(2);
        assert!(tune_mu(&net, 0.0).is_err());
        assert!(tune_mu(&net, -1.0).is_err());
        let dark = BinMuxNetwork {
            eta_optics: 0.0,
            ..net
        };
        assert!(matches!(tune_mu(&dark, 0.5), Err(Error::Numeric(_))));
    }

    #[test]
    fn source_pmfs() {
        let c = source_pmf_at_sample(&SourceSpec::Coherent { mean: 1.0 }).unwrap();
        assert!(c.max_abs_diff(&poisson_pmf(1.0, TRUNCATION_EPS).unwrap()) == 0.0);
        let f = source_pmf_at_sample(&SourceSpec::Fock { n: 1 }).unwrap();
        assert_eq!(f.probs(), &[0.0, 1.0]);
        let b = SourceSpec::binmux_tuned(BinMuxNetwork::new(3), 0.5).unwrap();
        assert!((source_pmf_at_sample(&b).unwrap().mean() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn mean_increases_with_pump() {
        for m in 1..=6 {
            let net = BinMuxNetwork::new(m);
            let mut prev = 0.0;
            for i in 1..=60 {
                let mean = binmux_mean(&net, 0.05 * i as f64).unwrap();
                assert!(mean > prev, "m={m} step {i}");
                prev = mean;
            }
        }
    }

    #[test]
    fn sub_poissonian_at_operating_points() {
        for m in 1..=6 {
            for target in [0.1, 0.3, 0.5, 0.8, 1.0] {
                let s = SourceSpec::binmux_tuned(BinMuxNetwork::new(m), target).unwrap();
                let fano = source_pmf_at_sample(&s).unwrap().moments().fano.unwrap();
                assert!(fano < 1.0, "m={m} mean={target} fano={fano}");
            }
        }
    }

    #[test]
    fn weak_pump_fano_threshold() {
        // As mu -> 0, F - 1 ~ eta mu ((2 - eta_h) - 2^m eta_h), so the light
        // is sub-Poissonian exactly when eta_h > 2 / (2^m + 1), whatever the losses.
        for m in 1..=4u32 {
            let edge = 2.0 / (f64::from(1u32 << m) + 1.0);
            for i in 1..=20 {
                let eh = i as f64 / 20.0;
                if (eh - edge).abs() < 0.02 {
                    continue;
                }
                for es in [0.5, 0.8, 1.0] {
                    let p = BinMuxNetwork {
                        m,
                        eta_herald: eh,
                        eta_stage: es,
                        eta_optics: 0.9,
                    }
                    .with_mu(1e-4);
                    let fano = binmux_output_pmf(&p).unwrap().moments().fano.unwrap();
                    assert_eq!(fano < 1.0, eh > edge, "m={m} eh={eh} es={es} F={fano}");
                }
            }
        }
    }

    #[test]
    fn stage_loss_degrades_output() {
        let mut prev: Option<(f64, f64)> = None;
        for es in [1.0, 0.95, 0.9, 0.85, 0.8] {
            let net = BinMuxNetwork {
                eta_stage: es,
                ..BinMuxNetwork::new(3)
            };
            let m = binmux_output_pmf(&net.with_mu(0.2)).unwrap().moments();
            if let Some((mean, fano)) = prev {
                assert!(m.mean < mean);
                assert!(m.fano.unwrap() > fano);
            }
            prev = Some((m.mean, m.fano.unwrap()));
        }
    }

    proptest! {
        #[test]
        fn truncated_tail_stays_below_eps(
            m in 1u32..8,
            mu in 1e-6f64..3.0,
            eh in 0.01f64..=1.0,
            es in 0.3f64..=1.0,
        ) {
            let p = BinMuxNetwork { m, eta_herald: eh, eta_stage: es, eta_optics: 0.9 }.with_mu(mu);
            prop_assert!(binmux_output_pmf(&p).unwrap().cutoff_mass() <= TRUNCATION_EPS);
        }
    }
}
