//! Transmission estimators and their exact performance.
//!
//! Every estimator has the form `T = K / (nu * reference)`, where `K` is the
//! total number of detected photons (number-resolving) or clicks (threshold)
//! over `nu` repetitions. The references are:
//!
//! | detector  | coherent / multiplexed         | Fock            |
//! |-----------|--------------------------------|-----------------|
//! | NR        | `eta * <n>`                    | `eta * N`       |
//! | threshold | click probability at `t = 1`   | `eta * N`       |
//!
//! The threshold reference is the exact no-sample click probability, with no
//! calibration noise.

use serde::{Deserialize, Serialize};

use crate::detection::{click_probability, nr_detected_pmf, ChannelSpec, Detector};
use crate::error::{Error, Result};
use crate::photon_stats::{moments, Pmf};
use crate::sources::{source_pmf_at_sample, SourceSpec};

/// Number of repetitions used unless overridden.
pub const DEFAULT_NU: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub detector: Detector,
    pub source: SourceSpec,
    pub nu: usize,
    /// Expected count per repetition at `t = 1`.
    pub reference_mean: f64,
}

impl EstimatorSpec {
    pub fn new(detector: Detector, source: SourceSpec, eta_det: f64, nu: usize) -> Result<Self> {
        let pmf = source_pmf_at_sample(&source)?;
        Self::with_source_pmf(detector, source, &pmf, eta_det, nu)
    }

    pub(crate) fn with_source_pmf(
        detector: Detector,
        source: SourceSpec,
        pmf: &Pmf,
        eta_det: f64,
        nu: usize,
    ) -> Result<Self> {
        if nu == 0 {
            return Err(Error::domain("nu", 0.0, ">= 1"));
        }
        let no_sample = ChannelSpec::new(1.0, eta_det)?;
        let reference_mean = match (detector, source) {
            (_, SourceSpec::Fock { n }) => eta_det * n as f64,
            (Detector::NumberResolving, _) => eta_det * pmf.mean(),
            (Detector::Threshold, _) => click_probability(pmf, &no_sample)?,
        };
        if reference_mean.is_nan() || reference_mean <= 0.0 {
            return Err(Error::domain(
                "reference_mean",
                reference_mean,
                "> 0 (the source must emit detectable photons)",
            ));
        }
        Ok(EstimatorSpec {
            detector,
            source,
            nu,
            reference_mean,
        })
    }

    pub fn normalization(&self) -> f64 {
        self.nu as f64 * self.reference_mean
    }

    /// Transmission estimate from a total count.
    pub fn estimate(&self, k: u64) -> f64 {
        k as f64 / self.normalization()
    }
}

/// Number-resolving estimate from `k` detected photons over `spec.nu` pulses.
pub fn estimate_nr(k: u64, spec: &EstimatorSpec) -> f64 {
    spec.estimate(k)
}

/// Threshold estimate from `k <= spec.nu` clicks.
pub fn estimate_threshold(k: u64, spec: &EstimatorSpec) -> f64 {
    debug_assert!(k <= spec.nu as u64, "{k} clicks in {} pulses", spec.nu);
    spec.estimate(k)
}

/// How a relative error is expressed in percent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelativeMse {
    /// `100 * sqrt(MSE) / t`
    #[default]
    RootMse,
    /// `100 * MSE / t^2`
    MseOverTSquared,
    /// `100 * MSE / t`
    MseOverT,
}

impl RelativeMse {
    pub fn percent(self, mse: f64, t: f64) -> Option<f64> {
        if t <= 0.0 {
            return None;
        }
        Some(match self {
            RelativeMse::RootMse => 100.0 * mse.sqrt() / t,
            RelativeMse::MseOverTSquared => 100.0 * mse / (t * t),
            RelativeMse::MseOverT => 100.0 * mse / t,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub t: f64,
    pub expectation: f64,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
    /// `100 * sqrt(mse) / t`; absent at `t = 0`.
    pub relative_mse_percent: Option<f64>,
    /// Shot-noise-limit MSE over this MSE; absent when either is zero.
    pub ratio_to_snl: Option<f64>,
}

impl EstimatorReport {
    fn new(t: f64, expectation: f64, variance: f64) -> Self {
        let bias = expectation - t;
        let mse = variance + bias * bias;
        EstimatorReport {
            t,
            expectation,
            bias,
            variance,
            mse,
            relative_mse_percent: RelativeMse::RootMse.percent(mse, t),
            ratio_to_snl: None,
        }
    }

    pub fn relative_mse(&self, convention: RelativeMse) -> Option<f64> {
        convention.percent(self.mse, self.t)
    }

    fn with_snl(mut self, snl: &EstimatorReport) -> Self {
        self.ratio_to_snl = snl_ratio(&self, snl);
        self
    }
}

/// `snl.mse / report.mse`, or `None` when the ratio is undefined.
pub fn snl_ratio(report: &EstimatorReport, snl_report: &EstimatorReport) -> Option<f64> {
    (snl_report.mse > 0.0 && report.mse > 0.0).then(|| snl_report.mse / report.mse)
}

fn nr_report_from_pmf(
    pmf: &Pmf,
    spec: &EstimatorSpec,
    ch: &ChannelSpec,
) -> Result<EstimatorReport> {
    let detected = moments(&nr_detected_pmf(pmf, ch)?);
    let expectation = detected.mean / spec.reference_mean;
    let variance = detected.variance / (spec.nu as f64 * spec.reference_mean.powi(2));
    Ok(EstimatorReport::new(ch.t, expectation, variance))
}

fn threshold_report_from_pmf(
    pmf: &Pmf,
    spec: &EstimatorSpec,
    ch: &ChannelSpec,
) -> Result<EstimatorReport> {
    let p = click_probability(pmf, ch)?;
    let expectation = p / spec.reference_mean;
    let variance = p * (1.0 - p) / (spec.nu as f64 * spec.reference_mean.powi(2));
    Ok(EstimatorReport::new(ch.t, expectation, variance))
}

/// Coherent light with a number-resolving detector at the same mean photon
/// number: unbiased, with variance `t / (nu * eta_det * <n>)`.
pub fn snl_report(mean_n: f64, ch: &ChannelSpec, nu: usize) -> Result<EstimatorReport> {
    ch.validate()?;
    if !(mean_n > 0.0 && mean_n.is_finite()) {
        return Err(Error::domain("mean_n", mean_n, "finite and > 0"));
    }
    if nu == 0 || ch.eta_det == 0.0 {
        return Err(Error::domain(
            "reference_mean",
            0.0,
            "> 0 (nu >= 1 and eta_det > 0)",
        ));
    }
    let variance = ch.t / (nu as f64 * ch.eta_det * mean_n);
    Ok(EstimatorReport::new(ch.t, ch.t, variance))
}

fn exact_report_with(
    detector: Detector,
    source: &SourceSpec,
    ch: &ChannelSpec,
    nu: usize,
) -> Result<EstimatorReport> {
    ch.validate()?;
    let pmf = source_pmf_at_sample(source)?;
    let spec = EstimatorSpec::with_source_pmf(detector, *source, &pmf, ch.eta_det, nu)?;
    let report = match detector {
        Detector::NumberResolving => nr_report_from_pmf(&pmf, &spec, ch)?,
        Detector::Threshold => threshold_report_from_pmf(&pmf, &spec, ch)?,
    };
    let snl = snl_report(pmf.mean(), ch, nu)?;
    Ok(report.with_snl(&snl))
}

/// Exact moments of the number-resolving estimator.
///
/// The estimator is linear in the count, so its variance is the per-pulse
/// detected-count variance over `nu * reference^2`.
pub fn exact_report_nr(
    source: &SourceSpec,
    ch: &ChannelSpec,
    nu: usize,
) -> Result<EstimatorReport> {
    exact_report_with(Detector::NumberResolving, source, ch, nu)
}

/// Exact moments of the threshold estimator; clicks are `Binomial(nu, p(t))`.
pub fn exact_report_threshold(
    source: &SourceSpec,
    ch: &ChannelSpec,
    nu: usize,
) -> Result<EstimatorReport> {
    exact_report_with(Detector::Threshold, source, ch, nu)
}

pub fn exact_report(
    detector: Detector,
    source: &SourceSpec,
    ch: &ChannelSpec,
    nu: usize,
) -> Result<EstimatorReport> {
    exact_report_with(detector, source, ch, nu)
}

/// Mean and MSE by summing `T(k) P(k)` and `(T(k) - t)^2 P(k)` over the
/// distribution of the total count, with `T(k) = k / normalization`.
pub fn report_from_count_pmf(counts: &Pmf, normalization: f64, t: f64) -> EstimatorReport {
    let estimate = |k: usize| k as f64 / normalization;
    let expectation: f64 = counts
        .probs()
        .iter()
        .enumerate()
        .map(|(k, p)| estimate(k) * p)
        .sum();
    let mse: f64 = counts
        .probs()
        .iter()
        .enumerate()
        .map(|(k, p)| (estimate(k) - t).powi(2) * p)
        .sum();
    let variance: f64 = counts
        .probs()
        .iter()
        .enumerate()
        .map(|(k, p)| (estimate(k) - expectation).powi(2) * p)
        .sum();
    EstimatorReport {
        t,
        expectation,
        bias: expectation - t,
        variance,
        mse,
        relative_mse_percent: RelativeMse::RootMse.percent(mse, t),
        ratio_to_snl: None,
    }
}

/// Smallest relative error a threshold measurement reaches as `nu -> infinity`,
/// `100 * |bias| / t`. Absent at `t = 0`.
pub fn asymptotic_mse_floor(source: &SourceSpec, ch: &ChannelSpec) -> Result<Option<f64>> {
    let report = exact_report_threshold(source, ch, 1)?;
    Ok((ch.t > 0.0).then(|| 100.0 * report.bias.abs() / ch.t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon_stats::{apply_loss, iid_sum};
    use crate::sources::BinMuxNetwork;

    const ETA: f64 = 0.9;

    fn ch(t: f64) -> ChannelSpec {
        ChannelSpec::new(t, ETA).unwrap()
    }

    fn coherent(mean: f64) -> SourceSpec {
        SourceSpec::Coherent { mean }
    }

    fn binmux(m: u32, mean: f64) -> SourceSpec {
        SourceSpec::binmux_tuned(BinMuxNetwork::new(m), mean).unwrap()
    }

    #[test]
    fn nr_estimates() {
        let fock = EstimatorSpec::new(
            Detector::NumberResolving,
            SourceSpec::Fock { n: 1 },
            ETA,
            200,
        )
        .unwrap();
        assert_eq!(estimate_nr(0, &fock), 0.0);
        assert!((estimate_nr(144, &fock) - 0.8).abs() < 1e-15);
        let c = EstimatorSpec::new(Detector::NumberResolving, coherent(1.0), 1.0, 100).unwrap();
        // K = nu * eta * <n> * t with t = 0.25; the truncated tail shifts <n> by ~1e-11.
        assert!((estimate_nr(25, &c) - 0.25).abs() < 1e-10);
    }

    #[test]
    fn threshold_estimates() {
        let c = EstimatorSpec::new(Detector::Threshold, coherent(1.0), ETA, 200).unwrap();
        assert_eq!(estimate_threshold(0, &c), 0.0);
        let p0 = -(-0.9f64).exp_m1();
        assert!((c.reference_mean - p0).abs() < 1e-12);
        assert!((c.normalization() - 0.593_430_340_259_400_9 * 200.0).abs() < 1e-9);
        let fock =
            EstimatorSpec::new(Detector::Threshold, SourceSpec::Fock { n: 1 }, ETA, 10).unwrap();
        assert!((estimate_threshold(9, &fock) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reference_requires_light() {
        assert!(EstimatorSpec::new(Detector::Threshold, coherent(0.0), ETA, 10).is_err());
        assert!(EstimatorSpec::new(Detector::NumberResolving, coherent(1.0), ETA, 0).is_err());
    }

    #[test]
    fn coherent_nr_closed_form() {
        let r = exact_report_nr(&coherent(1.0), &ch(0.8), 200).unwrap();
        assert!((r.mse - 0.8 / 180.0).abs() < 1e-12);
        assert!((r.mse - 4.444e-3).abs() < 1e-6);
        assert!((r.ratio_to_snl.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fock_nr_closed_form() {
        let r = exact_report_nr(&SourceSpec::Fock { n: 1 }, &ch(0.8), 200).unwrap();
        assert!((r.mse - 0.8 * 0.28 / 180.0).abs() < 1e-12);
        assert!((r.mse - 1.2444e-3).abs() < 1e-7);
        let at_one = exact_report_nr(&SourceSpec::Fock { n: 1 }, &ch(1.0), 200).unwrap();
        assert!((at_one.ratio_to_snl.unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn opaque_sample_reports() {
        for s in [coherent(1.0), SourceSpec::Fock { n: 1 }, binmux(2, 1.0)] {
            let r = exact_report_nr(&s, &ch(0.0), 200).unwrap();
            assert_eq!((r.expectation, r.mse), (0.0, 0.0));
            assert_eq!(r.ratio_to_snl, None);
            assert_eq!(r.relative_mse_percent, None);
            let th = exact_report_threshold(&s, &ch(0.0), 200).unwrap();
            assert_eq!((th.expectation, th.bias), (0.0, 0.0));
        }
    }

    #[test]
    fn threshold_unbiased_at_endpoints() {
        for s in [coherent(1.0), SourceSpec::Fock { n: 1 }, binmux(3, 1.0)] {
            let r = exact_report_threshold(&s, &ch(1.0), 200).unwrap();
            assert_eq!(r.bias, 0.0, "{s:?}");
        }
    }

    #[test]
    fn coherent_threshold_bias() {
        let r = exact_report_threshold(&coherent(1.0), &ch(0.8), 200).unwrap();
        let expected = (-0.72f64).exp_m1() / (-0.9f64).exp_m1();
        assert!((r.expectation - expected).abs() < 1e-12);
        assert!((r.expectation - 0.8649).abs() < 1e-4);
        assert!((r.bias - 0.0649).abs() < 1e-4);
    }

    #[test]
    fn mse_is_variance_plus_bias_squared() {
        for d in [Detector::NumberResolving, Detector::Threshold] {
            for s in [coherent(0.7), binmux(4, 0.5)] {
                for t in [0.1, 0.55, 0.93] {
                    let r = exact_report(d, &s, &ch(t), 200).unwrap();
                    assert!((r.mse - r.variance - r.bias * r.bias).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn nu_scaling() {
        let s = binmux(2, 1.0);
        let base_nr = exact_report_nr(&s, &ch(0.6), 10).unwrap();
        let base_th = exact_report_threshold(&s, &ch(0.6), 10).unwrap();
        for nu in [100, 1000] {
            let f = nu as f64 / 10.0;
            let nr = exact_report_nr(&s, &ch(0.6), nu).unwrap();
            assert!((nr.mse * f / base_nr.mse - 1.0).abs() < 1e-12);
            let th = exact_report_threshold(&s, &ch(0.6), nu).unwrap();
            assert!((th.variance * f / base_th.variance - 1.0).abs() < 1e-12);
            assert!((th.bias - base_th.bias).abs() < 1e-15);
        }
    }

    #[test]
    fn moment_route_matches_count_distribution_route() {
        let t = 0.7;
        let nu = 50;
        for s in [coherent(1.0), binmux(2, 1.0), SourceSpec::Fock { n: 1 }] {
            let pmf = source_pmf_at_sample(&s).unwrap();

            let spec = EstimatorSpec::new(Detector::NumberResolving, s, ETA, nu).unwrap();
            let per_pulse = apply_loss(&pmf, t * ETA).unwrap();
            let counts = iid_sum(&per_pulse, nu).unwrap();
            let summed = report_from_count_pmf(&counts, spec.normalization(), t);
            let exact = exact_report_nr(&s, &ch(t), nu).unwrap();
            assert!((summed.expectation - exact.expectation).abs() < 1e-10);
            assert!((summed.mse - exact.mse).abs() < 1e-10);

            let spec = EstimatorSpec::new(Detector::Threshold, s, ETA, nu).unwrap();
            let p = click_probability(&pmf, &ch(t)).unwrap();
            let bernoulli = Pmf::new(vec![1.0 - p, p]).unwrap();
            let clicks = iid_sum(&bernoulli, nu).unwrap();
            let summed = report_from_count_pmf(&clicks, spec.normalization(), t);
            let exact = exact_report_threshold(&s, &ch(t), nu).unwrap();
            assert!((summed.expectation - exact.expectation).abs() < 1e-12);
            assert!((summed.mse - exact.mse).abs() < 1e-12);
            assert!((summed.variance - exact.variance).abs() < 1e-12);
        }
    }

    #[test]
    fn fock_threshold_is_unbiased() {
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let r = exact_report_threshold(&SourceSpec::Fock { n: 1 }, &ch(t), 200).unwrap();
            assert!(r.bias.abs() < 1e-15);
            let nr = exact_report_nr(&SourceSpec::Fock { n: 1 }, &ch(t), 200).unwrap();
            assert!((r.mse - nr.mse).abs() < 1e-15);
        }
    }

    #[test]
    fn uql_ratio() {
        for i in 1..=10 {
            let t = i as f64 / 10.0;
            let r = exact_report_nr(&SourceSpec::Fock { n: 1 }, &ch(t), 200).unwrap();
            assert!((r.ratio_to_snl.unwrap() - 1.0 / (1.0 - t * ETA)).abs() < 1e-10);
        }
    }

    #[test]
    fn threshold_bias_vanishes_only_at_endpoints() {
        for s in [coherent(1.0), binmux(2, 1.0), binmux(5, 1.0)] {
            for i in 1..100 {
                let t = i as f64 / 100.0;
                let r = exact_report_threshold(&s, &ch(t), 200).unwrap();
                assert!(r.bias > 1e-6, "{s:?} t={t} bias={}", r.bias);
            }
        }
    }

    #[test]
    fn binmux_threshold_bias_below_coherent() {
        for m in 1..=6 {
            let b = binmux(m, 1.0);
            for i in 1..100 {
                let t = i as f64 / 100.0;
                let rb = exact_report_threshold(&b, &ch(t), 200).unwrap();
                let rc = exact_report_threshold(&coherent(1.0), &ch(t), 200).unwrap();
                assert!(rb.bias.abs() < rc.bias.abs(), "m={m} t={t}");
            }
        }
    }

    #[test]
    fn binmux_nr_beats_snl() {
        let s = binmux(2, 1.0);
        for i in 1..=100 {
            let r = exact_report_nr(&s, &ch(i as f64 / 100.0), 200).unwrap();
            assert!(r.ratio_to_snl.unwrap() > 1.0);
            assert!(r.bias.abs() < 1e-12);
        }
    }

    #[test]
    fn asymptotic_floor_edges() {
        assert_eq!(
            asymptotic_mse_floor(&coherent(1.0), &ch(1.0)).unwrap(),
            Some(0.0)
        );
        assert_eq!(
            asymptotic_mse_floor(&coherent(1.0), &ch(0.0)).unwrap(),
            None
        );
        let fock = asymptotic_mse_floor(&SourceSpec::Fock { n: 1 }, &ch(0.4))
            .unwrap()
            .unwrap();
        assert!(fock < 1e-12);
    }

    #[test]
    fn binmux_floor_well_below_coherent() {
        let c = asymptotic_mse_floor(&coherent(0.5), &ch(0.6))
            .unwrap()
            .unwrap();
        for m in 1..=6 {
            let b = asymptotic_mse_floor(&binmux(m, 0.5), &ch(0.6))
                .unwrap()
                .unwrap();
            assert!(b < c, "m={m}");
        }
        let m3 = asymptotic_mse_floor(&binmux(3, 0.5), &ch(0.6))
            .unwrap()
            .unwrap();
        let factor = c / m3;
        assert!((2.0..=4.5).contains(&factor), "improvement {factor}");
    }

    #[test]
    fn relative_mse_conventions() {
        assert_eq!(RelativeMse::RootMse.percent(0.0025, 0.5), Some(10.0));
        assert_eq!(RelativeMse::MseOverTSquared.percent(0.0025, 0.5), Some(1.0));
        assert_eq!(RelativeMse::MseOverT.percent(0.0025, 0.5), Some(0.5));
        assert_eq!(RelativeMse::RootMse.percent(0.0025, 0.0), None);
    }

    #[test]
    fn ratio_against_itself_is_one() {
        let r = exact_report_nr(&binmux(3, 0.6), &ch(0.5), 200).unwrap();
        assert_eq!(snl_ratio(&r, &r), Some(1.0));
    }
}
