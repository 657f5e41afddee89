//! Seeded Monte Carlo: direct simulation of measurements, and the pump
//! fluctuation study.
//!
//! Work is split into fixed units (chunks of trials, or rounds), and unit `i`
//! draws from ChaCha stream `i` of the run seed. Results therefore do not
//! depend on how rayon schedules the units.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::statistics::{Data, OrderStatistics};

use crate::detection::{click_probability, nr_detected_pmf, ChannelSpec, Detector};
use crate::error::{Error, Result};
use crate::estimators::{exact_report, EstimatorReport, EstimatorSpec};
use crate::photon_stats::{poisson_pmf, Pmf, TRUNCATION_EPS};
use crate::sources::{binmux_output_pmf, source_pmf_at_sample, tune_mu, BinMuxNetwork, SourceSpec};

const TRIALS_PER_CHUNK: usize = 1024;

pub(crate) fn stream_rng(seed: u64, unit: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(unit);
    rng
}

/// Empirical moments of an estimator over independent simulated measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub trials: usize,
    pub seed: u64,
    pub mean: f64,
    pub se_mean: f64,
    pub mse: f64,
    pub se_mse: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    n: usize,
    sum: f64,
    sum_sq: f64,
    sum_err2: f64,
    sum_err4: f64,
}

impl Accumulator {
    fn push(&mut self, estimate: f64, t: f64) {
        let e2 = (estimate - t).powi(2);
        self.n += 1;
        self.sum += estimate;
        self.sum_sq += estimate * estimate;
        self.sum_err2 += e2;
        self.sum_err4 += e2 * e2;
    }

    fn merge(mut self, other: &Accumulator) -> Self {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.sum_err2 += other.sum_err2;
        self.sum_err4 += other.sum_err4;
        self
    }

    fn finish(&self, seed: u64) -> McEstimate {
        let n = self.n as f64;
        let mean = self.sum / n;
        let mse = self.sum_err2 / n;
        let spread = |sum_sq: f64, mean: f64| {
            if self.n < 2 {
                0.0
            } else {
                ((sum_sq - n * mean * mean).max(0.0) / (n - 1.0) / n).sqrt()
            }
        };
        McEstimate {
            trials: self.n,
            seed,
            mean,
            se_mean: spread(self.sum_sq, mean),
            mse,
            se_mse: spread(self.sum_err4, mse),
        }
    }
}

/// Simulates `trials` measurements of `spec.nu` pulses each, photon by photon:
/// draw the emitted number, let each photon survive with probability
/// `t * eta_det`, then count survivors or clicks.
pub fn mc_estimate(
    spec: &EstimatorSpec,
    ch: &ChannelSpec,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::domain("trials", 0.0, ">= 1"));
    }
    ch.validate()?;
    let emitted = source_pmf_at_sample(&spec.source)?.sampler();
    let survive = ch.transmission();
    let chunks = trials.div_ceil(TRIALS_PER_CHUNK);
    let partials: Vec<Accumulator> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream_rng(seed, chunk as u64);
            let mut acc = Accumulator::default();
            let n_trials = TRIALS_PER_CHUNK.min(trials - chunk * TRIALS_PER_CHUNK);
            for _ in 0..n_trials {
                let mut k = 0u64;
                for _ in 0..spec.nu {
                    let n = emitted.sample(&mut rng);
                    let detected = (0..n).filter(|_| rng.random::<f64>() < survive).count() as u64;
                    k += match spec.detector {
                        Detector::NumberResolving => detected,
                        Detector::Threshold => u64::from(detected > 0),
                    };
                }
                acc.push(spec.estimate(k), ch.t);
            }
            acc
        })
        .collect();
    let total = partials
        .iter()
        .fold(Accumulator::default(), |a, b| a.merge(b));
    Ok(total.finish(seed))
}

/// How long the pump strength stays fixed before a fresh draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PumpRedraw {
    PerRepetition,
    /// One draw for all repetitions of a measurement.
    PerMeasurement,
    /// A fresh draw every `n` repetitions.
    Every(usize),
}

impl PumpRedraw {
    fn block_len(self, nu: usize) -> usize {
        match self {
            PumpRedraw::PerRepetition => 1,
            PumpRedraw::PerMeasurement => nu,
            PumpRedraw::Every(n) => n.min(nu),
        }
    }
}

impl fmt::Display for PumpRedraw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PumpRedraw::PerRepetition => f.write_str("per_repetition"),
            PumpRedraw::PerMeasurement => f.write_str("per_measurement"),
            PumpRedraw::Every(n) => write!(f, "every:{n}"),
        }
    }
}

impl FromStr for PumpRedraw {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "per_repetition" => Ok(PumpRedraw::PerRepetition),
            "per_measurement" | "per_round" => Ok(PumpRedraw::PerMeasurement),
            _ => match s.strip_prefix("every:").map(str::parse::<usize>) {
                Some(Ok(n)) if n >= 1 => Ok(PumpRedraw::Every(n)),
                _ => Err(format!(
                    "expected per_repetition, per_measurement or every:<n>, got `{s}`"
                )),
            },
        }
    }
}

impl Serialize for PumpRedraw {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PumpRedraw {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Treatment of the negative tail of the Gaussian pump distribution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Condition on a positive draw.
    #[default]
    Reject,
    /// Negative draws become zero.
    Clamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FluctuationConfig {
    /// Relative pump fluctuation `sigma / mu` values to scan.
    pub a_grid: Vec<f64>,
    pub rounds: usize,
    /// Measurements simulated per round to form that round's MSE.
    pub trials_per_round: usize,
    pub nu: usize,
    /// Mean photon number at the sample without fluctuations.
    pub target_mean: f64,
    pub redraw: PumpRedraw,
    pub truncation: Truncation,
}

impl Default for FluctuationConfig {
    fn default() -> Self {
        FluctuationConfig {
            a_grid: (0..=6).map(|i| i as f64 / 10.0).collect(),
            rounds: 50,
            trials_per_round: 100,
            nu: crate::estimators::DEFAULT_NU,
            target_mean: 0.5,
            redraw: PumpRedraw::Every(20),
            truncation: Truncation::Reject,
        }
    }
}

impl FluctuationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.a_grid.is_empty() {
            return Err(Error::config("a_grid", "must not be empty"));
        }
        for &a in &self.a_grid {
            if !(0.0..=0.6).contains(&a) {
                return Err(Error::domain("a", a, "[0, 0.6]"));
            }
        }
        if self.rounds < 2 {
            return Err(Error::config("rounds", "need at least 2 rounds"));
        }
        if self.trials_per_round == 0 {
            return Err(Error::config("trials_per_round", "must be >= 1"));
        }
        if self.nu == 0 {
            return Err(Error::config("nu", "must be >= 1"));
        }
        if !(self.target_mean > 0.0 && self.target_mean.is_finite()) {
            return Err(Error::config("target_mean", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// A source whose pump strength can fluctuate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluctuatingSource {
    /// Mean photon number proportional to the laser intensity.
    Coherent,
    BinMux(BinMuxNetwork),
}

impl FluctuatingSource {
    pub fn label(&self) -> &'static str {
        match self {
            FluctuatingSource::Coherent => "coherent",
            FluctuatingSource::BinMux(_) => "binmux",
        }
    }

    /// Nominal pump strength delivering `target_mean` at the sample.
    /// For coherent light the pump strength is the mean photon number itself.
    pub fn nominal_mu(&self, target_mean: f64) -> Result<f64> {
        match self {
            FluctuatingSource::Coherent => Ok(target_mean),
            FluctuatingSource::BinMux(net) => tune_mu(net, target_mean),
        }
    }

    pub fn spec(&self, mu: f64) -> SourceSpec {
        match self {
            FluctuatingSource::Coherent => SourceSpec::Coherent { mean: mu },
            FluctuatingSource::BinMux(net) => SourceSpec::BinMux(net.with_mu(mu)),
        }
    }

    fn pmf(&self, mu: f64) -> Result<Pmf> {
        match self {
            FluctuatingSource::Coherent => poisson_pmf(mu, TRUNCATION_EPS),
            FluctuatingSource::BinMux(net) => binmux_output_pmf(&net.with_mu(mu)),
        }
    }
}

/// Statistics of the per-round MSE at one fluctuation level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub a: f64,
    pub mean_mse: f64,
    /// Standard error of `mean_mse` across rounds.
    pub se_mean_mse: f64,
    /// 16th percentile of the per-round MSE.
    pub ci_low: f64,
    /// 84th percentile of the per-round MSE.
    pub ci_high: f64,
    pub mean_estimate: f64,
    pub n_rounds: usize,
    pub seed: u64,
    pub round_mse: Vec<f64>,
}

impl McSummary {
    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

/// Draws `mu0 * (1 + a z)` with `z` standard normal. One uniform per draw, so
/// runs at different `a` stay coupled draw by draw.
struct PumpSampler {
    mu0: f64,
    a: f64,
    lower_u: f64,
    truncation: Truncation,
    normal: Normal,
}

impl PumpSampler {
    fn new(mu0: f64, a: f64, truncation: Truncation) -> Self {
        let normal = Normal::standard();
        let lower_u = if a > 0.0 && truncation == Truncation::Reject {
            normal.cdf(-1.0 / a)
        } else {
            0.0
        };
        PumpSampler {
            mu0,
            a,
            lower_u,
            truncation,
            normal,
        }
    }

    fn draw(&self, u: f64) -> f64 {
        if self.a == 0.0 {
            return self.mu0;
        }
        let z = self
            .normal
            .inverse_cdf(self.lower_u + u * (1.0 - self.lower_u));
        let mu = self.mu0 * (1.0 + self.a * z);
        match self.truncation {
            Truncation::Reject => mu.max(0.0),
            Truncation::Clamp => {
                if mu.is_nan() {
                    0.0
                } else {
                    mu.max(0.0)
                }
            }
        }
    }
}

/// Per-pulse outcome law for a fixed pump strength.
enum PulseLaw {
    Counts(crate::photon_stats::PmfSampler),
    Click(f64),
}

impl PulseLaw {
    fn new(pmf: &Pmf, ch: &ChannelSpec, detector: Detector) -> Result<Self> {
        Ok(match detector {
            Detector::NumberResolving => PulseLaw::Counts(nr_detected_pmf(pmf, ch)?.sampler()),
            Detector::Threshold => PulseLaw::Click(click_probability(pmf, ch)?),
        })
    }

    fn draw(&self, u: f64) -> u64 {
        match self {
            PulseLaw::Counts(s) => s.invert(u) as u64,
            PulseLaw::Click(p) => u64::from(u < *p),
        }
    }
}

/// Measurement error when the pump strength is Gaussian-distributed.
///
/// Each round simulates `trials_per_round` measurements and records their
/// mean squared error; the estimator reference is always the
/// fluctuation-free one. Round `r` uses stream `r` at every `a`, so the
/// scan over `a` uses common random numbers.
pub fn fluctuation_study(
    cfg: &FluctuationConfig,
    source: FluctuatingSource,
    detector: Detector,
    ch: &ChannelSpec,
    seed: u64,
) -> Result<Vec<McSummary>> {
    cfg.validate()?;
    ch.validate()?;
    let mu0 = source.nominal_mu(cfg.target_mean)?;
    let nominal = source.pmf(mu0)?;
    let spec =
        EstimatorSpec::with_source_pmf(detector, source.spec(mu0), &nominal, ch.eta_det, cfg.nu)?;
    let block = cfg.redraw.block_len(cfg.nu);
    let mut out = Vec::with_capacity(cfg.a_grid.len());
    for &a in &cfg.a_grid {
        let pump = PumpSampler::new(mu0, a, cfg.truncation);
        let rounds: Vec<(f64, f64)> = (0..cfg.rounds)
            .into_par_iter()
            .map(|round| -> Result<(f64, f64)> {
                let mut rng = stream_rng(seed, round as u64);
                let mut err2 = 0.0;
                let mut est = 0.0;
                for _ in 0..cfg.trials_per_round {
                    let mut k = 0u64;
                    let mut done = 0;
                    while done < cfg.nu {
                        let mu = pump.draw(rng.random::<f64>());
                        let law = PulseLaw::new(&source.pmf(mu)?, ch, detector)?;
                        let len = block.min(cfg.nu - done);
                        for _ in 0..len {
                            k += law.draw(rng.random::<f64>());
                        }
                        done += len;
                    }
                    let t_hat = spec.estimate(k);
                    err2 += (t_hat - ch.t).powi(2);
                    est += t_hat;
                }
                let n = cfg.trials_per_round as f64;
                Ok((err2 / n, est / n))
            })
            .collect::<Result<_>>()?;
        out.push(summarize(a, &rounds, seed));
    }
    Ok(out)
}

/// Expected estimate and MSE under pump fluctuations, by quadrature over the
/// pump distribution.
///
/// Within a block of `L` repetitions sharing one pump draw the count has
/// conditional mean `L m(mu)` and variance `L v(mu)`, so over independent
/// blocks `Var K = sum_b (L_b E[v] + L_b^2 Var[m])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluctuationMoments {
    pub a: f64,
    pub expectation: f64,
    pub mse: f64,
}

pub fn fluctuation_moments(
    cfg: &FluctuationConfig,
    source: FluctuatingSource,
    detector: Detector,
    ch: &ChannelSpec,
    nodes: usize,
) -> Result<Vec<FluctuationMoments>> {
    cfg.validate()?;
    ch.validate()?;
    if nodes == 0 {
        return Err(Error::domain("nodes", 0.0, ">= 1"));
    }
    let mu0 = source.nominal_mu(cfg.target_mean)?;
    let spec = EstimatorSpec::with_source_pmf(
        detector,
        source.spec(mu0),
        &source.pmf(mu0)?,
        ch.eta_det,
        cfg.nu,
    )?;
    let norm = spec.normalization();
    let block = cfg.redraw.block_len(cfg.nu);
    let (full, rest) = (cfg.nu / block, cfg.nu % block);
    let sum_sq_blocks = (full * block * block + rest * rest) as f64;
    cfg.a_grid
        .iter()
        .map(|&a| {
            let pump = PumpSampler::new(mu0, a, cfg.truncation);
            let n = if a == 0.0 { 1 } else { nodes };
            let per_node: Vec<(f64, f64)> = (0..n)
                .into_par_iter()
                .map(|k| -> Result<(f64, f64)> {
                    let mu = pump.draw((k as f64 + 0.5) / n as f64);
                    let pmf = source.pmf(mu)?;
                    Ok(match detector {
                        Detector::NumberResolving => {
                            let m = nr_detected_pmf(&pmf, ch)?.moments();
                            (m.mean, m.variance)
                        }
                        Detector::Threshold => {
                            let p = click_probability(&pmf, ch)?;
                            (p, p * (1.0 - p))
                        }
                    })
                })
                .collect::<Result<_>>()?;
            let nf = n as f64;
            let mean_m = per_node.iter().map(|x| x.0).sum::<f64>() / nf;
            let var_m = per_node.iter().map(|x| (x.0 - mean_m).powi(2)).sum::<f64>() / nf;
            let mean_v = per_node.iter().map(|x| x.1).sum::<f64>() / nf;
            let var_k = cfg.nu as f64 * mean_v + sum_sq_blocks * var_m;
            let expectation = cfg.nu as f64 * mean_m / norm;
            Ok(FluctuationMoments {
                a,
                expectation,
                mse: var_k / (norm * norm) + (expectation - ch.t).powi(2),
            })
        })
        .collect()
}

fn summarize(a: f64, rounds: &[(f64, f64)], seed: u64) -> McSummary {
    let round_mse: Vec<f64> = rounds.iter().map(|r| r.0).collect();
    let n = round_mse.len() as f64;
    let mean_mse = round_mse.iter().sum::<f64>() / n;
    let var = round_mse
        .iter()
        .map(|x| (x - mean_mse).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    let mut data = Data::new(round_mse.clone());
    McSummary {
        a,
        mean_mse,
        se_mean_mse: (var / n).sqrt(),
        ci_low: data.quantile(0.16),
        ci_high: data.quantile(0.84),
        mean_estimate: rounds.iter().map(|r| r.1).sum::<f64>() / n,
        n_rounds: rounds.len(),
        seed,
        round_mse,
    }
}

/// One Monte Carlo versus exact comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McValidation {
    pub label: String,
    pub detector: Detector,
    pub source: SourceSpec,
    pub t: f64,
    pub nu: usize,
    pub exact: EstimatorReport,
    pub mc: McEstimate,
    /// `(mc - exact) / se` for the mean and the MSE.
    pub z_mean: f64,
    pub z_mse: f64,
}

impl McValidation {
    /// Both moments within `k` standard errors.
    pub fn within(&self, k: f64) -> bool {
        self.z_mean.abs() <= k && self.z_mse.abs() <= k
    }
}

fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn validate_against_exact(
    label: &str,
    detector: Detector,
    source: SourceSpec,
    ch: &ChannelSpec,
    nu: usize,
    trials: usize,
    seed: u64,
) -> Result<McValidation> {
    let spec = EstimatorSpec::new(detector, source, ch.eta_det, nu)?;
    let exact = exact_report(detector, &source, ch, nu)?;
    let mc = mc_estimate(&spec, ch, trials, seed)?;
    Ok(McValidation {
        label: label.to_string(),
        detector,
        source,
        t: ch.t,
        nu,
        exact,
        z_mean: z_score(mc.mean - exact.expectation, mc.se_mean),
        z_mse: z_score(mc.mse - exact.mse, mc.se_mse),
        mc,
    })
}

/// Canned configurations spanning both detectors and all three sources.
pub fn canned_validation_set(
    network: BinMuxNetwork,
) -> Result<Vec<(String, Detector, SourceSpec, f64)>> {
    let coherent = SourceSpec::Coherent { mean: 1.0 };
    let fock = SourceSpec::Fock { n: 1 };
    let binmux_nr = SourceSpec::binmux_tuned(BinMuxNetwork { m: 2, ..network }, 1.0)?;
    let binmux_th = SourceSpec::binmux_tuned(BinMuxNetwork { m: 3, ..network }, 1.0)?;
    Ok(vec![
        (
            "coherent-nr".into(),
            Detector::NumberResolving,
            coherent,
            0.8,
        ),
        ("fock-nr".into(), Detector::NumberResolving, fock, 0.5),
        (
            "binmux-m2-nr".into(),
            Detector::NumberResolving,
            binmux_nr,
            0.8,
        ),
        (
            "coherent-threshold".into(),
            Detector::Threshold,
            coherent,
            0.8,
        ),
        ("fock-threshold".into(), Detector::Threshold, fock, 0.3),
        (
            "binmux-m3-threshold".into(),
            Detector::Threshold,
            binmux_th,
            0.9,
        ),
    ])
}
