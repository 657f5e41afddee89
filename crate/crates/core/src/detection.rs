//! Sample transmission followed by an ideal detector.
//!
//! Sample and detector losses are a single thinning by `t * eta_det`. A
//! threshold detector clicks exactly when at least one photon survives; it
//! has no dead time and no dark counts.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Result};
use crate::photon_stats::{apply_loss, Pmf};
use crate::sources::at_least_one;

/// Detector efficiency used throughout unless overridden.
pub const DEFAULT_ETA_DET: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    /// Sample transmission, the quantity being estimated.
    pub t: f64,
    pub eta_det: f64,
}

impl ChannelSpec {
    pub fn new(t: f64, eta_det: f64) -> Result<Self> {
        let ch = ChannelSpec { t, eta_det };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("t", self.t)?;
        check_probability("eta_det", self.eta_det)
    }

    /// Overall survival probability of a photon from sample input to detection.
    pub fn transmission(&self) -> f64 {
        self.t * self.eta_det
    }

    /// The same detector without a sample in the beam.
    pub fn without_sample(&self) -> Self {
        ChannelSpec { t: 1.0, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    NumberResolving,
    Threshold,
}

impl Detector {
    pub fn label(&self) -> &'static str {
        match self {
            Detector::NumberResolving => "nr",
            Detector::Threshold => "threshold",
        }
    }
}

/// Outcome statistics of a single pulse.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectionOutcomePmf {
    PhotonCounts(Pmf),
    ClickProb(f64),
}

/// Distribution of detected photon numbers.
pub fn nr_detected_pmf(source_pmf: &Pmf, ch: &ChannelSpec) -> Result<Pmf> {
    ch.validate()?;
    apply_loss(source_pmf, ch.transmission())
}

/// Probability that at least one photon reaches the detector and is registered.
///
/// The truncated tail counts as `n_max + 1` photons, so the result equals
/// `1 - P(no detection)` to rounding.
pub fn click_probability(source_pmf: &Pmf, ch: &ChannelSpec) -> Result<f64> {
    ch.validate()?;
    let tau = ch.transmission();
    let body: f64 = source_pmf
        .probs()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, p)| at_least_one(tau, i) * p)
        .sum();
    Ok(body + source_pmf.cutoff_mass() * at_least_one(tau, source_pmf.n_max() + 1))
}

pub fn detect(
    source_pmf: &Pmf,
    ch: &ChannelSpec,
    detector: Detector,
) -> Result<DetectionOutcomePmf> {
    Ok(match detector {
        Detector::NumberResolving => {
            DetectionOutcomePmf::PhotonCounts(nr_detected_pmf(source_pmf, ch)?)
        }
        Detector::Threshold => DetectionOutcomePmf::ClickProb(click_probability(source_pmf, ch)?),
    })
}
