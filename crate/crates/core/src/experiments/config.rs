//! Sweep configuration: compiled defaults, TOML files and command-line
//! overrides, merged in that order.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detection::{Detector, DEFAULT_ETA_DET};
use crate::error::{Error, Result};
use crate::estimators::DEFAULT_NU;
use crate::montecarlo::{FluctuationConfig, PumpRedraw, Truncation};
use crate::sources::{BinMuxNetwork, DEFAULT_ETA_HERALD, DEFAULT_ETA_OPTICS, DEFAULT_ETA_STAGE};

/// Environment variable naming a config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "SUBSHOT_CONFIG";

pub const DEFAULT_SEED: u64 = 2020;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    NrRatio,
    ThresholdBias,
    ThresholdRatio,
    IntensitySweep,
    AsymptoticFloor,
    Fluctuations,
    McValidate,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::NrRatio,
        Experiment::ThresholdBias,
        Experiment::ThresholdRatio,
        Experiment::IntensitySweep,
        Experiment::AsymptoticFloor,
        Experiment::Fluctuations,
        Experiment::McValidate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::NrRatio => "nr_ratio",
            Experiment::ThresholdBias => "threshold_bias",
            Experiment::ThresholdRatio => "threshold_ratio",
            Experiment::IntensitySweep => "intensity_sweep",
            Experiment::AsymptoticFloor => "asymptotic_floor",
            Experiment::Fluctuations => "fluctuations",
            Experiment::McValidate => "mc_validate",
        }
    }

    /// Grids used when nothing overrides them.
    pub fn default_grids(self) -> Grids {
        use Detector::*;
        use SourceKind::*;
        let full_t = linspace(0.0, 1.0, 101);
        let stages: Vec<u32> = (1..=6).collect();
        let a: Vec<f64> = (0..=6).map(|i| f64::from(i) / 10.0).collect();
        let (t, m, mean_n, sources, detectors) = match self {
            Experiment::NrRatio => (
                full_t,
                stages,
                vec![1.0],
                vec![BinMux],
                vec![NumberResolving],
            ),
            Experiment::ThresholdBias => (
                full_t,
                stages,
                vec![1.0],
                vec![Coherent, Fock, BinMux],
                vec![Threshold],
            ),
            Experiment::ThresholdRatio => (
                full_t,
                stages,
                vec![1.0],
                vec![Coherent, BinMux],
                vec![Threshold],
            ),
            Experiment::IntensitySweep => (
                vec![0.8],
                stages,
                (1..=20).map(|i| f64::from(i) / 20.0).collect(),
                vec![Coherent, BinMux],
                vec![NumberResolving, Threshold],
            ),
            Experiment::AsymptoticFloor => (
                full_t,
                stages,
                vec![0.2, 0.5, 1.0],
                vec![Coherent, BinMux],
                vec![Threshold],
            ),
            Experiment::Fluctuations => (
                vec![0.8],
                vec![5],
                vec![0.5],
                vec![Coherent, BinMux],
                vec![NumberResolving, Threshold],
            ),
            Experiment::McValidate => (vec![], stages, vec![1.0], vec![], vec![]),
        };
        Grids {
            t,
            m,
            mean_n,
            a,
            sources,
            detectors,
        }
    }

    fn uses_t(self) -> bool {
        self != Experiment::McValidate
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == key || (key == "asymptotic" && *e == Experiment::AsymptoticFloor))
            .ok_or_else(|| Error::config("experiment", format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Coherent,
    Fock,
    #[serde(rename = "binmux")]
    BinMux,
}

impl SourceKind {
    pub fn name(self) -> &'static str {
        match self {
            SourceKind::Coherent => "coherent",
            SourceKind::Fock => "fock",
            SourceKind::BinMux => "binmux",
        }
    }
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coherent" => Ok(SourceKind::Coherent),
            "fock" => Ok(SourceKind::Fock),
            "binmux" => Ok(SourceKind::BinMux),
            _ => Err(Error::config("sources", format!("unknown source `{s}`"))),
        }
    }
}

pub fn parse_detector(s: &str) -> Result<Detector> {
    match s {
        "nr" | "number_resolving" => Ok(Detector::NumberResolving),
        "threshold" => Ok(Detector::Threshold),
        _ => Err(Error::config(
            "detectors",
            format!("unknown detector `{s}`"),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Physics {
    pub eta_det: f64,
    pub eta_herald: f64,
    pub eta_stage: f64,
    pub eta_optics: f64,
    pub nu: usize,
}

impl Default for Physics {
    fn default() -> Self {
        Physics {
            eta_det: DEFAULT_ETA_DET,
            eta_herald: DEFAULT_ETA_HERALD,
            eta_stage: DEFAULT_ETA_STAGE,
            eta_optics: DEFAULT_ETA_OPTICS,
            nu: DEFAULT_NU,
        }
    }
}

impl Physics {
    pub fn network(&self, m: u32) -> BinMuxNetwork {
        BinMuxNetwork {
            m,
            eta_herald: self.eta_herald,
            eta_stage: self.eta_stage,
            eta_optics: self.eta_optics,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub t: Vec<f64>,
    pub m: Vec<u32>,
    pub mean_n: Vec<f64>,
    pub a: Vec<f64>,
    pub sources: Vec<SourceKind>,
    pub detectors: Vec<Detector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSettings {
    pub rounds: usize,
    pub trials_per_round: usize,
    pub redraw: PumpRedraw,
    pub truncation: Truncation,
}

impl Default for FluctuationSettings {
    fn default() -> Self {
        let d = FluctuationConfig::default();
        FluctuationSettings {
            rounds: d.rounds,
            trials_per_round: d.trials_per_round,
            redraw: d.redraw,
            truncation: d.truncation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    /// Simulated measurements per validation configuration.
    pub trials: usize,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings { trials: 100_000 }
    }
}

/// A fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub physics: Physics,
    pub grids: Grids,
    pub fluctuations: FluctuationSettings,
    pub mc: McSettings,
}

impl SweepConfig {
    pub fn new(experiment: Experiment) -> Self {
        SweepConfig {
            experiment,
            seed: DEFAULT_SEED,
            physics: Physics::default(),
            grids: experiment.default_grids(),
            fluctuations: FluctuationSettings::default(),
            mc: McSettings::default(),
        }
    }

    /// Defaults, then the file's global sections, then its
    /// `[experiment.<name>]` section, then `cli`.
    pub fn resolve(
        experiment: Experiment,
        file: Option<&ConfigFile>,
        cli: &Overrides,
    ) -> Result<Self> {
        let mut cfg = SweepConfig::new(experiment);
        if let Some(file) = file {
            cfg.apply(&file.global);
            if let Some(section) = file.experiment.get(experiment.name()) {
                cfg.apply(section);
            }
        }
        cfg.apply(cli);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *slot = v.clone();
            }
        }
        set(&mut self.seed, &o.seed);
        let p = &o.physics;
        set(&mut self.physics.eta_det, &p.eta_det);
        set(&mut self.physics.eta_herald, &p.eta_herald);
        set(&mut self.physics.eta_stage, &p.eta_stage);
        set(&mut self.physics.eta_optics, &p.eta_optics);
        set(&mut self.physics.nu, &p.nu);
        let g = &o.grids;
        set(&mut self.grids.t, &g.t);
        set(&mut self.grids.m, &g.m);
        set(&mut self.grids.mean_n, &g.mean_n);
        set(&mut self.grids.a, &g.a);
        set(&mut self.grids.sources, &g.sources);
        set(&mut self.grids.detectors, &g.detectors);
        let f = &o.fluctuations;
        set(&mut self.fluctuations.rounds, &f.rounds);
        set(&mut self.fluctuations.trials_per_round, &f.trials_per_round);
        set(&mut self.fluctuations.redraw, &f.redraw);
        set(&mut self.fluctuations.truncation, &f.truncation);
        set(&mut self.mc.trials, &o.mc.trials);
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.physics;
        for (name, v) in [
            ("physics.eta_det", p.eta_det),
            ("physics.eta_herald", p.eta_herald),
            ("physics.eta_stage", p.eta_stage),
            ("physics.eta_optics", p.eta_optics),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(name, format!("{v} is not in [0, 1]")));
            }
        }
        if p.nu == 0 {
            return Err(Error::config("physics.nu", "must be >= 1"));
        }
        let g = &self.grids;
        let e = self.experiment;
        if e.uses_t() {
            nonempty("grids.t", &g.t)?;
            if let Some(t) = g.t.iter().find(|t| !(0.0..=1.0).contains(*t)) {
                return Err(Error::config("grids.t", format!("{t} is not in [0, 1]")));
            }
            nonempty("grids.sources", &g.sources)?;
            nonempty("grids.detectors", &g.detectors)?;
        }
        nonempty("grids.mean_n", &g.mean_n)?;
        if let Some(n) = g.mean_n.iter().find(|n| !(n.is_finite() && **n > 0.0)) {
            return Err(Error::config(
                "grids.mean_n",
                format!("{n} is not finite and > 0"),
            ));
        }
        if g.sources.contains(&SourceKind::BinMux) {
            nonempty("grids.m", &g.m)?;
            if let Some(m) = g.m.iter().find(|m| !(1..=30).contains(*m)) {
                return Err(Error::config("grids.m", format!("{m} is not in 1..=30")));
            }
        }
        if e == Experiment::Fluctuations {
            nonempty("grids.a", &g.a)?;
            if let Some(a) = g.a.iter().find(|a| !(0.0..=0.6).contains(*a)) {
                return Err(Error::config("grids.a", format!("{a} is not in [0, 0.6]")));
            }
            if g.sources.contains(&SourceKind::Fock) {
                return Err(Error::config(
                    "grids.sources",
                    "a Fock source has no pump to fluctuate",
                ));
            }
            if self.fluctuations.rounds < 2 {
                return Err(Error::config(
                    "fluctuations.rounds",
                    "need at least 2 rounds",
                ));
            }
            if self.fluctuations.trials_per_round == 0 {
                return Err(Error::config(
                    "fluctuations.trials_per_round",
                    "must be >= 1",
                ));
            }
        }
        if e == Experiment::McValidate && self.mc.trials < 2 {
            return Err(Error::config("mc.trials", "need at least 2 trials"));
        }
        Ok(())
    }

    pub fn fluctuation_config(&self, target_mean: f64) -> FluctuationConfig {
        FluctuationConfig {
            a_grid: self.grids.a.clone(),
            rounds: self.fluctuations.rounds,
            trials_per_round: self.fluctuations.trials_per_round,
            nu: self.physics.nu,
            target_mean,
            redraw: self.fluctuations.redraw,
            truncation: self.fluctuations.truncation,
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config is always serializable");
        let digest = Sha256::digest(&canonical);
        hex::encode(&digest[..8])
    }
}

fn nonempty<T>(field: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        Err(Error::config(field, "must not be empty"))
    } else {
        Ok(())
    }
}

pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![start],
        _ => {
            let last = (points - 1) as f64;
            (0..points)
                .map(|i| start + (stop - start) * (i as f64 / last))
                .collect()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_det: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_herald: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_stage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_optics: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_n: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sources: Option<Vec<SourceKind>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detectors: Option<Vec<Detector>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluctuationOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials_per_round: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub redraw: Option<PumpRedraw>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Truncation>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

/// A partial configuration; unset fields leave the layer below untouched.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "is_default")]
    pub physics: PhysicsOverrides,
    #[serde(skip_serializing_if = "is_default")]
    pub grids: GridOverrides,
    #[serde(skip_serializing_if = "is_default")]
    pub fluctuations: FluctuationOverrides,
    #[serde(skip_serializing_if = "is_default")]
    pub mc: McOverrides,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

/// On-disk configuration: global sections plus per-experiment overrides.
///
/// ```toml
/// seed = 7
/// [physics]
/// eta_det = 0.9
/// [grids]
/// t = [0.2, 0.5, 0.8]
/// [experiment.intensity_sweep.grids]
/// m = [2, 4]
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(flatten)]
    pub global: Overrides,
    pub experiment: BTreeMap<String, Overrides>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))?;
        for name in file.experiment.keys() {
            if !Experiment::ALL.iter().any(|e| e.name() == name) {
                return Err(Error::config(
                    format!("experiment.{name}"),
                    "unknown experiment",
                ));
            }
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }
}

/// The compiled defaults written as a config file.
pub fn default_config_toml() -> String {
    let d = SweepConfig::new(Experiment::NrRatio);
    let global = Overrides {
        seed: Some(d.seed),
        physics: PhysicsOverrides {
            eta_det: Some(d.physics.eta_det),
            eta_herald: Some(d.physics.eta_herald),
            eta_stage: Some(d.physics.eta_stage),
            eta_optics: Some(d.physics.eta_optics),
            nu: Some(d.physics.nu),
        },
        grids: GridOverrides::default(),
        fluctuations: FluctuationOverrides {
            rounds: Some(d.fluctuations.rounds),
            trials_per_round: Some(d.fluctuations.trials_per_round),
            redraw: Some(d.fluctuations.redraw),
            truncation: Some(d.fluctuations.truncation),
        },
        mc: McOverrides {
            trials: Some(d.mc.trials),
        },
    };
    let experiment = Experiment::ALL
        .into_iter()
        .map(|e| {
            let g = e.default_grids();
            let keep_t = e.uses_t();
            let grids = GridOverrides {
                t: keep_t.then_some(g.t),
                m: Some(g.m),
                mean_n: Some(g.mean_n),
                a: (e == Experiment::Fluctuations).then_some(g.a),
                sources: keep_t.then_some(g.sources),
                detectors: keep_t.then_some(g.detectors),
            };
            (
                e.name().to_string(),
                Overrides {
                    grids,
                    ..Overrides::default()
                },
            )
        })
        .collect();
    toml::to_string(&ConfigFile { global, experiment }).expect("defaults are always serializable")
}
