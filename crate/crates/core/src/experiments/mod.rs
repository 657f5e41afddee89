//! Grid sweeps producing plot-ready rows.
//!
//! Every experiment evaluates the full cross product of its grids and emits
//! rows in grid order: source, stage count, mean photon number, detector,
//! then transmission (and fluctuation level, where swept).

mod config;

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{
    default_config_toml, linspace, parse_detector, ConfigFile, Experiment, FluctuationOverrides,
    FluctuationSettings, GridOverrides, Grids, McOverrides, McSettings, Overrides, Physics,
    PhysicsOverrides, SourceKind, SweepConfig, CONFIG_ENV, DEFAULT_SEED,
};

use crate::detection::{ChannelSpec, Detector};
use crate::error::{Error, Result};
use crate::estimators::{asymptotic_mse_floor, exact_report, EstimatorReport};
use crate::montecarlo::{
    canned_validation_set, fluctuation_study, validate_against_exact, FluctuatingSource, McSummary,
};
use crate::sources::{tune_mu, SourceSpec};

/// Number of standard errors within which Monte Carlo must match exact results.
pub const MC_TOLERANCE_SE: f64 = 4.0;

/// One output line. Empty cells mean "not applicable" or "undefined".
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub experiment: Experiment,
    pub source: &'static str,
    pub detector: &'static str,
    pub m: Option<u32>,
    pub mean_n: Option<f64>,
    /// Pump strength of a multiplexed source.
    pub mu: Option<f64>,
    pub t: f64,
    pub a: Option<f64>,
    pub nu: usize,
    pub expectation: f64,
    pub bias: f64,
    pub variance: Option<f64>,
    pub mse: f64,
    pub relative_mse_percent: Option<f64>,
    pub ratio_to_snl: Option<f64>,
    pub floor_percent: Option<f64>,
    pub mse_inflation: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub trials: Option<usize>,
    pub mc_mean: Option<f64>,
    pub mc_se_mean: Option<f64>,
    pub mc_mse: Option<f64>,
    pub mc_se_mse: Option<f64>,
    pub z_mean: Option<f64>,
    pub z_mse: Option<f64>,
    pub seed: Option<u64>,
    pub config_hash: String,
}

impl SweepRow {
    pub const COLUMNS: [&'static str; 28] = [
        "experiment",
        "source",
        "detector",
        "m",
        "mean_n",
        "mu",
        "t",
        "a",
        "nu",
        "expectation",
        "bias",
        "variance",
        "mse",
        "relative_mse_percent",
        "ratio_to_snl",
        "floor_percent",
        "mse_inflation",
        "ci_low",
        "ci_high",
        "trials",
        "mc_mean",
        "mc_se_mean",
        "mc_mse",
        "mc_se_mse",
        "z_mean",
        "z_mse",
        "seed",
        "config_hash",
    ];

    fn exact(
        cfg: &SweepConfig,
        series: &Series,
        detector: Detector,
        report: &EstimatorReport,
        hash: &str,
    ) -> Self {
        SweepRow {
            experiment: cfg.experiment,
            source: series.source.label(),
            detector: detector.label(),
            m: series.source.stages(),
            mean_n: Some(series.mean_n),
            mu: series.source.pump_mu(),
            t: report.t,
            a: None,
            nu: cfg.physics.nu,
            expectation: report.expectation,
            bias: report.bias,
            variance: Some(report.variance),
            mse: report.mse,
            relative_mse_percent: report.relative_mse_percent,
            ratio_to_snl: report.ratio_to_snl,
            floor_percent: None,
            mse_inflation: None,
            ci_low: None,
            ci_high: None,
            trials: None,
            mc_mean: None,
            mc_se_mean: None,
            mc_mse: None,
            mc_se_mse: None,
            z_mean: None,
            z_mse: None,
            seed: None,
            config_hash: hash.to_string(),
        }
    }

    /// Whether Monte Carlo agrees with the exact values, for validation rows.
    pub fn mc_consistent(&self) -> Option<bool> {
        Some(self.z_mean?.abs() <= MC_TOLERANCE_SE && self.z_mse?.abs() <= MC_TOLERANCE_SE)
    }
}

/// A source at one grid point, with the pump already tuned.
#[derive(Debug, Clone, Copy)]
struct Series {
    source: SourceSpec,
    mean_n: f64,
}

fn build_series(cfg: &SweepConfig) -> Result<Vec<Series>> {
    let g = &cfg.grids;
    let mut points = Vec::new();
    for &kind in &g.sources {
        match kind {
            SourceKind::Coherent => points.extend(g.mean_n.iter().map(|&n| (kind, None, n))),
            // A Fock source carries exactly one photon regardless of the mean grid.
            SourceKind::Fock => points.push((kind, None, 1.0)),
            SourceKind::BinMux => {
                for &m in &g.m {
                    points.extend(g.mean_n.iter().map(|&n| (kind, Some(m), n)));
                }
            }
        }
    }
    points
        .into_par_iter()
        .map(|(kind, m, mean_n)| {
            let source = match (kind, m) {
                (SourceKind::Coherent, _) => SourceSpec::Coherent { mean: mean_n },
                (SourceKind::Fock, _) => SourceSpec::Fock { n: 1 },
                (SourceKind::BinMux, Some(m)) => {
                    let network = cfg.physics.network(m);
                    let mu = tune_mu(&network, mean_n).map_err(|e| {
                        Error::Numeric(format!("cannot tune m = {m} to mean_n = {mean_n}: {e}"))
                    })?;
                    SourceSpec::BinMux(network.with_mu(mu))
                }
                (SourceKind::BinMux, None) => unreachable!("multiplexed points always carry m"),
            };
            Ok(Series { source, mean_n })
        })
        .collect()
}

/// Evaluates an experiment; rows come back in deterministic grid order.
pub fn run_experiment(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::Fluctuations => run_fluctuations(cfg),
        Experiment::McValidate => run_mc_validate(cfg),
        _ => run_exact(cfg),
    }
}

fn run_exact(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let hash = cfg.hash();
    let series = build_series(cfg)?;
    let mut jobs = Vec::new();
    for s in &series {
        for &d in &cfg.grids.detectors {
            jobs.extend(cfg.grids.t.iter().map(|&t| (s, d, t)));
        }
    }
    let floor = cfg.experiment == Experiment::AsymptoticFloor;
    jobs.into_par_iter()
        .map(|(s, detector, t)| {
            let ch = ChannelSpec::new(t, cfg.physics.eta_det)?;
            let report = exact_report(detector, &s.source, &ch, cfg.physics.nu)?;
            let mut row = SweepRow::exact(cfg, s, detector, &report, &hash);
            if floor {
                row.floor_percent = match detector {
                    Detector::Threshold => asymptotic_mse_floor(&s.source, &ch)?,
                    // Unbiased, so the floor is zero.
                    Detector::NumberResolving => (t > 0.0).then_some(0.0),
                };
            }
            Ok(row)
        })
        .collect()
}

fn run_fluctuations(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let hash = cfg.hash();
    let mut rows = Vec::new();
    for series in build_series(cfg)? {
        let source = match series.source {
            SourceSpec::Coherent { .. } => FluctuatingSource::Coherent,
            SourceSpec::BinMux(p) => FluctuatingSource::BinMux(p.network),
            SourceSpec::Fock { .. } => unreachable!("rejected by validation"),
        };
        let study_cfg = cfg.fluctuation_config(series.mean_n);
        for &detector in &cfg.grids.detectors {
            for &t in &cfg.grids.t {
                let ch = ChannelSpec::new(t, cfg.physics.eta_det)?;
                let exact = exact_report(detector, &series.source, &ch, cfg.physics.nu)?;
                let study = fluctuation_study(&study_cfg, source, detector, &ch, cfg.seed)?;
                rows.extend(fluctuation_rows(
                    cfg, &series, detector, &exact, &study, &hash,
                ));
            }
        }
    }
    Ok(rows)
}

/// The inflation baseline is the `a = 0` run when present, which shares random
/// numbers with the others, and the exact MSE otherwise.
fn fluctuation_rows(
    cfg: &SweepConfig,
    series: &Series,
    detector: Detector,
    exact: &EstimatorReport,
    study: &[McSummary],
    hash: &str,
) -> Vec<SweepRow> {
    let baseline = study
        .iter()
        .find(|s| s.a == 0.0)
        .map_or(exact.mse, |s| s.mean_mse);
    study
        .iter()
        .map(|s| {
            let mut row = SweepRow::exact(cfg, series, detector, exact, hash);
            row.a = Some(s.a);
            row.expectation = s.mean_estimate;
            row.bias = s.mean_estimate - exact.t;
            row.variance = None;
            row.mse = s.mean_mse;
            row.relative_mse_percent =
                crate::estimators::RelativeMse::RootMse.percent(s.mean_mse, exact.t);
            row.ratio_to_snl = None;
            row.mse_inflation = (baseline > 0.0).then(|| s.mean_mse / baseline);
            row.ci_low = Some(s.ci_low);
            row.ci_high = Some(s.ci_high);
            row.trials = Some(s.n_rounds * cfg.fluctuations.trials_per_round);
            row.mc_se_mse = Some(s.se_mean_mse);
            row.seed = Some(s.seed);
            row
        })
        .collect()
}

fn run_mc_validate(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let hash = cfg.hash();
    let eta = cfg.physics.eta_det;
    let set = canned_validation_set(cfg.physics.network(1))?;
    let mut rows = Vec::with_capacity(set.len());
    for (i, (label, detector, source, t)) in set.into_iter().enumerate() {
        let ch = ChannelSpec::new(t, eta)?;
        // Distinct seeds per configuration keep the checks independent.
        let seed = cfg.seed.wrapping_add(i as u64);
        let v = validate_against_exact(
            &label,
            detector,
            source,
            &ch,
            cfg.physics.nu,
            cfg.mc.trials,
            seed,
        )?;
        let mean_n = match source {
            SourceSpec::Coherent { mean } => mean,
            SourceSpec::Fock { n } => n as f64,
            SourceSpec::BinMux(_) => crate::sources::source_pmf_at_sample(&source)?.mean(),
        };
        let series = Series { source, mean_n };
        let mut row = SweepRow::exact(cfg, &series, detector, &v.exact, &hash);
        row.trials = Some(v.mc.trials);
        row.mc_mean = Some(v.mc.mean);
        row.mc_se_mean = Some(v.mc.se_mean);
        row.mc_mse = Some(v.mc.mse);
        row.mc_se_mse = Some(v.mc.se_mse);
        row.z_mean = Some(v.z_mean);
        row.z_mse = Some(v.z_mse);
        row.seed = Some(seed);
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

pub fn write_rows<W: Write>(rows: &[SweepRow], format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => write_csv(rows, out),
        OutputFormat::Json => write_json(rows, out),
    }
}

/// Header row first, then one line per row; absent values are empty cells.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    let csv_err = |e: csv::Error| Error::Output(e.to_string());
    w.write_record(SweepRow::COLUMNS).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// A JSON array of row objects; absent values are `null`.
pub fn write_json<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, rows).map_err(|e| Error::Output(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}
