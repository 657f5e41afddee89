//! Command-line front end over [`crate::experiments`].
//!
//! Exit status: 0 on success, 1 on I/O failure, 2 on usage or validation
//! errors, 3 on numeric failures or Monte Carlo disagreement.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::experiments::{
    default_config_toml, linspace, parse_detector, run_experiment, write_rows, ConfigFile,
    Experiment, OutputFormat, Overrides, SourceKind, SweepConfig, CONFIG_ENV,
};
use crate::montecarlo::{PumpRedraw, Truncation};

#[derive(Debug, Parser)]
#[command(
    name = "subshot",
    version,
    about = "Transmission-estimation sweeps for sub-shot-noise light sources"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Number-resolving MSE ratio against the shot-noise limit over t.
    NrRatio(RunArgs),
    /// Threshold-estimator bias over t.
    ThresholdBias(RunArgs),
    /// Threshold-detector MSE ratio against the shot-noise limit over t.
    ThresholdRatio(RunArgs),
    /// MSE ratios against the mean photon number at fixed t.
    IntensitySweep(RunArgs),
    /// Bias-limited relative MSE as the number of repetitions grows without bound.
    Asymptotic(RunArgs),
    /// Monte Carlo MSE under Gaussian pump fluctuations.
    Fluctuations(RunArgs),
    /// Compare Monte Carlo against exact results on canned configurations.
    McValidate(RunArgs),
    /// Print the resolved configuration as TOML.
    ShowConfig(ShowArgs),
}

#[derive(Debug, Args)]
struct ShowArgs {
    /// Show one experiment's resolved settings instead of all defaults.
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML configuration file; defaults to $SUBSHOT_CONFIG when set.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Transmission grid: `start:stop:points` or a comma-separated list.
    #[arg(long)]
    t_grid: Option<String>,
    /// Stage counts: `lo..hi` or a comma-separated list.
    #[arg(long)]
    m: Option<String>,
    /// Mean photon numbers at the sample: `start:stop:points` or a list.
    #[arg(long)]
    mean_n: Option<String>,
    /// Relative pump fluctuations: `start:stop:points` or a list.
    #[arg(long)]
    a_grid: Option<String>,
    /// Comma-separated subset of coherent, fock, binmux.
    #[arg(long)]
    sources: Option<String>,
    /// Comma-separated subset of nr, threshold.
    #[arg(long)]
    detector: Option<String>,
    #[arg(long)]
    nu: Option<usize>,
    /// Detector efficiency.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    eta_stage: Option<f64>,
    #[arg(long)]
    eta_herald: Option<f64>,
    /// Transmission of the optics after the delay network.
    #[arg(long)]
    optics: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo measurements per validation configuration.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    trials_per_round: Option<usize>,
    /// per_repetition, per_measurement or every:<n>.
    #[arg(long)]
    redraw: Option<PumpRedraw>,
    #[arg(long, value_parser = parse_truncation)]
    truncation: Option<Truncation>,
    /// Output file; defaults to `<experiment>.<format>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json; inferred from --out when omitted.
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
}

fn parse_truncation(s: &str) -> Result<Truncation, String> {
    match s {
        "reject" => Ok(Truncation::Reject),
        "clamp" => Ok(Truncation::Clamp),
        _ => Err(format!("expected reject or clamp, got `{s}`")),
    }
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    match s {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        _ => Err(format!("expected csv or json, got `{s}`")),
    }
}

fn grid(field: &str, s: &str) -> Result<Vec<f64>, Error> {
    let bad = |v: &str| Error::config(field, format!("cannot parse `{v}`"));
    let parts: Vec<&str> = s.split(':').collect();
    if let [start, stop, points] = parts[..] {
        let start: f64 = start.trim().parse().map_err(|_| bad(s))?;
        let stop: f64 = stop.trim().parse().map_err(|_| bad(s))?;
        let points: usize = points.trim().parse().map_err(|_| bad(s))?;
        return Ok(linspace(start, stop, points));
    }
    s.split(',')
        .map(|v| v.trim().parse().map_err(|_| bad(v)))
        .collect()
}

fn stage_list(s: &str) -> Result<Vec<u32>, Error> {
    let bad = || Error::config("grids.m", format!("cannot parse `{s}`"));
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u32 = hi
            .trim_start_matches('=')
            .trim()
            .parse()
            .map_err(|_| bad())?;
        return Ok((lo..=hi).collect());
    }
    s.split(',')
        .map(|v| v.trim().parse().map_err(|_| bad()))
        .collect()
}

fn list<T>(s: &str, parse: impl Fn(&str) -> Result<T, Error>) -> Result<Vec<T>, Error> {
    s.split(',').map(|v| parse(v.trim())).collect()
}

impl RunArgs {
    fn overrides(&self) -> Result<Overrides, Error> {
        let mut o = Overrides {
            seed: self.seed,
            ..Overrides::default()
        };
        o.physics.eta_det = self.eta;
        o.physics.eta_herald = self.eta_herald;
        o.physics.eta_stage = self.eta_stage;
        o.physics.eta_optics = self.optics;
        o.physics.nu = self.nu;
        o.grids.t = self
            .t_grid
            .as_deref()
            .map(|s| grid("grids.t", s))
            .transpose()?;
        o.grids.mean_n = self
            .mean_n
            .as_deref()
            .map(|s| grid("grids.mean_n", s))
            .transpose()?;
        o.grids.a = self
            .a_grid
            .as_deref()
            .map(|s| grid("grids.a", s))
            .transpose()?;
        o.grids.m = self.m.as_deref().map(stage_list).transpose()?;
        o.grids.sources = self
            .sources
            .as_deref()
            .map(|s| list(s, str::parse::<SourceKind>))
            .transpose()?;
        o.grids.detectors = self
            .detector
            .as_deref()
            .map(|s| list(s, parse_detector))
            .transpose()?;
        o.fluctuations.rounds = self.rounds;
        o.fluctuations.trials_per_round = self.trials_per_round;
        o.fluctuations.redraw = self.redraw;
        o.fluctuations.truncation = self.truncation;
        o.mc.trials = self.trials;
        Ok(o)
    }

    fn output(&self, experiment: Experiment) -> (PathBuf, OutputFormat) {
        let inferred = self
            .out
            .as_deref()
            .and_then(Path::extension)
            .and_then(|e| parse_format(&e.to_string_lossy()).ok());
        let format = self.format.or(inferred).unwrap_or_default();
        let path = self.out.clone().unwrap_or_else(|| {
            PathBuf::from(format!("{}.{}", experiment.name(), format.extension()))
        });
        (path, format)
    }
}

fn load_config(explicit: Option<&Path>) -> Result<Option<ConfigFile>, Error> {
    let env = std::env::var_os(CONFIG_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    match explicit.map(Path::to_path_buf).or(env) {
        Some(path) => ConfigFile::load(&path).map(Some).map_err(|e| match e {
            Error::Io(io) => Error::Io(io::Error::new(
                io.kind(),
                format!("{}: {io}", path.display()),
            )),
            other => other,
        }),
        None => Ok(None),
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Output(_) => 1,
        Error::Domain { .. } | Error::Config { .. } => 2,
        Error::Numeric(_) => 3,
    }
}

fn run_sweep(experiment: Experiment, args: &RunArgs) -> Result<i32, Error> {
    let file = load_config(args.config.as_deref())?;
    let cfg = SweepConfig::resolve(experiment, file.as_ref(), &args.overrides()?)?;
    let rows = run_experiment(&cfg)?;
    let (path, format) = args.output(experiment);
    let mut out = BufWriter::new(File::create(&path)?);
    write_rows(&rows, format, &mut out)?;
    out.flush()?;
    let mut summary = format!("{experiment}: {} rows -> {}", rows.len(), path.display());
    let mut code = 0;
    if experiment == Experiment::McValidate {
        let ok = rows
            .iter()
            .filter(|r| r.mc_consistent() == Some(true))
            .count();
        summary.push_str(&format!(" ({ok}/{} within 4 SE)", rows.len()));
        if ok != rows.len() {
            code = 3;
        }
    }
    println!("{summary}");
    Ok(code)
}

fn show_config(args: &ShowArgs) -> Result<i32, Error> {
    let file = load_config(args.config.as_deref())?;
    match &args.experiment {
        None if file.is_none() => print!("{}", default_config_toml()),
        name => {
            let experiments = match name {
                Some(n) => vec![n.parse::<Experiment>()?],
                None => Experiment::ALL.to_vec(),
            };
            for e in experiments {
                let cfg = SweepConfig::resolve(e, file.as_ref(), &Overrides::default())?;
                println!("# {e} (config hash {})", cfg.hash());
                let text = toml::to_string(&cfg).map_err(|err| Error::Output(err.to_string()))?;
                println!("{text}");
            }
        }
    }
    Ok(0)
}

/// Runs the command line and returns the process exit status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::NrRatio(a) => run_sweep(Experiment::NrRatio, a),
        Command::ThresholdBias(a) => run_sweep(Experiment::ThresholdBias, a),
        Command::ThresholdRatio(a) => run_sweep(Experiment::ThresholdRatio, a),
        Command::IntensitySweep(a) => run_sweep(Experiment::IntensitySweep, a),
        Command::Asymptotic(a) => run_sweep(Experiment::AsymptoticFloor, a),
        Command::Fluctuations(a) => run_sweep(Experiment::Fluctuations, a),
        Command::McValidate(a) => run_sweep(Experiment::McValidate, a),
        Command::ShowConfig(a) => show_config(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_syntax() {
        assert_eq!(grid("t", "0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(grid("t", "0.2, 0.4").unwrap(), vec![0.2, 0.4]);
        assert!(grid("t", "0:x:3").is_err());
        assert_eq!(stage_list("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(stage_list("2").unwrap(), vec![2]);
        assert_eq!(stage_list("2,5").unwrap(), vec![2, 5]);
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(cli_main(["subshot", "no-such-command"]), 2);
        assert_eq!(cli_main(["subshot", "nr-ratio", "--bogus"]), 2);
        assert_eq!(cli_main(["subshot", "nr-ratio", "--m", "two"]), 2);
    }

    #[test]
    fn help_exits_0() {
        assert_eq!(cli_main(["subshot", "--help"]), 0);
    }
}
