//! Configuration layering and machine-readable output. Writes CSV for a
//! threshold-ratio sweep to stdout, or to the path given as first argument.

use std::fs::File;
use std::io::{self, Write};

use subshot::experiments::{write_csv, ConfigFile, Experiment, Overrides, SweepConfig};

const CONFIG: &str = r#"
seed = 1
[physics]
nu = 500

[grids]
t = [0.5, 0.8, 0.9, 0.95, 0.98, 1.0]

[experiment.threshold_ratio.grids]
m = [2, 3]
"#;

fn main() {
    let file = ConfigFile::parse(CONFIG).unwrap();
    let cli = Overrides::default();
    let cfg = SweepConfig::resolve(Experiment::ThresholdRatio, Some(&file), &cli).unwrap();
    let rows = subshot::experiments::run_experiment(&cfg).unwrap();
    let out: Box<dyn Write> = match std::env::args().nth(1) {
        Some(path) => Box::new(File::create(path).unwrap()),
        None => Box::new(io::stdout()),
    };
    write_csv(&rows, out).unwrap();
    eprintln!("{} rows, config hash {}", rows.len(), cfg.hash());
}
