//! Ratio to the shot-noise limit at t = 0.8 as the mean photon number varies,
//! through the sweep harness.

use subshot::experiments::{run_experiment, Experiment, SourceKind, SweepConfig};

fn main() {
    let mut cfg = SweepConfig::new(Experiment::IntensitySweep);
    cfg.grids.sources = vec![SourceKind::BinMux];
    cfg.grids.m = vec![2, 4, 6];
    let rows = run_experiment(&cfg).unwrap();

    for detector in ["nr", "threshold"] {
        println!("{detector} detection");
        println!("{:>6} {:>8} {:>8} {:>8}", "<n>", "m=2", "m=4", "m=6");
        for &n in &cfg.grids.mean_n {
            print!("{n:6.2}");
            for &m in &cfg.grids.m {
                let row = rows
                    .iter()
                    .find(|r| r.detector == detector && r.m == Some(m) && r.mean_n == Some(n))
                    .unwrap();
                print!(" {:8.4}", row.ratio_to_snl.unwrap());
            }
            println!();
        }
        let best = rows
            .iter()
            .filter(|r| r.detector == detector)
            .max_by(|a, b| a.ratio_to_snl.partial_cmp(&b.ratio_to_snl).unwrap())
            .unwrap();
        println!(
            "best: {:.3} at <n> = {:.2}, m = {}\n",
            best.ratio_to_snl.unwrap(),
            best.mean_n.unwrap(),
            best.m.unwrap()
        );
    }
}
