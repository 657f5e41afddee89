//! With enough repetitions the threshold estimator's error is all bias. The
//! floor is the relative error that remains.

use subshot::detection::{ChannelSpec, DEFAULT_ETA_DET};
use subshot::estimators::{asymptotic_mse_floor, exact_report_threshold};
use subshot::sources::{BinMuxNetwork, SourceSpec};

fn main() {
    let coherent = SourceSpec::Coherent { mean: 0.5 };
    let multiplexed: Vec<_> = (1..=6)
        .map(|m| SourceSpec::binmux_tuned(BinMuxNetwork::new(m), 0.5).unwrap())
        .collect();
    println!("relative error floor [%] at <n> = 0.5");
    println!("{:>5} {:>9} {:>9} {:>6}", "t", "coherent", "binmux", "m");
    for i in 1..=9 {
        let t = i as f64 / 10.0;
        let ch = ChannelSpec::new(t, DEFAULT_ETA_DET).unwrap();
        let c = asymptotic_mse_floor(&coherent, &ch).unwrap().unwrap();
        let (m, b) = multiplexed
            .iter()
            .map(|s| {
                (
                    s.stages().unwrap(),
                    asymptotic_mse_floor(s, &ch).unwrap().unwrap(),
                )
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        println!("{t:5.1} {c:9.3} {b:9.3} {m:6}");
    }

    let ch = ChannelSpec::new(0.6, DEFAULT_ETA_DET).unwrap();
    println!("\napproach to the floor, coherent light at t = 0.6");
    for nu in [100, 10_000, 1_000_000] {
        let r = exact_report_threshold(&coherent, &ch, nu).unwrap();
        println!(
            "nu = {nu:>9}: MSE / bias^2 = {:.4}",
            r.mse / (r.bias * r.bias)
        );
    }
}
