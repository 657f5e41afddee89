//! Threshold detection saturates, so the click-rate estimator is biased
//! everywhere except at t = 0 and t = 1. Sub-Poissonian light suffers less.

use subshot::detection::{ChannelSpec, DEFAULT_ETA_DET};
use subshot::estimators::exact_report_threshold;
use subshot::sources::{BinMuxNetwork, SourceSpec};

fn main() {
    let mut sources = vec![
        ("coherent".to_string(), SourceSpec::Coherent { mean: 1.0 }),
        ("fock".to_string(), SourceSpec::Fock { n: 1 }),
    ];
    for m in [1, 3, 5] {
        sources.push((
            format!("binmux m={m}"),
            SourceSpec::binmux_tuned(BinMuxNetwork::new(m), 1.0).unwrap(),
        ));
    }
    print!("{:>5}", "t");
    for (name, _) in &sources {
        print!("{name:>13}");
    }
    println!();
    for i in 0..=10 {
        let t = i as f64 / 10.0;
        let ch = ChannelSpec::new(t, DEFAULT_ETA_DET).unwrap();
        print!("{t:5.1}");
        for (_, s) in &sources {
            print!("{:13.5}", exact_report_threshold(s, &ch, 200).unwrap().bias);
        }
        println!();
    }
}
