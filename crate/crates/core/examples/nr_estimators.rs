//! Number-resolving detection: exact MSE of the transmission estimator for
//! coherent, single-photon and multiplexed light, and the advantage over the
//! shot-noise limit.

use subshot::detection::{ChannelSpec, DEFAULT_ETA_DET};
use subshot::estimators::{exact_report_nr, DEFAULT_NU};
use subshot::sources::{BinMuxNetwork, SourceSpec};

fn main() {
    let sources = [
        ("coherent", SourceSpec::Coherent { mean: 1.0 }),
        ("fock", SourceSpec::Fock { n: 1 }),
        (
            "binmux m=2",
            SourceSpec::binmux_tuned(BinMuxNetwork::new(2), 1.0).unwrap(),
        ),
        (
            "binmux m=5",
            SourceSpec::binmux_tuned(BinMuxNetwork::new(5), 1.0).unwrap(),
        ),
    ];
    println!("nu = {DEFAULT_NU}, eta = {DEFAULT_ETA_DET}; columns are MSE (ratio to SNL)");
    print!("{:>5}", "t");
    for (name, _) in &sources {
        print!("{name:>22}");
    }
    println!();
    for t in [0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
        let ch = ChannelSpec::new(t, DEFAULT_ETA_DET).unwrap();
        print!("{t:5.2}");
        for (_, s) in &sources {
            let r = exact_report_nr(s, &ch, DEFAULT_NU).unwrap();
            print!("{:>13.3e} ({:5.3})", r.mse, r.ratio_to_snl.unwrap());
        }
        println!();
    }
}
