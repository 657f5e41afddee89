//! Photon-by-photon simulation of whole measurements, compared with the exact
//! moments.

use subshot::detection::{ChannelSpec, DEFAULT_ETA_DET};
use subshot::montecarlo::{canned_validation_set, validate_against_exact};
use subshot::sources::BinMuxNetwork;

fn main() {
    let trials = 100_000;
    println!("{trials} simulated measurements of 200 pulses each");
    println!(
        "{:>20} {:>10} {:>10} {:>7} {:>10} {:>10} {:>7}",
        "", "E exact", "E mc", "z", "MSE exact", "MSE mc", "z"
    );
    for (i, (label, detector, source, t)) in canned_validation_set(BinMuxNetwork::new(1))
        .unwrap()
        .into_iter()
        .enumerate()
    {
        let ch = ChannelSpec::new(t, DEFAULT_ETA_DET).unwrap();
        let v = validate_against_exact(&label, detector, source, &ch, 200, trials, 7 + i as u64)
            .unwrap();
        println!(
            "{label:>20} {:10.5} {:10.5} {:7.2} {:10.3e} {:10.3e} {:7.2}",
            v.exact.expectation, v.mc.mean, v.z_mean, v.exact.mse, v.mc.mse, v.z_mse
        );
    }
}
