//! Gaussian pump fluctuations: Monte Carlo rounds with a 68% band, next to
//! the expected MSE by quadrature over the pump distribution.

use subshot::detection::{ChannelSpec, Detector, DEFAULT_ETA_DET};
use subshot::montecarlo::{
    fluctuation_moments, fluctuation_study, FluctuatingSource, FluctuationConfig,
};
use subshot::sources::BinMuxNetwork;

fn main() {
    let cfg = FluctuationConfig::default();
    let ch = ChannelSpec::new(0.8, DEFAULT_ETA_DET).unwrap();
    println!(
        "t = 0.8, <n> = {}, {} rounds of {} measurements, pump redraw {}",
        cfg.target_mean, cfg.rounds, cfg.trials_per_round, cfg.redraw
    );
    for (name, source) in [
        ("coherent", FluctuatingSource::Coherent),
        (
            "binmux m=5",
            FluctuatingSource::BinMux(BinMuxNetwork::new(5)),
        ),
    ] {
        let mc = fluctuation_study(&cfg, source, Detector::NumberResolving, &ch, 2020).unwrap();
        let exact =
            fluctuation_moments(&cfg, source, Detector::NumberResolving, &ch, 2000).unwrap();
        println!("\n{name}, number-resolving");
        println!(
            "{:>4} {:>10} {:>10} {:>10} {:>10}",
            "a", "MC MSE", "16%", "84%", "expected"
        );
        for (s, e) in mc.iter().zip(&exact) {
            println!(
                "{:4.1} {:10.3e} {:10.3e} {:10.3e} {:10.3e}",
                s.a, s.mean_mse, s.ci_low, s.ci_high, e.mse
            );
        }
        println!(
            "inflation at a = 0.6: {:.2}x (expected {:.2}x)",
            mc.last().unwrap().mean_mse / mc[0].mean_mse,
            exact.last().unwrap().mse / exact[0].mse
        );
    }
}
