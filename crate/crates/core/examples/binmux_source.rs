//! The multiplexed heralded source: pump tuning, synchronization probability
//! and photon statistics as the number of stages grows.

use subshot::sources::{binmux_output_pmf, tune_mu, BinMuxNetwork};

fn main() {
    let target = 1.0;
    println!("target mean photon number at the sample: {target}");
    println!(" m  windows      mu     P_sync   P(0)     P(1)     P(2+)    Fano");
    for m in 1..=6 {
        let network = BinMuxNetwork::new(m);
        let mu = tune_mu(&network, target).unwrap();
        let params = network.with_mu(mu);
        let pmf = binmux_output_pmf(&params).unwrap();
        let multi = 1.0 - pmf.prob(0) - pmf.prob(1);
        println!(
            "{m:2} {:8} {mu:8.4} {:8.4} {:8.4} {:8.4} {:8.4} {:7.4}",
            network.windows(),
            params.sync_probability(),
            pmf.prob(0),
            pmf.prob(1),
            multi,
            pmf.moments().fano.unwrap()
        );
    }

    // Without network loss more stages always help.
    let lossless = BinMuxNetwork {
        eta_stage: 1.0,
        ..BinMuxNetwork::new(6)
    };
    let mu = tune_mu(&lossless, target).unwrap();
    let fano = binmux_output_pmf(&lossless.with_mu(mu))
        .unwrap()
        .moments()
        .fano
        .unwrap();
    println!("lossless stages, m = 6: Fano {fano:.4}");
}
