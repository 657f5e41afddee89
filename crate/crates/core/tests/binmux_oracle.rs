//! Window-by-window enumeration of the multiplexed source, checked against
//! the closed-form pipeline.

mod common;

use common::enumerate;
use subshot::sources::{binmux_output_pmf, BinMuxNetwork};

fn compare(m: u32, mu: f64, eta_h: f64, eta_s: f64, eta_o: f64) {
    let net = BinMuxNetwork {
        m,
        eta_herald: eta_h,
        eta_stage: eta_s,
        eta_optics: eta_o,
    };
    let closed = binmux_output_pmf(&net.with_mu(mu)).unwrap();
    let brute = enumerate(m, mu, eta_h, eta_s, eta_o);
    for (n, &b) in brute.iter().enumerate() {
        let diff = (closed.prob(n) - b).abs();
        assert!(
            diff < 1e-10,
            "m={m} mu={mu} n={n}: {} vs {b}",
            closed.prob(n)
        );
    }
}

#[test]
fn matches_reference_configuration() {
    compare(2, 0.2, 0.5, 0.95, 0.9);
}

#[test]
fn matches_on_parameter_grid() {
    for m in 1..=3 {
        for mu in [0.01, 0.1, 0.25, 0.5] {
            for (eh, es, eo) in [
                (0.5, 0.95, 0.9),
                (0.85, 0.88, 0.9),
                (1.0, 1.0, 1.0),
                (0.2, 0.6, 0.5),
            ] {
                compare(m, mu, eh, es, eo);
            }
        }
    }
}

#[test]
fn no_pump_is_vacuum() {
    let brute = enumerate(2, 0.0, 0.5, 0.9, 0.9);
    assert_eq!(brute[0], 1.0);
    compare(2, 0.0, 0.5, 0.9, 0.9);
}
