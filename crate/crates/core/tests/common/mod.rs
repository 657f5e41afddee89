//! Event-level enumeration of the multiplexed source.

const N_CUT: usize = 60;

fn choose(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Each photon independently survives with probability `eta`.
fn lose(dist: &[f64], eta: f64) -> Vec<f64> {
    let mut out = vec![0.0; dist.len()];
    for (n, &p) in dist.iter().enumerate() {
        for (k, slot) in out.iter_mut().enumerate().take(n + 1) {
            *slot += p * choose(n, k) * eta.powi(k as i32) * (1.0 - eta).powi((n - k) as i32);
        }
    }
    out
}

/// Pairs per window are Poissonian; the herald detector fires on each idler
/// independently; the earliest heralded window is routed through every stage.
pub fn enumerate(m: u32, mu: f64, eta_h: f64, eta_s: f64, eta_o: f64) -> Vec<f64> {
    let mut pairs = vec![(-mu).exp(); N_CUT];
    for n in 1..N_CUT {
        pairs[n] = pairs[n - 1] * mu / n as f64;
    }
    let click: Vec<f64> = (0..N_CUT)
        .map(|n| 1.0 - (1.0 - eta_h).powi(n as i32))
        .collect();
    let mut nothing_yet = 1.0;
    let mut selected = vec![0.0; N_CUT];
    for _window in 0..(1u64 << m) {
        let mut miss = 0.0;
        for n in 0..N_CUT {
            selected[n] += nothing_yet * pairs[n] * click[n];
            miss += pairs[n] * (1.0 - click[n]);
        }
        nothing_yet *= miss;
    }
    selected[0] += nothing_yet;
    for _stage in 0..m {
        selected = lose(&selected, eta_s);
    }
    lose(&selected, eta_o)
}
