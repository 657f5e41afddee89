//! Building blocks: Poisson and number states, loss, sums over repetitions,
//! and sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use subshot::photon_stats::{apply_loss, convolve, fock_pmf, iid_sum, poisson_pmf, TRUNCATION_EPS};

fn main() {
    let laser = poisson_pmf(1.0, TRUNCATION_EPS).unwrap();
    println!(
        "Poisson(1): {} entries, tail below {:.1e}",
        laser.probs().len(),
        laser.cutoff_mass()
    );

    // Loss keeps Poisson light Poissonian but turns a photon into a coin flip.
    for (name, pmf) in [("coherent", laser.clone()), ("single photon", fock_pmf(1))] {
        let lossy = apply_loss(&pmf, 0.72).unwrap();
        let m = lossy.moments();
        println!(
            "{name:>13} after 72% transmission: mean {:.4}, variance {:.4}, Fano {:.4}",
            m.mean,
            m.variance,
            m.fano.unwrap()
        );
    }

    let two = convolve(&fock_pmf(1), &laser);
    println!("one photon plus Poisson(1): mean {:.4}", two.mean());

    // Total count over 200 pulses.
    let detected = apply_loss(&laser, 0.72).unwrap();
    let total = iid_sum(&detected, 200).unwrap();
    let m = total.moments();
    println!(
        "count over 200 pulses: mean {:.3}, variance {:.3}",
        m.mean, m.variance
    );

    let sampler = laser.sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws = 100_000;
    let mean = (0..draws)
        .map(|_| sampler.sample(&mut rng) as f64)
        .sum::<f64>()
        / draws as f64;
    println!("sample mean of {draws} draws: {mean:.4}");
}
