//! Shared test inputs.

use karma_core::SocialState;

/// Random social state with full support: random masses and bid weights.
pub fn random_social(n_levels: usize, k_max: usize, seed: u64) -> SocialState {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = n_levels * (k_max + 1);
    let mut d: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = d.iter().sum();
    d.iter_mut().for_each(|x| *x /= total);
    let pi = (0..n)
        .map(|s| {
            let k = s % (k_max + 1);
            let mut row: Vec<f64> = (0..=k).map(|_| rng.random::<f64>() + 1e-3).collect();
            let t: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= t);
            row
        })
        .collect();
    SocialState::new(n_levels, k_max, d, pi).expect("valid random social state")
}
