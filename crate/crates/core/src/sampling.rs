//! Uniform sampling of configurations within a fixed-excitation shell.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::configuration::{Configuration, ShellIndexer};
use crate::error::{Result, WalkSumError};

#[derive(Clone, Debug, PartialEq)]
pub struct ShellSample {
    pub ell: usize,
    pub population: u128,
    /// Sorted, distinct.
    pub configs: Vec<Configuration>,
    /// `population / configs.len()`.
    pub weight: f64,
}

fn shell_seed(seed: u64, ell: usize) -> u64 {
    seed ^ (ell as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// `size` distinct configurations drawn without replacement from the shell
/// of excitation `ell`; the whole shell if it is no larger than `size`.
pub fn sample_shell(env_sites: usize, ell: usize, size: usize, seed: u64) -> Result<ShellSample> {
    let idx = ShellIndexer::new(env_sites, ell);
    let population = idx.size().ok_or(WalkSumError::Capacity {
        what: "shell population",
        requested: u128::MAX,
        cap: u64::MAX as u128,
    })?;
    let ranks: Vec<u128> = if population <= size as u128 {
        (0..population).collect()
    } else {
        let len = usize::try_from(population).map_err(|_| WalkSumError::Capacity {
            what: "shell population",
            requested: population,
            cap: usize::MAX as u128,
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(shell_seed(seed, ell));
        let mut v: Vec<u128> = rand::seq::index::sample(&mut rng, len, size)
            .into_iter()
            .map(|i| i as u128)
            .collect();
        v.sort_unstable();
        v
    };
    let configs: Vec<Configuration> = ranks
        .into_iter()
        .map(|r| idx.unrank(r).expect("rank below population"))
        .collect();
    let weight = if configs.is_empty() {
        0.0
    } else {
        population as f64 / configs.len() as f64
    };
    Ok(ShellSample {
        ell,
        population,
        configs,
        weight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_distinct() {
        let a = sample_shell(40, 4, 500, 7).unwrap();
        let b = sample_shell(40, 4, 500, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.configs.len(), 500);
        assert!(a.configs.windows(2).all(|w| w[0] < w[1]));
        assert!(a.configs.iter().all(|c| c.excitation() == 4));
        assert_eq!(a.population, 91_390);
        assert!((a.weight - 91_390.0 / 500.0).abs() < 1e-9);
        let c = sample_shell(40, 4, 500, 8).unwrap();
        assert_ne!(a.configs, c.configs);
    }

    #[test]
    fn small_shell_taken_whole() {
        let s = sample_shell(6, 2, 100, 1).unwrap();
        assert_eq!(s.configs.len(), 15);
        assert_eq!(s.weight, 1.0);
    }
}
