use std::fmt;

use smallvec::SmallVec;

use crate::error::{Result, WalkSumError};

/// Sorted set of excited environment sites (indices into the environment,
/// which never contains the probe).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Configuration(SmallVec<[u32; 4]>);

impl Configuration {
    pub fn empty() -> Self {
        Configuration(SmallVec::new())
    }

    /// Validates that `sites` is strictly increasing and below `env_sites`.
    pub fn new(sites: &[u32], env_sites: usize) -> Result<Self> {
        for w in sites.windows(2) {
            if w[0] >= w[1] {
                return Err(WalkSumError::InvalidConfiguration(format!(
                    "sites {sites:?} are not strictly increasing"
                )));
            }
        }
        if let Some(&last) = sites.last() {
            if last as usize >= env_sites {
                return Err(WalkSumError::InvalidConfiguration(format!(
                    "site {last} outside environment of {env_sites}"
                )));
            }
        }
        Ok(Configuration(SmallVec::from_slice(sites)))
    }

    /// Sorts and deduplicates; no range check.
    pub fn from_unsorted(mut sites: Vec<u32>) -> Self {
        sites.sort_unstable();
        sites.dedup();
        Configuration(SmallVec::from_vec(sites))
    }

    pub fn excitation(&self) -> usize {
        self.0.len()
    }

    pub fn sites(&self) -> &[u32] {
        &self.0
    }

    pub fn contains(&self, k: u32) -> bool {
        self.0.binary_search(&k).is_ok()
    }

    pub fn with(&self, k: u32) -> Configuration {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&k) {
            v.insert(pos, k);
        }
        Configuration(v)
    }

    pub fn without(&self, k: u32) -> Configuration {
        let mut v = self.0.clone();
        if let Ok(pos) = v.binary_search(&k) {
            v.remove(pos);
        }
        Configuration(v)
    }

    /// Bit mask over environment sites, if all indices fit in 64 bits.
    pub fn to_mask(&self) -> Option<u64> {
        let mut m = 0u64;
        for &k in &self.0 {
            if k >= 64 {
                return None;
            }
            m |= 1 << k;
        }
        Some(m)
    }

    pub fn from_mask(mut m: u64) -> Self {
        let mut v = SmallVec::new();
        while m != 0 {
            let k = m.trailing_zeros();
            v.push(k);
            m &= m - 1;
        }
        Configuration(v)
    }

    /// Configurations one flip away: add or remove a single site.
    pub fn neighbors(&self, env_sites: usize) -> impl Iterator<Item = Configuration> + '_ {
        (0..env_sites as u32).map(move |k| {
            if self.contains(k) {
                self.without(k)
            } else {
                self.with(k)
            }
        })
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Exact binomial, `None` on overflow.
pub fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc · (n-i) / (i+1) stays integral at every step.
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Number of configurations with at most `ell` excitations.
pub fn count_up_to(env_sites: usize, ell: usize) -> Option<u128> {
    let mut total: u128 = 0;
    for l in 0..=ell.min(env_sites) {
        total = total.checked_add(binomial_u128(env_sites as u64, l as u64)?)?;
    }
    Some(total)
}

/// Lexicographic rank/unrank within the shell of fixed excitation number.
pub struct ShellIndexer {
    env_sites: usize,
    ell: usize,
}

impl ShellIndexer {
    pub fn new(env_sites: usize, ell: usize) -> Self {
        ShellIndexer { env_sites, ell }
    }

    pub fn size(&self) -> Option<u128> {
        binomial_u128(self.env_sites as u64, self.ell as u64)
    }

    /// Rank of `config` in lexicographic order of sorted site lists.
    pub fn rank(&self, config: &Configuration) -> Option<u128> {
        assert_eq!(config.excitation(), self.ell);
        let n = self.env_sites as u64;
        let mut rank: u128 = 0;
        let mut prev: u64 = 0;
        for (i, &s) in config.sites().iter().enumerate() {
            let remaining = (self.ell - i - 1) as u64;
            for v in prev..s as u64 {
                rank = rank.checked_add(binomial_u128(n - v - 1, remaining)?)?;
            }
            prev = s as u64 + 1;
        }
        Some(rank)
    }

    pub fn unrank(&self, mut rank: u128) -> Option<Configuration> {
        let n = self.env_sites as u64;
        let mut sites = Vec::with_capacity(self.ell);
        let mut v: u64 = 0;
        for i in 0..self.ell {
            let remaining = (self.ell - i - 1) as u64;
            loop {
                if v >= n {
                    return None;
                }
                let block = binomial_u128(n - v - 1, remaining)?;
                if rank < block {
                    break;
                }
                rank -= block;
                v += 1;
            }
            sites.push(v as u32);
            v += 1;
        }
        if rank != 0 {
            return None;
        }
        Some(Configuration(SmallVec::from_vec(sites)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Configuration::new(&[0, 2, 5], 6).is_ok());
        assert!(Configuration::new(&[2, 2], 6).is_err());
        assert!(Configuration::new(&[3, 1], 6).is_err());
        assert!(Configuration::new(&[6], 6).is_err());
    }

    #[test]
    fn flips() {
        let c = Configuration::new(&[1, 4], 6).unwrap();
        assert_eq!(c.with(2).sites(), &[1, 2, 4]);
        assert_eq!(c.without(4).sites(), &[1]);
        assert_eq!(c.neighbors(6).count(), 6);
        assert!(c.neighbors(6).all(|n| n.excitation().abs_diff(2) == 1));
    }

    #[test]
    fn mask_round_trip() {
        let c = Configuration::new(&[0, 7, 63], 64).unwrap();
        assert_eq!(Configuration::from_mask(c.to_mask().unwrap()), c);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial_u128(1680, 3), Some(788_861_360));
        assert_eq!(binomial_u128(5, 7), Some(0));
        assert_eq!(count_up_to(8, 8), Some(256));
    }

    #[test]
    fn rank_unrank_exhaustive() {
        let idx = ShellIndexer::new(7, 3);
        let size = idx.size().unwrap();
        let mut prev: Option<Configuration> = None;
        for r in 0..size {
            let c = idx.unrank(r).unwrap();
            assert_eq!(idx.rank(&c), Some(r));
            if let Some(p) = prev {
                assert!(p < c);
            }
            prev = Some(c);
        }
        assert!(idx.unrank(size).is_none());
    }
}
