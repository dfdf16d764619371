use std::collections::HashMap;

use nalgebra::Matrix2;
use num_bigint::BigUint;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::configuration::{count_up_to, Configuration};
use crate::error::{Result, WalkSumError};
use crate::expoly::{expm2, pole_tolerance, ExpMatrix};

/// Probe block at one vertex: `matrix + offset·I`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VertexHamiltonian {
    pub matrix: Matrix2<C64>,
    pub offset: f64,
}

impl VertexHamiltonian {
    pub fn spectral_radius(&self) -> f64 {
        let m = &self.matrix;
        let a = 0.5 * (m[(0, 0)].re + m[(1, 1)].re);
        let bz = 0.5 * (m[(0, 0)].re - m[(1, 1)].re);
        let r = (m[(0, 1)].norm_sqr() + bz * bz).sqrt();
        (self.offset + a).abs() + r
    }

    pub fn full(&self) -> Matrix2<C64> {
        self.matrix + Matrix2::identity() * C64::new(self.offset, 0.0)
    }
}

/// Anything that assigns a probe Hamiltonian to each environment
/// configuration and couples neighbouring configurations by a fixed jump.
pub trait ConfigurationModel: Sync {
    fn environment_size(&self) -> usize;
    fn vertex_hamiltonian(&self, config: &Configuration) -> VertexHamiltonian;
    /// Block `H_{ν←η}` for configurations differing by one flip.
    fn jump(&self) -> Matrix2<C64>;
}

pub const DEFAULT_VERTEX_CAP: u128 = 5_000_000;

pub struct WalkGraph {
    env_sites: usize,
    vertices: Vec<Configuration>,
    index: HashMap<Configuration, u32>,
    offsets: Vec<usize>,
    adjacency: Vec<u32>,
    hamiltonians: Vec<VertexHamiltonian>,
    jump: Matrix2<C64>,
    pole_tol: f64,
}

/// All configurations with at most `ell_virtual` excitations.
pub fn build_graph<M: ConfigurationModel>(
    model: &M,
    ell_virtual: usize,
    cap: u128,
) -> Result<WalkGraph> {
    let n = model.environment_size();
    let count = count_up_to(n, ell_virtual).unwrap_or(u128::MAX);
    if count > cap {
        return Err(WalkSumError::Capacity {
            what: "configuration graph vertices",
            requested: count,
            cap,
        });
    }
    let mut configs = Vec::with_capacity(count as usize);
    for ell in 0..=ell_virtual.min(n) {
        let mut comb: Vec<u32> = (0..ell as u32).collect();
        loop {
            configs.push(Configuration::from_unsorted(comb.clone()));
            if !next_combination(&mut comb, n as u32) {
                break;
            }
        }
    }
    WalkGraph::assemble(model, configs)
}

fn next_combination(comb: &mut [u32], n: u32) -> bool {
    let k = comb.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if comb[i] < n - (k - i) as u32 {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

impl WalkGraph {
    /// Graph induced on an explicit vertex set (e.g. sampled shells).
    pub fn from_configurations<M: ConfigurationModel>(
        model: &M,
        mut configs: Vec<Configuration>,
        cap: u128,
    ) -> Result<WalkGraph> {
        if configs.len() as u128 > cap {
            return Err(WalkSumError::Capacity {
                what: "configuration graph vertices",
                requested: configs.len() as u128,
                cap,
            });
        }
        let n = model.environment_size();
        for c in &configs {
            Configuration::new(c.sites(), n)?;
        }
        configs.sort_by(|a, b| a.excitation().cmp(&b.excitation()).then(a.cmp(b)));
        configs.dedup();
        Self::assemble(model, configs)
    }

    fn assemble<M: ConfigurationModel>(model: &M, vertices: Vec<Configuration>) -> Result<WalkGraph> {
        let env_sites = model.environment_size();
        let index: HashMap<Configuration, u32> = vertices
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i as u32))
            .collect();
        // Edges found from the upper endpoint: remove one site, look it up.
        let down: Vec<Vec<u32>> = vertices
            .par_iter()
            .map(|c| {
                c.sites()
                    .iter()
                    .filter_map(|&k| index.get(&c.without(k)).copied())
                    .collect()
            })
            .collect();
        let mut degree = vec![0usize; vertices.len()];
        for (v, ds) in down.iter().enumerate() {
            degree[v] += ds.len();
            for &u in ds {
                degree[u as usize] += 1;
            }
        }
        let mut offsets = vec![0usize; vertices.len() + 1];
        for v in 0..vertices.len() {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let mut fill = offsets[..vertices.len()].to_vec();
        let mut adjacency = vec![0u32; offsets[vertices.len()]];
        for (v, ds) in down.iter().enumerate() {
            for &u in ds {
                adjacency[fill[v]] = u;
                fill[v] += 1;
                adjacency[fill[u as usize]] = v as u32;
                fill[u as usize] += 1;
            }
        }
        for v in 0..vertices.len() {
            adjacency[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        let hamiltonians: Vec<VertexHamiltonian> = vertices
            .par_iter()
            .map(|c| model.vertex_hamiltonian(c))
            .collect();
        let max_pole = hamiltonians
            .iter()
            .map(VertexHamiltonian::spectral_radius)
            .fold(0.0, f64::max);
        Ok(WalkGraph {
            env_sites,
            vertices,
            index,
            offsets,
            adjacency,
            hamiltonians,
            jump: model.jump(),
            pole_tol: pole_tolerance(max_pole),
        })
    }

    pub fn env_sites(&self) -> usize {
        self.env_sites
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Configuration] {
        &self.vertices
    }

    pub fn vertex(&self, id: u32) -> &Configuration {
        &self.vertices[id as usize]
    }

    pub fn id_of(&self, c: &Configuration) -> Option<u32> {
        self.index.get(c).copied()
    }

    pub fn require(&self, c: &Configuration) -> Result<u32> {
        self.id_of(c)
            .ok_or_else(|| WalkSumError::UnknownVertex(c.to_string()))
    }

    pub fn neighbors(&self, id: u32) -> &[u32] {
        &self.adjacency[self.offsets[id as usize]..self.offsets[id as usize + 1]]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.len() / 2
    }

    pub fn max_degree(&self) -> usize {
        (0..self.len())
            .map(|v| self.offsets[v + 1] - self.offsets[v])
            .max()
            .unwrap_or(0)
    }

    pub fn max_excitation(&self) -> usize {
        self.vertices.last().map_or(0, Configuration::excitation)
    }

    pub fn hamiltonian(&self, id: u32) -> &VertexHamiltonian {
        &self.hamiltonians[id as usize]
    }

    pub fn jump(&self) -> &Matrix2<C64> {
        &self.jump
    }

    /// `H_{a←b}` if the two vertices are adjacent.
    pub fn edge_h(&self, a: u32, b: u32) -> Option<Matrix2<C64>> {
        self.neighbors(a).binary_search(&b).ok().map(|_| self.jump)
    }

    pub fn pole_tolerance(&self) -> f64 {
        self.pole_tol
    }

    /// `exp(-iH_ν t)` at one vertex.
    pub fn propagator(&self, id: u32) -> Result<ExpMatrix> {
        let h = self.hamiltonian(id);
        expm2(&h.matrix, h.offset, self.pole_tol)
    }
}

/// Number of length-`k` walks from `source` to every vertex.
pub fn walk_counts(graph: &WalkGraph, source: u32, k: usize) -> Vec<BigUint> {
    match walk_counts_u128(graph, source, k) {
        Some(v) => v.into_iter().map(BigUint::from).collect(),
        None => {
            let mut cur = vec![BigUint::from(0u32); graph.len()];
            cur[source as usize] = BigUint::from(1u32);
            for _ in 0..k {
                let mut next = vec![BigUint::from(0u32); graph.len()];
                for (v, x) in cur.iter().enumerate() {
                    if *x == BigUint::from(0u32) {
                        continue;
                    }
                    for &w in graph.neighbors(v as u32) {
                        next[w as usize] += x;
                    }
                }
                cur = next;
            }
            cur
        }
    }
}

fn walk_counts_u128(graph: &WalkGraph, source: u32, k: usize) -> Option<Vec<u128>> {
    let mut cur = vec![0u128; graph.len()];
    cur[source as usize] = 1;
    for _ in 0..k {
        let mut next = vec![0u128; graph.len()];
        for (v, &x) in cur.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for &w in graph.neighbors(v as u32) {
                next[w as usize] = next[w as usize].checked_add(x)?;
            }
        }
        cur = next;
    }
    Some(cur)
}

/// `⟨target|A^k|source⟩`.
pub fn walk_count(graph: &WalkGraph, source: u32, target: u32, k: usize) -> BigUint {
    walk_counts(graph, source, k).swap_remove(target as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Flat(usize);

    impl ConfigurationModel for Flat {
        fn environment_size(&self) -> usize {
            self.0
        }
        fn vertex_hamiltonian(&self, c: &Configuration) -> VertexHamiltonian {
            VertexHamiltonian {
                matrix: Matrix2::zeros(),
                offset: c.excitation() as f64,
            }
        }
        fn jump(&self) -> Matrix2<C64> {
            Matrix2::identity()
        }
    }

    #[test]
    fn hypercube_counts() {
        let g = build_graph(&Flat(4), 4, DEFAULT_VERTEX_CAP).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g.edge_count(), 32);
        assert_eq!(g.max_degree(), 4);
        // Graded order: excitation number never decreases.
        assert!(g.vertices().windows(2).all(|w| w[0].excitation() <= w[1].excitation()));
    }

    #[test]
    fn truncated_star() {
        let g = build_graph(&Flat(5), 1, DEFAULT_VERTEX_CAP).unwrap();
        let root = g.id_of(&Configuration::empty()).unwrap();
        assert_eq!(g.neighbors(root).len(), 5);
        // Length-3 walks root → leaf on a star: out to any leaf, back, out.
        let leaf = g.id_of(&Configuration::new(&[2], 5).unwrap()).unwrap();
        assert_eq!(walk_count(&g, root, leaf, 3), BigUint::from(5u32));
        // With pairs allowed: 0→j→{j,k}→j and 0→k→{j,k}→j add 2(n-1).
        let g = build_graph(&Flat(5), 2, DEFAULT_VERTEX_CAP).unwrap();
        let root = g.id_of(&Configuration::empty()).unwrap();
        let leaf = g.id_of(&Configuration::new(&[2], 5).unwrap()).unwrap();
        assert_eq!(walk_count(&g, root, leaf, 3), BigUint::from(13u32));
    }

    #[test]
    fn capacity_refused_before_enumeration() {
        let err = build_graph(&Flat(1680), 3, DEFAULT_VERTEX_CAP).err().unwrap();
        assert!(matches!(err, WalkSumError::Capacity { .. }));
    }

    #[test]
    fn counts_fall_back_to_bignum() {
        let g = build_graph(&Flat(6), 6, DEFAULT_VERTEX_CAP).unwrap();
        let root = g.id_of(&Configuration::empty()).unwrap();
        // Closed walks on the 6-cube: Σ_j C(6,j)(6-2j)^k / 64.
        let k = 60;
        let total = walk_count(&g, root, root, k);
        let mut want = BigUint::from(0u32);
        for j in 0..=6u32 {
            let lam = (6i64 - 2 * j as i64).unsigned_abs();
            let c = [1u32, 6, 15, 20, 15, 6, 1][j as usize];
            want += BigUint::from(c) * BigUint::from(lam).pow(k as u32);
        }
        want /= BigUint::from(64u32);
        assert_eq!(total, want);
    }
}
