//! Brute-force references on the full Hilbert space.
//!
//! Basis index layout: bit 0 is the probe, bit `k+1` is environment site `k`;
//! a set bit means the atom is in `r`.

use nalgebra::{DMatrix, DVector, Matrix4, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::configuration::Configuration;
use crate::error::{Result, WalkSumError};
use crate::model::RydbergModel;
use crate::observables::LocalOp;

pub const ED_MAX_SITES: usize = 14;
pub const TRUNCATED_MAX_SITES: usize = 20;
pub const TRUNCATED_MAX_DIM: usize = 8192;
pub const TAYLOR_MAX_SITES: usize = 10;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Full many-body state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    pub n_sites: usize,
    pub amps: Vec<C64>,
}

impl DenseState {
    /// All atoms in `g`.
    pub fn mott(n_sites: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_sites];
        amps[0] = C64::new(1.0, 0.0);
        DenseState { n_sites, amps }
    }

    pub fn index(config: &Configuration, probe_excited: bool) -> usize {
        let mask = config.to_mask().expect("dense states hold at most 63 environment sites");
        ((mask as usize) << 1) | probe_excited as usize
    }

    pub fn amplitude(&self, config: &Configuration, probe_excited: bool) -> C64 {
        self.amps[Self::index(config, probe_excited)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨ψ| op_1 op_2 … |ψ⟩`, ops given as `(basis bit, operator)`.
    pub fn expect(&self, ops: &[(usize, LocalOp)]) -> C64 {
        let mut total = ZERO;
        'basis: for (b, &a) in self.amps.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            let mut k = b;
            for &(bit, op) in ops.iter().rev() {
                let set = k >> bit & 1 == 1;
                match op {
                    LocalOp::P if !set => continue 'basis,
                    LocalOp::Q if set => continue 'basis,
                    LocalOp::T if !set => continue 'basis,
                    LocalOp::Td if set => continue 'basis,
                    LocalOp::T | LocalOp::Td => k ^= 1 << bit,
                    LocalOp::P | LocalOp::Q => {}
                }
            }
            total += self.amps[k].conj() * a;
        }
        total
    }

    /// Largest entrywise difference.
    pub fn max_diff(&self, other: &DenseState) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Lattice site of basis bit `bit`.
pub fn bit_site(model: &RydbergModel, bit: usize) -> usize {
    if bit == 0 {
        model.probe_site()
    } else {
        model.env_site(bit - 1)
    }
}

/// Basis bit of lattice site `site`.
pub fn site_bit(model: &RydbergModel, site: usize) -> usize {
    model.env_index(site).map_or(0, |k| k + 1)
}

fn diagonal_energy(model: &RydbergModel, b: usize) -> f64 {
    let n = model.n_sites();
    let mut e = 0.0;
    for i in 0..n {
        if b >> i & 1 == 0 {
            continue;
        }
        e += model.delta();
        let si = bit_site(model, i);
        for j in i + 1..n {
            if b >> j & 1 == 1 {
                e += model.site_coupling(si, bit_site(model, j));
            }
        }
    }
    e
}

/// Real symmetric Hamiltonian on the basis states `basis` (sorted indices).
fn hamiltonian_on(model: &RydbergModel, basis: &[usize]) -> DMatrix<f64> {
    let dim = basis.len();
    let half = -model.omega() / 2.0;
    let mut h = DMatrix::zeros(dim, dim);
    for (r, &b) in basis.iter().enumerate() {
        h[(r, r)] = diagonal_energy(model, b);
        for i in 0..model.n_sites() {
            let f = b ^ (1 << i);
            if let Ok(c) = basis.binary_search(&f) {
                h[(r, c)] = half;
            }
        }
    }
    h
}

/// Full dense `H` (real symmetric).
pub fn dense_hamiltonian(model: &RydbergModel) -> Result<DMatrix<f64>> {
    check_sites(model, ED_MAX_SITES, "exact diagonalization sites")?;
    let basis: Vec<usize> = (0..1usize << model.n_sites()).collect();
    Ok(hamiltonian_on(model, &basis))
}

fn check_sites(model: &RydbergModel, cap: usize, what: &'static str) -> Result<()> {
    if model.n_sites() > cap {
        return Err(WalkSumError::Capacity {
            what,
            requested: model.n_sites() as u128,
            cap: cap as u128,
        });
    }
    Ok(())
}

/// Eigendecomposition of a real symmetric Hamiltonian, reusable across times.
pub struct EdPropagator {
    basis: Vec<usize>,
    n_sites: usize,
    values: DVector<f64>,
    vectors: DMatrix<f64>,
    hamiltonian: DMatrix<f64>,
}

impl EdPropagator {
    pub fn new(model: &RydbergModel) -> Result<Self> {
        check_sites(model, ED_MAX_SITES, "exact diagonalization sites")?;
        let basis: Vec<usize> = (0..1usize << model.n_sites()).collect();
        Ok(Self::on_basis(model, basis))
    }

    fn on_basis(model: &RydbergModel, basis: Vec<usize>) -> Self {
        let h = hamiltonian_on(model, &basis);
        let eig = SymmetricEigen::new(h.clone());
        EdPropagator {
            basis,
            n_sites: model.n_sites(),
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
            hamiltonian: h,
        }
    }

    pub fn hamiltonian(&self) -> &DMatrix<f64> {
        &self.hamiltonian
    }

    /// `e^{-iHt}` applied to `psi` (full-space vector; components outside
    /// the basis are ignored).
    pub fn evolve(&self, psi: &DenseState, t: f64) -> DenseState {
        let dim = self.basis.len();
        let mut coef = vec![ZERO; dim];
        for (k, c) in coef.iter_mut().enumerate() {
            let mut acc = ZERO;
            for (r, &b) in self.basis.iter().enumerate() {
                acc += psi.amps[b] * self.vectors[(r, k)];
            }
            *c = acc * C64::new(0.0, -self.values[k] * t).exp();
        }
        let mut out = vec![ZERO; 1 << self.n_sites];
        for (r, &b) in self.basis.iter().enumerate() {
            let mut acc = ZERO;
            for (k, &c) in coef.iter().enumerate() {
                acc += c * self.vectors[(r, k)];
            }
            out[b] = acc;
        }
        DenseState {
            n_sites: self.n_sites,
            amps: out,
        }
    }

    pub fn energy(&self, psi: &DenseState) -> f64 {
        let mut e = ZERO;
        for (r, &b) in self.basis.iter().enumerate() {
            let mut hv = ZERO;
            for (c, &bc) in self.basis.iter().enumerate() {
                let h = self.hamiltonian[(r, c)];
                if h != 0.0 {
                    hv += psi.amps[bc] * h;
                }
            }
            e += psi.amps[b].conj() * hv;
        }
        e.re
    }
}

/// `e^{-iHt}|g…g⟩`.
pub fn ed_evolve(model: &RydbergModel, t: f64) -> Result<DenseState> {
    let p = EdPropagator::new(model)?;
    Ok(p.evolve(&DenseState::mott(model.n_sites()), t))
}

/// Evolution under `H` projected on states with at most `ell_max`
/// excitations in total (probe included).
pub fn truncated_evolve(model: &RydbergModel, ell_max: usize, t: f64) -> Result<DenseState> {
    check_sites(model, TRUNCATED_MAX_SITES, "truncated evolution sites")?;
    let basis: Vec<usize> = (0..1usize << model.n_sites())
        .filter(|b| b.count_ones() as usize <= ell_max)
        .collect();
    if basis.len() > TRUNCATED_MAX_DIM {
        return Err(WalkSumError::Capacity {
            what: "truncated subspace dimension",
            requested: basis.len() as u128,
            cap: TRUNCATED_MAX_DIM as u128,
        });
    }
    let p = EdPropagator::on_basis(model, basis);
    Ok(p.evolve(&DenseState::mott(model.n_sites()), t))
}

/// `Σ_{n≤K} (-iHt)^n / n!`.
pub fn taylor_propagator(model: &RydbergModel, k: usize, t: f64) -> Result<DMatrix<C64>> {
    check_sites(model, TAYLOR_MAX_SITES, "Taylor propagator sites")?;
    let h = dense_hamiltonian(model)?;
    let dim = h.nrows();
    let step: DMatrix<C64> = h.map(|x| C64::new(0.0, -x * t));
    let mut term = DMatrix::<C64>::identity(dim, dim);
    let mut total = term.clone();
    for n in 1..=k {
        term = &term * &step / C64::new(n as f64, 0.0);
        total += &term;
    }
    Ok(total)
}

/// Exact two-atom dynamics for the pair (probe `s`, partner `j`).
/// Basis index: bit 0 = s, bit 1 = j.
pub struct TwoAtom {
    pub propagator: Matrix4<C64>,
    /// `P(r_s)` with `j` held in `r`, starting from `s` in `g`.
    pub r_given_r: f64,
    /// `P(r_s)` with `j` held in `g`.
    pub r_given_g: f64,
}

fn two_atom_h(delta: f64, omega: f64, a: f64, drive_partner: bool) -> Matrix4<f64> {
    let mut h = Matrix4::zeros();
    for b in 0..4usize {
        let ns = (b & 1) as f64;
        let nj = (b >> 1 & 1) as f64;
        h[(b, b)] = delta * (ns + nj) + a * ns * nj;
        h[(b, b ^ 1)] = -omega / 2.0;
        if drive_partner {
            h[(b, b ^ 2)] = -omega / 2.0;
        }
    }
    h
}

fn expm4(h: Matrix4<f64>, t: f64) -> Matrix4<C64> {
    let eig = SymmetricEigen::new(h);
    let v = eig.eigenvectors.map(|x| C64::new(x, 0.0));
    let d = Matrix4::from_diagonal(&eig.eigenvalues.map(|e| C64::new(0.0, -e * t).exp()));
    v * d * v.transpose()
}

pub fn two_atom(delta: f64, omega: f64, a: f64, t: f64) -> TwoAtom {
    let propagator = expm4(two_atom_h(delta, omega, a, true), t);
    let frozen = expm4(two_atom_h(delta, omega, a, false), t);
    // Columns |g_s r_j⟩ = 2 and |g_s g_j⟩ = 0; read the r_s components.
    let r_given_r = frozen[(3, 2)].norm_sqr();
    let r_given_g = frozen[(1, 0)].norm_sqr();
    TwoAtom {
        propagator,
        r_given_r,
        r_given_g,
    }
}
