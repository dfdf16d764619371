//! Rydberg atoms on a square lattice with parallel dipoles.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::configuration::Configuration;
use crate::error::{Result, WalkSumError};
use crate::graph::{ConfigurationModel, VertexHamiltonian};

/// Default dipole constant [rad/μs·μm³]: nearest-neighbour coupling of
/// 100·Ω for Ω = 30 rad/μs at L = 1.5 μm with dipoles normal to the plane.
pub const DEFAULT_C3: f64 = 100.0 * 30.0 * 1.5 * 1.5 * 1.5;

/// How `omega`, `delta` and `c3` are read from a config.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngularConvention {
    /// Values are angular frequencies already (rad/μs).
    #[default]
    Angular,
    /// Values are cyclic frequencies (MHz) and get multiplied by 2π.
    Cyclic,
}

fn default_c3() -> f64 {
    DEFAULT_C3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub nx: usize,
    pub ny: usize,
    #[serde(rename = "L_um")]
    pub spacing: f64,
    pub omega: f64,
    pub delta: f64,
    pub theta: f64,
    pub phi: f64,
    #[serde(default = "default_c3")]
    pub c3: f64,
    #[serde(default)]
    pub angular_convention: AngularConvention,
    /// Row-major site index of the probe; the central site when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<usize>,
}

impl ModelSpec {
    pub fn new(nx: usize, ny: usize, spacing: f64, omega: f64, delta: f64, theta: f64, phi: f64) -> Self {
        ModelSpec {
            nx,
            ny,
            spacing,
            omega,
            delta,
            theta,
            phi,
            c3: DEFAULT_C3,
            angular_convention: AngularConvention::Angular,
            probe: None,
        }
    }

    pub fn with_c3(mut self, c3: f64) -> Self {
        self.c3 = c3;
        self
    }

    pub fn with_spacing(mut self, spacing: f64) -> Self {
        self.spacing = spacing;
        self
    }

    pub fn n_sites(&self) -> usize {
        self.nx * self.ny
    }

    fn unit_factor(&self) -> f64 {
        match self.angular_convention {
            AngularConvention::Angular => 1.0,
            AngularConvention::Cyclic => 2.0 * PI,
        }
    }

    /// Ω in rad/μs.
    pub fn omega_rad(&self) -> f64 {
        self.omega * self.unit_factor()
    }

    pub fn delta_rad(&self) -> f64 {
        self.delta * self.unit_factor()
    }

    pub fn c3_rad(&self) -> f64 {
        self.c3 * self.unit_factor()
    }

    /// Absolute `(x, y)` of the probe.
    pub fn probe_position(&self) -> (usize, usize) {
        match self.probe {
            Some(i) => (i % self.nx.max(1), i / self.nx.max(1)),
            None => ((self.nx.saturating_sub(1)) / 2, (self.ny.saturating_sub(1)) / 2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(WalkSumError::InvalidModel(m));
        if self.nx == 0 || self.ny == 0 {
            return bad(format!("lattice extents {}x{} must be positive", self.nx, self.ny));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return bad(format!("lattice spacing {} must be positive", self.spacing));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return bad(format!("omega {} must be non-negative", self.omega));
        }
        if !self.delta.is_finite() || !self.c3.is_finite() {
            return bad("delta and c3 must be finite".into());
        }
        if !(0.0..=PI / 2.0).contains(&self.theta) {
            return bad(format!("theta {} outside [0, π/2]", self.theta));
        }
        if !(0.0..2.0 * PI).contains(&self.phi) {
            return bad(format!("phi {} outside [0, 2π)", self.phi));
        }
        if let Some(p) = self.probe {
            if p >= self.n_sites() {
                return Err(WalkSumError::SiteOutOfRange(format!(
                    "probe index {p} (lattice has {} sites)",
                    self.n_sites()
                )));
            }
        }
        Ok(())
    }

    /// Dipole direction `n̂(θ, φ)`.
    pub fn dipole(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

/// Lattice coordinates relative to the probe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteCoord {
    pub x: i64,
    pub y: i64,
}

impl SiteCoord {
    pub const ORIGIN: SiteCoord = SiteCoord { x: 0, y: 0 };

    pub fn new(x: i64, y: i64) -> Self {
        SiteCoord { x, y }
    }

    pub fn norm_sqr(&self) -> i64 {
        self.x * self.x + self.y * self.y
    }
}

/// All sites, row-major (y outer, x inner), relative to the probe.
pub fn lattice_sites(spec: &ModelSpec) -> Vec<SiteCoord> {
    let (px, py) = spec.probe_position();
    let mut out = Vec::with_capacity(spec.n_sites());
    for y in 0..spec.ny {
        for x in 0..spec.nx {
            out.push(SiteCoord::new(x as i64 - px as i64, y as i64 - py as i64));
        }
    }
    out
}

/// Dipole factors this small are set to zero.
const CONE_SNAP: f64 = 1e-13;

fn dipole_factor(n: [f64; 3], dx: i64, dy: i64) -> f64 {
    // 1 − 3(n̂·R̂)² written over R² to keep lattice vectors exact.
    let r2 = (dx * dx + dy * dy) as f64;
    let proj = n[0] * dx as f64 + n[1] * dy as f64;
    let f = (r2 - 3.0 * proj * proj) / r2;
    // On the cone the residue is rounding only.
    if f.abs() <= CONE_SNAP {
        0.0
    } else {
        f
    }
}

fn coupling_raw(n: [f64; 3], c3: f64, spacing: f64, dx: i64, dy: i64) -> f64 {
    let r2 = (dx * dx + dy * dy) as f64;
    let r = r2.sqrt() * spacing;
    c3 * dipole_factor(n, dx, dy) / (r * r * r)
}

/// `A_ij` [rad/μs].
pub fn coupling(i: SiteCoord, j: SiteCoord, spec: &ModelSpec) -> Result<f64> {
    if i == j {
        return Err(WalkSumError::CoincidentSites((i.x, i.y), (j.x, j.y)));
    }
    let (dx, dy) = canonical(j.x - i.x, j.y - i.y);
    Ok(coupling_raw(spec.dipole(), spec.c3_rad(), spec.spacing, dx, dy))
}

/// Representative of `±d` so both orientations share one evaluation.
fn canonical(dx: i64, dy: i64) -> (i64, i64) {
    if dx > 0 || (dx == 0 && dy > 0) {
        (dx, dy)
    } else {
        (-dx, -dy)
    }
}

/// Free-pair test: `|3sin²θ(j·e_φ)² − |j|²| ≤ tol·|j|²`.
pub fn is_free_pair(j: SiteCoord, spec: &ModelSpec, tol: f64) -> bool {
    let r2 = j.norm_sqr() as f64;
    let s = spec.theta.sin();
    let proj = j.x as f64 * spec.phi.cos() + j.y as f64 * spec.phi.sin();
    (3.0 * s * s * proj * proj - r2).abs() <= tol * r2
}

/// Angle θ ∈ [0, π/2] at which `j` becomes a free pair for azimuth `phi`.
pub fn free_angle(j: SiteCoord, phi: f64) -> Option<f64> {
    let r2 = j.norm_sqr() as f64;
    if r2 == 0.0 {
        return None;
    }
    let proj = j.x as f64 * phi.cos() + j.y as f64 * phi.sin();
    if proj.abs() <= 1e-12 * r2.sqrt() {
        return None;
    }
    let s2 = r2 / (3.0 * proj * proj);
    if s2 > 1.0 + 4.0 * f64::EPSILON {
        return None;
    }
    Some(s2.min(1.0).sqrt().asin())
}

/// First-order bound on the coupling of a free pair after tilting θ by `dtheta`.
pub fn residual_bound(i: SiteCoord, j: SiteCoord, dtheta: f64, spec: &ModelSpec) -> f64 {
    let d2 = ((j.x - i.x).pow(2) + (j.y - i.y).pow(2)) as f64;
    let r = d2.sqrt() * spec.spacing;
    2.0 * 2f64.sqrt() * spec.c3_rad() * dtheta / (r * r * r)
}

/// Resolved model: site tables and precomputed couplings.
#[derive(Clone, Debug)]
pub struct RydbergModel {
    spec: ModelSpec,
    omega: f64,
    delta: f64,
    sites: Vec<SiteCoord>,
    probe_site: usize,
    env_site: Vec<usize>,
    probe_coupling: Vec<f64>,
    table: Vec<f64>,
    table_w: i64,
    table_h: i64,
}

impl RydbergModel {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let sites = lattice_sites(spec);
        let (px, py) = spec.probe_position();
        let probe_site = py * spec.nx + px;
        let env_site: Vec<usize> = (0..sites.len()).filter(|&i| i != probe_site).collect();
        let n = spec.dipole();
        let c3 = spec.c3_rad();
        let table_w = 2 * spec.nx as i64 - 1;
        let table_h = 2 * spec.ny as i64 - 1;
        let mut table = vec![0.0; (table_w * table_h) as usize];
        for dy in -(spec.ny as i64 - 1)..spec.ny as i64 {
            for dx in -(spec.nx as i64 - 1)..spec.nx as i64 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (cx, cy) = canonical(dx, dy);
                let idx = (dy + spec.ny as i64 - 1) * table_w + dx + spec.nx as i64 - 1;
                table[idx as usize] = coupling_raw(n, c3, spec.spacing, cx, cy);
            }
        }
        let mut model = RydbergModel {
            spec: spec.clone(),
            omega: spec.omega_rad(),
            delta: spec.delta_rad(),
            sites,
            probe_site,
            env_site,
            probe_coupling: Vec::new(),
            table,
            table_w,
            table_h,
        };
        model.probe_coupling = (0..model.env_site.len())
            .map(|k| model.site_coupling(model.probe_site, model.env_site[k]))
            .collect();
        Ok(model)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_env(&self) -> usize {
        self.env_site.len()
    }

    pub fn sites(&self) -> &[SiteCoord] {
        &self.sites
    }

    pub fn probe_site(&self) -> usize {
        self.probe_site
    }

    /// Lattice site index of environment index `k`.
    pub fn env_site(&self, k: usize) -> usize {
        self.env_site[k]
    }

    pub fn env_coord(&self, k: usize) -> SiteCoord {
        self.sites[self.env_site[k]]
    }

    /// Environment index of a lattice site, `None` for the probe.
    pub fn env_index(&self, site: usize) -> Option<usize> {
        match site.cmp(&self.probe_site) {
            std::cmp::Ordering::Less => Some(site),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(site - 1),
        }
    }

    pub fn site_of(&self, c: SiteCoord) -> Option<usize> {
        let (px, py) = self.spec.probe_position();
        let x = c.x + px as i64;
        let y = c.y + py as i64;
        if x < 0 || y < 0 || x >= self.spec.nx as i64 || y >= self.spec.ny as i64 {
            return None;
        }
        Some(y as usize * self.spec.nx + x as usize)
    }

    /// Coupling between two lattice sites (0 on the diagonal).
    pub fn site_coupling(&self, a: usize, b: usize) -> f64 {
        let (ax, ay) = (self.sites[a].x, self.sites[a].y);
        let (bx, by) = (self.sites[b].x, self.sites[b].y);
        let dx = bx - ax + self.spec.nx as i64 - 1;
        let dy = by - ay + self.spec.ny as i64 - 1;
        debug_assert!(dx >= 0 && dx < self.table_w && dy >= 0 && dy < self.table_h);
        self.table[(dy * self.table_w + dx) as usize]
    }

    /// `A_{S,k}` for environment index `k`.
    pub fn probe_coupling(&self, k: usize) -> f64 {
        self.probe_coupling[k]
    }

    pub fn env_coupling(&self, k: usize, l: usize) -> f64 {
        self.site_coupling(self.env_site[k], self.env_site[l])
    }

    /// `Σ_{l<k} A` over pairs in `config`, plus `Σ_l A_{S,l}` if the probe is excited.
    pub fn interaction_energy(&self, config: &Configuration, probe_excited: bool) -> f64 {
        let s = config.sites();
        let mut e = 0.0;
        for a in 0..s.len() {
            for b in a + 1..s.len() {
                e += self.env_coupling(s[a] as usize, s[b] as usize);
            }
            if probe_excited {
                e += self.probe_coupling(s[a] as usize);
            }
        }
        e
    }

    pub fn effective_hamiltonian(&self, config: &Configuration) -> VertexHamiltonian {
        let s = config.sites();
        let mut offset = s.len() as f64 * self.delta;
        let mut shift = self.delta;
        for a in 0..s.len() {
            for b in a + 1..s.len() {
                offset += self.env_coupling(s[a] as usize, s[b] as usize);
            }
            shift += self.probe_coupling(s[a] as usize);
        }
        let h = C64::new(-self.omega / 2.0, 0.0);
        VertexHamiltonian {
            matrix: Matrix2::new(C64::new(0.0, 0.0), h, h, C64::new(shift, 0.0)),
            offset,
        }
    }
}

impl ConfigurationModel for RydbergModel {
    fn environment_size(&self) -> usize {
        self.n_env()
    }

    fn vertex_hamiltonian(&self, config: &Configuration) -> VertexHamiltonian {
        self.effective_hamiltonian(config)
    }

    fn jump(&self) -> Matrix2<C64> {
        Matrix2::identity() * C64::new(-self.omega / 2.0, 0.0)
    }
}
