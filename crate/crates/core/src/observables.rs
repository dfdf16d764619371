//! Truncated wavefunctions and the correlators computed from them.

use std::collections::HashMap;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::configuration::Configuration;
use crate::error::{Result, WalkSumError};
use crate::graph::WalkGraph;
use crate::model::{is_free_pair, ModelSpec, RydbergModel, SiteCoord};
use crate::oracle::{site_bit, DenseState};
use crate::sweep::{GraphState, WalkSum};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Denominators at or below this are treated as zero.
const DENOM_FLOOR: f64 = 1e-300;

/// Single-site operators: `P = |r⟩⟨r|`, `Q = I − P`, `T = |g⟩⟨r|`, `Td = T†`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LocalOp {
    P,
    Q,
    T,
    Td,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Site {
    Probe,
    Env(u32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableEntry {
    pub config: Configuration,
    /// Probe amplitudes `[g, r]`.
    pub amps: [C64; 2],
    /// Estimator weight: 1 for exact shells, population/sample for sampled ones.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShellSummary {
    pub ell: usize,
    pub population: u128,
    pub stored: usize,
    pub sampled: bool,
}

#[derive(Clone, Debug)]
pub struct AmplitudeTable {
    pub time: f64,
    pub n_env: usize,
    entries: Vec<TableEntry>,
    index: HashMap<Configuration, usize>,
    pub norm_deficit: f64,
    pub converged: bool,
    pub shells: Vec<ShellSummary>,
}

impl AmplitudeTable {
    pub fn new(time: f64, n_env: usize, mut entries: Vec<TableEntry>, converged: bool) -> Self {
        entries.sort_by(|a, b| {
            a.config
                .excitation()
                .cmp(&b.config.excitation())
                .then(a.config.cmp(&b.config))
        });
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.config.clone(), i))
            .collect();
        let norm: f64 = entries
            .iter()
            .map(|e| e.weight * (e.amps[0].norm_sqr() + e.amps[1].norm_sqr()))
            .sum();
        let mut shells: Vec<ShellSummary> = Vec::new();
        for e in &entries {
            let ell = e.config.excitation();
            match shells.last_mut() {
                Some(s) if s.ell == ell => s.stored += 1,
                _ => shells.push(ShellSummary {
                    ell,
                    population: crate::configuration::binomial_u128(n_env as u64, ell as u64)
                        .unwrap_or(u128::MAX),
                    stored: 1,
                    sampled: e.weight != 1.0,
                }),
            }
        }
        AmplitudeTable {
            time,
            n_env,
            entries,
            index,
            norm_deficit: 1.0 - norm,
            converged,
            shells,
        }
    }

    /// Amplitudes `[U_{ν←∅}(t)]_{s,g}` for every target of a sweep from `∅`.
    pub fn assemble(sweep: &WalkSum, t: f64, n_env: usize) -> Result<Self> {
        let mut entries = Vec::with_capacity(sweep.evolutions.len());
        for (target, ev) in &sweep.evolutions {
            if ev.source != Configuration::empty() {
                return Err(WalkSumError::InvalidConfiguration(format!(
                    "sweep source {} is not the empty configuration",
                    ev.source
                )));
            }
            let u = ev.eval(t);
            entries.push(TableEntry {
                config: target.clone(),
                amps: [u[(0, 0)], u[(1, 0)]],
                weight: 1.0,
            });
        }
        Ok(Self::new(t, n_env, entries, sweep.convergence.converged))
    }

    /// Table from a graph state, keeping configurations accepted by `weight`
    /// (`None` drops the vertex).
    pub fn from_graph_state<F>(
        graph: &WalkGraph,
        state: &GraphState,
        t: f64,
        converged: bool,
        weight: F,
    ) -> Self
    where
        F: Fn(&Configuration) -> Option<f64>,
    {
        let entries = graph
            .vertices()
            .iter()
            .zip(&state.amps)
            .filter_map(|(c, a)| {
                weight(c).map(|w| TableEntry {
                    config: c.clone(),
                    amps: *a,
                    weight: w,
                })
            })
            .collect();
        Self::new(t, graph.env_sites(), entries, converged)
    }

    /// Exhaustive table from a dense state vector.
    pub fn from_dense(state: &DenseState, t: f64) -> Self {
        let n_env = state.n_sites - 1;
        let mut entries = Vec::with_capacity(1 << n_env);
        for mask in 0..1u64 << n_env {
            let config = Configuration::from_mask(mask);
            let amps = [state.amps[(mask as usize) << 1], state.amps[((mask as usize) << 1) | 1]];
            entries.push(TableEntry {
                config,
                amps,
                weight: 1.0,
            });
        }
        Self::new(t, n_env, entries, true)
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    pub fn get(&self, c: &Configuration) -> Option<&TableEntry> {
        self.index.get(c).map(|&i| &self.entries[i])
    }

    pub fn amplitude(&self, c: &Configuration, probe_excited: bool) -> C64 {
        self.get(c).map_or(ZERO, |e| e.amps[probe_excited as usize])
    }

    fn pair_weight(&self, ket: &TableEntry, bra: &TableEntry) -> f64 {
        if bra.config.excitation() > ket.config.excitation() {
            bra.weight
        } else {
            ket.weight
        }
    }

    /// `⟨ψ|op_1 op_2 …|ψ⟩` by configuration matching.
    pub fn correlator(&self, ops: &[(Site, LocalOp)]) -> Result<C64> {
        for (i, (s, _)) in ops.iter().enumerate() {
            if let Site::Env(k) = s {
                if *k as usize >= self.n_env {
                    return Err(WalkSumError::SiteOutOfRange(format!(
                        "environment site {k} of {}",
                        self.n_env
                    )));
                }
            }
            if ops[..i].iter().any(|(o, _)| o == s) {
                return Err(WalkSumError::InvalidOperator(format!("site {s:?} repeated")));
            }
        }
        let mut total = ZERO;
        for ket in &self.entries {
            'probe: for p in 0..2usize {
                let a = ket.amps[p];
                if a == ZERO {
                    continue;
                }
                let mut config = ket.config.clone();
                let mut probe = p == 1;
                for &(site, op) in ops.iter().rev() {
                    let set = match site {
                        Site::Probe => probe,
                        Site::Env(k) => config.contains(k),
                    };
                    let flip = match op {
                        LocalOp::P if !set => continue 'probe,
                        LocalOp::Q if set => continue 'probe,
                        LocalOp::T if !set => continue 'probe,
                        LocalOp::Td if set => continue 'probe,
                        LocalOp::T | LocalOp::Td => true,
                        LocalOp::P | LocalOp::Q => false,
                    };
                    if flip {
                        match site {
                            Site::Probe => probe = !probe,
                            Site::Env(k) if set => config = config.without(k),
                            Site::Env(k) => config = config.with(k),
                        }
                    }
                }
                if let Some(bra) = self.get(&config) {
                    total += bra.amps[probe as usize].conj() * a * self.pair_weight(ket, bra);
                }
            }
        }
        Ok(total)
    }

    /// One- and two-point functions for every environment site, in one pass.
    pub fn site_moments(&self) -> SiteMoments {
        let n = self.n_env;
        let mut m = SiteMoments {
            p_s: 0.0,
            t_s: ZERO,
            p_j: vec![0.0; n],
            p_sj: vec![0.0; n],
            t_j: vec![ZERO; n],
            tt_dag: vec![0.0; n],
            tt: vec![0.0; n],
        };
        for e in &self.entries {
            let [ag, ar] = e.amps;
            let w = e.weight;
            m.p_s += w * ar.norm_sqr();
            m.t_s += w * ag.conj() * ar;
            for &k in e.config.sites() {
                let k = k as usize;
                m.p_j[k] += w * (ag.norm_sqr() + ar.norm_sqr());
                m.p_sj[k] += w * ar.norm_sqr();
                if let Some(lower) = self.get(&e.config.without(k as u32)) {
                    let wp = self.pair_weight(lower, e);
                    let [bg, br] = lower.amps;
                    m.t_j[k] += wp * (bg.conj() * ag + br.conj() * ar);
                    m.tt_dag[k] += wp * 2.0 * (ag.conj() * br).re;
                    m.tt[k] += wp * 2.0 * (ar.conj() * bg).re;
                }
            }
        }
        m
    }

    /// Standard error of `Σ_ν f(entry)` coming from sampled shells.
    pub fn sampling_stderr<F: Fn(&TableEntry) -> f64>(&self, f: F) -> f64 {
        let mut var = 0.0;
        for shell in self.shells.iter().filter(|s| s.sampled) {
            let vals: Vec<f64> = self
                .entries
                .iter()
                .filter(|e| e.config.excitation() == shell.ell)
                .map(&f)
                .collect();
            let n = vals.len() as f64;
            if n < 2.0 {
                continue;
            }
            let pop = shell.population as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let s2 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            var += pop * pop * (1.0 - n / pop).max(0.0) * s2 / n;
        }
        var.sqrt()
    }
}

/// Expectation values per environment site `j` (probe `s`).
#[derive(Clone, Debug, PartialEq)]
pub struct SiteMoments {
    pub p_s: f64,
    pub t_s: C64,
    pub p_j: Vec<f64>,
    /// `⟨r_s r_j⟩`.
    pub p_sj: Vec<f64>,
    pub t_j: Vec<C64>,
    /// `⟨T_s T_j† + T_s† T_j⟩`.
    pub tt_dag: Vec<f64>,
    /// `⟨T_s† T_j† + T_s T_j⟩`.
    pub tt: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    G1,
    G1p,
    G2,
    OrderParam,
    RDensity,
}

impl MapKind {
    pub fn name(&self) -> &'static str {
        match self {
            MapKind::G1 => "g1",
            MapKind::G1p => "g1p",
            MapKind::G2 => "g2",
            MapKind::OrderParam => "order_param",
            MapKind::RDensity => "r_density",
        }
    }
}

/// Per-site values over the environment; `None` marks an undefined value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationMap {
    pub kind: MapKind,
    pub sites: Vec<SiteCoord>,
    pub values: Vec<Option<f64>>,
    /// Number of pairs containing the probe; multiplies `values` for plotting.
    pub pair_scale: f64,
}

impl CorrelationMap {
    pub fn value_at(&self, j: SiteCoord) -> Option<f64> {
        self.sites
            .iter()
            .position(|&s| s == j)
            .and_then(|i| self.values[i])
    }
}

fn env_coords(model: &RydbergModel) -> Vec<SiteCoord> {
    (0..model.n_env()).map(|k| model.env_coord(k)).collect()
}

fn make_map(kind: MapKind, model: &RydbergModel, values: Vec<Option<f64>>) -> CorrelationMap {
    CorrelationMap {
        kind,
        sites: env_coords(model),
        values,
        pair_scale: model.n_env() as f64,
    }
}

pub fn g2_map(table: &AmplitudeTable, model: &RydbergModel) -> CorrelationMap {
    let m = table.site_moments();
    let values = (0..model.n_env())
        .map(|k| {
            let d = m.p_s * m.p_j[k];
            (d > DENOM_FLOOR).then(|| m.p_sj[k] / d)
        })
        .collect();
    make_map(MapKind::G2, model, values)
}

pub fn g1_map(table: &AmplitudeTable, model: &RydbergModel) -> CorrelationMap {
    let m = table.site_moments();
    let xs = 2.0 * m.t_s.re;
    let values = (0..model.n_env())
        .map(|k| Some(m.tt_dag[k] - xs * 2.0 * m.t_j[k].re))
        .collect();
    make_map(MapKind::G1, model, values)
}

pub fn g1p_map(table: &AmplitudeTable, model: &RydbergModel) -> CorrelationMap {
    let m = table.site_moments();
    let xs = 2.0 * m.t_s.re;
    let values = (0..model.n_env())
        .map(|k| Some(m.tt[k] - xs * 2.0 * m.t_j[k].re))
        .collect();
    make_map(MapKind::G1p, model, values)
}

/// `|⟨T_j⟩|` per site.
pub fn order_param_map(table: &AmplitudeTable, model: &RydbergModel) -> CorrelationMap {
    let m = table.site_moments();
    let values = m.t_j.iter().map(|t| Some(t.norm())).collect();
    make_map(MapKind::OrderParam, model, values)
}

pub fn r_density_map(table: &AmplitudeTable, model: &RydbergModel) -> CorrelationMap {
    let m = table.site_moments();
    let values = m.p_j.iter().map(|&p| Some(p)).collect();
    make_map(MapKind::RDensity, model, values)
}

fn four_point(table: &AmplitudeTable, probe_op: LocalOp, sites: [u32; 3]) -> Result<Option<f64>> {
    if sites[0] == sites[1] || sites[1] == sites[2] || sites[0] == sites[2] {
        return Err(WalkSumError::InvalidOperator("g4 sites must be distinct".into()));
    }
    let mut ops = vec![(Site::Probe, probe_op)];
    ops.extend(sites.iter().map(|&k| (Site::Env(k), LocalOp::P)));
    let num = table.correlator(&ops)?.re;
    let mut den = table.correlator(&[(Site::Probe, probe_op)])?.re;
    for &k in &sites {
        den *= table.correlator(&[(Site::Env(k), LocalOp::P)])?.re;
    }
    Ok((den.abs() > DENOM_FLOOR).then(|| num / den))
}

/// `⟨r_s r_j r_k r_l⟩ / (⟨r_s⟩⟨r_j⟩⟨r_k⟩⟨r_l⟩)`.
pub fn g4(table: &AmplitudeTable, j: u32, k: u32, l: u32) -> Result<Option<f64>> {
    four_point(table, LocalOp::P, [j, k, l])
}

/// As [`g4`] with the probe in `g`.
pub fn g4p(table: &AmplitudeTable, j: u32, k: u32, l: u32) -> Result<Option<f64>> {
    four_point(table, LocalOp::Q, [j, k, l])
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Lowest-order pair correlation of a two-atom system,
/// `g2 = (1 − a + b)·a/b` with `a = (Ω/χ_sj)² sin²(χ_sj t/2)` and
/// `b = (Ω/χ)² sin²(χt/2)`.
pub fn g2_analytic(delta: f64, omega: f64, a: f64, t: f64) -> f64 {
    let chi = (omega * omega + delta * delta).sqrt();
    let chi_sj = (omega * omega + (delta + a) * (delta + a)).sqrt();
    if chi_sj == chi {
        return 1.0;
    }
    let pre = (omega * t / 2.0).powi(2);
    let sa = sinc(chi_sj * t / 2.0).powi(2);
    let sb = sinc(chi * t / 2.0).powi(2);
    let pa = pre * sa;
    let pb = pre * sb;
    if sb == 0.0 {
        return if sa == 0.0 { 1.0 } else { f64::INFINITY };
    }
    (1.0 - pa + pb) * sa / sb
}

/// Mean excitation per site, probe included.
pub fn rydberg_fraction(table: &AmplitudeTable) -> f64 {
    let m = table.site_moments();
    (m.p_s + m.p_j.iter().sum::<f64>()) / (table.n_env + 1) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PressureReport {
    /// Interaction energy `Σ_{i<j} A_ij ⟨P_i P_j⟩` [rad/μs].
    pub energy: f64,
    /// `(3/2) E / (N L²)` [rad/μs·μm⁻²].
    pub pressure: f64,
    /// `−ΔE/ΔA` from symmetric rescaling of `L`.
    pub pressure_fd: f64,
    pub relative_step: f64,
}

pub fn interaction_energy(table: &AmplitudeTable, model: &RydbergModel) -> f64 {
    table
        .entries()
        .iter()
        .map(|e| {
            let g = e.amps[0].norm_sqr();
            let r = e.amps[1].norm_sqr();
            let mut part = 0.0;
            if g != 0.0 {
                part += g * model.interaction_energy(&e.config, false);
            }
            if r != 0.0 {
                part += r * model.interaction_energy(&e.config, true);
            }
            e.weight * part
        })
        .sum()
}

pub fn energy_pressure(table: &AmplitudeTable, spec: &ModelSpec) -> Result<PressureReport> {
    energy_pressure_with_step(table, spec, 1e-6)
}

pub fn energy_pressure_with_step(
    table: &AmplitudeTable,
    spec: &ModelSpec,
    relative_step: f64,
) -> Result<PressureReport> {
    let model = RydbergModel::new(spec)?;
    let n = model.n_sites() as f64;
    let l = spec.spacing;
    let energy = interaction_energy(table, &model);
    let pressure = 1.5 * energy / (n * l * l);
    let lp = l * (1.0 + relative_step);
    let lm = l * (1.0 - relative_step);
    let ep = interaction_energy(table, &RydbergModel::new(&spec.clone().with_spacing(lp))?);
    let em = interaction_energy(table, &RydbergModel::new(&spec.clone().with_spacing(lm))?);
    let pressure_fd = (em - ep) / (n * (lp * lp - lm * lm));
    Ok(PressureReport {
        energy,
        pressure,
        pressure_fd,
        relative_step,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairSum {
    /// `⟨r_s⟩`.
    pub lhs: f64,
    /// `Σ_j ⟨r_s r_j⟩`.
    pub rhs: f64,
    /// Fraction of `rhs` from free-pair sites; `None` when `rhs = 0`.
    pub free_share: Option<f64>,
    pub free_sites: Vec<SiteCoord>,
    /// Norm deficit plus the sampling error of `lhs − rhs`.
    pub spread: f64,
}

pub fn pair_sum_check(table: &AmplitudeTable, model: &RydbergModel, free_tol: f64) -> PairSum {
    let m = table.site_moments();
    let free: Vec<usize> = (0..model.n_env())
        .filter(|&k| is_free_pair(model.env_coord(k), model.spec(), free_tol))
        .collect();
    let rhs: f64 = m.p_sj.iter().sum();
    let free_part: f64 = free.iter().map(|&k| m.p_sj[k]).sum();
    let se = table
        .sampling_stderr(|e| e.amps[1].norm_sqr() * (1.0 - e.config.excitation() as f64));
    PairSum {
        lhs: m.p_s,
        rhs,
        free_share: (rhs > DENOM_FLOOR).then(|| free_part / rhs),
        free_sites: free.iter().map(|&k| model.env_coord(k)).collect(),
        spread: table.norm_deficit.abs() + se,
    }
}

/// Converts a lattice site index into a correlator site.
pub fn site_of_lattice_index(model: &RydbergModel, site: usize) -> Site {
    match model.env_index(site) {
        None => Site::Probe,
        Some(k) => Site::Env(k as u32),
    }
}

/// Dense-state basis bit for a correlator site.
pub fn dense_bit(model: &RydbergModel, site: Site) -> usize {
    match site {
        Site::Probe => 0,
        Site::Env(k) => site_bit(model, model.env_site(k as usize)),
    }
}
