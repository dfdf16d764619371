//! Order-by-order summation of walks on a [`WalkGraph`].
//!
//! Order `n` holds `Φ⁽ⁿ⁾_ν`, the contribution of all length-`n` walks ending
//! at `ν`:
//! `Φ⁽ⁿ⁾_ν = -i · U_ν ⊛ (J · Σ_{η∼ν} Φ⁽ⁿ⁻¹⁾_η)` with `U_ν = exp(-iH_ν t)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::configuration::Configuration;
use crate::cost::{cost_bounds, CostBounds};
use crate::error::{Result, WalkSumError};
use crate::expoly::{ExpMatrix, OpCount};
use crate::graph::WalkGraph;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    /// Stop once two consecutive orders stay below this magnitude on the
    /// sample window, everywhere on the frontier.
    Tolerance(f64),
    /// Sum exactly `k_max` orders.
    FixedOrder,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub k_max: usize,
    pub stop: StopRule,
    /// Times at which order magnitudes are sampled.
    pub window: Vec<f64>,
}

impl SweepOptions {
    pub const DEFAULT_K_MAX: usize = 200;
    pub const DEFAULT_TOL: f64 = 1e-8;

    pub fn new(window_end: f64) -> Self {
        SweepOptions {
            k_max: Self::DEFAULT_K_MAX,
            stop: StopRule::Tolerance(Self::DEFAULT_TOL),
            window: sample_window(window_end, 16),
        }
    }

    pub fn fixed_order(k: usize, window_end: f64) -> Self {
        SweepOptions {
            k_max: k,
            stop: StopRule::FixedOrder,
            window: sample_window(window_end, 16),
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.stop = StopRule::Tolerance(tol);
        self
    }

    pub fn with_k_max(mut self, k: usize) -> Self {
        self.k_max = k;
        self
    }
}

/// `points + 1` evenly spaced times on `[0, end]`.
pub fn sample_window(end: f64, points: usize) -> Vec<f64> {
    (0..=points).map(|i| end * i as f64 / points as f64).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Convergence {
    pub converged: bool,
    pub orders: usize,
    /// Largest magnitude of the last summed order on the window.
    pub last_magnitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostReport {
    pub orders: usize,
    /// Walks summed into each target, per order `0..=orders`.
    pub walks: BTreeMap<Configuration, Vec<u128>>,
    /// Set when a walk counter overflowed `u128`.
    pub saturated: bool,
    /// Walks summed per order over every endpoint.
    pub walks_per_order: Vec<u128>,
    pub ops: OpCount,
    pub bounds: CostBounds,
}

impl CostReport {
    pub fn walks_total(&self, target: &Configuration) -> Option<u128> {
        self.walks
            .get(target)
            .map(|v| v.iter().fold(0u128, |a, &b| a.saturating_add(b)))
    }
}

/// `U_{target←source}(t)` as a 2×2 matrix of exponential polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalEvolution {
    pub source: Configuration,
    pub target: Configuration,
    pub entries: ExpMatrix,
    pub orders: usize,
}

impl ConditionalEvolution {
    pub fn eval(&self, t: f64) -> Matrix2<C64> {
        let m = self.entries.eval(t);
        Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
    }
}

#[derive(Clone, Debug)]
pub struct WalkSum {
    pub evolutions: BTreeMap<Configuration, ConditionalEvolution>,
    pub convergence: Convergence,
    pub cost: CostReport,
}

struct Frontier {
    ids: Vec<u32>,
    phis: Vec<ExpMatrix>,
    counts: Vec<u128>,
}

struct OrderStats {
    convergence: Convergence,
    ops: OpCount,
    saturated: bool,
    walks_per_order: Vec<u128>,
}

/// Runs the order recursion from initial data `Φ⁽⁰⁾`, calling `visit` with
/// every order (including order 0).
fn run_orders<F>(
    graph: &WalkGraph,
    init: Frontier,
    opts: &SweepOptions,
    mut visit: F,
) -> Result<OrderStats>
where
    F: FnMut(usize, &Frontier),
{
    let tol = graph.pole_tolerance();
    let jump = graph.jump();
    let scalar_jump = jump[(0, 1)] == C64::new(0.0, 0.0)
        && jump[(1, 0)] == C64::new(0.0, 0.0)
        && jump[(0, 0)] == jump[(1, 1)];
    let jump_dense = DMatrix::from_fn(2, 2, |r, c| jump[(r, c)]);
    let minus_i = C64::new(0.0, -1.0);

    let mut ops = OpCount::default();
    let mut saturated = false;
    let mut frontier = init;
    let mut walks_per_order = vec![total_walks(&frontier)];
    visit(0, &frontier);
    let mut prev_mag = frontier_magnitude(&frontier, &opts.window);
    let mut last_mag = prev_mag;
    let mut mark = vec![u32::MAX; graph.len()];
    let mut orders = 0;
    let mut converged = false;

    for n in 1..=opts.k_max {
        if frontier.ids.is_empty() {
            converged = true;
            break;
        }
        for (pos, &v) in frontier.ids.iter().enumerate() {
            mark[v as usize] = pos as u32;
        }
        let mut next_ids: Vec<u32> = frontier
            .ids
            .iter()
            .flat_map(|&v| graph.neighbors(v).iter().copied())
            .collect();
        next_ids.sort_unstable();
        next_ids.dedup();

        let results: Vec<Result<(ExpMatrix, u128, bool, OpCount)>> = next_ids
            .par_iter()
            .map(|&v| {
                let mut local = OpCount::default();
                let mut sum: Option<ExpMatrix> = None;
                let mut count: u128 = 0;
                let mut sat = false;
                for &w in graph.neighbors(v) {
                    let pos = mark[w as usize];
                    if pos == u32::MAX {
                        continue;
                    }
                    let phi = &frontier.phis[pos as usize];
                    sum = Some(match sum {
                        None => phi.clone(),
                        Some(s) => s.add(phi, tol),
                    });
                    match count.checked_add(frontier.counts[pos as usize]) {
                        Some(c) => count = c,
                        None => {
                            count = u128::MAX;
                            sat = true;
                        }
                    }
                }
                let sum = sum.expect("neighbor of frontier has a frontier neighbor");
                let driven = if scalar_jump {
                    sum.scale(jump[(0, 0)] * minus_i)
                } else {
                    sum.left_mul(&jump_dense, tol).scale(minus_i)
                };
                let u = graph.propagator(v)?;
                let phi = u.conv(&driven, tol, &mut local);
                Ok((phi, count, sat, local))
            })
            .collect();

        for &v in &frontier.ids {
            mark[v as usize] = u32::MAX;
        }
        let mut next = Frontier {
            ids: Vec::with_capacity(next_ids.len()),
            phis: Vec::with_capacity(next_ids.len()),
            counts: Vec::with_capacity(next_ids.len()),
        };
        for (v, r) in next_ids.into_iter().zip(results) {
            let (phi, count, sat, local) = r?;
            ops.absorb(local);
            saturated |= sat;
            next.ids.push(v);
            next.phis.push(phi);
            next.counts.push(count);
        }
        frontier = next;
        orders = n;
        walks_per_order.push(total_walks(&frontier));
        visit(n, &frontier);
        let mag = frontier_magnitude(&frontier, &opts.window);
        last_mag = mag;
        if let StopRule::Tolerance(t) = opts.stop {
            if mag < t && prev_mag < t {
                converged = true;
                break;
            }
        }
        prev_mag = mag;
    }
    if opts.stop == StopRule::FixedOrder {
        converged = true;
    }
    Ok(OrderStats {
        convergence: Convergence {
            converged,
            orders,
            last_magnitude: last_mag,
        },
        ops,
        saturated,
        walks_per_order,
    })
}

fn total_walks(f: &Frontier) -> u128 {
    f.counts.iter().fold(0u128, |a, &b| a.saturating_add(b))
}

fn frontier_magnitude(f: &Frontier, window: &[f64]) -> f64 {
    f.phis
        .par_iter()
        .map(|p| p.max_abs_on(window))
        .reduce(|| 0.0, f64::max)
}

/// Sums walks from `source` into each of `targets` symbolically.
pub fn sum_walks(
    graph: &WalkGraph,
    source: &Configuration,
    targets: &[Configuration],
    opts: &SweepOptions,
) -> Result<WalkSum> {
    let src = graph.require(source)?;
    let mut slot: BTreeMap<u32, usize> = BTreeMap::new();
    let mut acc: Vec<ExpMatrix> = Vec::new();
    let mut walks: Vec<Vec<u128>> = Vec::new();
    for t in targets {
        let id = graph.require(t)?;
        if let std::collections::btree_map::Entry::Vacant(e) = slot.entry(id) {
            e.insert(acc.len());
            acc.push(ExpMatrix::zeros(2, 2));
            walks.push(Vec::new());
        }
    }
    let tol = graph.pole_tolerance();
    let init = Frontier {
        ids: vec![src],
        phis: vec![graph.propagator(src)?],
        counts: vec![1],
    };
    let stats = run_orders(graph, init, opts, |_, f| {
        for w in walks.iter_mut() {
            w.push(0);
        }
        for (i, &v) in f.ids.iter().enumerate() {
            if let Some(&k) = slot.get(&v) {
                acc[k] = acc[k].add(&f.phis[i], tol);
                *walks[k].last_mut().unwrap() = f.counts[i];
            }
        }
    })?;
    let orders = stats.convergence.orders;
    let mut evolutions = BTreeMap::new();
    let mut walk_map = BTreeMap::new();
    for (&id, &k) in &slot {
        let target = graph.vertex(id).clone();
        walk_map.insert(target.clone(), walks[k].clone());
        evolutions.insert(
            target.clone(),
            ConditionalEvolution {
                source: source.clone(),
                target,
                entries: std::mem::replace(&mut acc[k], ExpMatrix::zeros(0, 0)),
                orders,
            },
        );
    }
    Ok(WalkSum {
        evolutions,
        convergence: stats.convergence,
        cost: CostReport {
            orders,
            walks: walk_map,
            saturated: stats.saturated,
            walks_per_order: stats.walks_per_order,
            ops: stats.ops,
            bounds: cost_bounds(2, graph.env_sites() + 1, 1, orders),
        },
    })
}

/// Probe amplitudes `[g, r]` on every vertex of a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphState {
    pub amps: Vec<[C64; 2]>,
}

impl GraphState {
    pub fn zeros(len: usize) -> Self {
        GraphState {
            amps: vec![[C64::new(0.0, 0.0); 2]; len],
        }
    }

    /// Environment `config`, probe in `probe` (a 2-vector over g, r).
    pub fn product(graph: &WalkGraph, config: &Configuration, probe: [C64; 2]) -> Result<Self> {
        let mut s = Self::zeros(graph.len());
        s.amps[graph.require(config)? as usize] = probe;
        Ok(s)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps
            .iter()
            .map(|a| a[0].norm_sqr() + a[1].norm_sqr())
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub states: Vec<GraphState>,
    /// Worst convergence over all passes.
    pub convergence: Convergence,
    pub ops: OpCount,
    /// Number of time slices the evolution was split into.
    pub slices: usize,
    /// Walks summed per order, for single-pass evolutions.
    pub walks_per_order: Vec<u128>,
    pub saturated: bool,
}

/// One walk sum from `initial`, evaluated at each of `times`.
pub fn evolve(
    graph: &WalkGraph,
    initial: &GraphState,
    times: &[f64],
    opts: &SweepOptions,
) -> Result<Evolution> {
    let init = initial_frontier(graph, initial, graph.pole_tolerance())?;
    let mut states: Vec<GraphState> = times.iter().map(|_| GraphState::zeros(graph.len())).collect();
    let stats = run_orders(graph, init, opts, |_, f| {
        let vals: Vec<Vec<[C64; 2]>> = f
            .phis
            .par_iter()
            .map(|phi| {
                times
                    .iter()
                    .map(|&t| [phi.get(0, 0).eval(t), phi.get(1, 0).eval(t)])
                    .collect()
            })
            .collect();
        for (i, &v) in f.ids.iter().enumerate() {
            for (k, st) in states.iter_mut().enumerate() {
                let a = &mut st.amps[v as usize];
                a[0] += vals[i][k][0];
                a[1] += vals[i][k][1];
            }
        }
    })?;
    Ok(Evolution {
        times: times.to_vec(),
        states,
        convergence: stats.convergence,
        ops: stats.ops,
        slices: 1,
        walks_per_order: stats.walks_per_order,
        saturated: stats.saturated,
    })
}

fn initial_frontier(graph: &WalkGraph, state: &GraphState, tol: f64) -> Result<Frontier> {
    if state.amps.len() != graph.len() {
        return Err(WalkSumError::InvalidConfiguration(format!(
            "state has {} vertices, graph has {}",
            state.amps.len(),
            graph.len()
        )));
    }
    let zero = C64::new(0.0, 0.0);
    let support: Vec<u32> = (0..graph.len() as u32)
        .filter(|&v| state.amps[v as usize] != [zero, zero])
        .collect();
    let phis: Result<Vec<ExpMatrix>> = support
        .par_iter()
        .map(|&v| {
            let a = state.amps[v as usize];
            let x = DMatrix::from_column_slice(2, 1, &a);
            Ok(graph.propagator(v)?.mul_const(&x, tol))
        })
        .collect();
    Ok(Frontier {
        counts: vec![1; support.len()],
        ids: support,
        phis: phis?,
    })
}

/// Growth rate `‖J‖ · max degree` bounding the order-`n` terms by
/// `(rate·t)^n / n!`.
pub fn growth_rate(graph: &WalkGraph) -> f64 {
    let j = graph.jump();
    let norm = j.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    norm * graph.max_degree() as f64
}

/// Smallest and largest vertex pole.
pub fn pole_range(graph: &WalkGraph) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in 0..graph.len() as u32 {
        let h = graph.hamiltonian(v);
        let m = &h.matrix;
        let a = 0.5 * (m[(0, 0)].re + m[(1, 1)].re) + h.offset;
        let bz = 0.5 * (m[(0, 0)].re - m[(1, 1)].re);
        let r = (m[(0, 1)].norm_sqr() + bz * bz).sqrt();
        lo = lo.min(a - r);
        hi = hi.max(a + r);
    }
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 0.0)
    }
}

/// Phase budget `(ρ + rate)·τ` of one slice, where `ρ` is the largest pole
/// distance from the slice's reference pole.
pub const SLICE_PHASE: f64 = 8.0;

/// Relative weight below which divided-power coefficients are dropped.
const SLICE_TRUNCATION: f64 = 1e-18;

/// Walk sum over one short slice with every pole referred to a common
/// `λ₀`. Each term is `e^{-iλ₀t} Σ_m c_m t^m/m!`, and
/// `U_ν ⊛ g` follows the recurrence `c_{m+1} = -i(H_ν - λ₀) c_m + g_m`; this
/// is the same convolution as the partial-fraction form but never divides
/// by pole gaps, which keeps near-degenerate spectra exact.
pub struct SliceKernel<'a> {
    graph: &'a WalkGraph,
    tau: f64,
    lambda0: f64,
    /// `-i(H_ν - λ₀)` per vertex.
    generators: Vec<Matrix2<C64>>,
    drive: Matrix2<C64>,
    scalar_drive: Option<C64>,
    /// `τ^m / m!`.
    weights: Vec<f64>,
}

impl<'a> SliceKernel<'a> {
    pub fn new(graph: &'a WalkGraph, tau: f64) -> Self {
        let (lo, hi) = pole_range(graph);
        let lambda0 = 0.5 * (lo + hi);
        let minus_i = C64::new(0.0, -1.0);
        let generators = (0..graph.len() as u32)
            .map(|v| {
                let h = graph.hamiltonian(v).full();
                (h - Matrix2::identity() * C64::new(lambda0, 0.0)) * minus_i
            })
            .collect();
        let jump = graph.jump();
        let drive = jump * minus_i;
        let scalar_drive = (jump[(0, 1)] == C64::new(0.0, 0.0)
            && jump[(1, 0)] == C64::new(0.0, 0.0)
            && jump[(0, 0)] == jump[(1, 1)])
            .then(|| drive[(0, 0)]);
        // Degree: the coefficient weights are bounded by a Taylor series of
        // total phase (ρ + rate)·τ.
        let x = (0.5 * (hi - lo) + growth_rate(graph)) * tau;
        let mut weights = vec![1.0];
        let mut bound = 1.0f64;
        let mut m = 0usize;
        while m < 8 || bound >= SLICE_TRUNCATION {
            m += 1;
            bound *= x / m as f64;
            weights.push(weights[m - 1] * tau / m as f64);
            if m > 4096 {
                break;
            }
        }
        SliceKernel {
            graph,
            tau,
            lambda0,
            generators,
            drive,
            scalar_drive,
            weights,
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn degree(&self) -> usize {
        self.weights.len()
    }

    /// `U_ν ⊛ g` (or `U_ν X` when `g` is none) as coefficients.
    fn propagate(&self, v: u32, init: Option<[C64; 2]>, g: Option<&[[C64; 2]]>, out: &mut Vec<[C64; 2]>) {
        let a = &self.generators[v as usize];
        let p = self.weights.len();
        out.clear();
        let mut c = init.unwrap_or([C64::new(0.0, 0.0); 2]);
        out.push(c);
        for m in 0..p - 1 {
            let mut next = [
                a[(0, 0)] * c[0] + a[(0, 1)] * c[1],
                a[(1, 0)] * c[0] + a[(1, 1)] * c[1],
            ];
            if let Some(g) = g {
                next[0] += g[m][0];
                next[1] += g[m][1];
            }
            out.push(next);
            c = next;
        }
    }

    fn value(&self, coeffs: &[[C64; 2]]) -> ([C64; 2], f64) {
        let mut val = [C64::new(0.0, 0.0); 2];
        let mut bound: f64 = 0.0;
        for (c, &w) in coeffs.iter().zip(&self.weights) {
            val[0] += c[0] * w;
            val[1] += c[1] * w;
            bound += (c[0].norm() + c[1].norm()) * w;
        }
        (val, bound)
    }

    /// Advances `state` by `τ`.
    pub fn advance(&self, state: &GraphState, tol: f64, k_max: usize) -> Result<(GraphState, Convergence, OpCount)> {
        let mut out = GraphState::zeros(self.graph.len());
        let (conv, ops) = self.walk_orders(state, Some(tol), k_max, |_, v, val| {
            out.amps[v as usize][0] += val[0];
            out.amps[v as usize][1] += val[1];
        })?;
        Ok((out, conv, ops))
    }

    /// Advances `state` by `τ`, split by the number of jumps taken inside
    /// the slice: entry `n` holds the walks of exactly `n` jumps.
    pub fn advance_orders(&self, state: &GraphState, k: usize) -> Result<(Vec<GraphState>, OpCount)> {
        let mut out = vec![GraphState::zeros(self.graph.len()); k + 1];
        let (_, ops) = self.walk_orders(state, None, k, |n, v, val| {
            out[n].amps[v as usize][0] += val[0];
            out[n].amps[v as usize][1] += val[1];
        })?;
        Ok((out, ops))
    }

    /// Runs the order recursion over one slice and hands each vertex value
    /// (phase included) to `sink(order, vertex, value)`.
    fn walk_orders<F: FnMut(usize, u32, [C64; 2])>(
        &self,
        state: &GraphState,
        tol: Option<f64>,
        k_max: usize,
        mut sink: F,
    ) -> Result<(Convergence, OpCount)> {
        let graph = self.graph;
        if state.amps.len() != graph.len() {
            return Err(WalkSumError::InvalidConfiguration(format!(
                "state has {} vertices, graph has {}",
                state.amps.len(),
                graph.len()
            )));
        }
        let p = self.weights.len();
        let zero = C64::new(0.0, 0.0);
        let phase = C64::new(0.0, -self.lambda0 * self.tau).exp();
        let phased = |v: [C64; 2]| [v[0] * phase, v[1] * phase];
        let mut ops = OpCount::default();

        let mut ids: Vec<u32> = (0..graph.len() as u32)
            .filter(|&v| state.amps[v as usize] != [zero, zero])
            .collect();
        let results: Vec<(Vec<[C64; 2]>, [C64; 2], f64)> = ids
            .par_iter()
            .map(|&v| {
                let mut c = Vec::with_capacity(p);
                self.propagate(v, Some(state.amps[v as usize]), None, &mut c);
                let (val, bound) = self.value(&c);
                (c, val, bound)
            })
            .collect();
        let mut coeffs: Vec<Vec<[C64; 2]>> = Vec::with_capacity(ids.len());
        let mut mag: f64 = 0.0;
        for (&v, (c, val, bound)) in ids.iter().zip(results) {
            sink(0, v, phased(val));
            mag = mag.max(bound);
            coeffs.push(c);
        }
        ops.convolutions += ids.len() as u64;
        ops.flops += (ids.len() * p * 8) as u64;

        let mut mark = vec![u32::MAX; graph.len()];
        let mut prev_mag = mag;
        let mut last_mag = mag;
        let mut converged = tol.is_none();
        let mut orders = 0;
        for n in 1..=k_max {
            if ids.is_empty() {
                converged = true;
                break;
            }
            for (pos, &v) in ids.iter().enumerate() {
                mark[v as usize] = pos as u32;
            }
            let mut next_ids: Vec<u32> = ids
                .iter()
                .flat_map(|&v| graph.neighbors(v).iter().copied())
                .collect();
            next_ids.sort_unstable();
            next_ids.dedup();
            let results: Vec<(Vec<[C64; 2]>, [C64; 2], f64)> = next_ids
                .par_iter()
                .map(|&v| {
                    let mut g = vec![[zero, zero]; p];
                    for &w in graph.neighbors(v) {
                        let pos = mark[w as usize];
                        if pos == u32::MAX {
                            continue;
                        }
                        for (gm, cm) in g.iter_mut().zip(&coeffs[pos as usize]) {
                            gm[0] += cm[0];
                            gm[1] += cm[1];
                        }
                    }
                    for gm in g.iter_mut() {
                        *gm = match self.scalar_drive {
                            Some(s) => [gm[0] * s, gm[1] * s],
                            None => {
                                let d = &self.drive;
                                [d[(0, 0)] * gm[0] + d[(0, 1)] * gm[1], d[(1, 0)] * gm[0] + d[(1, 1)] * gm[1]]
                            }
                        };
                    }
                    let mut c = Vec::with_capacity(p);
                    self.propagate(v, None, Some(&g), &mut c);
                    let (val, bound) = self.value(&c);
                    (c, val, bound)
                })
                .collect();
            for &v in &ids {
                mark[v as usize] = u32::MAX;
            }
            ops.convolutions += next_ids.len() as u64;
            ops.flops += (next_ids.len() * p * 16) as u64;
            coeffs.clear();
            let mut mag: f64 = 0.0;
            for (&v, (c, val, bound)) in next_ids.iter().zip(results) {
                sink(n, v, phased(val));
                mag = mag.max(bound);
                coeffs.push(c);
            }
            ids = next_ids;
            orders = n;
            last_mag = mag;
            if let Some(tol) = tol {
                if mag < tol && prev_mag < tol {
                    converged = true;
                    break;
                }
            }
            prev_mag = mag;
        }
        Ok((
            Convergence {
                converged,
                orders,
                last_magnitude: last_mag,
            },
            ops,
        ))
    }
}

/// Default `rate · τ` bound per slice.
pub const SLICE_BUDGET: f64 = 1.0;

/// Longest slice allowed by the growth budget and the phase budget.
pub fn slice_length(graph: &WalkGraph, budget: f64) -> f64 {
    let rate = growth_rate(graph);
    let (lo, hi) = pole_range(graph);
    let rho = 0.5 * (hi - lo);
    let by_rate = if rate > 0.0 { budget / rate } else { f64::INFINITY };
    let by_phase = if rho + rate > 0.0 { SLICE_PHASE / (rho + rate) } else { f64::INFINITY };
    by_rate.min(by_phase)
}

/// Evolves through `times` (ascending) in slices; composition of slices is
/// exact since each slice sums all walks on the graph.
pub fn evolve_sliced(
    graph: &WalkGraph,
    initial: &GraphState,
    times: &[f64],
    opts: &SweepOptions,
    budget: f64,
) -> Result<Evolution> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(WalkSumError::InvalidConfiguration(
            "evaluation times must be non-negative and ascending".into(),
        ));
    }
    if growth_rate(graph) == 0.0 {
        return evolve_uncoupled(graph, initial, times);
    }
    let tau_max = slice_length(graph, budget);
    let mut plan: Vec<(f64, usize)> = Vec::new();
    let mut prev = 0.0;
    for &t in times {
        let span = t - prev;
        let pieces = if span <= 0.0 {
            0
        } else if tau_max.is_finite() {
            (span / tau_max).ceil() as usize
        } else {
            1
        };
        plan.push((if pieces > 0 { span / pieces as f64 } else { 0.0 }, pieces));
        prev = t;
    }
    let total: usize = plan.iter().map(|p| p.1).sum::<usize>().max(1);
    let (slice_tol, k_max) = match opts.stop {
        StopRule::Tolerance(t) => ((t / total as f64).max(1e-16), opts.k_max),
        // A fixed order per slice is not a truncation of the full sum, so
        // slices always run to rounding level.
        StopRule::FixedOrder => (1e-16, opts.k_max),
    };
    let mut state = initial.clone();
    let mut states = Vec::with_capacity(times.len());
    let mut ops = OpCount::default();
    let mut worst = Convergence {
        converged: true,
        orders: 0,
        last_magnitude: 0.0,
    };
    for &(tau, pieces) in &plan {
        if pieces > 0 {
            let kernel = SliceKernel::new(graph, tau);
            for _ in 0..pieces {
                let (next, conv, o) = kernel.advance(&state, slice_tol, k_max)?;
                ops.absorb(o);
                worst.converged &= conv.converged;
                worst.orders = worst.orders.max(conv.orders);
                worst.last_magnitude = worst.last_magnitude.max(conv.last_magnitude);
                state = next;
            }
        }
        states.push(state.clone());
    }
    Ok(Evolution {
        times: times.to_vec(),
        states,
        convergence: worst,
        ops,
        slices: total,
        walks_per_order: Vec::new(),
        saturated: false,
    })
}

/// Terms of the walk sum grouped by jump count, evaluated by slicing:
/// `result[i][n]` is the order-`n` term at `times[i]` (ascending), for
/// `n ≤ k`. Summing `n ≤ K` gives the order-`K` truncation exactly.
pub fn evolve_orders(
    graph: &WalkGraph,
    initial: &GraphState,
    times: &[f64],
    k: usize,
    budget: f64,
) -> Result<(Vec<Vec<GraphState>>, OpCount)> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(WalkSumError::InvalidConfiguration(
            "evaluation times must be non-negative and ascending".into(),
        ));
    }
    let tau_max = slice_length(graph, budget);
    let mut terms: Vec<GraphState> = vec![GraphState::zeros(graph.len()); k + 1];
    terms[0] = initial.clone();
    let mut ops = OpCount::default();
    let mut out = Vec::with_capacity(times.len());
    let mut prev = 0.0;
    for &t in times {
        let span = t - prev;
        let pieces = if span <= 0.0 {
            0
        } else if tau_max.is_finite() {
            (span / tau_max).ceil() as usize
        } else {
            1
        };
        if pieces > 0 {
            let kernel = SliceKernel::new(graph, span / pieces as f64);
            for _ in 0..pieces {
                let mut next = vec![GraphState::zeros(graph.len()); k + 1];
                for (m, src) in terms.iter().enumerate() {
                    if src.amps.iter().all(|a| a[0].norm_sqr() + a[1].norm_sqr() == 0.0) {
                        continue;
                    }
                    let (split, o) = kernel.advance_orders(src, k - m)?;
                    ops.absorb(o);
                    for (j, part) in split.into_iter().enumerate() {
                        for (dst, a) in next[m + j].amps.iter_mut().zip(part.amps) {
                            dst[0] += a[0];
                            dst[1] += a[1];
                        }
                    }
                }
                terms = next;
            }
        }
        out.push(terms.clone());
        prev = t;
    }
    Ok((out, ops))
}

/// Without jumps every vertex evolves under its own propagator.
fn evolve_uncoupled(graph: &WalkGraph, initial: &GraphState, times: &[f64]) -> Result<Evolution> {
    let props: Vec<ExpMatrix> = (0..graph.len() as u32).map(|v| graph.propagator(v)).collect::<Result<_>>()?;
    let states = times
        .iter()
        .map(|&t| GraphState {
            amps: props
                .iter()
                .zip(&initial.amps)
                .map(|(p, a)| {
                    let u = p.eval(t);
                    [u[(0, 0)] * a[0] + u[(0, 1)] * a[1], u[(1, 0)] * a[0] + u[(1, 1)] * a[1]]
                })
                .collect(),
        })
        .collect();
    Ok(Evolution {
        times: times.to_vec(),
        states,
        convergence: Convergence {
            converged: true,
            orders: 0,
            last_magnitude: 0.0,
        },
        ops: OpCount::default(),
        slices: 1,
        walks_per_order: Vec::new(),
        saturated: false,
    })
}

/// `U_{ν←source}(t)` for every vertex `ν` and each of `times` (ascending),
/// from sliced evolution of both probe columns.
pub fn sliced_conditionals(
    graph: &WalkGraph,
    source: &Configuration,
    times: &[f64],
    opts: &SweepOptions,
) -> Result<(Vec<Vec<Matrix2<C64>>>, Convergence)> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let g = evolve_sliced(graph, &GraphState::product(graph, source, [one, zero])?, times, opts, SLICE_BUDGET)?;
    let r = evolve_sliced(graph, &GraphState::product(graph, source, [zero, one])?, times, opts, SLICE_BUDGET)?;
    let out = g
        .states
        .iter()
        .zip(&r.states)
        .map(|(sg, sr)| {
            sg.amps
                .iter()
                .zip(&sr.amps)
                .map(|(a, b)| Matrix2::new(a[0], b[0], a[1], b[1]))
                .collect()
        })
        .collect();
    let convergence = Convergence {
        converged: g.convergence.converged && r.convergence.converged,
        orders: g.convergence.orders.max(r.convergence.orders),
        last_magnitude: g.convergence.last_magnitude.max(r.convergence.last_magnitude),
    };
    Ok((out, convergence))
}
