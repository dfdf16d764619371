//! Closed-form pair correlation against exact two-atom dynamics.

use anyhow::Result;
use serde::Serialize;
use walksum::observables::g2_analytic;
use walksum::oracle::two_atom;

use crate::config::RunConfig;
use crate::output::{fmt_f64, Writer};
use crate::Outcome;

/// Agreement required between the closed form and the composition,
/// relative to `max(1, |g2|)`.
pub const G2_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct G2Point {
    pub delta: f64,
    pub a: f64,
    pub t: f64,
    pub g2: f64,
    pub g2_two_atom: f64,
    pub abs_diff: f64,
}

/// `(1 − P(r_s|r_j) + P(r_s|g_j)) · P(r_s|r_j) / P(r_s|g_j)` from frozen-partner
/// two-atom evolution.
pub fn g2_two_atom(delta: f64, omega: f64, a: f64, t: f64) -> f64 {
    let ta = two_atom(delta, omega, a, t);
    let (pa, pb) = (ta.r_given_r, ta.r_given_g);
    (1.0 - pa + pb) * pa / pb
}

#[derive(Debug, Serialize)]
pub struct G2Report {
    pub omega: f64,
    pub points: usize,
    /// Largest `|Δg2| / max(1, |g2|)`.
    pub max_rel_diff: f64,
    pub zero_coupling_max_dev: Option<f64>,
    /// `|g2 − 1|` at `t = 1e-6·min(t)` over all `(Δ, A)`.
    pub small_t_max_dev: f64,
    pub pass: bool,
}

pub fn grid(config: &RunConfig) -> Vec<G2Point> {
    let omega = config.model.omega_rad();
    let o = &config.g2_analytic;
    let mut out = Vec::with_capacity(o.deltas.len() * o.couplings.len() * o.times.len());
    for &delta in &o.deltas {
        for &a in &o.couplings {
            for &t in &o.times {
                let g2 = g2_analytic(delta, omega, a, t);
                let g2_two_atom = g2_two_atom(delta, omega, a, t);
                out.push(G2Point {
                    delta,
                    a,
                    t,
                    g2,
                    g2_two_atom,
                    abs_diff: (g2 - g2_two_atom).abs(),
                });
            }
        }
    }
    out
}

pub fn report(config: &RunConfig, points: &[G2Point]) -> G2Report {
    let omega = config.model.omega_rad();
    let o = &config.g2_analytic;
    let max_rel_diff = points
        .iter()
        .map(|p| p.abs_diff / p.g2.abs().max(1.0))
        .fold(0.0, f64::max);
    let zero: Vec<f64> = points.iter().filter(|p| p.a == 0.0).map(|p| (p.g2 - 1.0).abs()).collect();
    let t0 = 1e-6 * o.times.iter().cloned().fold(f64::INFINITY, f64::min).max(1e-9);
    let small_t_max_dev = o
        .deltas
        .iter()
        .flat_map(|&d| o.couplings.iter().map(move |&a| (g2_analytic(d, omega, a, t0) - 1.0).abs()))
        .fold(0.0, f64::max);
    let zero_coupling_max_dev = (!zero.is_empty()).then(|| zero.iter().cloned().fold(0.0, f64::max));
    G2Report {
        omega,
        points: points.len(),
        max_rel_diff,
        zero_coupling_max_dev,
        small_t_max_dev,
        pass: max_rel_diff <= G2_TOL && zero_coupling_max_dev.is_none_or(|d| d == 0.0) && small_t_max_dev < 1e-6,
    }
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    let points = grid(config);
    let rep = report(config, &points);
    let mut w = Writer::new("g2-analytic", config)?;
    w.csv(
        "g2_analytic.csv",
        &["delta", "a", "t", "g2", "g2_two_atom", "abs_diff"],
        points.iter().map(|p| {
            [p.delta, p.a, p.t, p.g2, p.g2_two_atom, p.abs_diff].iter().map(|&x| fmt_f64(x)).collect()
        }),
    )?;
    w.json("g2_analytic.json", &rep)?;
    Ok(Outcome {
        converged: rep.pass,
        files: w.into_files(),
        summary: format!(
            "{} grid points, max relative difference {:.3e}, small-t deviation {:.3e}",
            rep.points, rep.max_rel_diff, rep.small_t_max_dev
        ),
    })
}
