//! Walk sums against the dense references: exact evolution, the truncated
//! power series and evolution in a truncated Hilbert space.

use anyhow::{ensure, Result};
use walksum::num_complex::Complex64 as C64;
use serde::Serialize;
use walksum::graph::DEFAULT_VERTEX_CAP;
use walksum::observables::AmplitudeTable;
use walksum::oracle::{taylor_propagator, truncated_evolve, DenseState, EdPropagator};
use walksum::pipeline::{simulate, Plan};
use walksum::sweep::{evolve_orders, GraphState, SLICE_BUDGET};
use walksum::{build_graph, Configuration, RydbergModel};

use crate::config::RunConfig;
use crate::output::Writer;
use crate::Outcome;

/// Slack for rounding when the walk sum and the series agree exactly.
pub const DOMINANCE_SLACK: f64 = 1e-12;

/// Walk-sum amplitudes as a full state vector; absent configurations are 0.
pub fn dense_from_table(table: &AmplitudeTable, n_sites: usize) -> DenseState {
    let mut psi = DenseState {
        n_sites,
        amps: vec![C64::new(0.0, 0.0); 1 << n_sites],
    };
    for e in table.entries() {
        for (s, &a) in e.amps.iter().enumerate() {
            psi.amps[DenseState::index(&e.config, s == 1)] = a;
        }
    }
    psi
}

#[derive(Clone, Debug, Serialize)]
pub struct EdRow {
    pub t: f64,
    pub max_error: f64,
    pub norm_deficit: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EdComparison {
    pub rows: Vec<EdRow>,
    pub max_error: f64,
    pub converged: bool,
    pub threshold: f64,
    pub pass: bool,
}

/// Exhaustive walk sum (every configuration, `k_max`/`tol` from `base`)
/// against exact diagonalization.
pub fn ws_vs_ed(model: &RydbergModel, times: &[f64], base: &Plan, threshold: f64) -> Result<EdComparison> {
    let ed = EdPropagator::new(model)?;
    let plan = Plan {
        l_final: model.n_env(),
        l_virtual: model.n_env(),
        samples: Vec::new(),
        ..base.clone()
    };
    let sim = simulate(model, times, &plan)?;
    let mott = DenseState::mott(model.n_sites());
    let rows: Vec<EdRow> = sim
        .tables
        .iter()
        .map(|table| EdRow {
            t: table.time,
            max_error: dense_from_table(table, model.n_sites()).max_diff(&ed.evolve(&mott, table.time)),
            norm_deficit: table.norm_deficit,
        })
        .collect();
    let max_error = rows.iter().map(|r| r.max_error).fold(0.0, f64::max);
    Ok(EdComparison {
        max_error,
        converged: sim.convergence.converged,
        threshold,
        pass: sim.convergence.converged && max_error < threshold,
        rows,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TaylorRow {
    pub t: f64,
    pub k: usize,
    pub ws_error: f64,
    pub taylor_error: f64,
    pub pass: bool,
}

/// Order-`K` walk sum against the order-`K` Taylor series of `e^{-iHt}`.
/// Both are compared with the exact columns of the propagator for the
/// environment in `∅` and the probe in `g` or `r`.
pub fn ws_vs_taylor(model: &RydbergModel, times: &[f64], ks: &[usize]) -> Result<Vec<TaylorRow>> {
    ensure!(!ks.is_empty(), "no truncation orders given");
    let ed = EdPropagator::new(model)?;
    let graph = build_graph(model, model.n_env(), DEFAULT_VERTEX_CAP)?;
    let k_top = *ks.iter().max().unwrap();
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let empty = Configuration::empty();
    let mut terms = Vec::new();
    for probe in [[one, zero], [zero, one]] {
        let init = GraphState::product(&graph, &empty, probe)?;
        terms.push(evolve_orders(&graph, &init, &sorted, k_top, SLICE_BUDGET)?.0);
    }
    let mut rows = Vec::new();
    for (ti, &t) in sorted.iter().enumerate() {
        let exact: Vec<DenseState> = (0..2)
            .map(|col| {
                let mut psi = DenseState::mott(model.n_sites());
                psi.amps[0] = if col == 0 { one } else { zero };
                psi.amps[1] = if col == 1 { one } else { zero };
                ed.evolve(&psi, t)
            })
            .collect();
        for &k in ks {
            let taylor = taylor_propagator(model, k, t)?;
            let mut ws_error: f64 = 0.0;
            let mut taylor_error: f64 = 0.0;
            for (col, ex) in exact.iter().enumerate() {
                for (v, c) in graph.vertices().iter().enumerate() {
                    for s in 0..2 {
                        let a: C64 = terms[col][ti][..=k].iter().map(|st| st.amps[v][s]).sum();
                        ws_error = ws_error.max((a - ex.amplitude(c, s == 1)).norm());
                    }
                }
                for (r, &want) in ex.amps.iter().enumerate() {
                    taylor_error = taylor_error.max((taylor[(r, col)] - want).norm());
                }
            }
            rows.push(TaylorRow {
                t,
                k,
                ws_error,
                taylor_error,
                pass: ws_error <= taylor_error + DOMINANCE_SLACK,
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationRow {
    pub t: f64,
    /// Over basis states with at most `truncated_l_max` excitations, probe included.
    pub ws_error: f64,
    pub truncated_error: f64,
    /// Over the whole Hilbert space.
    pub ws_error_full: f64,
    pub truncated_error_full: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationComparison {
    pub l_final: usize,
    pub l_virtual: usize,
    pub truncated_l_max: usize,
    pub rows: Vec<TruncationRow>,
    pub pass: bool,
}

/// Walk sum with final excitations capped at `plan.l_final` (virtual ones at
/// `plan.l_virtual`) against exact evolution inside the `l_max`-excitation
/// subspace; both are scored against exact diagonalization.
pub fn ws_vs_truncated(model: &RydbergModel, times: &[f64], plan: &Plan, l_max: usize) -> Result<TruncationComparison> {
    let ed = EdPropagator::new(model)?;
    let sim = simulate(model, times, plan)?;
    let mott = DenseState::mott(model.n_sites());
    let rows: Vec<TruncationRow> = sim
        .tables
        .iter()
        .map(|table| {
            let t = table.time;
            let exact = ed.evolve(&mott, t);
            let ws = dense_from_table(table, model.n_sites());
            let tr = truncated_evolve(model, l_max, t)?;
            let err = |psi: &DenseState, keep: &dyn Fn(usize) -> bool| {
                psi.amps
                    .iter()
                    .zip(&exact.amps)
                    .enumerate()
                    .filter(|(b, _)| keep(*b))
                    .map(|(_, (a, e))| (a - e).norm())
                    .fold(0.0, f64::max)
            };
            let common = |b: usize| b.count_ones() as usize <= l_max;
            let all = |_: usize| true;
            let ws_error = err(&ws, &common);
            let truncated_error = err(&tr, &common);
            Ok(TruncationRow {
                t,
                ws_error,
                truncated_error,
                ws_error_full: err(&ws, &all),
                truncated_error_full: err(&tr, &all),
                pass: ws_error < truncated_error,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TruncationComparison {
        l_final: plan.l_final,
        l_virtual: plan.l_virtual,
        truncated_l_max: l_max,
        pass: sim.convergence.converged && rows.iter().all(|r| r.pass),
        rows,
    })
}

#[derive(Debug, Serialize)]
pub struct ValidationReport {
    pub ed: EdComparison,
    pub taylor: Vec<TaylorRow>,
    pub truncated: TruncationComparison,
    pub pass: bool,
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    let model = RydbergModel::new(&config.model)?;
    let plan = config.plan();
    let ed = ws_vs_ed(&model, &config.times, &plan, config.validate.ed_threshold)?;
    let taylor = ws_vs_taylor(&model, &config.times, &config.validate.k_list)?;
    let l_max = config.validate.truncated_l_max.unwrap_or(config.l_final);
    let truncated = ws_vs_truncated(&model, &config.times, &plan, l_max)?;
    let pass = ed.pass && taylor.iter().all(|r| r.pass) && truncated.pass;
    let report = ValidationReport {
        ed,
        taylor,
        truncated,
        pass,
    };
    let mut w = Writer::new("validate", config)?;
    w.json("validate.json", &report)?;
    w.csv(
        "taylor.csv",
        &["t", "k", "ws_error", "taylor_error", "pass"],
        report.taylor.iter().map(|r| {
            vec![
                crate::output::fmt_f64(r.t),
                r.k.to_string(),
                crate::output::fmt_f64(r.ws_error),
                crate::output::fmt_f64(r.taylor_error),
                r.pass.to_string(),
            ]
        }),
    )?;
    Ok(Outcome {
        converged: pass,
        files: w.into_files(),
        summary: format!(
            "ED max error {:.3e} ({}); Taylor dominance {}/{}; truncation advantage {}",
            report.ed.max_error,
            if report.ed.pass { "pass" } else { "fail" },
            report.taylor.iter().filter(|r| r.pass).count(),
            report.taylor.len(),
            if report.truncated.pass { "pass" } else { "fail" }
        ),
    })
}
