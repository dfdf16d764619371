//! End-to-end evolution of the Mott state into amplitude tables.

use std::collections::BTreeSet;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::configuration::Configuration;
use crate::error::{Result, WalkSumError};
use crate::cost::cost_bounds;
use crate::expoly::OpCount;
use crate::graph::{build_graph, WalkGraph, DEFAULT_VERTEX_CAP};
use crate::model::RydbergModel;
use crate::observables::AmplitudeTable;
use crate::sampling::{sample_shell, ShellSample};
use crate::sweep::{
    evolve, evolve_sliced, sample_window, Convergence, CostReport, GraphState,
    StopRule, SweepOptions, SLICE_BUDGET,
};

/// `SingleShot` sums all walks once with closed-form exponential
/// polynomials (all-t answers, cost reports); `Sliced` composes short
/// slices and stays exact for near-degenerate spectra.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    SingleShot,
    #[default]
    Sliced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShellSampleSize {
    pub ell: usize,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub l_final: usize,
    pub l_virtual: usize,
    pub k_max: usize,
    pub tol: f64,
    #[serde(default)]
    pub samples: Vec<ShellSampleSize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub propagation: Propagation,
    #[serde(default = "default_cap")]
    pub vertex_cap: u128,
}

fn default_cap() -> u128 {
    DEFAULT_VERTEX_CAP
}

impl Plan {
    pub fn exhaustive(ell: usize) -> Self {
        Plan {
            l_final: ell,
            l_virtual: ell,
            k_max: SweepOptions::DEFAULT_K_MAX,
            tol: SweepOptions::DEFAULT_TOL,
            samples: Vec::new(),
            seed: 0,
            propagation: Propagation::Sliced,
            vertex_cap: DEFAULT_VERTEX_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_virtual < self.l_final {
            return Err(WalkSumError::InvalidModel(format!(
                "l_virtual {} below l_final {}",
                self.l_virtual, self.l_final
            )));
        }
        if let Some(s) = self.samples.iter().find(|s| s.ell <= self.l_virtual) {
            return Err(WalkSumError::InvalidModel(format!(
                "sampled shell {} lies inside the exact shells (l_virtual {})",
                s.ell, self.l_virtual
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub tables: Vec<AmplitudeTable>,
    pub convergence: Convergence,
    /// Present for single-shot runs.
    pub cost: Option<CostReport>,
    pub ops: OpCount,
    pub vertices: usize,
    pub edges: usize,
    pub slices: usize,
    pub propagation: Propagation,
    pub samples: Vec<ShellSample>,
}

/// Builds the walk graph for a plan: exact shells up to `l_virtual` plus
/// sampled higher shells.
pub fn plan_graph(model: &RydbergModel, plan: &Plan) -> Result<(WalkGraph, Vec<ShellSample>)> {
    plan.validate()?;
    let samples: Vec<ShellSample> = plan
        .samples
        .iter()
        .map(|s| sample_shell(model.n_env(), s.ell, s.size, plan.seed))
        .collect::<Result<_>>()?;
    if samples.is_empty() {
        return Ok((build_graph(model, plan.l_virtual, plan.vertex_cap)?, samples));
    }
    let exact = crate::configuration::count_up_to(model.n_env(), plan.l_virtual).unwrap_or(u128::MAX);
    let extra: u128 = samples.iter().map(|s| s.configs.len() as u128).sum();
    if exact.saturating_add(extra) > plan.vertex_cap {
        return Err(WalkSumError::Capacity {
            what: "configuration graph vertices",
            requested: exact.saturating_add(extra),
            cap: plan.vertex_cap,
        });
    }
    let base = build_graph(model, plan.l_virtual, plan.vertex_cap)?;
    let mut configs = base.vertices().to_vec();
    drop(base);
    for s in &samples {
        configs.extend(s.configs.iter().cloned());
    }
    Ok((WalkGraph::from_configurations(model, configs, plan.vertex_cap)?, samples))
}

pub fn simulate(model: &RydbergModel, times: &[f64], plan: &Plan) -> Result<Simulation> {
    if times.is_empty() {
        return Err(WalkSumError::InvalidModel("no evaluation times".into()));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(WalkSumError::InvalidModel("times must be finite and non-negative".into()));
    }
    let (graph, samples) = plan_graph(model, plan)?;
    let sampled_weight = |c: &Configuration| -> Option<f64> {
        let ell = c.excitation();
        if ell <= plan.l_final {
            return Some(1.0);
        }
        samples.iter().find(|s| s.ell == ell).map(|s| s.weight)
    };
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let mut window = sample_window(t_max, 16);
    window.extend_from_slice(times);
    let opts = SweepOptions {
        k_max: plan.k_max,
        stop: if plan.tol > 0.0 { StopRule::Tolerance(plan.tol) } else { StopRule::FixedOrder },
        window,
    };
    let source = Configuration::empty();
    match plan.propagation {
        Propagation::SingleShot => {
            let initial = GraphState::product(&graph, &source, [C64::new(1.0, 0.0), C64::new(0.0, 0.0)])?;
            let ev = evolve(&graph, &initial, times, &opts)?;
            let tables = times
                .iter()
                .zip(&ev.states)
                .map(|(&t, st)| {
                    AmplitudeTable::from_graph_state(&graph, st, t, ev.convergence.converged, sampled_weight)
                })
                .collect();
            let orders = ev.convergence.orders;
            Ok(Simulation {
                tables,
                convergence: ev.convergence,
                ops: ev.ops,
                cost: Some(CostReport {
                    orders,
                    walks: Default::default(),
                    saturated: ev.saturated,
                    walks_per_order: ev.walks_per_order,
                    ops: ev.ops,
                    bounds: cost_bounds(2, graph.env_sites() + 1, 1, orders),
                }),
                vertices: graph.len(),
                edges: graph.edge_count(),
                slices: 1,
                propagation: Propagation::SingleShot,
                samples,
            })
        }
        Propagation::Sliced => {
            let order: Vec<usize> = {
                let mut idx: Vec<usize> = (0..times.len()).collect();
                idx.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
                idx
            };
            let sorted: Vec<f64> = order.iter().map(|&i| times[i]).collect();
            let initial = GraphState::product(&graph, &source, [C64::new(1.0, 0.0), C64::new(0.0, 0.0)])?;
            let ev = evolve_sliced(&graph, &initial, &sorted, &opts, SLICE_BUDGET)?;
            let mut tables: Vec<Option<AmplitudeTable>> = vec![None; times.len()];
            for (k, &i) in order.iter().enumerate() {
                tables[i] = Some(AmplitudeTable::from_graph_state(
                    &graph,
                    &ev.states[k],
                    times[i],
                    ev.convergence.converged,
                    sampled_weight,
                ));
            }
            Ok(Simulation {
                tables: tables.into_iter().map(Option::unwrap).collect(),
                convergence: ev.convergence,
                cost: None,
                ops: ev.ops,
                vertices: graph.len(),
                edges: graph.edge_count(),
                slices: ev.slices,
                propagation: Propagation::Sliced,
                samples,
            })
        }
    }
}

/// Distinct sampled shells, for reporting.
pub fn sampled_shells(sim: &Simulation) -> BTreeSet<usize> {
    sim.samples.iter().map(|s| s.ell).collect()
}
