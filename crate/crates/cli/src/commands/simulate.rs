use anyhow::Result;
use serde::Serialize;
use walksum::observables::{
    energy_pressure, g1_map, g1p_map, g2_map, order_param_map, pair_sum_check, r_density_map,
    rydberg_fraction, AmplitudeTable, PairSum, PressureReport, ShellSummary,
};
use walksum::pipeline::{sampled_shells, simulate, Propagation, Simulation};
use walksum::sweep::Convergence;
use walksum::{CostReport, RydbergModel};

use crate::config::RunConfig;
use crate::output::Writer;
use crate::Outcome;

const TOP_AMPLITUDES: usize = 10;

#[derive(Debug, Serialize)]
pub struct TopAmplitude {
    /// Excited environment sites as lattice offsets from the probe.
    pub sites: Vec<(i64, i64)>,
    pub p_g: f64,
    pub p_r: f64,
}

#[derive(Debug, Serialize)]
pub struct TimeSummary {
    pub t: f64,
    pub omega_t: f64,
    pub norm_deficit: f64,
    pub rydberg_fraction: f64,
    pub pressure: PressureReport,
    pub pair_sum: PairSum,
    pub shells: Vec<ShellSummary>,
    pub top_amplitudes: Vec<TopAmplitude>,
}

#[derive(Debug, Serialize)]
pub struct CostSummary {
    pub orders: usize,
    pub walks_per_order: Vec<u128>,
    pub saturated: bool,
    pub ops: walksum::OpCount,
    pub bounds: walksum::cost::CostBounds,
}

impl From<&CostReport> for CostSummary {
    fn from(c: &CostReport) -> Self {
        CostSummary {
            orders: c.orders,
            walks_per_order: c.walks_per_order.clone(),
            saturated: c.saturated,
            ops: c.ops,
            bounds: c.bounds,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SimulationSummary {
    pub propagation: Propagation,
    pub convergence: Convergence,
    pub vertices: usize,
    pub edges: usize,
    pub slices: usize,
    pub ops: walksum::OpCount,
    pub sampled_shells: Vec<usize>,
    pub cost: Option<CostSummary>,
    pub times: Vec<TimeSummary>,
}

fn top_amplitudes(table: &AmplitudeTable, model: &RydbergModel) -> Vec<TopAmplitude> {
    let mut rows: Vec<(f64, TopAmplitude)> = table
        .entries()
        .iter()
        .map(|e| {
            let sites = e
                .config
                .sites()
                .iter()
                .map(|&k| {
                    let c = model.env_coord(k as usize);
                    (c.x, c.y)
                })
                .collect();
            let (p_g, p_r) = (e.amps[0].norm_sqr(), e.amps[1].norm_sqr());
            (p_g + p_r, TopAmplitude { sites, p_g, p_r })
        })
        .collect();
    // Entries come in graph order, so a stable sort keeps ties deterministic.
    rows.sort_by(|a, b| b.0.total_cmp(&a.0));
    rows.into_iter().take(TOP_AMPLITUDES).map(|r| r.1).collect()
}

pub fn summarize(sim: &Simulation, model: &RydbergModel, config: &RunConfig) -> Result<SimulationSummary> {
    let times = sim
        .tables
        .iter()
        .map(|table| {
            Ok(TimeSummary {
                t: table.time,
                omega_t: model.omega() * table.time,
                norm_deficit: table.norm_deficit,
                rydberg_fraction: rydberg_fraction(table),
                pressure: energy_pressure(table, model.spec())?,
                pair_sum: pair_sum_check(table, model, config.free_pairs.tol),
                shells: table.shells.clone(),
                top_amplitudes: top_amplitudes(table, model),
            })
        })
        .collect::<Result<_>>()?;
    Ok(SimulationSummary {
        propagation: sim.propagation,
        convergence: sim.convergence,
        vertices: sim.vertices,
        edges: sim.edges,
        slices: sim.slices,
        ops: sim.ops,
        sampled_shells: sampled_shells(sim).into_iter().collect(),
        cost: sim.cost.as_ref().map(CostSummary::from),
        times,
    })
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    let model = RydbergModel::new(&config.model)?;
    let sim = simulate(&model, &config.times, &config.plan())?;
    let summary = summarize(&sim, &model, config)?;
    let mut w = Writer::new("simulate", config)?;
    for (i, table) in sim.tables.iter().enumerate() {
        for map in [
            g1_map(table, &model),
            g1p_map(table, &model),
            g2_map(table, &model),
            order_param_map(table, &model),
            r_density_map(table, &model),
        ] {
            w.map(&format!("{}_t{i}.csv", map.kind.name()), &map)?;
        }
    }
    w.json("summary.json", &summary)?;
    let converged = sim.convergence.converged && sim.tables.iter().all(|t| t.converged);
    let last = summary.times.last().expect("times are non-empty");
    Ok(Outcome {
        converged,
        files: w.into_files(),
        summary: format!(
            "{} vertices, {} slices, converged {}; at t = {} μs: f_R = {:.6e}, norm deficit = {:.3e}",
            sim.vertices, sim.slices, converged, last.t, last.rydberg_fraction, last.norm_deficit
        ),
    })
}
