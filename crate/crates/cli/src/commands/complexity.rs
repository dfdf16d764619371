//! Walk counts and operation counts of fixed-order walk sums over a
//! lattice-size sweep, against the cost of dense diagonalization.

use anyhow::Result;
use serde::Serialize;
use walksum::cost::{cost_bounds, fit_exponential, fit_power_law, CostBounds, LineFit};
use walksum::num_bigint::BigUint;
use walksum::{build_graph, sum_walks, walk_counts, Configuration, RydbergModel, SweepOptions};

use crate::config::RunConfig;
use crate::output::{fmt_f64, Writer};
use crate::Outcome;

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub nx: usize,
    pub ny: usize,
    pub n_sites: usize,
    pub vertices: usize,
    pub edges: usize,
    pub orders: usize,
    pub walks_per_order: Vec<u128>,
    /// Walk counters agree with adjacency powers on every vertex and order.
    pub walks_match: bool,
    pub convolutions: u64,
    pub flops: u64,
    /// `flops / (4 · vertices)`: cost per entry of one conditional evolution.
    pub flops_per_element: f64,
    pub bounds: CostBounds,
    /// `bounds.walk_sum / bounds.taylor`.
    pub bound_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EdRow {
    pub n_sites: usize,
    pub dim: usize,
    /// `(4/3)·D³` for the symmetric eigensolver plus `2·D²` per applied time.
    pub flops: f64,
}

#[derive(Debug, Serialize)]
pub struct ComplexityReport {
    pub k: usize,
    pub l_virtual: usize,
    pub sweep: Vec<SweepRow>,
    pub flops_power_fit: Option<LineFit>,
    pub per_element_power_fit: Option<LineFit>,
    pub per_element_exponential_fit: Option<LineFit>,
    /// Largest admissible per-element exponent, `K·q + 1` with `q = 1`.
    pub exponent_limit: f64,
    pub ed: Vec<EdRow>,
    pub ed_exponential_fit: Option<LineFit>,
    /// `exp(slope)` of the exponential fit to the dense cost.
    pub ed_growth_per_site: Option<f64>,
    pub walks_match: bool,
    pub pass: bool,
}

/// Walk counters of one fixed-order sweep against adjacency powers.
pub fn sweep_point(config: &RunConfig, nx: usize, ny: usize) -> Result<SweepRow> {
    let o = &config.complexity;
    let mut spec = config.model.clone();
    spec.nx = nx;
    spec.ny = ny;
    spec.probe = None;
    let model = RydbergModel::new(&spec)?;
    let graph = build_graph(&model, o.l_virtual, config.vertex_cap)?;
    let targets = graph.vertices().to_vec();
    let t_end = config.times.iter().cloned().fold(0.0, f64::max);
    let source = Configuration::empty();
    let ws = sum_walks(&graph, &source, &targets, &SweepOptions::fixed_order(o.k, t_end))?;
    let root = graph.require(&source)?;
    let mut walks_match = !ws.cost.saturated && ws.cost.walks_per_order.len() == o.k + 1;
    for n in 0..=o.k {
        let counts = walk_counts(&graph, root, n);
        let total: BigUint = counts.iter().sum();
        walks_match &= ws.cost.walks_per_order.get(n).map(|&w| BigUint::from(w)) == Some(total);
        for (v, c) in targets.iter().enumerate() {
            let got = ws.cost.walks.get(c).and_then(|w| w.get(n)).copied().unwrap_or(0);
            walks_match &= BigUint::from(got) == counts[v];
        }
    }
    let bounds = cost_bounds(2, model.n_sites(), 1, o.k);
    Ok(SweepRow {
        nx,
        ny,
        n_sites: model.n_sites(),
        vertices: graph.len(),
        edges: graph.edge_count(),
        orders: ws.cost.orders,
        walks_per_order: ws.cost.walks_per_order.clone(),
        walks_match,
        convolutions: ws.cost.ops.convolutions,
        flops: ws.cost.ops.flops,
        flops_per_element: ws.cost.ops.flops as f64 / (4 * graph.len()) as f64,
        bounds,
        bound_ratio: bounds.walk_sum / bounds.taylor,
    })
}

pub fn ed_cost(n_sites: usize, times: usize) -> EdRow {
    let d = (1usize << n_sites) as f64;
    EdRow {
        n_sites,
        dim: 1 << n_sites,
        flops: 4.0 / 3.0 * d.powi(3) + 2.0 * d * d * times as f64,
    }
}

fn fit_if<F: Fn(&[f64], &[f64]) -> LineFit>(xs: &[f64], ys: &[f64], fit: F) -> Option<LineFit> {
    (xs.len() >= 2).then(|| fit(xs, ys))
}

pub fn report(config: &RunConfig) -> Result<ComplexityReport> {
    let o = &config.complexity;
    let sweep: Vec<SweepRow> = o
        .lattices
        .iter()
        .map(|&[nx, ny]| sweep_point(config, nx, ny))
        .collect::<Result<_>>()?;
    let ns: Vec<f64> = sweep.iter().map(|r| r.n_sites as f64).collect();
    let flops: Vec<f64> = sweep.iter().map(|r| r.flops as f64).collect();
    let per: Vec<f64> = sweep.iter().map(|r| r.flops_per_element).collect();
    let per_element_power_fit = fit_if(&ns, &per, fit_power_law);
    let exponent_limit = (o.k + 1) as f64;
    let ed: Vec<EdRow> = o.ed_sites.iter().map(|&n| ed_cost(n, config.times.len())).collect();
    let ed_x: Vec<f64> = ed.iter().map(|r| r.n_sites as f64).collect();
    let ed_y: Vec<f64> = ed.iter().map(|r| r.flops).collect();
    let ed_exponential_fit = fit_if(&ed_x, &ed_y, fit_exponential);
    let walks_match = sweep.iter().all(|r| r.walks_match);
    let pass = walks_match && per_element_power_fit.is_none_or(|f| f.slope <= exponent_limit);
    Ok(ComplexityReport {
        k: o.k,
        l_virtual: o.l_virtual,
        flops_power_fit: fit_if(&ns, &flops, fit_power_law),
        per_element_power_fit,
        per_element_exponential_fit: fit_if(&ns, &per, fit_exponential),
        exponent_limit,
        ed_growth_per_site: ed_exponential_fit.map(|f| f.slope.exp()),
        ed_exponential_fit,
        ed,
        walks_match,
        pass,
        sweep,
    })
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    let rep = report(config)?;
    let mut w = Writer::new("complexity", config)?;
    w.csv(
        "complexity.csv",
        &["n_sites", "vertices", "edges", "convolutions", "flops", "flops_per_element", "bound_ratio", "walks_match"],
        rep.sweep.iter().map(|r| {
            vec![
                r.n_sites.to_string(),
                r.vertices.to_string(),
                r.edges.to_string(),
                r.convolutions.to_string(),
                r.flops.to_string(),
                fmt_f64(r.flops_per_element),
                fmt_f64(r.bound_ratio),
                r.walks_match.to_string(),
            ]
        }),
    )?;
    w.json("complexity.json", &rep)?;
    let exp = |f: Option<LineFit>| f.map_or("n/a".to_string(), |f| format!("{:.3}", f.slope));
    Ok(Outcome {
        converged: rep.pass,
        files: w.into_files(),
        summary: format!(
            "walk counts {}; per-element cost exponent {} (limit {}); dense cost growth {} per site",
            if rep.walks_match { "match" } else { "MISMATCH" },
            exp(rep.per_element_power_fit),
            rep.exponent_limit,
            rep.ed_growth_per_site.map_or("n/a".to_string(), |g| format!("{g:.3}"))
        ),
    })
}
