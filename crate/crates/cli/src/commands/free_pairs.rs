use anyhow::Result;
use serde::Serialize;
use walksum::model::{free_angle, is_free_pair};
use walksum::{RydbergModel, SiteCoord};

use crate::config::RunConfig;
use crate::output::{fmt_f64, Writer};
use crate::Outcome;

#[derive(Clone, Debug, Serialize)]
pub struct FreePairSite {
    pub j_x: i64,
    pub j_y: i64,
    pub free: bool,
    /// `(3sin²θ(j·e_φ)² − |j|²)/|j|²`; zero on free pairs.
    pub deviation: f64,
    /// θ that frees this direction at the configured φ.
    pub free_angle: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct FreePairReport {
    pub theta: f64,
    pub phi: f64,
    pub tol: f64,
    pub free_sites: Vec<SiteCoord>,
    pub sites: Vec<FreePairSite>,
}

pub fn free_pair_sites(model: &RydbergModel, tol: f64) -> Vec<FreePairSite> {
    let spec = model.spec();
    let s = spec.theta.sin();
    (0..model.n_env())
        .map(|k| {
            let j = model.env_coord(k);
            let r2 = j.norm_sqr() as f64;
            let proj = j.x as f64 * spec.phi.cos() + j.y as f64 * spec.phi.sin();
            FreePairSite {
                j_x: j.x,
                j_y: j.y,
                free: is_free_pair(j, spec, tol),
                deviation: (3.0 * s * s * proj * proj - r2) / r2,
                free_angle: free_angle(j, spec.phi),
            }
        })
        .collect()
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    let model = RydbergModel::new(&config.model)?;
    let tol = config.free_pairs.tol;
    let sites = free_pair_sites(&model, tol);
    let report = FreePairReport {
        theta: config.model.theta,
        phi: config.model.phi,
        tol,
        free_sites: sites.iter().filter(|s| s.free).map(|s| SiteCoord::new(s.j_x, s.j_y)).collect(),
        sites,
    };
    let scale = model.n_env() as f64;
    let mut w = Writer::new("free-pairs", config)?;
    w.csv(
        "free_pairs.csv",
        &["j_x", "j_y", "value", "value_pair_scaled"],
        report.sites.iter().map(|s| {
            let flag = if s.free { 1.0 } else { 0.0 };
            vec![s.j_x.to_string(), s.j_y.to_string(), fmt_f64(flag), fmt_f64(flag * scale)]
        }),
    )?;
    w.json("free_pairs.json", &report)?;
    Ok(Outcome {
        converged: true,
        files: w.into_files(),
        summary: format!("{} free-pair sites of {}", report.free_sites.len(), model.n_env()),
    })
}
