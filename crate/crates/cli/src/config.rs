//! Run configuration: JSON file, defaults and command-line overrides.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use walksum::graph::DEFAULT_VERTEX_CAP;
use walksum::model::free_angle;
use walksum::pipeline::{Plan, Propagation, ShellSampleSize};
use walksum::{ModelSpec, SiteCoord, SweepOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    /// Evaluation times [μs].
    pub times: Vec<f64>,
    pub l_final: usize,
    pub l_virtual: usize,
    pub k_max: usize,
    pub tol: f64,
    /// Sampled shells above `l_virtual`.
    pub samples: Vec<ShellSampleSize>,
    pub seed: u64,
    pub out: PathBuf,
    pub propagation: Propagation,
    pub vertex_cap: u128,
    pub validate: ValidateOptions,
    pub complexity: ComplexityOptions,
    pub free_pairs: FreePairOptions,
    pub g2_analytic: G2Options,
}

/// 3×3 lattice at Ω = 30 rad/μs, Δ = 0, Ωt = 8π with the (15,11) free-pair angle.
pub fn default_model() -> ModelSpec {
    let phi = PI / 2.0;
    let theta = free_angle(SiteCoord::new(15, 11), phi).expect("(15,11) has a free angle at φ = π/2");
    ModelSpec::new(3, 3, 1.5, 30.0, 0.0, theta, phi)
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: default_model(),
            times: vec![8.0 * PI / 30.0],
            l_final: 3,
            l_virtual: 3,
            k_max: SweepOptions::DEFAULT_K_MAX,
            tol: SweepOptions::DEFAULT_TOL,
            samples: Vec::new(),
            seed: 0,
            out: PathBuf::from("walksum-out"),
            propagation: Propagation::default(),
            vertex_cap: DEFAULT_VERTEX_CAP,
            validate: ValidateOptions::default(),
            complexity: ComplexityOptions::default(),
            free_pairs: FreePairOptions::default(),
            g2_analytic: G2Options::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateOptions {
    /// Orders compared against the truncated power series.
    pub k_list: Vec<usize>,
    /// Excitation cap of the truncated Hilbert space compared with the
    /// walk sum at `l_final`/`l_virtual`; `l_final` when absent.
    pub truncated_l_max: Option<usize>,
    pub ed_threshold: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions {
            k_list: (2..=6).collect(),
            truncated_l_max: None,
            ed_threshold: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplexityOptions {
    /// Lattices `[nx, ny]` of the walk-sum sweep.
    pub lattices: Vec<[usize; 2]>,
    pub k: usize,
    pub l_virtual: usize,
    /// Site counts of the dense-evolution cost model (chains `N × 1`).
    pub ed_sites: Vec<usize>,
}

impl Default for ComplexityOptions {
    fn default() -> Self {
        ComplexityOptions {
            lattices: (3..=10).map(|n| [n, n]).collect(),
            k: 3,
            l_virtual: 3,
            ed_sites: (4..=11).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreePairOptions {
    /// Relative tolerance of the free-pair condition.
    pub tol: f64,
}

impl Default for FreePairOptions {
    fn default() -> Self {
        FreePairOptions { tol: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct G2Options {
    /// Detunings [rad/μs].
    pub deltas: Vec<f64>,
    /// Pair couplings [rad/μs].
    pub couplings: Vec<f64>,
    /// Times [μs].
    pub times: Vec<f64>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

impl Default for G2Options {
    fn default() -> Self {
        G2Options {
            deltas: linspace(-15.0, 15.0, 10),
            couplings: linspace(0.0, 90.0, 10),
            times: linspace(0.01, 0.2, 10),
        }
    }
}

/// Command-line values that replace config entries.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub times: Vec<f64>,
    pub l_final: Option<usize>,
    pub l_virtual: Option<usize>,
    pub k_max: Option<usize>,
    pub tol: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if !o.times.is_empty() {
            self.times = o.times.clone();
        }
        if let Some(l) = o.l_final {
            self.l_final = l;
            self.l_virtual = self.l_virtual.max(l);
        }
        if let Some(l) = o.l_virtual {
            self.l_virtual = l;
        }
        if let Some(k) = o.k_max {
            self.k_max = k;
        }
        if let Some(t) = o.tol {
            self.tol = t;
        }
    }

    pub fn check(&self) -> Result<()> {
        self.model.validate()?;
        if self.times.is_empty() {
            bail!("times must not be empty");
        }
        if let Some(t) = self.times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            bail!("time {t} must be finite and non-negative");
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            bail!("tol {} must be finite and non-negative", self.tol);
        }
        self.plan().validate()?;
        Ok(())
    }

    pub fn plan(&self) -> Plan {
        Plan {
            l_final: self.l_final,
            l_virtual: self.l_virtual,
            k_max: self.k_max,
            tol: self.tol,
            samples: self.samples.clone(),
            seed: self.seed,
            propagation: self.propagation,
            vertex_cap: self.vertex_cap,
        }
    }
}
