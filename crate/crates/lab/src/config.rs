//! Experiment configuration: a TOML document with dotted sections.
//!
//! ```toml
//! schema_version = 1
//! seed = 0
//!
//! [domain]
//! lower = [0.0, 0.0]
//! upper = [1.0, 1.0]
//!
//! [density]
//! kind = "uniform"          # "affine" (c0, slope) or "bumps" (centers, width, floor)
//!
//! [kernel]
//! name = "indicator"
//!
//! [graph]
//! laplacian = "unnormalized" # "sym" or "rw"
//! self_loops = true
//!
//! [schedule]
//! c = 1.0
//! theta = 0.9
//!
//! [sweep]
//! n = [1000, 2000, 4000, 8000]
//! seeds = [0, 1, 2, 3, 4]
//! eigenpairs = 4
//! clusters = 2
//! ```
//!
//! Every key has a default except `schema_version`. See `configs/` in the
//! repository for complete examples.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use specclust_core::eigen::SolverOptions;
use specclust_core::geometry::{DensityField, DensityKind, Domain};
use specclust_core::graph::{GraphOptions, LaplacianKind, DEFAULT_MEMORY_BUDGET};
use specclust_core::kernel::RadialKernel;
use specclust_core::kmeans::KMeansOptions;
use specclust_core::pipeline::{epsilon_schedule, Schedule};
use specclust_core::transport::TransportOptions;

use crate::error::{LabError, LabResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Base seed; trial seeds are `seed + seeds[i]` (wrapping).
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub density: DensitySection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub graph: GraphSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub reference: ReferenceSection,
    #[serde(default)]
    pub tl2: Tl2Section,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub kmeans: KMeansSection,
    #[serde(default)]
    pub connectivity: ConnectivitySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
}

impl Default for DensitySection {
    fn default() -> Self {
        Self { kind: "uniform".into(), c0: None, slope: None, centers: None, width: None, floor: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub name: String,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self { name: "indicator".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphSection {
    pub laplacian: String,
    pub self_loops: bool,
    pub memory_budget_bytes: usize,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self { laplacian: "unnormalized".into(), self_loops: true, memory_budget_bytes: DEFAULT_MEMORY_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub c: f64,
    pub theta: f64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self { c: 1.0, theta: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub n: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Eigenpairs computed per trial.
    pub eigenpairs: usize,
    /// Clusters for the k-means step; 0 skips clustering.
    pub clusters: usize,
    /// Wall times are written as 0 unless set, so reruns are byte-identical.
    pub record_timing: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { n: vec![1000, 2000, 4000, 8000], seeds: vec![0, 1, 2, 3, 4], eigenpairs: 4, clusters: 2, record_timing: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceSection {
    /// Finite-difference resolution for nonconstant densities; empty picks
    /// 256, 128² or 48³.
    pub resolution: Vec<usize>,
    /// Grid on which continuum clusters are formed and compared.
    pub cluster_resolution: Vec<usize>,
}


#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tl2Method {
    /// Exact transport when both supports fit the budget, else the matching map.
    Auto,
    Exact,
    Map,
    /// Skip the eigenvector comparison.
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tl2Section {
    pub method: Tl2Method,
    /// Reference grid for exact TL² distances; empty uses the matching grid.
    pub grid: Vec<usize>,
    pub max_support: usize,
}

impl Default for Tl2Section {
    fn default() -> Self {
        Self { method: Tl2Method::Auto, grid: Vec::new(), max_support: TransportOptions::default().max_support }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    pub dense_threshold: usize,
    pub max_matvecs: usize,
    pub group_rtol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self { tol: d.tol, dense_threshold: d.dense_threshold, max_matvecs: d.max_matvecs, group_rtol: d.group_rtol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KMeansSection {
    pub restarts: usize,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for KMeansSection {
    fn default() -> Self {
        let d = KMeansOptions::default();
        Self { restarts: d.restarts, max_iterations: d.max_iterations, seed: d.seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConnectivitySection {
    pub c: Vec<f64>,
    pub theta: Vec<f64>,
}

impl Default for ConnectivitySection {
    fn default() -> Self {
        Self { c: vec![0.3, 2.0], theta: vec![1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> LabResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// A valid configuration with every default filled in.
    pub fn example() -> Self {
        Self::from_toml("schema_version = 1").expect("defaults are valid")
    }

    pub fn validate(&self) -> LabResult<()> {
        let bad = |m: String| Err(LabError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        let domain = self.domain()?;
        self.density_field()?;
        self.kernel()?;
        self.laplacian()?;
        let d = domain.dim();
        if self.sweep.n.is_empty() || self.sweep.n.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sweep.n must be a non-empty strictly ascending list".into());
        }
        if self.sweep.n[0] < 2 {
            return bad("sweep.n entries must be at least 2".into());
        }
        if self.sweep.seeds.is_empty() {
            return bad("sweep.seeds must not be empty".into());
        }
        if self.sweep.eigenpairs == 0 || self.sweep.eigenpairs < self.sweep.clusters {
            return bad("sweep.eigenpairs must be positive and at least sweep.clusters".into());
        }
        for &n in &self.sweep.n {
            if self.sweep.eigenpairs > n {
                return bad(format!("sweep.eigenpairs exceeds n = {n}"));
            }
            let s = self.schedule_for(n, d)?;
            if !(s.eps > 0.0) {
                return bad(format!("schedule gives eps <= 0 at n = {n}"));
            }
        }
        for r in [&self.reference.resolution, &self.reference.cluster_resolution, &self.tl2.grid] {
            if !r.is_empty() && (r.len() != d || r.iter().any(|&x| x < 2)) {
                return bad("grid resolutions need one entry >= 2 per axis".into());
            }
        }
        if !self.reference.resolution.is_empty() && self.reference.resolution.iter().any(|&x| x < 8) {
            return bad("reference.resolution needs at least 8 cells per axis".into());
        }
        if !(self.solver.tol > 0.0) || !(self.solver.group_rtol > 0.0) {
            return bad("solver tolerances must be positive".into());
        }
        if self.kmeans.restarts == 0 {
            return bad("kmeans.restarts must be at least 1".into());
        }
        if self.connectivity.c.iter().any(|c| !(*c > 0.0)) || self.connectivity.theta.iter().any(|t| !(*t > 0.0)) {
            return bad("connectivity.c and connectivity.theta must be positive".into());
        }
        Ok(())
    }

    /// Sweep schedules must satisfy the rate condition (`theta < 1`).
    pub fn require_admissible(&self) -> LabResult<()> {
        if self.schedule.theta >= 1.0 {
            return Err(LabError::Config(format!(
                "schedule.theta = {} is sub-critical; convergence sweeps need theta < 1",
                self.schedule.theta
            )));
        }
        Ok(())
    }

    pub fn domain(&self) -> LabResult<Domain> {
        let d = self.domain.lower.len();
        if !(1..=3).contains(&d) {
            return Err(LabError::Config("domain dimension must be 1, 2 or 3".into()));
        }
        Ok(Domain::new(self.domain.lower.clone(), self.domain.upper.clone())?)
    }

    pub fn density_field(&self) -> LabResult<DensityField> {
        let domain = self.domain()?;
        let d = domain.dim();
        let s = &self.density;
        let missing = |key: &str| LabError::Config(format!("density.{key} is required for kind '{}'", s.kind));
        let kind = match s.kind.as_str() {
            "uniform" => DensityKind::Uniform,
            "affine" => DensityKind::Affine {
                c0: s.c0.ok_or_else(|| missing("c0"))?,
                slope: s.slope.clone().ok_or_else(|| missing("slope"))?,
            },
            "bumps" => DensityKind::GaussianBumps {
                centers: s.centers.clone().ok_or_else(|| missing("centers"))?,
                width: s.width.ok_or_else(|| missing("width"))?,
                floor: s.floor.ok_or_else(|| missing("floor"))?,
            },
            other => return Err(LabError::Config(format!("unknown density kind '{other}'"))),
        };
        let field = DensityField::new(kind, domain).map_err(|e| LabError::Config(e.to_string()))?;
        if field.upper_bound() / field.lower_bound() > specclust_core::geometry::MAX_DENSITY_RATIO {
            return Err(LabError::Config(format!("density ratio exceeds {:e}", specclust_core::geometry::MAX_DENSITY_RATIO)));
        }
        let _ = d;
        Ok(field)
    }

    pub fn kernel(&self) -> LabResult<RadialKernel> {
        let k = RadialKernel::from_name(&self.kernel.name).map_err(|e| LabError::Config(e.to_string()))?;
        if k.support_radius().is_none() {
            return Err(LabError::Config("graph assembly needs a compactly supported kernel".into()));
        }
        Ok(k)
    }

    pub fn laplacian(&self) -> LabResult<LaplacianKind> {
        LaplacianKind::from_name(&self.graph.laplacian).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn graph_options(&self) -> GraphOptions {
        GraphOptions { self_loops: self.graph.self_loops, memory_budget: self.graph.memory_budget_bytes }
    }

    pub fn schedule_for(&self, n: usize, d: usize) -> LabResult<Schedule> {
        epsilon_schedule(n, d, self.schedule.c, self.schedule.theta).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            dense_threshold: self.solver.dense_threshold,
            max_matvecs: self.solver.max_matvecs,
            group_rtol: self.solver.group_rtol,
            ..SolverOptions::default()
        }
    }

    pub fn kmeans_options(&self) -> KMeansOptions {
        KMeansOptions {
            restarts: self.kmeans.restarts,
            max_iterations: self.kmeans.max_iterations,
            seed: self.kmeans.seed,
            ..KMeansOptions::default()
        }
    }

    pub fn transport_options(&self) -> TransportOptions {
        TransportOptions { max_support: self.tl2.max_support }
    }

    /// Finite-difference resolution for the continuum reference.
    pub fn reference_resolution(&self, d: usize) -> Vec<usize> {
        if !self.reference.resolution.is_empty() {
            return self.reference.resolution.clone();
        }
        match d {
            1 => vec![256],
            2 => vec![128, 128],
            _ => vec![48; d],
        }
    }

    /// Grid for continuum clusters; kept small enough for exact transport.
    pub fn cluster_resolution(&self, d: usize) -> Vec<usize> {
        if !self.reference.cluster_resolution.is_empty() {
            return self.reference.cluster_resolution.clone();
        }
        match d {
            1 => vec![1000],
            2 => vec![40, 40],
            _ => vec![12; d],
        }
    }

    pub fn trial_seed(&self, seed: u64) -> u64 {
        specclust_core::geometry::trial_seed(self.seed, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_dotted_keys() {
        let cfg = ExperimentConfig::from_toml(
            "schema_version = 1\nschedule.theta = 0.8\n[sweep]\nn = [100, 200]\nseeds = [3]\n",
        )
        .unwrap();
        assert_eq!(cfg.schedule.theta, 0.8);
        assert_eq!(cfg.schedule.c, 1.0);
        assert_eq!(cfg.sweep.n, vec![100, 200]);
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_bad_documents() {
        for text in [
            "schema_version = 2",
            "schema_version = 1\n[sweep]\nn = [200, 100]",
            "schema_version = 1\n[density]\nkind = \"affine\"",
            "schema_version = 1\n[kernel]\nname = \"cosine\"",
            "schema_version = 1\nunknown = 3",
            "schema_version = 1\n[schedule]\nc = -1.0",
            "[sweep]\nn = [10]",
        ] {
            assert!(matches!(ExperimentConfig::from_toml(text), Err(LabError::Config(_))), "{text}");
        }
        let sub = ExperimentConfig::from_toml("schema_version = 1\n[schedule]\ntheta = 1.0").unwrap();
        assert!(sub.require_admissible().is_err());
    }
}
