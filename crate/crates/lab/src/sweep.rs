//! Monte-Carlo experiments: convergence sweeps, connectivity frequencies and
//! matching displacements. Trials run in parallel and are fully independent;
//! results are sorted by `(n, seed)` before anything is written.

use std::time::Instant;

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use specclust_core::continuum::{
    analytic_neumann_box, continuum_spectral_clustering, fd_weighted_eigs, AnalyticNeumann, ContinuumClustering,
    ContinuumKind, FdEigen,
};
use specclust_core::eigen::{self, EigenBasis, EigenGroup, SolverOptions};
use specclust_core::geometry::{empirical_measure, grid_discretize, sample, DensityField, GridMeasure, PointCloud};
use specclust_core::graph::{build_graph_with, laplacian, LaplacianKind, WeightedGraph};
use specclust_core::kernel::{KernelConstants, RadialKernel};
use specclust_core::kmeans::KMeansOptions;
use specclust_core::measure::WeightedPointSet;
use specclust_core::pipeline::{cluster_embedding, critical_rate, epsilon_schedule};
use specclust_core::transport::{
    hungarian, infinity_matching, matching_resolution, tl2_distance_with, tl2_via_map, wasserstein2_with,
    TransportOptions,
};
use specclust_core::{math, Error};

use crate::config::{ExperimentConfig, Tl2Method};
use crate::error::{LabError, LabResult};

/// One row of `sweep.csv`: eigenpair `k_index` (1-based) of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub n: usize,
    pub seed: u64,
    pub eps: f64,
    pub kind: String,
    pub k_index: usize,
    pub eigenvalue: f64,
    pub rescaled: f64,
    pub reference: f64,
    pub rel_error: Option<f64>,
    /// TL² distance of the eigenvalue group containing `k_index`.
    pub subspace_tl2: Option<f64>,
    pub cluster_w2_total: Option<f64>,
    pub components: usize,
    pub wall_ms: u64,
}

/// Per-trial diagnostics, one row of `trials.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub n: usize,
    pub seed: u64,
    pub eps: f64,
    pub components: usize,
    pub tl2_method: String,
    pub sup_displacement: Option<f64>,
    /// `‖P_n v - P v‖` for `v(x) = |x - c|²` over the complete eigenvalue groups.
    pub projection_error: Option<f64>,
    pub excluded_rows: usize,
    pub cluster_w2_total: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub n: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct Trial {
    pub records: Vec<SweepRecord>,
    pub summary: TrialSummary,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub trials: Vec<TrialSummary>,
    pub failures: Vec<TrialFailure>,
    pub targets: Vec<f64>,
    pub cluster_nonunique: bool,
}

enum Source {
    Analytic(AnalyticNeumann),
    Fd(FdEigen),
}

/// Continuum eigenpairs, analytic for constant densities and finite
/// differences otherwise. Functions are scaled to unit norm in `L²(nu)`.
pub struct Reference {
    pub kind: ContinuumKind,
    pub values: Vec<f64>,
    /// Groups lying entirely within the first `values.len()` indices.
    pub groups: Vec<EigenGroup>,
    /// Indices whose group is cut by the truncation.
    pub incomplete_from: usize,
    source: Source,
    scale: Vec<f64>,
}

impl Reference {
    pub fn new(
        density: &DensityField,
        kind: ContinuumKind,
        m: usize,
        resolution: &[usize],
        solver: &SolverOptions,
    ) -> LabResult<Self> {
        // one extra pair tells whether the last group is cut
        let (source, all, groups) = if density.is_constant() {
            let a = analytic_neumann_box(density, kind, m + 1)?;
            let (v, g) = (a.values().to_vec(), a.spectrum().groups().to_vec());
            (Source::Analytic(a), v, g)
        } else {
            let fd = fd_weighted_eigs(density, kind, resolution, m + 1, solver)?;
            let (v, g) = (fd.basis.values().to_vec(), fd.basis.spectrum().groups().to_vec());
            (Source::Fd(fd), v, g)
        };
        let mut all = all;
        // constants span the kernel on a box; fd leaves round-off there
        if all[0].abs() <= 1e-6 * all[m].abs() {
            all[0] = 0.0;
        }
        let complete: Vec<EigenGroup> = groups.into_iter().filter(|g| g.start + g.len <= m).collect();
        let incomplete_from = complete.last().map_or(0, |g| g.start + g.len);
        let scale = match &source {
            Source::Analytic(_) => vec![1.0; m],
            Source::Fd(fd) => {
                let w = fd.system.grid.weights();
                (0..m).map(|j| math::sqrt(math::wdot(w, fd.basis.vector(j), fd.basis.vector(j)))).collect()
            }
        };
        Ok(Self { kind, values: all[..m].to_vec(), groups: complete, incomplete_from, source, scale })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self.source, Source::Analytic(_))
    }

    pub fn eval(&self, j: usize, x: &[f64]) -> f64 {
        match &self.source {
            Source::Analytic(a) => a.eval(j, x),
            Source::Fd(fd) => fd.basis.vector(j)[fd.system.grid.locate(x)] / self.scale[j],
        }
    }

    pub fn restrict(&self, j: usize, points: &[f64], dim: usize) -> Vec<f64> {
        points.chunks(dim).map(|x| self.eval(j, x)).collect()
    }

    pub fn on_grid(&self, j: usize, grid: &GridMeasure) -> Vec<f64> {
        (0..grid.len()).map(|c| self.eval(j, &grid.cell_center(c))).collect()
    }

    /// Grid on which the reference is resolved (fd grid, or `fallback`).
    fn native_grid(&self, density: &DensityField, fallback: &[usize]) -> LabResult<GridMeasure> {
        Ok(match &self.source {
            Source::Fd(fd) => fd.system.grid.clone(),
            Source::Analytic(_) => grid_discretize(density, fallback)?,
        })
    }
}

/// Continuum clusterings found from several k-means seeds. More than one
/// distinct optimal partition flags non-uniqueness; trials then report the
/// distance to the nearest one.
pub struct ContinuumClusters {
    pub candidates: Vec<ContinuumClustering>,
    pub nonunique: bool,
}

const CLUSTER_SEEDS: u64 = 5;
const CLUSTER_RTOL: f64 = 1e-6;

fn canonical(labels: &[Option<usize>]) -> Vec<Option<usize>> {
    let mut map: Vec<Option<usize>> = Vec::new();
    let mut next = 0;
    labels
        .iter()
        .map(|l| {
            l.map(|l| {
                if map.len() <= l {
                    map.resize(l + 1, None);
                }
                *map[l].get_or_insert_with(|| {
                    next += 1;
                    next - 1
                })
            })
        })
        .collect()
}

impl ContinuumClusters {
    pub fn new(
        reference: &Reference,
        grid: &GridMeasure,
        k: usize,
        normalize_rows: bool,
        options: &KMeansOptions,
    ) -> LabResult<Self> {
        let funcs: Vec<Vec<f64>> = (0..k).map(|j| reference.on_grid(j, grid)).collect();
        let mut found = Vec::new();
        for s in 0..CLUSTER_SEEDS {
            let opts = KMeansOptions { seed: options.seed.wrapping_add(s), ..*options };
            found.push(continuum_spectral_clustering(grid, &funcs, k, normalize_rows, &opts)?);
        }
        let best = found.iter().map(|c| c.objective).fold(f64::INFINITY, f64::min);
        let mut candidates: Vec<ContinuumClustering> = Vec::new();
        let mut seen: Vec<Vec<Option<usize>>> = Vec::new();
        for c in found {
            if c.objective > best * (1.0 + CLUSTER_RTOL) + 1e-15 {
                continue;
            }
            let key = canonical(&c.labels);
            if !seen.contains(&key) {
                seen.push(key);
                candidates.push(c);
            }
        }
        let nonunique = candidates.len() > 1;
        if nonunique {
            warn!("continuum clustering is not unique: {} distinct optimal partitions", candidates.len());
        }
        Ok(Self { candidates, nonunique })
    }
}

/// Everything shared by the trials of one sweep.
pub struct SweepContext {
    pub config: ExperimentConfig,
    pub density: DensityField,
    pub kernel: RadialKernel,
    pub kind: LaplacianKind,
    pub constants: KernelConstants,
    pub reference: Reference,
    /// `sigma * lambda_j` or `(sigma / beta) * lambda_j`.
    pub targets: Vec<f64>,
    pub tl2_exact: bool,
    tl2_grid: Option<(GridMeasure, Vec<Vec<f64>>)>,
    projection: Projection,
    pub clusters: Option<ContinuumClusters>,
}

/// Continuum projection of `v(x) = |x - c|²` onto the complete groups.
struct Projection {
    center: Vec<f64>,
    indices: Vec<usize>,
    coeffs: Vec<f64>,
}

fn test_function(center: &[f64], x: &[f64]) -> f64 {
    math::dist2(center, x)
}

impl SweepContext {
    pub fn new(config: &ExperimentConfig) -> LabResult<Self> {
        config.validate()?;
        let density = config.density_field()?;
        let d = density.domain().dim();
        let kernel = config.kernel()?;
        let kind = config.laplacian()?;
        let constants = KernelConstants::compute(&kernel, d)?;
        let solver = config.solver_options();
        let m = config.sweep.eigenpairs;
        let res = config.reference_resolution(d);
        let reference = Reference::new(&density, ContinuumKind::from_laplacian(kind), m, &res, &solver)?;
        let factor = if kind.is_normalized() { constants.sigma / constants.beta } else { constants.sigma };
        let targets = reference.values.iter().map(|v| factor * v).collect();

        let budget = config.tl2.max_support;
        let default_grid = match d {
            1 => vec![1000],
            2 => vec![40, 40],
            _ => vec![12; d],
        };
        let exact_grid = if config.tl2.grid.is_empty() { default_grid } else { config.tl2.grid.clone() };
        let fits = exact_grid.iter().product::<usize>() <= budget && config.sweep.n.iter().all(|&n| n <= budget);
        let tl2_exact = match config.tl2.method {
            Tl2Method::Exact if !fits => {
                return Err(LabError::Config(format!("tl2.method = exact needs n and grid cells <= {budget}")))
            }
            Tl2Method::Exact => true,
            Tl2Method::Map | Tl2Method::Off => false,
            Tl2Method::Auto => fits,
        };
        let tl2_grid = if tl2_exact {
            let grid = grid_discretize(&density, &exact_grid)?;
            let values = (0..m).map(|j| reference.on_grid(j, &grid)).collect();
            Some((grid, values))
        } else {
            None
        };

        let native = reference.native_grid(&density, &res)?;
        let center: Vec<f64> =
            (0..d).map(|i| 0.5 * (density.domain().lower()[i] + density.domain().upper()[i])).collect();
        let indices: Vec<usize> = (0..reference.incomplete_from).collect();
        let coeffs = indices
            .iter()
            .map(|&j| {
                (0..native.len())
                    .map(|c| {
                        let x = native.cell_center(c);
                        native.weights()[c] * test_function(&center, &x) * reference.eval(j, &x)
                    })
                    .sum()
            })
            .collect();
        let projection = Projection { center, indices, coeffs };

        let k = config.sweep.clusters;
        let clusters = if k > 0 {
            let grid = grid_discretize(&density, &config.cluster_resolution(d))?;
            let normalize = kind == LaplacianKind::Symmetric;
            Some(ContinuumClusters::new(&reference, &grid, k, normalize, &config.kmeans_options())?)
        } else {
            None
        };
        Ok(Self {
            config: config.clone(),
            density,
            kernel,
            kind,
            constants,
            reference,
            targets,
            tl2_exact,
            tl2_grid,
            projection,
            clusters,
        })
    }

    pub fn dim(&self) -> usize {
        self.density.domain().dim()
    }
}

/// Eigenpairs of the requested Laplacian with weights `1/n`; random-walk
/// vectors come from the symmetric ones.
pub fn discrete_basis(graph: &WeightedGraph, kind: LaplacianKind, m: usize, solver: &SolverOptions) -> LabResult<EigenBasis> {
    let n = graph.n();
    let w = vec![1.0 / n as f64; n];
    Ok(match kind {
        LaplacianKind::Unnormalized => eigen::smallest_k_with(&laplacian(graph, kind)?, m, &w, solver)?,
        LaplacianKind::Symmetric => eigen::smallest_k_with(&laplacian(graph, kind)?, m, &w, solver)?,
        LaplacianKind::RandomWalk => {
            let sym = eigen::smallest_k_with(&laplacian(graph, LaplacianKind::Symmetric)?, m, &w, solver)?;
            eigen::rw_from_sym(&sym, graph.degrees())?
        }
    })
}

fn interleave(columns: &[&[f64]]) -> Vec<f64> {
    let len = columns.first().map_or(0, |c| c.len());
    let mut out = Vec::with_capacity(len * columns.len());
    for i in 0..len {
        out.extend(columns.iter().map(|c| c[i]));
    }
    out
}

/// Mass-on-grid version of a point measure: atoms binned into grid cells.
fn bin_onto(measure: &WeightedPointSet, grid: &GridMeasure) -> WeightedPointSet {
    let mut mass = vec![0.0; grid.len()];
    for i in 0..measure.len() {
        mass[grid.locate(measure.point(i))] += measure.weights()[i];
    }
    let cells: Vec<usize> = (0..grid.len()).filter(|&c| mass[c] > 0.0).collect();
    let points = cells.iter().flat_map(|&c| grid.cell_center(c)).collect();
    WeightedPointSet::raw(grid.domain().dim(), points, cells.iter().map(|&c| mass[c]).collect())
}

/// `W_2` between the normalized restrictions plus the mass difference; an
/// empty side costs the domain diameter.
pub fn cluster_distance(
    a: &WeightedPointSet,
    b: &WeightedPointSet,
    grid: &GridMeasure,
    options: &TransportOptions,
) -> LabResult<f64> {
    let (ma, mb) = (a.total_mass(), b.total_mass());
    if a.is_empty() || b.is_empty() {
        return Ok(grid.domain().diameter() + (ma - mb).abs());
    }
    let fit = |m: &WeightedPointSet| if m.len() > options.max_support { bin_onto(m, grid) } else { m.clone() };
    let (a, b) = (fit(a).normalized()?, fit(b).normalized()?);
    let (d2, _) = wasserstein2_with(&a, &b, options)?;
    Ok(d2 + (ma - mb).abs())
}

/// Matched total over the `k x k` cluster distance matrix.
pub fn matched_cluster_total(
    discrete: &[WeightedPointSet],
    continuum: &ContinuumClustering,
    options: &TransportOptions,
) -> LabResult<(f64, Vec<usize>)> {
    let k = discrete.len();
    if continuum.k() != k {
        return Err(LabError::Core(Error::InvalidArgument("cluster counts differ".into())));
    }
    let targets: Vec<WeightedPointSet> = (0..k).map(|b| continuum.restricted(b)).collect();
    let mut cost = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            cost[a * k + b] = cluster_distance(&discrete[a], &targets[b], &continuum.grid, options)?;
        }
    }
    let (perm, total) = hungarian(k, &cost)?;
    Ok((total, perm))
}

fn discrete_clusters(cloud: &PointCloud, labels: &[Option<usize>], k: usize) -> Vec<WeightedPointSet> {
    let n = cloud.len() as f64;
    (0..k)
        .map(|a| {
            let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Some(a)).collect();
            let points = idx.iter().flat_map(|&i| cloud.point(i).iter().copied()).collect();
            WeightedPointSet::raw(cloud.dim(), points, vec![1.0 / n; idx.len()])
        })
        .collect()
}

pub fn run_trial(ctx: &SweepContext, n: usize, seed: u64) -> LabResult<Trial> {
    let start = Instant::now();
    let cfg = &ctx.config;
    let d = ctx.dim();
    let m = cfg.sweep.eigenpairs;
    let cloud = sample(&ctx.density, n, cfg.trial_seed(seed))?;
    let eps = cfg.schedule_for(n, d)?.eps;
    let graph = build_graph_with(&cloud, &ctx.kernel, eps, cfg.graph_options())?;
    let (components, _) = graph.connected_components();
    let basis = discrete_basis(&graph, ctx.kind, m, &cfg.solver_options())?;
    let w = vec![1.0 / n as f64; n];
    let measure = empirical_measure(&cloud);
    let topts = cfg.transport_options();

    // eigenvector comparison, one value per complete continuum group
    let mut group_tl2: Vec<Option<f64>> = vec![None; m];
    let mut sup_displacement = None;
    let skip = ctx.config.tl2.method == Tl2Method::Off;
    let map = if ctx.tl2_exact || skip {
        None
    } else {
        let grid = grid_discretize(&ctx.density, &matching_resolution(n, d))?;
        let map = infinity_matching(&grid, &measure)?;
        sup_displacement = Some(map.sup_displacement);
        Some((grid, map))
    };
    for g in ctx.reference.groups.iter().filter(|_| !skip) {
        let refs: Vec<Vec<f64>> = g.range().map(|j| ctx.reference.restrict(j, cloud.coords(), d)).collect();
        let aligned = eigen::procrustes_align(&basis.vectors()[g.range()], &refs, &w)?;
        let gv = interleave(&aligned.iter().map(|v| v.as_slice()).collect::<Vec<_>>());
        let value = match (&ctx.tl2_grid, &map) {
            (Some((grid, values)), _) => {
                let f = interleave(&g.range().map(|j| values[j].as_slice()).collect::<Vec<_>>());
                tl2_distance_with(&grid.as_point_set(), &f, &measure, &gv, &topts)?.0
            }
            (None, Some((grid, map))) => {
                let cols: Vec<Vec<f64>> = g.range().map(|j| ctx.reference.on_grid(j, grid)).collect();
                let f = interleave(&cols.iter().map(|v| v.as_slice()).collect::<Vec<_>>());
                tl2_via_map(map, &f, &gv, &measure)?
            }
            (None, None) => unreachable!("either an exact grid or a map is present"),
        };
        for j in g.range() {
            group_tl2[j] = Some(value);
        }
    }

    let proj = &ctx.projection;
    let projection_error = if proj.indices.is_empty() {
        None
    } else {
        let v: Vec<f64> = (0..n).map(|i| test_function(&proj.center, cloud.point(i))).collect();
        let vecs: Vec<Vec<f64>> = proj.indices.iter().map(|&j| basis.vector(j).to_vec()).collect();
        let discrete = eigen::spectral_projection(&vecs, &v, &w);
        let err: f64 = (0..n)
            .map(|i| {
                let x = cloud.point(i);
                let cont: f64 = proj.indices.iter().zip(&proj.coeffs).map(|(&j, c)| c * ctx.reference.eval(j, x)).sum();
                (discrete[i] - cont).powi(2) / n as f64
            })
            .sum();
        Some(err.sqrt())
    };

    let mut cluster_w2_total = None;
    let mut excluded_rows = 0;
    if let Some(cc) = &ctx.clusters {
        let k = cfg.sweep.clusters;
        let emb = cluster_embedding(&basis.vectors()[..k], k, ctx.kind == LaplacianKind::Symmetric, &cfg.kmeans_options())?;
        excluded_rows = emb.excluded;
        let parts = discrete_clusters(&cloud, &emb.labels, k);
        let mut best = f64::INFINITY;
        for cand in &cc.candidates {
            best = best.min(matched_cluster_total(&parts, cand, &topts)?.0);
        }
        cluster_w2_total = Some(best);
    }

    let wall_ms = if cfg.sweep.record_timing { start.elapsed().as_millis() as u64 } else { 0 };
    let records = (0..m)
        .map(|j| {
            // the kernel of L on a graph with c components is exactly c-dimensional
            let eigenvalue = if j < components { 0.0 } else { basis.values()[j] };
            let rescaled = eigen::rescale(eigenvalue, n, eps, ctx.kind);
            let reference = ctx.targets[j];
            let rel_error = (reference.abs() > 1e-12 * ctx.targets[m - 1].abs().max(1.0))
                .then(|| (rescaled - reference).abs() / reference.abs());
            SweepRecord {
                n,
                seed,
                eps,
                kind: ctx.kind.name().to_string(),
                k_index: j + 1,
                eigenvalue,
                rescaled,
                reference,
                rel_error,
                subspace_tl2: group_tl2[j],
                cluster_w2_total,
                components,
                wall_ms,
            }
        })
        .collect();
    let summary = TrialSummary {
        n,
        seed,
        eps,
        components,
        tl2_method: match (skip, ctx.tl2_exact) {
            (true, _) => "off",
            (false, true) => "exact",
            (false, false) => "map",
        }
        .to_string(),
        sup_displacement,
        projection_error,
        excluded_rows,
        cluster_w2_total,
    };
    debug!("trial n={n} seed={seed} eps={eps:.4} components={components}");
    Ok(Trial { records, summary })
}

fn trial_pairs(cfg: &ExperimentConfig) -> Vec<(usize, u64)> {
    cfg.sweep.n.iter().flat_map(|&n| cfg.sweep.seeds.iter().map(move |&s| (n, s))).collect()
}

pub fn convergence_sweep(config: &ExperimentConfig) -> LabResult<SweepOutput> {
    config.require_admissible()?;
    let ctx = SweepContext::new(config)?;
    info!(
        "sweep: {} trials, kind {}, targets {:?}, tl2 {}",
        trial_pairs(config).len(),
        ctx.kind.name(),
        ctx.targets,
        if ctx.tl2_exact { "exact" } else { "map" }
    );
    let results: Vec<((usize, u64), LabResult<Trial>)> =
        trial_pairs(config).into_par_iter().map(|(n, s)| ((n, s), run_trial(&ctx, n, s))).collect();
    let mut records = Vec::new();
    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for ((n, seed), r) in results {
        match r {
            Ok(t) => {
                records.extend(t.records);
                trials.push(t.summary);
            }
            Err(e) => {
                warn!("trial n={n} seed={seed} failed: {e}");
                failures.push(TrialFailure { n, seed, error: e.to_string() });
            }
        }
    }
    records.sort_by_key(|r| (r.n, r.seed, r.k_index));
    trials.sort_by_key(|t| (t.n, t.seed));
    failures.sort_by_key(|f| (f.n, f.seed));
    Ok(SweepOutput {
        records,
        trials,
        failures,
        targets: ctx.targets.clone(),
        cluster_nonunique: ctx.clusters.as_ref().is_some_and(|c| c.nonunique),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityRow {
    pub n: usize,
    pub c: f64,
    pub theta: f64,
    pub eps: f64,
    pub admissible: bool,
    pub trials: usize,
    pub disconnected: usize,
    pub frequency: f64,
    pub mean_components: f64,
}

/// Fraction of seeds whose graph has two or more components, for every
/// `(n, c, theta)` combination. Sub-critical schedules are allowed here.
pub fn connectivity_experiment(config: &ExperimentConfig) -> LabResult<Vec<ConnectivityRow>> {
    config.validate()?;
    let density = config.density_field()?;
    let kernel = config.kernel()?;
    let d = density.domain().dim();
    let mut jobs = Vec::new();
    for &theta in &config.connectivity.theta {
        for &c in &config.connectivity.c {
            for &n in &config.sweep.n {
                jobs.push((theta, c, n));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(theta, c, n)| {
            let s = epsilon_schedule(n, d, c, theta)?;
            let mut disconnected = 0;
            let mut total_components = 0;
            for &seed in &config.sweep.seeds {
                let cloud = sample(&density, n, config.trial_seed(seed))?;
                let graph = build_graph_with(&cloud, &kernel, s.eps, config.graph_options())?;
                let (count, _) = graph.connected_components();
                total_components += count;
                disconnected += usize::from(count >= 2);
            }
            let trials = config.sweep.seeds.len();
            Ok(ConnectivityRow {
                n,
                c,
                theta,
                eps: s.eps,
                admissible: s.admissible,
                trials,
                disconnected,
                frequency: disconnected as f64 / trials as f64,
                mean_components: total_components as f64 / trials as f64,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingRow {
    pub n: usize,
    pub seed: u64,
    pub sup_displacement: f64,
    pub rate: f64,
    /// `sup_displacement / rate`.
    pub rescaled: f64,
}

/// Bottleneck matching between the sample and a quantized grid of `n`
/// atoms, reported against the critical rate.
pub fn matching_experiment(config: &ExperimentConfig) -> LabResult<Vec<MatchingRow>> {
    config.validate()?;
    let density = config.density_field()?;
    let d = density.domain().dim();
    trial_pairs(config)
        .into_par_iter()
        .map(|(n, seed)| {
            let cloud = sample(&density, n, config.trial_seed(seed))?;
            let grid = grid_discretize(&density, &matching_resolution(n, d))?;
            let map = infinity_matching(&grid, &empirical_measure(&cloud))?;
            let rate = critical_rate(n, d)?;
            Ok(MatchingRow { n, seed, sup_displacement: map.sup_displacement, rate, rescaled: map.sup_displacement / rate })
        })
        .collect()
}
