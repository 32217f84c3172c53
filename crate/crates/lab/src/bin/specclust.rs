use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use serde::Serialize;
use specclust::config::ExperimentConfig;
use specclust::error::{LabError, LabResult};
use specclust::io::{self, EigenHeader};
use specclust::report;
use specclust::sweep::{self, Reference, SweepContext};
use specclust_core::continuum::ContinuumKind;
use specclust_core::eigen;
use specclust_core::geometry::{grid_discretize, sample, PointCloud};
use specclust_core::graph::{build_graph_with, LaplacianKind};
use specclust_core::kernel::KernelConstants;
use specclust_core::pipeline::cluster_embedding;

#[derive(Parser)]
#[command(name = "specclust", version, about = "Graph spectral clustering consistency experiments")]
struct Cli {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed (overrides seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel trials.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw n points from the configured density.
    Sample {
        #[arg(long)]
        n: usize,
    },
    /// Build the eps-graph and write its edge list.
    Graph(TrialArgs),
    /// Smallest eigenpairs of the configured Laplacian.
    Eigen(TrialArgs),
    /// Spectral clustering of one sample.
    Cluster(TrialArgs),
    /// Per-group TL² distance between discrete and continuum eigenvectors.
    Tl2 {
        #[arg(long)]
        n: usize,
    },
    /// Convergence sweep over sweep.n x sweep.seeds.
    Sweep,
    /// Disconnection frequencies over connectivity.c x connectivity.theta.
    Connectivity,
    /// Continuum reference eigenpairs and clusters.
    Continuum,
    /// Bottleneck matching displacement against the critical rate.
    Matching,
    /// Print a config with every default filled in.
    Config,
}

#[derive(clap::Args)]
struct TrialArgs {
    #[arg(long, required_unless_present = "input")]
    n: Option<usize>,
    /// Read the cloud from a CSV instead of sampling.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Length scale; defaults to the configured schedule.
    #[arg(long)]
    eps: Option<f64>,
}

fn load(cli: &Cli) -> LabResult<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::example(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    Ok(cfg)
}

fn cloud_for(cfg: &ExperimentConfig, args: &TrialArgs) -> LabResult<(PointCloud, f64)> {
    let cloud = match (&args.input, args.n) {
        (Some(p), _) => io::read_cloud(p)?,
        (None, Some(n)) => sample(&cfg.density_field()?, n, cfg.trial_seed(0))?,
        (None, None) => return Err(LabError::Config("either --n or --input is required".into())),
    };
    let eps = match args.eps {
        Some(e) => e,
        None => cfg.schedule_for(cloud.len(), cloud.dim())?.eps,
    };
    Ok((cloud, eps))
}

fn print_json<T: Serialize>(value: &T) -> LabResult<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn written(paths: &[&Path]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: &Cli) -> LabResult<()> {
    let cfg = load(cli)?;
    let dir = cfg.output.dir.clone();
    match &cli.command {
        Command::Config => print!("{}", cfg.to_toml()),
        Command::Sample { n } => {
            let cloud = sample(&cfg.density_field()?, *n, cfg.trial_seed(0))?;
            let path = dir.join("cloud.csv");
            io::write_cloud(&path, &cloud)?;
            written(&[&path]);
        }
        Command::Graph(args) => {
            let (cloud, eps) = cloud_for(&cfg, args)?;
            let graph = build_graph_with(&cloud, &cfg.kernel()?, eps, cfg.graph_options())?;
            let (components, _) = graph.connected_components();
            let path = dir.join("graph.txt");
            io::write_graph(&path, &graph)?;
            println!("n = {}, eps = {eps}, edges = {}, components = {components}", graph.n(), graph.triplets().count());
            written(&[&path]);
        }
        Command::Eigen(args) => {
            let (cloud, eps) = cloud_for(&cfg, args)?;
            let kind = cfg.laplacian()?;
            let graph = build_graph_with(&cloud, &cfg.kernel()?, eps, cfg.graph_options())?;
            let basis = sweep::discrete_basis(&graph, kind, cfg.sweep.eigenpairs, &cfg.solver_options())?;
            let n = graph.n();
            let header = EigenHeader {
                n,
                eps,
                kind: kind.name().into(),
                values: basis.values().to_vec(),
                rescaled: basis.values().iter().map(|&v| eigen::rescale(v, n, eps, kind)).collect(),
                residuals: basis.residuals().to_vec(),
            };
            let path = dir.join("eigenpairs.csv");
            io::write_eigenpairs(&path, &header, basis.vectors())?;
            print_json(&header.rescaled)?;
            written(&[&path]);
        }
        Command::Cluster(args) => {
            let (cloud, eps) = cloud_for(&cfg, args)?;
            let kind = cfg.laplacian()?;
            let k = cfg.sweep.clusters.max(1);
            let graph = build_graph_with(&cloud, &cfg.kernel()?, eps, cfg.graph_options())?;
            let basis = sweep::discrete_basis(&graph, kind, cfg.sweep.eigenpairs.max(k), &cfg.solver_options())?;
            let c = cluster_embedding(&basis.vectors()[..k], k, kind == LaplacianKind::Symmetric, &cfg.kmeans_options())?;
            let (a, b) = (dir.join("assignments.csv"), dir.join("centers.json"));
            io::write_assignments(&a, &c.labels)?;
            io::write_centers(&b, &c.centers, c.objective)?;
            println!("k = {k}, objective = {}, excluded rows = {}", c.objective, c.excluded);
            written(&[&a, &b]);
        }
        Command::Tl2 { n } => {
            let mut one = cfg.clone();
            one.sweep.n = vec![*n];
            one.sweep.seeds = vec![0];
            one.sweep.clusters = 0;
            let ctx = SweepContext::new(&one)?;
            let trial = sweep::run_trial(&ctx, *n, 0)?;
            let path = dir.join("tl2.json");
            io::write_json(&path, &(&trial.summary, &trial.records))?;
            for r in &trial.records {
                println!("k = {}: subspace_tl2 = {:?}", r.k_index, r.subspace_tl2);
            }
            written(&[&path]);
        }
        Command::Sweep => {
            let out = sweep::convergence_sweep(&cfg)?;
            let constants = KernelConstants::compute(&cfg.kernel()?, cfg.domain()?.dim())?;
            let paths = report::emit_report(&dir, &cfg, &constants, &out)?;
            if !out.failures.is_empty() {
                eprintln!("{} trial(s) failed; see summary.json", out.failures.len());
            }
            written(&paths.iter().map(|p| p.as_path()).collect::<Vec<_>>());
        }
        Command::Connectivity => {
            let rows = sweep::connectivity_experiment(&cfg)?;
            let path = dir.join("connectivity.csv");
            io::write_rows(&path, &rows)?;
            for r in &rows {
                println!("n = {}, c = {}, theta = {}: disconnected {}/{}", r.n, r.c, r.theta, r.disconnected, r.trials);
            }
            written(&[&path]);
        }
        Command::Matching => {
            let rows = sweep::matching_experiment(&cfg)?;
            let path = dir.join("matching.csv");
            io::write_rows(&path, &rows)?;
            written(&[&path]);
        }
        Command::Continuum => {
            let density = cfg.density_field()?;
            let d = density.domain().dim();
            let kind = cfg.laplacian()?;
            let m = cfg.sweep.eigenpairs;
            let reference = Reference::new(
                &density,
                ContinuumKind::from_laplacian(kind),
                m,
                &cfg.reference_resolution(d),
                &cfg.solver_options(),
            )?;
            let constants = KernelConstants::compute(&cfg.kernel()?, d)?;
            let factor = if kind.is_normalized() { constants.sigma / constants.beta } else { constants.sigma };
            #[derive(Serialize)]
            struct Row {
                index: usize,
                value: f64,
                target: f64,
            }
            let rows: Vec<Row> = reference
                .values
                .iter()
                .enumerate()
                .map(|(j, &v)| Row { index: j + 1, value: v, target: factor * v })
                .collect();
            let grid = grid_discretize(&density, &cfg.cluster_resolution(d))?;
            let funcs: Vec<Vec<f64>> = (0..m).map(|j| reference.on_grid(j, &grid)).collect();
            let (a, b) = (dir.join("continuum.csv"), dir.join("continuum_grid.csv"));
            io::write_rows(&a, &rows)?;
            io::write_grid_values(&b, &grid, &funcs)?;
            let mut paths = vec![a, b];
            if cfg.sweep.clusters > 0 {
                let cc = sweep::ContinuumClusters::new(
                    &reference,
                    &grid,
                    cfg.sweep.clusters,
                    kind == LaplacianKind::Symmetric,
                    &cfg.kmeans_options(),
                )?;
                let path = dir.join("continuum_assignments.csv");
                io::write_assignments(&path, &cc.candidates[0].labels)?;
                println!("cluster masses {:?}, non-unique: {}", cc.candidates[0].masses(), cc.nonunique);
                paths.push(path);
            }
            written(&paths.iter().map(|p| p.as_path()).collect::<Vec<_>>());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => {
            info!("done");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
