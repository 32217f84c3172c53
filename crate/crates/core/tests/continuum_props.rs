use specclust_core::continuum::{
    analytic_neumann_box, assemble_fd, continuum_spectral_clustering, courant_fischer_check, fd_weighted_eigs,
    nonlocal_energy, ContinuumKind,
};
use specclust_core::eigen::SolverOptions;
use specclust_core::geometry::{grid_discretize, DensityField, DensityKind, Domain};
use specclust_core::kernel::RadialKernel;
use specclust_core::kmeans::KMeansOptions;

const PI2: f64 = std::f64::consts::PI * std::f64::consts::PI;

fn uniform(d: usize) -> DensityField {
    DensityField::uniform(Domain::unit(d).unwrap())
}

fn bumps() -> DensityField {
    DensityField::new(
        DensityKind::GaussianBumps { centers: vec![vec![0.25, 0.25], vec![0.75, 0.75]], width: 0.1, floor: 0.05 },
        Domain::unit(2).unwrap(),
    )
    .unwrap()
}

#[test]
fn rectangle_spectrum_matches_fd() {
    let rho = DensityField::uniform(Domain::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap());
    let exact = analytic_neumann_box(&rho, ContinuumKind::L, 5).unwrap();
    // L = rho pi² |m/l|² with rho = 1/2
    let want = [0.0, PI2 / 8.0, PI2 / 2.0, PI2 / 2.0 + PI2 / 8.0, PI2 / 2.0];
    let mut sorted = want;
    sorted.sort_by(f64::total_cmp);
    for (a, b) in exact.values().iter().zip(sorted) {
        assert!((a - b).abs() < 1e-12);
    }
    let fd = fd_weighted_eigs(&rho, ContinuumKind::L, &[64, 32], 5, &SolverOptions::default()).unwrap();
    for j in 1..5 {
        let rel = (fd.basis.values()[j] - exact.values()[j]).abs() / exact.values()[j];
        assert!(rel < 5e-3, "{j}: {rel}");
    }
}

#[test]
fn richardson_ratio_in_one_dimension() {
    let err = |r: usize| {
        let fd = fd_weighted_eigs(&uniform(1), ContinuumKind::L, &[r], 3, &SolverOptions::default()).unwrap();
        (fd.basis.values()[1] - PI2).abs()
    };
    let (a, b, c) = (err(32), err(64), err(128));
    for ratio in [a / b, b / c] {
        assert!((3.0..=5.0).contains(&ratio), "{ratio}");
    }
}

#[test]
fn constant_density_systems_coincide() {
    let rho = DensityField::uniform(Domain::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap());
    let l = assemble_fd(&rho, ContinuumKind::L, &[16, 16]).unwrap();
    let rw = assemble_fd(&rho, ContinuumKind::Nrw, &[16, 16]).unwrap();
    let sym = assemble_fd(&rho, ContinuumKind::Nsym, &[16, 16]).unwrap();
    let opts = SolverOptions::default();
    let a = fd_weighted_eigs(&rho, ContinuumKind::L, &[16, 16], 6, &opts).unwrap();
    let b = fd_weighted_eigs(&rho, ContinuumKind::Nrw, &[16, 16], 6, &opts).unwrap();
    let c = fd_weighted_eigs(&rho, ContinuumKind::Nsym, &[16, 16], 6, &opts).unwrap();
    let r = l.rho[0];
    for j in 0..6 {
        assert!((a.basis.values()[j] - r * b.basis.values()[j]).abs() < 1e-10);
        assert!((b.basis.values()[j] - c.basis.values()[j]).abs() < 1e-10);
    }
    assert_eq!(l.stiffness.to_dense(), rw.stiffness.to_dense());
    assert_eq!(l.mass.len(), sym.mass.len());
}

#[test]
fn varying_density_sym_rw_and_orthonormality() {
    let rho = bumps();
    let opts = SolverOptions::default();
    let rw = fd_weighted_eigs(&rho, ContinuumKind::Nrw, &[20, 20], 5, &opts).unwrap();
    let sym = fd_weighted_eigs(&rho, ContinuumKind::Nsym, &[20, 20], 5, &opts).unwrap();
    for j in 0..5 {
        assert!((rw.basis.values()[j] - sym.basis.values()[j]).abs() < 1e-8 * rw.basis.values()[4]);
    }
    let g = rw.basis.gram();
    for i in 0..5 {
        for j in 0..5 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g[i * 5 + j] - want).abs() < 1e-8);
        }
    }
}

#[test]
fn courant_fischer_on_square() {
    let opts = SolverOptions::default();
    let fd = fd_weighted_eigs(&bumps(), ContinuumKind::L, &[16, 16], 4, &opts).unwrap();
    for k in 1..=4 {
        let report = courant_fischer_check(&fd.system, &fd.basis, k, 10, 9 + k as u64, &opts).unwrap();
        assert!(report.passes(1e-8), "{report:?}");
    }
}

#[test]
fn nonlocal_energy_approaches_local_limit() {
    let grid = grid_discretize(&uniform(1), &[2000]).unwrap();
    let u: Vec<f64> = (0..grid.len()).map(|c| grid.cell_center(c)[0]).collect();
    let mut prev = f64::INFINITY;
    for eps in [0.2, 0.1, 0.05] {
        let g = nonlocal_energy(&grid, &u, &RadialKernel::Indicator, eps).unwrap();
        assert!((g - (2.0 / 3.0 - eps / 2.0)).abs() < 5e-3, "{eps}: {g}");
        let gap = (g - 2.0 / 3.0).abs();
        assert!(gap < prev);
        prev = gap;
    }
    let constant = vec![1.0; grid.len()];
    assert_eq!(nonlocal_energy(&grid, &constant, &RadialKernel::Indicator, 0.1).unwrap(), 0.0);
    assert!(nonlocal_energy(&grid, &u, &RadialKernel::Indicator, 1e-4).is_err());
}

#[test]
fn two_blob_clustering_splits_the_blobs() {
    let rho = bumps();
    let fd = fd_weighted_eigs(&rho, ContinuumKind::L, &[32, 32], 2, &SolverOptions::default()).unwrap();
    let grid = &fd.system.grid;
    let c = continuum_spectral_clustering(grid, fd.basis.vectors(), 2, false, &KMeansOptions::default()).unwrap();
    let a = c.labels[grid.locate(&[0.25, 0.25])].unwrap();
    let b = c.labels[grid.locate(&[0.75, 0.75])].unwrap();
    assert_ne!(a, b);
    // by symmetry about the anti-diagonal each cluster carries half the mass
    for m in c.masses() {
        assert!((m - 0.5).abs() < 0.05, "{m}");
    }
    let one = continuum_spectral_clustering(grid, fd.basis.vectors(), 1, true, &KMeansOptions::default()).unwrap();
    assert!((one.masses()[0] + one.excluded_mass - 1.0).abs() < 1e-12);
    let sym = fd_weighted_eigs(&rho, ContinuumKind::Nsym, &[32, 32], 2, &SolverOptions::default()).unwrap();
    let cn = continuum_spectral_clustering(grid, sym.basis.vectors(), 2, true, &KMeansOptions::default()).unwrap();
    assert!(!cn.warning);
    assert_ne!(cn.labels[grid.locate(&[0.25, 0.25])], cn.labels[grid.locate(&[0.75, 0.75])]);
}
