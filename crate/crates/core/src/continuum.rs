//! Continuum reference problems: the weighted Neumann operators
//!
//! * `L u    = -(1/rho) div(rho² ∇u)`
//! * `Nrw u  = -(1/rho²) div(rho² ∇u)`
//! * `Nsym u = -(1/rho^{3/2}) div(rho² ∇(u/√rho))`
//!
//! solved in closed form on boxes with constant density and by cell-centered
//! finite differences otherwise, plus the nonlocal energy `G_eps` and the
//! continuum spectral clustering.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eigen::{self, EigenBasis, SolverOptions, Spectrum};
use crate::error::{Error, Result};
use crate::geometry::{grid_discretize, DensityField, Domain, GridMeasure};
use crate::kernel::{scaled_profile, RadialKernel};
use crate::kmeans::{self, CenterSet, KMeansOptions};
use crate::math;
use crate::measure::WeightedPointSet;
use crate::neighbors::CellGrid;
use crate::sparse::{CsrMatrix, LinearOperator};

/// Excluded mass above which the normalized clustering raises its flag.
pub const EXCLUDED_MASS_WARNING: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContinuumKind {
    L,
    Nsym,
    Nrw,
}

impl ContinuumKind {
    pub fn from_laplacian(kind: crate::graph::LaplacianKind) -> Self {
        match kind {
            crate::graph::LaplacianKind::Unnormalized => Self::L,
            crate::graph::LaplacianKind::Symmetric => Self::Nsym,
            crate::graph::LaplacianKind::RandomWalk => Self::Nrw,
        }
    }
}

/// Closed-form Neumann eigenpairs on a box with constant density.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticNeumann {
    domain: Domain,
    rho: f64,
    modes: Vec<Vec<usize>>,
    spectrum: Spectrum,
}

/// The `k` smallest eigenpairs of `kind` on `density`'s box. Modes are the
/// products `prod_i cos(pi m_i (x_i - a_i)/l_i)`; equal eigenvalues are
/// ordered lexicographically by their multi-index.
pub fn analytic_neumann_box(density: &DensityField, kind: ContinuumKind, k: usize) -> Result<AnalyticNeumann> {
    if !density.is_constant() {
        return Err(Error::invalid("closed-form spectra need a constant density; use the finite-difference path"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let domain = density.domain().clone();
    let d = domain.dim();
    let rho = 1.0 / domain.volume();
    let factor = match kind {
        ContinuumKind::L => rho,
        ContinuumKind::Nsym | ContinuumKind::Nrw => 1.0,
    };
    let mut modes: Vec<(f64, Vec<usize>)> = Vec::new();
    let total = (k + 1).pow(d as u32);
    for idx in 0..total {
        let mut rest = idx;
        let mut m = Vec::with_capacity(d);
        for _ in 0..d {
            m.push(rest % (k + 1));
            rest /= k + 1;
        }
        m.reverse();
        let value: f64 = (0..d)
            .map(|i| {
                let q = m[i] as f64 / domain.side(i);
                q * q
            })
            .sum::<f64>()
            * math::PI
            * math::PI
            * factor;
        modes.push((value, m));
    }
    modes.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    modes.truncate(k);
    let values = modes.iter().map(|m| m.0).collect();
    let spectrum = Spectrum::new(values, 1e-10);
    Ok(AnalyticNeumann { domain, rho, modes: modes.into_iter().map(|m| m.1).collect(), spectrum })
}

impl AnalyticNeumann {
    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn values(&self) -> &[f64] {
        self.spectrum.values()
    }

    pub fn mode(&self, j: usize) -> &[usize] {
        &self.modes[j]
    }

    pub fn density_value(&self) -> f64 {
        self.rho
    }

    /// Eigenfunction `j` (0-based) at `x`, unit norm in `L²(nu)`.
    pub fn eval(&self, j: usize, x: &[f64]) -> f64 {
        let lo = self.domain.lower();
        let mut v = 1.0;
        for (i, &m) in self.modes[j].iter().enumerate() {
            if m > 0 {
                v *= math::sqrt(2.0) * math::cos(math::PI * m as f64 * (x[i] - lo[i]) / self.domain.side(i));
            }
        }
        v
    }

    /// Eigenfunction `j` at every row of a row-major point buffer.
    pub fn restrict(&self, j: usize, points: &[f64]) -> Vec<f64> {
        let d = self.domain.dim();
        points.chunks(d).map(|x| self.eval(j, x)).collect()
    }
}

/// Discretized weak form: stiffness `K` (flux weight `rho²`) and diagonal
/// mass, `K u = lambda M u`.
#[derive(Debug, Clone)]
pub struct FdSystem {
    pub kind: ContinuumKind,
    pub grid: GridMeasure,
    pub stiffness: CsrMatrix,
    pub mass: Vec<f64>,
    /// Density at the cell centers.
    pub rho: Vec<f64>,
}

/// Assembles the cell-centered system. Interface coefficients are arithmetic
/// means of `rho²`; Neumann conditions come from mirrored ghost cells, which
/// drop the boundary fluxes.
pub fn assemble_fd(density: &DensityField, kind: ContinuumKind, resolution: &[usize]) -> Result<FdSystem> {
    if resolution.iter().any(|&r| r < 8) {
        return Err(Error::invalid("finite-difference resolution must be at least 8 per axis"));
    }
    let grid = grid_discretize(density, resolution)?;
    let d = grid.domain().dim();
    let n = grid.len();
    let vol = grid.cell_volume();
    let rho: Vec<f64> = (0..n).map(|c| density.eval(&grid.cell_center(c))).collect();
    let mut triplets = Vec::with_capacity(n * (2 * d + 1));
    for c in 0..n {
        let multi = grid.multi_index(c);
        for axis in 0..d {
            if multi[axis] + 1 < resolution[axis] {
                let mut nb = multi.clone();
                nb[axis] += 1;
                let c2 = grid.linear_index(&nb);
                let h = grid.spacing(axis);
                let kappa = 0.5 * (rho[c] * rho[c] + rho[c2] * rho[c2]) * vol / (h * h);
                triplets.push((c, c, kappa));
                triplets.push((c2, c2, kappa));
                triplets.push((c, c2, -kappa));
                triplets.push((c2, c, -kappa));
            }
        }
    }
    let mut stiffness = CsrMatrix::from_triplets(n, &triplets)?;
    let mass = match kind {
        ContinuumKind::L => rho.iter().map(|r| r * vol).collect(),
        ContinuumKind::Nrw => rho.iter().map(|r| r * r * vol).collect(),
        ContinuumKind::Nsym => {
            // w = √rho v turns the rw problem into this one
            let s: Vec<f64> = rho.iter().map(|r| 1.0 / math::sqrt(*r)).collect();
            stiffness = stiffness.scaled(&s, &s);
            rho.iter().map(|r| r * vol).collect()
        }
    };
    Ok(FdSystem { kind, grid, stiffness, mass, rho })
}

/// Finite-difference eigenpairs; the basis is orthonormal under the mass.
#[derive(Debug, Clone)]
pub struct FdEigen {
    pub system: FdSystem,
    pub basis: EigenBasis,
}

pub fn fd_weighted_eigs(
    density: &DensityField,
    kind: ContinuumKind,
    resolution: &[usize],
    k: usize,
    options: &SolverOptions,
) -> Result<FdEigen> {
    let system = assemble_fd(density, kind, resolution)?;
    let basis = eigen::smallest_k_generalized(&system.stiffness, &system.mass, k, options)?;
    Ok(FdEigen { system, basis })
}

/// `G_eps(u) = (1/eps²) sum_{c,c'} eta_eps(x_c - x_c') (u_c - u_c')² w_c w_c'`
/// over grid cells with masses `w` (the grid measure).
pub fn nonlocal_energy(grid: &GridMeasure, u: &[f64], kernel: &RadialKernel, eps: f64) -> Result<f64> {
    if u.len() != grid.len() {
        return Err(Error::invalid("grid function must have one value per cell"));
    }
    let d = grid.domain().dim();
    let h = (0..d).map(|a| grid.spacing(a)).fold(0.0, f64::max);
    if !(eps >= 2.0 * h) {
        return Err(Error::invalid("eps must be at least two grid spacings"));
    }
    let support = kernel
        .support_radius()
        .ok_or_else(|| Error::invalid("nonlocal energy needs a compactly supported kernel"))?;
    let centers = grid.centers();
    let cutoff = eps * support;
    let cg = CellGrid::new(&centers, d, cutoff);
    let w = grid.weights();
    let mut total = 0.0;
    let mut found = Vec::new();
    for c in 0..grid.len() {
        found.clear();
        cg.query(&centers[c * d..(c + 1) * d], cutoff * cutoff, &mut found);
        let mut row = 0.0;
        for &(c2, d2) in &found {
            let diff = u[c] - u[c2];
            row += scaled_profile(kernel, d, eps, math::sqrt(d2)) * diff * diff * w[c2];
        }
        total += row * w[c];
    }
    Ok(total / (eps * eps))
}

/// Continuum clusters on the grid, pulled back from k-means on the
/// spectral embedding.
#[derive(Debug, Clone)]
pub struct ContinuumClustering {
    /// Label per cell; `None` for cells excluded by row normalization.
    pub labels: Vec<Option<usize>>,
    pub centers: CenterSet,
    pub objective: f64,
    pub excluded_mass: f64,
    /// Excluded mass above [`EXCLUDED_MASS_WARNING`].
    pub warning: bool,
    pub grid: GridMeasure,
}

impl ContinuumClustering {
    pub fn k(&self) -> usize {
        self.centers.k()
    }

    /// Mass of each cluster under the grid measure.
    pub fn masses(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.k()];
        for (c, l) in self.labels.iter().enumerate() {
            if let Some(l) = l {
                m[*l] += self.grid.weights()[c];
            }
        }
        m
    }

    /// The grid measure restricted to one cluster (cell centers, cell masses).
    pub fn restricted(&self, cluster: usize) -> WeightedPointSet {
        let idx: Vec<usize> = (0..self.labels.len()).filter(|&c| self.labels[c] == Some(cluster)).collect();
        self.grid.as_point_set().restrict(&idx)
    }
}

/// Pushes the grid measure through `x -> (u_1(x), ..., u_k(x))` (optionally
/// normalized to unit length per cell), runs weighted k-means and pulls the
/// labels back.
pub fn continuum_spectral_clustering(
    grid: &GridMeasure,
    basis: &[Vec<f64>],
    k: usize,
    normalized_rows: bool,
    options: &KMeansOptions,
) -> Result<ContinuumClustering> {
    if k == 0 || basis.len() < k || basis.iter().any(|v| v.len() != grid.len()) {
        return Err(Error::invalid("need at least k grid functions conformal with the grid"));
    }
    let n = grid.len();
    let mut embedded = Vec::with_capacity(n * k);
    let mut weights = Vec::with_capacity(n);
    let mut kept = Vec::with_capacity(n);
    let mut excluded_mass = 0.0;
    for c in 0..n {
        let row: Vec<f64> = (0..k).map(|j| basis[j][c]).collect();
        let norm = math::norm(&row);
        if normalized_rows {
            if norm < 1e-12 {
                excluded_mass += grid.weights()[c];
                continue;
            }
            embedded.extend(row.iter().map(|x| x / norm));
        } else {
            embedded.extend(row);
        }
        weights.push(grid.weights()[c]);
        kept.push(c);
    }
    let measure = WeightedPointSet::new(k, embedded, weights)?;
    let result = kmeans::minimize(&measure, k, options)?;
    let assignment = kmeans::assign(&measure, &result.centers);
    let mut labels = vec![None; n];
    for (i, &c) in kept.iter().enumerate() {
        labels[c] = Some(assignment.labels()[i]);
    }
    Ok(ContinuumClustering {
        labels,
        centers: result.centers,
        objective: result.value,
        excluded_mass,
        warning: excluded_mass > EXCLUDED_MASS_WARNING,
        grid: grid.clone(),
    })
}

/// `M^{-1/2} K M^{-1/2}` restricted to the Euclidean complement of `Q`
/// (orthonormal columns), with `Q` itself shifted above the spectrum.
struct Deflated<'a> {
    conj: &'a CsrMatrix,
    q: &'a [Vec<f64>],
    shift: f64,
}

impl LinearOperator for Deflated<'_> {
    fn dim(&self) -> usize {
        self.conj.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut px = x.to_vec();
        let coeffs: Vec<f64> = self.q.iter().map(|q| math::dot(q, x)).collect();
        for (q, c) in self.q.iter().zip(&coeffs) {
            math::axpy(-c, q, &mut px);
        }
        self.conj.apply(&px, y);
        let back: Vec<f64> = self.q.iter().map(|q| math::dot(q, y)).collect();
        for (q, c) in self.q.iter().zip(&back) {
            math::axpy(-c, q, y);
        }
        for (q, c) in self.q.iter().zip(&coeffs) {
            math::axpy(self.shift * c, q, y);
        }
    }

    fn norm_bound(&self) -> Option<f64> {
        Some(self.conj.gershgorin().max(self.shift))
    }
}

/// `min { u'Ku / u'Mu : u ⊥_M span(S) }`.
pub fn constrained_minimum(system: &FdSystem, constraints: &[Vec<f64>], options: &SolverOptions) -> Result<f64> {
    let n = system.mass.len();
    if constraints.len() >= n {
        return Err(Error::invalid("too many constraints"));
    }
    let s: Vec<f64> = system.mass.iter().map(|m| 1.0 / math::sqrt(*m)).collect();
    let conj = system.stiffness.scaled(&s, &s);
    // constraints in the congruent frame: M^{1/2} v
    let mapped: Vec<Vec<f64>> = constraints
        .iter()
        .map(|v| v.iter().zip(&system.mass).map(|(x, m)| x * math::sqrt(*m)).collect())
        .collect();
    let ones = vec![1.0; n];
    let q = if mapped.is_empty() { Vec::new() } else { eigen::orthonormalize(&mapped, &ones)? };
    let shift = 2.0 * conj.gershgorin() + 1.0;
    let op = Deflated { conj: &conj, q: &q, shift };
    let raw = eigen::solve_operator(&op, 1, options)?;
    Ok(raw.values[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct CourantFischerReport {
    pub k: usize,
    pub lambda_k: f64,
    /// Constrained minimum with `S` spanned by the first `k - 1` eigenvectors.
    pub attained: f64,
    /// Constrained minima for the random subspaces.
    pub random_minima: Vec<f64>,
    /// `max(0, max_S min - lambda_k) / max(|lambda_k|, 1)`.
    pub worst_violation: f64,
}

impl CourantFischerReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.worst_violation <= tol && (self.attained - self.lambda_k).abs() <= tol * self.lambda_k.abs().max(1.0)
    }
}

/// Max-min check of the `k`-th eigenvalue (1-based) against random
/// `(k-1)`-dimensional constraint spaces.
pub fn courant_fischer_check(
    system: &FdSystem,
    basis: &EigenBasis,
    k: usize,
    trials: usize,
    seed: u64,
    options: &SolverOptions,
) -> Result<CourantFischerReport> {
    if k == 0 || basis.len() < k {
        return Err(Error::invalid("basis must hold at least k vectors"));
    }
    let lambda_k = basis.values()[k - 1];
    let attained = constrained_minimum(system, &basis.vectors()[..k - 1], options)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = system.mass.len();
    let mut random_minima = Vec::with_capacity(trials);
    for _ in 0..trials {
        let s: Vec<Vec<f64>> = (0..k - 1).map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
        random_minima.push(constrained_minimum(system, &s, options)?);
    }
    let scale = lambda_k.abs().max(1.0);
    let worst_violation = random_minima.iter().map(|m| (m - lambda_k) / scale).fold(0.0, f64::max);
    Ok(CourantFischerReport { k, lambda_k, attained, random_minima, worst_violation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DensityKind;

    fn unit(d: usize) -> DensityField {
        DensityField::uniform(Domain::unit(d).unwrap())
    }

    #[test]
    fn analytic_interval_and_square() {
        let a = analytic_neumann_box(&unit(1), ContinuumKind::L, 3).unwrap();
        let pi2 = math::PI * math::PI;
        assert_eq!(a.values()[0], 0.0);
        assert!((a.values()[1] - pi2).abs() < 1e-12 && (a.values()[2] - 4.0 * pi2).abs() < 1e-12);
        assert!((a.eval(1, &[0.0]) - math::sqrt(2.0)).abs() < 1e-15);
        let s = analytic_neumann_box(&unit(2), ContinuumKind::L, 4).unwrap();
        assert_eq!(s.spectrum().groups()[1].len, 2);
        let affine = DensityField::new(DensityKind::Affine { c0: 1.0, slope: alloc::vec![1.0] }, Domain::unit(1).unwrap()).unwrap();
        assert!(analytic_neumann_box(&affine, ContinuumKind::L, 2).is_err());
    }

    #[test]
    fn fd_interval_accuracy() {
        let e = fd_weighted_eigs(&unit(1), ContinuumKind::L, &[256], 3, &SolverOptions::default()).unwrap();
        let pi2 = math::PI * math::PI;
        assert!(e.basis.values()[0].abs() < 1e-10);
        assert!(((e.basis.values()[1] - pi2) / pi2).abs() < 1e-3);
        let rw = fd_weighted_eigs(&unit(1), ContinuumKind::Nrw, &[256], 3, &SolverOptions::default()).unwrap();
        for (a, b) in e.basis.values().iter().zip(rw.basis.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn sym_rw_agree_for_varying_density() {
        let rho = DensityField::new(DensityKind::Affine { c0: 1.0, slope: alloc::vec![1.0] }, Domain::unit(1).unwrap()).unwrap();
        let rw = fd_weighted_eigs(&rho, ContinuumKind::Nrw, &[128], 4, &SolverOptions::default()).unwrap();
        let sym = fd_weighted_eigs(&rho, ContinuumKind::Nsym, &[128], 4, &SolverOptions::default()).unwrap();
        for (a, b) in rw.basis.values().iter().zip(sym.basis.values()) {
            assert!((a - b).abs() < 1e-8 * a.abs().max(1.0));
        }
    }

    #[test]
    fn nonlocal_energy_of_linear_function() {
        let grid = grid_discretize(&unit(1), &[2000]).unwrap();
        let u: Vec<f64> = (0..2000).map(|c| grid.cell_center(c)[0]).collect();
        let eps = 0.05;
        let g = nonlocal_energy(&grid, &u, &RadialKernel::Indicator, eps).unwrap();
        // exact value of the continuum double integral is 2/3 - eps/2
        assert!((g - (2.0 / 3.0 - eps / 2.0)).abs() < 2e-3, "{g}");
        let c = alloc::vec![3.0; 2000];
        assert_eq!(nonlocal_energy(&grid, &c, &RadialKernel::Indicator, eps).unwrap(), 0.0);
        assert!(nonlocal_energy(&grid, &u, &RadialKernel::Indicator, 1e-4).is_err());
    }

    #[test]
    fn interval_clustering_splits_at_half() {
        let e = fd_weighted_eigs(&unit(1), ContinuumKind::L, &[64], 2, &SolverOptions::default()).unwrap();
        let cl = continuum_spectral_clustering(&e.system.grid, e.basis.vectors(), 2, false, &KMeansOptions::default()).unwrap();
        let left = cl.labels[0].unwrap();
        for c in 0..64 {
            let want = if c < 32 { left } else { 1 - left };
            assert_eq!(cl.labels[c], Some(want));
        }
        let one = continuum_spectral_clustering(&e.system.grid, e.basis.vectors(), 1, false, &KMeansOptions::default()).unwrap();
        assert!((one.masses()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn courant_fischer_small() {
        let e = fd_weighted_eigs(&unit(1), ContinuumKind::L, &[64], 4, &SolverOptions::default()).unwrap();
        for k in 1..=4 {
            let r = courant_fischer_check(&e.system, &e.basis, k, 10, 1, &SolverOptions::default()).unwrap();
            assert!(r.passes(1e-8), "{r:?}");
        }
    }
}
