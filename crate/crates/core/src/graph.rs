//! Similarity graphs `W_ij = eta_eps(x_i - x_j)` on point clouds, their
//! Laplacians and the rescaled graph Dirichlet energies.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::kernel::{scaled_profile, KernelConstants, RadialKernel};
use crate::math;
use crate::neighbors::CellGrid;
use crate::sparse::CsrMatrix;

/// Default cap on the memory held by the weight matrix (2 GB).
pub const DEFAULT_MEMORY_BUDGET: usize = 2 << 30;

/// Bytes per stored CSR entry (column index + value).
const BYTES_PER_ENTRY: usize = core::mem::size_of::<usize>() + core::mem::size_of::<f64>();

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphOptions {
    /// Store `W_ii = eta_eps(0)` and count it in the degrees.
    pub self_loops: bool,
    pub memory_budget: usize,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self { self_loops: true, memory_budget: DEFAULT_MEMORY_BUDGET }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LaplacianKind {
    /// `L = D - W`
    Unnormalized,
    /// `D^{-1/2} L D^{-1/2}`
    Symmetric,
    /// `D^{-1} L`, handled through its symmetric conjugate.
    RandomWalk,
}

impl LaplacianKind {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "unnormalized" | "L" => Ok(Self::Unnormalized),
            "sym" | "symmetric" => Ok(Self::Symmetric),
            "rw" | "random_walk" => Ok(Self::RandomWalk),
            other => Err(Error::Configuration(alloc::format!("unknown laplacian kind '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Unnormalized => "unnormalized",
            Self::Symmetric => "sym",
            Self::RandomWalk => "rw",
        }
    }

    pub fn is_normalized(&self) -> bool {
        !matches!(self, Self::Unnormalized)
    }
}

/// Point cloud plus `eps`, weight matrix and degrees.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    cloud: PointCloud,
    eps: f64,
    kernel: RadialKernel,
    constants: KernelConstants,
    weights: CsrMatrix,
    degrees: Vec<f64>,
}

/// Assembles `W^eps` with a cell-grid fixed-radius search.
pub fn build_graph(cloud: &PointCloud, kernel: &RadialKernel, eps: f64) -> Result<WeightedGraph> {
    build_graph_with(cloud, kernel, eps, GraphOptions::default())
}

pub fn build_graph_with(
    cloud: &PointCloud,
    kernel: &RadialKernel,
    eps: f64,
    options: GraphOptions,
) -> Result<WeightedGraph> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid("length scale eps must be positive"));
    }
    let support = kernel.support_radius().ok_or_else(|| {
        Error::invalid("graph assembly needs a compactly supported kernel")
    })?;
    let d = cloud.dim();
    let constants = KernelConstants::compute(kernel, d)?;
    let n = cloud.len();
    let cutoff = eps * support;
    let grid = CellGrid::new(cloud.coords(), d, cutoff);
    let budget_entries = options.memory_budget / BYTES_PER_ENTRY;
    let mut rows = Vec::with_capacity(n);
    let mut stored = 0usize;
    let mut found = Vec::new();
    for i in 0..n {
        found.clear();
        grid.query(cloud.point(i), cutoff * cutoff, &mut found);
        let mut row = Vec::with_capacity(found.len());
        for &(j, d2) in &found {
            if j == i && !options.self_loops {
                continue;
            }
            let w = scaled_profile(kernel, d, eps, math::sqrt(d2));
            if w > 0.0 {
                row.push((j, w));
            }
        }
        stored += row.len();
        if stored > budget_entries {
            return Err(Error::Resource(alloc::format!(
                "weight matrix exceeds the memory budget of {} bytes; reduce eps",
                options.memory_budget
            )));
        }
        rows.push(row);
    }
    let weights = CsrMatrix::from_sorted_rows(n, rows);
    let degrees = weights.row_sums();
    Ok(WeightedGraph { cloud: cloud.clone(), eps, kernel: *kernel, constants, weights, degrees })
}

impl WeightedGraph {
    /// Builds from an explicit symmetric weight matrix. Used for hand-made
    /// graphs; `cloud` only supplies the node positions.
    pub fn from_weights(cloud: PointCloud, eps: f64, kernel: RadialKernel, weights: CsrMatrix) -> Result<Self> {
        if weights.n() != cloud.len() {
            return Err(Error::invalid("weight matrix size must match the point count"));
        }
        if weights.asymmetry() != 0.0 {
            return Err(Error::invalid("weight matrix must be exactly symmetric"));
        }
        let constants = KernelConstants::compute(&kernel, cloud.dim())?;
        let degrees = weights.row_sums();
        Ok(Self { cloud, eps, kernel, constants, weights, degrees })
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn kernel(&self) -> &RadialKernel {
        &self.kernel
    }

    pub fn constants(&self) -> &KernelConstants {
        &self.constants
    }

    pub fn weights(&self) -> &CsrMatrix {
        &self.weights
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Edge list `(i, j, w)` with `i <= j`, 0-based.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.weights.upper_triplets()
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n() {
            return Err(Error::invalid("vector length must equal the number of nodes"));
        }
        Ok(())
    }

    /// `G_{n,eps}(u) = (1/(eps² n²)) sum_{i,j} W_ij (u_i - u_j)²`.
    pub fn dirichlet_energy(&self, u: &[f64]) -> Result<f64> {
        self.check_len(u)?;
        let n = self.n() as f64;
        Ok(self.pair_sum(u) / (self.eps * self.eps * n * n))
    }

    /// `Ḡ_{n,eps}(u) = (1/(n eps²)) sum_{i,j} W_ij (u_i/√D_ii - u_j/√D_jj)²`.
    pub fn normalized_dirichlet_energy(&self, u: &[f64]) -> Result<f64> {
        self.check_len(u)?;
        let v: Vec<f64> = u.iter().zip(&self.degrees).map(|(x, d)| x / math::sqrt(*d)).collect();
        let n = self.n() as f64;
        Ok(self.pair_sum(&v) / (n * self.eps * self.eps))
    }

    /// `sum_{i,j} W_ij (u_i - u_j)²` over ordered pairs.
    pub fn pair_sum(&self, u: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n() {
            for (j, w) in self.weights.row(i) {
                let diff = u[i] - u[j];
                s += w * diff * diff;
            }
        }
        s
    }

    /// Union-find over the nonzero pattern; labels are numbered in order of
    /// first appearance.
    pub fn connected_components(&self) -> (usize, Vec<usize>) {
        let n = self.n();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (i, j, _) in self.weights.upper_triplets() {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut label_of_root = vec![usize::MAX; n];
        let mut labels = vec![0; n];
        let mut count = 0;
        for i in 0..n {
            let r = find(&mut parent, i);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = count;
                count += 1;
            }
            labels[i] = label_of_root[r];
        }
        (count, labels)
    }
}

/// The requested Laplacian as a symmetric sparse matrix. The random-walk
/// kind returns `N^sym`; convert its eigenvectors with
/// [`crate::eigen::rw_from_sym`].
pub fn laplacian(graph: &WeightedGraph, kind: LaplacianKind) -> Result<CsrMatrix> {
    let n = graph.n();
    if let Some(i) = graph.degrees.iter().position(|d| !(*d > 0.0)) {
        return Err(Error::Internal(alloc::format!("node {i} has zero degree")));
    }
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut has_diag = false;
        for (j, w) in graph.weights.row(i) {
            if j == i {
                has_diag = true;
                row.push((j, graph.degrees[i] - w));
            } else {
                row.push((j, -w));
            }
        }
        if !has_diag {
            let pos = row.partition_point(|e| e.0 < i);
            row.insert(pos, (i, graph.degrees[i]));
        }
        rows.push(row);
    }
    let l = CsrMatrix::from_sorted_rows(n, rows);
    Ok(match kind {
        LaplacianKind::Unnormalized => l,
        LaplacianKind::Symmetric | LaplacianKind::RandomWalk => {
            let s: Vec<f64> = graph.degrees.iter().map(|d| 1.0 / math::sqrt(*d)).collect();
            l.scaled(&s, &s)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample, DensityField, Domain};

    fn pair(dist: f64) -> PointCloud {
        PointCloud::from_coords(2, alloc::vec![0.0, 0.0, dist, 0.0], 0).unwrap()
    }

    #[test]
    fn two_point_weights() {
        let g = build_graph(&pair(0.3), &RadialKernel::Indicator, 0.5).unwrap();
        assert_eq!(g.weights().get(0, 1), 4.0);
        assert_eq!(g.weights().get(0, 0), 4.0);
        assert_eq!(g.degrees(), &[8.0, 8.0]);
        let g = build_graph(&pair(0.6), &RadialKernel::Indicator, 0.5).unwrap();
        assert_eq!(g.weights().get(0, 1), 0.0);
        assert_eq!(g.connected_components().0, 2);
    }

    #[test]
    fn two_node_laplacian_and_energies() {
        // single off-diagonal weight 1, diagonal eta(0) = 1, eps = 1
        let g = build_graph(&PointCloud::from_coords(1, alloc::vec![0.0, 0.5], 0).unwrap(), &RadialKernel::Indicator, 1.0).unwrap();
        let l = laplacian(&g, LaplacianKind::Unnormalized).unwrap();
        assert_eq!(l.to_dense(), alloc::vec![1.0, -1.0, -1.0, 1.0]);
        assert!((g.dirichlet_energy(&[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((g.normalized_dirichlet_energy(&[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(g.dirichlet_energy(&[3.0, 3.0]).unwrap(), 0.0);
        assert!(g.dirichlet_energy(&[1.0]).is_err());
    }

    #[test]
    fn laplacian_kernels() {
        let rho = DensityField::uniform(Domain::unit(2).unwrap());
        let cloud = sample(&rho, 200, 11).unwrap();
        let g = build_graph(&cloud, &RadialKernel::Indicator, 0.2).unwrap();
        let l = laplacian(&g, LaplacianKind::Unnormalized).unwrap();
        let ones = alloc::vec![1.0; 200];
        let scale = l.gershgorin();
        assert!(l.matvec(&ones).iter().all(|v| v.abs() <= 1e-12 * scale));
        let s = laplacian(&g, LaplacianKind::Symmetric).unwrap();
        let sqrt_d: Vec<f64> = g.degrees().iter().map(|d| math::sqrt(*d)).collect();
        assert!(s.matvec(&sqrt_d).iter().all(|v| v.abs() <= 1e-12 * math::norm(&sqrt_d)));
        assert_eq!(s.asymmetry(), 0.0);
        let u = g.degrees().iter().map(|d| math::sqrt(*d)).collect::<Vec<_>>();
        assert!(g.normalized_dirichlet_energy(&u).unwrap() < 1e-12);
    }

    #[test]
    fn self_loop_flag_only_changes_degrees() {
        let rho = DensityField::uniform(Domain::unit(2).unwrap());
        let cloud = sample(&rho, 100, 2).unwrap();
        let with = build_graph(&cloud, &RadialKernel::Indicator, 0.2).unwrap();
        let without = build_graph_with(
            &cloud,
            &RadialKernel::Indicator,
            0.2,
            GraphOptions { self_loops: false, ..GraphOptions::default() },
        )
        .unwrap();
        let eta0 = 1.0 / (0.2 * 0.2);
        for i in 0..100 {
            assert!((with.degrees()[i] - without.degrees()[i] - eta0).abs() < 1e-9);
        }
        let u: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let a = with.dirichlet_energy(&u).unwrap();
        let b = without.dirichlet_energy(&u).unwrap();
        assert!((a - b).abs() <= 1e-12 * a);
        let la = laplacian(&with, LaplacianKind::Unnormalized).unwrap();
        let lb = laplacian(&without, LaplacianKind::Unnormalized).unwrap();
        for (x, y) in la.to_dense().iter().zip(lb.to_dense().iter()) {
            assert!((x - y).abs() <= 1e-9 * eta0);
        }
    }

    #[test]
    fn memory_budget_enforced() {
        let rho = DensityField::uniform(Domain::unit(2).unwrap());
        let cloud = sample(&rho, 200, 2).unwrap();
        let r = build_graph_with(
            &cloud,
            &RadialKernel::Indicator,
            2.0,
            GraphOptions { self_loops: true, memory_budget: 1000 },
        );
        assert!(matches!(r, Err(Error::Resource(_))));
    }

    #[test]
    fn components_for_large_eps() {
        let rho = DensityField::uniform(Domain::unit(2).unwrap());
        let cloud = sample(&rho, 50, 4).unwrap();
        let g = build_graph(&cloud, &RadialKernel::Indicator, 1.5).unwrap();
        assert_eq!(g.connected_components().0, 1);
    }
}
