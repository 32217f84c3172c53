//! Length-scale schedules and discrete spectral clustering.

use alloc::vec;
use alloc::vec::Vec;

use crate::eigen::{self, EigenBasis, SolverOptions};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::graph::{build_graph_with, laplacian, GraphOptions, LaplacianKind, WeightedGraph};
use crate::kernel::RadialKernel;
use crate::kmeans::{self, CenterSet, KMeansOptions};
use crate::math;
use crate::measure::WeightedPointSet;

/// Critical connectivity rate `r(n)`:
///
/// * `d = 1`: `(log n / n)^{1/2}`
/// * `d = 2`: `(log n)^{3/4} / n^{1/2}`
/// * `d >= 3`: `(log n / n)^{1/d}`
pub fn critical_rate(n: usize, d: usize) -> Result<f64> {
    if n < 2 || d == 0 {
        return Err(Error::invalid("critical rate needs n >= 2 and d >= 1"));
    }
    let nf = n as f64;
    let l = math::ln(nf);
    Ok(match d {
        1 => math::sqrt(l / nf),
        2 => math::powf(l, 0.75) / math::sqrt(nf),
        _ => math::powf(l / nf, 1.0 / d as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub eps: f64,
    pub rate: f64,
    /// `theta < 1`, so that `eps / r(n) -> infinity`.
    pub admissible: bool,
}

/// `eps_n = c r(n)^theta`.
pub fn epsilon_schedule(n: usize, d: usize, c: f64, theta: f64) -> Result<Schedule> {
    if !(c > 0.0) || !(theta > 0.0) || !c.is_finite() || !theta.is_finite() {
        return Err(Error::invalid("schedule needs c > 0 and theta > 0"));
    }
    let rate = critical_rate(n, d)?;
    Ok(Schedule { eps: c * math::powf(rate, theta), rate, admissible: theta < 1.0 })
}

#[derive(Debug, Clone)]
pub struct DiscreteClustering {
    pub graph: WeightedGraph,
    pub kind: LaplacianKind,
    /// Eigenvectors used for the embedding (random-walk vectors for the
    /// random-walk kind), unit norm under `nu_n`.
    pub basis: EigenBasis,
    /// Label per point; `None` for points dropped by row normalization.
    pub labels: Vec<Option<usize>>,
    pub centers: CenterSet,
    pub objective: f64,
    pub excluded: usize,
}

impl DiscreteClustering {
    pub fn k(&self) -> usize {
        self.centers.k()
    }

    pub fn masses(&self) -> Vec<f64> {
        let n = self.labels.len() as f64;
        let mut m = vec![0.0; self.k()];
        for l in self.labels.iter().flatten() {
            m[*l] += 1.0 / n;
        }
        m
    }

    /// `nu_n` restricted to one cluster (weights `1/n`, not renormalized).
    pub fn restricted(&self, cluster: usize) -> WeightedPointSet {
        let idx: Vec<usize> = (0..self.labels.len()).filter(|&i| self.labels[i] == Some(cluster)).collect();
        let cloud = self.graph.cloud();
        let n = cloud.len() as f64;
        let mut pts = Vec::with_capacity(idx.len() * cloud.dim());
        for &i in &idx {
            pts.extend_from_slice(cloud.point(i));
        }
        WeightedPointSet::raw(cloud.dim(), pts, vec![1.0 / n; idx.len()])
    }
}

/// Graph, Laplacian, `k` smallest eigenvectors, embedding
/// `x_i -> (u_1(x_i), ..., u_k(x_i))` (rows normalized for the symmetric
/// kind), weighted k-means, labels pulled back to the points.
pub fn spectral_cluster_discrete(
    cloud: &PointCloud,
    kernel: &RadialKernel,
    eps: f64,
    kind: LaplacianKind,
    k: usize,
    kmeans_options: &KMeansOptions,
    solver: &SolverOptions,
    graph_options: GraphOptions,
) -> Result<DiscreteClustering> {
    let n = cloud.len();
    if k == 0 || k > n {
        return Err(Error::invalid("need 1 <= k <= n"));
    }
    let graph = build_graph_with(cloud, kernel, eps, graph_options)?;
    let lap = laplacian(&graph, kind)?;
    let weights = vec![1.0 / n as f64; n];
    let mut basis = eigen::smallest_k_with(&lap, k, &weights, solver)?;
    if kind == LaplacianKind::RandomWalk {
        basis = eigen::rw_from_sym(&basis, graph.degrees())?;
    }
    let e = cluster_embedding(basis.vectors(), k, kind == LaplacianKind::Symmetric, kmeans_options)?;
    Ok(DiscreteClustering { graph, kind, basis, labels: e.labels, centers: e.centers, objective: e.objective, excluded: e.excluded })
}

/// k-means on the embedding `i -> (v_1[i], ..., v_k[i])` of equally weighted
/// nodes.
#[derive(Debug, Clone)]
pub struct EmbeddingClusters {
    pub labels: Vec<Option<usize>>,
    pub centers: CenterSet,
    pub objective: f64,
    /// Rows dropped because their norm was below `1e-12`.
    pub excluded: usize,
}

pub fn cluster_embedding(
    vectors: &[Vec<f64>],
    k: usize,
    normalize_rows: bool,
    kmeans_options: &KMeansOptions,
) -> Result<EmbeddingClusters> {
    if k == 0 || vectors.len() < k {
        return Err(Error::invalid("need at least k embedding vectors"));
    }
    let n = vectors[0].len();
    let mut embedded = Vec::with_capacity(n * k);
    let mut kept = Vec::with_capacity(n);
    let mut excluded = 0;
    for i in 0..n {
        let row: Vec<f64> = (0..k).map(|j| vectors[j][i]).collect();
        if normalize_rows {
            let norm = math::norm(&row);
            if norm < 1e-12 {
                excluded += 1;
                continue;
            }
            embedded.extend(row.iter().map(|x| x / norm));
        } else {
            embedded.extend(row);
        }
        kept.push(i);
    }
    let measure = WeightedPointSet::uniform(k, embedded)?;
    let result = kmeans::minimize(&measure, k, kmeans_options)?;
    let assignment = kmeans::assign(&measure, &result.centers);
    let mut labels = vec![None; n];
    for (pos, &i) in kept.iter().enumerate() {
        labels[i] = Some(assignment.labels()[pos]);
    }
    Ok(EmbeddingClusters { labels, centers: result.centers, objective: result.value, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        let s = epsilon_schedule(10_000, 2, 1.0, 0.9).unwrap();
        let want = math::powf(math::powf(math::ln(1e4), 0.75) / 100.0, 0.9);
        assert!((s.eps - want).abs() < 1e-15 && s.admissible);
        assert!(!epsilon_schedule(1000, 3, 0.1, 1.0).unwrap().admissible);
        let mut prev = f64::INFINITY;
        for n in [250, 500, 1000, 2000, 4000, 8000] {
            let e = epsilon_schedule(n, 2, 1.0, 0.9).unwrap().eps;
            assert!(e < prev);
            prev = e;
        }
        assert!(epsilon_schedule(100, 2, 0.0, 0.9).is_err());
    }

    #[test]
    fn separated_blobs_recovered() {
        let mut coords = Vec::new();
        for i in 0..40 {
            let t = i as f64 / 40.0;
            coords.extend([0.1 + 0.1 * t, 0.1 + 0.05 * (7.0 * t).sin().abs()]);
            coords.extend([0.8 + 0.1 * t, 0.8 + 0.05 * (5.0 * t).cos().abs()]);
        }
        let cloud = PointCloud::from_coords(2, coords, 0).unwrap();
        for kind in [LaplacianKind::Unnormalized, LaplacianKind::Symmetric, LaplacianKind::RandomWalk] {
            let c = spectral_cluster_discrete(
                &cloud,
                &RadialKernel::Indicator,
                0.15,
                kind,
                2,
                &KMeansOptions::default(),
                &SolverOptions::default(),
                GraphOptions::default(),
            )
            .unwrap();
            assert_eq!(c.graph.connected_components().0, 2);
            for i in 0..80 {
                assert_eq!(c.labels[i], c.labels[i % 2], "{kind:?}");
            }
            assert_ne!(c.labels[0], c.labels[1]);
        }
    }
}
