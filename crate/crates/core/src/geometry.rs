//! Box domains, bounded densities, seeded sampling and grid measures.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::measure::WeightedPointSet;

/// Largest admissible `M/m` before rejection sampling is considered broken.
pub const MAX_DENSITY_RATIO: f64 = 1e6;

/// Axis-aligned box `prod_i [a_i, b_i]` in dimension 1, 2 or 3.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = lower.len();
        if !(1..=3).contains(&d) || upper.len() != d {
            return Err(Error::invalid("domain dimension must be 1, 2 or 3"));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(Error::invalid("domain bounds must satisfy a_i < b_i"));
        }
        Ok(Self { lower, upper })
    }

    /// `[0,1]^d`.
    pub fn unit(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d], vec![1.0; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.side(i)).product()
    }

    pub fn diameter(&self) -> f64 {
        math::sqrt((0..self.dim()).map(|i| self.side(i) * self.side(i)).sum())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (a, b))| *v >= *a && *v <= *b)
    }
}

/// Parametric density families, specified before normalization.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityKind {
    Uniform,
    /// `rho(x) ∝ c0 + slope · x`; must stay positive on the box.
    Affine { c0: f64, slope: Vec<f64> },
    /// `rho(x) ∝ floor + sum_b exp(-|x - c_b|² / (2 width²))`, truncated to
    /// the box. One center gives a single bump, two centers a two-blob
    /// density joined by the floor.
    GaussianBumps { centers: Vec<Vec<f64>>, width: f64, floor: f64 },
}

/// A normalized density on a box with explicit bounds `m <= rho <= M`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    kind: DensityKind,
    domain: Domain,
    norm: f64,
    lower_bound: f64,
    upper_bound: f64,
}

impl DensityField {
    pub fn new(kind: DensityKind, domain: Domain) -> Result<Self> {
        let d = domain.dim();
        let (mass, lo, hi) = match &kind {
            DensityKind::Uniform => (domain.volume(), 1.0, 1.0),
            DensityKind::Affine { c0, slope } => {
                if slope.len() != d {
                    return Err(Error::invalid("affine slope must match the domain dimension"));
                }
                let center: f64 = (0..d)
                    .map(|i| slope[i] * 0.5 * (domain.lower[i] + domain.upper[i]))
                    .sum();
                // extremes of a linear function sit at corners
                let mut lo = *c0;
                let mut hi = *c0;
                for i in 0..d {
                    let a = slope[i] * domain.lower[i];
                    let b = slope[i] * domain.upper[i];
                    lo += a.min(b);
                    hi += a.max(b);
                }
                (domain.volume() * (c0 + center), lo, hi)
            }
            DensityKind::GaussianBumps { centers, width, floor } => {
                if centers.is_empty() || centers.iter().any(|c| c.len() != d) {
                    return Err(Error::invalid("bump centers must match the domain dimension"));
                }
                if !(*width > 0.0) || !(*floor > 0.0) {
                    return Err(Error::invalid("bump width and floor must be positive"));
                }
                let s = math::sqrt(2.0) * width;
                let mut mass = floor * domain.volume();
                for c in centers {
                    let mut prod = 1.0;
                    for i in 0..d {
                        let e = math::erf((domain.upper[i] - c[i]) / s)
                            - math::erf((domain.lower[i] - c[i]) / s);
                        prod *= math::sqrt(math::PI / 2.0) * width * e;
                    }
                    mass += prod;
                }
                (mass, *floor, floor + centers.len() as f64)
            }
        };
        if !(lo > 0.0) || !mass.is_finite() || !(mass > 0.0) {
            return Err(Error::invalid("density must be bounded away from zero on the domain"));
        }
        Ok(Self {
            kind,
            domain,
            norm: 1.0 / mass,
            lower_bound: lo / mass,
            upper_bound: hi / mass,
        })
    }

    pub fn uniform(domain: Domain) -> Self {
        Self::new(DensityKind::Uniform, domain).expect("uniform density is always valid")
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Lower bound `m`.
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    /// Upper bound `M` used as the rejection envelope.
    pub fn upper_bound(&self) -> f64 {
        self.upper_bound
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, DensityKind::Uniform)
            || matches!(&self.kind, DensityKind::Affine { slope, .. } if slope.iter().all(|s| *s == 0.0))
    }

    /// Normalized density value at `x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let raw = match &self.kind {
            DensityKind::Uniform => 1.0,
            DensityKind::Affine { c0, slope } => c0 + math::dot(slope, x),
            DensityKind::GaussianBumps { centers, width, floor } => {
                let inv = 1.0 / (2.0 * width * width);
                floor + centers.iter().map(|c| math::exp(-math::dist2(x, c) * inv)).sum::<f64>()
            }
        };
        raw * self.norm
    }

    pub fn describe(&self) -> String {
        alloc::format!("{:?}", self.kind)
    }
}

/// `n` i.i.d. points (row-major) together with the seed that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    seed: u64,
}

impl PointCloud {
    pub fn from_coords(dim: usize, coords: Vec<f64>, seed: u64) -> Result<Self> {
        if dim == 0 || coords.is_empty() || coords.len() % dim != 0 {
            return Err(Error::invalid("point cloud needs at least one point of positive dimension"));
        }
        Ok(Self { dim, coords, seed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Seed for trial `index` of a sweep with base seed `base`.
///
/// Trials use `base + index` (wrapping); ChaCha's `seed_from_u64` expands the
/// integer, so adjacent seeds give unrelated streams.
pub fn trial_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}

/// Draws `n` points from `density` by rejection against the bound `M`.
pub fn sample(density: &DensityField, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let ratio = density.upper_bound() / density.lower_bound();
    if !(ratio <= MAX_DENSITY_RATIO) {
        return Err(Error::Configuration(alloc::format!(
            "density ratio M/m = {ratio:e} makes rejection sampling impractical"
        )));
    }
    let domain = density.domain();
    let d = domain.dim();
    let envelope = density.upper_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(n * d);
    let mut x = vec![0.0; d];
    while coords.len() < n * d {
        for (i, xi) in x.iter_mut().enumerate() {
            let u: f64 = rng.random();
            *xi = domain.lower[i] + u * domain.side(i);
        }
        let accept: f64 = rng.random();
        if accept * envelope <= density.eval(&x) {
            coords.extend_from_slice(&x);
        }
    }
    PointCloud::from_coords(d, coords, seed)
}

/// The empirical measure `(1/n) sum_i delta_{x_i}`.
pub fn empirical_measure(cloud: &PointCloud) -> WeightedPointSet {
    WeightedPointSet::uniform(cloud.dim(), cloud.coords().to_vec())
        .expect("point clouds are never empty")
}

/// Regular grid of cells over a box with per-cell masses of `nu`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    domain: Domain,
    resolution: Vec<usize>,
    weights: Vec<f64>,
}

impl GridMeasure {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.domain.side(axis) / self.resolution[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.domain.dim()).map(|i| self.spacing(i)).product()
    }

    /// Largest cell diagonal.
    pub fn cell_diameter(&self) -> f64 {
        math::sqrt((0..self.domain.dim()).map(|i| self.spacing(i) * self.spacing(i)).sum())
    }

    /// Multi-index of a linear cell index; axis 0 varies fastest.
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.resolution.len());
        for &r in &self.resolution {
            out.push(idx % r);
            idx /= r;
        }
        out
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for (axis, &r) in self.resolution.iter().enumerate().rev() {
            idx = idx * r + multi[axis];
        }
        idx
    }

    pub fn cell_center(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(axis, &m)| self.domain.lower[axis] + (m as f64 + 0.5) * self.spacing(axis))
            .collect()
    }

    /// Cell containing `x` (points on the upper face go to the last cell).
    pub fn locate(&self, x: &[f64]) -> usize {
        let multi: Vec<usize> = (0..self.domain.dim())
            .map(|axis| {
                let t = (x[axis] - self.domain.lower[axis]) / self.spacing(axis);
                let r = self.resolution[axis];
                if t <= 0.0 {
                    0
                } else {
                    (math::floor(t) as usize).min(r - 1)
                }
            })
            .collect();
        self.linear_index(&multi)
    }

    pub fn centers(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * self.domain.dim());
        for idx in 0..self.len() {
            out.extend(self.cell_center(idx));
        }
        out
    }

    /// Cell centers carrying the cell masses.
    pub fn as_point_set(&self) -> WeightedPointSet {
        WeightedPointSet::raw(self.domain.dim(), self.centers(), self.weights.clone())
    }
}

/// Midpoint-rule discretization of `density` on a regular grid, renormalized
/// so the weights sum to one.
pub fn grid_discretize(density: &DensityField, resolution: &[usize]) -> Result<GridMeasure> {
    let domain = density.domain().clone();
    if resolution.len() != domain.dim() {
        return Err(Error::invalid("resolution must give one count per axis"));
    }
    if resolution.iter().any(|&r| r < 2) {
        return Err(Error::invalid("grid resolution must be at least 2 per axis"));
    }
    let mut grid = GridMeasure {
        domain,
        resolution: resolution.to_vec(),
        weights: Vec::new(),
    };
    let total_cells: usize = resolution.iter().product();
    let vol = grid.cell_volume();
    let mut weights: Vec<f64> = (0..total_cells)
        .map(|idx| density.eval(&grid.cell_center(idx)) * vol)
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    grid.weights = weights;
    Ok(grid)
}
