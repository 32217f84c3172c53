//! Weighted k-means on finitely supported measures.
//!
//! `F(z) = sum_i w_i min_j |x_i - z_j|²`, minimized by k-means++ seeding
//! followed by Lloyd iterations, best of several restarts.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::measure::WeightedPointSet;

#[derive(Debug, Clone, PartialEq)]
pub struct CenterSet {
    dim: usize,
    coords: Vec<f64>,
}

impl CenterSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.is_empty() || coords.len() % dim != 0 {
            return Err(Error::invalid("centers need a positive dimension and at least one center"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("centers must be finite"));
        }
        Ok(Self { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn center(&self, j: usize) -> &[f64] {
        &self.coords[j * self.dim..(j + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Index of the nearest center (lowest index on ties) and the squared distance.
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for j in 0..self.k() {
            let d = math::dist2(x, self.center(j));
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    }
}

/// Voronoi labels (0-based) and cluster masses.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    masses: Vec<f64>,
}

impl ClusterAssignment {
    pub fn from_labels(labels: Vec<usize>, weights: &[f64], k: usize) -> Result<Self> {
        if labels.len() != weights.len() || labels.iter().any(|l| *l >= k) {
            return Err(Error::invalid("labels must be in 0..k and match the support"));
        }
        let mut masses = vec![0.0; k];
        for (l, w) in labels.iter().zip(weights) {
            masses[*l] += w;
        }
        Ok(Self { labels, masses })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == cluster).collect()
    }

    /// The measure restricted to one cluster (not renormalized).
    pub fn restricted(&self, measure: &WeightedPointSet, cluster: usize) -> WeightedPointSet {
        measure.restrict(&self.members(cluster))
    }
}

/// `F(z) = sum_i w_i min_j |x_i - z_j|²`.
pub fn objective(measure: &WeightedPointSet, centers: &CenterSet) -> f64 {
    (0..measure.len()).map(|i| measure.weights()[i] * centers.nearest(measure.point(i)).1).sum()
}

pub fn assign(measure: &WeightedPointSet, centers: &CenterSet) -> ClusterAssignment {
    let labels = (0..measure.len()).map(|i| centers.nearest(measure.point(i)).0).collect();
    ClusterAssignment::from_labels(labels, measure.weights(), centers.k()).expect("labels are in range")
}

/// Mass of support points whose two nearest centers are within `rtol`
/// (relative to the squared distance) of each other.
pub fn tied_mass(measure: &WeightedPointSet, centers: &CenterSet, rtol: f64) -> f64 {
    let mut mass = 0.0;
    for i in 0..measure.len() {
        let x = measure.point(i);
        let mut d: Vec<f64> = (0..centers.k()).map(|j| math::dist2(x, centers.center(j))).collect();
        d.sort_by(f64::total_cmp);
        if d.len() > 1 && d[1] - d[0] <= rtol * d[1].max(f64::MIN_POSITIVE) {
            mass += measure.weights()[i];
        }
    }
    mass
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop when the objective decreases by less than this fraction.
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self { restarts: 20, max_iterations: 300, rel_tol: 1e-12, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centers: CenterSet,
    pub value: f64,
    /// Lloyd iterations of the winning restart.
    pub iterations: usize,
    /// Set when the support has fewer than `k` points; the centers then sit
    /// on the support (repeated as needed) and the value is 0.
    pub small_support: bool,
}

pub fn minimize(measure: &WeightedPointSet, k: usize, options: &KMeansOptions) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if options.restarts == 0 {
        return Err(Error::invalid("at least one restart is required"));
    }
    if measure.is_empty() {
        return Err(Error::invalid("cannot cluster an empty measure"));
    }
    let dim = measure.dim();
    let distinct = distinct_points(measure);
    if distinct.len() <= k {
        let mut coords = Vec::with_capacity(k * dim);
        for j in 0..k {
            coords.extend_from_slice(measure.point(distinct[j.min(distinct.len() - 1)]));
        }
        let centers = CenterSet::new(dim, coords)?;
        return Ok(KMeansResult { centers, value: 0.0, iterations: 0, small_support: distinct.len() < k });
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..options.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(r as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let init = kmeans_pp(measure, k, &mut rng)?;
        let (centers, _, iterations) = lloyd(measure, init, options.max_iterations, options.rel_tol)?;
        let moved = hartigan(measure, &centers);
        let (centers, value, more) = lloyd(measure, moved, options.max_iterations, options.rel_tol)?;
        let iterations = iterations + more;
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(KMeansResult { centers, value, iterations, small_support: false });
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Single-point transfer passes (Hartigan): moves a point to another cell
/// whenever that lowers the objective, with centroids updated in place.
/// Escapes many Lloyd fixed points that are not local minima over
/// partitions.
fn hartigan(measure: &WeightedPointSet, centers: &CenterSet) -> CenterSet {
    let dim = measure.dim();
    let k = centers.k();
    let w = measure.weights();
    let assignment = assign(measure, centers);
    let mut labels = assignment.labels;
    let mut mass = assignment.masses;
    let mut z = vec![0.0; k * dim];
    for (i, &l) in labels.iter().enumerate() {
        math::axpy(w[i], measure.point(i), &mut z[l * dim..(l + 1) * dim]);
    }
    for j in 0..k {
        if mass[j] > 0.0 {
            z[j * dim..(j + 1) * dim].iter_mut().for_each(|x| *x /= mass[j]);
        } else {
            z[j * dim..(j + 1) * dim].copy_from_slice(centers.center(j));
        }
    }
    for _ in 0..100 {
        let mut changed = false;
        for i in 0..measure.len() {
            let x = measure.point(i);
            let a = labels[i];
            let rest = mass[a] - w[i];
            if rest <= 1e-14 * mass[a] {
                continue;
            }
            let remove = w[i] * mass[a] / rest * math::dist2(x, &z[a * dim..(a + 1) * dim]);
            let mut target = None;
            let mut best = remove * (1.0 - 1e-12);
            for b in (0..k).filter(|&b| b != a) {
                let add = w[i] * mass[b] / (mass[b] + w[i]) * math::dist2(x, &z[b * dim..(b + 1) * dim]);
                if add < best {
                    best = add;
                    target = Some(b);
                }
            }
            if let Some(b) = target {
                for t in 0..dim {
                    z[a * dim + t] = (mass[a] * z[a * dim + t] - w[i] * x[t]) / rest;
                    z[b * dim + t] = (mass[b] * z[b * dim + t] + w[i] * x[t]) / (mass[b] + w[i]);
                }
                mass[a] = rest;
                mass[b] += w[i];
                labels[i] = b;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // recompute centroids exactly from the final partition
    let mut sums = vec![0.0; k * dim];
    let mut m = vec![0.0; k];
    for (i, &l) in labels.iter().enumerate() {
        math::axpy(w[i], measure.point(i), &mut sums[l * dim..(l + 1) * dim]);
        m[l] += w[i];
    }
    for j in 0..k {
        if m[j] > 0.0 {
            for t in 0..dim {
                z[j * dim + t] = sums[j * dim + t] / m[j];
            }
        }
    }
    CenterSet { dim, coords: z }
}

fn distinct_points(measure: &WeightedPointSet) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for i in 0..measure.len() {
        if !out.iter().any(|&j| measure.point(j) == measure.point(i)) {
            out.push(i);
            if out.len() > 64 {
                // plenty; only the comparison against k matters
                break;
            }
        }
    }
    out
}

/// Weighted k-means++ seeding: first center drawn proportionally to the
/// weights, later ones proportionally to `w_i D(x_i)²`.
pub fn kmeans_pp(measure: &WeightedPointSet, k: usize, rng: &mut ChaCha8Rng) -> Result<CenterSet> {
    let dim = measure.dim();
    let w = measure.weights();
    let mut coords = Vec::with_capacity(k * dim);
    let first = draw(w, rng);
    coords.extend_from_slice(measure.point(first));
    let mut d2: Vec<f64> = (0..measure.len()).map(|i| math::dist2(measure.point(i), measure.point(first))).collect();
    for _ in 1..k {
        let scores: Vec<f64> = d2.iter().zip(w).map(|(d, w)| d * w).collect();
        let next = if scores.iter().sum::<f64>() > 0.0 { draw(&scores, rng) } else { draw(w, rng) };
        let c = measure.point(next).to_vec();
        for (i, di) in d2.iter_mut().enumerate() {
            *di = di.min(math::dist2(measure.point(i), &c));
        }
        coords.extend_from_slice(&c);
    }
    CenterSet::new(dim, coords)
}

fn draw(scores: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = scores.iter().sum();
    let mut t = rng.random::<f64>() * total;
    for (i, s) in scores.iter().enumerate() {
        t -= s;
        if t < 0.0 {
            return i;
        }
    }
    scores.iter().rposition(|s| *s > 0.0).unwrap_or(0)
}

/// Lloyd iterations from `centers`. Returns the final centers, objective
/// and iteration count. The objective is checked to be non-increasing at
/// every step.
pub fn lloyd(
    measure: &WeightedPointSet,
    mut centers: CenterSet,
    max_iterations: usize,
    rel_tol: f64,
) -> Result<(CenterSet, f64, usize)> {
    let dim = measure.dim();
    let k = centers.k();
    let w = measure.weights();
    let mut value = objective(measure, &centers);
    // rounding slack for objectives near zero
    let scale: f64 = (0..measure.len()).map(|i| w[i] * math::dot(measure.point(i), measure.point(i))).sum();
    let slack = 1e-12 * scale + 1e-300;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let assignment = assign(measure, &centers);
        let mut sums = vec![0.0; k * dim];
        for (i, &l) in assignment.labels.iter().enumerate() {
            math::axpy(w[i], measure.point(i), &mut sums[l * dim..(l + 1) * dim]);
        }
        let mut coords = centers.coords.clone();
        for j in 0..k {
            let m = assignment.masses[j];
            if m > 0.0 {
                for a in 0..dim {
                    coords[j * dim + a] = sums[j * dim + a] / m;
                }
            }
        }
        let mut next = CenterSet { dim, coords };
        repair_empty(measure, &mut next, &assignment);
        let new_value = objective(measure, &next);
        if new_value > value * (1.0 + 1e-12) + slack {
            return Err(Error::Internal(alloc::format!(
                "Lloyd step increased the objective from {value} to {new_value}"
            )));
        }
        let decrease = value - new_value;
        centers = next;
        value = new_value;
        if decrease <= rel_tol * value.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok((centers, value, iterations))
}

/// Moves every empty center onto the support point with the largest
/// contribution to the objective.
fn repair_empty(measure: &WeightedPointSet, centers: &mut CenterSet, assignment: &ClusterAssignment) {
    let dim = centers.dim;
    for j in 0..centers.k() {
        if assignment.masses[j] > 0.0 {
            continue;
        }
        let mut worst = (0, -1.0);
        for i in 0..measure.len() {
            let c = measure.weights()[i] * centers.nearest(measure.point(i)).1;
            if c > worst.1 {
                worst = (i, c);
            }
        }
        let p = measure.point(worst.0).to_vec();
        centers.coords[j * dim..(j + 1) * dim].copy_from_slice(&p);
    }
}

/// `|z_j - centroid(mu restricted to V_j)|`; `None` for empty cells.
pub fn centroid_residuals(measure: &WeightedPointSet, centers: &CenterSet) -> Vec<Option<f64>> {
    let assignment = assign(measure, centers);
    (0..centers.k())
        .map(|j| {
            if assignment.masses[j] <= 0.0 {
                return None;
            }
            let cell = assignment.restricted(measure, j);
            let c = cell.centroid();
            Some(math::sqrt(math::dist2(&c, centers.center(j))))
        })
        .collect()
}

/// Both sides of `|F_mu(z) - F_nu(z)| <= d2 (2 min(√F_mu, √F_nu) + d2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn stability_check(mu: &WeightedPointSet, nu: &WeightedPointSet, centers: &CenterSet, d2: f64) -> StabilityReport {
    let fm = objective(mu, centers);
    let fn_ = objective(nu, centers);
    let lhs = (fm - fn_).abs();
    let rhs = d2 * (2.0 * math::sqrt(fm).min(math::sqrt(fn_)) + d2);
    StabilityReport { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-9) + 1e-15 }
}
