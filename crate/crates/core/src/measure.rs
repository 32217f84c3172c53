//! Finitely supported weighted point sets, the common currency of the
//! k-means and transport modules.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// `m` atoms in `R^dim` with positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPointSet {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedPointSet {
    /// Builds a point set from row-major coordinates. Weights must be
    /// nonnegative with a positive total; they are renormalized to sum to one
    /// and zero-weight atoms are dropped.
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("point dimension must be positive"));
        }
        if points.len() != dim * weights.len() {
            return Err(Error::invalid("coordinate buffer does not match weight count"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("coordinates must be finite"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("total weight must be positive"));
        }
        let mut p = Vec::with_capacity(points.len());
        let mut w = Vec::with_capacity(weights.len());
        for (i, &wi) in weights.iter().enumerate() {
            if wi > 0.0 {
                p.extend_from_slice(&points[i * dim..(i + 1) * dim]);
                w.push(wi / total);
            }
        }
        Ok(Self { dim, points: p, weights: w })
    }

    /// Uniform weights `1/m`.
    pub fn uniform(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.len() % dim != 0 || points.is_empty() {
            return Err(Error::invalid("coordinate buffer must hold at least one point"));
        }
        let m = points.len() / dim;
        Self::new(dim, points, alloc::vec![1.0 / m as f64; m])
    }

    /// Builds a set whose weights are used as given (no renormalization,
    /// zero weights kept). Used for restricted measures whose mass is < 1.
    pub fn raw(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(points.len(), dim * weights.len());
        Self { dim, points, weights }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weighted centroid.
    pub fn centroid(&self) -> Vec<f64> {
        let mut c = alloc::vec![0.0; self.dim];
        let total = self.total_mass();
        for (i, w) in self.weights.iter().enumerate() {
            for (ck, xk) in c.iter_mut().zip(self.point(i)) {
                *ck += w * xk;
            }
        }
        for ck in &mut c {
            *ck /= total;
        }
        c
    }

    /// Same atoms rescaled to unit total mass.
    pub fn normalized(&self) -> Result<Self> {
        Self::new(self.dim, self.points.clone(), self.weights.clone())
    }

    /// Atoms with the given indices, keeping their original weights.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        let mut p = Vec::with_capacity(indices.len() * self.dim);
        let mut w = Vec::with_capacity(indices.len());
        for &i in indices {
            p.extend_from_slice(self.point(i));
            w.push(self.weights[i]);
        }
        Self::raw(self.dim, p, w)
    }
}
