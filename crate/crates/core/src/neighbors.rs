//! Uniform cell grid for fixed-radius neighbor queries in up to three
//! dimensions. Cells have side at least the query radius, so a query only
//! visits the 3^d cells around the query point.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

pub(crate) struct CellGrid<'a> {
    points: &'a [f64],
    dim: usize,
    cell: f64,
    origin: [f64; 3],
    shape: [usize; 3],
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> CellGrid<'a> {
    /// `points` is row-major with `dim <= 3`; `radius` the largest radius
    /// that will be queried.
    pub(crate) fn new(points: &'a [f64], dim: usize, radius: f64) -> Self {
        assert!((1..=3).contains(&dim), "cell grid supports dimensions 1 to 3");
        let n = points.len() / dim;
        let mut lo = [0.0f64; 3];
        let mut hi = [0.0f64; 3];
        for axis in 0..dim {
            lo[axis] = f64::INFINITY;
            hi[axis] = f64::NEG_INFINITY;
        }
        for i in 0..n {
            for axis in 0..dim {
                let v = points[i * dim + axis];
                lo[axis] = lo[axis].min(v);
                hi[axis] = hi[axis].max(v);
            }
        }
        // keep the table at most ~4n cells; larger cells stay correct
        let max_cells = (4 * n).max(64) as f64;
        let mut cell = radius.max(1e-300);
        loop {
            let cells: f64 = (0..dim).map(|a| math::floor((hi[a] - lo[a]) / cell) + 1.0).product();
            if cells <= max_cells {
                break;
            }
            cell *= 2.0;
        }
        let mut shape = [1usize; 3];
        for axis in 0..dim {
            shape[axis] = (math::floor((hi[axis] - lo[axis]) / cell) as usize) + 1;
        }
        let total = shape[0] * shape[1] * shape[2];
        let mut grid = Self {
            points,
            dim,
            cell,
            origin: lo,
            shape,
            starts: vec![0; total + 1],
            order: vec![0; n],
        };
        let keys: Vec<usize> = (0..n).map(|i| grid.key(&grid.coords_of(grid.point(i)))).collect();
        for &k in &keys {
            grid.starts[k + 1] += 1;
        }
        for c in 0..total {
            grid.starts[c + 1] += grid.starts[c];
        }
        let mut cursor = grid.starts.clone();
        for (i, &k) in keys.iter().enumerate() {
            grid.order[cursor[k]] = i;
            cursor[k] += 1;
        }
        grid
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn coords_of(&self, x: &[f64]) -> [i64; 3] {
        let mut c = [0i64; 3];
        for axis in 0..self.dim {
            c[axis] = math::floor((x[axis] - self.origin[axis]) / self.cell) as i64;
        }
        c
    }

    fn key(&self, c: &[i64; 3]) -> usize {
        (c[0] as usize) + self.shape[0] * ((c[1] as usize) + self.shape[1] * (c[2] as usize))
    }

    /// Appends every `(j, |x - x_j|²)` with `|x - x_j|² <= r2`, sorted by `j`.
    pub(crate) fn query(&self, x: &[f64], r2: f64, out: &mut Vec<(usize, f64)>) {
        let start = out.len();
        let c = self.coords_of(x);
        let reach = math::ceil(math::sqrt(r2) / self.cell).max(1.0) as i64;
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for axis in 0..3 {
            if axis < self.dim {
                lo[axis] = (c[axis] - reach).max(0);
                hi[axis] = (c[axis] + reach).min(self.shape[axis] as i64 - 1);
            }
        }
        for cz in lo[2]..=hi[2] {
            for cy in lo[1]..=hi[1] {
                for cx in lo[0]..=hi[0] {
                    let k = self.key(&[cx, cy, cz]);
                    for &j in &self.order[self.starts[k]..self.starts[k + 1]] {
                        let d2 = math::dist2(x, self.point(j));
                        if d2 <= r2 {
                            out.push((j, d2));
                        }
                    }
                }
            }
        }
        out[start..].sort_by_key(|e| e.0);
    }
}
