//! Exact optimal transport between finitely supported measures.
//!
//! The solver is a primal network simplex on the complete bipartite graph
//! with a block-search pivot rule and a strongly feasible spanning tree
//! (thread/successor representation). Arc costs are rounded to integers at
//! `1e-12` of the largest cost so that reduced costs are exact; flows are
//! real. The reported cost is re-evaluated with the unrounded costs.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::GridMeasure;
use crate::math;
use crate::measure::WeightedPointSet;
use crate::neighbors::CellGrid;

/// Largest support per side handled by the exact solver by default.
pub const DEFAULT_MAX_SUPPORT: usize = 3000;

const COST_RESOLUTION: f64 = 1e12;
const BALANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransportOptions {
    pub max_support: usize,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self { max_support: DEFAULT_MAX_SUPPORT }
    }
}

/// A coupling stored as its nonzero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// `(i, j, mass)` with `i` indexing the source and `j` the target.
    pub entries: Vec<(usize, usize, f64)>,
    /// `sum mass * cost(i, j)` with unrounded costs.
    pub cost: f64,
    source_len: usize,
    target_len: usize,
}

impl TransportPlan {
    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn target_len(&self) -> usize {
        self.target_len
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.source_len];
        for &(i, _, m) in &self.entries {
            r[i] += m;
        }
        r
    }

    pub fn column_marginal(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.target_len];
        for &(_, j, m) in &self.entries {
            c[j] += m;
        }
        c
    }

    /// Largest marginal violation against the given weights.
    pub fn marginal_error(&self, source: &[f64], target: &[f64]) -> f64 {
        let r = self.row_marginal();
        let c = self.column_marginal();
        let e1 = r.iter().zip(source).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let e2 = c.iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        e1.max(e2)
    }
}

/// Optimal flows and a dual certificate.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub plan: TransportPlan,
    /// Node potentials (sources first, then targets) for the rounded costs;
    /// `c_ij + u_i - v_j >= 0` with equality on the support of the plan.
    pub potentials: Vec<i64>,
    /// The rounded integer costs, row-major.
    pub int_costs: Vec<i64>,
    pub pivots: usize,
}

/// Exact min-cost transport for supplies `a`, demands `b` and the cost
/// function `cost(i, j)`. Totals must agree to `1e-9`.
pub fn solve_transport<F: Fn(usize, usize) -> f64>(a: &[f64], b: &[f64], cost: F) -> Result<TransportSolution> {
    let m = a.len();
    let n = b.len();
    if m == 0 || n == 0 {
        return Err(Error::invalid("transport needs two nonempty measures"));
    }
    if a.iter().chain(b).any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("transport masses must be finite and nonnegative"));
    }
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (sa - sb).abs() > BALANCE_TOL * sa.max(sb).max(1.0) {
        return Err(Error::invalid(alloc::format!("unbalanced transport problem: {sa} vs {sb}")));
    }
    let mut real = Vec::with_capacity(m * n);
    let mut cmax = 0.0f64;
    for i in 0..m {
        for j in 0..n {
            let c = cost(i, j);
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::invalid("costs must be finite and nonnegative"));
            }
            cmax = cmax.max(c);
            real.push(c);
        }
    }
    let scale = if cmax > 0.0 { COST_RESOLUTION / cmax } else { 0.0 };
    let int_costs: Vec<i64> = real.iter().map(|c| math::round(c * scale) as i64).collect();
    let mut ns = Simplex::new(a, b, &int_costs);
    let pivots = ns.run();
    // artificial arcs may only carry rounding residue of the supplies
    let residue: f64 = ns.flow[m * n..].iter().map(|f| f.abs()).sum();
    if residue > BALANCE_TOL * sa.max(1.0) {
        return Err(Error::Internal(alloc::format!("transport solver left {residue} mass on artificial arcs")));
    }
    let mut entries = Vec::new();
    let mut total = 0.0;
    for (e, &f) in ns.flow[..m * n].iter().enumerate() {
        if f > 0.0 {
            entries.push((e / n, e % n, f));
            total += f * real[e];
        }
    }
    let root_pi = ns.pi[m + n];
    let potentials = ns.pi[..m + n].iter().map(|p| p - root_pi).collect();
    Ok(TransportSolution {
        plan: TransportPlan { entries, cost: total, source_len: m, target_len: n },
        potentials,
        int_costs,
        pivots,
    })
}

const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;

/// Uncapacitated network simplex on `m` sources, `n` sinks and a root.
struct Simplex<'a> {
    m: usize,
    n: usize,
    costs: &'a [i64],
    art_cost: i64,
    /// artificial arc `m*n + u` runs `u -> root` when `art_up[u]`
    art_up: Vec<bool>,
    flow: Vec<f64>,
    state: Vec<i8>,
    pi: Vec<i64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    dirty_revs: Vec<usize>,
    block_size: usize,
    next_arc: usize,
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
}

const NONE: usize = usize::MAX;

impl<'a> Simplex<'a> {
    fn new(a: &[f64], b: &[f64], costs: &'a [i64]) -> Self {
        let (m, n) = (a.len(), b.len());
        let nodes = m + n;
        let arcs = m * n;
        let root = nodes;
        let max_cost = costs.iter().copied().max().unwrap_or(0);
        let art_cost = (max_cost + 1) * (nodes as i64 + 1);
        let mut s = Self {
            m,
            n,
            costs,
            art_cost,
            art_up: vec![true; nodes],
            flow: vec![0.0; arcs + nodes],
            state: vec![STATE_LOWER; arcs + nodes],
            pi: vec![0; nodes + 1],
            parent: vec![NONE; nodes + 1],
            pred: vec![NONE; nodes + 1],
            pred_dir: vec![DIR_UP; nodes + 1],
            thread: vec![0; nodes + 1],
            rev_thread: vec![0; nodes + 1],
            succ_num: vec![1; nodes + 1],
            last_succ: vec![0; nodes + 1],
            dirty_revs: Vec::new(),
            block_size: (math::sqrt(arcs as f64) as usize).max(10),
            next_arc: 0,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
        };
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = nodes + 1;
        s.last_succ[root] = root - 1;
        for u in 0..nodes {
            let e = arcs + u;
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            s.state[e] = STATE_TREE;
            let supply = if u < m { a[u] } else { -b[u - m] };
            if supply >= 0.0 {
                s.pred_dir[u] = DIR_UP;
                s.pi[u] = 0;
                s.art_up[u] = true;
                s.flow[e] = supply;
            } else {
                s.pred_dir[u] = DIR_DOWN;
                s.pi[u] = art_cost;
                s.art_up[u] = false;
                s.flow[e] = -supply;
            }
        }
        s
    }

    #[inline]
    fn source(&self, e: usize) -> usize {
        let arcs = self.m * self.n;
        if e < arcs {
            e / self.n
        } else if self.art_up[e - arcs] {
            e - arcs
        } else {
            self.m + self.n
        }
    }

    #[inline]
    fn target(&self, e: usize) -> usize {
        let arcs = self.m * self.n;
        if e < arcs {
            self.m + e % self.n
        } else if self.art_up[e - arcs] {
            self.m + self.n
        } else {
            e - arcs
        }
    }

    #[inline]
    fn cost(&self, e: usize) -> i64 {
        let arcs = self.m * self.n;
        if e < arcs {
            self.costs[e]
        } else if self.art_up[e - arcs] {
            0
        } else {
            self.art_cost
        }
    }

    fn run(&mut self) -> usize {
        let mut pivots = 0;
        while self.find_entering_arc() {
            self.find_join_node();
            let change = self.find_leaving_arc();
            self.change_flow(change);
            if change {
                self.update_tree_structure();
                self.update_potential();
            }
            pivots += 1;
        }
        pivots
    }

    fn find_entering_arc(&mut self) -> bool {
        let arcs = self.m * self.n;
        let n = self.n;
        let m = self.m;
        let mut min = 0i64;
        let mut cnt = self.block_size;
        let mut e = self.next_arc;
        for _ in 0..arcs {
            let c = self.state[e] as i64 * (self.costs[e] + self.pi[e / n] - self.pi[m + e % n]);
            if c < min {
                min = c;
                self.in_arc = e;
            }
            e += 1;
            if e == arcs {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if min < 0 {
                    self.next_arc = e;
                    return true;
                }
                cnt = self.block_size;
            }
        }
        if min < 0 {
            self.next_arc = e;
            return true;
        }
        false
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// Returns whether the tree changes (always, since arcs are uncapacitated).
    fn find_leaving_arc(&mut self) -> bool {
        let (first, second) = (self.source(self.in_arc), self.target(self.in_arc));
        let mut delta = f64::INFINITY;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == DIR_UP {
                let d = self.flow[self.pred[u]];
                if d < delta {
                    delta = d;
                    self.u_out = u;
                    result = 1;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            if self.pred_dir[u] == DIR_DOWN {
                let d = self.flow[self.pred[u]];
                if d <= delta {
                    delta = d;
                    self.u_out = u;
                    result = 2;
                }
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        self.delta = delta;
        result != 0
    }

    fn change_flow(&mut self, change: bool) {
        let val = self.delta;
        if val > 0.0 {
            let e_in = self.in_arc;
            self.flow[e_in] += val;
            let mut u = self.source(e_in);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
            let mut u = self.target(e_in);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
        }
        if change {
            self.state[self.in_arc] = STATE_TREE;
            let out = self.pred[self.u_out];
            // the blocking arc is emptied exactly
            self.flow[out] = 0.0;
            self.state[out] = STATE_LOWER;
        }
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let in_arc = self.in_arc;
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];
        let in_dir = if u_in == self.source(in_arc) { DIR_UP } else { DIR_DOWN };

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = in_dir;
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in { self.thread[old_last_succ] } else { self.thread[v_in] };
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);
                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;
                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;
                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;
            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }
            for i in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[i];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }
            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc = tmp_sc.wrapping_add(self.succ_num[u]).wrapping_sub(self.succ_num[p]);
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = in_dir;
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }
        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && u != NONE && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && u != NONE && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }
        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in] - self.pi[u_in] - self.pred_dir[u_in] as i64 * self.cost(self.in_arc);
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }
}

fn check_budget(m: usize, n: usize, options: &TransportOptions) -> Result<()> {
    if m > options.max_support || n > options.max_support {
        return Err(Error::Resource(alloc::format!(
            "exact transport limited to {} atoms per side (got {m} and {n}); coarsen with grid_discretize",
            options.max_support
        )));
    }
    Ok(())
}

/// `d_2(mu, theta)` and an optimal plan.
pub fn wasserstein2(mu: &WeightedPointSet, theta: &WeightedPointSet) -> Result<(f64, TransportPlan)> {
    wasserstein2_with(mu, theta, &TransportOptions::default())
}

pub fn wasserstein2_with(mu: &WeightedPointSet, theta: &WeightedPointSet, options: &TransportOptions) -> Result<(f64, TransportPlan)> {
    if mu.dim() != theta.dim() {
        return Err(Error::invalid("measures live in different dimensions"));
    }
    check_budget(mu.len(), theta.len(), options)?;
    let sol = solve_transport(mu.weights(), theta.weights(), |i, j| math::dist2(mu.point(i), theta.point(j)))?;
    Ok((math::sqrt(sol.plan.cost.max(0.0)), sol.plan))
}

/// TL² distance between `(mu, f)` and `(theta, g)`: transport with cost
/// `|x - y|² + |f(x) - g(y)|²`. Function values may be vector valued
/// (`f.len()` a multiple of the support size).
pub fn tl2_distance(mu: &WeightedPointSet, f: &[f64], theta: &WeightedPointSet, g: &[f64]) -> Result<(f64, TransportPlan)> {
    tl2_distance_with(mu, f, theta, g, &TransportOptions::default())
}

pub fn tl2_distance_with(
    mu: &WeightedPointSet,
    f: &[f64],
    theta: &WeightedPointSet,
    g: &[f64],
    options: &TransportOptions,
) -> Result<(f64, TransportPlan)> {
    if mu.dim() != theta.dim() {
        return Err(Error::invalid("measures live in different dimensions"));
    }
    if mu.is_empty() || theta.is_empty() || f.len() % mu.len() != 0 || f.len() / mu.len() != g.len() / theta.len().max(1) || g.len() % theta.len() != 0 {
        return Err(Error::invalid("function values must be conformal with the supports"));
    }
    check_budget(mu.len(), theta.len(), options)?;
    let p = f.len() / mu.len();
    let sol = solve_transport(mu.weights(), theta.weights(), |i, j| {
        math::dist2(mu.point(i), theta.point(j)) + math::dist2(&f[i * p..(i + 1) * p], &g[j * p..(j + 1) * p])
    })?;
    Ok((math::sqrt(sol.plan.cost.max(0.0)), sol.plan))
}

/// `T_# mu` for a map given by its values at the support (`dim_out` numbers
/// per atom). Coincident images are merged; weights are kept as given.
pub fn pushforward(measure: &WeightedPointSet, images: &[f64], dim_out: usize) -> Result<WeightedPointSet> {
    if dim_out == 0 || images.len() != measure.len() * dim_out {
        return Err(Error::invalid("map values must give one image per atom"));
    }
    let img = |i: usize| &images[i * dim_out..(i + 1) * dim_out];
    let mut order: Vec<usize> = (0..measure.len()).collect();
    order.sort_by(|&a, &b| {
        img(a).iter().zip(img(b)).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(core::cmp::Ordering::Equal)
    });
    let mut points = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut prev: Option<usize> = None;
    for &i in &order {
        match prev {
            Some(p) if img(p) == img(i) => *weights.last_mut().unwrap() += measure.weights()[i],
            _ => {
                points.extend_from_slice(img(i));
                weights.push(measure.weights()[i]);
            }
        }
        prev = Some(i);
    }
    Ok(WeightedPointSet::raw(dim_out, points, weights))
}

/// Grid atoms of mass `1/n` (largest-remainder rounding of the cell masses)
/// matched to `n` sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportMap {
    /// Atom locations (cell centers, repeated by multiplicity), row-major.
    pub atoms: Vec<f64>,
    /// Grid cell of each atom.
    pub cells: Vec<usize>,
    /// Sample index assigned to each atom.
    pub targets: Vec<usize>,
    pub dim: usize,
    /// `max_a |atom_a - x_{T(a)}|`.
    pub sup_displacement: f64,
}

impl TransportMap {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn atom(&self, a: usize) -> &[f64] {
        &self.atoms[a * self.dim..(a + 1) * self.dim]
    }

    /// The quantized grid measure as a point set with weights `1/n`.
    pub fn source_measure(&self) -> WeightedPointSet {
        let n = self.len();
        WeightedPointSet::raw(self.dim, self.atoms.clone(), vec![1.0 / n as f64; n])
    }
}

/// Cell counts summing to `n`, proportional to the grid weights.
pub fn quantize(weights: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| math::floor(*x) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - math::floor(exact[b])).total_cmp(&(exact[a] - math::floor(exact[a]))).then(a.cmp(&b)));
    for &c in order.iter().take(n.saturating_sub(assigned)) {
        counts[c] += 1;
    }
    counts
}

/// Per-axis resolution with at least `n` cells in total, as close to
/// isotropic as possible and with exactly `n` cells when `n` factors well.
pub fn matching_resolution(n: usize, d: usize) -> Vec<usize> {
    let side = math::powf(n as f64, 1.0 / d as f64);
    if d == 1 {
        return vec![n];
    }
    if d == 2 {
        let mut best: Option<(usize, usize)> = None;
        for a in 1..=n {
            if a * a > n {
                break;
            }
            if n % a == 0 {
                best = Some((a, n / a));
            }
        }
        if let Some((a, b)) = best {
            if b <= 2 * a.max(1) {
                return vec![a, b];
            }
        }
        let s = math::ceil(side) as usize;
        return vec![s, s];
    }
    let s = math::ceil(side - 1e-9) as usize;
    vec![s; d]
}

/// Bottleneck assignment between the quantized grid and the sample: the
/// largest displacement is minimized by bisection on the threshold plus a
/// maximum-matching feasibility test.
pub fn infinity_matching(grid: &GridMeasure, sample: &WeightedPointSet) -> Result<TransportMap> {
    let n = sample.len();
    let d = grid.domain().dim();
    if sample.dim() != d {
        return Err(Error::invalid("grid and sample dimensions differ"));
    }
    if grid.len() < n {
        return Err(Error::invalid("the grid needs at least as many cells as sample points"));
    }
    let counts = quantize(grid.weights(), n);
    let mut atoms = Vec::with_capacity(n * d);
    let mut cells = Vec::with_capacity(n);
    for (c, &k) in counts.iter().enumerate() {
        let center = grid.cell_center(c);
        for _ in 0..k {
            atoms.extend_from_slice(&center);
            cells.push(c);
        }
    }
    if cells.len() != n {
        return Err(Error::Internal("quantized grid mass does not match the sample size".into()));
    }
    let pts = sample.points();
    let matching_at = |t: f64| -> Option<Vec<usize>> {
        let cg = CellGrid::new(pts, d, t);
        let mut adj: Vec<Vec<usize>> = Vec::with_capacity(n);
        let mut buf = Vec::new();
        for a in 0..n {
            buf.clear();
            cg.query(&atoms[a * d..(a + 1) * d], t * t, &mut buf);
            if buf.is_empty() {
                return None;
            }
            adj.push(buf.iter().map(|e| e.0).collect());
        }
        hopcroft_karp(n, n, &adj)
    };
    // grow until feasible, then bisect
    let spacing = (0..d).map(|a| grid.spacing(a)).fold(0.0, f64::max);
    let mut hi = spacing.max(1e-12);
    let mut lo = 0.0;
    let diameter = grid.domain().diameter() * 2.0 + 1.0;
    let mut best = loop {
        if let Some(mt) = matching_at(hi) {
            break mt;
        }
        lo = hi;
        hi *= 2.0;
        if hi > diameter {
            return Err(Error::Internal("no perfect matching at any threshold".into()));
        }
    };
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match matching_at(mid) {
            Some(mt) => {
                hi = mid;
                best = mt;
            }
            None => lo = mid,
        }
    }
    let disp = |a: usize, j: usize| math::sqrt(math::dist2(&atoms[a * d..(a + 1) * d], sample.point(j)));
    let sup = (0..n).map(|a| disp(a, best[a])).fold(0.0, f64::max);
    Ok(TransportMap { atoms, cells, targets: best, dim: d, sup_displacement: sup })
}

/// Maximum bipartite matching; returns the partner of every left vertex if
/// the matching is perfect.
pub fn hopcroft_karp(left: usize, right: usize, adj: &[Vec<usize>]) -> Option<Vec<usize>> {
    const FREE: usize = usize::MAX;
    let mut match_l = vec![FREE; left];
    let mut match_r = vec![FREE; right];
    let mut dist = vec![0usize; left];
    let mut queue = Vec::with_capacity(left);
    let mut matched = 0;
    loop {
        // BFS layering from free left vertices
        queue.clear();
        for u in 0..left {
            if match_l[u] == FREE {
                dist[u] = 0;
                queue.push(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for &v in &adj[u] {
                let w = match_r[v];
                if w == FREE {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push(w);
                }
            }
        }
        if !found {
            break;
        }
        // iterative DFS along the layers
        let mut it = vec![0usize; left];
        for s in 0..left {
            if match_l[s] != FREE {
                continue;
            }
            let mut stack = vec![s];
            while let Some(&u) = stack.last() {
                if it[u] < adj[u].len() {
                    let v = adj[u][it[u]];
                    it[u] += 1;
                    let w = match_r[v];
                    if w == FREE {
                        // augment along the stack
                        let mut v = v;
                        while let Some(x) = stack.pop() {
                            let prev = match_l[x];
                            match_l[x] = v;
                            match_r[v] = x;
                            v = prev;
                        }
                        matched += 1;
                        break;
                    } else if dist[w] == dist[u] + 1 {
                        stack.push(w);
                    }
                } else {
                    dist[u] = usize::MAX;
                    stack.pop();
                }
            }
        }
    }
    if matched == left {
        Some(match_l)
    } else {
        None
    }
}

/// Coupling cost of the map: `sqrt(sum_a (1/n)(|atom_a - x_T(a)|² + |f(cell_a) - g(T(a))|²))`,
/// an upper bound on the exact TL² distance between the quantized grid
/// measure with `f` and the sample with `g`. `f` has one value per grid cell.
pub fn tl2_via_map(map: &TransportMap, f: &[f64], g: &[f64], sample: &WeightedPointSet) -> Result<f64> {
    let n = map.len();
    if g.len() % sample.len() != 0 || n == 0 {
        return Err(Error::invalid("node values must be conformal with the sample"));
    }
    let p = g.len() / sample.len();
    let cells = f.len() / p;
    if f.len() % p != 0 || map.cells.iter().any(|&c| c >= cells) {
        return Err(Error::invalid("grid values must be conformal with the grid"));
    }
    let mut total = 0.0;
    for a in 0..n {
        let (c, j) = (map.cells[a], map.targets[a]);
        total += math::dist2(map.atom(a), sample.point(j)) + math::dist2(&f[c * p..(c + 1) * p], &g[j * p..(j + 1) * p]);
    }
    Ok(math::sqrt(total / n as f64))
}

/// Minimum-cost perfect assignment on a square `k x k` cost matrix
/// (row-major). Returns the column of each row and the total cost.
pub fn hungarian(k: usize, cost: &[f64]) -> Result<(Vec<usize>, f64)> {
    if cost.len() != k * k || k == 0 {
        return Err(Error::invalid("cost matrix must be k x k with k >= 1"));
    }
    // potentials formulation with 1-based sentinel column
    let inf = f64::INFINITY;
    let mut u = vec![0.0; k + 1];
    let mut v = vec![0.0; k + 1];
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=k {
                if !used[j] {
                    let cur = cost[(i0 - 1) * k + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; k];
    for j in 1..=k {
        assignment[p[j] - 1] = j - 1;
    }
    let total = (0..k).map(|i| cost[i * k + assignment[i]]).sum();
    Ok((assignment, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{grid_discretize, DensityField, Domain};
    use rand::{Rng, SeedableRng};

    fn line(points: &[f64], weights: &[f64]) -> WeightedPointSet {
        WeightedPointSet::new(1, points.to_vec(), weights.to_vec()).unwrap()
    }

    #[test]
    fn small_distances() {
        let mu = line(&[0.0, 2.0], &[0.5, 0.5]);
        let th = line(&[1.0, 3.0], &[0.5, 0.5]);
        let (d, plan) = wasserstein2(&mu, &th).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        assert!(plan.marginal_error(mu.weights(), th.weights()) < 1e-12);
        assert_eq!(wasserstein2(&mu, &mu).unwrap().0, 0.0);
        let (d, _) = wasserstein2(&line(&[0.3], &[1.0]), &line(&[1.1], &[1.0])).unwrap();
        assert!((d - 0.8).abs() < 1e-12);
        let (d, _) = tl2_distance(&line(&[0.0], &[1.0]), &[1.0], &line(&[3.0], &[1.0]), &[5.0]).unwrap();
        assert!((d - 5.0).abs() < 1e-12);
    }

    /// Checks primal feasibility and the dual certificate on the rounded costs.
    fn certify(a: &[f64], b: &[f64], sol: &TransportSolution) {
        let (m, n) = (a.len(), b.len());
        assert!(sol.plan.marginal_error(a, b) < 1e-9);
        let pi = &sol.potentials;
        let mut support = vec![false; m * n];
        for &(i, j, _) in &sol.plan.entries {
            support[i * n + j] = true;
        }
        for i in 0..m {
            for j in 0..n {
                let rc = sol.int_costs[i * n + j] + pi[i] - pi[m + j];
                assert!(rc >= 0, "negative reduced cost {rc}");
                if support[i * n + j] {
                    assert_eq!(rc, 0);
                }
            }
        }
    }

    #[test]
    fn random_instances_certified() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for trial in 0..200 {
            let m = 1 + rng.random_range(0..30);
            let n = 1 + rng.random_range(0..30);
            let mut a: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + if trial % 3 == 0 { 0.0 } else { 0.1 }).collect();
            let mut b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
            let sa: f64 = a.iter().sum();
            let sb: f64 = b.iter().sum();
            a.iter_mut().for_each(|x| *x /= sa);
            b.iter_mut().for_each(|x| *x /= sb);
            let xs: Vec<f64> = (0..m * 2).map(|_| rng.random()).collect();
            let ys: Vec<f64> = (0..n * 2).map(|_| rng.random()).collect();
            let sol = solve_transport(&a, &b, |i, j| math::dist2(&xs[2 * i..2 * i + 2], &ys[2 * j..2 * j + 2])).unwrap();
            certify(&a, &b, &sol);
        }
    }

    #[test]
    fn uniform_assignment_matches_permutations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let k = 5;
            let xs: Vec<f64> = (0..k).map(|_| rng.random()).collect();
            let ys: Vec<f64> = (0..k).map(|_| rng.random()).collect();
            let c = |i: usize, j: usize| (xs[i] - ys[j]) * (xs[i] - ys[j]);
            let sol = solve_transport(&[0.2; 5], &[0.2; 5], c).unwrap();
            let mut best = f64::INFINITY;
            let mut perm = [0, 1, 2, 3, 4];
            permutations(&mut perm, 0, &mut |p| {
                best = best.min(p.iter().enumerate().map(|(i, &j)| 0.2 * c(i, j)).sum());
            });
            assert!((sol.plan.cost - best).abs() < 1e-12, "{} vs {best}", sol.plan.cost);
            let cm: Vec<f64> = (0..25).map(|e| c(e / 5, e % 5)).collect();
            let (_, h) = hungarian(5, &cm).unwrap();
            assert!((0.2 * h - best).abs() < 1e-12);
        }
    }

    fn permutations(p: &mut [usize; 5], at: usize, f: &mut dyn FnMut(&[usize; 5])) {
        if at == p.len() {
            f(p);
            return;
        }
        for i in at..p.len() {
            p.swap(at, i);
            permutations(p, at + 1, f);
            p.swap(at, i);
        }
    }

    #[test]
    fn unbalanced_and_budget_errors() {
        assert!(solve_transport(&[1.0], &[0.5], |_, _| 0.0).is_err());
        let big = WeightedPointSet::uniform(1, vec![0.0; 3001]).unwrap();
        let small = line(&[0.0], &[1.0]);
        assert!(matches!(wasserstein2(&big, &small), Err(Error::Resource(_))));
    }

    #[test]
    fn pushforward_merges() {
        let mu = line(&[0.0, 1.0, 2.0], &[0.2, 0.3, 0.5]);
        let one = pushforward(&mu, &[7.0, 7.0, 7.0], 1).unwrap();
        assert_eq!(one.len(), 1);
        assert!((one.weights()[0] - 1.0).abs() < 1e-15);
        let id = pushforward(&mu, mu.points(), 1).unwrap();
        assert_eq!(id, mu);
    }

    #[test]
    fn matching_on_a_line() {
        let dom = Domain::unit(1).unwrap();
        let grid = grid_discretize(&DensityField::uniform(dom), &[2]).unwrap();
        // cell centers are 0.25 and 0.75
        let s = WeightedPointSet::uniform(1, vec![0.35, 0.7]).unwrap();
        let map = infinity_matching(&grid, &s).unwrap();
        assert!((map.sup_displacement - 0.1).abs() < 1e-12);
        let s = WeightedPointSet::uniform(1, vec![0.75, 0.25]).unwrap();
        let map = infinity_matching(&grid, &s).unwrap();
        assert_eq!(map.sup_displacement, 0.0);
        assert_eq!(map.targets, vec![1, 0]);
    }

    #[test]
    fn quantization_and_resolution() {
        assert_eq!(quantize(&[0.5, 0.3, 0.2], 4), vec![2, 1, 1]);
        assert_eq!(quantize(&[0.25; 4], 4), vec![1; 4]);
        assert_eq!(matching_resolution(500, 2), vec![20, 25]);
        assert_eq!(matching_resolution(4000, 2), vec![50, 80]);
        assert_eq!(matching_resolution(1000, 3), vec![10, 10, 10]);
    }

    #[test]
    fn hopcroft_karp_basic() {
        let adj = vec![vec![0, 1], vec![0]];
        assert_eq!(hopcroft_karp(2, 2, &adj), Some(vec![1, 0]));
        let adj = vec![vec![0], vec![0]];
        assert_eq!(hopcroft_karp(2, 2, &adj), None);
    }
}
