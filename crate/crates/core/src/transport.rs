//! Exact optimal transport at desk scale: a network-simplex solver for the
//! dense transportation LP (no entropic smoothing; inequality margins near
//! zero need unbiased values), the 1D monotone rearrangement with
//! displacement derivatives, and pushforward residuals.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::grid::{quantile_from_cdf, simpson, DensityGrid1D};
use crate::measures::DiscreteMeasure;

/// Dense cost matrix between two atom lists.
#[derive(Clone, Debug)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidParameter(String::from(
                "cost matrix data length must be rows * cols",
            )));
        }
        if data.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidParameter(String::from(
                "cost matrix entries must be finite and nonnegative",
            )));
        }
        Ok(CostMatrix { rows, cols, data })
    }

    pub fn from_fn<F: Fn(&[f64], &[f64]) -> f64>(
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        f: F,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(mu.len() * nu.len());
        for p in &mu.points {
            for q in &nu.points {
                data.push(f(p, q));
            }
        }
        Self::new(mu.len(), nu.len(), data)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

/// An optimal coupling with its LP optimality certificate.
#[derive(Clone, Debug)]
pub struct TransportPlan {
    coupling: Vec<(usize, usize, f64)>,
    total_cost: f64,
    dual_gap: f64,
}

impl TransportPlan {
    /// Sparse triplets (source index, target index, mass).
    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.coupling
    }

    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    /// |primal - dual| at termination; at optimality this is pure rounding.
    pub fn dual_gap(&self) -> f64 {
        self.dual_gap
    }

    pub fn marginals(&self, m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut row = vec![0.0; m];
        let mut col = vec![0.0; n];
        for &(i, j, w) in &self.coupling {
            row[i] += w;
            col[j] += w;
        }
        (row, col)
    }
}

/// Exact optimum of the transportation LP between two discrete measures,
/// by network simplex on the dense bipartite graph. Marginals must carry
/// equal total mass (up to 1e-9 relative; the demand side is rebalanced
/// exactly before solving).
pub fn solve_discrete_ot(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
) -> Result<TransportPlan> {
    let m = mu.len();
    let n = nu.len();
    if cost.rows() != m || cost.cols() != n {
        return Err(Error::InvalidParameter(format!(
            "cost matrix is {}x{}, marginals are {m} and {n}",
            cost.rows(),
            cost.cols()
        )));
    }
    // covers the largest documented tensor grids (45^2 and 13^3 atoms)
    if m > 2200 || n > 2200 {
        return Err(Error::InvalidParameter(String::from(
            "marginal sizes are limited to 2200 atoms each",
        )));
    }
    let sa: f64 = mu.weights.iter().sum();
    let sb: f64 = nu.weights.iter().sum();
    if (sa - sb).abs() > 1e-9 * sa.max(sb).max(1e-30) {
        return Err(Error::InfeasibleMarginals(format!(
            "marginal masses differ: {sa} vs {sb}"
        )));
    }
    let supply: Vec<f64> = mu.weights.clone();
    let demand: Vec<f64> = nu.weights.iter().map(|w| w * (sa / sb)).collect();

    let mut simplex = Simplex::new(supply, demand, cost);
    simplex.solve()?;
    let coupling = simplex.coupling();
    let total_cost: f64 = coupling.iter().map(|&(i, j, w)| w * cost.get(i, j)).sum();
    let dual = simplex.dual_value();
    // certify feasibility of the returned plan
    let mut row = vec![0.0; m];
    let mut col = vec![0.0; n];
    for &(i, j, w) in &coupling {
        row[i] += w;
        col[j] += w;
    }
    for i in 0..m {
        if (row[i] - mu.weights[i]).abs() > 1e-10 {
            return Err(Error::InfeasibleMarginals(format!(
                "row marginal {i} off by {}",
                row[i] - mu.weights[i]
            )));
        }
    }
    for j in 0..n {
        if (col[j] - nu.weights[j] * (sa / sb)).abs() > 1e-10 {
            return Err(Error::InfeasibleMarginals(format!(
                "column marginal {j} off by {}",
                col[j] - nu.weights[j]
            )));
        }
    }
    Ok(TransportPlan {
        coupling,
        total_cost,
        dual_gap: (total_cost - dual).abs(),
    })
}

/// Network simplex state for the bipartite transportation problem.
/// Nodes 0..m are sources, m..m+n sinks; the basis is a spanning tree held
/// in parent form, with the flow of the arc toward the parent stored on the
/// child node.
struct Simplex<'a> {
    m: usize,
    n: usize,
    cost: &'a CostMatrix,
    supply: Vec<f64>,
    demand: Vec<f64>,
    parent: Vec<usize>,
    flow_to_parent: Vec<f64>,
    depth: Vec<usize>,
    potential: Vec<f64>,
    order: Vec<usize>, // BFS order from the root over the current tree
    cursor: usize,     // pricing cursor over arc ids
}

const ROOT: usize = 0;

impl<'a> Simplex<'a> {
    fn new(supply: Vec<f64>, demand: Vec<f64>, cost: &'a CostMatrix) -> Self {
        let m = supply.len();
        let n = demand.len();
        let v = m + n;
        let mut s = Simplex {
            m,
            n,
            cost,
            supply,
            demand,
            parent: vec![usize::MAX; v],
            flow_to_parent: vec![0.0; v],
            depth: vec![0; v],
            potential: vec![0.0; v],
            order: Vec::with_capacity(v),
            cursor: 0,
        };
        s.northwest_init();
        s.refresh_tree();
        s
    }

    /// Northwest-corner starting basis: a staircase spanning tree.
    fn northwest_init(&mut self) {
        let (m, n) = (self.m, self.n);
        let mut ra: Vec<f64> = self.supply.clone();
        let mut rb: Vec<f64> = self.demand.clone();
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m + n];
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let f = ra[i].min(rb[j]);
            adj[i].push((m + j, f));
            adj[m + j].push((i, f));
            ra[i] -= f;
            rb[j] -= f;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if (ra[i] <= rb[j] && i < m - 1) || j == n - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        // orient the staircase into parent pointers from the root
        let v = m + n;
        let mut seen = vec![false; v];
        let mut queue = Vec::with_capacity(v);
        queue.push(ROOT);
        seen[ROOT] = true;
        self.parent[ROOT] = usize::MAX;
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for &(w, f) in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    self.parent[w] = u;
                    self.flow_to_parent[w] = f;
                    queue.push(w);
                }
            }
        }
        debug_assert!(seen.iter().all(|&s| s));
    }

    /// Rebuild BFS order, depths and potentials from the parent array.
    fn refresh_tree(&mut self) {
        let v = self.m + self.n;
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); v];
        for node in 0..v {
            let p = self.parent[node];
            if p != usize::MAX {
                children[p].push(node);
            }
        }
        self.order.clear();
        self.order.push(ROOT);
        self.depth[ROOT] = 0;
        self.potential[ROOT] = 0.0;
        let mut head = 0;
        while head < self.order.len() {
            let u = self.order[head];
            head += 1;
            for &w in &children[u] {
                self.depth[w] = self.depth[u] + 1;
                // tree arc has reduced cost zero: u_i + v_j = c_ij
                let c = if w < self.m {
                    self.cost.get(w, u - self.m)
                } else {
                    self.cost.get(u, w - self.m)
                };
                self.potential[w] = c - self.potential[u];
                self.order.push(w);
            }
        }
        debug_assert_eq!(self.order.len(), v);
    }

    #[inline]
    fn reduced_cost(&self, arc: usize) -> f64 {
        let i = arc / self.n;
        let j = arc % self.n;
        self.cost.get(i, j) - self.potential[i] - self.potential[self.m + j]
    }

    /// Most negative reduced cost inside a cyclic block of arcs, or a full
    /// Bland scan when anti-cycling kicks in.
    fn price(&mut self, bland: bool, eps: f64) -> Option<usize> {
        let arcs = self.m * self.n;
        if bland {
            for a in 0..arcs {
                if self.reduced_cost(a) < -eps {
                    return Some(a);
                }
            }
            return None;
        }
        let block = 8192.min(arcs);
        let mut scanned = 0;
        while scanned < arcs {
            let mut best = usize::MAX;
            let mut best_rc = -eps;
            for _ in 0..block {
                let a = self.cursor;
                self.cursor = (self.cursor + 1) % arcs;
                let rc = self.reduced_cost(a);
                if rc < best_rc {
                    best_rc = rc;
                    best = a;
                }
            }
            scanned += block;
            if best != usize::MAX {
                return Some(best);
            }
        }
        None
    }

    fn solve(&mut self) -> Result<()> {
        let max_cost = self
            .cost
            .data
            .iter()
            .fold(0.0f64, |acc, c| acc.max(c.abs()));
        let eps = 1e-12 * (1.0 + max_cost);
        let max_iters = 400 * (self.m + self.n) + 40_000;
        let mut degenerate_streak = 0usize;
        let mut bland = false;
        for _iter in 0..max_iters {
            let entering = match self.price(bland, eps) {
                None => return Ok(()),
                Some(a) => a,
            };
            let delta = self.pivot(entering);
            if delta > 0.0 {
                degenerate_streak = 0;
                bland = false;
            } else {
                degenerate_streak += 1;
                if degenerate_streak > 2 * (self.m + self.n) {
                    bland = true;
                }
            }
        }
        Err(Error::InvalidParameter(String::from(
            "network simplex exceeded its iteration budget",
        )))
    }

    /// Pivot on the entering arc; returns the amount of flow shifted.
    fn pivot(&mut self, arc: usize) -> f64 {
        let es = arc / self.n;
        let et = self.m + arc % self.n;

        // walk both endpoints up to the apex, recording (node, sign):
        // `node` identifies the tree arc node->parent(node); signs alternate
        // starting at -1 from each endpoint (bipartite cycles have even length,
        // so the two walks agree at the apex).
        let mut up_s: Vec<(usize, f64)> = Vec::new();
        let mut up_t: Vec<(usize, f64)> = Vec::new();
        let (mut a, mut b) = (es, et);
        while self.depth[a] > self.depth[b] {
            up_s.push((a, if up_s.len() % 2 == 0 { -1.0 } else { 1.0 }));
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            up_t.push((b, if up_t.len() % 2 == 0 { -1.0 } else { 1.0 }));
            b = self.parent[b];
        }
        while a != b {
            up_s.push((a, if up_s.len() % 2 == 0 { -1.0 } else { 1.0 }));
            up_t.push((b, if up_t.len() % 2 == 0 { -1.0 } else { 1.0 }));
            a = self.parent[a];
            b = self.parent[b];
        }

        // flow shift bounded by the draining arcs
        let mut delta = f64::INFINITY;
        for &(node, sign) in up_s.iter().chain(up_t.iter()) {
            if sign < 0.0 {
                delta = delta.min(self.flow_to_parent[node]);
            }
        }
        debug_assert!(delta.is_finite());

        // leaving arc: first blocking arc when traversing the cycle in the
        // entering direction starting at the apex (apex -> es, then es->et,
        // then et -> apex); keeps the pivot sequence from stalling.
        let mut leave = usize::MAX;
        for &(node, sign) in up_s.iter().rev() {
            if sign < 0.0 && self.flow_to_parent[node] == delta {
                leave = node;
                break;
            }
        }
        if leave == usize::MAX {
            for &(node, sign) in up_t.iter() {
                if sign < 0.0 && self.flow_to_parent[node] == delta {
                    leave = node;
                    break;
                }
            }
        }
        debug_assert_ne!(leave, usize::MAX);

        for &(node, sign) in up_s.iter().chain(up_t.iter()) {
            self.flow_to_parent[node] += sign * delta;
        }

        // re-root the detached subtree at the entering arc's endpoint inside
        // it, then hang it off the other endpoint.
        let (inside, outside) = if self.in_subtree_of(es, leave) {
            (es, et)
        } else {
            (et, es)
        };
        let mut prev = outside;
        let mut prev_flow = delta;
        let mut cur = inside;
        loop {
            let next = self.parent[cur];
            let cur_flow = self.flow_to_parent[cur];
            self.parent[cur] = prev;
            self.flow_to_parent[cur] = prev_flow;
            if cur == leave {
                break;
            }
            prev = cur;
            prev_flow = cur_flow;
            cur = next;
        }
        self.refresh_tree();
        delta
    }

    /// Does the path from `node` to the root pass through the arc
    /// `pivot_node -> parent(pivot_node)`?
    fn in_subtree_of(&self, node: usize, pivot_node: usize) -> bool {
        let mut v = node;
        loop {
            if v == pivot_node {
                return true;
            }
            if v == ROOT {
                return false;
            }
            v = self.parent[v];
        }
    }

    fn coupling(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.m + self.n);
        for node in 0..(self.m + self.n) {
            let p = self.parent[node];
            if p == usize::MAX {
                continue;
            }
            let f = self.flow_to_parent[node];
            if f <= 0.0 {
                continue;
            }
            let (i, j) = if node < self.m {
                (node, p - self.m)
            } else {
                (p, node - self.m)
            };
            out.push((i, j, f));
        }
        out.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out
    }

    fn dual_value(&self) -> f64 {
        let mut v = 0.0;
        for i in 0..self.m {
            v += self.supply[i] * self.potential[i];
        }
        for j in 0..self.n {
            v += self.demand[j] * self.potential[self.m + j];
        }
        v
    }
}

/// Monotone rearrangement coupling cost for 1D discrete measures under an
/// arbitrary cost `c(x, y)`; exact (and optimal whenever `c` is submodular,
/// in particular for convex functions of `y - x` and the Bregman costs of
/// quadratic weights).
pub fn quantile_coupling_cost<F: Fn(f64, f64) -> f64>(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    c: F,
) -> Result<f64> {
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(Error::InvalidParameter(String::from(
            "quantile coupling requires one-dimensional measures",
        )));
    }
    let mut a: Vec<usize> = (0..mu.len()).collect();
    let mut b: Vec<usize> = (0..nu.len()).collect();
    a.sort_by(|&i, &j| mu.points[i][0].partial_cmp(&mu.points[j][0]).unwrap());
    b.sort_by(|&i, &j| nu.points[i][0].partial_cmp(&nu.points[j][0]).unwrap());
    let sa: f64 = mu.weights.iter().sum();
    let sb: f64 = nu.weights.iter().sum();
    let scale = sa / sb;
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut wa = mu.weights[a[0]];
    let mut wb = nu.weights[b[0]] * scale;
    let mut total = 0.0;
    loop {
        let mass = wa.min(wb);
        if mass > 0.0 {
            total += mass * c(mu.points[a[ia]][0], nu.points[b[ib]][0]);
        }
        wa -= mass;
        wb -= mass;
        if wa <= 1e-17 {
            ia += 1;
            if ia == a.len() {
                break;
            }
            wa = mu.weights[a[ia]];
        }
        if wb <= 1e-17 {
            ib += 1;
            if ib == b.len() {
                break;
            }
            wb = nu.weights[b[ib]] * scale;
        }
    }
    Ok(total)
}

/// `W_p^p(mu, nu)`: the quantile coupling in 1D, the LP otherwise.
pub fn wasserstein_p(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "wasserstein_p requires p >= 1, got {p}"
        )));
    }
    if mu.dim() == 1 && nu.dim() == 1 {
        return quantile_coupling_cost(mu, nu, |x, y| (x - y).abs().powf(p));
    }
    let cost = CostMatrix::from_fn(mu, nu, |x, y| {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        d2.sqrt().powf(p)
    })?;
    Ok(solve_discrete_ot(mu, nu, &cost)?.total_cost())
}

/// The monotone rearrangement `T = G^{-1} o F` between two 1D density
/// grids, with the displacement derivative data needed by the
/// change-of-variables residual.
#[derive(Clone, Debug)]
pub struct MonotoneMap1D {
    grid: Vec<f64>,
    t: Vec<f64>,
    theta_grad: Vec<f64>,
    theta_hess: Vec<f64>,
}

impl MonotoneMap1D {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Map values T(x_i).
    pub fn values(&self) -> &[f64] {
        &self.t
    }

    /// Displacement T(x) - x (the gradient of the displacement potential).
    pub fn theta_grad(&self) -> &[f64] {
        &self.theta_grad
    }

    /// T'(x) - 1 by centered differences (one-sided at the ends).
    pub fn theta_hess(&self) -> &[f64] {
        &self.theta_hess
    }
}

/// Builds the monotone map pushing `src` onto `tgt`.
pub fn monotone_map_1d(src: &DensityGrid1D, tgt: &DensityGrid1D) -> Result<MonotoneMap1D> {
    if src.mass() <= 0.0 || tgt.mass() <= 0.0 {
        return Err(Error::InvalidParameter(String::from(
            "monotone map needs positive-mass densities",
        )));
    }
    let f = src.cdf();
    let g = tgt.cdf();
    let t: Vec<f64> = f
        .iter()
        .map(|&q| quantile_from_cdf(tgt.nodes(), &g, q))
        .collect();
    let x = src.nodes();
    let h = src.spacing();
    let nn = x.len();
    let theta_grad: Vec<f64> = t.iter().zip(x).map(|(ti, xi)| ti - xi).collect();
    let mut theta_hess = vec![0.0; nn];
    for i in 0..nn {
        let tp = if i == 0 {
            (t[1] - t[0]) / h
        } else if i == nn - 1 {
            (t[nn - 1] - t[nn - 2]) / h
        } else {
            (t[i + 1] - t[i - 1]) / (2.0 * h)
        };
        theta_hess[i] = tp - 1.0;
    }
    Ok(MonotoneMap1D {
        grid: x.to_vec(),
        t,
        theta_grad,
        theta_hess,
    })
}

/// Sup-norm Monge-Ampere residual over the interior grid:
/// `max_i |src(x_i) - tgt(T(x_i)) T'(x_i)|`.
pub fn pushforward_residual(map: &MonotoneMap1D, src: &DensityGrid1D, tgt: &DensityGrid1D) -> f64 {
    let mut worst = 0.0f64;
    for i in 1..map.grid.len() - 1 {
        let tprime = map.theta_hess[i] + 1.0;
        let r = (src.values()[i] - tgt.pdf_at(map.t[i]) * tprime).abs();
        worst = worst.max(r);
    }
    worst
}

/// Quadrature of `c(x, T(x))` against the source density. For submodular
/// costs in 1D this is the Kantorovich optimum of the underlying pair.
pub fn map_cost<F: Fn(f64, f64) -> f64>(map: &MonotoneMap1D, src: &DensityGrid1D, c: F) -> f64 {
    let vals: Vec<f64> = map
        .grid
        .iter()
        .zip(&map.t)
        .zip(src.values())
        .map(|((&x, &tx), &p)| c(x, tx) * p)
        .collect();
    simpson(&vals, src.spacing())
}


#[cfg(test)]
mod stress_tests {
    use super::*;
    use crate::measures::MeasureKind;
    use crate::rng::Seeded;

    #[test]
    fn simplex_survives_degenerate_instances() {
        // duplicated atoms, zero weights and heavily tied integer costs:
        // the worst case for pivot cycling
        let mut rng = Seeded::new(0xdead);
        for trial in 0..60 {
            let m = 2 + rng.index(40);
            let n = 2 + rng.index(40);
            let mut wa: Vec<f64> = (0..m)
                .map(|_| {
                    if rng.uniform() < 0.2 {
                        0.0
                    } else {
                        (1 + rng.index(3)) as f64
                    }
                })
                .collect();
            if wa.iter().all(|w| *w == 0.0) {
                wa[0] = 1.0;
            }
            let rebalance = |w: &mut Vec<f64>| {
                let s: f64 = w.iter().sum();
                w.iter_mut().for_each(|v| *v /= s);
                let fix = 1.0 - w.iter().sum::<f64>();
                let argmax = (0..w.len()).max_by(|&i, &j| w[i].total_cmp(&w[j])).unwrap();
                w[argmax] += fix;
            };
            rebalance(&mut wa);
            let mut wb: Vec<f64> = (0..n).map(|_| (1 + rng.index(2)) as f64).collect();
            rebalance(&mut wb);
            let xs: Vec<f64> = (0..m).map(|_| rng.index(5) as f64).collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.index(5) as f64).collect();
            let mu = DiscreteMeasure::new(
                xs.iter().map(|&x| vec![x]).collect(),
                wa.clone(),
                MeasureKind::Cloud,
            )
            .unwrap();
            let nu = DiscreteMeasure::new(
                ys.iter().map(|&y| vec![y]).collect(),
                wb.clone(),
                MeasureKind::Cloud,
            )
            .unwrap();
            let cost = CostMatrix::from_fn(&mu, &nu, |x, y| (x[0] - y[0]).abs()).unwrap();
            let plan = solve_discrete_ot(&mu, &nu, &cost)
                .unwrap_or_else(|e| panic!("trial {trial} ({m}x{n}): {e}"));
            assert!(plan.dual_gap() <= 1e-9 * (1.0 + plan.total_cost().abs()));
            let (row, col) = plan.marginals(m, n);
            for (r, w) in row.iter().zip(&wa) {
                assert!((r - w).abs() < 1e-10);
            }
            for (c, w) in col.iter().zip(&wb) {
                assert!((c - w).abs() < 1e-10);
            }
            // 1D with a distance cost: the quantile coupling is the optimum
            let quantile = quantile_coupling_cost(&mu, &nu, |x, y| (x - y).abs()).unwrap();
            assert!(
                (plan.total_cost() - quantile).abs() <= 1e-10 * (1.0 + quantile),
                "trial {trial}: lp {} vs quantile {quantile}",
                plan.total_cost()
            );
        }
    }
}
