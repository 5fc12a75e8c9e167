//! Uniform 1D grids with composite-Simpson integration. The 1D precision
//! path of the verification suites (entropy, costs, monotone maps) lives on
//! these grids: an even number of cells, an odd number of nodes.

use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Nodes of a uniform grid with `cells` cells on [a, b] (cells is rounded up
/// to even so Simpson applies; `cells + 1` nodes are returned).
pub fn uniform_nodes(a: f64, b: f64, cells: usize) -> Vec<f64> {
    let cells = if cells % 2 == 0 { cells } else { cells + 1 };
    let n = cells.max(2);
    let h = (b - a) / n as f64;
    let mut nodes: Vec<f64> = (0..=n)
        .map(|i| if i == n { b } else { a + h * i as f64 })
        .collect();
    // bit-exact mirror symmetry on symmetric intervals
    if a == -b {
        for i in 0..n / 2 {
            nodes[n - i] = -nodes[i];
        }
        nodes[n / 2] = 0.0;
    }
    nodes
}

/// Composite Simpson weights-free integral of nodal values on a uniform grid.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    assert!(n >= 3 && n % 2 == 1, "simpson needs an odd node count");
    let mut s = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// A probability-like density sampled on a uniform grid.
#[derive(Clone, Debug)]
pub struct DensityGrid1D {
    x: Vec<f64>,
    pdf: Vec<f64>,
    h: f64,
}

impl DensityGrid1D {
    pub fn new(x: Vec<f64>, pdf: Vec<f64>) -> Result<Self> {
        if x.len() != pdf.len() || x.len() < 3 || x.len() % 2 == 0 {
            return Err(Error::InvalidParameter(String::from(
                "density grid needs an odd number (>= 3) of matching nodes",
            )));
        }
        let h = x[1] - x[0];
        for w in x.windows(2) {
            if !(w[1] > w[0]) || ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs() {
                return Err(Error::InvalidParameter(String::from(
                    "density grid nodes must be uniform and increasing",
                )));
            }
        }
        if pdf.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(String::from(
                "density values must be finite and nonnegative",
            )));
        }
        Ok(DensityGrid1D { x, pdf, h })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(a: f64, b: f64, cells: usize, f: F) -> Result<Self> {
        let x = uniform_nodes(a, b, cells);
        let pdf = x.iter().map(|&xi| f(xi)).collect();
        Self::new(x, pdf)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.pdf
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.x[0]
    }

    pub fn hi(&self) -> f64 {
        *self.x.last().unwrap()
    }

    /// Simpson integral of `f(x) * pdf(x)` over the grid.
    pub fn integrate_against<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let vals: Vec<f64> = self
            .x
            .iter()
            .zip(&self.pdf)
            .map(|(&x, &p)| f(x) * p)
            .collect();
        simpson(&vals, self.h)
    }

    /// Simpson integral of nodal values `g_i * pdf_i`.
    pub fn integrate_values_against(&self, g: &[f64]) -> f64 {
        assert_eq!(g.len(), self.pdf.len());
        let vals: Vec<f64> = g.iter().zip(&self.pdf).map(|(a, b)| a * b).collect();
        simpson(&vals, self.h)
    }

    /// Total mass by Simpson.
    pub fn mass(&self) -> f64 {
        simpson(&self.pdf, self.h)
    }

    /// Piecewise-linear interpolation of the density at x (0 outside).
    pub fn pdf_at(&self, x: f64) -> f64 {
        if x < self.lo() || x > self.hi() {
            return 0.0;
        }
        let t = (x - self.lo()) / self.h;
        let i = (t.floor() as usize).min(self.x.len() - 2);
        let frac = t - i as f64;
        self.pdf[i] * (1.0 - frac) + self.pdf[i + 1] * frac
    }

    /// Cumulative distribution at the grid nodes, normalized to end at 1.
    /// Trapezoidal within cells, which keeps the CDF monotone.
    pub fn cdf(&self) -> Vec<f64> {
        let n = self.x.len();
        let mut c = Vec::with_capacity(n);
        c.push(0.0);
        let mut acc = 0.0;
        for i in 1..n {
            acc += 0.5 * (self.pdf[i - 1] + self.pdf[i]) * self.h;
            c.push(acc);
        }
        let total = c[n - 1];
        if total > 0.0 {
            for v in c.iter_mut() {
                *v /= total;
            }
        }
        c
    }
}

/// Inverse of a monotone nondecreasing table (cdf at `nodes`) at probability
/// q in [0, 1], by binary search plus linear interpolation.
pub fn quantile_from_cdf(nodes: &[f64], cdf: &[f64], q: f64) -> f64 {
    debug_assert_eq!(nodes.len(), cdf.len());
    let n = nodes.len();
    if q <= cdf[0] {
        return nodes[0];
    }
    if q >= cdf[n - 1] {
        return nodes[n - 1];
    }
    let mut lo = 0usize;
    let mut hi = n - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if cdf[mid] < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let span = cdf[hi] - cdf[lo];
    if span <= 0.0 {
        return nodes[hi];
    }
    nodes[lo] + (nodes[hi] - nodes[lo]) * (q - cdf[lo]) / span
}

/// Weighted median of `values` under `weights` (weights need not be
/// normalized). Each atom's weight is centered on its value and the
/// half-mass point is found by linear interpolation, so grid-sampled
/// smooth distributions converge at second order instead of snapping to a
/// node.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    assert_eq!(values.len(), weights.len());
    assert!(!values.is_empty());
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.retain(|&i| weights[i] > 0.0);
    if idx.is_empty() {
        return values[0];
    }
    idx.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    // coalesce (near-)equal values into one atom; mirrored grid nodes map
    // to exactly duplicated values and would otherwise zigzag the midpoint
    // interpolation below
    let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(idx.len());
    for &i in &idx {
        match atoms.last_mut() {
            Some((v, w)) if (values[i] - *v).abs() <= 1e-12 * (1.0 + v.abs()) => {
                *w += weights[i];
            }
            _ => atoms.push((values[i], weights[i])),
        }
    }
    let total: f64 = atoms.iter().map(|(_, w)| w).sum();
    let target = 0.5 * total;
    let mut prev_mid = 0.0;
    let mut prev_val = atoms[0].0;
    let mut acc = 0.0;
    for &(v, w) in &atoms {
        let mid = acc + 0.5 * w;
        if mid >= target {
            let span = mid - prev_mid;
            if span <= 0.0 || acc == 0.0 {
                return v;
            }
            return prev_val + (v - prev_val) * (target - prev_mid) / span;
        }
        acc += w;
        prev_mid = mid;
        prev_val = v;
    }
    atoms.last().unwrap().0
}

/// Weighted mean of `values` under `weights`.
pub fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    values
        .iter()
        .zip(weights)
        .map(|(v, w)| v * w)
        .sum::<f64>()
        / total
}
