//! Scalar, cost, entropy and matrix functionals, with the quantitative
//! spectral bounds that feed the remainder terms of the transport
//! inequalities.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::grid::DensityGrid1D;
use crate::linalg::{random_orthogonal, SymMatrix};
use crate::measures::{Case, DensityModel, KappaParam, WSpec};
use crate::quad;
use crate::rng::Seeded;
use crate::special::{gamma_ratio, SQRT_PI};

/// The scalar constant of the eigenvalue gap bound; the proof's value.
pub const GAP_CONSTANT: f64 = 0.3;

/// The profile `F(t) = t - ln(1 + t)` on `t >= 0`: increasing, convex,
/// quadratic near zero and linear at infinity.
pub fn log_gap(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::DomainViolation(format!(
            "log_gap requires t >= 0, got {t}"
        )));
    }
    Ok(log_gap_raw(t))
}

#[inline]
pub(crate) fn log_gap_raw(t: f64) -> f64 {
    t - t.ln_1p()
}

/// Cost specification: the Bregman base cost attached to `(kappa, W)` plus
/// the optional `F`-shaped remainder cost with prefactor `c` (Case 1) or
/// `(c / beta)(1 - n/beta)^2` (Case 2), driven by a weighted Poincare
/// constant `h`.
#[derive(Clone, Debug)]
pub struct CostSpec {
    pub kp: KappaParam,
    pub w: WSpec,
    /// Numerical constant of the remainder cost (default 3/10).
    pub c: f64,
    /// Weighted Poincare constant feeding the remainder cost.
    pub h: f64,
    /// When set, `cost` evaluates base + remainder.
    pub combined: bool,
}

impl CostSpec {
    pub fn base(kp: KappaParam, w: WSpec) -> Self {
        CostSpec {
            kp,
            w,
            c: GAP_CONSTANT,
            h: 0.0,
            combined: false,
        }
    }

    pub fn with_remainder(kp: KappaParam, w: WSpec, c: f64, h: f64) -> Self {
        CostSpec {
            kp,
            w,
            c,
            h,
            combined: true,
        }
    }

    /// Prefactor of the remainder cost: `c` in Case 1,
    /// `(c/beta)(1 - n/beta)^2` in Case 2.
    pub fn tilde_prefactor(&self) -> f64 {
        match self.kp.case() {
            Case::One => self.c,
            Case::Two => {
                let beta = self.kp.beta();
                let n = self.w.dim() as f64;
                (self.c / beta) * (1.0 - n / beta) * (1.0 - n / beta)
            }
        }
    }
}

/// Bregman transport cost
/// `c(x, y) = ((kappa+1)/(-kappa)) [W(y) - W(x) - grad W(x) . (y - x)]`,
/// nonnegative with equality at `y = x`. In Case 1 the base point must lie
/// in the open support of `W`.
pub fn cost_c(x: &[f64], y: &[f64], spec: &CostSpec) -> Result<f64> {
    let factor = match spec.kp.case() {
        Case::One => {
            if spec.w.value(x) <= 0.0 {
                return Err(Error::DomainViolation(String::from(
                    "case 1 base point outside the open support of W",
                )));
            }
            -(spec.kp.beta() + 1.0)
        }
        Case::Two => spec.kp.beta() - 1.0,
    };
    let grad = spec.w.gradient(x);
    let lin: f64 = grad
        .iter()
        .zip(x.iter().zip(y))
        .map(|(g, (xi, yi))| g * (yi - xi))
        .sum();
    let bregman = spec.w.value(y) - spec.w.value(x) - lin;
    Ok((factor * bregman).max(0.0))
}

/// Remainder cost `prefactor * F(h |y - x|)`.
pub fn cost_tilde(x: &[f64], y: &[f64], spec: &CostSpec) -> f64 {
    let d2: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    spec.tilde_prefactor() * log_gap_raw(spec.h * d2.sqrt())
}

/// Base cost, plus the remainder when the spec is combined.
pub fn cost(x: &[f64], y: &[f64], spec: &CostSpec) -> Result<f64> {
    let base = cost_c(x, y, spec)?;
    Ok(if spec.combined {
        base + cost_tilde(x, y, spec)
    } else {
        base
    })
}

fn w_pow(w: f64, p: f64) -> f64 {
    if w <= 0.0 {
        0.0
    } else {
        w.powf(p)
    }
}

/// The `(kappa, W)`-entropy
/// `H(rho) = (1/kappa) int (rho^{1+kappa} - rho) + ((kappa+1)/(-kappa)) int rho W`
/// by Simpson quadrature on the grid. Returns `+inf` when the weighted term
/// fails to decay on the truncated grid (non-integrable input).
pub fn entropy(rho: &DensityGrid1D, m: &DensityModel) -> Result<f64> {
    ensure_normalized(m)?;
    let kappa = m.kp().kappa();
    let ratio = (kappa + 1.0) / (-kappa);
    let weighted: Vec<f64> = rho
        .nodes()
        .iter()
        .zip(rho.values())
        .map(|(&x, &p)| p * m.w().value(&[x]))
        .collect();
    if diverges_on_grid(&weighted) {
        return Ok(f64::INFINITY);
    }
    let power: Vec<f64> = rho
        .values()
        .iter()
        .map(|&p| (w_pow(p, 1.0 + kappa) - p) / kappa)
        .collect();
    let h = rho.spacing();
    Ok(crate::grid::simpson(&power, h) + ratio * crate::grid::simpson(&weighted, h))
}

/// Relative entropy `H(rho) - H(rho_model)` as the single integral
/// `(1/kappa) int (rho^{kappa+1} - (kappa+1) rho W) + int W^{1 + 1/kappa}`;
/// nonnegative, zero at `rho = rho_model`.
pub fn relative_entropy(rho: &DensityGrid1D, m: &DensityModel) -> Result<f64> {
    ensure_normalized(m)?;
    let kappa = m.kp().kappa();
    let mut vals = Vec::with_capacity(rho.len());
    for (&x, &p) in rho.nodes().iter().zip(rho.values()) {
        let w = m.w().value(&[x]);
        if w <= 0.0 && p > 0.0 {
            // mass outside the support of the reference measure
            return Ok(f64::INFINITY);
        }
        vals.push(relative_entropy_integrand(p, w, kappa));
    }
    Ok(crate::grid::simpson(&vals, rho.spacing()))
}

/// Same relative entropy through adaptive quadrature of a density closure,
/// over the model's truncated box; the n >= 2 path and the test oracle.
pub fn relative_entropy_quad<F: Fn(&[f64]) -> f64>(
    rho: F,
    m: &DensityModel,
    tol: f64,
) -> Result<f64> {
    ensure_normalized(m)?;
    let kappa = m.kp().kappa();
    let n = m.dim();
    let t = m.truncation_radius(crate::measures::COVERAGE_TOLERANCE)?;
    let lo = alloc::vec![-t; n];
    let hi = alloc::vec![t; n];
    let (v, _) = quad::integrate_box(
        |x| relative_entropy_integrand(rho(x), m.w().value(x), kappa),
        &lo,
        &hi,
        tol,
    );
    Ok(v)
}

#[inline]
fn relative_entropy_integrand(p: f64, w: f64, kappa: f64) -> f64 {
    (w_pow(p, kappa + 1.0) - (kappa + 1.0) * p * w.max(0.0)) / kappa + w_pow(w, 1.0 + 1.0 / kappa)
}

fn ensure_normalized(m: &DensityModel) -> Result<()> {
    if !m.is_normalized() {
        return Err(Error::NotValidated(String::from(
            "entropy functionals require a normalized model",
        )));
    }
    if m.kp().kappa() == -1.0 {
        // kappa = -1 (beta = n = 1): the rho-dependence of the entropy
        // vanishes and the Bregman cost factor is zero; nothing to verify
        return Err(Error::InvalidParameter(String::from(
            "the kappa = -1 endpoint degenerates the entropy; use beta > 1",
        )));
    }
    Ok(())
}

/// Crude divergence sentinel: the integrand keeps growing toward both ends
/// of the truncated grid and the outermost cells carry a non-vanishing
/// share of the total.
fn diverges_on_grid(vals: &[f64]) -> bool {
    let n = vals.len();
    if n < 8 {
        return false;
    }
    let total: f64 = vals.iter().map(|v| v.abs()).sum();
    let edge = vals[n - 1].abs() + vals[0].abs();
    let growing = vals[n - 1].abs() >= vals[n - 2].abs() && vals[0].abs() >= vals[1].abs();
    growing && edge > 1e-3 * total / n as f64 * 8.0 && edge * (n as f64) > 0.05 * total
}

/// Domain tag for symmetric matrix samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixDomain {
    /// Eigenvalues of M strictly positive (eigenvalues of M - I above -1).
    EigGtMinusOne,
    /// Eigenvalues of M nonnegative (singular allowed).
    Nonnegative,
}

/// A symmetric matrix with its eigendecomposition and a verified domain tag.
#[derive(Clone, Debug)]
pub struct SymmetricMatrixSample {
    matrix: SymMatrix,
    eigenvalues: Vec<f64>,
    mu: Vec<f64>,
    domain: MatrixDomain,
}

impl SymmetricMatrixSample {
    pub fn new(matrix: SymMatrix, domain: MatrixDomain) -> Result<Self> {
        let (mut eigenvalues, vectors) = matrix.eigen();
        let back = SymMatrix::from_eigen(&eigenvalues, &vectors);
        let n = matrix.dim();
        let mut drift = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                drift = drift.max((matrix.get(i, j) - back.get(i, j)).abs());
            }
        }
        if drift > 1e-10 * (1.0 + matrix.hs_norm()) {
            return Err(Error::InvalidParameter(format!(
                "eigendecomposition failed to reconstruct the matrix (drift {drift})"
            )));
        }
        match domain {
            MatrixDomain::EigGtMinusOne => {
                if eigenvalues.iter().any(|&l| l <= 0.0) {
                    return Err(Error::DomainViolation(String::from(
                        "domain EigGtMinusOne requires eigenvalues of M strictly positive",
                    )));
                }
            }
            MatrixDomain::Nonnegative => {
                if eigenvalues.iter().any(|&l| l < -1e-12) {
                    return Err(Error::DomainViolation(String::from(
                        "domain Nonnegative requires eigenvalues of M >= 0",
                    )));
                }
                for l in eigenvalues.iter_mut() {
                    if *l < 0.0 {
                        *l = 0.0;
                    }
                }
            }
        }
        let mu = eigenvalues.iter().map(|&l| l - 1.0).collect();
        Ok(SymmetricMatrixSample {
            matrix,
            eigenvalues,
            mu,
            domain,
        })
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvalues of M - I.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn domain(&self) -> MatrixDomain {
        self.domain
    }

    pub fn hs_distance_to_identity(&self) -> f64 {
        self.mu.iter().map(|m| m * m).sum::<f64>().sqrt()
    }

    /// Random sample with eigenvalues `exp(spread * N(0,1))` conjugated by a
    /// random orthogonal matrix (all eigenvalues of M - I above -1).
    pub fn sample_eig_gt_minus_one(n: usize, spread: f64, rng: &mut Seeded) -> Self {
        let d: Vec<f64> = (0..n).map(|_| (spread * rng.normal()).exp()).collect();
        let q = random_orthogonal(n, rng);
        Self::new(SymMatrix::from_eigen(&d, &q), MatrixDomain::EigGtMinusOne)
            .expect("positive spectrum by construction")
    }

    /// Random nonnegative sample; roughly one eigenvalue in ten is exactly
    /// zero so the singular boundary stays exercised.
    pub fn sample_nonnegative(n: usize, spread: f64, rng: &mut Seeded) -> Self {
        let d: Vec<f64> = (0..n)
            .map(|_| {
                if rng.uniform() < 0.1 {
                    0.0
                } else {
                    let z = spread * rng.normal();
                    z * z
                }
            })
            .collect();
        let q = random_orthogonal(n, rng);
        Self::new(SymMatrix::from_eigen(&d, &q), MatrixDomain::Nonnegative)
            .expect("nonnegative spectrum by construction")
    }
}

/// Tangent-line gap of the concave determinant power:
/// `G_kappa(M) = (1/kappa) det(M)^{-kappa} - 1/kappa + tr(M - I) >= 0`.
///
/// For `kappa < 0` and singular nonnegative `M`, `det^{1/beta}` extends
/// continuously by zero; for `kappa > 0` a singular matrix is rejected.
pub fn det_tangent_gap(m: &SymmetricMatrixSample, kp: KappaParam) -> Result<f64> {
    let beta = kp.beta();
    let tr_shift: f64 = m.mu().iter().sum();
    let min_eig = m.eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
    match kp.case() {
        Case::One => {
            if min_eig <= 0.0 {
                return Err(Error::DomainViolation(String::from(
                    "det^{-kappa} needs a positive determinant when kappa > 0",
                )));
            }
            let log_det: f64 = m.eigenvalues().iter().map(|l| l.ln()).sum();
            Ok(beta * (-log_det / beta).exp() - beta + tr_shift)
        }
        Case::Two => {
            if min_eig <= 0.0 {
                // det^{1/beta} -> 0
                return Ok(beta + tr_shift);
            }
            let log_det: f64 = m.eigenvalues().iter().map(|l| l.ln()).sum();
            Ok(-beta * (log_det / beta).exp() + beta + tr_shift)
        }
    }
}

/// A verified two-sided quantity: `margin = lhs - rhs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl BoundCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        BoundCheck {
            lhs,
            rhs,
            margin: lhs - rhs,
        }
    }
}

/// Case 1 spectral bound: for eigenvalues of `M` positive,
/// `G_{1/beta}(M) >= c sum_i min(mu_i^2, |mu_i|)` with `c = 3/10`.
pub fn eigen_gap_lower_bound(m: &SymmetricMatrixSample, beta: f64) -> Result<BoundCheck> {
    if m.domain() != MatrixDomain::EigGtMinusOne {
        return Err(Error::DomainViolation(String::from(
            "eigen gap bound needs domain EigGtMinusOne",
        )));
    }
    let kp = KappaParam::case1(beta)?;
    let lhs = det_tangent_gap(m, kp)?;
    let rhs = GAP_CONSTANT
        * m.mu()
            .iter()
            .map(|&u| (u * u).min(u.abs()))
            .sum::<f64>();
    Ok(BoundCheck::new(lhs, rhs))
}

/// Case 2 spectral bound: for nonnegative `M` and `beta >= n`,
/// `G_{-1/beta}(M) >= (3/(64 beta)) (1 - n/beta)^2 F(|M - I|_HS)`.
pub fn hs_gap_lower_bound(m: &SymmetricMatrixSample, beta: f64) -> Result<BoundCheck> {
    if m.domain() != MatrixDomain::Nonnegative {
        return Err(Error::DomainViolation(String::from(
            "HS gap bound needs domain Nonnegative",
        )));
    }
    let n = m.dim() as f64;
    if beta < n {
        return Err(Error::InvalidParameter(format!(
            "HS gap bound needs beta >= n, got beta={beta}, n={n}"
        )));
    }
    let kp = KappaParam::case2(beta, m.dim())?;
    let lhs = det_tangent_gap(m, kp)?;
    let rhs = 3.0 / (64.0 * beta)
        * (1.0 - n / beta)
        * (1.0 - n / beta)
        * log_gap_raw(m.hs_distance_to_identity());
    Ok(BoundCheck::new(lhs, rhs))
}

/// Margin of the scalar inequality `ln(1+t) <= t - c min(t^2, |t|)` with
/// `c = 3/10`, valid on `t > -1` (`t = -1` yields an infinite margin).
pub fn scalar_log_margin(t: f64) -> Result<f64> {
    if t < -1.0 {
        return Err(Error::DomainViolation(format!(
            "scalar log bound requires t >= -1, got {t}"
        )));
    }
    if t == -1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(t - GAP_CONSTANT * (t * t).min(t.abs()) - t.ln_1p())
}

/// Margin of `ln s <= ln t + (s-t)/t - (s-t)^2 / (2 max(s,t)^2)` on s, t > 0.
pub fn log_quadratic_margin(s: f64, t: f64) -> Result<f64> {
    if !(s > 0.0) || !(t > 0.0) {
        return Err(Error::DomainViolation(format!(
            "log quadratic bound requires s, t > 0, got s={s}, t={t}"
        )));
    }
    let d = s - t;
    let m = s.max(t);
    Ok(t.ln() + d / t - d * d / (2.0 * m * m) - s.ln())
}

/// Result of the trace-versus-sphere-average bound.
#[derive(Clone, Copy, Debug)]
pub struct SphereBound {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// Monte Carlo standard error of the rhs (zero when the sphere average
    /// was computed exactly).
    pub rhs_std_error: f64,
}

/// `tr F(M) >= (1/8) avg_{u in S^{n-1}} F(sqrt(n) |M u|)`, for symmetric `M`
/// with eigenvalues above -1. `F` is applied spectrally through absolute
/// eigenvalues: `tr F(M) = sum_i F(|lambda_i|)`. The sphere average is
/// exact for n = 1 (two-point) and n = 2 (angular quadrature), Monte Carlo
/// with reported standard error for n >= 3.
pub fn trace_sphere_bound(m: &SymMatrix, mc_points: usize, seed: u64) -> Result<SphereBound> {
    let eigenvalues = m.eigenvalues();
    if eigenvalues.iter().any(|&l| l <= -1.0) {
        return Err(Error::DomainViolation(String::from(
            "trace sphere bound needs eigenvalues above -1",
        )));
    }
    let n = m.dim();
    let lhs: f64 = eigenvalues.iter().map(|&l| log_gap_raw(l.abs())).sum();
    let sqrt_n = (n as f64).sqrt();
    let image_norm = |u: &[f64]| -> f64 {
        m.mul_vec(u).iter().map(|a| a * a).sum::<f64>().sqrt()
    };
    match n {
        1 => {
            let rhs = 0.125 * log_gap_raw(image_norm(&[1.0]));
            Ok(SphereBound {
                lhs,
                rhs,
                margin: lhs - rhs,
                rhs_std_error: 0.0,
            })
        }
        2 => {
            let (avg, _) = quad::integrate(
                |theta| log_gap_raw(sqrt_n * image_norm(&[theta.cos(), theta.sin()])),
                0.0,
                2.0 * core::f64::consts::PI,
                1e-12,
            );
            let rhs = 0.125 * avg / (2.0 * core::f64::consts::PI);
            Ok(SphereBound {
                lhs,
                rhs,
                margin: lhs - rhs,
                rhs_std_error: 0.0,
            })
        }
        _ => {
            if mc_points == 0 {
                return Err(Error::InvalidParameter(String::from(
                    "Monte Carlo sphere average needs mc_points >= 1",
                )));
            }
            let mut rng = Seeded::new(seed);
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            for _ in 0..mc_points {
                let u = rng.unit_vector(n);
                let v = log_gap_raw(sqrt_n * image_norm(&u));
                sum += v;
                sum2 += v * v;
            }
            let mean = sum / mc_points as f64;
            let var = (sum2 / mc_points as f64 - mean * mean).max(0.0);
            let se = (var / mc_points as f64).sqrt();
            Ok(SphereBound {
                lhs,
                rhs: 0.125 * mean,
                margin: lhs - 0.125 * mean,
                rhs_std_error: 0.125 * se,
            })
        }
    }
}

/// `c_n = avg_{u in S^{n-1}} |e_1 . u| = Gamma(n/2) / (sqrt(pi) Gamma((n+1)/2))`.
pub fn sphere_norm_constant(n: usize) -> f64 {
    gamma_ratio(n as f64 / 2.0, (n as f64 + 1.0) / 2.0) / SQRT_PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::normalize;
    use alloc::vec;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn cauchy(beta: f64, n: usize) -> DensityModel {
        normalize(
            WSpec::quadratic_cauchy(n),
            KappaParam::case2(beta, n).unwrap(),
        )
        .unwrap()
    }

    fn ball(sigma: f64, beta: f64, n: usize) -> DensityModel {
        normalize(
            WSpec::quadratic_ball(sigma, n).unwrap(),
            KappaParam::case1(beta).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn log_gap_values_and_envelope() {
        assert_eq!(log_gap(0.0).unwrap(), 0.0);
        assert!(rel(log_gap(1.0).unwrap(), 1.0 - core::f64::consts::LN_2) < 1e-15);
        assert!(log_gap(-0.1).is_err());
        // (1/4) min(t, t^2) <= F(t) <= min(t, t^2) on a dense grid
        let mut t = 0.0;
        while t <= 100.0 {
            let f = log_gap_raw(t);
            let envelope = t.min(t * t);
            assert!(f <= envelope + 1e-12, "t={t}");
            assert!(f >= 0.25 * envelope - 1e-12, "t={t}");
            t += 0.01 + t * 0.01;
        }
    }

    #[test]
    fn log_gap_convex_increasing() {
        let grid: Vec<f64> = (0..200).map(|i| i as f64 * 0.11).collect();
        for w in grid.windows(2) {
            assert!(log_gap_raw(w[1]) > log_gap_raw(w[0]));
        }
        for &t1 in grid.iter().step_by(11) {
            for &t2 in grid.iter().step_by(17) {
                for &lam in &[0.25, 0.5, 0.9] {
                    let mid = log_gap_raw(lam * t1 + (1.0 - lam) * t2);
                    let chord = lam * log_gap_raw(t1) + (1.0 - lam) * log_gap_raw(t2);
                    assert!(mid <= chord + 1e-12);
                }
            }
        }
    }

    #[test]
    fn cost_examples() {
        // Cauchy W = 1 + |x|^2, beta = 2 (unnormalized): c(x,y) = |y-x|^2.
        let spec = CostSpec::base(
            KappaParam::case2(2.0, 1).unwrap(),
            WSpec::quadratic_cauchy(1),
        );
        assert_eq!(cost_c(&[0.7], &[0.7], &spec).unwrap(), 0.0);
        for &(x, y) in &[(0.0, 1.0), (-1.5, 2.0), (3.0, -0.25)] {
            let c = cost_c(&[x], &[y], &spec).unwrap();
            assert!(rel(c, (y - x) * (y - x)) < 1e-12, "({x},{y})");
        }
        // Ball W = sigma^2 - |x|^2, beta = 1: c(x,y) = 2 |y-x|^2.
        let spec = CostSpec::base(
            KappaParam::case1(1.0).unwrap(),
            WSpec::quadratic_ball(1.0, 1).unwrap(),
        );
        for &(x, y) in &[(0.0, 0.5), (-0.25, 0.5), (0.9, -0.9)] {
            let c = cost_c(&[x], &[y], &spec).unwrap();
            assert!(rel(c, 2.0 * (y - x) * (y - x)) < 1e-12);
        }
        // base point on the boundary rejected
        assert!(cost_c(&[1.0], &[0.0], &spec).is_err());
    }

    #[test]
    fn cost_nonnegative_at_random_pairs() {
        let mut rng = Seeded::new(21);
        let spec2 = CostSpec::base(
            KappaParam::case2(3.0, 2).unwrap(),
            WSpec::quadratic_cauchy(2),
        );
        let spec1 = CostSpec::base(
            KappaParam::case1(2.0).unwrap(),
            WSpec::quadratic_ball(1.0, 2).unwrap(),
        );
        for _ in 0..100_000 {
            let x = vec![rng.uniform_in(-5.0, 5.0), rng.uniform_in(-5.0, 5.0)];
            let y = vec![rng.uniform_in(-5.0, 5.0), rng.uniform_in(-5.0, 5.0)];
            assert!(cost_c(&x, &y, &spec2).unwrap() >= 0.0);
            let xb = vec![0.7 * rng.uniform_in(-1.0, 1.0), 0.7 * rng.uniform_in(-1.0, 1.0)];
            let yb = vec![rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)];
            let c = cost_c(&xb, &yb, &spec1).unwrap();
            assert!(c >= 0.0);
            let d2: f64 = xb.iter().zip(&yb).map(|(a, b)| (a - b) * (a - b)).sum();
            // strictly convex quadratic weight: equality iff x = y
            if d2 > 1e-12 {
                assert!(c > 0.0);
            }
        }
    }

    #[test]
    fn cost_tilde_cases() {
        let kp1 = KappaParam::case1(2.0).unwrap();
        let w1 = WSpec::quadratic_ball(1.0, 1).unwrap();
        let spec = CostSpec::with_remainder(kp1, w1, 1.0, 1.0);
        assert_eq!(cost_tilde(&[0.3], &[0.3], &spec), 0.0);
        assert!(rel(
            cost_tilde(&[0.0], &[1.0], &spec),
            1.0 - core::f64::consts::LN_2
        ) < 1e-15);
        // Case 2 with beta = n: prefactor vanishes identically
        let kp2 = KappaParam::case2(2.0, 2).unwrap();
        let spec = CostSpec::with_remainder(kp2, WSpec::quadratic_cauchy(2), 0.3, 5.0);
        assert_eq!(spec.tilde_prefactor(), 0.0);
        assert_eq!(cost_tilde(&[0.0, 0.0], &[3.0, 4.0], &spec), 0.0);
    }

    #[test]
    fn entropy_rejects_degenerate_endpoint() {
        // kappa = -1 kills the rho-dependence; the ops refuse it
        let m = cauchy(1.0, 1);
        let grid = m.grid_1d(256).unwrap();
        assert!(matches!(
            relative_entropy(&grid, &m),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(entropy(&grid, &m), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn relative_entropy_zero_at_model() {
        for m in [cauchy(2.0, 1), ball(1.0, 2.0, 1)] {
            let grid = m.grid_1d(2048).unwrap();
            let h = relative_entropy(&grid, &m).unwrap();
            assert!(h.abs() < 1e-10, "{h}");
        }
    }

    #[test]
    fn entropy_case1_beta_form_identity() {
        // Case 1 relative entropy equals
        // int (beta rho^{1+1/beta} - (beta+1) rho W) + int W^{beta+1}.
        let m = ball(1.0, 2.0, 1);
        let beta = 2.0;
        let grid = m.grid_1d(4096).unwrap();
        let g = |x: f64| 1.0 + 0.1 * (3.0 * x).sin();
        let pert = DensityGrid1D::new(
            grid.nodes().to_vec(),
            grid.nodes()
                .iter()
                .zip(grid.values())
                .map(|(&x, &p)| p * g(x))
                .collect(),
        )
        .unwrap();
        let generic = relative_entropy(&pert, &m).unwrap();
        let vals: Vec<f64> = pert
            .nodes()
            .iter()
            .zip(pert.values())
            .map(|(&x, &p)| {
                let w = m.w().value(&[x]).max(0.0);
                beta * w_pow(p, 1.0 + 1.0 / beta) - (beta + 1.0) * p * w + w.powf(beta + 1.0)
            })
            .collect();
        let beta_form = crate::grid::simpson(&vals, pert.spacing());
        assert!((generic - beta_form).abs() < 1e-10);
    }

    #[test]
    fn entropy_case2_beta_form_identity() {
        // Case 2 relative entropy equals
        // int ((beta-1) rho W - beta rho^{1-1/beta}) + int W^{1-beta}.
        let m = cauchy(3.0, 1);
        let beta = 3.0;
        let grid = m.grid_1d(4096).unwrap();
        let pert = DensityGrid1D::new(
            grid.nodes().to_vec(),
            grid.nodes()
                .iter()
                .zip(grid.values())
                .map(|(&x, &p)| p * (1.0 + 0.15 * x / (1.0 + x * x)))
                .collect(),
        )
        .unwrap();
        let generic = relative_entropy(&pert, &m).unwrap();
        let vals: Vec<f64> = pert
            .nodes()
            .iter()
            .zip(pert.values())
            .map(|(&x, &p)| {
                let w = m.w().value(&[x]);
                (beta - 1.0) * p * w - beta * w_pow(p, 1.0 - 1.0 / beta) + w.powf(1.0 - beta)
            })
            .collect();
        let beta_form = crate::grid::simpson(&vals, pert.spacing());
        assert!(
            (generic - beta_form).abs() < 1e-10,
            "{generic} vs {beta_form}"
        );
    }

    #[test]
    fn entropy_agrees_with_refined_oracle() {
        // perturbed Cauchy beta=2: H on a 4096 grid vs an 8x resolution oracle
        let m = cauchy(2.0, 1);
        let make = |cells: usize| {
            let grid = m.grid_1d(cells).unwrap();
            let pdf: Vec<f64> = grid
                .nodes()
                .iter()
                .zip(grid.values())
                .map(|(&x, &p)| {
                    let g = x / (1.0 + x * x);
                    p * (1.0 + 0.1 * g)
                })
                .collect();
            DensityGrid1D::new(grid.nodes().to_vec(), pdf).unwrap()
        };
        let coarse = entropy(&make(4096), &m).unwrap();
        let fine = entropy(&make(32768), &m).unwrap();
        assert!(
            (coarse - fine).abs() < 1e-6,
            "coarse {coarse} vs oracle {fine}"
        );
    }

    #[test]
    fn relative_entropy_nonnegative_on_random_perturbations() {
        let m = cauchy(3.0, 1);
        let grid = m.grid_1d(2048).unwrap();
        let mut rng = Seeded::new(33);
        for _ in 0..100 {
            let a = rng.uniform_in(-1.0, 1.0);
            let b = rng.uniform_in(0.5, 3.0);
            let c = rng.uniform_in(-1.0, 1.0);
            let eps = rng.uniform_in(0.0, 0.3);
            // bounded mean-zero-ish direction; project exactly on the grid
            let raw: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|&x| a * (b * x).sin() + c / (1.0 + x * x))
                .collect();
            let mean = grid.integrate_values_against(&raw) / grid.mass();
            let g: Vec<f64> = raw.iter().map(|v| v - mean).collect();
            let sup = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            let pdf: Vec<f64> = grid
                .values()
                .iter()
                .zip(&g)
                .map(|(&p, &gv)| p * (1.0 + eps * gv / sup))
                .collect();
            let pert = DensityGrid1D::new(grid.nodes().to_vec(), pdf).unwrap();
            let h = relative_entropy(&pert, &m).unwrap();
            assert!(h >= -1e-9, "negative relative entropy {h}");
        }
    }

    #[test]
    fn relative_entropy_kappa_to_zero_is_kl() {
        // W = 1 + |kappa| x^2, kappa = -1e-4; relative entropy of a
        // perturbation approaches the classical KL divergence to e^{-x^2}/sqrt(pi).
        use crate::measures::CustomW;
        use alloc::sync::Arc;
        let a = 1e-4f64;
        let custom = CustomW {
            value: Arc::new(move |x: &[f64]| 1.0 + a * x[0] * x[0]),
            gradient: Arc::new(move |x: &[f64]| vec![2.0 * a * x[0]]),
            hessian: Arc::new(move |_: &[f64]| SymMatrix::scaled_identity(1, 2.0 * a)),
            halfwidth: 4000.0,
        };
        let m = normalize(
            WSpec::custom(custom, 1).unwrap(),
            KappaParam::from_kappa(-a, 1).unwrap(),
        )
        .unwrap();
        let gdir = |x: f64| x / (1.0 + x * x);
        let eps = 0.2;
        // grid wide enough for the Gaussian-type tails
        let grid = DensityGrid1D::from_fn(-8.0, 8.0, 8192, |x| m.pdf(&[x])).unwrap();
        let pert = DensityGrid1D::new(
            grid.nodes().to_vec(),
            grid.nodes()
                .iter()
                .zip(grid.values())
                .map(|(&x, &p)| p * (1.0 + eps * gdir(x)))
                .collect(),
        )
        .unwrap();
        let h = relative_entropy(&pert, &m).unwrap();
        let gauss = |x: f64| (-x * x).exp() / SQRT_PI;
        let (kl, _) = quad::integrate(
            |x| {
                let r = (1.0 + eps * gdir(x)) * m.pdf(&[x]);
                if r <= 0.0 {
                    0.0
                } else {
                    r * (r / gauss(x)).ln()
                }
            },
            -8.0,
            8.0,
            1e-12,
        );
        assert!((h - kl).abs() < 1e-3, "h={h} kl={kl}");
    }

    #[test]
    fn entropy_divergence_sentinel() {
        // a density with fat tails against the ball model's W has mass
        // outside the support: relative entropy is +inf
        let m = ball(1.0, 2.0, 1);
        let wide = DensityGrid1D::from_fn(-3.0, 3.0, 512, |x| {
            0.25 * (-x.abs()).exp()
        })
        .unwrap();
        assert_eq!(relative_entropy(&wide, &m).unwrap(), f64::INFINITY);
        // and a tail too heavy for the weighted term trips the growth
        // sentinel of the plain entropy
        let m = cauchy(2.0, 1);
        let grid = m.grid_1d(2048).unwrap();
        let heavy = DensityGrid1D::from_fn(grid.lo(), grid.hi(), 2048, |x| {
            0.5 / (1.0 + x.abs())
        })
        .unwrap();
        assert_eq!(entropy(&heavy, &m).unwrap(), f64::INFINITY);
        // while an integrable input stays finite
        let fine = entropy(&grid, &m).unwrap();
        assert!(fine.is_finite());
    }

    #[test]
    fn det_tangent_gap_examples() {
        // M = I gives 0 for any kappa
        let id = SymmetricMatrixSample::new(SymMatrix::identity(3), MatrixDomain::EigGtMinusOne)
            .unwrap();
        for kp in [
            KappaParam::case1(2.0).unwrap(),
            KappaParam::case2(5.0, 3).unwrap(),
        ] {
            assert!(det_tangent_gap(&id, kp).unwrap().abs() < 1e-14);
        }
        // n=1, M=(2), kappa=-1/2: -2 sqrt(2) + 2 + 1 = 3 - 2 sqrt(2)
        let m2 = SymmetricMatrixSample::new(
            SymMatrix::from_rows(1, &[2.0]),
            MatrixDomain::Nonnegative,
        )
        .unwrap();
        let g = det_tangent_gap(&m2, KappaParam::case2(2.0, 1).unwrap()).unwrap();
        assert!(rel(g, 3.0 - 2.0 * 2.0f64.sqrt()) < 1e-14);
        // singular matrix rejected for kappa > 0, continuous extension for kappa < 0
        let sing = SymmetricMatrixSample::new(
            SymMatrix::from_rows(2, &[0.0, 0.0, 0.0, 2.0]),
            MatrixDomain::Nonnegative,
        )
        .unwrap();
        assert!(det_tangent_gap(&sing, KappaParam::case1(1.0).unwrap()).is_err());
        let g = det_tangent_gap(&sing, KappaParam::case2(2.0, 2).unwrap()).unwrap();
        assert!(rel(g, 2.0 + (0.0 - 1.0 + 2.0 - 1.0)) < 1e-14);
    }

    #[test]
    fn det_tangent_gap_nonnegative_battery() {
        let mut rng = Seeded::new(1234);
        for n in 1..=4usize {
            let betas = [1.0, 2.0, 5.0, n as f64, 2.0 * n as f64];
            for &beta in &betas {
                for _ in 0..500 {
                    let m1 = SymmetricMatrixSample::sample_eig_gt_minus_one(n, 1.0, &mut rng);
                    let g = det_tangent_gap(&m1, KappaParam::case1(beta).unwrap()).unwrap();
                    assert!(g >= -1e-12, "case1 n={n} beta={beta}: {g}");
                    if beta >= n as f64 {
                        let m2 = SymmetricMatrixSample::sample_nonnegative(n, 1.0, &mut rng);
                        let g =
                            det_tangent_gap(&m2, KappaParam::case2(beta, n).unwrap()).unwrap();
                        assert!(g >= -1e-12, "case2 n={n} beta={beta}: {g}");
                    }
                }
            }
        }
    }

    #[test]
    fn eigen_gap_bound_scalar_example() {
        // n=1, mu=1 (M=2), beta=2: lhs = 2/sqrt(2) - 2 + 1 = sqrt(2) - 1,
        // rhs = 0.3, margin ~ 0.1142
        let m = SymmetricMatrixSample::new(
            SymMatrix::from_rows(1, &[2.0]),
            MatrixDomain::EigGtMinusOne,
        )
        .unwrap();
        let b = eigen_gap_lower_bound(&m, 2.0).unwrap();
        assert!(rel(b.lhs, 2.0f64.sqrt() - 1.0) < 1e-14);
        assert!(rel(b.rhs, 0.3) < 1e-14);
        assert!(rel(b.margin, 2.0f64.sqrt() - 1.3) < 1e-12);
        // M = I: all zero
        let id = SymmetricMatrixSample::new(SymMatrix::identity(2), MatrixDomain::EigGtMinusOne)
            .unwrap();
        let b = eigen_gap_lower_bound(&id, 1.0).unwrap();
        assert!(b.lhs.abs() < 1e-14 && b.rhs == 0.0);
    }

    #[test]
    fn eigen_gap_bound_random_battery() {
        let mut rng = Seeded::new(77);
        for n in 1..=5usize {
            for &beta in &[1.0, 2.0, 10.0] {
                for _ in 0..400 {
                    let m = SymmetricMatrixSample::sample_eig_gt_minus_one(n, 1.2, &mut rng);
                    let b = eigen_gap_lower_bound(&m, beta).unwrap();
                    assert!(b.margin >= -1e-12, "n={n} beta={beta}: {}", b.margin);
                }
            }
        }
    }

    #[test]
    fn scalar_log_margin_examples() {
        assert_eq!(scalar_log_margin(0.0).unwrap(), 0.0);
        let at1 = scalar_log_margin(1.0).unwrap();
        assert!(rel(at1, 0.7 - core::f64::consts::LN_2) < 1e-12);
        assert!(at1 > 0.0 && at1 < 0.007); // near-tight point
        assert_eq!(scalar_log_margin(-1.0).unwrap(), f64::INFINITY);
        assert!(scalar_log_margin(-1.0001).is_err());
        // dense grid on (-1, 1000]
        let mut t = -0.999;
        while t <= 1000.0 {
            assert!(
                scalar_log_margin(t).unwrap() >= 0.0,
                "violated at t={t}"
            );
            t += if t < 2.0 { 0.001 } else { 0.37 };
        }
    }

    #[test]
    fn log_quadratic_margin_examples() {
        assert_eq!(log_quadratic_margin(1.5, 1.5).unwrap(), 0.0);
        assert!(rel(
            log_quadratic_margin(2.0, 1.0).unwrap(),
            1.0 - 0.125 - core::f64::consts::LN_2
        ) < 1e-12);
        assert!(log_quadratic_margin(0.0, 1.0).is_err());
        let mut rng = Seeded::new(5);
        for _ in 0..100_000 {
            let s = rng.uniform_in(1e-6, 100.0);
            let t = rng.uniform_in(1e-6, 100.0);
            assert!(log_quadratic_margin(s, t).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn hs_gap_bound_examples_and_battery() {
        let id =
            SymmetricMatrixSample::new(SymMatrix::identity(3), MatrixDomain::Nonnegative).unwrap();
        let b = hs_gap_lower_bound(&id, 5.0).unwrap();
        assert!(b.lhs.abs() < 1e-13 && b.rhs.abs() < 1e-13);
        // beta = n: rhs vanishes, margin = G >= 0
        let mut rng = Seeded::new(99);
        let m = SymmetricMatrixSample::sample_nonnegative(3, 1.0, &mut rng);
        let b = hs_gap_lower_bound(&m, 3.0).unwrap();
        assert_eq!(b.rhs, 0.0);
        assert!(b.lhs >= -1e-12);
        assert!(hs_gap_lower_bound(&m, 2.0).is_err()); // beta < n
        for n in 1..=5usize {
            for &mult in &[1.0, 2.0, 10.0] {
                let beta = mult * n as f64;
                for _ in 0..300 {
                    let m = SymmetricMatrixSample::sample_nonnegative(n, 1.0, &mut rng);
                    let b = hs_gap_lower_bound(&m, beta).unwrap();
                    assert!(b.margin >= -1e-12, "n={n} beta={beta}: {}", b.margin);
                }
            }
        }
    }

    #[test]
    fn trace_sphere_bound_1d_exact() {
        // n=1, M=(t): lhs = F(|t|), rhs = F(|t|)/8, margin = (7/8) F(|t|)
        for &t in &[0.5, -0.5, 2.0] {
            let m = SymMatrix::from_rows(1, &[t]);
            let b = trace_sphere_bound(&m, 0, 0).unwrap();
            assert!(rel(b.lhs, log_gap_raw(t.abs())) < 1e-14);
            assert!(rel(b.margin, 0.875 * log_gap_raw(t.abs())) < 1e-12);
        }
        // M = 0: everything zero
        let b = trace_sphere_bound(&SymMatrix::zeros(1), 0, 0).unwrap();
        assert_eq!((b.lhs, b.rhs), (0.0, 0.0));
        // eigenvalue at -1 rejected
        assert!(trace_sphere_bound(&SymMatrix::from_rows(1, &[-1.0]), 0, 0).is_err());
    }

    /// Random symmetric matrix with all eigenvalues in (-1, inf).
    fn sample_above_minus_one(n: usize, rng: &mut Seeded) -> SymMatrix {
        let d: Vec<f64> = (0..n).map(|_| (1.2 * rng.normal()).exp() - 1.0).collect();
        let q = random_orthogonal(n, rng);
        SymMatrix::from_eigen(&d, &q)
    }

    #[test]
    fn trace_sphere_bound_battery() {
        let mut rng = Seeded::new(31);
        for _ in 0..300 {
            let m = sample_above_minus_one(2, &mut rng);
            let b = trace_sphere_bound(&m, 0, 0).unwrap();
            assert!(b.margin >= -1e-12, "n=2 margin {}", b.margin);
        }
        for i in 0..300 {
            let m = sample_above_minus_one(3, &mut rng);
            let b = trace_sphere_bound(&m, 10_000, 1000 + i).unwrap();
            assert!(
                b.margin >= -3.0 * b.rhs_std_error,
                "n=3 margin {} (se {})",
                b.margin,
                b.rhs_std_error
            );
        }
    }

    #[test]
    fn sphere_norm_constant_values() {
        assert!(rel(sphere_norm_constant(1), 1.0) < 1e-14);
        assert!(rel(sphere_norm_constant(2), 2.0 / core::f64::consts::PI) < 1e-14);
        // envelope over n <= 200
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for n in 1..=200 {
            let v = sphere_norm_constant(n) * (n as f64).sqrt();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!(lo >= 0.79, "lower envelope {lo}");
        assert!(hi <= 1.0 + 1e-12, "upper envelope {hi}");
    }

    #[test]
    fn sphere_norm_constant_matches_mc() {
        let mut rng = Seeded::new(8);
        let n = 4;
        let m = 200_000;
        let mut sum = 0.0;
        for _ in 0..m {
            sum += rng.unit_vector(n)[0].abs();
        }
        let mc = sum / m as f64;
        assert!(rel(mc, sphere_norm_constant(n)) < 1e-2);
    }

    #[test]
    fn matrix_sample_domain_verified() {
        let neg = SymMatrix::from_rows(2, &[-0.5, 0.0, 0.0, 1.0]);
        assert!(SymmetricMatrixSample::new(neg.clone(), MatrixDomain::Nonnegative).is_err());
        assert!(SymmetricMatrixSample::new(neg, MatrixDomain::EigGtMinusOne).is_err());
    }
}
