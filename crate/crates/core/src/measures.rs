//! The kappa-concave density families `rho(x) = W(x)^{1/kappa} / Z`:
//! construction, normalization, evaluation, discretization and sampling.
//!
//! Case 1 (`kappa > 0`, `beta = 1/kappa`): `W` concave on its bounded open
//! support `{W > 0}`, density `W^beta / Z`. Case 2 (`kappa < 0`,
//! `beta = -1/kappa >= n`): `W` convex and positive on all of space,
//! density `W^{-beta} / Z` (generalized Cauchy when `W = 1 + |x|^2`).

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::grid::{quantile_from_cdf, uniform_nodes, DensityGrid1D};
use crate::linalg::SymMatrix;
use crate::quad;
use crate::rng::Seeded;
use crate::special::{gamma, gamma_ratio, PI};

/// Mass a discretization grid is allowed to miss.
pub const COVERAGE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    /// kappa > 0, bounded support, W concave on it.
    One,
    /// kappa < 0, full support, W convex.
    Two,
}

/// The concavity parameter, kept as the pair (kappa, beta) with
/// `beta = 1/|kappa|` by construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KappaParam {
    kappa: f64,
    beta: f64,
    case: Case,
}

impl KappaParam {
    /// Case 1 parameter from beta >= 0 (kappa = 1/beta; beta = 0 is the
    /// indicator-density endpoint and is accepted here, though only the
    /// closed-form normalizing constant supports it downstream).
    pub fn case1(beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "case 1 requires beta >= 0, got {beta}"
            )));
        }
        Ok(KappaParam {
            kappa: if beta == 0.0 { f64::INFINITY } else { 1.0 / beta },
            beta,
            case: Case::One,
        })
    }

    /// Case 2 parameter from beta >= n (kappa = -1/beta >= -1/n).
    pub fn case2(beta: f64, dim: usize) -> Result<Self> {
        if !(beta >= dim as f64) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "case 2 requires beta >= n = {dim}, got {beta}"
            )));
        }
        Ok(KappaParam {
            kappa: -1.0 / beta,
            beta,
            case: Case::Two,
        })
    }

    pub fn from_kappa(kappa: f64, dim: usize) -> Result<Self> {
        if kappa > 0.0 {
            Self::case1(1.0 / kappa)
        } else if kappa < 0.0 {
            Self::case2(-1.0 / kappa, dim)
        } else {
            Err(Error::InvalidParameter(String::from(
                "kappa = 0 is the log-concave limit; approach it with small negative kappa",
            )))
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn case(&self) -> Case {
        self.case
    }

    /// The signed density exponent 1/kappa (= +beta or -beta).
    pub fn exponent(&self) -> f64 {
        match self.case {
            Case::One => self.beta,
            Case::Two => -self.beta,
        }
    }
}

/// User-supplied weight function with analytic derivatives. A
/// finite-difference consistency gate runs at construction; costs and the
/// Brascamp-Lieb functionals consume the Hessian directly, so a silently
/// wrong derivative would corrupt every downstream margin.
#[derive(Clone)]
pub struct CustomW {
    pub value: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub gradient: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    pub hessian: Arc<dyn Fn(&[f64]) -> SymMatrix + Send + Sync>,
    /// Half-width of the box used for quadrature, truncation and the
    /// consistency gate.
    pub halfwidth: f64,
}

impl core::fmt::Debug for CustomW {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "CustomW(halfwidth={})", self.halfwidth)
    }
}

#[derive(Clone, Debug)]
pub enum WKind {
    /// W(x) = sigma^2 - |x|^2 on its support (Case 1).
    QuadraticBall { sigma: f64 },
    /// W(x) = 1 + |x|^2 (Case 2).
    QuadraticCauchy,
    Custom(CustomW),
}

#[derive(Clone, Debug)]
pub struct WSpec {
    kind: WKind,
    dim: usize,
    scale: f64,
}

impl WSpec {
    pub fn quadratic_ball(sigma: f64, dim: usize) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ball weight requires sigma > 0, got {sigma}"
            )));
        }
        Ok(WSpec {
            kind: WKind::QuadraticBall { sigma },
            dim,
            scale: 1.0,
        })
    }

    pub fn quadratic_cauchy(dim: usize) -> Self {
        WSpec {
            kind: WKind::QuadraticCauchy,
            dim,
            scale: 1.0,
        }
    }

    /// Builds a custom weight and runs the derivative consistency gate:
    /// analytic gradient and Hessian are compared against centered finite
    /// differences of the supplied value at fixed pseudo-random points,
    /// relative tolerance 1e-6.
    pub fn custom(custom: CustomW, dim: usize) -> Result<Self> {
        let spec = WSpec {
            kind: WKind::Custom(custom),
            dim,
            scale: 1.0,
        };
        spec.check_derivative_consistency()?;
        Ok(spec)
    }

    fn check_derivative_consistency(&self) -> Result<()> {
        let hw = match &self.kind {
            WKind::Custom(c) => c.halfwidth,
            _ => return Ok(()),
        };
        let mut rng = Seeded::new(0x5eed);
        let n = self.dim;
        let step = 1e-4 * hw.max(1.0);
        // fourth-order stencil: (f(x-2s) - 8 f(x-s) + 8 f(x+s) - f(x+2s)) / 12s
        let stencil = |f: &dyn Fn(f64) -> f64| -> f64 {
            (f(-2.0 * step) - 8.0 * f(-step) + 8.0 * f(step) - f(2.0 * step)) / (12.0 * step)
        };
        for _ in 0..20 {
            let x: Vec<f64> = (0..n).map(|_| rng.uniform_in(-0.5 * hw, 0.5 * hw)).collect();
            let grad = self.gradient(&x);
            let hess = self.hessian(&x);
            for i in 0..n {
                let shifted = |d: f64| {
                    let mut xs = x.clone();
                    xs[i] += d;
                    xs
                };
                let fd = stencil(&|d| self.value(&shifted(d)));
                let scale = grad[i].abs().max(1.0);
                if (fd - grad[i]).abs() > 1e-6 * scale {
                    return Err(Error::InvalidParameter(format!(
                        "custom W gradient component {i} disagrees with finite differences \
                         ({} vs {fd})",
                        grad[i]
                    )));
                }
                for j in 0..n {
                    let fd2 = stencil(&|d| self.gradient(&shifted(d))[j]);
                    let scale = hess.get(i, j).abs().max(1.0);
                    if (fd2 - hess.get(i, j)).abs() > 1e-6 * scale {
                        return Err(Error::InvalidParameter(format!(
                            "custom W hessian entry ({i},{j}) disagrees with finite differences"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &WKind {
        &self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub(crate) fn rescale(&mut self, factor: f64) {
        self.scale *= factor;
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self.kind, WKind::Custom(_))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match &self.kind {
            WKind::QuadraticBall { sigma } => self.scale * (sigma * sigma - r2),
            WKind::QuadraticCauchy => self.scale * (1.0 + r2),
            WKind::Custom(c) => self.scale * (c.value)(x),
        }
    }

    /// Radial profile W(r e) for radial kinds.
    pub fn radial_value(&self, r: f64) -> f64 {
        match &self.kind {
            WKind::QuadraticBall { sigma } => self.scale * (sigma * sigma - r * r),
            WKind::QuadraticCauchy => self.scale * (1.0 + r * r),
            WKind::Custom(_) => panic!("radial_value on non-radial weight"),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            WKind::QuadraticBall { .. } => x.iter().map(|v| -2.0 * self.scale * v).collect(),
            WKind::QuadraticCauchy => x.iter().map(|v| 2.0 * self.scale * v).collect(),
            WKind::Custom(c) => (c.gradient)(x)
                .into_iter()
                .map(|g| self.scale * g)
                .collect(),
        }
    }

    pub fn hessian(&self, x: &[f64]) -> SymMatrix {
        match &self.kind {
            WKind::QuadraticBall { .. } => SymMatrix::scaled_identity(self.dim, -2.0 * self.scale),
            WKind::QuadraticCauchy => SymMatrix::scaled_identity(self.dim, 2.0 * self.scale),
            WKind::Custom(c) => {
                let mut h = (c.hessian)(x);
                for i in 0..self.dim {
                    for j in i..self.dim {
                        h.set(i, j, self.scale * h.get(i, j));
                    }
                }
                h
            }
        }
    }

    /// Support radius for Case 1 kinds, or the quadrature half-width hint.
    fn box_halfwidth(&self) -> f64 {
        match &self.kind {
            WKind::QuadraticBall { sigma } => *sigma,
            WKind::QuadraticCauchy => f64::INFINITY,
            WKind::Custom(c) => c.halfwidth,
        }
    }
}

/// Which closed-form family a normalizing constant refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstantFamily {
    /// `int (sigma^2 - |x|^2)_+^beta`
    BallBeta,
    /// `int (1 + |x|^2)^{-beta}`
    Cauchy,
}

/// Closed-form normalizing constants:
/// `C_{sigma,beta} = sigma^{2 beta + n} pi^{n/2} Gamma(beta+1) / Gamma(beta + n/2 + 1)`
/// and `C_beta = pi^{n/2} Gamma(beta - n/2) / Gamma(beta)` (requires beta > n/2).
pub fn normalizing_constant(
    family: ConstantFamily,
    n: usize,
    beta: f64,
    sigma: f64,
) -> Result<f64> {
    let nf = n as f64;
    match family {
        ConstantFamily::BallBeta => {
            if !(beta >= 0.0) || !(sigma > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "ball constant requires beta >= 0 and sigma > 0, got beta={beta}, sigma={sigma}"
                )));
            }
            Ok(sigma.powf(2.0 * beta + nf) * PI.powf(nf / 2.0) * gamma(beta + 1.0)
                / gamma(beta + nf / 2.0 + 1.0))
        }
        ConstantFamily::Cauchy => {
            if !(beta > nf / 2.0) {
                return Err(Error::InvalidParameter(format!(
                    "cauchy constant requires beta > n/2 = {}, got {beta}",
                    nf / 2.0
                )));
            }
            Ok(PI.powf(nf / 2.0) * gamma_ratio(beta - nf / 2.0, beta))
        }
    }
}

/// A normalized kappa-concave probability density.
#[derive(Clone, Debug)]
pub struct DensityModel {
    kp: KappaParam,
    w: WSpec,
    z: f64,
    normalized: bool,
}

/// Computes the normalization `Z = int W^{1/kappa}` (closed form for the
/// built-in families, adaptive quadrature otherwise) and rescales
/// `W <- W * Z^{-kappa}` so that the rescaled weight satisfies
/// `int W^{1/kappa} = 1`. Rescaling by a positive constant preserves
/// concavity/convexity.
pub fn normalize(w: WSpec, kp: KappaParam) -> Result<DensityModel> {
    let n = w.dim();
    if kp.beta() == 0.0 {
        return Err(Error::InvalidParameter(String::from(
            "beta = 0 (indicator density) is only supported by normalizing_constant",
        )));
    }
    match (kp.case(), &w.kind) {
        (Case::One, WKind::QuadraticCauchy) | (Case::Two, WKind::QuadraticBall { .. }) => {
            return Err(Error::InvalidParameter(String::from(
                "weight kind does not match the concavity case",
            )))
        }
        (Case::Two, WKind::QuadraticCauchy) => {
            if 2.0 * kp.beta() <= n as f64 {
                return Err(Error::DivergentIntegral(format!(
                    "int (1+|x|^2)^(-beta) diverges for 2 beta <= n (beta={}, n={n})",
                    kp.beta()
                )));
            }
        }
        _ => {}
    }

    let s0 = w.scale();
    let z = match (&w.kind, kp.case()) {
        (WKind::QuadraticBall { sigma }, Case::One) => {
            s0.powf(kp.beta())
                * normalizing_constant(ConstantFamily::BallBeta, n, kp.beta(), *sigma)?
        }
        (WKind::QuadraticCauchy, Case::Two) => {
            s0.powf(-kp.beta()) * normalizing_constant(ConstantFamily::Cauchy, n, kp.beta(), 1.0)?
        }
        _ => {
            let expo = kp.exponent();
            let hw = w.box_halfwidth();
            let (value, _err) = match (n, kp.case()) {
                (1, Case::One) => quad::integrate_symmetric_dyadic(
                    |x| w.value(&[x]).max(0.0).powf(expo),
                    hw,
                    1e-12,
                ),
                (1, Case::Two) => {
                    if hw.is_finite() {
                        quad::integrate_symmetric_dyadic(
                            |x| w.value(&[x]).powf(expo),
                            hw,
                            1e-12,
                        )
                    } else {
                        quad::integrate_real_line(|x| w.value(&[x]).powf(expo), 1e-12)
                    }
                }
                (2, _) | (3, _) => {
                    let lo = vec![-hw; n];
                    let hi = vec![hw; n];
                    quad::integrate_box(
                        |x| {
                            let v = w.value(x);
                            if v <= 0.0 {
                                0.0
                            } else {
                                v.powf(expo)
                            }
                        },
                        &lo,
                        &hi,
                        1e-10,
                    )
                }
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "quadrature normalization supports n <= 3, got n = {n}"
                    )))
                }
            };
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::DivergentIntegral(format!(
                    "normalization integral evaluated to {value}"
                )));
            }
            value
        }
    };

    let mut w = w;
    // W <- W * Z^{-kappa}; then int (W')^{1/kappa} = Z^{-1} * Z = 1.
    w.rescale(z.powf(-kp.kappa()));
    Ok(DensityModel {
        kp,
        w,
        z: 1.0,
        normalized: true,
    })
}

impl DensityModel {
    pub fn kp(&self) -> KappaParam {
        self.kp
    }

    pub fn w(&self) -> &WSpec {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.w.dim()
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Density value W(x)^{1/kappa} / Z; zero outside the support in Case 1.
    pub fn pdf(&self, x: &[f64]) -> f64 {
        let wv = self.w.value(x);
        match self.kp.case() {
            Case::One => {
                if wv <= 0.0 {
                    0.0
                } else {
                    wv.powf(self.kp.beta()) / self.z
                }
            }
            Case::Two => wv.powf(-self.kp.beta()) / self.z,
        }
    }

    /// Radial density profile for radial weights.
    pub fn pdf_radial(&self, r: f64) -> f64 {
        let wv = self.w.radial_value(r);
        match self.kp.case() {
            Case::One => {
                if wv <= 0.0 {
                    0.0
                } else {
                    wv.powf(self.kp.beta()) / self.z
                }
            }
            Case::Two => wv.powf(-self.kp.beta()) / self.z,
        }
    }

    /// Symmetric truncation radius: the support radius in Case 1, or the
    /// radius leaving at most `tail` of the mass outside (found by bisection
    /// on the radial tail) in Case 2.
    pub fn truncation_radius(&self, tail: f64) -> Result<f64> {
        match self.kp.case() {
            Case::One => Ok(self.w.box_halfwidth()),
            Case::Two => {
                if !self.w.is_radial() && self.dim() > 1 {
                    return Ok(self.w.box_halfwidth());
                }
                let n = self.dim();
                let radial = self.w.is_radial();
                let tail_mass = |r0: f64| -> f64 {
                    if radial {
                        let s = crate::special::sphere_area(n);
                        let (v, _) = quad::integrate_half_inf(
                            |r| self.pdf_radial(r) * r.powi(n as i32 - 1),
                            r0,
                            1e-13,
                        );
                        s * v
                    } else {
                        // 1D, not necessarily symmetric: both tails
                        let (hiq, _) = quad::integrate_half_inf(|x| self.pdf(&[x]), r0, 1e-13);
                        let (loq, _) = quad::integrate_half_inf(|x| self.pdf(&[-x]), r0, 1e-13);
                        hiq + loq
                    }
                };
                let mut lo = 0.0;
                let mut hi = 2.0;
                while tail_mass(hi) > tail {
                    hi *= 2.0;
                    if hi > 1e12 {
                        return Err(Error::DivergentIntegral(String::from(
                            "tail mass does not decay; model not integrable",
                        )));
                    }
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if tail_mass(mid) > tail {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-9 * hi.max(1.0) {
                        break;
                    }
                }
                Ok(hi)
            }
        }
    }

    /// 1D working domain [-T, T] (support, or quantile-truncated tails).
    pub fn domain_1d(&self) -> Result<(f64, f64)> {
        if self.dim() != 1 {
            return Err(Error::InvalidParameter(String::from(
                "domain_1d requires a one-dimensional model",
            )));
        }
        let t = self.truncation_radius(COVERAGE_TOLERANCE)?;
        Ok((-t, t))
    }

    /// Density sampled on a uniform grid over the working domain.
    pub fn grid_1d(&self, cells: usize) -> Result<DensityGrid1D> {
        let (a, b) = self.domain_1d()?;
        DensityGrid1D::from_fn(a, b, cells, |x| self.pdf(&[x]))
    }

    /// Short textual id of the model family (matches the CLI grammar).
    pub fn id(&self) -> String {
        match self.w.kind() {
            WKind::QuadraticBall { sigma } => format!(
                "ball:sigma={},beta={},n={}",
                sigma,
                self.kp.beta(),
                self.dim()
            ),
            WKind::QuadraticCauchy => format!("cauchy:beta={},n={}", self.kp.beta(), self.dim()),
            WKind::Custom(_) => format!("custom:beta={},n={}", self.kp.beta(), self.dim()),
        }
    }
}

/// Weighted point cloud or grid representation of a probability measure.
#[derive(Clone, Debug, PartialEq)]
pub enum MeasureKind {
    Grid,
    Cloud,
}

#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub kind: MeasureKind,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>, kind: MeasureKind) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return Err(Error::InvalidParameter(String::from(
                "points and weights must be nonempty and matched",
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidParameter(String::from(
                "weights must be nonnegative",
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "weights must sum to 1 within 1e-12, got {total}"
            )));
        }
        Ok(DiscreteMeasure {
            points,
            weights,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn center_of_mass(&self) -> Vec<f64> {
        let d = self.dim();
        let mut com = vec![0.0; d];
        for (p, &w) in self.points.iter().zip(&self.weights) {
            for k in 0..d {
                com[k] += w * p[k];
            }
        }
        com
    }
}

#[derive(Clone, Debug)]
pub struct GridSpec {
    /// Cells per axis.
    pub cells: usize,
    /// Explicit box; default is the model's truncated support.
    pub bounds: Option<(Vec<f64>, Vec<f64>)>,
}

impl GridSpec {
    pub fn cells(cells: usize) -> Self {
        GridSpec {
            cells,
            bounds: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Discretized {
    pub measure: DiscreteMeasure,
    /// Mass captured by the grid before renormalization.
    pub captured_mass: f64,
}

/// Tensor-grid discretization: cell weights proportional to a per-cell
/// Gauss rule applied to the pdf, renormalized to sum to one. Errors if the
/// grid captures less than `1 - COVERAGE_TOLERANCE` of the mass.
pub fn discretize(m: &DensityModel, spec: &GridSpec) -> Result<Discretized> {
    let n = m.dim();
    if n > 3 {
        return Err(Error::InvalidParameter(String::from(
            "discretize supports n <= 3",
        )));
    }
    let (lo, hi) = match &spec.bounds {
        Some((lo, hi)) => (lo.clone(), hi.clone()),
        None => {
            // leave half the budget to the truncation so the captured-mass
            // gate below is met with room for cell quadrature error
            let t = m.truncation_radius(0.5 * COVERAGE_TOLERANCE)?;
            (vec![-t; n], vec![t; n])
        }
    };
    if spec.cells == 0 {
        return Err(Error::InvalidParameter(String::from(
            "grid needs at least one cell per axis",
        )));
    }
    // 5-point Gauss-Legendre per axis inside each cell (exact to degree 9;
    // the captured-mass bookkeeping needs sub-1e-7 cell quadrature even on
    // coarse grids).
    const GL_X: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const GL_W: [f64; 5] = [
        0.236_926_885_056_189_08,
        0.478_628_670_499_366_47,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_47,
        0.236_926_885_056_189_08,
    ];

    let cells = spec.cells;
    let h: Vec<f64> = (0..n).map(|k| (hi[k] - lo[k]) / cells as f64).collect();
    // cell centers per axis, mirrored bit-exactly on symmetric bounds so
    // that symmetric densities produce symmetric weights
    let centers: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let mut c: Vec<f64> = (0..cells)
                .map(|i| lo[k] + (i as f64 + 0.5) * h[k])
                .collect();
            if lo[k] == -hi[k] {
                for i in 0..cells / 2 {
                    c[cells - 1 - i] = -c[i];
                }
                if cells % 2 == 1 {
                    c[cells / 2] = 0.0;
                }
            }
            c
        })
        .collect();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let center: Vec<f64> = (0..n).map(|k| centers[k][idx[k]]).collect();
        // cell quadrature
        let mut mass = 0.0;
        let mut q = vec![0usize; n];
        loop {
            let mut x = vec![0.0; n];
            let mut wq = 1.0;
            for k in 0..n {
                x[k] = center[k] + 0.5 * h[k] * GL_X[q[k]];
                wq *= 0.5 * h[k] * GL_W[q[k]];
            }
            mass += wq * m.pdf(&x);
            let mut carry = true;
            for k in 0..n {
                if carry {
                    q[k] += 1;
                    if q[k] == GL_X.len() {
                        q[k] = 0;
                    } else {
                        carry = false;
                    }
                }
            }
            if carry {
                break;
            }
        }
        if mass > 0.0 {
            points.push(center);
            weights.push(mass);
        }
        let mut carry = true;
        for k in 0..n {
            if carry {
                idx[k] += 1;
                if idx[k] == cells {
                    idx[k] = 0;
                } else {
                    carry = false;
                }
            }
        }
        if carry {
            break;
        }
    }
    let captured: f64 = weights.iter().sum();
    if captured < 1.0 - COVERAGE_TOLERANCE {
        return Err(Error::GridTooCoarse {
            captured,
            required: 1.0 - COVERAGE_TOLERANCE,
        });
    }
    for w in weights.iter_mut() {
        *w /= captured;
    }
    // absorb accumulated rounding into the heaviest cell so the sum-to-one
    // invariant holds exactly and no tiny tail weight can go negative
    let total: f64 = weights.iter().sum();
    if let Some(argmax) = (0..weights.len()).max_by(|&i, &j| weights[i].total_cmp(&weights[j])) {
        weights[argmax] += 1.0 - total;
    }
    Ok(Discretized {
        measure: DiscreteMeasure::new(points, weights, MeasureKind::Grid)?,
        captured_mass: captured,
    })
}

/// Deterministic sampler: inverse CDF on a dense grid in 1D; radius
/// inverse CDF plus a uniform sphere direction for radial families in
/// higher dimension.
pub fn sample(m: &DensityModel, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::InvalidParameter(String::from(
            "sample count must be >= 1",
        )));
    }
    let n = m.dim();
    let mut rng = Seeded::new(seed);
    const DENSE: usize = 1 << 14;
    if n == 1 {
        let grid = m.grid_1d(DENSE)?;
        let cdf = grid.cdf();
        let out = (0..count)
            .map(|_| vec![quantile_from_cdf(grid.nodes(), &cdf, rng.uniform())])
            .collect();
        return Ok(out);
    }
    if !m.w().is_radial() {
        return Err(Error::InvalidParameter(String::from(
            "sampling in n >= 2 requires a radial family",
        )));
    }
    let t = m.truncation_radius(1e-9)?;
    let r_nodes = uniform_nodes(0.0, t, DENSE);
    let radial: Vec<f64> = r_nodes
        .iter()
        .map(|&r| m.pdf_radial(r) * r.powi(n as i32 - 1))
        .collect();
    let mut cdf = Vec::with_capacity(r_nodes.len());
    cdf.push(0.0);
    let h = r_nodes[1] - r_nodes[0];
    let mut acc = 0.0;
    for i in 1..r_nodes.len() {
        acc += 0.5 * (radial[i - 1] + radial[i]) * h;
        cdf.push(acc);
    }
    for v in cdf.iter_mut() {
        *v /= acc;
    }
    let out = (0..count)
        .map(|_| {
            let r = quantile_from_cdf(&r_nodes, &cdf, rng.uniform());
            let dir = rng.unit_vector(n);
            dir.into_iter().map(|d| d * r).collect()
        })
        .collect();
    Ok(out)
}

/// Outcome of the midpoint concavity test.
#[derive(Clone, Debug)]
pub struct ConcavityCheck {
    pub holds: bool,
    /// (x, y, t) witnessing a violation, when one was found.
    pub witness: Option<(Vec<f64>, Vec<f64>, f64)>,
}

/// Checks the density-level concavity relation at random midpoints:
/// `p(t x + (1-t) y) >= (t p(x)^kappa + (1-t) p(y)^kappa)^{1/kappa}`
/// (the direction of the inner inequality flips with the sign of kappa and
/// is handled by the outer power). Relative tolerance 1e-10.
pub fn midpoint_concavity_check(
    m: &DensityModel,
    trials: usize,
    seed: u64,
) -> Result<ConcavityCheck> {
    if trials == 0 {
        return Err(Error::InvalidParameter(String::from(
            "trials must be >= 1",
        )));
    }
    let kappa = m.kp().kappa();
    let pts = sample(m, 2 * trials, seed)?;
    let mut rng = Seeded::new(seed ^ 0x9e37_79b9_7f4a_7c15);
    let check_pair = |x: &Vec<f64>, y: &Vec<f64>, t: f64| -> Option<ConcavityCheck> {
        let px = m.pdf(x);
        let py = m.pdf(y);
        if px <= 0.0 || py <= 0.0 {
            return None;
        }
        let mid: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(a, b)| t * a + (1.0 - t) * b)
            .collect();
        let pmid = m.pdf(&mid);
        let rhs = (t * px.powf(kappa) + (1.0 - t) * py.powf(kappa)).powf(1.0 / kappa);
        if pmid < rhs * (1.0 - 1e-10) {
            Some(ConcavityCheck {
                holds: false,
                witness: Some((x.clone(), y.clone(), t)),
            })
        } else {
            None
        }
    };
    for pair in pts.chunks_exact(2) {
        let t = rng.uniform_in(0.05, 0.95);
        // distant pair: global shape
        if let Some(bad) = check_pair(&pair[0], &pair[1], t) {
            return Ok(bad);
        }
        // short chord from the same base point: local curvature defects
        // that long chords average out
        let dir = rng.unit_vector(m.dim());
        let step = rng.uniform_in(0.05, 1.5);
        let near: Vec<f64> = pair[0]
            .iter()
            .zip(&dir)
            .map(|(a, d)| a + step * d)
            .collect();
        let t2 = rng.uniform_in(0.05, 0.95);
        if let Some(bad) = check_pair(&pair[0], &near, t2) {
            return Ok(bad);
        }
    }
    Ok(ConcavityCheck {
        holds: true,
        witness: None,
    })
}
