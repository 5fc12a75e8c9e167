//! End-to-end verification of the transport inequalities, the entropy
//! decomposition identity behind them, the linearization limits, and the
//! dimensional Brascamp-Lieb inequalities they produce.
//!
//! The 1D path is the precision path: relative entropy by Simpson
//! quadrature, the Kantorovich side through the monotone rearrangement
//! (optimal here: every cost in play is submodular), displacement
//! derivatives by centered differences.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::functionals::{
    cost_c, cost_tilde, relative_entropy, relative_entropy_quad, CostSpec,
};
use crate::grid::{simpson, DensityGrid1D};
use crate::measures::{discretize, Case, DensityModel, DiscreteMeasure, GridSpec, MeasureKind};
use crate::poincare::PoincareEstimate;
use crate::quad;
use crate::transport::{monotone_map_1d, solve_discrete_ot, CostMatrix, MonotoneMap1D};

/// One verified inequality instance.
#[derive(Clone, Copy, Debug)]
pub struct InequalityCase {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl InequalityCase {
    pub fn from_sides(lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let margin = lhs - rhs;
        InequalityCase {
            lhs,
            rhs,
            margin,
            tolerance,
            pass: margin >= -tolerance,
        }
    }
}

/// Perturbation directions for the verification batteries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbationKind {
    /// Smooth compact bump, off-center.
    Bump,
    /// Odd direction x * decay.
    Odd,
    /// Even direction (x^2 - const) * decay.
    Even,
}

impl PerturbationKind {
    pub fn name(&self) -> &'static str {
        match self {
            PerturbationKind::Bump => "bump",
            PerturbationKind::Odd => "odd",
            PerturbationKind::Even => "even",
        }
    }
}

/// A mean-zero direction `g` sampled on the model grid, with its strength.
/// Invariants enforced at construction: `int g rho = 0` (and
/// `int x g rho = 0` when center-of-mass matching is on) to quadrature
/// precision, sup norm 1, and `1 + eps g >= 0`.
#[derive(Clone, Debug)]
pub struct PerturbationSpec {
    pub g: Vec<f64>,
    pub epsilon: f64,
    pub match_center_of_mass: bool,
}

impl PerturbationSpec {
    pub fn build(
        model: &DensityModel,
        grid: &DensityGrid1D,
        kind: PerturbationKind,
        epsilon: f64,
        match_center_of_mass: bool,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in [0, 1), got {epsilon}"
            )));
        }
        let span = grid.hi();
        let case = model.kp().case();
        let raw: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&x| match kind {
                PerturbationKind::Bump => {
                    let u = (x - 0.3 * span) / (0.35 * span);
                    if u.abs() < 1.0 {
                        (1.0 - 1.0 / (1.0 - u * u)).exp()
                    } else {
                        0.0
                    }
                }
                // cubic-type odd direction: survives the projection onto
                // the complement of {1, x} that center-of-mass matching
                // applies (a plain linear direction would vanish there)
                PerturbationKind::Odd => match case {
                    Case::One => x * (x * x - 0.5 * span * span),
                    Case::Two => {
                        let d = 1.0 + x * x;
                        x * (x * x - 1.0) / (d * d)
                    }
                },
                PerturbationKind::Even => match case {
                    Case::One => x * x - 1.0,
                    Case::Two => (x * x - 1.0) / (1.0 + x * x),
                },
            })
            .collect();
        Self::from_values(grid, raw, epsilon, match_center_of_mass)
    }

    /// Projects raw direction values onto the admissible set (orthogonal to
    /// constants, and to x when center-of-mass matching is requested, in
    /// L2 of the grid measure) and normalizes to sup norm 1.
    pub fn from_values(
        grid: &DensityGrid1D,
        mut g: Vec<f64>,
        epsilon: f64,
        match_center_of_mass: bool,
    ) -> Result<Self> {
        let mass = grid.mass();
        // two Gram-Schmidt passes keep both moments at quadrature precision
        for _ in 0..2 {
            let mean = grid.integrate_values_against(&g) / mass;
            for v in g.iter_mut() {
                *v -= mean;
            }
            if match_center_of_mass {
                let xg: Vec<f64> = grid.nodes().iter().zip(&g).map(|(&x, &v)| x * v).collect();
                let num = grid.integrate_values_against(&xg);
                let x2: Vec<f64> = grid.nodes().iter().map(|&x| x * x).collect();
                let den = grid.integrate_values_against(&x2);
                let coef = num / den;
                for (v, &x) in g.iter_mut().zip(grid.nodes()) {
                    *v -= coef * x;
                }
            }
        }
        let sup = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sup <= 0.0 {
            return Err(Error::InvalidParameter(String::from(
                "perturbation direction vanished after projection",
            )));
        }
        for v in g.iter_mut() {
            *v /= sup;
        }
        let spec = PerturbationSpec {
            g,
            epsilon,
            match_center_of_mass,
        };
        spec.validate(grid)?;
        Ok(spec)
    }

    pub fn validate(&self, grid: &DensityGrid1D) -> Result<()> {
        let mean = grid.integrate_values_against(&self.g);
        if mean.abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "perturbation mean {mean} exceeds 1e-10"
            )));
        }
        if self.match_center_of_mass {
            let xg: Vec<f64> = grid
                .nodes()
                .iter()
                .zip(&self.g)
                .map(|(&x, &v)| x * v)
                .collect();
            let first = grid.integrate_values_against(&xg);
            if first.abs() > 1e-10 {
                return Err(Error::InvalidParameter(format!(
                    "perturbation first moment {first} exceeds 1e-10"
                )));
            }
        }
        if self.g.iter().any(|&v| 1.0 + self.epsilon * v < 0.0) {
            return Err(Error::InvalidParameter(String::from(
                "1 + eps g is negative somewhere on the grid",
            )));
        }
        Ok(())
    }

    /// The perturbed density `(1 + eps g) rho` on the same grid.
    pub fn apply(&self, grid: &DensityGrid1D) -> Result<DensityGrid1D> {
        let pdf: Vec<f64> = grid
            .values()
            .iter()
            .zip(&self.g)
            .map(|(&p, &gv)| p * (1.0 + self.epsilon * gv))
            .collect();
        DensityGrid1D::new(grid.nodes().to_vec(), pdf)
    }
}

/// Base transport cost as a scalar closure, zero wherever the source
/// density vanishes (Case 1 boundary nodes carry no mass).
fn base_cost_1d(spec: &CostSpec, x: f64, y: f64) -> f64 {
    if spec.kp.case() == Case::One && spec.w.value(&[x]) <= 0.0 {
        return 0.0;
    }
    cost_c(&[x], &[y], spec).unwrap_or(0.0)
}

fn tilde_cost_1d(spec: &CostSpec, x: f64, y: f64) -> f64 {
    cost_tilde(&[x], &[y], spec)
}

fn model_grid_pair(
    model: &DensityModel,
    rho: &DensityGrid1D,
) -> Result<(DensityGrid1D, MonotoneMap1D)> {
    let base = DensityGrid1D::new(
        rho.nodes().to_vec(),
        rho.nodes().iter().map(|&x| model.pdf(&[x])).collect(),
    )?;
    let map = monotone_map_1d(&base, rho)?;
    Ok((base, map))
}

/// Transport inequality, 1D precision path:
/// `relative entropy >= W_{c}(rho_model, rho)` with the Bregman cost.
pub fn verify_transport_inequality(
    model: &DensityModel,
    rho: &DensityGrid1D,
    tolerance: f64,
) -> Result<InequalityCase> {
    let lhs = relative_entropy(rho, model)?;
    let (base, map) = model_grid_pair(model, rho)?;
    let spec = CostSpec::base(model.kp(), model.w().clone());
    let rhs = crate::transport::map_cost(&map, &base, |x, y| base_cost_1d(&spec, x, y));
    Ok(InequalityCase::from_sides(lhs, rhs, tolerance))
}

/// Transport inequality on a tensor grid through the exact LP
/// (n in {2, 3}; looser tolerance tied to the grid resolution).
pub fn verify_transport_inequality_nd<G>(
    model: &DensityModel,
    g: G,
    epsilon: f64,
    cells: usize,
    tolerance: f64,
) -> Result<InequalityCase>
where
    G: Fn(&[f64]) -> f64,
{
    let disc = discretize(model, &GridSpec::cells(cells))?;
    // project the direction to zero mean against the discrete weights
    let raw: Vec<f64> = disc.measure.points.iter().map(|p| g(p)).collect();
    let mean: f64 = raw
        .iter()
        .zip(&disc.measure.weights)
        .map(|(v, w)| v * w)
        .sum();
    let sup = raw
        .iter()
        .map(|v| (v - mean).abs())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let gp: Vec<f64> = raw.iter().map(|v| (v - mean) / sup).collect();

    let mut weights: Vec<f64> = disc
        .measure
        .weights
        .iter()
        .zip(&gp)
        .map(|(&w, &gv)| w * (1.0 + epsilon * gv))
        .collect();
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    let fix = 1.0 - weights.iter().sum::<f64>();
    if let Some(last) = weights.last_mut() {
        *last += fix;
    }
    let nu = DiscreteMeasure::new(disc.measure.points.clone(), weights, MeasureKind::Grid)?;

    let spec = CostSpec::base(model.kp(), model.w().clone());
    let cost = CostMatrix::from_fn(&disc.measure, &nu, |x, y| {
        if spec.kp.case() == Case::One && spec.w.value(x) <= 0.0 {
            0.0
        } else {
            cost_c(x, y, &spec).unwrap_or(0.0)
        }
    })?;
    let rhs = solve_discrete_ot(&disc.measure, &nu, &cost)?.total_cost();

    let lhs = relative_entropy_quad(
        |x| {
            let v = g(x);
            model.pdf(x) * (1.0 + epsilon * (v - mean) / sup)
        },
        model,
        1e-9,
    )?;
    Ok(InequalityCase::from_sides(lhs, rhs, tolerance))
}

/// The three terms of the entropy decomposition along the Brenier map, and
/// the residual of their identity: relative entropy minus transported cost
/// minus the weighted determinant-gap term.
#[derive(Clone, Copy, Debug)]
pub struct DecompositionCheck {
    pub rel_entropy: f64,
    pub cost_term: f64,
    pub gap_term: f64,
    pub residual: f64,
}

fn det_tangent_gap_scalar(tprime: f64, model: &DensityModel) -> f64 {
    let beta = model.kp().beta();
    match model.kp().case() {
        Case::One => {
            let t = tprime.max(1e-300);
            beta * t.powf(-1.0 / beta) - beta + (tprime - 1.0)
        }
        Case::Two => {
            let t = tprime.max(0.0);
            -beta * t.powf(1.0 / beta) + beta + (tprime - 1.0)
        }
    }
}

/// Verifies the identity
/// `H(rho || rho_model) = int c(x, T x) rho_model + int W G(T') rho_model`
/// on the 1D grid; the residual is pure discretization error and is the
/// strongest single check of the transport-entropy machinery.
pub fn decomposition_residual(
    model: &DensityModel,
    rho: &DensityGrid1D,
) -> Result<DecompositionCheck> {
    let rel_entropy = relative_entropy(rho, model)?;
    let (base, map) = model_grid_pair(model, rho)?;
    let spec = CostSpec::base(model.kp(), model.w().clone());
    let cost_term = crate::transport::map_cost(&map, &base, |x, y| base_cost_1d(&spec, x, y));
    let peak = base.values().iter().fold(0.0f64, |m, &v| m.max(v));
    let gap_vals: Vec<f64> = map
        .grid()
        .iter()
        .zip(map.theta_hess())
        .zip(base.values())
        .map(|((&x, &hess), &p)| {
            // beyond f64 CDF resolution the finite-difference T' collapses
            // to zero on mass-less nodes; their true contribution scales
            // like p^{1 - 1/beta} and is negligible, so drop them instead
            // of feeding a spurious zero into the determinant power
            if p < 1e-13 * peak {
                return 0.0;
            }
            let w = model.w().value(&[x]).max(0.0);
            w * det_tangent_gap_scalar(1.0 + hess, model) * p
        })
        .collect();
    let gap_term = simpson(&gap_vals, base.spacing());
    Ok(DecompositionCheck {
        rel_entropy,
        cost_term,
        gap_term,
        residual: (rel_entropy - cost_term - gap_term).abs(),
    })
}

/// Quantitative transport inequality (both cases): relative entropy against
/// the combined cost `c + c~`, where the remainder prefactor follows the
/// case and `h` must be a validated weighted Poincare constant.
pub fn verify_quantitative_transport(
    model: &DensityModel,
    rho: &DensityGrid1D,
    h: &PoincareEstimate,
    c: f64,
    tolerance: f64,
) -> Result<InequalityCase> {
    if !h.validated {
        return Err(Error::NotValidated(format!(
            "h = {} was not validated on the test family (method {:?}, worst margin {}); \
             refusing to assert the quantitative inequality with it",
            h.h, h.method, h.worst_margin
        )));
    }
    // center-of-mass hypothesis
    let com_rho = rho.integrate_against(|x| x) / rho.mass();
    let (base, map) = model_grid_pair(model, rho)?;
    let com_model = base.integrate_against(|x| x) / base.mass();
    if (com_rho - com_model).abs() > 1e-6 {
        return Err(Error::DomainViolation(format!(
            "center of mass mismatch {} vs {}",
            com_rho, com_model
        )));
    }
    let lhs = relative_entropy(rho, model)?;
    let spec = CostSpec::with_remainder(model.kp(), model.w().clone(), c, h.h);
    let rhs = crate::transport::map_cost(&map, &base, |x, y| {
        base_cost_1d(&spec, x, y) + tilde_cost_1d(&spec, x, y)
    });
    Ok(InequalityCase::from_sides(lhs, rhs, tolerance))
}

/// Remainder form: `[H - W_c] - W_{c~} >= 0` (the superadditivity route).
pub fn remainder_margin(
    model: &DensityModel,
    rho: &DensityGrid1D,
    h: &PoincareEstimate,
    c: f64,
    tolerance: f64,
) -> Result<InequalityCase> {
    if !h.validated {
        return Err(Error::NotValidated(String::from(
            "remainder check needs a validated h",
        )));
    }
    let lhs_entropy = relative_entropy(rho, model)?;
    let (base, map) = model_grid_pair(model, rho)?;
    let spec = CostSpec::with_remainder(model.kp(), model.w().clone(), c, h.h);
    let w_base = crate::transport::map_cost(&map, &base, |x, y| base_cost_1d(&spec, x, y));
    let w_tilde = crate::transport::map_cost(&map, &base, |x, y| tilde_cost_1d(&spec, x, y));
    Ok(InequalityCase::from_sides(
        lhs_entropy - w_base,
        w_tilde,
        tolerance,
    ))
}

/// Entropy linearization sweep: `H((1+eps g) rho || rho) / eps^2` along a
/// decreasing epsilon list, Richardson-extrapolated to zero and compared
/// against `((kappa+1)/2) int g^2 rho^{1+kappa}`.
#[derive(Clone, Debug)]
pub struct LinearizationCheck {
    pub ratios: Vec<f64>,
    pub extrapolated: f64,
    pub target: f64,
    pub rel_error: f64,
}

pub fn entropy_linearization(
    model: &DensityModel,
    grid: &DensityGrid1D,
    g: &[f64],
    eps_list: &[f64],
) -> Result<LinearizationCheck> {
    if eps_list.len() < 2 || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(String::from(
            "epsilon list must be strictly decreasing with at least two entries",
        )));
    }
    let kappa = model.kp().kappa();
    let mut ratios = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if g.iter().any(|&v| 1.0 + eps * v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "1 + eps g turns negative at eps = {eps}"
            )));
        }
        let pert = DensityGrid1D::new(
            grid.nodes().to_vec(),
            grid.values()
                .iter()
                .zip(g)
                .map(|(&p, &gv)| p * (1.0 + eps * gv))
                .collect(),
        )?;
        ratios.push(relative_entropy(&pert, model)? / (eps * eps));
    }
    // Neville extrapolation of (eps, ratio) to eps = 0
    let extrapolated = neville_at_zero(eps_list, &ratios);
    let integrand: Vec<f64> = grid
        .values()
        .iter()
        .zip(g)
        .map(|(&p, &gv)| gv * gv * if p > 0.0 { p.powf(1.0 + kappa) } else { 0.0 })
        .collect();
    let target = (kappa + 1.0) / 2.0 * simpson(&integrand, grid.spacing());
    let rel_error = (extrapolated - target).abs() / target.abs().max(1e-300);
    Ok(LinearizationCheck {
        ratios,
        extrapolated,
        target,
        rel_error,
    })
}

fn neville_at_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let mut table = ys.to_vec();
    for level in 1..n {
        for i in 0..(n - level) {
            let xi = xs[i];
            let xj = xs[i + level];
            table[i] = ((0.0 - xj) * table[i] - (0.0 - xi) * table[i + 1]) / (xi - xj);
        }
    }
    table[0]
}

/// Transport-cost linearization lower bound: the rescaled cost
/// `W_c(rho, (1+eps g) rho) / eps^2` must stay above
/// `(1/2) (int g f rho)^2 / int H_y^{-1} f'^2 rho` with
/// `H_y = ((kappa+1)/(-kappa)) W''`.
#[derive(Clone, Debug)]
pub struct TransportLinearization {
    pub ratios: Vec<f64>,
    pub lower_bound: f64,
    pub holds: bool,
}

pub fn transport_linearization_bound(
    model: &DensityModel,
    grid: &DensityGrid1D,
    g: &[f64],
    f_vals: &[f64],
    fprime_vals: &[f64],
    eps_list: &[f64],
    tolerance: f64,
) -> Result<TransportLinearization> {
    let kp = model.kp();
    let factor = match kp.case() {
        Case::One => -(kp.beta() + 1.0),
        Case::Two => kp.beta() - 1.0,
    };
    // quadratic-family Hessian of the cost at the diagonal
    let hy: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| factor * model.w().hessian(&[x]).get(0, 0))
        .collect();
    if hy.iter().any(|&v| v <= 0.0) {
        return Err(Error::DomainViolation(String::from(
            "cost Hessian must be positive definite on the support",
        )));
    }
    let gf: Vec<f64> = g.iter().zip(f_vals).map(|(a, b)| a * b).collect();
    let num = grid.integrate_values_against(&gf);
    let den_vals: Vec<f64> = fprime_vals
        .iter()
        .zip(&hy)
        .map(|(fp, h)| fp * fp / h)
        .collect();
    let den = grid.integrate_values_against(&den_vals);
    let lower_bound = 0.5 * num * num / den;

    let spec = CostSpec::base(kp, model.w().clone());
    let mut ratios = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let pert = DensityGrid1D::new(
            grid.nodes().to_vec(),
            grid.values()
                .iter()
                .zip(g)
                .map(|(&p, &gv)| p * (1.0 + eps * gv))
                .collect(),
        )?;
        let map = monotone_map_1d(grid, &pert)?;
        let w = crate::transport::map_cost(&map, grid, |x, y| base_cost_1d(&spec, x, y));
        ratios.push(w / (eps * eps));
    }
    let holds = ratios.iter().all(|&r| r >= lower_bound - tolerance);
    Ok(TransportLinearization {
        ratios,
        lower_bound,
        holds,
    })
}

// ---------------------------------------------------------------------------
// dimensional Brascamp-Lieb (1D polynomial directions)

pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

fn poly_degree(coeffs: &[f64]) -> usize {
    coeffs
        .iter()
        .rposition(|&c| c != 0.0)
        .unwrap_or(0)
}

/// Whether every integral in the Brascamp-Lieb pair for a degree-d
/// direction converges for this model (Case 1 is compact; Case 2 needs
/// `beta > d + 3/2`).
pub fn bl_integrable(model: &DensityModel, degree: usize) -> bool {
    match model.kp().case() {
        Case::One => true,
        Case::Two => model.kp().beta() > degree as f64 + 1.5,
    }
}

/// Adaptive integral of `f` against the model's working domain: exact
/// real-line tails for integrable Case 2 data, the truncated working
/// domain otherwise (the borderline cases are asserted on that domain).
fn bl_integrate<F: Fn(f64) -> f64>(model: &DensityModel, integrable: bool, f: F) -> Result<f64> {
    match model.kp().case() {
        Case::One => {
            let (a, b) = model.domain_1d()?;
            Ok(quad::integrate(f, a, b, 1e-12).0)
        }
        Case::Two => {
            if integrable {
                Ok(quad::integrate_real_line(f, 1e-12).0)
            } else {
                let (a, b) = model.domain_1d()?;
                Ok(quad::integrate(f, a, b, 1e-12).0)
            }
        }
    }
}

/// Orthogonalizes polynomial coefficients against constants (and against x
/// when `against_linear` is set) in L2 of the model.
pub fn orthogonalized_poly_coeffs(
    model: &DensityModel,
    coeffs: &[f64],
    against_linear: bool,
) -> Result<Vec<f64>> {
    let degree = poly_degree(coeffs);
    let integrable = bl_integrable(model, degree);
    let mut c = coeffs.to_vec();
    for _ in 0..2 {
        let mean = bl_integrate(model, integrable, |x| poly_eval(&c, x) * model.pdf(&[x]))?;
        c[0] -= mean;
        if against_linear {
            let num = bl_integrate(model, integrable, |x| x * poly_eval(&c, x) * model.pdf(&[x]))?;
            let den = bl_integrate(model, integrable, |x| x * x * model.pdf(&[x]))?;
            if c.len() < 2 {
                c.resize(2, 0.0);
            }
            c[1] -= num / den;
        }
    }
    Ok(c)
}

/// Dimensional Brascamp-Lieb inequality for a mean-zero polynomial
/// direction `g` with `f = g W`:
/// `-kappa int (D^2 W)^{-1} f'^2 rho >= int g^2 W rho`.
pub fn verify_dimensional_bl(
    model: &DensityModel,
    g_coeffs: &[f64],
    tolerance: f64,
) -> Result<InequalityCase> {
    if model.dim() != 1 {
        return Err(Error::InvalidParameter(String::from(
            "the Brascamp-Lieb path is one-dimensional",
        )));
    }
    let degree = poly_degree(g_coeffs);
    let integrable = bl_integrable(model, degree);
    let gp = poly_derivative(g_coeffs);
    let kappa = model.kp().kappa();

    let mean = bl_integrate(model, integrable, |x| {
        poly_eval(g_coeffs, x) * model.pdf(&[x])
    })?;
    if mean.abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "g must be mean-zero against the model (got {mean})"
        )));
    }
    let lhs = bl_integrate(model, integrable, |x| {
        let w = model.w().value(&[x]);
        let wpp = model.w().hessian(&[x]).get(0, 0);
        let fprime = poly_eval(&gp, x) * w + poly_eval(g_coeffs, x) * model.w().gradient(&[x])[0];
        -kappa / wpp * fprime * fprime * model.pdf(&[x])
    })?;
    let rhs = bl_integrate(model, integrable, |x| {
        let g = poly_eval(g_coeffs, x);
        g * g * model.w().value(&[x]).max(0.0) * model.pdf(&[x])
    })?;
    Ok(InequalityCase::from_sides(lhs, rhs, tolerance))
}

/// Sharpened Brascamp-Lieb with the Poincare shift in the inverse:
/// Case 1 uses `(-D^2 W + (c/(beta+1)) h I)^{-1}`, Case 2
/// `(D^2 W + (c/(beta(beta-1))) (1-n/beta)^2 h I)^{-1}`; the right side is
/// `beta int g^2 W rho`. The unshifted left side is returned alongside:
/// the shift can only decrease it.
#[derive(Clone, Copy, Debug)]
pub struct SharpenedBl {
    pub case: InequalityCase,
    /// The unshifted (plain Brascamp-Lieb) left side in the same scaling.
    pub lhs_unshifted: f64,
}

pub fn verify_sharpened_bl(
    model: &DensityModel,
    g_coeffs: &[f64],
    h: &PoincareEstimate,
    c: f64,
    tolerance: f64,
) -> Result<SharpenedBl> {
    if !h.validated {
        return Err(Error::NotValidated(String::from(
            "sharpened Brascamp-Lieb needs a validated h",
        )));
    }
    let degree = poly_degree(g_coeffs);
    let integrable = bl_integrable(model, degree);
    let gp = poly_derivative(g_coeffs);
    let beta = model.kp().beta();
    let n = model.dim() as f64;

    let mean = bl_integrate(model, integrable, |x| {
        poly_eval(g_coeffs, x) * model.pdf(&[x])
    })?;
    let first = bl_integrate(model, integrable, |x| {
        x * poly_eval(g_coeffs, x) * model.pdf(&[x])
    })?;
    if mean.abs() > 1e-8 || first.abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "g must be orthogonal to constants and to x (moments {mean}, {first})"
        )));
    }

    let shift = match model.kp().case() {
        Case::One => c / (beta + 1.0) * h.h,
        Case::Two => c / (beta * (beta - 1.0)) * (1.0 - n / beta) * (1.0 - n / beta) * h.h,
    };
    let shifted_inverse = |x: f64| {
        let wpp = model.w().hessian(&[x]).get(0, 0);
        let a = match model.kp().case() {
            Case::One => -wpp + shift,
            Case::Two => wpp + shift,
        };
        1.0 / a
    };
    let fprime =
        |x: f64| poly_eval(&gp, x) * model.w().value(&[x]) + poly_eval(g_coeffs, x) * model.w().gradient(&[x])[0];
    let lhs = bl_integrate(model, integrable, |x| {
        let fp = fprime(x);
        shifted_inverse(x) * fp * fp * model.pdf(&[x])
    })?;
    let lhs_unshifted = bl_integrate(model, integrable, |x| {
        let fp = fprime(x);
        let wpp = model.w().hessian(&[x]).get(0, 0);
        fp * fp / wpp.abs() * model.pdf(&[x])
    })?;
    let rhs = bl_integrate(model, integrable, |x| {
        let g = poly_eval(g_coeffs, x);
        beta * g * g * model.w().value(&[x]).max(0.0) * model.pdf(&[x])
    })?;
    Ok(SharpenedBl {
        case: InequalityCase::from_sides(lhs, rhs, tolerance),
        lhs_unshifted,
    })
}
