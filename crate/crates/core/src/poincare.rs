//! Weighted Poincare machinery: the F-form constant `h`, the L1-to-F-form
//! transfer, the Cheeger-type consequence used for Cauchy measures, and the
//! fully explicit lower-bound chain with Laplace asymptotics.
//!
//! A validated constant is always family-relative: the inequality is
//! checked on the fixed, versioned test family below, never "for all f".

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::functionals::log_gap_raw;
use crate::grid::{uniform_nodes, weighted_mean, weighted_median};
use crate::measures::{Case, DensityModel};
use crate::quad;
use crate::special::{gamma, ln_gamma, sphere_area};

/// Version tag of the built-in test-function family.
pub const FAMILY_VERSION: &str = "tf-v1";

/// Location convention for `m_f`. The coarea/Cheeger derivation is the
/// median-form argument, so median is the default everywhere; the mean
/// variant ships alongside and reports label which one was used.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Median,
    Mean,
}

pub fn location(values: &[f64], weights: &[f64], loc: Location) -> f64 {
    match loc {
        Location::Median => weighted_median(values, weights),
        Location::Mean => weighted_mean(values, weights),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoincareMethod {
    CauchyChain,
    NumericalSearch,
    UserSupplied,
}

/// A candidate weighted Poincare constant, with its validation status
/// relative to the versioned family.
#[derive(Clone, Debug)]
pub struct PoincareEstimate {
    pub h: f64,
    pub validated: bool,
    pub method: PoincareMethod,
    pub location: Location,
    pub family_size: usize,
    pub family_version: &'static str,
    pub family_hash: u64,
    pub worst_margin: f64,
}

impl PoincareEstimate {
    pub fn user_supplied(h: f64) -> Self {
        PoincareEstimate {
            h,
            validated: false,
            method: PoincareMethod::UserSupplied,
            location: Location::Median,
            family_size: 0,
            family_version: FAMILY_VERSION,
            family_hash: 0,
            worst_margin: f64::NAN,
        }
    }
}

/// A 1D test profile with an analytic (a.e.) derivative. For n >= 2 the
/// profile is applied radially: f(x) = profile(|x|).
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub derivative: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

fn fnv1a_mix(hash: &mut u64, x: f64) {
    let bits = x.to_bits();
    for shift in [0, 8, 16, 24, 32, 40, 48, 56] {
        *hash ^= (bits >> shift) & 0xff;
        *hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
}

/// The fixed 50-function family `tf-v1`: 20 polynomial-times-decay
/// profiles (degrees 1..4, five decay scales), 15 compact bumps and 15
/// piecewise-linear tents (five centers, three widths each).
pub fn test_family() -> (Vec<TestFunction>, u64) {
    let mut family = Vec::with_capacity(50);
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;

    let centers = [0.0, 0.5, 1.0, 1.5, 2.5];
    let widths = [0.5, 1.0, 2.0];
    let decay_scales = [0.5, 1.0, 2.0, 4.0, 8.0];

    for degree in 1..=4usize {
        for &s in &decay_scales {
            fnv1a_mix(&mut hash, degree as f64);
            fnv1a_mix(&mut hash, s);
            let d = degree as i32;
            family.push(TestFunction {
                name: format!("poly{degree}-decay{s}"),
                value: Arc::new(move |x: f64| x.powi(d) / (1.0 + (x / s) * (x / s))),
                derivative: Arc::new(move |x: f64| {
                    let u = 1.0 + (x / s) * (x / s);
                    (d as f64 * x.powi(d - 1) * u - x.powi(d) * 2.0 * x / (s * s)) / (u * u)
                }),
            });
        }
    }
    for &c in &centers {
        for &w in &widths {
            fnv1a_mix(&mut hash, c);
            fnv1a_mix(&mut hash, w);
            family.push(TestFunction {
                name: format!("bump-c{c}-w{w}"),
                value: Arc::new(move |x: f64| {
                    let u = (x - c) / w;
                    if u.abs() < 1.0 {
                        (1.0 - 1.0 / (1.0 - u * u)).exp()
                    } else {
                        0.0
                    }
                }),
                derivative: Arc::new(move |x: f64| {
                    let u = (x - c) / w;
                    if u.abs() < 1.0 {
                        let denom = 1.0 - u * u;
                        (1.0 - 1.0 / denom).exp() * (-2.0 * u / (denom * denom)) / w
                    } else {
                        0.0
                    }
                }),
            });
        }
    }
    for &c in &centers {
        for &w in &widths {
            fnv1a_mix(&mut hash, c + 1000.0);
            fnv1a_mix(&mut hash, w);
            family.push(TestFunction {
                name: format!("tent-c{c}-w{w}"),
                value: Arc::new(move |x: f64| (1.0 - (x - c).abs() / w).max(0.0)),
                derivative: Arc::new(move |x: f64| {
                    let u = x - c;
                    if u.abs() >= w || u == 0.0 {
                        0.0
                    } else if u > 0.0 {
                        -1.0 / w
                    } else {
                        1.0 / w
                    }
                }),
            });
        }
    }
    debug_assert_eq!(family.len(), 50);
    (family, hash)
}

/// One model's quadrature context: nodes, the measure's density along the
/// evaluation axis (radial weight included for n >= 2) and the weight W.
pub struct FamilyEvaluator {
    nodes: Vec<f64>,
    /// density of the pushforward onto the evaluation axis
    dens: Vec<f64>,
    w_vals: Vec<f64>,
    omega_axis: Vec<f64>, // |x| along the axis
    h_step: f64,
}

impl FamilyEvaluator {
    pub fn new(model: &DensityModel) -> Result<Self> {
        const CELLS: usize = 32768;
        let n = model.dim();
        if n == 1 {
            let t = model.truncation_radius(1e-7)?;
            let nodes = uniform_nodes(-t, t, CELLS);
            let dens: Vec<f64> = nodes.iter().map(|&x| model.pdf(&[x])).collect();
            let w_vals: Vec<f64> = nodes.iter().map(|&x| model.w().value(&[x])).collect();
            let omega_axis = nodes.iter().map(|&x| x.abs()).collect();
            let h_step = nodes[1] - nodes[0];
            Ok(FamilyEvaluator {
                nodes,
                dens,
                w_vals,
                omega_axis,
                h_step,
            })
        } else {
            if !model.w().is_radial() {
                return Err(Error::InvalidParameter(String::from(
                    "family evaluation in n >= 2 requires a radial model",
                )));
            }
            let t = model.truncation_radius(1e-7)?;
            let nodes = uniform_nodes(0.0, t, CELLS);
            let s = sphere_area(n);
            let dens: Vec<f64> = nodes
                .iter()
                .map(|&r| s * model.pdf_radial(r) * r.powi(n as i32 - 1))
                .collect();
            let w_vals: Vec<f64> = nodes.iter().map(|&r| model.w().radial_value(r)).collect();
            let omega_axis = nodes.clone();
            let h_step = nodes[1] - nodes[0];
            Ok(FamilyEvaluator {
                nodes,
                dens,
                w_vals,
                omega_axis,
                h_step,
            })
        }
    }

    fn integrate(&self, integrand: impl Fn(usize, f64) -> f64) -> f64 {
        let vals: Vec<f64> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, &x)| integrand(i, x) * self.dens[i])
            .collect();
        crate::grid::simpson(&vals, self.h_step)
    }

    pub fn location_of(&self, f: &TestFunction, loc: Location) -> f64 {
        let vals: Vec<f64> = self.nodes.iter().map(|&x| (f.value)(x)).collect();
        location(&vals, &self.dens, loc)
    }

    /// `int F(|grad f|) W dmu`
    pub fn flog_gradient_weighted(&self, f: &TestFunction) -> f64 {
        self.integrate(|i, x| log_gap_raw((f.derivative)(x).abs()) * self.w_vals[i].max(0.0))
    }

    /// `int F(h |f - m_f|) dmu`
    pub fn flog_deviation(&self, f: &TestFunction, h: f64, m_f: f64) -> f64 {
        self.integrate(|_, x| log_gap_raw(h * ((f.value)(x) - m_f).abs()))
    }

    /// `int |f - m_f| dmu`
    pub fn l1_deviation(&self, f: &TestFunction, m_f: f64) -> f64 {
        self.integrate(|_, x| ((f.value)(x) - m_f).abs())
    }

    /// `int |grad f| omega dmu` for `omega(x) = a + b |x|`
    pub fn l1_gradient_weighted(&self, f: &TestFunction, a: f64, b: f64) -> f64 {
        self.integrate(|i, x| (f.derivative)(x).abs() * (a + b * self.omega_axis[i]))
    }

    /// `int F(omega |grad f| / h) dmu` for `omega(x) = a + b |x|`
    pub fn flog_gradient_omega(&self, f: &TestFunction, a: f64, b: f64, h: f64) -> f64 {
        self.integrate(|i, x| {
            log_gap_raw((a + b * self.omega_axis[i]) * (f.derivative)(x).abs() / h)
        })
    }
}

/// Checks `int F(|grad f|) W dmu >= int F(h |f - m_f|) dmu` over the family;
/// validated when every margin clears -1e-8.
pub fn verify_weighted_poincare(
    model: &DensityModel,
    h: f64,
    method: PoincareMethod,
    loc: Location,
) -> Result<PoincareEstimate> {
    if !(h >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "h must be nonnegative, got {h}"
        )));
    }
    let (family, family_hash) = test_family();
    let ev = FamilyEvaluator::new(model)?;
    let mut worst = f64::INFINITY;
    for f in &family {
        let m_f = ev.location_of(f, loc);
        let margin = ev.flog_gradient_weighted(f) - ev.flog_deviation(f, h, m_f);
        if margin < worst {
            worst = margin;
        }
    }
    Ok(PoincareEstimate {
        h,
        validated: worst >= -1e-8,
        method,
        location: loc,
        family_size: family.len(),
        family_version: FAMILY_VERSION,
        family_hash,
        worst_margin: worst,
    })
}

/// Finds a family-validated constant by per-function bisection on `h`
/// (the deviation side is continuous and increasing in `h`), backed off by
/// ten percent, then re-validated.
pub fn numerical_h_search(model: &DensityModel, loc: Location) -> Result<PoincareEstimate> {
    let (family, _) = test_family();
    let ev = FamilyEvaluator::new(model)?;
    let mut h_min = f64::INFINITY;
    for f in &family {
        let m_f = ev.location_of(f, loc);
        let lhs = ev.flog_gradient_weighted(f);
        if ev.l1_deviation(f, m_f) < 1e-12 {
            continue; // essentially constant under mu
        }
        let mut hi = 1.0;
        let mut lo = 0.0;
        while ev.flog_deviation(f, hi, m_f) <= lhs {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                break;
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if ev.flog_deviation(f, mid, m_f) <= lhs {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        h_min = h_min.min(lo);
    }
    if !h_min.is_finite() {
        return Err(Error::NotValidated(String::from(
            "numerical search found no finite constant",
        )));
    }
    verify_weighted_poincare(model, 0.9 * h_min, PoincareMethod::NumericalSearch, loc)
}

/// Margins of the L1-to-F-form transfer on the family: the hypothesis
/// `int |grad f / h| omega dmu >= int |f - m_f| dmu` and the conclusion
/// `int F(omega |grad f| / h) dmu >= int F(|f - m_f|) dmu`.
/// `omega(x) = a + b |x|`. No pass/fail: whenever the hypothesis margin is
/// nonnegative the conclusion margin must be too; both vectors are
/// reported.
pub struct TransferMargins {
    pub hypothesis: Vec<f64>,
    pub conclusion: Vec<f64>,
}

pub fn l1_transfer_check(
    model: &DensityModel,
    omega: (f64, f64),
    h: f64,
    loc: Location,
) -> Result<TransferMargins> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(String::from("transfer needs h > 0")));
    }
    let (family, _) = test_family();
    let ev = FamilyEvaluator::new(model)?;
    let (a, b) = omega;
    let mut hypothesis = Vec::with_capacity(family.len());
    let mut conclusion = Vec::with_capacity(family.len());
    for f in &family {
        let m_f = ev.location_of(f, loc);
        hypothesis.push(ev.l1_gradient_weighted(f, a, b) / h - ev.l1_deviation(f, m_f));
        conclusion.push(
            ev.flog_gradient_omega(f, a, b, h)
                - ev.integrate(|_, x| log_gap_raw(((f.value)(x) - m_f).abs())),
        );
    }
    Ok(TransferMargins {
        hypothesis,
        conclusion,
    })
}

/// Outcome of the Cheeger-type L1 inequality scan.
pub struct CheegerCheck {
    /// Per-function margins of
    /// `(C/2) int |grad f| omega dmu - int |f - m_f| dmu` with
    /// `omega(x) = m + |x| / (beta - n)`.
    pub margins: Vec<f64>,
    /// Smallest constant validating the family: a numerical lower bound on
    /// the theorem's constant.
    pub minimal_c: f64,
    pub m: f64,
}

pub fn cheeger_l1_check(
    model: &DensityModel,
    c_kappa: f64,
    loc: Location,
) -> Result<CheegerCheck> {
    if model.kp().case() != Case::Two {
        return Err(Error::InvalidParameter(String::from(
            "the Cheeger-type bound applies to Case 2 models",
        )));
    }
    if !(c_kappa > 0.0) {
        return Err(Error::InvalidParameter(String::from("C_kappa must be > 0")));
    }
    let beta = model.kp().beta();
    let n = model.dim() as f64;
    if beta <= n {
        return Err(Error::InvalidParameter(String::from(
            "the weight m + |x|/(beta - n) needs beta > n",
        )));
    }
    let gm = geometric_mean_radius(model)?;
    let (family, _) = test_family();
    let ev = FamilyEvaluator::new(model)?;
    let mut margins = Vec::with_capacity(family.len());
    let mut minimal_c = 0.0f64;
    for f in &family {
        let m_f = ev.location_of(f, loc);
        let lhs = ev.l1_deviation(f, m_f);
        let grad_term = ev.l1_gradient_weighted(f, gm.m, 1.0 / (beta - n));
        margins.push(c_kappa / 2.0 * grad_term - lhs);
        if grad_term > 1e-12 {
            minimal_c = minimal_c.max(2.0 * lhs / grad_term);
        }
    }
    Ok(CheegerCheck {
        margins,
        minimal_c,
        m: gm.m,
    })
}

/// Geometric mean radius `m = exp(int log|x| dmu)` together with the moment
/// radii `m_q = (int |x|^q dmu)^{1/q}`.
#[derive(Clone, Debug)]
pub struct GeometricMeanRadius {
    pub m: f64,
    pub m1: f64,
    pub m_q: Vec<(f64, f64)>,
}

/// `int_0^inf r^s (1 + r^2)^{-beta} dr = Gamma((s+1)/2) Gamma(beta - (s+1)/2) / (2 Gamma(beta))`,
/// for s > -1 and 2 beta > s + 1.
pub fn radial_integral(s: f64, beta: f64) -> Result<f64> {
    if !(s > -1.0) || 2.0 * beta <= s + 1.0 {
        return Err(Error::DivergentIntegral(format!(
            "radial integral needs s > -1 and 2 beta > s + 1 (s={s}, beta={beta})"
        )));
    }
    let a = (s + 1.0) / 2.0;
    Ok((ln_gamma(a) + ln_gamma(beta - a) - ln_gamma(beta)).exp() / 2.0)
}

/// `m` for an arbitrary unnormalized radial density (quadrature oracle).
pub fn log_radius_mean<F: Fn(f64) -> f64 + Copy>(radial_density: F, n: usize) -> f64 {
    let weight = move |r: f64| radial_density(r) * r.powi(n as i32 - 1);
    let (mass_near, _) = quad::integrate(weight, 0.0, 1.0, 1e-12);
    let (mass_far, _) = quad::integrate_half_inf(weight, 1.0, 1e-12);
    let (log_near, _) = quad::integrate(move |r| weight(r) * r.ln(), 0.0, 1.0, 1e-12);
    let (log_far, _) = quad::integrate_half_inf(move |r| weight(r) * r.ln(), 1.0, 1e-12);
    ((log_near + log_far) / (mass_near + mass_far)).exp()
}

/// Computes `m` by quadrature and `m_1` by the radial-integral ratio, for a
/// Case 2 Cauchy-type model; asserts the arithmetic-geometric direction
/// `m <= m_1`.
pub fn geometric_mean_radius(model: &DensityModel) -> Result<GeometricMeanRadius> {
    if model.kp().case() != Case::Two {
        return Err(Error::InvalidParameter(String::from(
            "geometric mean radius is defined for Case 2 models",
        )));
    }
    if !model.w().is_radial() {
        return Err(Error::InvalidParameter(String::from(
            "geometric mean radius requires a radial model",
        )));
    }
    let n = model.dim();
    let beta = model.kp().beta();
    let m = log_radius_mean(|r| model.pdf_radial(r), n);
    if !m.is_finite() || m <= 0.0 {
        return Err(Error::DivergentIntegral(format!(
            "log-radius moment evaluated to {m}"
        )));
    }
    let base = radial_integral(n as f64 - 1.0, beta)?;
    let m1 = radial_integral(n as f64, beta)? / base;
    let mut m_q = Vec::new();
    for &q in &[0.5, 1.0, 1.5, 2.0, 3.0, 4.0] {
        if 2.0 * beta > q + n as f64 {
            let mq = (radial_integral(n as f64 - 1.0 + q, beta)? / base).powf(1.0 / q);
            m_q.push((q, mq));
        }
    }
    if m > m1 + 1e-10 {
        return Err(Error::NotValidated(format!(
            "geometric mean radius {m} exceeded the first moment radius {m1}"
        )));
    }
    Ok(GeometricMeanRadius { m, m1, m_q })
}

/// `I_n(beta) = int_0^inf r^n (1 + r^2)^{-beta} dr` by quadrature, together
/// with the Laplace asymptotic `(1/2) Gamma((n+1)/2) beta^{-(n+1)/2}` and
/// their ratio (which approaches 1 as beta grows).
pub fn laplace_radial_moment(n: usize, beta: f64) -> Result<(f64, f64, f64)> {
    let nf = n as f64;
    if 2.0 * beta <= nf + 1.0 {
        return Err(Error::DivergentIntegral(format!(
            "I_n(beta) diverges for 2 beta <= n + 1 (n={n}, beta={beta})"
        )));
    }
    let weight = |r: f64| r.powf(nf) * (-beta * (1.0 + r * r).ln()).exp();
    let (near, _) = quad::integrate(weight, 0.0, 1.0, 1e-13);
    let (far, _) = quad::integrate_half_inf(weight, 1.0, 1e-13);
    let numeric = near + far;
    let asymptotic = 0.5 * gamma((nf + 1.0) / 2.0) * beta.powf(-(nf + 1.0) / 2.0);
    Ok((numeric, asymptotic, numeric / asymptotic))
}

/// Output of the explicit Cauchy chain.
#[derive(Clone, Debug)]
pub struct CauchyHBound {
    /// `1 / (6 C max(m, 1/(beta-n)))` with the computed geometric mean `m`.
    pub h: f64,
    /// Same bound with `m` replaced by the envelope form `C_env sqrt(n beta)`.
    pub h_asymptotic: f64,
    pub m: f64,
    /// Computed envelope constant for `m_1 <= C_env sqrt(n beta)`.
    pub envelope_constant: f64,
}

/// The explicit weighted Poincare lower bound for the generalized Cauchy
/// family: `h = 1 / (6 C_kappa max(m, 1/(beta - n)))`. The computed
/// geometric mean `m` is used (it is sharper than its `sqrt(n beta)`
/// envelope, which is reported alongside).
pub fn cauchy_h_lower_bound(n: usize, beta: f64, c_kappa: f64) -> Result<CauchyHBound> {
    if !(beta > n as f64) {
        return Err(Error::InvalidParameter(format!(
            "the chain requires beta > n (got beta={beta}, n={n})"
        )));
    }
    if !(c_kappa > 0.0) {
        return Err(Error::InvalidParameter(String::from("C_kappa must be > 0")));
    }
    let model = crate::measures::normalize(
        crate::measures::WSpec::quadratic_cauchy(n),
        crate::measures::KappaParam::case2(beta, n)?,
    )?;
    let gm = geometric_mean_radius(&model)?;
    let h = 1.0 / (6.0 * c_kappa * gm.m.max(1.0 / (beta - n as f64)));
    // envelope constant over a reference grid of larger beta values
    let mut envelope = 0.0f64;
    for &b in &[
        beta,
        2.0 * beta,
        10.0 * beta,
        100.0 * (n as f64 + 1.0),
    ] {
        if 2.0 * b > n as f64 + 1.0 {
            let m1 = radial_integral(n as f64, b)? / radial_integral(n as f64 - 1.0, b)?;
            envelope = envelope.max(m1 / (n as f64 * b).sqrt());
        }
    }
    let h_asym = 1.0
        / (6.0
            * c_kappa
            * (envelope * (n as f64 * beta).sqrt()).max(1.0 / (beta - n as f64)));
    Ok(CauchyHBound {
        h,
        h_asymptotic: h_asym,
        m: gm.m,
        envelope_constant: envelope,
    })
}
