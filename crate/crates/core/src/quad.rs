//! Adaptive quadrature: nested Gauss-Kronrod (G7, K15) in 1D with interval
//! bisection, transforms for half-infinite ranges, and iterated rules for
//! 2D/3D boxes. Dimensions above 3 are out of scope.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::special::sphere_area;

// 15-point Kronrod abscissae (positive half) with the embedded 7-point
// Gauss rule; standard QUADPACK constants with their published digits.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_33,
    0.949_107_912_342_758_524_526_189_684_047_85,
    0.864_864_423_359_769_072_789_712_788_640_93,
    0.741_531_185_599_394_439_863_864_773_280_79,
    0.586_087_235_467_691_130_294_144_838_258_73,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_24,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_52,
    0.140_653_259_715_525_918_745_189_590_510_24,
    0.169_004_726_639_267_902_826_583_426_598_55,
    0.190_350_578_064_785_409_913_256_402_421_01,
    0.204_432_940_075_298_892_414_161_999_234_65,
    0.209_482_141_084_727_828_012_999_174_891_71,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_08,
    0.279_705_391_489_276_667_901_467_771_423_78,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_33,
];

/// One Gauss-Kronrod pass over [a, b]: returns (K15 value, |K15 - G7|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

#[derive(Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// Adaptive integral of `f` over the finite interval [a, b].
///
/// Bisects the segment with the largest error estimate until the summed
/// estimate drops below `tol` (absolute, with a mild relative floor) or the
/// segment budget is exhausted; the result is then still returned, carrying
/// its error estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let (v, e) = gk15(&f, a, b);
    let mut segs = Vec::with_capacity(64);
    segs.push(Segment {
        a,
        b,
        value: v,
        error: e,
    });
    const MAX_SEGS: usize = 2000;
    loop {
        let mut total = 0.0;
        let mut err = 0.0;
        let mut worst = 0usize;
        let mut worst_err = -1.0;
        for (i, s) in segs.iter().enumerate() {
            total += s.value;
            err += s.error;
            if s.error > worst_err {
                worst_err = s.error;
                worst = i;
            }
        }
        let target = tol.max(1e-15 * total.abs());
        if err <= target || segs.len() >= MAX_SEGS || worst_err <= 0.0 {
            return (total, err);
        }
        let s = segs.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            // interval exhausted at f64 resolution
            segs.push(s);
            let total: f64 = segs.iter().map(|s| s.value).sum();
            let err: f64 = segs.iter().map(|s| s.error).sum();
            return (total, err);
        }
        let (v1, e1) = gk15(&f, s.a, mid);
        let (v2, e2) = gk15(&f, mid, s.b);
        segs.push(Segment {
            a: s.a,
            b: mid,
            value: v1,
            error: e1,
        });
        segs.push(Segment {
            a: mid,
            b: s.b,
            value: v2,
            error: e2,
        });
    }
}

/// Integral over the symmetric interval `[-halfwidth, halfwidth]` with
/// dyadic panels `[0,1]`, `[1,2]`, `[2,4]`, ... (mirrored): integrands
/// sharply concentrated near the origin never slip between the nodes of
/// one huge starting panel.
pub fn integrate_symmetric_dyadic<F: Fn(f64) -> f64>(f: F, halfwidth: f64, tol: f64) -> (f64, f64) {
    let mut edges = alloc::vec![0.0f64];
    let mut e = 1.0f64.min(halfwidth);
    loop {
        edges.push(e);
        if e >= halfwidth {
            break;
        }
        e = (e * 2.0).min(halfwidth);
    }
    let panel_tol = tol / (2.0 * edges.len() as f64);
    let mut total = 0.0;
    let mut err = 0.0;
    for w in edges.windows(2) {
        let (v1, e1) = integrate(&f, w[0], w[1], panel_tol);
        let (v2, e2) = integrate(&f, -w[1], -w[0], panel_tol);
        total += v1 + v2;
        err += e1 + e2;
    }
    (total, err)
}

/// Integral of `f` over [a, +inf), via the substitution x = a + t/(1-t).
///
/// Requires x^2 f(x) -> finite as x -> +inf (the transformed integrand is
/// then bounded near t = 1; Kronrod nodes never touch the endpoint).
pub fn integrate_half_inf<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> (f64, f64) {
    integrate(
        |t| {
            let om = 1.0 - t;
            let x = a + t / om;
            f(x) / (om * om)
        },
        0.0,
        1.0,
        tol,
    )
}

/// Integral of `f` over the whole real line.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, tol: f64) -> (f64, f64) {
    let (pos, ep) = integrate_half_inf(&f, 0.0, 0.5 * tol);
    let (neg, en) = integrate_half_inf(|x| f(-x), 0.0, 0.5 * tol);
    (pos + neg, ep + en)
}

/// Iterated adaptive integral over an axis-aligned box in 2 or 3 dimensions.
pub fn integrate_box<F: Fn(&[f64]) -> f64>(f: F, lo: &[f64], hi: &[f64], tol: f64) -> (f64, f64) {
    assert_eq!(lo.len(), hi.len());
    match lo.len() {
        1 => integrate(|x| f(&[x]), lo[0], hi[0], tol),
        2 => integrate(
            |x| integrate(|y| f(&[x, y]), lo[1], hi[1], tol * 0.1).0,
            lo[0],
            hi[0],
            tol,
        ),
        3 => integrate(
            |x| {
                integrate(
                    |y| integrate(|z| f(&[x, y, z]), lo[2], hi[2], tol * 0.01).0,
                    lo[1],
                    hi[1],
                    tol * 0.1,
                )
                .0
            },
            lo[0],
            hi[0],
            tol,
        ),
        d => panic!("integrate_box supports dimensions 1..=3, got {d}"),
    }
}

/// Integral over R^n of a radial function x |-> g(|x|):
/// `sphere_area(n) * int_0^inf g(r) r^{n-1} dr`, with the radial integral
/// split at r = 1 to keep the r^{n-1} log-type behaviour resolved.
pub fn integrate_radial<F: Fn(f64) -> f64>(g: F, n: usize, tol: f64) -> (f64, f64) {
    let s = sphere_area(n);
    let h = |r: f64| g(r) * r.powi(n as i32 - 1);
    let (near, e1) = integrate(&h, 0.0, 1.0, 0.5 * tol / s);
    let (far, e2) = integrate_half_inf(&h, 1.0, 0.5 * tol / s);
    (s * (near + far), s * (e1 + e2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let (v, _) = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-12);
        assert!((v - 8.0).abs() < 1e-13);
    }

    #[test]
    fn arctangent_tail() {
        // int_{-inf}^{inf} dx/(1+x^2) = pi
        let (v, e) = integrate_real_line(|x| 1.0 / (1.0 + x * x), 1e-12);
        assert!((v - PI).abs() < 1e-10, "v={v} err={e}");
    }

    #[test]
    fn oscillatory_needs_subdivision() {
        let (v, _) = integrate(|x| (10.0 * x).sin(), 0.0, PI, 1e-12);
        let exact = (1.0 - (10.0 * PI).cos()) / 10.0;
        assert!((v - exact).abs() < 1e-10);
    }

    #[test]
    fn gaussian_box_2d() {
        let (v, _) = integrate_box(
            |x| (-x[0] * x[0] - x[1] * x[1]).exp(),
            &[-8.0, -8.0],
            &[8.0, 8.0],
            1e-10,
        );
        assert!((v - PI).abs() < 1e-8);
    }

    #[test]
    fn radial_gaussian_3d() {
        let (v, _) = integrate_radial(|r| (-r * r).exp(), 3, 1e-10);
        assert!((v - PI.powf(1.5)).abs() < 1e-8);
    }
}
