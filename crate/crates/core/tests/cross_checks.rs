//! Cross-module consistency: the monotone-map cost against the exact LP,
//! the two Wasserstein routes, and sampling against the analytic law.

use ctv_core::functionals::{cost_c, CostSpec};
use ctv_core::grid::DensityGrid1D;
use ctv_core::measures::{
    discretize, normalize, sample, DensityModel, GridSpec, KappaParam, WSpec,
};
use ctv_core::rng::Seeded;
use ctv_core::transport::{
    monotone_map_1d, map_cost, pushforward_residual, solve_discrete_ot, wasserstein_p, CostMatrix,
};

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

/// Grid density of the model and a smooth multiplicative perturbation.
fn perturbed_pair(m: &DensityModel, cells: usize, eps: f64) -> (DensityGrid1D, DensityGrid1D) {
    let base = m.grid_1d(cells).unwrap();
    let pert = DensityGrid1D::new(
        base.nodes().to_vec(),
        base.nodes()
            .iter()
            .zip(base.values())
            .map(|(&x, &p)| {
                let g = x / (1.0 + x * x);
                p * (1.0 + eps * g)
            })
            .collect(),
    )
    .unwrap();
    (base, pert)
}

#[test]
fn map_cost_matches_lp_on_translated_pair() {
    // Transporting the beta=3 Cauchy law onto its unit translate: the
    // monotone map is the translation, and the displacement is resolved by
    // the atom grid, so the exact LP agrees with the map quadrature to
    // 1e-4 relative.
    let m = cauchy(3.0, 1);
    let base = m.grid_1d(4096).unwrap();
    let tgt = DensityGrid1D::new(
        base.nodes().iter().map(|&x| x + 1.0).collect(),
        base.values().to_vec(),
    )
    .unwrap();
    let map = monotone_map_1d(&base, &tgt).unwrap();
    let spec = CostSpec::base(m.kp(), m.w().clone());
    let continuum = map_cost(&map, &base, |x, y| cost_c(&[x], &[y], &spec).unwrap_or(0.0));

    let disc = discretize(&m, &GridSpec::cells(1600)).unwrap();
    let shifted: Vec<Vec<f64>> = disc
        .measure
        .points
        .iter()
        .map(|p| vec![p[0] + 1.0])
        .collect();
    let nu = ctv_core::measures::DiscreteMeasure::new(
        shifted,
        disc.measure.weights.clone(),
        ctv_core::measures::MeasureKind::Grid,
    )
    .unwrap();
    let cost =
        CostMatrix::from_fn(&disc.measure, &nu, |x, y| cost_c(x, y, &spec).unwrap_or(0.0))
            .unwrap();
    let lp = solve_discrete_ot(&disc.measure, &nu, &cost)
        .unwrap()
        .total_cost();
    let rel = (continuum - lp).abs() / lp.abs().max(1e-12);
    assert!(rel < 1e-4, "map {continuum} vs lp {lp} (rel {rel})");
}

#[test]
fn map_cost_tracks_lp_on_perturbed_pair() {
    // Multiplicative perturbations displace mass well below the atom
    // spacing, where the discrete LP's cell quantization dominates; the
    // map value must still sit below the LP value and within its
    // quantization envelope.
    let m = cauchy(2.0, 1);
    let (base, pert) = perturbed_pair(&m, 4096, 0.15);
    let map = monotone_map_1d(&base, &pert).unwrap();
    let spec = CostSpec::base(m.kp(), m.w().clone());
    let continuum = map_cost(&map, &base, |x, y| cost_c(&[x], &[y], &spec).unwrap_or(0.0));

    let disc = discretize(&m, &GridSpec::cells(1024)).unwrap();
    let mut weights: Vec<f64> = disc
        .measure
        .points
        .iter()
        .zip(&disc.measure.weights)
        .map(|(p, &w)| {
            let x = p[0];
            w * (1.0 + 0.15 * x / (1.0 + x * x))
        })
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let fix = 1.0 - weights.iter().sum::<f64>();
    *weights.last_mut().unwrap() += fix;
    let nu = ctv_core::measures::DiscreteMeasure::new(
        disc.measure.points.clone(),
        weights,
        ctv_core::measures::MeasureKind::Grid,
    )
    .unwrap();
    let cost =
        CostMatrix::from_fn(&disc.measure, &nu, |x, y| cost_c(x, y, &spec).unwrap_or(0.0))
            .unwrap();
    let lp = solve_discrete_ot(&disc.measure, &nu, &cost)
        .unwrap()
        .total_cost();
    assert!(continuum <= lp * (1.0 + 1e-9), "map {continuum} vs lp {lp}");
    assert!(lp < 10.0 * continuum, "quantization blew up: {lp} vs {continuum}");
}

#[test]
fn quantile_formula_matches_lp_on_128_point_pairs() {
    let mut rng = Seeded::new(2024);
    for trial in 0..20 {
        // random smooth density pair on a shared grid
        let a = rng.uniform_in(0.5, 2.0);
        let b = rng.uniform_in(0.5, 2.0);
        let c = rng.uniform_in(-0.5, 0.5);
        let mu_grid = DensityGrid1D::from_fn(-4.0, 4.0, 128, |x| (-a * x * x).exp()).unwrap();
        let nu_grid =
            DensityGrid1D::from_fn(-4.0, 4.0, 128, |x| (-b * (x - c) * (x - c)).exp()).unwrap();
        let to_measure = |g: &DensityGrid1D| {
            let mut w: Vec<f64> = g.values().to_vec();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            // absorb the rounding gap into the heaviest atom
            let fix = 1.0 - w.iter().sum::<f64>();
            let argmax = (0..w.len()).max_by(|&i, &j| w[i].total_cmp(&w[j])).unwrap();
            w[argmax] += fix;
            ctv_core::measures::DiscreteMeasure::new(
                g.nodes().iter().map(|&x| vec![x]).collect(),
                w,
                ctv_core::measures::MeasureKind::Grid,
            )
            .unwrap()
        };
        let mu = to_measure(&mu_grid);
        let nu = to_measure(&nu_grid);
        for &p in &[1.0, 2.0] {
            let quantile = wasserstein_p(&mu, &nu, p).unwrap();
            let cost = CostMatrix::from_fn(&mu, &nu, |x, y| (x[0] - y[0]).abs().powf(p)).unwrap();
            let lp = solve_discrete_ot(&mu, &nu, &cost).unwrap().total_cost();
            let rel = (quantile - lp).abs() / lp.abs().max(1e-12);
            assert!(rel < 1e-4, "trial {trial} p={p}: {quantile} vs {lp}");
        }
    }
}

#[test]
fn pushforward_residual_shrinks_under_refinement() {
    let m = cauchy(2.0, 1);
    let res = |cells: usize| {
        let (base, pert) = perturbed_pair(&m, cells, 0.1);
        let map = monotone_map_1d(&base, &pert).unwrap();
        pushforward_residual(&map, &base, &pert)
    };
    // second-order decay under grid halving
    let coarse = res(1024);
    let fine = res(2048);
    assert!(coarse < 1e-3, "coarse residual {coarse}");
    assert!(fine < 0.35 * coarse, "no second-order decay: {coarse} -> {fine}");
    // and the sup-norm residual reaches 1e-6 at production resolution
    assert!(res(32768) < 1e-6);
}

#[test]
fn sampler_matches_model_law() {
    // Kolmogorov-Smirnov-style gap between the empirical CDF of the sampler
    // and the quadrature CDF of the model.
    let m = cauchy(3.0, 1);
    let pts = sample(&m, 40_000, 77).unwrap();
    let mut xs: Vec<f64> = pts.into_iter().map(|p| p[0]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let grid = m.grid_1d(8192).unwrap();
    let cdf = grid.cdf();
    let mut worst: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let emp = (i as f64 + 0.5) / xs.len() as f64;
        let idx = grid
            .nodes()
            .partition_point(|&n| n < x)
            .min(grid.len() - 1);
        worst = worst.max((emp - cdf[idx]).abs());
    }
    // KS statistic at n = 40k: ~1.36/sqrt(n) = 0.0068 at 5%; allow 2x
    assert!(worst < 0.014, "KS gap {worst}");
}

#[test]
fn discretize_3d_tensor_grid() {
    let m = ball(1.0, 2.0, 3);
    let d = discretize(&m, &GridSpec::cells(13)).unwrap();
    // cells outside the support carry no atoms
    assert!(d.measure.len() < 13 * 13 * 13);
    assert!(d.captured_mass >= 1.0 - 1e-6);
    let total: f64 = d.measure.weights.iter().sum();
    assert!((total - 1.0).abs() < 1e-14);
    let com = d.measure.center_of_mass();
    for c in com {
        assert!(c.abs() < 1e-12);
    }
}

#[test]
fn simplex_handles_documented_grid_sizes() {
    // 13^3 = 2197 atoms per side, the largest documented tensor grid;
    // exercises the > 2000-node simplex path with a dual-gap certificate
    let src = cauchy(4.0, 3);
    let tgt = ball(2.0, 1.0, 3);
    let mu = discretize(&src, &GridSpec::cells(13)).unwrap().measure;
    let nu = discretize(&tgt, &GridSpec::cells(13)).unwrap().measure;
    let cost = CostMatrix::from_fn(&mu, &nu, |x, y| {
        x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
    })
    .unwrap();
    let plan = solve_discrete_ot(&mu, &nu, &cost).unwrap();
    assert!(plan.dual_gap() <= 1e-9 * (1.0 + plan.total_cost().abs()));
    let (row, col) = plan.marginals(mu.len(), nu.len());
    for (r, w) in row.iter().zip(&mu.weights) {
        assert!((r - w).abs() < 1e-10);
    }
    for (c, w) in col.iter().zip(&nu.weights) {
        assert!((c - w).abs() < 1e-10);
    }
}

#[test]
fn quantile_coupling_matches_lp_at_scale() {
    // 500-atom random-weight instances: the 1D monotone coupling and the
    // simplex must agree to rounding for distance-power costs
    let mut rng = Seeded::new(777);
    for trial in 0..3 {
        let k = 500;
        let xs: Vec<f64> = (0..k).map(|_| rng.uniform_in(-10.0, 10.0)).collect();
        let ys: Vec<f64> = (0..k).map(|_| rng.uniform_in(-10.0, 10.0)).collect();
        let mut wa: Vec<f64> = (0..k).map(|_| rng.uniform_in(0.0, 1.0)).collect();
        let mut wb: Vec<f64> = (0..k).map(|_| rng.uniform_in(0.0, 1.0)).collect();
        for w in [&mut wa, &mut wb] {
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            let argmax = (0..w.len()).max_by(|&i, &j| w[i].total_cmp(&w[j])).unwrap();
            w[argmax] += 1.0 - w.iter().sum::<f64>();
        }
        let mu = ctv_core::measures::DiscreteMeasure::new(
            xs.iter().map(|&x| vec![x]).collect(),
            wa,
            ctv_core::measures::MeasureKind::Cloud,
        )
        .unwrap();
        let nu = ctv_core::measures::DiscreteMeasure::new(
            ys.iter().map(|&y| vec![y]).collect(),
            wb,
            ctv_core::measures::MeasureKind::Cloud,
        )
        .unwrap();
        for p in [1.0, 2.0] {
            let quantile = wasserstein_p(&mu, &nu, p).unwrap();
            let cost =
                CostMatrix::from_fn(&mu, &nu, |x, y| (x[0] - y[0]).abs().powf(p)).unwrap();
            let lp = solve_discrete_ot(&mu, &nu, &cost).unwrap().total_cost();
            let rel = (quantile - lp).abs() / lp.abs().max(1e-12);
            assert!(rel < 1e-9, "trial {trial} p={p}: {quantile} vs {lp}");
        }
    }
}
