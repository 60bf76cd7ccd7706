use rayon::prelude::*;

use zakai_chaos::galerkin::{assemble, dissipativity_gap, integrate_galerkin_sde, GalerkinSystem};
use zakai_chaos::hermite_space::{default_nodes_per_axis, gauss_hermite_grid, project, SpatialBasis};
use zakai_chaos::model_sim::path_rng;
use zakai_chaos::models::{BuiltinModel, CubicSensor};
use zakai_chaos::reference::LinearModel;

use rand::Rng;
use rand_distr::StandardNormal;

fn linear(rho: f64) -> LinearModel<f64> {
    LinearModel { a: -1.0, sigma: 1.0, rho, h: 1.0, m0: 0.0, p0: 1.0 }
}

fn system_for(name: &str, k: usize) -> GalerkinSystem<f64> {
    let model = BuiltinModel::<f64>::by_name(name).unwrap().filter_model().unwrap();
    let basis = SpatialBasis::new(1, k);
    let grid = gauss_hermite_grid(1, default_nodes_per_axis(&basis));
    assemble(&model, &basis, &grid).unwrap()
}

#[test]
fn assembly_matches_the_integrated_by_parts_form() {
    // For dX = aX dt + σ dW + ρ dV, dY = hX dt + dV:
    //   L* p = ½(σ² + ρ²) p'' - a p - a x p',   M* p = h x p - ρ p'.
    for rho in [0.0, 0.5, -1.2] {
        let m = linear(rho);
        let model = m.filter_model().unwrap();
        let k = 12;
        let basis = SpatialBasis::new(1, k);
        let grid = gauss_hermite_grid(1, default_nodes_per_axis(&basis));
        let sys = assemble(&model, &basis, &grid).unwrap();
        let fine = gauss_hermite_grid::<f64>(1, 80);
        let diff = 0.5 * (m.sigma * m.sigma + rho * rho);
        let (mut a_err, mut b_err): (f64, f64) = (0.0, 0.0);
        for i in 0..k {
            for j in 0..k {
                let (mut a_ij, mut b_ij) = (0.0, 0.0);
                for (x, w) in fine.iter() {
                    let jets = basis.jets_at(x);
                    let (v, g, h2) = (jets.value(j), jets.gradient(j)[0], jets.hessian(j)[0]);
                    let adj_l = diff * h2 - m.a * v - m.a * x[0] * g;
                    let adj_m = m.h * x[0] * v - rho * g;
                    a_ij += w * jets.value(i) * adj_l;
                    b_ij += w * jets.value(i) * adj_m;
                }
                a_err = a_err.max((sys.drift_matrix()[(i, j)] - a_ij).abs());
                b_err = b_err.max((sys.noise_matrices()[0][(i, j)] - b_ij).abs());
            }
        }
        assert!(a_err < 1e-8, "rho {rho}: drift matrix differs by {a_err:e}");
        assert!(b_err < 1e-8, "rho {rho}: noise matrix differs by {b_err:e}");
    }
}

#[test]
fn uncorrelated_noise_matrix_is_multiplication_by_the_sensor() {
    let sensor = CubicSensor::<f64>::default();
    let model = sensor.filter_model().unwrap();
    let k = 10;
    let basis = SpatialBasis::new(1, k);
    let grid = gauss_hermite_grid(1, default_nodes_per_axis(&basis));
    let sys = assemble(&model, &basis, &grid).unwrap();
    let fine = gauss_hermite_grid::<f64>(1, 160);
    let doubled = gauss_hermite_grid::<f64>(1, 2 * grid.len());
    let b = &sys.noise_matrices()[0];
    let (mut default_err, mut doubled_err): (f64, f64) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let product = |x: &[f64]| sensor.sensor(x[0]) * basis.eval(i, x).unwrap() * basis.eval(j, x).unwrap();
            let same_rule = grid.integrate(product);
            let accurate = fine.integrate(product);
            assert!((b[(i, j)] - same_rule).abs() < 1e-13, "B[{i},{j}] = {} vs {same_rule}", b[(i, j)]);
            default_err = default_err.max((b[(i, j)] - accurate).abs() / accurate.abs().max(1.0));
            doubled_err = doubled_err.max((doubled.integrate(product) - accurate).abs() / accurate.abs().max(1.0));
        }
    }
    // the saturated sensor is not polynomial, so the default rule is only
    // accurate to a few parts in 1e4 and refining it must help
    assert!(default_err < 1e-3, "{default_err:e}");
    assert!(doubled_err < default_err, "{doubled_err:e} vs {default_err:e}");
    assert!(b.max_abs_diff(&b.transpose()) < 1e-14);
}

#[test]
fn regression_dissipativity_gap_saturates_for_bounded_sensor() {
    // Values recorded from this implementation; the sensor is bounded, so
    // the gap must level off as K grows.
    let recorded = [8.497186154763586, 23.03610460515759, 25.221568857023065];
    let gaps: Vec<f64> = [4, 8, 16, 32].iter().map(|&k| dissipativity_gap(&system_for("cubic-sensor", k))).collect();
    for (g, want) in gaps.iter().zip(recorded) {
        assert!((g - want).abs() <= 0.1 * want, "gap {g} drifted from {want}");
    }
    let steps: Vec<f64> = gaps.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(steps.windows(2).all(|s| s[1] <= s[0]), "{gaps:?}");
    assert!(gaps[3] <= 1.1 * gaps[2], "{gaps:?}");
}

#[test]
fn linear_sensor_gap_grows_with_k() {
    // h(x) = x is unbounded, so nothing keeps the gap K-independent
    let gaps: Vec<f64> = [4, 8, 16].iter().map(|&k| dissipativity_gap(&system_for("ou-linear", k))).collect();
    assert!(gaps.windows(2).all(|w| w[1] > w[0]), "{gaps:?}");
}

#[test]
fn scalar_system_matches_geometric_brownian_motion() {
    // K = 1 with A = a, B = b is dp = a p dt + b p dY, solved by
    // p(T) = p(0) exp((a - b²/2) T + b Y(T)).
    let (a, b) = (-0.3, 0.8);
    let sys = GalerkinSystem::from_matrices(
        zakai_chaos::linalg::Matrix::from_row_major(1, 1, vec![a]).unwrap(),
        vec![zakai_chaos::linalg::Matrix::from_row_major(1, 1, vec![b]).unwrap()],
        SpatialBasis::new(1, 1),
    )
    .unwrap();
    let steps = 1 << 14;
    let dt = 1.0 / steps as f64;
    let mut total = 0.0;
    for p in 0..50 {
        let mut rng = path_rng(21, p);
        let mut y = vec![vec![0.0]];
        for _ in 0..steps {
            let last = y.last().unwrap()[0];
            y.push(vec![last + dt.sqrt() * rng.sample::<f64, _>(StandardNormal)]);
        }
        let out = integrate_galerkin_sde(&sys, &y, dt, &[1.0], steps).unwrap();
        let exact = ((a - 0.5 * b * b) + b * y[steps][0]).exp();
        total += (out[1][0] - exact).powi(2);
    }
    assert!((total / 50.0).sqrt() < 0.02);
}

#[test]
fn euler_oracle_converges_strongly() {
    let sys = system_for("correlated-ou", 8);
    let model = BuiltinModel::<f64>::by_name("correlated-ou").unwrap().filter_model().unwrap();
    let basis = sys.basis().clone();
    let grid = gauss_hermite_grid(1, default_nodes_per_axis(&basis));
    let p0 = model.initial_density().clone();
    let zeta = project(|x| p0(x), &basis, &grid).unwrap();
    let (horizon, coarse) = (0.5, 256usize);
    let finest = 4 * coarse;
    let dt = horizon / finest as f64;
    let errors: Vec<(f64, f64)> = (0..100u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(8, p);
            let mut y = vec![vec![0.0]];
            for _ in 0..finest {
                let last = y.last().unwrap()[0];
                y.push(vec![last + dt.sqrt() * rng.sample::<f64, _>(StandardNormal)]);
            }
            let at = |stride: usize| -> Vec<f64> {
                let sub: Vec<Vec<f64>> = y.iter().step_by(stride).cloned().collect();
                let steps = sub.len() - 1;
                integrate_galerkin_sde(&sys, &sub, dt * stride as f64, &zeta, steps).unwrap().pop().unwrap()
            };
            let reference = at(1);
            let dist = |v: Vec<f64>| v.iter().zip(&reference).map(|(u, w)| (u - w).powi(2)).sum::<f64>();
            (dist(at(4)), dist(at(2)))
        })
        .collect();
    let coarse_err = errors.iter().map(|e| e.0).sum::<f64>().sqrt();
    let half_err = errors.iter().map(|e| e.1).sum::<f64>().sqrt();
    assert!(coarse_err / half_err >= 1.5, "{coarse_err:e} vs {half_err:e}");
}
