use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use zakai_chaos::chaos_propagator::{default_substeps, precompute_table, TemporalBasis};
use zakai_chaos::filter_runtime::{
    density_at, estimate, functional, negative_mass_fraction, step_matrix, xi_integrals, ChaosFilter, FilterState,
    ObservationRecord, ObservationWindow,
};
use zakai_chaos::galerkin::{assemble, integrate_galerkin_sde};
use zakai_chaos::hermite_space::{default_nodes_per_axis, gauss_hermite_grid, project, test_function_grid, SpatialBasis};
use zakai_chaos::model_sim::{path_rng, simulate, SimulationConfig};
use zakai_chaos::models::BuiltinModel;
use zakai_chaos::Error;

fn window(delta: f64, samples: usize, f: impl Fn(f64) -> f64) -> ObservationWindow<f64> {
    let times: Vec<f64> = (0..=samples).map(|i| delta * i as f64 / samples as f64).collect();
    let values = times.iter().map(|&t| vec![f(t)]).collect();
    ObservationWindow::new(times, values).unwrap()
}

#[test]
fn trapezoid_error_quarters_when_spacing_halves() {
    let tb = TemporalBasis::new(1.0, 3).unwrap();
    let path = |t: f64| (3.0 * t).sin() + 0.5 * t * t;
    let xi: Vec<_> = [24, 48, 96].iter().map(|&m| xi_integrals(&window(1.0, m, path), &tb).unwrap()).collect();
    for k in 2..=3 {
        let v: Vec<f64> = xi.iter().map(|x| x.get(k, 1).unwrap()).collect();
        let ratio = (v[0] - v[1]) / (v[1] - v[2]);
        assert!((3.5..=4.5).contains(&ratio), "k = {k}: ratio {ratio}");
    }
    // the first mode is the exact increment at every spacing
    let first: Vec<f64> = xi.iter().map(|x| x.get(1, 1).unwrap()).collect();
    assert!(first.iter().all(|&v| (v - path(1.0) + path(0.0)).abs() < 1e-15));
}

#[test]
fn chaos_solution_approaches_the_euler_oracle() {
    let (delta, fine, paths) = (0.5, 4096usize, 200u64);
    let model = BuiltinModel::<f64>::by_name("ou-linear").unwrap().filter_model().unwrap();
    let basis = SpatialBasis::new(1, 6);
    let grid = gauss_hermite_grid(1, default_nodes_per_axis(&basis));
    let sys = assemble(&model, &basis, &grid).unwrap();
    let p0 = model.initial_density().clone();
    let zeta = project(|x| p0(x), &basis, &grid).unwrap();
    let dt = delta / fine as f64;
    let times: Vec<f64> = (0..=fine).map(|i| i as f64 * dt).collect();
    let ys: Vec<Vec<Vec<f64>>> = (0..paths)
        .map(|p| {
            let mut rng = path_rng(5, p);
            let mut y = vec![vec![0.0]];
            for _ in 0..fine {
                let last = y.last().unwrap()[0];
                y.push(vec![last + dt.sqrt() * rng.sample::<f64, _>(StandardNormal)]);
            }
            y
        })
        .collect();
    let oracle: Vec<Vec<f64>> =
        ys.par_iter().map(|y| integrate_galerkin_sde(&sys, y, dt, &zeta, fine).unwrap().pop().unwrap()).collect();
    let mse = |big_n: u32, n: u32| -> f64 {
        let tb = TemporalBasis::new(delta, n).unwrap();
        let table = precompute_table(&sys, &tb, big_n, default_substeps(n)).unwrap();
        let total: f64 = ys
            .iter()
            .zip(&oracle)
            .map(|(y, want)| {
                let w = ObservationWindow::new(times.clone(), y.clone()).unwrap();
                let q = step_matrix(&table, &xi_integrals(&w, &tb).unwrap()).unwrap();
                q.matvec(&zeta).iter().zip(want).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            })
            .sum();
        total / paths as f64
    };
    let by_n: Vec<f64> = [1, 2, 4].iter().map(|&n| mse(4, n)).collect();
    assert!(by_n.windows(2).all(|w| w[1] < w[0]), "n refinement: {by_n:?}");
    let by_order: Vec<f64> = (2..=5).map(|big_n| mse(big_n, 4)).collect();
    assert!(by_order.windows(2).all(|w| w[1] < w[0]), "order refinement: {by_order:?}");
}

#[test]
fn estimates_ignore_the_overall_scale() {
    let basis = SpatialBasis::<f64>::new(1, 6);
    let tg = test_function_grid(&basis);
    let one = project(|_| 1.0, &basis, &tg).unwrap();
    let x = project(|x| x[0], &basis, &tg).unwrap();
    let state = FilterState::new(0.0, vec![0.5, 0.2, -0.1, 0.05, 0.0, 0.01]).unwrap();
    let base = estimate(&state, &x, &one, 1e-300).unwrap();
    for c in [1e-3, 1.0, 1e3] {
        let scaled = estimate(&state.scaled(c), &x, &one, 1e-300).unwrap();
        assert!((scaled - base).abs() <= 4.0 * f64::EPSILON * base.abs());
    }
    let zero = FilterState::new(0.0, vec![0.0; 6]).unwrap();
    assert!(matches!(estimate(&zero, &x, &one, 1e-12), Err(Error::DegenerateNormalization { .. })));
}

#[test]
fn density_and_functionals_are_linear() {
    let basis = SpatialBasis::<f64>::new(1, 7);
    let mut rng = path_rng(77, 0);
    let mut draw = || -> Vec<f64> { (0..7).map(|_| rng.sample::<f64, _>(StandardNormal)).collect() };
    let (p, q, f) = (draw(), draw(), draw());
    let (a, b) = (1.7, -0.6);
    let mix = FilterState::new(0.0, p.iter().zip(&q).map(|(u, v)| a * u + b * v).collect()).unwrap();
    let sp = FilterState::new(0.0, p).unwrap();
    let sq = FilterState::new(0.0, q).unwrap();
    for x in [-2.0, 0.1, 1.3] {
        let want = a * density_at(&sp, &basis, &[x]).unwrap() + b * density_at(&sq, &basis, &[x]).unwrap();
        assert!((density_at(&mix, &basis, &[x]).unwrap() - want).abs() < 1e-12);
    }
    let want = a * functional(&sp, &f).unwrap() + b * functional(&sq, &f).unwrap();
    assert!((functional(&mix, &f).unwrap() - want).abs() < 1e-12);
}

#[test]
fn negative_part_is_reported_not_clipped() {
    let basis = SpatialBasis::<f64>::new(1, 3);
    let grid = gauss_hermite_grid::<f64>(1, 20);
    let positive = FilterState::new(0.0, vec![1.0, 0.0, 0.0]).unwrap();
    assert_eq!(negative_mass_fraction(&positive, &basis, &grid).unwrap(), 0.0);
    let mixed = FilterState::new(0.0, vec![1.0, 0.0, -0.9]).unwrap();
    let frac = negative_mass_fraction(&mixed, &basis, &grid).unwrap();
    assert!(frac > 0.0 && frac < 0.5);
    assert!(density_at(&mixed, &basis, &[0.0]).unwrap() > 0.0);
    assert!(density_at(&mixed, &basis, &[1.5]).unwrap() < 0.0);
}

#[test]
fn replayed_records_give_identical_runs() {
    let builtin = BuiltinModel::<f64>::by_name("correlated-ou").unwrap();
    let model = builtin.filter_model().unwrap();
    let basis = SpatialBasis::new(1, 8);
    let grid = gauss_hermite_grid(1, default_nodes_per_axis(&basis));
    let sys = assemble(&model, &basis, &grid).unwrap();
    let tb = TemporalBasis::new(0.02, 2).unwrap();
    let table = precompute_table(&sys, &tb, 2, default_substeps(2)).unwrap();
    let tg = test_function_grid(&basis);
    let one = project(|_| 1.0, &basis, &tg).unwrap();
    let x = project(|x| x[0], &basis, &tg).unwrap();
    let filter = ChaosFilter::new(table, one, vec![x]).unwrap();
    let p0 = model.initial_density().clone();
    let p_init = project(|x| p0(x), &basis, &grid).unwrap();

    let cfg = SimulationConfig { horizon: 0.3, dt_sim: 0.00125, dt_obs: 0.00125, seed: 5 };
    let record = simulate(&model, &cfg, 0).unwrap().observation_record().unwrap();
    let mut file = Vec::new();
    record.write(&mut file).unwrap();
    let replayed = ObservationRecord::read(file.as_slice()).unwrap();
    assert_eq!(replayed, record);

    let first = filter.run(&p_init, &record).unwrap();
    let second = filter.run(&p_init, &replayed).unwrap();
    assert_eq!(first, second);
    assert_eq!(first.times.len(), 15);
    assert!((first.times[14] - 0.3).abs() < 1e-12);
}

#[test]
fn coarse_records_are_refused() {
    let tb = TemporalBasis::new(0.1, 4).unwrap();
    let w = window(0.1, 16, |t| t);
    assert!(matches!(xi_integrals(&w, &tb), Err(Error::SpacingTooCoarse { .. })));
    assert!(xi_integrals(&window(0.1, 32, |t| t), &tb).is_ok());
}
