use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use zakai_chaos::galerkin::Density;
use zakai_chaos::model_sim::{path_rng, sample_initial, simulate, simulate_with_increments, SimulationConfig};
use zakai_chaos::models::BuiltinModel;

#[test]
fn parallel_and_sequential_paths_agree() {
    let model = BuiltinModel::<f64>::by_name("correlated-ou").unwrap().filter_model().unwrap();
    let cfg = SimulationConfig { horizon: 0.2, dt_sim: 0.001, dt_obs: 0.005, seed: 31 };
    let sequential: Vec<_> = (0..16).map(|p| simulate(&model, &cfg, p).unwrap()).collect();
    let parallel: Vec<_> = (0..16usize).into_par_iter().rev().map(|p| simulate(&model, &cfg, p as u64).unwrap()).collect();
    let parallel: Vec<_> = parallel.into_iter().rev().collect();
    assert_eq!(sequential, parallel);
}

#[test]
fn refining_the_step_with_the_same_noise_converges() {
    let model = BuiltinModel::<f64>::by_name("ou-linear").unwrap().filter_model().unwrap();
    let (horizon, finest) = (1.0, 1024usize);
    let dt = horizon / finest as f64;
    let mut diffs = [0.0, 0.0];
    for p in 0..100 {
        let mut rng = path_rng(3, p);
        let dw: Vec<Vec<f64>> = (0..finest).map(|_| vec![dt.sqrt() * rng.sample::<f64, _>(StandardNormal)]).collect();
        let dv: Vec<Vec<f64>> = (0..finest).map(|_| vec![dt.sqrt() * rng.sample::<f64, _>(StandardNormal)]).collect();
        let end = |stride: usize| -> f64 {
            let sum = |inc: &[Vec<f64>]| -> Vec<Vec<f64>> {
                inc.chunks(stride).map(|c| vec![c.iter().map(|v| v[0]).sum()]).collect()
            };
            let (w, v) = (sum(&dw), sum(&dv));
            let path = simulate_with_increments(&model, &[0.4], dt * stride as f64, &w, &v, w.len()).unwrap();
            path.x[1][0]
        };
        let (x4, x2, x1) = (end(4), end(2), end(1));
        diffs[0] += (x4 - x2).powi(2);
        diffs[1] += (x2 - x1).powi(2);
    }
    let ratio = (diffs[0] / diffs[1]).sqrt();
    assert!(ratio >= 1.3, "refinement ratio {ratio}");
}

#[test]
fn observation_increments_are_dominated_by_noise() {
    let model = BuiltinModel::<f64>::by_name("cubic-sensor").unwrap().filter_model().unwrap();
    let delta = 0.01;
    let cfg = SimulationConfig { horizon: 1.0, dt_sim: delta / 10.0, dt_obs: delta, seed: 12 };
    let increments: Vec<f64> = (0..200u64)
        .into_par_iter()
        .flat_map_iter(|p| {
            let path = simulate(&model, &cfg, p).unwrap();
            path.y.windows(2).map(|w| w[1][0] - w[0][0]).collect::<Vec<_>>()
        })
        .collect();
    let n = increments.len() as f64;
    let mean = increments.iter().sum::<f64>() / n;
    let var = increments.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((var / delta - 1.0).abs() < 0.05, "increment variance {var} over window {delta}");
}

fn normal_cdf(x: f64) -> f64 {
    // erf approximation with absolute error below 1.5e-7
    let z = x.abs() / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * z);
    let poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erf = 1.0 - poly * (-z * z).exp();
    if x >= 0.0 {
        0.5 * (1.0 + erf)
    } else {
        0.5 * (1.0 - erf)
    }
}

#[test]
fn initial_samples_pass_a_kolmogorov_smirnov_band() {
    let density: Density<f64> =
        std::sync::Arc::new(|x: &[f64]| (-x[0] * x[0] / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt());
    let count = 5000;
    let mut xs = sample_initial(&density, (-12.0, 12.0), count, 8).unwrap();
    xs.sort_by(f64::total_cmp);
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            (f - i as f64 / count as f64).abs().max(((i + 1) as f64 / count as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value
    assert!(d < 1.63 / (count as f64).sqrt(), "KS distance {d}");
}

#[test]
fn truth_and_observation_files_are_line_oriented() {
    let model = BuiltinModel::<f64>::by_name("ou-linear").unwrap().filter_model().unwrap();
    let cfg = SimulationConfig { horizon: 0.05, dt_sim: 0.01, dt_obs: 0.01, seed: 1 };
    let path = simulate(&model, &cfg, 0).unwrap();
    let mut truth = Vec::new();
    path.write_truth(&mut truth).unwrap();
    let text = String::from_utf8(truth).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    for (line, (t, x)) in lines.iter().zip(path.times.iter().zip(&path.x)) {
        let cols: Vec<f64> = line.split(' ').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols, vec![*t, x[0]]);
    }
    let mut obs = Vec::new();
    path.observation_record().unwrap().write(&mut obs).unwrap();
    let obs = String::from_utf8(obs).unwrap();
    assert!(obs.starts_with("delta_obs="));
    assert_eq!(obs.lines().nth(1), Some("r=1"));
}
