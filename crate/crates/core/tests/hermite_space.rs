use zakai_chaos::hermite_space::{gauss_hermite_grid, project, SpatialBasis};

#[test]
fn eigenvalues_grow_like_k_to_the_one_over_d() {
    for (d, k) in [(1usize, 64usize), (2, 120), (3, 200)] {
        let basis = SpatialBasis::<f64>::new(d, k);
        let ratios: Vec<f64> =
            basis.lambdas().iter().enumerate().map(|(i, l)| l / ((i + 1) as f64).powf(1.0 / d as f64)).collect();
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        assert!(lo >= 1.0 && hi <= 5.0, "d = {d}: ratios in [{lo}, {hi}]");
    }
}

#[test]
fn tensor_basis_is_orthonormal_in_two_dimensions() {
    let basis = SpatialBasis::<f64>::new(2, 15);
    let grid = gauss_hermite_grid::<f64>(2, 16);
    for i in 0..basis.size() {
        let unit = project(|x| basis.eval(i, x).unwrap(), &basis, &grid).unwrap();
        for (j, v) in unit.iter().enumerate() {
            assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10, "({i}, {j}) = {v}");
        }
    }
}

#[test]
fn single_precision_basis_agrees_with_double() {
    let b32 = SpatialBasis::<f32>::new(1, 8);
    let b64 = SpatialBasis::<f64>::new(1, 8);
    for &x in &[-2.5f64, -0.3, 0.0, 1.7] {
        for k in 0..8 {
            let lo = b32.eval(k, &[x as f32]).unwrap() as f64;
            let hi = b64.eval(k, &[x]).unwrap();
            assert!((lo - hi).abs() < 1e-5);
        }
    }
}
