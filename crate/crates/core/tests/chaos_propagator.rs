use zakai_chaos::chaos_propagator::{
    default_substeps, precompute_table, precompute_table_with_stats, solve_phi, PropagatorTable, TemporalBasis,
};
use zakai_chaos::galerkin::{assemble, GalerkinSystem};
use zakai_chaos::hermite_space::{default_nodes_per_axis, gauss_hermite_grid, SpatialBasis};
use zakai_chaos::models::BuiltinModel;
use zakai_chaos::multiindex::MultiIndex;
use zakai_chaos::Error;

fn system(name: &str, k: usize) -> GalerkinSystem<f64> {
    let model = BuiltinModel::<f64>::by_name(name).unwrap().filter_model().unwrap();
    let basis = SpatialBasis::new(1, k);
    let grid = gauss_hermite_grid(1, default_nodes_per_axis(&basis));
    assemble(&model, &basis, &grid).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn coefficients_are_linear_in_the_initial_vector() {
    let sys = system("correlated-ou", 6);
    let tb = TemporalBasis::new(0.1, 3).unwrap();
    let alpha = MultiIndex::from_entries(1, [(1, 1, 1), (3, 1, 1)]).unwrap();
    let z1: Vec<f64> = (0..6).map(|i| (i as f64 * 0.7).cos()).collect();
    let z2: Vec<f64> = (0..6).map(|i| 1.0 / (i as f64 + 1.0)).collect();
    let (a, b) = (2.5, -0.4);
    let mixed: Vec<f64> = z1.iter().zip(&z2).map(|(u, v)| a * u + b * v).collect();
    let s = default_substeps(3);
    let lhs = solve_phi(&sys, &tb, &alpha, &mixed, s).unwrap();
    let p1 = solve_phi(&sys, &tb, &alpha, &z1, s).unwrap();
    let p2 = solve_phi(&sys, &tb, &alpha, &z2, s).unwrap();
    let rhs: Vec<f64> = p1.iter().zip(&p2).map(|(u, v)| a * u + b * v).collect();
    assert!(max_diff(&lhs, &rhs) < 1e-12);
}

#[test]
fn step_halving_is_fourth_order() {
    let sys = system("ou-linear", 8);
    let tb = TemporalBasis::new(0.1, 4).unwrap();
    let alpha = MultiIndex::from_entries(1, [(2, 1, 1), (4, 1, 1)]).unwrap();
    let zeta: Vec<f64> = (0..8).map(|i| if i == 0 { 1.0 } else { 0.1 }).collect();
    let runs: Vec<Vec<f64>> = [16, 32, 64].iter().map(|&s| solve_phi(&sys, &tb, &alpha, &zeta, s).unwrap()).collect();
    let first = max_diff(&runs[0], &runs[1]);
    let second = max_diff(&runs[1], &runs[2]);
    assert!(second <= first / 15.0, "{first:e} then {second:e}");
}

#[test]
fn layered_build_reads_only_the_previous_layer() {
    let sys = system("correlated-ou", 4);
    let tb = TemporalBasis::new(0.1, 3).unwrap();
    let (table, stats) = precompute_table_with_stats(&sys, &tb, 3, default_substeps(3)).unwrap();
    assert_eq!(stats.layer_sizes, vec![1, 3, 6, 10]);
    assert_eq!(stats.lookups_outside_previous_layer, 0);
    assert!(stats.lookups > 0 && stats.max_resident_layers <= 2);
    assert_eq!(table.indices().len(), 20);
}

#[test]
fn table_files_round_trip_bit_exactly() {
    let sys = system("correlated-ou", 5);
    let tb = TemporalBasis::new(0.05, 2).unwrap();
    let table = precompute_table(&sys, &tb, 2, default_substeps(2)).unwrap();

    let mut text = Vec::new();
    table.write_text(&mut text).unwrap();
    let from_text = PropagatorTable::<f64>::read(text.as_slice()).unwrap();
    assert_eq!(from_text, table);

    let mut binary = Vec::new();
    table.write_binary(&mut binary).unwrap();
    let from_binary = PropagatorTable::<f64>::read(binary.as_slice()).unwrap();
    assert_eq!(from_binary, table);
    for (a, b) in table.blocks().iter().zip(from_binary.blocks()) {
        assert!(a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    let head = String::from_utf8(text.clone()).unwrap();
    assert!(head.starts_with("version=1\nK=5\nr=1\n"));

    let truncated = &text[..text.len() / 2];
    assert!(PropagatorTable::<f64>::read(truncated).is_err());
    let mut wrong_version = head.replacen("version=1", "version=9", 1).into_bytes();
    wrong_version.truncate(200);
    assert!(matches!(PropagatorTable::<f64>::read(wrong_version.as_slice()), Err(Error::Parse { .. })));
}
