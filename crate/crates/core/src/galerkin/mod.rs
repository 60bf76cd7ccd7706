//! The generator `L` and observation operators `M_l` of the filtering model,
//! their Galerkin matrices on the Hermite basis, and a fine-step
//! Euler–Maruyama integrator for the resulting matrix SDE
//!
//! ```text
//! dp = A p dt + Σ_l B_l p dY_l,   A_ij = (L* e_j, e_i),  B_l,ij = (M_l* e_j, e_i).
//! ```

mod model;

pub use model::{Coefficients, Density, Field, FilterModel};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hermite_space::{QuadratureGrid, SpatialBasis};
use crate::linalg::{symmetric_eigenvalues, Matrix};
use crate::scalar::Real;

/// Value, gradient and (row-major) Hessian of a test function at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<T> {
    pub value: T,
    pub gradient: Vec<T>,
    pub hessian: Vec<T>,
}

impl<T: Real> Jet<T> {
    pub fn new(value: T, gradient: Vec<T>, hessian: Vec<T>) -> Self {
        Self { value, gradient, hessian }
    }
}

fn generator_at<T: Real>(c: &Coefficients<T>, gradient: &[T], hessian: &[T]) -> T {
    let d = c.d;
    let mut out = T::zero();
    for i in 0..d {
        for j in 0..d {
            out += T::lit(0.5) * c.diffusion(i, j) * hessian[i * d + j];
        }
        out += c.drift[i] * gradient[i];
    }
    out
}

fn observation_operator_at<T: Real>(c: &Coefficients<T>, l: usize, value: T, gradient: &[T]) -> T {
    let mut out = c.h[l] * value;
    for (i, &g) in gradient.iter().enumerate() {
        out += c.rho(i, l) * g;
    }
    out
}

/// `L g(x) = ½ Σ (σσ* + ρρ*)_ij ∂_ij g + Σ b_i ∂_i g`.
pub fn apply_generator<T: Real>(model: &FilterModel<T>, g: &Jet<T>, x: &[T]) -> Result<T> {
    let d = model.state_dim();
    if g.gradient.len() != d || g.hessian.len() != d * d {
        return Err(Error::DimensionMismatch { expected: d, got: g.gradient.len() });
    }
    let c = model.coefficients_at(x);
    if !c.all_finite() || !g.gradient.iter().chain(&g.hessian).all(|v| v.is_finite()) {
        return Err(Error::NonFinite { context: "generator coefficients or derivatives".into() });
    }
    Ok(generator_at(&c, &g.gradient, &g.hessian))
}

/// `M_l g(x) = h_l g + Σ_i ρ_il ∂_i g`, with `l` a 0-based channel.
pub fn apply_observation_operator<T: Real>(model: &FilterModel<T>, l: usize, g: &Jet<T>, x: &[T]) -> Result<T> {
    if l >= model.obs_dim() {
        return Err(Error::IndexOutOfRange { index: l, len: model.obs_dim() });
    }
    if g.gradient.len() != model.state_dim() {
        return Err(Error::DimensionMismatch { expected: model.state_dim(), got: g.gradient.len() });
    }
    let c = model.coefficients_at(x);
    if !c.all_finite() || !g.value.is_finite() || !g.gradient.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { context: "observation operator coefficients or derivatives".into() });
    }
    Ok(observation_operator_at(&c, l, g.value, &g.gradient))
}

/// Galerkin matrices `A` and `B_1..B_r` on the span of a Hermite basis.
#[derive(Clone, Debug, PartialEq)]
pub struct GalerkinSystem<T> {
    a: Matrix<T>,
    b: Vec<Matrix<T>>,
    basis: SpatialBasis<T>,
}

impl<T: Real> GalerkinSystem<T> {
    /// Wraps explicit matrices; all must be `K × K` with `K` the basis size.
    pub fn from_matrices(a: Matrix<T>, b: Vec<Matrix<T>>, basis: SpatialBasis<T>) -> Result<Self> {
        let k = basis.size();
        if b.is_empty() {
            return Err(Error::InvalidArgument("at least one observation channel is required".into()));
        }
        for m in std::iter::once(&a).chain(&b) {
            if m.rows() != k || m.cols() != k {
                return Err(Error::DimensionMismatch { expected: k, got: m.rows().max(m.cols()) });
            }
            if !m.all_finite() {
                return Err(Error::NonFinite { context: "Galerkin matrix entry".into() });
            }
        }
        Ok(Self { a, b, basis })
    }

    pub fn size(&self) -> usize {
        self.a.rows()
    }

    pub fn channels(&self) -> usize {
        self.b.len()
    }

    pub fn drift_matrix(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn noise_matrices(&self) -> &[Matrix<T>] {
        &self.b
    }

    pub fn basis(&self) -> &SpatialBasis<T> {
        &self.basis
    }

    /// One Euler–Maruyama step `p + A p dt + Σ B_l p dY_l`.
    pub fn euler_step(&self, p: &[T], dt: T, dy: &[T]) -> Vec<T> {
        let mut next = p.to_vec();
        self.a.matvec_acc(p, dt, &mut next);
        for (b, &dyl) in self.b.iter().zip(dy) {
            b.matvec_acc(p, dyl, &mut next);
        }
        next
    }
}

/// Assembles `A_ij = (e_j, L e_i)` and `B_l,ij = (e_j, M_l e_i)` by quadrature,
/// which equals the adjoint form `(L* e_j, e_i)` without differentiating the
/// model coefficients. Derivatives of basis functions use the exact ladder
/// identities.
pub fn assemble<T: Real>(
    model: &FilterModel<T>,
    basis: &SpatialBasis<T>,
    grid: &QuadratureGrid<T>,
) -> Result<GalerkinSystem<T>> {
    if basis.dim() != model.state_dim() || grid.dim() != model.state_dim() {
        return Err(Error::DimensionMismatch { expected: model.state_dim(), got: basis.dim() });
    }
    let k = basis.size();
    let r = model.obs_dim();
    // per node: weight, e_j(x), L e_i(x), M_l e_i(x)
    let per_node: Vec<(T, Vec<T>, Vec<T>, Vec<T>)> = (0..grid.len())
        .into_par_iter()
        .map(|n| {
            let x = grid.node(n);
            let c = model.coefficients_at(x);
            let jets = basis.jets_at(x);
            let values: Vec<T> = (0..k).map(|i| jets.value(i)).collect();
            let gen: Vec<T> = (0..k).map(|i| generator_at(&c, jets.gradient(i), jets.hessian(i))).collect();
            let obs: Vec<T> = (0..r)
                .flat_map(|l| {
                    let (c, jets) = (&c, &jets);
                    (0..k).map(move |i| observation_operator_at(c, l, jets.value(i), jets.gradient(i)))
                })
                .collect();
            (grid.weight(n), values, gen, obs)
        })
        .collect();

    let rows = |offset: usize, pick: fn(&(T, Vec<T>, Vec<T>, Vec<T>)) -> &Vec<T>| -> Matrix<T> {
        let data: Vec<T> = (0..k)
            .into_par_iter()
            .flat_map_iter(|i| {
                let per_node = &per_node;
                (0..k).map(move |j| per_node.iter().map(|node| node.0 * node.1[j] * pick(node)[offset + i]).sum::<T>())
            })
            .collect();
        Matrix::from_row_major(k, k, data).expect("square")
    };
    let a = rows(0, |n| &n.2);
    let b: Vec<Matrix<T>> = (0..r).map(|l| rows(l * k, |n| &n.3)).collect();
    for (name, m) in std::iter::once(("A", &a)).chain(b.iter().map(|m| ("B", m))) {
        if let Some(pos) = m.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: format!("{name} entry ({}, {})", pos / k, pos % k) });
        }
    }
    GalerkinSystem::from_matrices(a, b, basis.clone())
}

/// Largest eigenvalue of `A + Aᵀ + Σ B_lᵀ B_l`, the matrix counterpart of the
/// dissipativity constant restricted to the basis span.
pub fn dissipativity_gap<T: Real>(system: &GalerkinSystem<T>) -> T {
    let mut m = system.a.add(&system.a.transpose());
    for b in &system.b {
        m.axpy(T::one(), &b.transpose().matmul(b));
    }
    *symmetric_eigenvalues(&m).last().expect("nonempty system")
}

/// Euler–Maruyama for the Galerkin SDE driven by an observation path sampled
/// at spacing `dt` (`y[0]` at time 0). Returns the state every `report_every`
/// steps, starting with `p_init`.
pub fn integrate_galerkin_sde<T: Real>(
    system: &GalerkinSystem<T>,
    y: &[Vec<T>],
    dt: T,
    p_init: &[T],
    report_every: usize,
) -> Result<Vec<Vec<T>>> {
    if p_init.len() != system.size() {
        return Err(Error::DimensionMismatch { expected: system.size(), got: p_init.len() });
    }
    if report_every == 0 || (y.len().saturating_sub(1)) % report_every != 0 {
        return Err(Error::InvalidArgument(format!(
            "report stride {report_every} must divide the {} path steps",
            y.len().saturating_sub(1)
        )));
    }
    if let Some(bad) = y.iter().position(|s| s.len() != system.channels()) {
        return Err(Error::DimensionMismatch { expected: system.channels(), got: y[bad].len() });
    }
    let mut p = p_init.to_vec();
    let mut out = vec![p.clone()];
    let mut dy = vec![T::zero(); system.channels()];
    for step in 1..y.len() {
        for (l, d) in dy.iter_mut().enumerate() {
            *d = y[step][l] - y[step - 1][l];
        }
        p = system.euler_step(&p, dt, &dy);
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { step });
        }
        if step % report_every == 0 {
            out.push(p.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite_space::gauss_hermite_grid;
    use crate::linalg::expm;

    fn ou(sigma: f64, h_slope: f64) -> FilterModel<f64> {
        FilterModel::<f64>::new(1, 1, 1)
            .with_drift(|x, b| b[0] = -x[0])
            .with_signal_diffusion(move |_, s| s[0] = sigma)
            .with_observation(move |x, h| h[0] = h_slope * x[0])
    }

    fn jet1(value: f64, d1: f64, d2: f64) -> Jet<f64> {
        Jet::new(value, vec![d1], vec![d2])
    }

    #[test]
    fn generator_examples() {
        let m = ou(2f64.sqrt(), 1.0);
        assert_eq!(apply_generator(&m, &jet1(1.0, 0.0, 0.0), &[0.7]).unwrap(), 0.0);
        let x = 1.3;
        let got = apply_generator(&m, &jet1(x * x, 2.0 * x, 2.0), &[x]).unwrap();
        assert!((got - (2.0 - 2.0 * x * x)).abs() < 1e-14);
        let m2 = FilterModel::<f64>::new(1, 1, 1)
            .with_signal_diffusion(|_, s| s[0] = 1.0)
            .with_correlation(|_, r| r[0] = 1.0);
        assert_eq!(apply_generator(&m2, &jet1(0.4, 1.0, 0.0), &[0.4]).unwrap(), 0.0);
    }

    #[test]
    fn observation_operator_examples() {
        let m = ou(1.0, 1.0);
        assert_eq!(apply_observation_operator(&m, 0, &jet1(1.0, 0.0, 0.0), &[0.8]).unwrap(), 0.8);
        let c = 0.3;
        let m2 = FilterModel::<f64>::new(1, 0, 1).with_correlation(move |_, r| r[0] = c);
        assert_eq!(apply_observation_operator(&m2, 0, &jet1(0.5, 1.0, 0.0), &[0.5]).unwrap(), c);
        let m3 = FilterModel::<f64>::new(1, 0, 1).with_correlation(|x, r| r[0] = x[0]).with_observation(|x, h| h[0] = x[0]);
        let x = 0.9;
        let got = apply_observation_operator(&m3, 0, &jet1(x, 1.0, 0.0), &[x]).unwrap();
        assert!((got - (x * x + x)).abs() < 1e-15);
        assert!(apply_observation_operator(&m3, 1, &jet1(x, 1.0, 0.0), &[x]).is_err());
        let nan = FilterModel::<f64>::new(1, 0, 1).with_observation(|_, h| h[0] = f64::NAN);
        assert!(matches!(apply_observation_operator(&nan, 0, &jet1(1.0, 0.0, 0.0), &[0.0]), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn assembly_examples() {
        let basis = SpatialBasis::<f64>::new(1, 4);
        let grid = gauss_hermite_grid(1, 20);
        let zero = assemble(&FilterModel::<f64>::new(1, 1, 1), &basis, &grid).unwrap();
        assert_eq!(zero.drift_matrix().max_abs(), 0.0);
        assert_eq!(zero.noise_matrices()[0].max_abs(), 0.0);

        let heat = FilterModel::<f64>::new(1, 1, 1).with_signal_diffusion(|_, s| s[0] = 2f64.sqrt());
        let sys = assemble(&heat, &basis, &grid).unwrap();
        assert!((sys.drift_matrix()[(0, 0)] + 0.5).abs() < 1e-13);

        let sensor = FilterModel::<f64>::new(1, 0, 1).with_observation(|x, h| h[0] = x[0]);
        let sys = assemble(&sensor, &basis, &grid).unwrap();
        assert!((sys.noise_matrices()[0][(0, 1)] - 0.5f64.sqrt()).abs() < 1e-13);
        assert!((sys.noise_matrices()[0][(1, 0)] - 0.5f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn gap_examples() {
        let basis = SpatialBasis::<f64>::new(1, 2);
        let zero = GalerkinSystem::from_matrices(Matrix::zeros(2, 2), vec![Matrix::zeros(2, 2)], basis.clone()).unwrap();
        assert_eq!(dissipativity_gap(&zero), 0.0);
        let damp =
            GalerkinSystem::from_matrices(Matrix::identity(2).scaled(-1.0), vec![Matrix::zeros(2, 2)], basis).unwrap();
        assert!((dissipativity_gap(&damp) + 2.0).abs() < 1e-14);
    }

    #[test]
    fn constant_path_without_dynamics() {
        let basis = SpatialBasis::<f64>::new(1, 3);
        let sys = GalerkinSystem::from_matrices(Matrix::zeros(3, 3), vec![Matrix::zeros(3, 3)], basis).unwrap();
        let y: Vec<Vec<f64>> = (0..11).map(|i| vec![(i as f64).sin()]).collect();
        let out = integrate_galerkin_sde(&sys, &y, 0.1, &[1.0, 2.0, 3.0], 5).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|p| p == &vec![1.0, 2.0, 3.0]));
    }

    #[test]
    fn deterministic_part_converges_to_matrix_exponential() {
        let basis = SpatialBasis::<f64>::new(1, 2);
        let a = Matrix::from_row_major(2, 2, vec![-1.0, 0.5, -0.3, -2.0]).unwrap();
        let sys = GalerkinSystem::from_matrices(a.clone(), vec![Matrix::zeros(2, 2)], basis).unwrap();
        let p0 = [1.0, -1.0];
        let exact = expm(&a).unwrap().matvec(&p0);
        let err = |steps: usize| {
            let y = vec![vec![0.0]; steps + 1];
            let out = integrate_galerkin_sde(&sys, &y, 1.0 / steps as f64, &p0, steps).unwrap();
            out[1].iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (e1, e2, e3) = (err(200), err(400), err(800));
        // first order: error halves and the Richardson ratio is ~2
        assert!((e1 / e2 - 2.0).abs() < 0.05 && (e2 / e3 - 2.0).abs() < 0.05, "{e1} {e2} {e3}");
    }

    #[test]
    fn blow_up_is_reported_with_step() {
        let basis = SpatialBasis::<f64>::new(1, 1);
        let a = Matrix::from_row_major(1, 1, vec![1e300]).unwrap();
        let sys = GalerkinSystem::from_matrices(a, vec![Matrix::zeros(1, 1)], basis).unwrap();
        let y = vec![vec![0.0]; 5];
        let err = integrate_galerkin_sde(&sys, &y, 1.0, &[1e10], 1).unwrap_err();
        assert!(matches!(err, Error::BlowUp { step: 1 }));
    }
}
