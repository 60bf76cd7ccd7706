//! Hermite-function basis of `L2(R^d)`, tensor Gauss–Hermite quadrature,
//! and projections onto the basis.
//!
//! The basis functions are true Hermite functions: per axis
//! `h_n(t) = (2^n n! sqrt(pi))^{-1/2} H_n(t) e^{-t^2/2}` with the physicists'
//! polynomial `H_n`. They are eigenfunctions of `Λ = -∇² + (1 + |x|²)` with
//! eigenvalue `2|γ| + d + 1`, and ordered by total degree, ties broken
//! lexicographically (the tuple with the smaller entry at the first differing
//! position comes first).

use crate::error::{Error, Result};
use crate::multiindex::for_each_composition;
use crate::quadrature::{gauss_hermite, hermite_function_values};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct SpatialBasis<T> {
    dim: usize,
    gammas: Vec<Vec<u32>>,
    lambdas: Vec<T>,
}

impl<T: Real> SpatialBasis<T> {
    /// First `size` Hermite functions on `R^dim` in graded-lex order.
    pub fn new(dim: usize, size: usize) -> Self {
        assert!(dim >= 1 && size >= 1, "basis needs d >= 1 and K >= 1");
        let mut gammas = Vec::with_capacity(size);
        let mut total = 0u32;
        while gammas.len() < size {
            for_each_composition(total, dim, |g| {
                if gammas.len() < size {
                    gammas.push(g.to_vec());
                }
            });
            total += 1;
        }
        let lambdas = gammas.iter().map(|g| eigenvalue(g)).collect();
        Self { dim, gammas, lambdas }
    }

    /// Rebuilds a basis from stored metadata, checking it matches the canonical one.
    pub fn from_parts(dim: usize, gammas: Vec<Vec<u32>>) -> Result<Self> {
        let canonical = Self::new(dim, gammas.len().max(1));
        if gammas.is_empty() || canonical.gammas != gammas {
            return Err(Error::InvalidArgument("basis metadata is not a graded-lex Hermite prefix".into()));
        }
        Ok(canonical)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.gammas.len()
    }

    pub fn gammas(&self) -> &[Vec<u32>] {
        &self.gammas
    }

    pub fn lambdas(&self) -> &[T] {
        &self.lambdas
    }

    /// Largest per-axis degree present in the basis.
    pub fn max_axis_degree(&self) -> u32 {
        self.gammas.iter().flatten().copied().max().unwrap_or(0)
    }

    /// Value of the basis function with 0-based index `k` at `x`.
    pub fn eval(&self, k: usize, x: &[T]) -> Result<T> {
        if k >= self.size() {
            return Err(Error::IndexOutOfRange { index: k, len: self.size() });
        }
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let mut buf = Vec::new();
        let mut out = T::one();
        for (&g, &t) in self.gammas[k].iter().zip(x) {
            hermite_function_values(g as usize, t, &mut buf);
            out *= buf[g as usize];
        }
        Ok(out)
    }

    /// All `K` basis values at `x`.
    pub fn eval_all(&self, x: &[T]) -> Vec<T> {
        let axes = self.axis_tables(x);
        self.gammas
            .iter()
            .map(|g| g.iter().enumerate().map(|(j, &gj)| axes[j].value[gj as usize]).fold(T::one(), |a, b| a * b))
            .collect()
    }

    /// Values, gradients and Hessians of all basis functions at `x`, from the
    /// exact ladder identities `h_n' = sqrt(n/2) h_{n-1} - sqrt((n+1)/2) h_{n+1}`
    /// and `h_n'' = (t² - 2n - 1) h_n`.
    pub fn jets_at(&self, x: &[T]) -> BasisJets<T> {
        let d = self.dim;
        let k_size = self.size();
        let axes = self.axis_tables(x);
        let mut jets = BasisJets {
            dim: d,
            values: vec![T::zero(); k_size],
            gradients: vec![T::zero(); k_size * d],
            hessians: vec![T::zero(); k_size * d * d],
        };
        for (k, g) in self.gammas.iter().enumerate() {
            let v: Vec<T> = (0..d).map(|j| axes[j].value[g[j] as usize]).collect();
            let dv: Vec<T> = (0..d).map(|j| axes[j].first[g[j] as usize]).collect();
            let ddv: Vec<T> = (0..d).map(|j| axes[j].second[g[j] as usize]).collect();
            let prod_except = |skip: &[usize]| {
                (0..d).filter(|j| !skip.contains(j)).fold(T::one(), |acc, j| acc * v[j])
            };
            jets.values[k] = prod_except(&[]);
            for i in 0..d {
                jets.gradients[k * d + i] = dv[i] * prod_except(&[i]);
                for j in 0..d {
                    jets.hessians[(k * d + i) * d + j] =
                        if i == j { ddv[i] * prod_except(&[i]) } else { dv[i] * dv[j] * prod_except(&[i, j]) };
                }
            }
        }
        jets
    }

    fn axis_tables(&self, x: &[T]) -> Vec<AxisTable<T>> {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        let n = self.max_axis_degree() as usize;
        x.iter().map(|&t| AxisTable::new(n, t)).collect()
    }
}

fn eigenvalue<T: Real>(gamma: &[u32]) -> T {
    let total: u32 = gamma.iter().sum();
    T::count(2 * total as usize + gamma.len() + 1)
}

struct AxisTable<T> {
    value: Vec<T>,
    first: Vec<T>,
    second: Vec<T>,
}

impl<T: Real> AxisTable<T> {
    fn new(n: usize, t: T) -> Self {
        let mut value = Vec::with_capacity(n + 2);
        hermite_function_values(n + 1, t, &mut value);
        let half = T::lit(0.5);
        let first = (0..=n)
            .map(|j| {
                let down = if j > 0 { (T::count(j) * half).sqrt() * value[j - 1] } else { T::zero() };
                down - (T::count(j + 1) * half).sqrt() * value[j + 1]
            })
            .collect();
        let second = (0..=n).map(|j| (t * t - T::count(2 * j + 1)) * value[j]).collect();
        value.truncate(n + 1);
        Self { value, first, second }
    }
}

/// Basis values and derivatives at one point; gradient and Hessian blocks are
/// stored per basis function, row-major.
#[derive(Clone, Debug)]
pub struct BasisJets<T> {
    dim: usize,
    values: Vec<T>,
    gradients: Vec<T>,
    hessians: Vec<T>,
}

impl<T: Real> BasisJets<T> {
    pub fn value(&self, k: usize) -> T {
        self.values[k]
    }

    pub fn gradient(&self, k: usize) -> &[T] {
        &self.gradients[k * self.dim..(k + 1) * self.dim]
    }

    pub fn hessian(&self, k: usize) -> &[T] {
        let dd = self.dim * self.dim;
        &self.hessians[k * dd..(k + 1) * dd]
    }
}

/// Tensor-product quadrature for plain Lebesgue integrals over `R^d`.
#[derive(Clone, Debug)]
pub struct QuadratureGrid<T> {
    dim: usize,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> QuadratureGrid<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[T] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[T], T)> + '_ {
        self.nodes.chunks(self.dim).zip(self.weights.iter().copied())
    }

    /// Weighted sum approximating `∫ f(x) dx`.
    pub fn integrate(&self, mut f: impl FnMut(&[T]) -> T) -> T {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Tensor Gauss–Hermite grid with `m` nodes per axis. The weights include the
/// factor `e^{|x|²}`, so the rule is exact for `∫ P(x) e^{-|x|²} dx` with
/// per-axis degree up to `2m - 1`.
pub fn gauss_hermite_grid<T: Real>(dim: usize, m: usize) -> QuadratureGrid<T> {
    scaled_gauss_hermite_grid(dim, m, T::one())
}

/// Gauss–Hermite grid with nodes stretched by `scale`: exact for
/// `∫ P(x) e^{-|x|²/scale²} dx`. With `scale = sqrt(2)` it integrates
/// `f e_k` exactly for polynomial `f`, which is the right rule for projecting
/// test functions (as opposed to products of two basis functions).
pub fn scaled_gauss_hermite_grid<T: Real>(dim: usize, m: usize, scale: T) -> QuadratureGrid<T> {
    assert!(dim >= 1 && m >= 1, "grid needs d >= 1 and m >= 1");
    assert!(scale > T::zero(), "grid scale must be positive");
    let rule = gauss_hermite::<T>(m);
    let count = m.pow(dim as u32);
    let mut nodes = Vec::with_capacity(count * dim);
    let mut weights = Vec::with_capacity(count);
    let mut idx = vec![0usize; dim];
    for _ in 0..count {
        let mut w = T::one();
        for &i in &idx {
            nodes.push(scale * rule.nodes[i]);
            w *= scale * rule.lebesgue_weights[i];
        }
        weights.push(w);
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < m {
                break;
            }
            *slot = 0;
        }
    }
    QuadratureGrid { dim, nodes, weights }
}

/// Default nodes per axis: `2 K_axis + 8`, over-integrating the products of
/// basis functions with non-polynomial model coefficients.
pub fn default_nodes_per_axis<T: Real>(basis: &SpatialBasis<T>) -> usize {
    2 * basis.max_axis_degree() as usize + 8
}

/// Grid for projecting test functions `f` against the basis: the
/// `sqrt(2)`-stretched rule with the default node count.
pub fn test_function_grid<T: Real>(basis: &SpatialBasis<T>) -> QuadratureGrid<T> {
    scaled_gauss_hermite_grid(basis.dim(), default_nodes_per_axis(basis), T::SQRT_2())
}

/// Coefficients `f_k = ∫ f e_k dx` by quadrature.
///
/// The quadrature is only trustworthy when `f e_k` decays like a Gaussian or
/// faster; for heavy-tailed or non-smooth `f` the error is uncontrolled.
pub fn project<T: Real>(
    f: impl Fn(&[T]) -> T,
    basis: &SpatialBasis<T>,
    grid: &QuadratureGrid<T>,
) -> Result<Vec<T>> {
    if grid.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: grid.dim() });
    }
    let mut coeffs = vec![T::zero(); basis.size()];
    for (i, (x, w)) in grid.iter().enumerate() {
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::NonFinite { context: format!("projected function at quadrature node {i}") });
        }
        if fx == T::zero() {
            continue;
        }
        for (c, e) in coeffs.iter_mut().zip(basis.eval_all(x)) {
            *c += w * fx * e;
        }
    }
    Ok(coeffs)
}

/// `sqrt(Σ λ_k^{2ν} c_k²)`.
pub fn lambda_power_norm<T: Real>(coeffs: &[T], basis: &SpatialBasis<T>, nu: T) -> T {
    coeffs
        .iter()
        .zip(basis.lambdas())
        .map(|(&c, &l)| {
            let s = l.powf(nu) * c;
            s * s
        })
        .sum::<T>()
        .sqrt()
}

/// Quadrature estimate of the `H^1` norms `‖e_k‖_1 = (‖e_k‖² + ‖∇e_k‖²)^{1/2}`,
/// a probe of their growth in `k`.
pub fn h1_norms<T: Real>(basis: &SpatialBasis<T>, grid: &QuadratureGrid<T>) -> Vec<T> {
    let mut acc = vec![T::zero(); basis.size()];
    for (x, w) in grid.iter() {
        let jets = basis.jets_at(x);
        for (k, a) in acc.iter_mut().enumerate() {
            let g2: T = jets.gradient(k).iter().map(|&g| g * g).sum();
            *a += w * (jets.value(k) * jets.value(k) + g2);
        }
    }
    acc.into_iter().map(T::sqrt).collect()
}
