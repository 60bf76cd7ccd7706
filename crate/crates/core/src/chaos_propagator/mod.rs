//! Offline half of the filter: the cosine temporal basis, the triangular
//! system of deterministic ODEs for the chaos coefficients `φ_α`, and the
//! propagator table built from it.
//!
//! ```text
//! φ_α'(s) = A φ_α(s) + Σ_{k,l} α_k^l m_k(s) B_l φ_{α(k,l)}(s),   φ_α(0) = ζ·1{|α| = 0}
//! ```
//!
//! Indices of length `j` depend only on indices of length `j - 1`, so the
//! system is integrated layer by layer. Each layer records, for every RK4
//! stage of every step, the products `B_l Y` of its stage states; the next
//! layer consumes exactly those, which makes the layered sweep identical to
//! classical RK4 applied to the whole coupled system at once.

mod budget;
mod table_io;

pub use budget::{chaos_error_bound, filter_error_bound, ChaosBound, ErrorBudget, FilterBound};

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::galerkin::GalerkinSystem;
use crate::hermite_space::SpatialBasis;
use crate::linalg::{expm, Matrix};
use crate::multiindex::{enumerate_truncated, MultiIndex};
use crate::quadrature::composite_gauss_legendre;
use crate::scalar::Real;

/// Orthonormal cosine basis of `L2([0, Δ])`:
/// `m_1 = 1/sqrt(Δ)`, `m_k(s) = sqrt(2/Δ) cos(π (k-1) s / Δ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemporalBasis<T> {
    delta: T,
    n: u32,
}

impl<T: Real> TemporalBasis<T> {
    pub fn new(delta: T, n: u32) -> Result<Self> {
        if !(delta > T::zero() && delta.is_finite()) || n == 0 {
            return Err(Error::InvalidArgument(format!("cosine basis needs delta > 0 and n >= 1, got {delta}, {n}")));
        }
        Ok(Self { delta, n })
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn len(&self) -> u32 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `m_k(s)` for 1-based `k`; defined for every `k >= 1`, not only `k <= n`.
    pub fn eval(&self, k: u32, s: T) -> T {
        assert!(k >= 1, "temporal index is 1-based");
        if k == 1 {
            T::one() / self.delta.sqrt()
        } else {
            (T::lit(2.0) / self.delta).sqrt() * (T::PI() * T::count(k as usize - 1) * s / self.delta).cos()
        }
    }

    /// `m_k'(s)`.
    pub fn derivative(&self, k: u32, s: T) -> T {
        assert!(k >= 1, "temporal index is 1-based");
        if k == 1 {
            return T::zero();
        }
        let w = T::PI() * T::count(k as usize - 1) / self.delta;
        -(T::lit(2.0) / self.delta).sqrt() * w * (w * s).sin()
    }
}

/// Default RK4 step count: at least 16 steps per oscillation of the fastest cosine.
pub fn default_substeps(n: u32) -> usize {
    64.max(16 * n as usize)
}

/// Bookkeeping from a layered build, used to check the sweep only ever reads
/// the layer directly below the one being built.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub layer_sizes: Vec<usize>,
    /// Lowered-index lookups, all of which must land in the previous layer.
    pub lookups: usize,
    pub lookups_outside_previous_layer: usize,
    /// Largest number of layers whose stage data was held at once.
    pub max_resident_layers: usize,
}

// Stage-wise products B_l Y for one index: [step][stage][channel] -> K x c matrix.
type StageProducts<T> = Vec<[Vec<Matrix<T>>; 4]>;

struct Layer<T> {
    index_of: HashMap<MultiIndex, usize>,
    products: Vec<StageProducts<T>>,
}

/// Integrates `layers` (layer `j` holding indices of length `j`, each closed
/// under lowering into layer `j - 1`) from the initial block `zeta` (K x c).
fn propagate_layers<T: Real>(
    system: &GalerkinSystem<T>,
    tbasis: &TemporalBasis<T>,
    layers: &[Vec<MultiIndex>],
    zeta: &Matrix<T>,
    substeps: usize,
) -> Result<(Vec<Vec<Matrix<T>>>, BuildStats)> {
    let k = system.size();
    if zeta.rows() != k {
        return Err(Error::DimensionMismatch { expected: k, got: zeta.rows() });
    }
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be positive".into()));
    }
    if !zeta.all_finite() {
        return Err(Error::NonFinite { context: "initial vector".into() });
    }
    let a = system.drift_matrix();
    let b = system.noise_matrices();
    let h = tbasis.delta() / T::count(substeps);
    let half = h * T::lit(0.5);
    let mut stats = BuildStats::default();
    let mut results: Vec<Vec<Matrix<T>>> = Vec::with_capacity(layers.len());
    let mut previous: Option<Layer<T>> = None;

    for (j, layer) in layers.iter().enumerate() {
        let keep_products = j + 1 < layers.len();
        // (position in previous layer, temporal index k, channel l, multiplicity) per index
        let mut couplings: Vec<Vec<(usize, u32, usize, T)>> = Vec::with_capacity(layer.len());
        for alpha in layer {
            if alpha.length() as usize != j {
                return Err(Error::InvalidArgument(format!("index {alpha} placed in layer {j}")));
            }
            let mut list = Vec::new();
            for (kk, l, count) in alpha.entries() {
                stats.lookups += 1;
                let pos = previous.as_ref().and_then(|p| p.index_of.get(&alpha.lower(kk, l)).copied());
                match pos {
                    Some(pos) => list.push((pos, kk, l as usize - 1, T::count(count as usize))),
                    None => {
                        stats.lookups_outside_previous_layer += 1;
                        return Err(Error::InvalidArgument(format!(
                            "index {alpha} lowers outside the previous layer at ({kk},{l})"
                        )));
                    }
                }
            }
            couplings.push(list);
        }
        stats.layer_sizes.push(layer.len());
        stats.max_resident_layers = stats.max_resident_layers.max(if previous.is_some() { 2 } else { 1 });

        let prev_products = previous.as_ref().map(|p| &p.products);
        let built: Vec<(Matrix<T>, StageProducts<T>)> = couplings
            .par_iter()
            .map(|list| {
                let forcing = |step: usize, stage: usize, s: T| -> Matrix<T> {
                    let mut f = Matrix::zeros(k, zeta.cols());
                    if let Some(prev) = prev_products {
                        for &(pos, kk, l, mult) in list {
                            f.axpy(mult * tbasis.eval(kk, s), &prev[pos][step][stage][l]);
                        }
                    }
                    f
                };
                let mut y = if j == 0 { zeta.clone() } else { Matrix::zeros(k, zeta.cols()) };
                let mut products: StageProducts<T> = Vec::with_capacity(if keep_products { substeps } else { 0 });
                for step in 0..substeps {
                    let t0 = h * T::count(step);
                    let times = [t0, t0 + half, t0 + half, t0 + h];
                    let mut stage_state = y.clone();
                    let mut slopes: Vec<Matrix<T>> = Vec::with_capacity(4);
                    let mut stage_products: [Vec<Matrix<T>>; 4] = Default::default();
                    for stage in 0..4 {
                        if stage > 0 {
                            let scale = if stage == 3 { h } else { half };
                            stage_state = y.clone();
                            stage_state.axpy(scale, &slopes[stage - 1]);
                        }
                        let mut slope = a.matmul(&stage_state);
                        slope.axpy(T::one(), &forcing(step, stage, times[stage]));
                        if keep_products {
                            stage_products[stage] = b.iter().map(|bl| bl.matmul(&stage_state)).collect();
                        }
                        slopes.push(slope);
                    }
                    let sixth = h / T::lit(6.0);
                    y.axpy(sixth, &slopes[0]);
                    y.axpy(sixth * T::lit(2.0), &slopes[1]);
                    y.axpy(sixth * T::lit(2.0), &slopes[2]);
                    y.axpy(sixth, &slopes[3]);
                    if keep_products {
                        products.push(stage_products);
                    }
                }
                (y, products)
            })
            .collect();

        let mut values = Vec::with_capacity(built.len());
        let mut products = Vec::with_capacity(built.len());
        for (alpha, (y, p)) in layer.iter().zip(built) {
            if !y.all_finite() {
                return Err(Error::NonFinite { context: format!("chaos coefficient for index {alpha}") });
            }
            values.push(y);
            products.push(p);
        }
        results.push(values);
        // layer j - 1 is dropped here; only layer j stays resident
        previous = keep_products.then(|| Layer {
            index_of: layer.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect(),
            products,
        });
    }
    Ok((results, stats))
}

/// `φ_α(Δ; ζ)` by RK4 with `substeps` uniform steps, sweeping the downward
/// closure of `α` layer by layer.
pub fn solve_phi<T: Real>(
    system: &GalerkinSystem<T>,
    tbasis: &TemporalBasis<T>,
    alpha: &MultiIndex,
    zeta: &[T],
    substeps: usize,
) -> Result<Vec<T>> {
    if alpha.channels() as usize != system.channels() {
        return Err(Error::DimensionMismatch { expected: system.channels(), got: alpha.channels() as usize });
    }
    let layers = alpha.downward_closure();
    let zeta = Matrix::from_row_major(zeta.len(), 1, zeta.to_vec())?;
    let (values, _) = propagate_layers(system, tbasis, &layers, &zeta, substeps)?;
    let top = values.last().and_then(|l| l.first()).expect("closure contains the index itself");
    Ok(top.column(0))
}

/// Precomputed `q^α = [φ_α(Δ; u^1) ... φ_α(Δ; u^K)]` for every index of
/// `J_N^n`, in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagatorTable<T> {
    basis: SpatialBasis<T>,
    r: u32,
    delta: T,
    max_length: u32,
    max_order: u32,
    substeps: usize,
    indices: Vec<MultiIndex>,
    blocks: Vec<Matrix<T>>,
}

impl<T: Real> PropagatorTable<T> {
    /// Assembles a table from parts, checking shapes and finiteness.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        basis: SpatialBasis<T>,
        r: u32,
        delta: T,
        max_length: u32,
        max_order: u32,
        substeps: usize,
        indices: Vec<MultiIndex>,
        blocks: Vec<Matrix<T>>,
    ) -> Result<Self> {
        let k = basis.size();
        if indices != enumerate_truncated(max_length, max_order, r) {
            return Err(Error::InvalidArgument(format!(
                "table indices are not the canonical enumeration for N={max_length}, n={max_order}, r={r}"
            )));
        }
        if blocks.len() != indices.len() {
            return Err(Error::DimensionMismatch { expected: indices.len(), got: blocks.len() });
        }
        for (alpha, m) in indices.iter().zip(&blocks) {
            if m.rows() != k || m.cols() != k {
                return Err(Error::DimensionMismatch { expected: k, got: m.rows().max(m.cols()) });
            }
            if !m.all_finite() {
                return Err(Error::NonFinite { context: format!("table block for index {alpha}") });
            }
        }
        if !(delta > T::zero() && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("table window length must be positive, got {delta}")));
        }
        Ok(Self { basis, r, delta, max_length, max_order, substeps, indices, blocks })
    }

    pub fn size(&self) -> usize {
        self.basis.size()
    }

    pub fn channels(&self) -> u32 {
        self.r
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn max_length(&self) -> u32 {
        self.max_length
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn basis(&self) -> &SpatialBasis<T> {
        &self.basis
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn blocks(&self) -> &[Matrix<T>] {
        &self.blocks
    }

    /// Block for `alpha`, if it belongs to the table.
    pub fn block(&self, alpha: &MultiIndex) -> Option<&Matrix<T>> {
        self.indices.iter().position(|a| a == alpha).map(|i| &self.blocks[i])
    }

    /// `φ_α(Δ; ζ)` for every index, by linearity in `ζ`.
    pub fn phi_all(&self, zeta: &[T]) -> Vec<Vec<T>> {
        self.blocks.iter().map(|m| m.matvec(zeta)).collect()
    }
}

/// Builds the table over `enumerate_truncated(N, n, r)`.
pub fn precompute_table<T: Real>(
    system: &GalerkinSystem<T>,
    tbasis: &TemporalBasis<T>,
    max_length: u32,
    substeps: usize,
) -> Result<PropagatorTable<T>> {
    precompute_table_with_stats(system, tbasis, max_length, substeps).map(|(t, _)| t)
}

/// As [`precompute_table`], also returning the layer bookkeeping.
pub fn precompute_table_with_stats<T: Real>(
    system: &GalerkinSystem<T>,
    tbasis: &TemporalBasis<T>,
    max_length: u32,
    substeps: usize,
) -> Result<(PropagatorTable<T>, BuildStats)> {
    let r = system.channels() as u32;
    let indices = enumerate_truncated(max_length, tbasis.len(), r);
    let mut layers = vec![Vec::new(); max_length as usize + 1];
    for alpha in &indices {
        layers[alpha.length() as usize].push(alpha.clone());
    }
    let (values, stats) = propagate_layers(system, tbasis, &layers, &Matrix::identity(system.size()), substeps)?;
    let mut lookup: HashMap<&MultiIndex, &Matrix<T>> = HashMap::with_capacity(indices.len());
    for (layer, vals) in layers.iter().zip(&values) {
        lookup.extend(layer.iter().zip(vals));
    }
    let blocks = indices.iter().map(|a| lookup[a].clone()).collect();
    let table = PropagatorTable::from_parts(
        system.basis().clone(),
        r,
        tbasis.delta(),
        max_length,
        tbasis.len(),
        substeps,
        indices,
        blocks,
    )?;
    Ok((table, stats))
}

/// Independent evaluation of an order-one coefficient,
/// `φ_α(Δ) = ∫_0^Δ e^{A(Δ-s)} B_q e^{As} ζ m_i(s) ds` for `α` the single pair
/// `(i, q)`, by composite Gauss–Legendre quadrature with exact propagators.
pub fn closed_form_order1<T: Real>(
    system: &GalerkinSystem<T>,
    tbasis: &TemporalBasis<T>,
    alpha: &MultiIndex,
    zeta: &[T],
) -> Result<Vec<T>> {
    if alpha.length() != 1 {
        return Err(Error::InvalidArgument(format!("closed form needs |α| = 1, got {alpha}")));
    }
    let (i, q, _) = alpha.entries().next().expect("one entry");
    let bq = system
        .noise_matrices()
        .get(q as usize - 1)
        .ok_or(Error::IndexOutOfRange { index: q as usize - 1, len: system.channels() })?;
    let a = system.drift_matrix();
    let delta = tbasis.delta();
    let (nodes, weights) = composite_gauss_legendre(T::zero(), delta, 64, 8);
    let terms: Result<Vec<Vec<T>>> = nodes
        .par_iter()
        .zip(&weights)
        .map(|(&s, &w)| {
            let inner = expm(&a.scaled(s))?.matvec(zeta);
            let outer = expm(&a.scaled(delta - s))?.matvec(&bq.matvec(&inner));
            let c = w * tbasis.eval(i, s);
            Ok(outer.into_iter().map(|v| v * c).collect())
        })
        .collect();
    let mut out = vec![T::zero(); system.size()];
    for term in terms? {
        for (o, v) in out.iter_mut().zip(term) {
            *o += v;
        }
    }
    Ok(out)
}

/// Truncated second moment `Σ_α |φ_α(Δ; ζ)|² / α!` and its per-length subtotals.
pub fn parseval_mass<T: Real>(table: &PropagatorTable<T>, zeta: &[T]) -> Result<(T, Vec<T>)> {
    if zeta.len() != table.size() {
        return Err(Error::DimensionMismatch { expected: table.size(), got: zeta.len() });
    }
    let mut layers = vec![T::zero(); table.max_length() as usize + 1];
    for (alpha, m) in table.indices().iter().zip(table.blocks()) {
        let phi = m.matvec(zeta);
        let sq: T = phi.iter().map(|&v| v * v).sum();
        layers[alpha.length() as usize] += sq / T::lit(alpha.factorial()? as f64);
    }
    Ok((layers.iter().copied().sum(), layers))
}
