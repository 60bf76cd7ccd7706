//! Online half of the filter. For each observation window the runtime
//! computes the stochastic integrals `ξ_{k,l} = ∫ m_k dY_l`, combines the
//! propagator table into the one-step matrix `Q(ξ)`, and updates the density
//! coefficients `p ← Q p`. Densities and conditional estimates are read off
//! the coefficient vector.

mod observations;

pub use observations::{ObservationRecord, ObservationWindow};

use crate::chaos_propagator::{PropagatorTable, TemporalBasis};
use crate::error::{Error, Result};
use crate::hermite_space::{QuadratureGrid, SpatialBasis};
use crate::linalg::{dot, Matrix};
use crate::multiindex::XiValues;
use crate::scalar::Real;

/// `ξ_{k,l}` for `k = 1..=n`, `l = 1..=r` over one window.
///
/// `k = 1` uses the exact increment. For `k > 1` the integral is rewritten by
/// parts as `m_k(Δ) (Y(Δ) - Y(0)) - ∫ m_k'(s) (Y(s) - Y(0)) ds`, the Riemann
/// integral taken by the trapezoidal rule on the samples.
pub fn xi_integrals<T: Real>(window: &ObservationWindow<T>, tbasis: &TemporalBasis<T>) -> Result<XiValues<T>> {
    let delta = tbasis.delta();
    if (window.length() - delta).abs() > T::lit(1e-9).max(T::lit(64.0) * T::epsilon()) * delta {
        return Err(Error::InvalidArgument(format!(
            "window length {} differs from the basis length {delta}",
            window.length()
        )));
    }
    let n = tbasis.len();
    let spacing = window.spacing();
    let limit = delta / T::count(8 * n as usize);
    if spacing > limit * (T::one() + T::lit(1e-9)) {
        return Err(Error::SpacingTooCoarse { spacing: spacing.as_f64(), limit: limit.as_f64() });
    }
    let r = window.channels();
    let times = window.times();
    let values = window.values();
    let t0 = window.t_start();
    let last = times.len() - 1;
    let mut xi = XiValues::zeros(n, r as u32);
    for l in 0..r {
        let y0 = values[0][l];
        let increment = values[last][l] - y0;
        xi.set(1, l as u32 + 1, increment / delta.sqrt());
        for k in 2..=n {
            let mut riemann = T::zero();
            for (i, (&t, y)) in times.iter().zip(values).enumerate() {
                let weight = if i == 0 || i == last { T::lit(0.5) } else { T::one() };
                riemann += weight * tbasis.derivative(k, t - t0) * (y[l] - y0);
            }
            riemann *= spacing;
            xi.set(k, l as u32 + 1, tbasis.eval(k, delta) * increment - riemann);
        }
    }
    Ok(xi)
}

/// One-step matrix `Q(ξ) = Σ_α q^α ξ_α / sqrt(α!)`.
///
/// `ξ_α` is the normalized Wick product, and the unnormalized density expands
/// as `Σ_α φ_α ξ_α / sqrt(α!)`, so each table block carries the extra
/// `1/sqrt(α!)`; for a single mode this reproduces the exponential
/// martingale's generating function `Σ_m (b sqrt(Δ))^m H_m(ξ) / m!`.
pub fn step_matrix<T: Real>(table: &PropagatorTable<T>, xi: &XiValues<T>) -> Result<Matrix<T>> {
    if xi.channels() != table.channels() {
        return Err(Error::DimensionMismatch { expected: table.channels() as usize, got: xi.channels() as usize });
    }
    let k = table.size();
    let mut q = Matrix::zeros(k, k);
    for (alpha, block) in table.indices().iter().zip(table.blocks()) {
        let weight = alpha.xi_eval(xi)? / T::lit(alpha.factorial()? as f64).sqrt();
        if weight != T::zero() {
            q.axpy(weight, block);
        }
    }
    Ok(q)
}

/// Density coefficients `p(t_i)` on the Hermite basis.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterState<T> {
    t: T,
    p: Vec<T>,
    history: Option<Vec<(T, Vec<T>)>>,
}

impl<T: Real> FilterState<T> {
    pub fn new(t: T, p: Vec<T>) -> Result<Self> {
        if !t.is_finite() || !p.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { context: "filter state".into() });
        }
        Ok(Self { t, p, history: None })
    }

    /// Records a snapshot of every state from now on, starting with this one.
    pub fn with_history(mut self) -> Self {
        self.history = Some(vec![(self.t, self.p.clone())]);
        self
    }

    pub fn time(&self) -> T {
        self.t
    }

    pub fn coefficients(&self) -> &[T] {
        &self.p
    }

    pub fn history(&self) -> Option<&[(T, Vec<T>)]> {
        self.history.as_deref()
    }

    /// `p ← Q p`, `t ← t + Δ`.
    pub fn advance(mut self, q: &Matrix<T>, delta: T) -> Result<Self> {
        if q.rows() != self.p.len() || q.cols() != self.p.len() {
            return Err(Error::DimensionMismatch { expected: self.p.len(), got: q.rows() });
        }
        let next = q.matvec(&self.p);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { context: format!("filter state after t = {}", self.t + delta) });
        }
        self.p = next;
        self.t += delta;
        if let Some(h) = self.history.as_mut() {
            h.push((self.t, self.p.clone()));
        }
        Ok(self)
    }

    /// Scaled copy (without history), for invariance checks and renormalization.
    pub fn scaled(&self, c: T) -> Self {
        Self { t: self.t, p: self.p.iter().map(|&v| v * c).collect(), history: None }
    }
}

/// `Σ_j p_j e_j(x)`. Truncation can make this negative; it is not clipped.
pub fn density_at<T: Real>(state: &FilterState<T>, basis: &SpatialBasis<T>, x: &[T]) -> Result<T> {
    if basis.size() != state.p.len() {
        return Err(Error::DimensionMismatch { expected: basis.size(), got: state.p.len() });
    }
    if x.len() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: x.len() });
    }
    Ok(dot(&state.p, &basis.eval_all(x)))
}

/// `φ[f] = Σ_j f_j p_j` for the coefficient vector of `f`.
pub fn functional<T: Real>(state: &FilterState<T>, f_coeffs: &[T]) -> Result<T> {
    if f_coeffs.len() != state.p.len() {
        return Err(Error::DimensionMismatch { expected: state.p.len(), got: f_coeffs.len() });
    }
    Ok(dot(&state.p, f_coeffs))
}

/// `φ[f] / φ[1]`, failing when `|φ[1]| < floor`.
pub fn estimate<T: Real>(state: &FilterState<T>, f_coeffs: &[T], one_coeffs: &[T], floor: T) -> Result<T> {
    let mass = functional(state, one_coeffs)?;
    if !(mass.abs() >= floor) {
        return Err(Error::DegenerateNormalization { value: mass.as_f64(), floor: floor.as_f64() });
    }
    Ok(functional(state, f_coeffs)? / mass)
}

/// Fraction of `∫ |p|` carried by the negative part of the synthesized density.
pub fn negative_mass_fraction<T: Real>(
    state: &FilterState<T>,
    basis: &SpatialBasis<T>,
    grid: &QuadratureGrid<T>,
) -> Result<T> {
    let (mut neg, mut total) = (T::zero(), T::zero());
    for (x, w) in grid.iter() {
        let v = density_at(state, basis, x)?;
        total += w * v.abs();
        if v < T::zero() {
            neg -= w * v;
        }
    }
    Ok(if total > T::zero() { neg / total } else { T::zero() })
}

/// Output of one filtering run: per step the time, coefficients, mass and
/// one estimate per requested functional.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterRun<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub masses: Vec<T>,
    pub estimates: Vec<Vec<T>>,
}

/// The online recursion bound to a table and to the functionals to report.
#[derive(Clone, Debug)]
pub struct ChaosFilter<T> {
    table: PropagatorTable<T>,
    tbasis: TemporalBasis<T>,
    one_coeffs: Vec<T>,
    functionals: Vec<Vec<T>>,
    relative_floor: T,
}

impl<T: Real> ChaosFilter<T> {
    /// `one_coeffs` is the projection of the constant 1; `functionals` holds
    /// the projections of the functions whose conditional means are reported.
    pub fn new(table: PropagatorTable<T>, one_coeffs: Vec<T>, functionals: Vec<Vec<T>>) -> Result<Self> {
        let k = table.size();
        for v in std::iter::once(&one_coeffs).chain(&functionals) {
            if v.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: v.len() });
            }
        }
        let tbasis = TemporalBasis::new(table.delta(), table.max_order())?;
        Ok(Self { table, tbasis, one_coeffs, functionals, relative_floor: T::lit(1e-12) })
    }

    /// Normalization floor relative to the initial mass (default `1e-12`).
    pub fn with_relative_floor(mut self, floor: T) -> Self {
        self.relative_floor = floor;
        self
    }

    pub fn table(&self) -> &PropagatorTable<T> {
        &self.table
    }

    pub fn temporal_basis(&self) -> &TemporalBasis<T> {
        &self.tbasis
    }

    /// One window: `ξ`, `Q(ξ)`, then `p ← Q p`.
    pub fn step(&self, state: FilterState<T>, window: &ObservationWindow<T>) -> Result<FilterState<T>> {
        let xi = xi_integrals(window, &self.tbasis)?;
        let q = step_matrix(&self.table, &xi)?;
        state.advance(&q, self.table.delta())
    }

    /// Runs every complete window of `record` from `p_init` at the record's start time.
    pub fn run(&self, p_init: &[T], record: &ObservationRecord<T>) -> Result<FilterRun<T>> {
        if record.channels() != self.table.channels() as usize {
            return Err(Error::DimensionMismatch { expected: self.table.channels() as usize, got: record.channels() });
        }
        let t0 = record.times().first().copied().unwrap_or_else(T::zero);
        let mut state = FilterState::new(t0, p_init.to_vec())?;
        let floor = self.relative_floor * functional(&state, &self.one_coeffs)?.abs();
        let mut run = FilterRun { times: Vec::new(), states: Vec::new(), masses: Vec::new(), estimates: Vec::new() };
        for window in record.windows(self.table.delta())? {
            state = self.step(state, &window)?;
            let mass = functional(&state, &self.one_coeffs)?;
            let est: Result<Vec<T>> =
                self.functionals.iter().map(|f| estimate(&state, f, &self.one_coeffs, floor)).collect();
            run.times.push(window.t_end());
            run.states.push(state.coefficients().to_vec());
            run.masses.push(mass);
            run.estimates.push(est?);
        }
        Ok(run)
    }
}
