use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hermite_space::QuadratureGrid;
use crate::scalar::Real;

/// A coefficient field writing its value at `x` into `out`.
pub type Field<T> = Arc<dyn Fn(&[T], &mut [T]) + Send + Sync>;
pub type Density<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// Diffusion filtering model
///
/// ```text
/// dX = b(X) dt + σ(X) dW + ρ(X) dV
/// dY = h(X) dt + dV,        X(0) ~ p0,  Y(0) = 0
/// ```
///
/// with `X ∈ R^d`, `W ∈ R^{d1}`, `V, Y ∈ R^r`. Matrix-valued fields are
/// written row-major (`σ` is `d × d1`, `ρ` is `d × r`).
#[derive(Clone)]
pub struct FilterModel<T> {
    d: usize,
    d1: usize,
    r: usize,
    drift: Field<T>,
    sigma: Field<T>,
    rho: Field<T>,
    observation: Field<T>,
    p0: Density<T>,
    p0_support: (T, T),
}

impl<T> fmt::Debug for FilterModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FilterModel").field("d", &self.d).field("d1", &self.d1).field("r", &self.r).finish()
    }
}

impl<T: Real> FilterModel<T> {
    /// A model with all coefficients zero and a standard Gaussian initial density.
    pub fn new(d: usize, d1: usize, r: usize) -> Self {
        assert!(d >= 1 && r >= 1, "model needs d >= 1 and r >= 1");
        let zero: Field<T> = Arc::new(|_, out: &mut [T]| out.iter_mut().for_each(|v| *v = T::zero()));
        Self {
            d,
            d1,
            r,
            drift: zero.clone(),
            sigma: zero.clone(),
            rho: zero.clone(),
            observation: zero,
            p0: Arc::new(move |x: &[T]| {
                let sq: T = x.iter().map(|&v| v * v).sum();
                (-sq * T::lit(0.5)).exp() / (T::lit(2.0) * T::PI()).powf(T::count(x.len()) * T::lit(0.5))
            }),
            p0_support: (T::lit(-12.0), T::lit(12.0)),
        }
    }

    pub fn with_drift(mut self, f: impl Fn(&[T], &mut [T]) + Send + Sync + 'static) -> Self {
        self.drift = Arc::new(f);
        self
    }

    pub fn with_signal_diffusion(mut self, f: impl Fn(&[T], &mut [T]) + Send + Sync + 'static) -> Self {
        self.sigma = Arc::new(f);
        self
    }

    pub fn with_correlation(mut self, f: impl Fn(&[T], &mut [T]) + Send + Sync + 'static) -> Self {
        self.rho = Arc::new(f);
        self
    }

    pub fn with_observation(mut self, f: impl Fn(&[T], &mut [T]) + Send + Sync + 'static) -> Self {
        self.observation = Arc::new(f);
        self
    }

    /// Initial density and the interval used to tabulate its CDF for sampling (d = 1).
    pub fn with_initial_density(mut self, p0: impl Fn(&[T]) -> T + Send + Sync + 'static, support: (T, T)) -> Self {
        self.p0 = Arc::new(p0);
        self.p0_support = support;
        self
    }

    pub fn state_dim(&self) -> usize {
        self.d
    }

    pub fn signal_noise_dim(&self) -> usize {
        self.d1
    }

    pub fn obs_dim(&self) -> usize {
        self.r
    }

    pub fn initial_density(&self) -> &Density<T> {
        &self.p0
    }

    pub fn initial_support(&self) -> (T, T) {
        self.p0_support
    }

    pub fn coefficients_at(&self, x: &[T]) -> Coefficients<T> {
        let mut c = Coefficients {
            d: self.d,
            d1: self.d1,
            r: self.r,
            drift: vec![T::zero(); self.d],
            sigma: vec![T::zero(); self.d * self.d1],
            rho: vec![T::zero(); self.d * self.r],
            h: vec![T::zero(); self.r],
        };
        (self.drift)(x, &mut c.drift);
        if self.d1 > 0 {
            (self.sigma)(x, &mut c.sigma);
        }
        (self.rho)(x, &mut c.rho);
        (self.observation)(x, &mut c.h);
        c
    }

    /// Checks the coefficient fields are finite on the grid and that `p0` is a
    /// nonnegative density with quadrature mass within `1e-3` of one.
    pub fn validate(&self, grid: &QuadratureGrid<T>) -> Result<()> {
        if grid.dim() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: grid.dim() });
        }
        let mut mass = T::zero();
        for (i, (x, w)) in grid.iter().enumerate() {
            if !self.coefficients_at(x).all_finite() {
                return Err(Error::NonFinite { context: format!("model coefficients at quadrature node {i}") });
            }
            let p = (self.p0)(x);
            if !p.is_finite() || p < T::zero() {
                return Err(Error::InvalidArgument(format!("initial density is negative or non-finite at node {i}")));
            }
            mass += w * p;
        }
        if (mass - T::one()).abs() > T::lit(1e-3) {
            return Err(Error::InvalidArgument(format!("initial density has quadrature mass {mass}, expected 1")));
        }
        Ok(())
    }
}

/// Model coefficients evaluated at one point.
#[derive(Clone, Debug)]
pub struct Coefficients<T> {
    pub d: usize,
    pub d1: usize,
    pub r: usize,
    pub drift: Vec<T>,
    pub sigma: Vec<T>,
    pub rho: Vec<T>,
    pub h: Vec<T>,
}

impl<T: Real> Coefficients<T> {
    /// `(σσ* + ρρ*)_{ij}`.
    pub fn diffusion(&self, i: usize, j: usize) -> T {
        let s: T = (0..self.d1).map(|k| self.sigma[i * self.d1 + k] * self.sigma[j * self.d1 + k]).sum();
        let p: T = (0..self.r).map(|k| self.rho[i * self.r + k] * self.rho[j * self.r + k]).sum();
        s + p
    }

    pub fn rho(&self, i: usize, l: usize) -> T {
        self.rho[i * self.r + l]
    }

    pub fn all_finite(&self) -> bool {
        self.drift.iter().chain(&self.sigma).chain(&self.rho).chain(&self.h).all(|v| v.is_finite())
    }
}
