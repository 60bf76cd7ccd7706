//! Built-in scalar models used by the experiments.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::galerkin::FilterModel;
use crate::reference::LinearModel;
use crate::scalar::Real;

/// Nonlinear stressor: `dX = a X dt + σ dW`, `dY = h(X) dt + dV` with the
/// saturated cubic sensor `h(x) = S tanh(x³ / (1 + ε x²) / S)`. The rational
/// part grows only linearly and the `tanh` caps it at `S`, so `h` is smooth
/// and bounded with all derivatives bounded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubicSensor<T> {
    pub a: T,
    pub sigma: T,
    pub epsilon: T,
    pub saturation: T,
    pub m0: T,
    pub p0: T,
}

impl<T: Real> Default for CubicSensor<T> {
    fn default() -> Self {
        Self {
            a: T::lit(-1.0),
            sigma: T::one(),
            epsilon: T::lit(0.1),
            saturation: T::lit(5.0),
            m0: T::zero(),
            p0: T::one(),
        }
    }
}

impl<T: Real> CubicSensor<T> {
    pub fn sensor(&self, x: T) -> T {
        let s = self.saturation;
        s * (x * x * x / (T::one() + self.epsilon * x * x) / s).tanh()
    }

    pub fn filter_model(&self) -> Result<FilterModel<T>> {
        let Self { a, sigma, epsilon, saturation, m0, p0 } = *self;
        if !(epsilon > T::zero() && saturation > T::zero() && p0 > T::zero()) {
            return Err(Error::InvalidArgument("cubic sensor needs epsilon, saturation and p0 positive".into()));
        }
        let this = *self;
        let norm = T::one() / (T::lit(2.0) * T::PI() * p0).sqrt();
        let density = Arc::new(move |x: &[T]| {
            let z = x[0] - m0;
            norm * (-z * z / (T::lit(2.0) * p0)).exp()
        });
        let spread = T::lit(12.0) * p0.sqrt();
        Ok(FilterModel::new(1, 1, 1)
            .with_drift(move |x, out| out[0] = a * x[0])
            .with_signal_diffusion(move |_, out| out[0] = sigma)
            .with_observation(move |x, out| out[0] = this.sensor(x[0]))
            .with_initial_density(move |x| density(x), (m0 - spread, m0 + spread)))
    }
}

/// The models selectable by name from experiment configurations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BuiltinModel<T> {
    /// Linear model without correlation; the Kalman–Bucy filter is exact.
    OuLinear(LinearModel<T>),
    /// Linear model with constant correlation `ρ`.
    CorrelatedOu(LinearModel<T>),
    CubicSensor(CubicSensor<T>),
}

impl<T: Real> BuiltinModel<T> {
    /// Defaults: `a = -1`, `σ = 1`, `h = 1`, `X(0) ~ N(0, 1)`, and `ρ = 0.5`
    /// for the correlated model.
    pub fn by_name(name: &str) -> Option<Self> {
        let linear = LinearModel { a: T::lit(-1.0), sigma: T::one(), rho: T::zero(), h: T::one(), m0: T::zero(), p0: T::one() };
        match name {
            "ou-linear" => Some(Self::OuLinear(linear)),
            "correlated-ou" => Some(Self::CorrelatedOu(LinearModel { rho: T::lit(0.5), ..linear })),
            "cubic-sensor" => Some(Self::CubicSensor(CubicSensor::default())),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::OuLinear(_) => "ou-linear",
            Self::CorrelatedOu(_) => "correlated-ou",
            Self::CubicSensor(_) => "cubic-sensor",
        }
    }

    pub fn linear(&self) -> Option<&LinearModel<T>> {
        match self {
            Self::OuLinear(m) | Self::CorrelatedOu(m) => Some(m),
            Self::CubicSensor(_) => None,
        }
    }

    pub fn filter_model(&self) -> Result<FilterModel<T>> {
        match self {
            Self::OuLinear(m) => {
                if m.rho != T::zero() {
                    return Err(Error::InvalidArgument("ou-linear has no correlation; use correlated-ou".into()));
                }
                m.filter_model()
            }
            Self::CorrelatedOu(m) => m.filter_model(),
            Self::CubicSensor(m) => m.filter_model(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_models() {
        for name in ["ou-linear", "correlated-ou", "cubic-sensor"] {
            let m = BuiltinModel::<f64>::by_name(name).unwrap();
            assert_eq!(m.name(), name);
            assert!(m.filter_model().is_ok());
        }
        assert!(BuiltinModel::<f64>::by_name("nope").is_none());
        let c = BuiltinModel::<f64>::by_name("correlated-ou").unwrap();
        assert_eq!(c.linear().unwrap().rho, 0.5);
    }

    #[test]
    fn cubic_sensor_is_bounded_and_cubic_near_zero() {
        let s = CubicSensor::<f64>::default();
        assert!((s.sensor(0.1) - 0.001 / 1.001).abs() < 1e-9);
        for x in [-100.0, -3.0, 3.0, 1e6] {
            assert!(s.sensor(x).abs() <= 5.0);
        }
        assert!(s.sensor(2.0) > 0.0 && s.sensor(-2.0) < 0.0);
    }
}
