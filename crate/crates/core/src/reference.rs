//! Exact-filter oracle for scalar linear models (Kalman–Bucy with the
//! correlated-noise gain) and error summaries between estimate series.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::galerkin::FilterModel;
use crate::scalar::Real;

/// `dX = a X dt + σ dW + ρ dV`, `dY = h X dt + dV`, `X(0) ~ N(m0, p0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearModel<T> {
    pub a: T,
    pub sigma: T,
    pub rho: T,
    pub h: T,
    pub m0: T,
    pub p0: T,
}

impl<T: Real> LinearModel<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.sigma, self.rho, self.h, self.m0, self.p0];
        if !all.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { context: "linear model parameters".into() });
        }
        if self.p0 < T::zero() {
            return Err(Error::InvalidArgument(format!("initial variance must be nonnegative, got {}", self.p0)));
        }
        Ok(())
    }

    /// The same model as a general filtering model. Needs `p0 > 0` so that
    /// the initial law has a density.
    pub fn filter_model(&self) -> Result<FilterModel<T>> {
        self.validate()?;
        if self.p0 <= T::zero() {
            return Err(Error::InvalidArgument("a Gaussian initial density needs p0 > 0".into()));
        }
        let Self { a, sigma, rho, h, m0, p0 } = *self;
        let norm = T::one() / (T::lit(2.0) * T::PI() * p0).sqrt();
        let density = Arc::new(move |x: &[T]| {
            let z = x[0] - m0;
            norm * (-z * z / (T::lit(2.0) * p0)).exp()
        });
        let spread = T::lit(12.0) * p0.sqrt();
        Ok(FilterModel::new(1, 1, 1)
            .with_drift(move |x, out| out[0] = a * x[0])
            .with_signal_diffusion(move |_, out| out[0] = sigma)
            .with_correlation(move |_, out| out[0] = rho)
            .with_observation(move |x, out| out[0] = h * x[0])
            .with_initial_density(move |x| density(x), (m0 - spread, m0 + spread)))
    }

    /// Nonnegative root of `2aP + σ² + ρ² - (Ph + ρ)² = 0`, when the
    /// variance equation has a finite attracting fixed point.
    pub fn steady_state_variance(&self) -> Option<T> {
        let Self { a, sigma, rho, h, .. } = *self;
        // -h² P² + 2(a - ρh) P + σ² = 0
        let qa = -h * h;
        let qb = T::lit(2.0) * (a - rho * h);
        let qc = sigma * sigma;
        if qa == T::zero() {
            return if qb < T::zero() { Some(-qc / qb) } else { None };
        }
        let disc = qb * qb - T::lit(4.0) * qa * qc;
        if disc < T::zero() {
            return None;
        }
        let roots = [(-qb + disc.sqrt()) / (T::lit(2.0) * qa), (-qb - disc.sqrt()) / (T::lit(2.0) * qa)];
        roots.into_iter().filter(|&p| p >= T::zero()).reduce(T::max)
    }
}

/// Substeps per observation interval used by [`kalman_bucy`] in the runtime
/// comparisons; the observation path is interpolated linearly in between.
pub const KALMAN_SUBSTEPS: usize = 4;

/// Euler discretization of
///
/// ```text
/// dm = a m dt + (P h + ρ)(dY - h m dt)
/// dP = (2 a P + σ² + ρ² - (P h + ρ)²) dt
/// ```
///
/// driven by `y` sampled every `delta_obs` (with `y[0]` at the initial time),
/// each interval split into `substeps` equal steps. Returns `(m, P)` at every
/// sample time, starting with `(m0, p0)`.
pub fn kalman_bucy<T: Real>(model: &LinearModel<T>, y: &[T], delta_obs: T, substeps: usize) -> Result<Vec<(T, T)>> {
    model.validate()?;
    if !(delta_obs > T::zero()) || substeps == 0 {
        return Err(Error::InvalidArgument("kalman_bucy needs delta_obs > 0 and substeps >= 1".into()));
    }
    let LinearModel { a, sigma, rho, h, m0, p0 } = *model;
    let dt = delta_obs / T::count(substeps);
    let noise = sigma * sigma + rho * rho;
    let (mut m, mut p) = (m0, p0);
    let mut out = Vec::with_capacity(y.len());
    out.push((m, p));
    for (i, w) in y.windows(2).enumerate() {
        let dy = (w[1] - w[0]) / T::count(substeps);
        for sub in 0..substeps {
            let gain = p * h + rho;
            let m_next = m + a * m * dt + gain * (dy - h * m * dt);
            let p_next = p + (T::lit(2.0) * a * p + noise - gain * gain) * dt;
            if p_next < T::zero() {
                return Err(Error::NegativeVariance { step: i * substeps + sub + 1, value: p_next.as_f64() });
            }
            if !(m_next.is_finite() && p_next.is_finite()) {
                return Err(Error::BlowUp { step: i * substeps + sub + 1 });
            }
            m = m_next;
            p = p_next;
        }
        out.push((m, p));
    }
    Ok(out)
}

/// Differences between two aligned estimate series.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSummary<T> {
    pub rmse: T,
    pub max_abs: T,
    /// `(t, chaos - oracle)` per time.
    pub series: Vec<(T, T)>,
}

/// Compares `(t, value)` series that must share their time grid.
pub fn compare_on_path<T: Real>(chaos: &[(T, T)], oracle: &[(T, T)]) -> Result<ErrorSummary<T>> {
    if chaos.len() != oracle.len() {
        return Err(Error::GridMismatch(format!("{} chaos times vs {} oracle times", chaos.len(), oracle.len())));
    }
    let mut series = Vec::with_capacity(chaos.len());
    let (mut sq, mut max_abs) = (T::zero(), T::zero());
    for (i, (&(tc, vc), &(to, vo))) in chaos.iter().zip(oracle).enumerate() {
        let tol = T::lit(1e-9) * tc.abs().max(T::one());
        if (tc - to).abs() > tol {
            return Err(Error::GridMismatch(format!("entry {i}: chaos time {tc} vs oracle time {to}")));
        }
        let d = vc - vo;
        sq += d * d;
        max_abs = max_abs.max(d.abs());
        series.push((tc, d));
    }
    let rmse = if series.is_empty() { T::zero() } else { (sq / T::count(series.len())).sqrt() };
    Ok(ErrorSummary { rmse, max_abs, series })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(a: f64, sigma: f64, rho: f64, h: f64) -> LinearModel<f64> {
        LinearModel { a, sigma, rho, h, m0: 0.7, p0: 1.0 }
    }

    #[test]
    fn no_information_without_observation() {
        let m = model(-0.5, 1.0, 0.0, 0.0);
        let y: Vec<f64> = (0..=400).map(|i| (i as f64 * 0.37).sin()).collect();
        let out = kalman_bucy(&m, &y, 0.01, 4).unwrap();
        let (mean, var) = out[400];
        // Euler on dm = a m dt and the Lyapunov equation dP = (2aP + σ²) dt
        let steps = 1600;
        let dt: f64 = 0.0025;
        let want_m = 0.7 * (1.0 - 0.5 * dt).powi(steps);
        let mut p = 1.0;
        for _ in 0..steps {
            p += (-p + 1.0) * dt;
        }
        assert!((mean - want_m).abs() < 1e-12);
        assert!((var - p).abs() < 1e-12);
    }

    #[test]
    fn riccati_fixed_points() {
        let m = model(0.0, 1.0, 0.0, 1.0);
        assert!((m.steady_state_variance().unwrap() - 1.0).abs() < 1e-15);
        let out = kalman_bucy(&m, &vec![0.0; 2001], 0.005, 4).unwrap();
        assert!((out[2000].1 - 1.0).abs() < 1e-6);

        let c = model(-1.0, 0.0, 0.6, 1.0);
        let p = c.steady_state_variance().unwrap();
        assert!(p >= 0.0 && (-2.0 * p + 0.36 - (p + 0.6).powi(2)).abs() < 1e-14);
        let headline = model(-1.0, 1.0, 0.5, 1.0).steady_state_variance().unwrap();
        assert!((headline - (13f64.sqrt() - 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn coarse_steps_report_negative_variance() {
        let m = LinearModel { a: 0.0, sigma: 0.0, rho: 0.0, h: 10.0, m0: 0.0, p0: 1.0 };
        assert!(matches!(kalman_bucy(&m, &[0.0, 0.0], 1.0, 1), Err(Error::NegativeVariance { step: 1, .. })));
    }

    #[test]
    fn comparisons() {
        let a = [(0.0, 1.0), (0.1, 2.0), (0.2, -1.0)];
        let same = compare_on_path(&a, &a).unwrap();
        assert_eq!((same.rmse, same.max_abs), (0.0, 0.0));
        let shifted: Vec<(f64, f64)> = a.iter().map(|&(t, v)| (t, v - 0.25)).collect();
        let s = compare_on_path(&a, &shifted).unwrap();
        assert!((s.rmse - 0.25).abs() < 1e-15 && (s.max_abs - 0.25).abs() < 1e-15);
        assert!(compare_on_path(&a, &a[..2]).is_err());
        assert!(compare_on_path(&a, &[(0.0, 1.0), (0.15, 2.0), (0.2, -1.0)]).is_err());
    }
}
