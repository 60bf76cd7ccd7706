//! Euler–Maruyama simulation of the signal/observation pair under the
//! physical measure.
//!
//! Every path draws from its own ChaCha stream keyed by `(seed, path index)`,
//! so paths can be generated in any order or in parallel and still come out
//! bit-identical.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::filter_runtime::ObservationRecord;
use crate::galerkin::{Density, FilterModel};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimulationConfig<T> {
    pub horizon: T,
    pub dt_sim: T,
    pub dt_obs: T,
    pub seed: u64,
}

impl<T: Real> SimulationConfig<T> {
    /// Checks `0 < dt_sim <= dt_obs <= horizon` with both ratios integral;
    /// returns (steps per report, number of reports).
    pub fn validate(&self) -> Result<(usize, usize)> {
        let Self { horizon, dt_sim, dt_obs, .. } = *self;
        if !(dt_sim > T::zero() && dt_sim <= dt_obs && dt_obs <= horizon) {
            return Err(Error::InvalidArgument(format!(
                "simulation needs 0 < dt_sim <= dt_obs <= T, got {dt_sim}, {dt_obs}, {horizon}"
            )));
        }
        let ratio = |num: T, den: T, what: &str| -> Result<usize> {
            let q = num / den;
            let r = q.round();
            if (q - r).abs() > T::lit(1e-9).max(T::lit(64.0) * T::epsilon()) * q {
                return Err(Error::InvalidArgument(format!("{what} is not an integer multiple")));
            }
            Ok(r.to_usize().expect("finite ratio"))
        };
        Ok((ratio(dt_obs, dt_sim, "dt_obs / dt_sim")?, ratio(horizon, dt_obs, "T / dt_obs")?))
    }
}

/// Signal and observation sampled at the report times.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedPath<T> {
    pub times: Vec<T>,
    pub x: Vec<Vec<T>>,
    pub y: Vec<Vec<T>>,
}

impl<T: Real> SimulatedPath<T> {
    pub fn observation_record(&self) -> Result<ObservationRecord<T>> {
        let dt = if self.times.len() > 1 { self.times[1] - self.times[0] } else { T::one() };
        ObservationRecord::new(dt, self.y.first().map_or(1, Vec::len), self.times.clone(), self.y.clone())
    }

    /// Writes `t x_1 ... x_d` per line.
    pub fn write_truth(&self, out: &mut impl Write) -> Result<()> {
        for (t, x) in self.times.iter().zip(&self.x) {
            write!(out, "{:.16e}", t.as_f64())?;
            for v in x {
                write!(out, " {:.16e}", v.as_f64())?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Random stream for one path.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

fn normal<T: Real>(rng: &mut impl Rng) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// Inverse-CDF sampling of a one-dimensional density tabulated on `support`.
pub fn sample_initial<T: Real>(p0: &Density<T>, support: (T, T), count: usize, seed: u64) -> Result<Vec<T>> {
    let sampler = InverseCdf::new(p0, support)?;
    let mut rng = path_rng(seed, u64::MAX);
    Ok((0..count).map(|_| sampler.sample(rng.random::<f64>())).collect())
}

struct InverseCdf<T> {
    grid: Vec<T>,
    cdf: Vec<T>,
}

const CDF_CELLS: usize = 8192;

impl<T: Real> InverseCdf<T> {
    fn new(p0: &Density<T>, (lo, hi): (T, T)) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::InvalidArgument("initial density support must have lo < hi".into()));
        }
        let h = (hi - lo) / T::count(CDF_CELLS);
        let grid: Vec<T> = (0..=CDF_CELLS).map(|i| lo + h * T::count(i)).collect();
        let mut values = Vec::with_capacity(grid.len());
        for &x in &grid {
            let v = p0(&[x]);
            if !v.is_finite() || v < T::zero() {
                return Err(Error::InvalidArgument(format!("initial density is negative or non-finite at {x}")));
            }
            values.push(v);
        }
        let mut cdf = Vec::with_capacity(grid.len());
        cdf.push(T::zero());
        for w in values.windows(2) {
            let last = *cdf.last().expect("nonempty");
            cdf.push(last + (w[0] + w[1]) * h * T::lit(0.5));
        }
        let total = *cdf.last().expect("nonempty");
        if !(total > T::zero()) {
            return Err(Error::InvalidArgument("initial density has no mass on its support".into()));
        }
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(Self { grid, cdf })
    }

    fn sample(&self, u: f64) -> T {
        let u = T::lit(u);
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { T::zero() };
        self.grid[i - 1] + frac * (self.grid[i] - self.grid[i - 1])
    }
}

/// Euler–Maruyama from `x0` with caller-supplied increments `dw[step]`
/// (length `d1`) and `dv[step]` (length `r`), reporting every `report_every`
/// steps. `Y` accumulates `h(X) dt + dV` with the same `dV` that drives `X`.
pub fn simulate_with_increments<T: Real>(
    model: &FilterModel<T>,
    x0: &[T],
    dt: T,
    dw: &[Vec<T>],
    dv: &[Vec<T>],
    report_every: usize,
) -> Result<SimulatedPath<T>> {
    let (d, d1, r) = (model.state_dim(), model.signal_noise_dim(), model.obs_dim());
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.len() });
    }
    if dw.len() != dv.len() || report_every == 0 || dw.len() % report_every != 0 {
        return Err(Error::InvalidArgument("increment sequences must match and be a multiple of the report stride".into()));
    }
    let mut x = x0.to_vec();
    let mut y = vec![T::zero(); r];
    let mut path = SimulatedPath { times: vec![T::zero()], x: vec![x.clone()], y: vec![y.clone()] };
    for (step, (w, v)) in dw.iter().zip(dv).enumerate() {
        if w.len() != d1 || v.len() != r {
            return Err(Error::DimensionMismatch { expected: d1 + r, got: w.len() + v.len() });
        }
        let c = model.coefficients_at(&x);
        let mut next = x.clone();
        for i in 0..d {
            next[i] += c.drift[i] * dt;
            for (j, &wj) in w.iter().enumerate() {
                next[i] += c.sigma[i * d1 + j] * wj;
            }
            for (l, &vl) in v.iter().enumerate() {
                next[i] += c.rho(i, l) * vl;
            }
        }
        for l in 0..r {
            y[l] += c.h[l] * dt + v[l];
        }
        if !next.iter().chain(&y).all(|v| v.is_finite()) {
            return Err(Error::BlowUp { step: step + 1 });
        }
        x = next;
        if (step + 1) % report_every == 0 {
            path.times.push(dt * T::count(step + 1));
            path.x.push(x.clone());
            path.y.push(y.clone());
        }
    }
    Ok(path)
}

/// Simulates path number `path` of `config` from a given initial state.
pub fn simulate_from<T: Real>(
    model: &FilterModel<T>,
    config: &SimulationConfig<T>,
    path: u64,
    x0: &[T],
) -> Result<SimulatedPath<T>> {
    let (per_report, reports) = config.validate()?;
    let steps = per_report * reports;
    let mut rng = path_rng(config.seed, path);
    let sq = config.dt_sim.sqrt();
    let mut dw = Vec::with_capacity(steps);
    let mut dv = Vec::with_capacity(steps);
    for _ in 0..steps {
        dw.push((0..model.signal_noise_dim()).map(|_| sq * normal::<T>(&mut rng)).collect());
        dv.push((0..model.obs_dim()).map(|_| sq * normal::<T>(&mut rng)).collect());
    }
    simulate_with_increments(model, x0, config.dt_sim, &dw, &dv, per_report)
}

/// Simulates path number `path` of `config`, drawing `X(0)` from the model's
/// initial density (one-dimensional models only; use [`simulate_from`]
/// otherwise).
pub fn simulate<T: Real>(model: &FilterModel<T>, config: &SimulationConfig<T>, path: u64) -> Result<SimulatedPath<T>> {
    if model.state_dim() != 1 {
        return Err(Error::InvalidArgument("built-in initial sampling is one-dimensional; use simulate_from".into()));
    }
    let sampler = InverseCdf::new(model.initial_density(), model.initial_support())?;
    // the initial draw uses its own stream so that it does not shift the noise
    let mut rng = path_rng(config.seed ^ 0x9e37_79b9_7f4a_7c15, path);
    let x0 = sampler.sample(rng.random::<f64>());
    simulate_from(model, config, path, &[x0])
}
