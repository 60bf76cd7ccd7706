use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::Real;

fn uniform_tolerance<T: Real>(horizon: T) -> T {
    T::lit(1e-12).max(T::lit(64.0) * T::epsilon()) * horizon.abs().max(T::one())
}

/// Observation samples on one window `[t_start, t_start + Δ]`, both ends included.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationWindow<T> {
    times: Vec<T>,
    values: Vec<Vec<T>>,
}

impl<T: Real> ObservationWindow<T> {
    pub fn new(times: Vec<T>, values: Vec<Vec<T>>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "window needs at least two samples with one value row each ({} times, {} rows)",
                times.len(),
                values.len()
            )));
        }
        let r = values[0].len();
        if r == 0 || values.iter().any(|v| v.len() != r) {
            return Err(Error::InvalidArgument("window value rows must share a positive width".into()));
        }
        if !times.iter().chain(values.iter().flatten()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite { context: "observation window".into() });
        }
        let spacing = (times[times.len() - 1] - times[0]) / T::count(times.len() - 1);
        let tol = uniform_tolerance(times[times.len() - 1]);
        for (i, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) || ((w[1] - w[0]) - spacing).abs() > tol {
                return Err(Error::InvalidArgument(format!("window times are not uniform at sample {}", i + 1)));
            }
        }
        Ok(Self { times, values })
    }

    pub fn t_start(&self) -> T {
        self.times[0]
    }

    pub fn t_end(&self) -> T {
        self.times[self.times.len() - 1]
    }

    pub fn length(&self) -> T {
        self.t_end() - self.t_start()
    }

    pub fn spacing(&self) -> T {
        self.length() / T::count(self.times.len() - 1)
    }

    pub fn channels(&self) -> usize {
        self.values[0].len()
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }
}

/// A uniformly sampled observation path, the content of a replay file:
///
/// ```text
/// delta_obs=<spacing>
/// r=<channels>
/// <t> <y_1> ... <y_r>
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationRecord<T> {
    delta_obs: T,
    r: usize,
    times: Vec<T>,
    values: Vec<Vec<T>>,
}

impl<T: Real> ObservationRecord<T> {
    pub fn new(delta_obs: T, r: usize, times: Vec<T>, values: Vec<Vec<T>>) -> Result<Self> {
        if !(delta_obs > T::zero() && delta_obs.is_finite()) || r == 0 {
            return Err(Error::InvalidArgument(format!("record needs delta_obs > 0 and r >= 1, got {delta_obs}, {r}")));
        }
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), got: values.len() });
        }
        if let Some(bad) = values.iter().position(|v| v.len() != r) {
            return Err(Error::DimensionMismatch { expected: r, got: values[bad].len() });
        }
        if !times.iter().chain(values.iter().flatten()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite { context: "observation record".into() });
        }
        if let Some(&last) = times.last() {
            let tol = uniform_tolerance(last);
            for (i, w) in times.windows(2).enumerate() {
                if ((w[1] - w[0]) - delta_obs).abs() > tol {
                    return Err(Error::InvalidArgument(format!(
                        "sample {} is not delta_obs={delta_obs} after the previous one",
                        i + 1
                    )));
                }
            }
        }
        Ok(Self { delta_obs, r, times, values })
    }

    pub fn delta_obs(&self) -> T {
        self.delta_obs
    }

    pub fn channels(&self) -> usize {
        self.r
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Consecutive windows of length `delta` sharing endpoints; a trailing
    /// stretch shorter than `delta` is not returned.
    pub fn windows(&self, delta: T) -> Result<Vec<ObservationWindow<T>>> {
        let ratio = delta / self.delta_obs;
        let per_window = ratio.round();
        if per_window < T::one() || (ratio - per_window).abs() > T::lit(1e-9).max(T::lit(64.0) * T::epsilon()) * ratio
        {
            return Err(Error::InvalidArgument(format!(
                "window length {delta} is not a multiple of delta_obs={}",
                self.delta_obs
            )));
        }
        let per_window = per_window.to_usize().expect("finite window ratio");
        if self.times.len() < 2 {
            return Ok(Vec::new());
        }
        let count = (self.times.len() - 1) / per_window;
        (0..count)
            .map(|w| {
                let range = w * per_window..=(w + 1) * per_window;
                ObservationWindow::new(self.times[range.clone()].to_vec(), self.values[range].to_vec())
            })
            .collect()
    }

    pub fn write(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "delta_obs={:.16e}", self.delta_obs.as_f64())?;
        writeln!(out, "r={}", self.r)?;
        for (t, y) in self.times.iter().zip(&self.values) {
            write!(out, "{:.16e}", t.as_f64())?;
            for v in y {
                write!(out, " {:.16e}", v.as_f64())?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read(input: impl BufRead) -> Result<Self> {
        let mut delta_obs = None;
        let mut r = None;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let text = line.trim();
            let line_no = i + 1;
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            if let Some(v) = text.strip_prefix("delta_obs=") {
                delta_obs = Some(v.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: "bad delta_obs".into(),
                })?);
                continue;
            }
            if let Some(v) = text.strip_prefix("r=") {
                r = Some(v.trim().parse::<usize>().map_err(|_| Error::Parse { line: line_no, message: "bad r".into() })?);
                continue;
            }
            let nums: std::result::Result<Vec<f64>, _> = text.split_whitespace().map(str::parse).collect();
            let nums = nums.map_err(|_| Error::Parse { line: line_no, message: "bad sample value".into() })?;
            let width = r.ok_or(Error::Parse { line: line_no, message: "sample before `r=` header".into() })?;
            if nums.len() != width + 1 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {} columns, found {}", width + 1, nums.len()),
                });
            }
            times.push(T::lit(nums[0]));
            values.push(nums[1..].iter().map(|&v| T::lit(v)).collect());
        }
        let delta_obs = delta_obs.ok_or(Error::Parse { line: 0, message: "missing `delta_obs=` header".into() })?;
        let r = r.ok_or(Error::Parse { line: 0, message: "missing `r=` header".into() })?;
        Self::new(T::lit(delta_obs), r, times, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip_and_windows() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let values: Vec<Vec<f64>> = times.iter().map(|t| vec![t.sin(), -t]).collect();
        let rec = ObservationRecord::new(0.1, 2, times, values).unwrap();
        let mut buf = Vec::new();
        rec.write(&mut buf).unwrap();
        let back = ObservationRecord::<f64>::read(&buf[..]).unwrap();
        assert_eq!(back, rec);
        let w = rec.windows(0.3).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[1].times().len(), 4);
        assert!((w[1].t_start() - 0.3).abs() < 1e-15);
        assert!(rec.windows(0.25).is_err());
    }

    #[test]
    fn empty_record_has_no_windows() {
        let rec = ObservationRecord::<f64>::read(&b"delta_obs=0.01\nr=1\n"[..]).unwrap();
        assert!(rec.is_empty());
        assert!(rec.windows(0.1).unwrap().is_empty());
    }

    #[test]
    fn malformed_inputs() {
        assert!(ObservationRecord::<f64>::read(&b"r=1\n0 0\n"[..]).is_err());
        assert!(ObservationRecord::<f64>::read(&b"delta_obs=0.1\nr=1\n0 0 1\n"[..]).is_err());
        assert!(ObservationRecord::<f64>::read(&b"delta_obs=0.1\nr=1\n0 0\n0.3 1\n"[..]).is_err());
        assert!(ObservationWindow::new(vec![0.0, 0.1, 0.3], vec![vec![0.0]; 3]).is_err());
    }
}
