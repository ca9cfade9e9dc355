use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform frequency grid `f_k = f_start + k·f_step`, `k = 0..n_points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid<T: Real> {
    f_start: T,
    f_step: T,
    n_points: usize,
}

impl<T: Real> FrequencyGrid<T> {
    pub fn new(f_start: T, f_step: T, n_points: usize) -> Result<Self> {
        if !(f_start > T::zero()) || !f_start.is_finite() {
            return Err(Error::Grid(format!(
                "start frequency must be positive, got {}",
                f_start.as_f64()
            )));
        }
        if !(f_step > T::zero()) || !f_step.is_finite() {
            return Err(Error::Grid(format!(
                "frequency step must be positive, got {}",
                f_step.as_f64()
            )));
        }
        if n_points < 2 {
            return Err(Error::Grid(format!(
                "at least 2 points are required, got {n_points}"
            )));
        }
        Ok(Self {
            f_start,
            f_step,
            n_points,
        })
    }

    /// 100 kHz to 80 MHz in 100 kHz steps.
    pub fn plc_default() -> Self {
        Self::new(T::lit(100e3), T::lit(100e3), 800).expect("valid default grid")
    }

    pub fn f_start(&self) -> T {
        self.f_start
    }

    pub fn f_step(&self) -> T {
        self.f_step
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn freq(&self, k: usize) -> T {
        self.f_start + self.f_step * T::from_count(k)
    }

    pub fn f_max(&self) -> T {
        self.freq(self.n_points - 1)
    }

    pub fn freqs(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.n_points).map(move |k| self.freq(k))
    }

    /// Number of grid steps between DC and `f_start`, when `f_start` sits on the
    /// DC-anchored lattice `{0, f_step, 2·f_step, ...}`.
    pub fn dc_offset_steps(&self) -> Option<usize> {
        let ratio = self.f_start / self.f_step;
        let m = ratio.round();
        if (ratio - m).abs() <= T::lit(1e-6) * ratio.max(T::one()) {
            m.to_usize()
        } else {
            None
        }
    }
}
