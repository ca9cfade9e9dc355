use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::linalg::{max_abs, CMat};
use crate::scalar::{Complex, Real};

/// What a matrix spectrum (or the trace derived from it) represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpectrumKind {
    Admittance,
    Reflection,
    Ctf,
    Delta,
}

impl SpectrumKind {
    pub fn name(self) -> &'static str {
        match self {
            SpectrumKind::Admittance => "admittance",
            SpectrumKind::Reflection => "reflection",
            SpectrumKind::Ctf => "ctf",
            SpectrumKind::Delta => "delta",
        }
    }
}

/// One L×L complex matrix per grid frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSpectrum<T: Real> {
    grid: FrequencyGrid<T>,
    values: Vec<CMat<T>>,
    kind: SpectrumKind,
}

impl<T: Real> MatrixSpectrum<T> {
    pub fn new(grid: FrequencyGrid<T>, values: Vec<CMat<T>>, kind: SpectrumKind) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::Validation(format!(
                "spectrum has {} matrices for {} grid points",
                values.len(),
                grid.n_points()
            )));
        }
        let n = values[0].nrows();
        for (k, m) in values.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Validation(format!(
                    "spectrum matrix {k} is not {n}x{n}"
                )));
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Validation(format!(
                    "spectrum has non-finite entries at {} Hz",
                    grid.freq(k).as_f64()
                )));
            }
        }
        Ok(Self { grid, values, kind })
    }

    pub fn grid(&self) -> &FrequencyGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[CMat<T>] {
        &self.values
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn n_conductors(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, &CMat<T>)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, m)| (self.grid.freq(k), m))
    }

    /// The `(row, col)` entry across the grid.
    pub fn entry(&self, row: usize, col: usize) -> Vec<Complex<T>> {
        self.values.iter().map(|m| m[(row, col)]).collect()
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, m| acc.max(max_abs(m)))
    }

    pub(crate) fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Grid("spectra are defined on different grids".into()));
        }
        if self.n_conductors() != other.n_conductors() {
            return Err(Error::Validation(
                "spectra differ in conductor count".into(),
            ));
        }
        Ok(())
    }
}
