//! Dyadic frequency grids and band-limited kernels with a nonincreasing,
//! piecewise-constant Fourier transform.
//!
//! A kernel is stored as the values `v_k` of `K^` on the bins
//! `[k 2^-t, (k+1) 2^-t)` of `[0, W)`. Negative frequencies are implied by
//! symmetry and never stored, so every integral over `[-W, W]` is twice the
//! half-line sum.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INTEGRALITY_TOLERANCE: f64 = 1e-9;

/// Partition of `[0, W)` into `m = W 2^t` bins of width `2^-t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    band: f64,
    resolution: u32,
    bins: usize,
}

impl FrequencyGrid {
    pub fn new(band: f64, resolution: u32) -> Result<Self> {
        let reject = |product: f64| Error::NonIntegralGrid {
            band,
            resolution,
            product,
        };
        if !band.is_finite() || band <= 0.0 || resolution > 52 {
            return Err(reject(f64::NAN));
        }
        let product = band * 2f64.powi(resolution as i32);
        let bins = product.round();
        if bins < 1.0 || (product - bins).abs() > INTEGRALITY_TOLERANCE * bins.max(1.0) {
            return Err(reject(product));
        }
        let bins = bins as usize;
        Ok(Self {
            band: bins as f64 * 0.5f64.powi(resolution as i32),
            resolution,
            bins,
        })
    }

    /// Band limit `W`.
    pub fn band(&self) -> f64 {
        self.band
    }

    /// Dyadic resolution `t`.
    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    /// Number of bins `m`.
    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Common bin width `2^-t`.
    pub fn width(&self) -> f64 {
        0.5f64.powi(self.resolution as i32)
    }

    pub fn edge(&self, k: usize) -> f64 {
        k as f64 * self.width()
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.width()
    }

    /// All `m + 1` bin edges.
    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins).map(|k| self.edge(k)).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.bins).map(|k| self.midpoint(k)).collect()
    }

    /// Bin containing `omega`, or `None` outside `[0, W)`.
    pub fn bin_of(&self, omega: f64) -> Option<usize> {
        if !(0.0..self.band).contains(&omega) {
            return None;
        }
        Some(((omega / self.width()) as usize).min(self.bins - 1))
    }

    /// Same band at resolution `t + 1`; every bin splits in two.
    pub fn refined(&self) -> Self {
        Self {
            band: self.band,
            resolution: self.resolution + 1,
            bins: self.bins * 2,
        }
    }

    /// Same band at resolution `t - 1`, if the bin count stays integral.
    pub fn coarsened(&self) -> Option<Self> {
        if self.resolution == 0 || !self.bins.is_multiple_of(2) {
            return None;
        }
        Some(Self {
            band: self.band,
            resolution: self.resolution - 1,
            bins: self.bins / 2,
        })
    }

    /// Smallest resolution at which `band` gives an integral bin count.
    pub fn coarsest_resolution(band: f64) -> Option<u32> {
        (0..=52).find(|&t| Self::new(band, t).is_ok())
    }

    pub(crate) fn ensure_same(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(W={}, t={}) vs (W={}, t={})",
                self.band, self.resolution, other.band, other.resolution
            )))
        }
    }
}

impl fmt::Display for FrequencyGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W={} t={} m={}", self.band, self.resolution, self.bins)
    }
}

/// A kernel given by its Fourier transform, a step function on a grid.
///
/// Admissible kernels have `1 = v_0 >= v_1 >= ... >= v_{m-1} >= 0`.
/// [`SpectralKernel::from_raw`] skips those checks so diagnostics can be
/// exercised on deliberately inadmissible input.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralKernel {
    grid: FrequencyGrid,
    values: Vec<f64>,
    // (frequency, drop) at every edge where K^ jumps, including the final
    // drop to zero at W.
    jumps: Vec<(f64, f64)>,
}

impl SpectralKernel {
    pub fn new(grid: FrequencyGrid, values: Vec<f64>) -> Result<Self> {
        let kernel = Self::from_raw(grid, values)?;
        kernel.check_admissible()?;
        Ok(kernel)
    }

    /// Builds a kernel checking only the length and finiteness of `values`.
    pub fn from_raw(grid: FrequencyGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.bins() {
            return Err(Error::InvalidKernel(format!(
                "expected {} values for grid {grid}, got {}",
                grid.bins(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel(format!("value v[{k}] is not finite")));
        }
        let jumps = jumps_of(&grid, &values);
        Ok(Self {
            grid,
            values,
            jumps,
        })
    }

    /// `K^ = 1` on every bin lying below `cutoff`, zero above.
    pub fn indicator(grid: FrequencyGrid, cutoff: f64) -> Result<Self> {
        let values = (0..grid.bins())
            .map(|k| if grid.midpoint(k) < cutoff { 1.0 } else { 0.0 })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Class membership: `v_0 = 1`, values in `[0, 1]`, nonincreasing.
    pub fn check_admissible(&self) -> Result<()> {
        let v = &self.values;
        if v[0] != 1.0 {
            return Err(Error::InvalidKernel(format!(
                "v[0] must equal 1, got {}",
                v[0]
            )));
        }
        if let Some(k) = v.iter().position(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidKernel(format!(
                "v[{k}] = {} lies outside [0, 1]",
                v[k]
            )));
        }
        if let Some(k) = v.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::InvalidKernel(format!(
                "values must be nonincreasing, but v[{}] = {} > v[{k}] = {}",
                k + 1,
                v[k + 1],
                v[k]
            )));
        }
        Ok(())
    }

    pub fn is_admissible(&self) -> bool {
        self.check_admissible().is_ok()
    }

    /// `||K||_2^2 = (1/2π) ∫ K^(ω)^2 dω`.
    pub fn l2_norm_sq(&self) -> f64 {
        let h = self.grid.width();
        self.values.iter().map(|v| v * v * h).sum::<f64>() / PI
    }

    /// Space-domain value `K(x) = (1/2π) ∫ K^(ω) e^{-iωx} dω`.
    ///
    /// Summation by parts over the bin edges gives
    /// `K(x) = (1/π) Σ_j J_j sin(ω_j x) / x` with `J_j` the drop of `K^` at
    /// edge `ω_j`, which is exact and stays regular at `x = 0`.
    pub fn evaluate(&self, x: f64) -> f64 {
        self.jumps
            .iter()
            .map(|&(omega, drop)| drop * omega * sinc(omega * x))
            .sum::<f64>()
            / PI
    }

    /// `K^(ω)` with the symmetric extension and zero outside the band.
    pub fn transform_at(&self, omega: f64) -> f64 {
        self.grid
            .bin_of(omega.abs())
            .map_or(0.0, |k| self.values[k])
    }

    /// Re-expresses the kernel on a finer grid with the same band.
    pub fn refined_to(&self, grid: FrequencyGrid) -> Result<Self> {
        if grid.band() != self.grid.band() || grid.resolution() < self.grid.resolution() {
            return Err(Error::GridMismatch(format!(
                "cannot refine from {} to {grid}",
                self.grid
            )));
        }
        let factor = 1usize << (grid.resolution() - self.grid.resolution());
        let values = self
            .values
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, factor))
            .collect();
        Self::from_raw(grid, values)
    }

    /// Kernel with transform `v_k^2`, i.e. the self-convolution `K * K`.
    pub fn squared(&self) -> Self {
        let values = self.values.iter().map(|v| v * v).collect();
        Self::from_raw(self.grid, values).expect("squaring preserves length and finiteness")
    }
}

fn jumps_of(grid: &FrequencyGrid, values: &[f64]) -> Vec<(f64, f64)> {
    let m = values.len();
    (1..=m)
        .filter_map(|j| {
            let next = if j == m { 0.0 } else { values[j] };
            let drop = values[j - 1] - next;
            (drop != 0.0).then(|| (grid.edge(j), drop))
        })
        .collect()
}

/// `sin(u) / u` with the removable singularity filled in.
pub(crate) fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        1.0 - u2 / 6.0 + u2 * u2 / 120.0
    } else {
        u.sin() / u
    }
}

/// On-disk kernel form: `{"W": number, "t": integer, "v": [numbers]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelFile {
    #[serde(rename = "W")]
    pub band: f64,
    pub t: u32,
    pub v: Vec<f64>,
}

impl From<&SpectralKernel> for KernelFile {
    fn from(kernel: &SpectralKernel) -> Self {
        Self {
            band: kernel.grid.band(),
            t: kernel.grid.resolution(),
            v: kernel.values.clone(),
        }
    }
}

impl KernelFile {
    /// Rebuilds and validates the kernel.
    pub fn into_kernel(self) -> Result<SpectralKernel> {
        SpectralKernel::new(FrequencyGrid::new(self.band, self.t)?, self.v)
    }

    /// Rebuilds the kernel without class checks.
    pub fn into_raw_kernel(self) -> Result<SpectralKernel> {
        SpectralKernel::from_raw(FrequencyGrid::new(self.band, self.t)?, self.v)
    }
}

impl Serialize for SpectralKernel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        KernelFile::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SpectralKernel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        KernelFile::deserialize(deserializer)?
            .into_kernel()
            .map_err(serde::de::Error::custom)
    }
}
