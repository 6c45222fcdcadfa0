//! Risk functionals in the frequency domain: the cross-validation criterion,
//! ISE, MISE, the low-frequency bias and the degenerate U-statistic kernel.
//!
//! All of them reduce, through Parseval, to sums over the bins of the
//! kernel's grid. The kernel factor is exact per bin, and so are the model
//! terms (`|f^|^2` and `f^` are integrated over each bin). The empirical
//! characteristic function is sampled at bin midpoints, or at `q` equally
//! spaced nodes per bin (see [`EmpiricalSpectrum::with_nodes`]).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::densities::{DensityModel, SampleSet};
use crate::error::{Error, Result};
use crate::quad;
use crate::spectral::{FrequencyGrid, SpectralKernel};

// Rotations accumulate rounding; restart from an exact sin/cos this often.
const RESEED_INTERVAL: usize = 128;

/// `S(ω) = Σ_j e^{iωX_j}` sampled on a grid, with per-bin `|S|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSpectrum {
    grid: FrequencyGrid,
    n: usize,
    nodes_per_bin: usize,
    // S at the nodes h (k + (r + 1/2) / q), bin-major. Empty when built
    // from power values alone.
    ecf: Vec<Complex64>,
    // Average of |S|^2 over the nodes of each bin.
    power: Vec<f64>,
}

impl EmpiricalSpectrum {
    /// Spectrum at the bin midpoints.
    pub fn new(sample: &SampleSet, grid: FrequencyGrid) -> Result<Self> {
        Self::with_nodes(sample, grid, 1)
    }

    /// Spectrum at `q` equally spaced nodes per bin; `q = 1` is the midpoint
    /// rule and larger `q` integrates `|S|^2` more accurately within a bin.
    pub fn with_nodes(sample: &SampleSet, grid: FrequencyGrid, q: usize) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::SampleTooSmall {
                what: "the empirical spectrum",
                required: 1,
                actual: 0,
            });
        }
        if q == 0 {
            return Err(Error::InvalidArgument(
                "nodes per bin must be positive".into(),
            ));
        }
        let spacing = grid.width() / q as f64;
        let ecf = characteristic_sums(&sample.values, spacing, grid.bins() * q);
        let power = ecf
            .chunks(q)
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>() / q as f64)
            .collect();
        Ok(Self {
            grid,
            n: sample.len(),
            nodes_per_bin: q,
            ecf,
            power,
        })
    }

    /// Spectrum given directly by its per-bin `|S|^2`, for constructed
    /// instances. ISE needs the phases and is unavailable on such a value.
    pub fn from_power(grid: FrequencyGrid, n: usize, power: Vec<f64>) -> Result<Self> {
        if power.len() != grid.bins() {
            return Err(Error::InvalidArgument(format!(
                "expected {} power values for grid {grid}, got {}",
                grid.bins(),
                power.len()
            )));
        }
        if let Some(p) = power.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "power value {p} must be finite and non-negative"
            )));
        }
        if n == 0 {
            return Err(Error::SampleTooSmall {
                what: "the empirical spectrum",
                required: 1,
                actual: 0,
            });
        }
        Ok(Self {
            grid,
            n,
            nodes_per_bin: 1,
            ecf: Vec::new(),
            power,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes_per_bin(&self) -> usize {
        self.nodes_per_bin
    }

    /// Per-bin `|S|^2`.
    pub fn power(&self) -> &[f64] {
        &self.power
    }

    /// `S` at every node, bin-major; empty for [`Self::from_power`] values.
    pub fn ecf(&self) -> &[Complex64] {
        &self.ecf
    }

    /// Frequency of node `i`.
    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.grid.width() / self.nodes_per_bin as f64
    }

    /// The same spectrum on the grid one level coarser. Node positions do
    /// not move, so each coarse bin simply owns twice as many nodes and the
    /// criterion stays consistent across resolutions.
    pub fn coarsen(&self) -> Option<Self> {
        let grid = self.grid.coarsened()?;
        let power = self.power.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        Some(Self {
            grid,
            n: self.n,
            nodes_per_bin: 2 * self.nodes_per_bin,
            ecf: self.ecf.clone(),
            power,
        })
    }
}

/// `Σ_j e^{iω_i X_j}` at `ω_i = spacing (i + 1/2)`, `i < count`.
///
/// The summation order is fixed (samples in input order for every node), so
/// the result is bit-reproducible.
fn characteristic_sums(values: &[f64], spacing: f64, count: usize) -> Vec<Complex64> {
    let n = values.len();
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    let (step_im, step_re): (Vec<f64>, Vec<f64>) =
        values.iter().map(|x| (spacing * x).sin_cos()).unzip();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        if i % RESEED_INTERVAL == 0 {
            let omega = spacing * (i as f64 + 0.5);
            for j in 0..n {
                let (s, c) = (omega * values[j]).sin_cos();
                re[j] = c;
                im[j] = s;
            }
        }
        let (mut sr, mut si) = (0.0, 0.0);
        for j in 0..n {
            sr += re[j];
            si += im[j];
        }
        out.push(Complex64::new(sr, si));
        for j in 0..n {
            let r = re[j] * step_re[j] - im[j] * step_im[j];
            im[j] = re[j] * step_im[j] + im[j] * step_re[j];
            re[j] = r;
        }
    }
    out
}

/// `S(ω)` at a single frequency, by direct summation.
pub fn characteristic_sum(sample: &SampleSet, omega: f64) -> Complex64 {
    sample
        .values
        .iter()
        .map(|x| {
            let (s, c) = (omega * x).sin_cos();
            Complex64::new(c, s)
        })
        .sum()
}

fn require_pairs(n: usize, what: &'static str) -> Result<()> {
    if n < 2 {
        return Err(Error::SampleTooSmall {
            what,
            required: 2,
            actual: n,
        });
    }
    Ok(())
}

/// Least-squares cross-validation criterion
/// `CV(K) = ∫ f~^2 - 2/(n(n-1)) Σ_{i≠j} K(X_i - X_j)`.
pub fn cv_value(kernel: &SpectralKernel, spectrum: &EmpiricalSpectrum) -> Result<f64> {
    kernel.grid().ensure_same(spectrum.grid())?;
    let n = spectrum.n();
    require_pairs(n, "the cross-validation criterion")?;
    let nf = n as f64;
    let h = kernel.grid().width();
    let sum: f64 = kernel
        .values()
        .iter()
        .zip(spectrum.power())
        .map(|(&v, &s)| v * v * s / (nf * nf) - 2.0 * v * (s - nf) / (nf * (nf - 1.0)))
        .sum();
    Ok(sum * h / PI)
}

/// Bin averages of `|f^|^2` on `grid`, `(1/h) ∫_bin |f^|^2`.
pub fn model_power(model: &DensityModel, grid: &FrequencyGrid) -> Vec<f64> {
    let h = grid.width();
    (0..grid.bins())
        .map(|k| model.power_integral(grid.edge(k), grid.edge(k + 1)) / h)
        .collect()
}

/// Exact MISE of the estimator with kernel `K` for `n` draws from `model`,
/// `(1/π) Σ_k h [ p_k (1 - v_k)^2 + v_k^2 (1 - p_k) / n ] + tail(W)` with
/// `p_k` the bin average of `|f^|^2`.
pub fn mise_value(kernel: &SpectralKernel, model: &DensityModel, n: usize) -> f64 {
    let grid = kernel.grid();
    let nf = n as f64;
    let sum: f64 = kernel
        .values()
        .iter()
        .zip(model_power(model, grid))
        .map(|(&v, p)| p * (1.0 - v).powi(2) + v * v * (1.0 - p) / nf)
        .sum();
    sum * grid.width() / PI + model.tail_energy(grid.band())
}

/// Integrated squared error `∫ (f~ - f)^2` of one sample. The nodes per bin
/// are chosen so that the phase of `S` turns by at most 1/256 rad between
/// nodes; use [`ise_from_spectrum`] to control the sampling directly.
pub fn ise_value(kernel: &SpectralKernel, sample: &SampleSet, model: &DensityModel) -> Result<f64> {
    let reach = sample.values.iter().fold(0.0f64, |r, x| r.max(x.abs())) + model.length_scale();
    let q = (256.0 * kernel.grid().width() * (1.0 + reach))
        .ceil()
        .clamp(1.0, 4096.0) as usize;
    let spectrum = EmpiricalSpectrum::with_nodes(sample, *kernel.grid(), q)?;
    ise_from_spectrum(kernel, &spectrum, model)
}

/// ISE from a precomputed spectrum, averaging over its nodes in each bin.
pub fn ise_from_spectrum(
    kernel: &SpectralKernel,
    spectrum: &EmpiricalSpectrum,
    model: &DensityModel,
) -> Result<f64> {
    kernel.grid().ensure_same(spectrum.grid())?;
    if spectrum.ecf().is_empty() {
        return Err(Error::InvalidArgument(
            "ISE needs the empirical characteristic function, not only its power".into(),
        ));
    }
    // |v S/n - f^|^2 = v^2 |S|^2/n^2 - 2 v Re(S conj f^)/n + |f^|^2; the last
    // term is integrated exactly, the others at the nodes.
    let q = spectrum.nodes_per_bin();
    let nf = spectrum.n() as f64;
    let grid = kernel.grid();
    let mut sum = 0.0;
    for ((k, &v), p) in kernel
        .values()
        .iter()
        .enumerate()
        .zip(model_power(model, grid))
    {
        let mut cross = 0.0;
        for r in 0..q {
            let i = k * q + r;
            cross += (spectrum.ecf()[i] * model.cf(spectrum.node(i)).conj()).re;
        }
        let s = spectrum.power()[k];
        sum += v * v * s / (nf * nf) - 2.0 * v * cross / (q as f64 * nf) + p;
    }
    Ok(sum * grid.width() / PI + model.tail_energy(grid.band()))
}

/// Kernel estimate `f~(x) = (1/n) Σ_i K(X_i - x)` at every point.
pub fn estimate_density(kernel: &SpectralKernel, sample: &SampleSet, points: &[f64]) -> Vec<f64> {
    let n = sample.len() as f64;
    points
        .par_iter()
        .map(|&x| {
            sample
                .values
                .iter()
                .map(|&xi| kernel.evaluate(xi - x))
                .sum::<f64>()
                / n
        })
        .collect()
}

fn weighted_inverse(
    kernel: &SpectralKernel,
    model: &DensityModel,
    x: f64,
    weight: impl Fn(f64) -> f64,
) -> f64 {
    let grid = kernel.grid();
    // Keep the phase change per panel small enough for one Gauss rule.
    let panel = (4.0 / (1.0 + x.abs())).min(4.0 * model.quadrature_panel());
    let sum: f64 = kernel
        .values()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let integral = quad::composite(grid.edge(k), grid.edge(k + 1), panel, |w| {
                (model.cf(w) * Complex64::from_polar(1.0, -w * x)).re
            });
            integral * weight(v)
        })
        .sum();
    sum / PI
}

/// `(b_K + h_f)(x) = (1/2π) ∫_{|ω|<W} f^(ω) (K^(ω) - 1) e^{-iωx} dω`, the
/// low-frequency part of the bias `f * K - f`.
pub fn low_frequency_bias(kernel: &SpectralKernel, model: &DensityModel, x: f64) -> f64 {
    weighted_inverse(kernel, model, x, |v| v - 1.0)
}

/// `(f * K)(x) = E K(X - x)`.
pub fn smoothed_density(kernel: &SpectralKernel, model: &DensityModel, x: f64) -> f64 {
    weighted_inverse(kernel, model, x, |v| v)
}

/// `E K(X - Y)` for independent `X, Y ~ f`.
pub fn expected_kernel(kernel: &SpectralKernel, model: &DensityModel) -> f64 {
    let grid = kernel.grid();
    let sum: f64 = kernel
        .values()
        .iter()
        .zip(model_power(model, grid))
        .map(|(&v, p)| v * p)
        .sum();
    sum * grid.width() / PI
}

/// Degenerate kernel `U_K(x, y) = K(x-y) - (f*K)(x) - (f*K)(y) + E K(X-Y)`.
pub fn u_statistic(kernel: &SpectralKernel, model: &DensityModel, x: f64, y: f64) -> f64 {
    kernel.evaluate(x - y) - smoothed_density(kernel, model, x) - smoothed_density(kernel, model, y)
        + expected_kernel(kernel, model)
}

/// Risk figures for one kernel. Absent values are omitted from JSON.
#[derive(Debug, Clone, Serialize)]
pub struct RiskReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mise: Option<f64>,
    pub kernel: SpectralKernel,
    pub n: usize,
    /// Energy of `f` outside `[-W, W]`, included in ISE and MISE.
    pub tail_correction: f64,
}

impl RiskReport {
    /// MISE-only report for an analytic model.
    pub fn for_model(kernel: &SpectralKernel, model: &DensityModel, n: usize) -> Self {
        Self {
            cv: None,
            ise: None,
            mise: Some(mise_value(kernel, model, n)),
            kernel: kernel.clone(),
            n,
            tail_correction: model.tail_energy(kernel.grid().band()),
        }
    }

    /// CV for a sample, plus ISE and MISE when the generating model is known.
    pub fn for_sample(
        kernel: &SpectralKernel,
        sample: &SampleSet,
        model: Option<&DensityModel>,
    ) -> Result<Self> {
        let spectrum = EmpiricalSpectrum::new(sample, *kernel.grid())?;
        let cv = cv_value(kernel, &spectrum)?;
        let (ise, mise, tail) = match model {
            Some(m) => (
                Some(ise_from_spectrum(kernel, &spectrum, m)?),
                Some(mise_value(kernel, m, sample.len())),
                m.tail_energy(kernel.grid().band()),
            ),
            None => (None, None, 0.0),
        };
        Ok(Self {
            cv: Some(cv),
            ise,
            mise,
            kernel: kernel.clone(),
            n: sample.len(),
            tail_correction: tail,
        })
    }
}
