//! Wavelet diagnostics behind the oracle inequality.
//!
//! Two orthonormal bases of band-limited functions are built in the
//! frequency domain: a Haar-type basis whose supports widen away from the
//! origin ([`haar`]), and a basis adapted to the power spectrum of the
//! density, with equal `|f^|^2` mass on every support ([`adapted`]). The
//! coefficients of a kernel in the first and of its bias in the second obey
//! explicit row-sum bounds, which are checked here, and the empirical
//! processes indexed by the basis elements are compared with their
//! favorable-event thresholds by Monte Carlo ([`favorable`]).
//!
//! Elements are even in `ω`; only their restriction to `[0, ∞)` is stored,
//! as a list of constant pieces. Inner products double the half-line sum.

pub mod adapted;
pub mod favorable;
pub mod haar;

use serde::Serialize;

use crate::spectral::SpectralKernel;

pub use adapted::FAdaptedBasis;
pub use favorable::{favorable_event_frequencies, ExceedanceRow, FavorableReport};
pub use haar::SpectralHaarBasis;

/// Quadrature tolerance added to every bound before flagging a violation.
pub const BOUND_TOLERANCE: f64 = 1e-8;

/// `⌈ln n⌉`, the depth used for both bases.
pub fn log_depth(n: usize) -> u32 {
    (n.max(2) as f64).ln().ceil() as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Father,
    Mother,
}

/// A basis element restricted to `[0, ∞)`: amplitude `amp` on `[lo, hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub kind: ElementKind,
    pub s: i32,
    pub t: u64,
    pub pieces: Vec<(f64, f64, f64)>,
}

impl Element {
    /// `∫ e_1 e_2 w` over the real line, where `measure(lo, hi)` is the
    /// weight of `[lo, hi)`.
    pub fn inner(&self, other: &Element, measure: impl Fn(f64, f64) -> f64) -> f64 {
        let mut sum = 0.0;
        for &(a_lo, a_hi, a) in &self.pieces {
            for &(b_lo, b_hi, b) in &other.pieces {
                let lo = a_lo.max(b_lo);
                let hi = a_hi.min(b_hi);
                if lo < hi {
                    sum += a * b * measure(lo, hi);
                }
            }
        }
        2.0 * sum
    }

    pub fn support(&self) -> (f64, f64) {
        let lo = self
            .pieces
            .iter()
            .map(|p| p.0)
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .pieces
            .iter()
            .map(|p| p.1)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coefficient {
    pub kind: ElementKind,
    pub s: i32,
    pub t: u64,
    pub value: f64,
}

/// Coefficients of one function in one basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSet {
    /// What was decomposed, e.g. `"kernel"` or `"bias"`.
    pub source: String,
    pub fathers: Vec<Coefficient>,
    pub mothers: Vec<Coefficient>,
    /// Squared norm of the decomposed function on the basis band.
    pub energy: f64,
    /// `energy` minus the captured squared coefficients; zero up to rounding
    /// when no scale was truncated.
    pub truncation_residual: f64,
}

impl CoefficientSet {
    fn new(
        source: &str,
        fathers: Vec<Coefficient>,
        mothers: Vec<Coefficient>,
        energy: f64,
    ) -> Self {
        let captured: f64 = fathers
            .iter()
            .chain(&mothers)
            .map(|c| c.value * c.value)
            .sum();
        Self {
            source: source.to_string(),
            fathers,
            mothers,
            energy,
            truncation_residual: energy - captured,
        }
    }

    /// Distinct mother scales, ascending.
    pub fn mother_scales(&self) -> Vec<i32> {
        let mut scales: Vec<i32> = self.mothers.iter().map(|c| c.s).collect();
        scales.sort_unstable();
        scales.dedup();
        scales
    }

    /// `Σ_t |β_st|` for one scale.
    pub fn mother_row_sum(&self, s: i32) -> f64 {
        self.mothers
            .iter()
            .filter(|c| c.s == s)
            .map(|c| c.value.abs())
            .sum()
    }

    pub fn father_sum(&self) -> f64 {
        self.fathers.iter().map(|c| c.value.abs()).sum()
    }
}

/// One checked inequality `value <= bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub kind: ElementKind,
    /// Mother scale; absent for the father row.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<i32>,
    pub value: f64,
    pub bound: f64,
    pub slack: f64,
    pub violated: bool,
}

impl BoundRow {
    fn new(kind: ElementKind, scale: Option<i32>, value: f64, bound: f64) -> Self {
        Self {
            kind,
            scale,
            value,
            bound,
            slack: bound - value,
            violated: value > bound + BOUND_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub depth: u32,
    pub rows: Vec<BoundRow>,
    pub truncation_residual: f64,
}

impl BoundReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.violated).count()
    }
}

/// `∫_0^ω K^` for a step kernel, exact and linear within each bin; constant
/// beyond the band.
pub(crate) struct KernelPrefix {
    width: f64,
    band: f64,
    values: Vec<f64>,
    prefix: Vec<f64>,
}

impl KernelPrefix {
    pub(crate) fn new(kernel: &SpectralKernel) -> Self {
        let width = kernel.grid().width();
        let values = kernel.values().to_vec();
        let mut prefix = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for &v in &values {
            acc += v * width;
            prefix.push(acc);
        }
        Self {
            width,
            band: kernel.grid().band(),
            values,
            prefix,
        }
    }

    pub(crate) fn at(&self, omega: f64) -> f64 {
        if omega >= self.band {
            return self.prefix[self.values.len()];
        }
        let k = ((omega / self.width) as usize).min(self.values.len() - 1);
        self.prefix[k] + self.values[k] * (omega - k as f64 * self.width)
    }
}
