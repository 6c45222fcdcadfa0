//! Haar-type basis of even step functions on `[-B, B]`, `B = 2^{d+1}`.
//!
//! With `I_st = I(|ω| ∈ [2^-s (t-1), 2^-s t))`:
//!
//! * fathers `φ^_st = 2^{(s-1)/2} I_st` for `(0,1), (0,2), (-1,2), ..., (-d,2)`,
//!   covering `[0,1), [1,2), [2,4), ..., [2^d, 2^{d+1})`;
//! * mothers `ψ^_st = 2^{(s-1)/2} (I_{s+1,2t-1} - I_{s+1,2t})` for
//!   `s = -1..-d, t = 2..2^s B` and for `s >= 0, t = 1..2^s B`.
//!
//! A step function on a grid of resolution `t_K` has no mother coefficients
//! at scales `s >= t_K`, so truncating there is lossless.

use crate::error::{Error, Result};
use crate::spectral::{FrequencyGrid, SpectralKernel};

use super::{
    BoundReport, BoundRow, Coefficient, CoefficientSet, Element, ElementKind, KernelPrefix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectralHaarBasis {
    depth: u32,
}

fn scale_width(s: i32) -> f64 {
    0.5f64.powi(s)
}

fn amplitude(s: i32) -> f64 {
    2f64.powf(0.5 * (s - 1) as f64)
}

impl SpectralHaarBasis {
    pub fn new(depth: u32) -> Result<Self> {
        if depth > 40 {
            return Err(Error::InvalidArgument(format!(
                "depth d = {depth} is too large"
            )));
        }
        Ok(Self { depth })
    }

    /// Basis with depth `⌈ln n⌉`.
    pub fn for_sample_size(n: usize) -> Self {
        Self {
            depth: super::log_depth(n),
        }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Band `B = 2^{d+1}` covered by the fathers.
    pub fn band(&self) -> f64 {
        2f64.powi(self.depth as i32 + 1)
    }

    pub fn father(&self, s: i32, t: u64) -> Element {
        let w = scale_width(s);
        Element {
            kind: ElementKind::Father,
            s,
            t,
            pieces: vec![(w * (t - 1) as f64, w * t as f64, amplitude(s))],
        }
    }

    pub fn mother(&self, s: i32, t: u64) -> Element {
        let w = scale_width(s);
        let lo = w * (t - 1) as f64;
        let mid = lo + 0.5 * w;
        let a = amplitude(s);
        Element {
            kind: ElementKind::Mother,
            s,
            t,
            pieces: vec![(lo, mid, a), (mid, lo + w, -a)],
        }
    }

    /// The `d + 2` fathers in order `(0,1), (0,2), (-1,2), ..., (-d,2)`.
    pub fn fathers(&self) -> Vec<Element> {
        let mut out = vec![self.father(0, 1)];
        out.extend((0..=self.depth as i32).map(|u| self.father(-u, 2)));
        out
    }

    /// Number of mother elements at scale `s`.
    pub fn mothers_at(&self, s: i32) -> u64 {
        let count = (self.band() / scale_width(s)) as u64;
        if s < 0 {
            count.saturating_sub(1)
        } else {
            count
        }
    }

    /// Mothers at scale `s`, in increasing `t`.
    pub fn mother_row(&self, s: i32) -> Vec<Element> {
        let first = if s < 0 { 2 } else { 1 };
        let last = (self.band() / scale_width(s)) as u64;
        (first..=last).map(|t| self.mother(s, t)).collect()
    }

    /// Mother scales in order `-1, ..., -d, 0, 1, ..., finest - 1`.
    pub fn mother_scales(&self, finest: u32) -> Vec<i32> {
        (1..=self.depth as i32)
            .map(|u| -u)
            .chain(0..finest as i32)
            .collect()
    }

    /// Fathers followed by all mothers with `s < finest`.
    pub fn elements(&self, finest: u32) -> Vec<Element> {
        let mut out = self.fathers();
        for s in self.mother_scales(finest) {
            out.extend(self.mother_row(s));
        }
        out
    }

    fn check_band(&self, grid: &FrequencyGrid) -> Result<()> {
        if grid.band() > self.band() {
            return Err(Error::GridMismatch(format!(
                "kernel band W = {} exceeds the basis band {} of depth d = {}",
                grid.band(),
                self.band(),
                self.depth
            )));
        }
        Ok(())
    }

    /// Exact coefficients `∫ φ^ K^` and `∫ ψ^ K^` for all fathers and for the
    /// mothers below the kernel's resolution.
    pub fn coefficients(&self, kernel: &SpectralKernel) -> Result<CoefficientSet> {
        self.check_band(kernel.grid())?;
        let prefix = KernelPrefix::new(kernel);
        let coefficient = |e: &Element| Coefficient {
            kind: e.kind,
            s: e.s,
            t: e.t,
            value: 2.0
                * e.pieces
                    .iter()
                    .map(|&(lo, hi, a)| a * (prefix.at(hi) - prefix.at(lo)))
                    .sum::<f64>(),
        };
        let fathers = self.fathers().iter().map(coefficient).collect();
        let mut mothers = Vec::new();
        for s in self.mother_scales(kernel.grid().resolution()) {
            mothers.extend(self.mother_row(s).iter().map(coefficient));
        }
        let energy = 2.0 * std::f64::consts::PI * kernel.l2_norm_sq();
        Ok(CoefficientSet::new("kernel", fathers, mothers, energy))
    }

    /// Checks the three row-sum bounds on the kernel coefficients:
    ///
    /// * `Σ |α| <= sqrt(d + 2) sqrt(∫ K^2)`,
    /// * `Σ_t |β_st| <= sqrt(∫ K^2)` for each `s < 0`,
    /// * `Σ_t |β_st| <= 2^{(1-s)/2}` for each `s >= 0`,
    ///
    /// where `∫ K^2` means `∫ K^(ω)^2 dω = 2π ||K||_2^2`.
    pub fn check_kernel_bounds(&self, kernel: &SpectralKernel) -> Result<BoundReport> {
        let coeffs = self.coefficients(kernel)?;
        let root = coeffs.energy.sqrt();
        let mut rows = vec![BoundRow::new(
            ElementKind::Father,
            None,
            coeffs.father_sum(),
            (self.depth as f64 + 2.0).sqrt() * root,
        )];
        for s in self.mother_scales(kernel.grid().resolution()) {
            let bound = if s < 0 {
                root
            } else {
                2f64.powf(0.5 * (1 - s) as f64)
            };
            rows.push(BoundRow::new(
                ElementKind::Mother,
                Some(s),
                coeffs.mother_row_sum(s),
                bound,
            ));
        }
        Ok(BoundReport {
            depth: self.depth,
            rows,
            truncation_residual: coeffs.truncation_residual,
        })
    }

    /// Exact Gram matrix in `L2(R)`.
    pub fn gram(elements: &[Element]) -> Vec<Vec<f64>> {
        elements
            .iter()
            .map(|a| {
                elements
                    .iter()
                    .map(|b| a.inner(b, |lo, hi| hi - lo))
                    .collect()
            })
            .collect()
    }

    /// Gram matrix of the elements sampled on `grid`, which must resolve
    /// every piece boundary.
    pub fn gram_on_grid(elements: &[Element], grid: &FrequencyGrid) -> Result<Vec<Vec<f64>>> {
        let sampled = elements
            .iter()
            .map(|e| sample_on_grid(e, grid))
            .collect::<Result<Vec<_>>>()?;
        let h = grid.width();
        Ok(sampled
            .iter()
            .map(|a| {
                sampled
                    .iter()
                    .map(|b| 2.0 * h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
                    .collect()
            })
            .collect())
    }

    /// `Σ α φ^ + Σ β ψ^` at the bins of `grid`, using only mothers with
    /// `s < finest`.
    pub fn reconstruct(
        &self,
        coeffs: &CoefficientSet,
        grid: &FrequencyGrid,
        finest: i32,
    ) -> Result<Vec<f64>> {
        let mut out = vec![0.0; grid.bins()];
        let terms = coeffs
            .fathers
            .iter()
            .map(|c| (c, self.father(c.s, c.t)))
            .chain(
                coeffs
                    .mothers
                    .iter()
                    .filter(|c| c.s < finest)
                    .map(|c| (c, self.mother(c.s, c.t))),
            );
        for (c, e) in terms {
            for (k, x) in sample_on_grid(&e, grid)?.into_iter().enumerate() {
                out[k] += c.value * x;
            }
        }
        Ok(out)
    }
}

fn sample_on_grid(e: &Element, grid: &FrequencyGrid) -> Result<Vec<f64>> {
    let h = grid.width();
    let mut out = vec![0.0; grid.bins()];
    let too_coarse = || Error::ResolutionTooCoarse {
        grid_resolution: grid.resolution(),
        scale: e.s,
    };
    for &(lo, hi, amp) in &e.pieces {
        let (a, b) = (lo / h, hi / h);
        if a.fract() != 0.0 || b.fract() != 0.0 {
            return Err(too_coarse());
        }
        let (a, b) = (a as usize, (b as usize).min(grid.bins()));
        for x in out.iter_mut().take(b).skip(a) {
            *x = amp;
        }
    }
    Ok(out)
}
