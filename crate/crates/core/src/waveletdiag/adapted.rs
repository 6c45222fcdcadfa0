//! Basis adapted to the power spectrum of a density.
//!
//! With `F(ω) = ∫_{-ω}^{ω} |f^|^2`, `F_n = F(W)` and breakpoints
//! `b(s,t) = F^{-1}(2^-s t F_n)`, let `I'_st = I(|ω| ∈ [b(s,t-1), b(s,t)))`.
//! Every `I'_st` carries `|f^|^2` mass `2^-s F_n`, and
//!
//! * fathers `φ^'_st = 2^{s/2} F_n^{-1/2} f^ I'_st` for `s = 1..s_n`,
//!   `t = 2^s - 1`, plus `(s_n, 2^{s_n})`;
//! * mothers `ψ^'_st = 2^{s/2} F_n^{-1/2} f^ (I'_{s+1,2t-1} - I'_{s+1,2t})` for
//!   `s = 1..s_n-1, t = 1..2^s-1` and for `s >= s_n, t = 1..2^s`
//!
//! are orthonormal in `L2`. Elements are stored as their step factor `g`,
//! so `e = f^ g`, and inner products carry the weight `|f^|^2`.

use std::f64::consts::PI;

use crate::densities::{DensityModel, PowerProfile};
use crate::error::{Error, Result};
use crate::spectral::SpectralKernel;

use super::{BoundReport, BoundRow, Coefficient, CoefficientSet, Element, ElementKind};

#[derive(Debug, Clone)]
pub struct FAdaptedBasis {
    profile: PowerProfile,
    band: f64,
    depth: u32,
    finest: u32,
    f_n: f64,
    // b(L, j) for j = 0..=2^L, L = finest + 1.
    breakpoints: Vec<f64>,
}

impl FAdaptedBasis {
    /// Basis of depth `s_n` on `[-band, band]`, with mothers up to scale
    /// `finest` (at least `s_n`).
    pub fn new(model: &DensityModel, band: f64, depth: u32, finest: u32) -> Result<Self> {
        if depth < 1 {
            return Err(Error::InvalidArgument(
                "depth s_n must be at least 1".into(),
            ));
        }
        if finest < depth || finest > 24 {
            return Err(Error::InvalidArgument(format!(
                "finest mother scale {finest} must lie in [s_n, 24] with s_n = {depth}"
            )));
        }
        if !(band.is_finite() && band > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "band {band} must be positive"
            )));
        }
        let profile = model.power_profile(band);
        let half = profile.cumulative(band);
        let f_n = 2.0 * half;
        if !(f_n.is_finite() && f_n > 0.0) {
            return Err(Error::DegenerateBreakpoint {
                lower: 0.0,
                upper: band,
            });
        }
        let levels = finest + 1;
        let count = 1usize << levels;
        let mut breakpoints = Vec::with_capacity(count + 1);
        breakpoints.push(0.0);
        let mut lower = 0.0;
        for j in 1..count {
            let target = half * j as f64 / count as f64;
            let b = leftmost_root(&profile, target, lower, band);
            if b <= lower {
                return Err(Error::DegenerateBreakpoint { lower, upper: b });
            }
            breakpoints.push(b);
            lower = b;
        }
        if band <= lower {
            return Err(Error::DegenerateBreakpoint { lower, upper: band });
        }
        breakpoints.push(band);
        Ok(Self {
            profile,
            band,
            depth,
            finest,
            f_n,
            breakpoints,
        })
    }

    /// Default construction: `s_n = ⌈ln n⌉`, mothers up to `s_n + 4`.
    pub fn for_sample_size(model: &DensityModel, band: f64, n: usize) -> Result<Self> {
        let depth = super::log_depth(n).max(1);
        Self::new(model, band, depth, depth + 4)
    }

    pub fn band(&self) -> f64 {
        self.band
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn finest(&self) -> u32 {
        self.finest
    }

    /// `F_n = ∫_{-W}^{W} |f^|^2`.
    pub fn f_n(&self) -> f64 {
        self.f_n
    }

    /// `F(ω)`.
    pub fn big_f(&self, omega: f64) -> f64 {
        2.0 * self.profile.cumulative(omega.min(self.band))
    }

    /// `b(s, t) = F^{-1}(2^-s t F_n)` for `s <= finest + 1`.
    pub fn breakpoint(&self, s: u32, t: u64) -> f64 {
        let shift = self.finest + 1 - s;
        self.breakpoints[(t << shift) as usize]
    }

    fn coefficient_scale(&self, s: u32) -> f64 {
        2f64.powf(0.5 * s as f64) / self.f_n.sqrt()
    }

    pub fn father(&self, s: u32, t: u64) -> Element {
        Element {
            kind: ElementKind::Father,
            s: s as i32,
            t,
            pieces: vec![(
                self.breakpoint(s, t - 1),
                self.breakpoint(s, t),
                self.coefficient_scale(s),
            )],
        }
    }

    pub fn mother(&self, s: u32, t: u64) -> Element {
        let c = self.coefficient_scale(s);
        let lo = self.breakpoint(s + 1, 2 * t - 2);
        let mid = self.breakpoint(s + 1, 2 * t - 1);
        let hi = self.breakpoint(s + 1, 2 * t);
        Element {
            kind: ElementKind::Mother,
            s: s as i32,
            t,
            pieces: vec![(lo, mid, c), (mid, hi, -c)],
        }
    }

    /// `(1, 1), (2, 3), ..., (s_n, 2^{s_n} - 1), (s_n, 2^{s_n})`.
    pub fn fathers(&self) -> Vec<Element> {
        let mut out: Vec<Element> = (1..=self.depth)
            .map(|s| self.father(s, (1u64 << s) - 1))
            .collect();
        out.push(self.father(self.depth, 1u64 << self.depth));
        out
    }

    pub fn mother_row(&self, s: u32) -> Vec<Element> {
        let last = if s < self.depth {
            (1u64 << s) - 1
        } else {
            1u64 << s
        };
        (1..=last).map(|t| self.mother(s, t)).collect()
    }

    pub fn elements(&self) -> Vec<Element> {
        let mut out = self.fathers();
        for s in 1..=self.finest {
            out.extend(self.mother_row(s));
        }
        out
    }

    /// `∫ |f^|^2` over `|ω| ∈ [lo, hi)`.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        2.0 * self.profile.integral(lo, hi)
    }

    /// Weighted Gram matrix `∫ e_i conj(e_j)`.
    pub fn gram(&self, elements: &[Element]) -> Vec<Vec<f64>> {
        let measure = |lo: f64, hi: f64| self.profile.integral(lo, hi);
        elements
            .iter()
            .map(|a| elements.iter().map(|b| a.inner(b, measure)).collect())
            .collect()
    }

    /// Coefficients of `b^_K I_n = f^ (K^ - 1)` on `[-W, W]`.
    pub fn bias_coefficients(&self, kernel: &SpectralKernel) -> Result<CoefficientSet> {
        let bias = BiasPrefix::new(self, kernel)?;
        let coefficient = |e: &Element| Coefficient {
            kind: e.kind,
            s: e.s,
            t: e.t,
            value: 2.0
                * e.pieces
                    .iter()
                    .map(|&(lo, hi, c)| c * (bias.at(hi) - bias.at(lo)))
                    .sum::<f64>(),
        };
        let fathers = self.fathers().iter().map(coefficient).collect();
        let mut mothers = Vec::new();
        for s in 1..=self.finest {
            mothers.extend(self.mother_row(s).iter().map(coefficient));
        }
        Ok(CoefficientSet::new(
            "bias",
            fathers,
            mothers,
            bias.band_energy,
        ))
    }

    /// Checks the row-sum bounds on the bias coefficients:
    ///
    /// * `Σ |α'| <= sqrt(s_n + 1) sqrt(∫ |b^_K|^2)`,
    /// * `Σ_t |β'_st| <= 2 sqrt(∫ |b^_K|^2)` for `s < s_n`,
    /// * `Σ_t |β'_st| <= 2 2^{-s/2} ||f||_2` for `s >= s_n`,
    ///
    /// with `∫ |b^_K|^2` over the whole line, tail included.
    pub fn check_bias_bounds(&self, kernel: &SpectralKernel) -> Result<BoundReport> {
        let coeffs = self.bias_coefficients(kernel)?;
        let model = self.profile.model();
        let total = coeffs.energy + 2.0 * PI * model.tail_energy(self.band);
        let root = total.sqrt();
        let f_norm = model.l2_norm_sq().sqrt();
        let mut rows = vec![BoundRow::new(
            ElementKind::Father,
            None,
            coeffs.father_sum(),
            (self.depth as f64 + 1.0).sqrt() * root,
        )];
        for s in 1..=self.finest {
            let bound = if s < self.depth {
                2.0 * root
            } else {
                2.0 * 0.5f64.powf(0.5 * s as f64) * f_norm
            };
            rows.push(BoundRow::new(
                ElementKind::Mother,
                Some(s as i32),
                coeffs.mother_row_sum(s as i32),
                bound,
            ));
        }
        Ok(BoundReport {
            depth: self.depth,
            rows,
            truncation_residual: coeffs.truncation_residual,
        })
    }
}

/// Smallest `ω` in `[lower, upper]` with `Q(ω) >= target`, to full precision.
fn leftmost_root(profile: &PowerProfile, target: f64, lower: f64, upper: f64) -> f64 {
    let (mut lo, mut hi) = (lower, upper);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return hi;
        }
        if profile.cumulative(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// `R(ω) = ∫_0^ω |f^|^2 (K^ - 1)`, exact given `Q`.
struct BiasPrefix<'a> {
    basis: &'a FAdaptedBasis,
    width: f64,
    kernel_band: f64,
    values: Vec<f64>,
    // R and Q at the kernel's bin edges.
    prefix: Vec<f64>,
    q_edges: Vec<f64>,
    band_energy: f64,
}

impl<'a> BiasPrefix<'a> {
    fn new(basis: &'a FAdaptedBasis, kernel: &SpectralKernel) -> Result<Self> {
        let grid = kernel.grid();
        if grid.band() > basis.band {
            return Err(Error::GridMismatch(format!(
                "kernel band W = {} exceeds the basis band {}",
                grid.band(),
                basis.band
            )));
        }
        let q_edges: Vec<f64> = grid
            .edges()
            .iter()
            .map(|&w| basis.profile.cumulative(w))
            .collect();
        let mut prefix = vec![0.0];
        let mut energy = 0.0;
        for (k, &v) in kernel.values().iter().enumerate() {
            let dq = q_edges[k + 1] - q_edges[k];
            prefix.push(prefix[k] + (v - 1.0) * dq);
            energy += (1.0 - v).powi(2) * dq;
        }
        // K^ vanishes between the kernel band and the basis band.
        energy += basis.profile.integral(grid.band(), basis.band);
        Ok(Self {
            basis,
            width: grid.width(),
            kernel_band: grid.band(),
            values: kernel.values().to_vec(),
            prefix,
            q_edges,
            band_energy: 2.0 * energy,
        })
    }

    fn at(&self, omega: f64) -> f64 {
        let q = self.basis.profile.cumulative(omega);
        let m = self.values.len();
        if omega >= self.kernel_band {
            return self.prefix[m] - (q - self.q_edges[m]);
        }
        let k = ((omega / self.width) as usize).min(m - 1);
        self.prefix[k] + (self.values[k] - 1.0) * (q - self.q_edges[k])
    }
}
