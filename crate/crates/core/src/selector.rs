//! Exact minimization of separable quadratic objectives over the monotone
//! kernel class: the CV-optimal kernel, the MISE oracle, minimax kernels and
//! dyadic refinement.
//!
//! Both CV and MISE are sums over bins of `a_k v_k^2 - b_k v_k`, coupled only
//! by the chain `1 = v_0 >= v_1 >= ... >= v_{m-1} >= 0`. Pooling adjacent
//! violators solves the chain constraint exactly. Clipping the pooled
//! solution to `[0, 1]` then solves the box-constrained problem too: clipping
//! keeps the order, and on each pool a convex one-dimensional objective
//! restricted to an interval is minimized at the clipped unconstrained point.
//!
//! `v_0 = 1` is handled by solving the chain over bins `1..m` and letting the
//! upper clip at 1 stand in for the constraint `v_1 <= v_0`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use crate::criteria::{model_power, EmpiricalSpectrum};
use crate::densities::{DensityModel, SampleSet};
use crate::error::{Error, Result};
use crate::spectral::{FrequencyGrid, SpectralKernel};

#[derive(Debug, Clone, Copy)]
struct Block {
    a: f64,
    b: f64,
    len: usize,
}

impl Block {
    // Minimizer of a v^2 - b v; infinite when the quadratic term vanishes.
    fn value(&self) -> f64 {
        if self.a > 0.0 {
            self.b / (2.0 * self.a)
        } else if self.b > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Minimizes `Σ a_k v_k^2 - b_k v_k` over nonincreasing `v` (no bounds).
///
/// Entries for which `free(k)` holds do not influence any pool. They take
/// the value of the nearest constrained entry to the left, the larger of the
/// two values between which they are free to move; leading ones take
/// `leading` or, if that is `None`, the value to their right.
fn pool_adjacent_violators(
    a: &[f64],
    b: &[f64],
    free: impl Fn(usize) -> bool,
    leading: Option<f64>,
) -> Vec<f64> {
    let mut blocks: Vec<Block> = Vec::new();
    let mut active = Vec::new();
    for k in (0..a.len()).filter(|&k| !free(k)) {
        active.push(k);
        let mut block = Block {
            a: a[k],
            b: b[k],
            len: 1,
        };
        while let Some(last) = blocks.last() {
            if last.value() >= block.value() {
                break;
            }
            block.a += last.a;
            block.b += last.b;
            block.len += last.len;
            blocks.pop();
        }
        blocks.push(block);
    }
    let solved: Vec<f64> = blocks
        .iter()
        .flat_map(|block| std::iter::repeat_n(block.value(), block.len))
        .collect();
    let mut out = vec![f64::NAN; a.len()];
    for (&k, &v) in active.iter().zip(&solved) {
        out[k] = v;
    }
    let mut fill = leading.or(solved.first().copied()).unwrap_or(f64::NAN);
    for v in out.iter_mut() {
        if v.is_nan() {
            *v = fill;
        } else {
            fill = *v;
        }
    }
    out
}

/// Weighted least-squares projection of `targets` onto nonincreasing
/// sequences. Zero-weight entries do not affect the pools they sit between.
pub fn antitonic_regression(targets: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if targets.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "{} targets but {} weights",
            targets.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "weight {w} must be finite and non-negative"
        )));
    }
    if let Some(y) = targets.iter().find(|y| !y.is_finite()) {
        return Err(Error::InvalidArgument(format!("target {y} is not finite")));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::InvalidArgument("all weights are zero".into()));
    }
    let b: Vec<f64> = targets
        .iter()
        .zip(weights)
        .map(|(y, w)| 2.0 * w * y)
        .collect();
    Ok(pool_adjacent_violators(
        weights,
        &b,
        |k| weights[k] == 0.0,
        None,
    ))
}

/// `objective(v) = Σ_k (a_k v_k^2 - b_k v_k) h / π + constant` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableObjective {
    pub grid: FrequencyGrid,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub constant: f64,
}

impl SeparableObjective {
    pub fn new(grid: FrequencyGrid, a: Vec<f64>, b: Vec<f64>, constant: f64) -> Result<Self> {
        if a.len() != grid.bins() || b.len() != grid.bins() {
            return Err(Error::InvalidArgument(format!(
                "objective coefficients must have {} entries",
                grid.bins()
            )));
        }
        if let Some(x) = a.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "quadratic weight {x} must be non-negative"
            )));
        }
        if let Some(x) = b.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "linear term {x} is not finite"
            )));
        }
        Ok(Self {
            grid,
            a,
            b,
            constant,
        })
    }

    /// The cross-validation criterion of a spectrum.
    pub fn cross_validation(spectrum: &EmpiricalSpectrum) -> Result<Self> {
        let n = spectrum.n();
        if n < 2 {
            return Err(Error::SampleTooSmall {
                what: "cross-validated kernel selection",
                required: 2,
                actual: n,
            });
        }
        let nf = n as f64;
        let a = spectrum.power().iter().map(|s| s / (nf * nf)).collect();
        let b = spectrum
            .power()
            .iter()
            .map(|s| 2.0 * (s - nf) / (nf * (nf - 1.0)))
            .collect();
        Self::new(*spectrum.grid(), a, b, 0.0)
    }

    /// MISE for `n` draws from `model`.
    pub fn mise(model: &DensityModel, n: usize, grid: FrequencyGrid) -> Result<Self> {
        if n == 0 {
            return Err(Error::SampleTooSmall {
                what: "the oracle kernel",
                required: 1,
                actual: 0,
            });
        }
        let nf = n as f64;
        let power = model_power(model, &grid);
        let a = power.iter().map(|p| p + (1.0 - p) / nf).collect();
        let b = power.iter().map(|p| 2.0 * p).collect();
        let constant =
            power.iter().sum::<f64>() * grid.width() / PI + model.tail_energy(grid.band());
        Self::new(grid, a, b, constant)
    }

    pub fn evaluate(&self, v: &[f64]) -> f64 {
        let sum: f64 = v
            .iter()
            .zip(self.a.iter().zip(&self.b))
            .map(|(v, (a, b))| a * v * v - b * v)
            .sum();
        sum * self.grid.width() / PI + self.constant
    }

    /// Per-bin unconstrained minimizers `b_k / (2 a_k)`.
    pub fn targets(&self) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(&a, &b)| Block { a, b, len: 1 }.value())
            .collect()
    }

    /// Exact minimizer over `1 = v_0 >= v_1 >= ... >= 0`.
    pub fn minimize(&self) -> SpectralKernel {
        let mut values = vec![1.0];
        if self.a.len() > 1 {
            let (a, b) = (&self.a[1..], &self.b[1..]);
            let rest = pool_adjacent_violators(a, b, |k| a[k] == 0.0 && b[k] == 0.0, Some(1.0));
            values.extend(rest.into_iter().map(|v| v.clamp(0.0, 1.0)));
        }
        SpectralKernel::new(self.grid, values).expect("clipped pooled values are admissible")
    }
}

/// `K_0 = argmin CV` over the monotone class on the spectrum's grid.
pub fn cv_optimal_kernel(spectrum: &EmpiricalSpectrum) -> Result<SpectralKernel> {
    Ok(SeparableObjective::cross_validation(spectrum)?.minimize())
}

/// `K* = argmin MISE` over the monotone class on `grid`.
pub fn oracle_kernel(
    model: &DensityModel,
    n: usize,
    grid: FrequencyGrid,
) -> Result<SpectralKernel> {
    Ok(SeparableObjective::mise(model, n, grid)?.minimize())
}

/// `K^_β(ω) = (1 - |ω|^β)_+` sampled at bin midpoints, with `v_0 = 1`.
pub fn minimax_kernel(beta: f64, grid: FrequencyGrid) -> Result<SpectralKernel> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "β = {beta} must be positive"
        )));
    }
    let values = (0..grid.bins())
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                (1.0 - grid.midpoint(k).powf(beta)).max(0.0)
            }
        })
        .collect();
    SpectralKernel::new(grid, values)
}

/// `(2/π) 2^-t`, the CV loss from restricting to jumps on the `2^-t` lattice.
pub fn discretization_gap(t: u32) -> f64 {
    2.0 / PI * 0.5f64.powi(t as i32)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    pub t_max: u32,
    pub eps: f64,
    /// Refinement also stops before the grid would exceed this many bins.
    pub max_bins: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            t_max: 12,
            eps: 1e-4,
            max_bins: 4096,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinementStep {
    pub t: u32,
    pub m: usize,
    pub cv: f64,
    pub guaranteed_gap: f64,
}

/// CV of the optimal kernel at each resolution, in increasing `t`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RefinementTrace {
    pub steps: Vec<RefinementStep>,
}

impl RefinementTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,m,cv,guaranteed_gap\n");
        for s in &self.steps {
            let _ = writeln!(out, "{},{},{},{}", s.t, s.m, s.cv, s.guaranteed_gap);
        }
        out
    }
}

/// Resolution at which [`refine`] stops for band `band`.
pub fn stopping_resolution(band: f64, options: &RefineOptions) -> Result<u32> {
    let start = FrequencyGrid::coarsest_resolution(band).ok_or_else(|| {
        Error::InvalidArgument(format!("band W = {band} is not a dyadic rational"))
    })?;
    let fits = |t: u32| FrequencyGrid::new(band, t).is_ok_and(|g| g.bins() <= options.max_bins);
    if !fits(start) {
        return Err(Error::InvalidArgument(format!(
            "band W = {band} needs more than {} bins even at t = {start}",
            options.max_bins
        )));
    }
    let mut t = start;
    while discretization_gap(t) >= options.eps && t < options.t_max && fits(t + 1) {
        t += 1;
    }
    Ok(t)
}

/// Solves for `K_0` at `t = t_0, t_0 + 1, ...` from the coarsest integral
/// resolution of `band` up to the stopping resolution, returning the finest
/// kernel and the trace.
///
/// The spectrum is computed once at the finest resolution and averaged down,
/// so every level minimizes the same criterion over nested sets and the
/// recorded CV values never increase.
pub fn refine(
    sample: &SampleSet,
    band: f64,
    options: &RefineOptions,
) -> Result<(SpectralKernel, RefinementTrace)> {
    if sample.len() < 2 {
        return Err(Error::SampleTooSmall {
            what: "cross-validated kernel selection",
            required: 2,
            actual: sample.len(),
        });
    }
    let stop = stopping_resolution(band, options)?;
    let mut spectrum = EmpiricalSpectrum::new(sample, FrequencyGrid::new(band, stop)?)?;
    let mut levels = Vec::new();
    loop {
        let kernel = cv_optimal_kernel(&spectrum)?;
        let cv = crate::criteria::cv_value(&kernel, &spectrum)?;
        let t = spectrum.grid().resolution();
        levels.push((
            RefinementStep {
                t,
                m: spectrum.grid().bins(),
                cv,
                guaranteed_gap: discretization_gap(t),
            },
            kernel,
        ));
        match spectrum.coarsen() {
            Some(coarser) if FrequencyGrid::coarsest_resolution(band).is_some_and(|t0| t > t0) => {
                spectrum = coarser
            }
            _ => break,
        }
    }
    levels.reverse();
    let steps = levels.iter().map(|(s, _)| *s).collect();
    let kernel = levels.pop().expect("at least one level").1;
    Ok((kernel, RefinementTrace { steps }))
}
