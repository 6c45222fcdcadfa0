//! Monte Carlo exceedance frequencies of the favorable-event thresholds.
//!
//! For a fixed probe set of basis elements (all fathers, mothers with
//! `s <= 3`) each replication computes
//!
//! * the centered U-statistic `(1/(n(n-1))) Σ_{i≠j} U_φ(X_i, X_j)` for the
//!   Haar-type elements, and
//! * the centered partial sum `(1/n) Σ_j φ'(X_j) - E φ'(X)` for the
//!   density-adapted elements,
//!
//! both in the frequency domain from the empirical characteristic function
//! `S`. With `D = (|S|^2 - n)/(n(n-1)) - 2 Re(f^ conj S)/n + |f^|^2`,
//! the U-statistic is `(1/π) ∫_0^∞ φ^ D`, and the partial sum is
//! `(1/π) ∫_0^∞ g Re[f^ conj(S/n - f^)]` for `φ^' = f^ g`.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::criteria::EmpiricalSpectrum;
use crate::densities::DensityModel;
use crate::error::{Error, Result};
use crate::spectral::FrequencyGrid;

use super::{Element, ElementKind, FAdaptedBasis, SpectralHaarBasis};

/// Mothers up to this scale are probed.
pub const PROBE_MAX_SCALE: i32 = 3;

// Spectrum grid: resolution 4 resolves every probed Haar piece, and 8
// nodes per bin give a node spacing of 2^-7.
const NODE_RESOLUTION: u32 = 4;
const NODES_PER_BIN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    UStatistic,
    PartialSum,
}

#[derive(Debug, Clone)]
struct Probe {
    event: EventKind,
    element: Element,
}

/// Per-replication statistics of every probe; thresholds are applied later
/// so that several `λ` can share one simulation.
#[derive(Debug, Clone)]
pub struct FavorableStatistics {
    n: usize,
    replications: usize,
    seed: u64,
    haar_depth: u32,
    adapted_depth: u32,
    probes: Vec<Probe>,
    // values[r][p]
    values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceedanceRow {
    pub event: EventKind,
    pub kind: ElementKind,
    pub s: i32,
    pub t: u64,
    pub threshold: f64,
    pub exceedances: usize,
    pub frequency: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FavorableReport {
    pub n: usize,
    pub lambda: f64,
    pub replications: usize,
    pub seed: u64,
    pub d_n: u32,
    pub s_n: u32,
    /// `λ ln^{3/2} n / n`, for fathers and coarse (`s < 0`) mothers.
    pub u_statistic_threshold: f64,
    /// `λ ln n / √n`, for fathers and mothers with `s < s_n`.
    pub partial_sum_threshold: f64,
    pub probes: usize,
    pub probes_exceeded: usize,
    pub max_frequency: f64,
    pub rows: Vec<ExceedanceRow>,
}

impl FavorableReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("event,kind,s,t,threshold,exceedances,frequency,max_abs\n");
        for r in &self.rows {
            let event = match r.event {
                EventKind::UStatistic => "u_statistic",
                EventKind::PartialSum => "partial_sum",
            };
            let kind = match r.kind {
                ElementKind::Father => "father",
                ElementKind::Mother => "mother",
            };
            let _ = writeln!(
                out,
                "{event},{kind},{},{},{},{},{},{}",
                r.s, r.t, r.threshold, r.exceedances, r.frequency, r.max_abs
            );
        }
        out
    }
}

/// Linear-in-node prefix integral of a function sampled at node centers
/// `δ (i + 1/2)`, each standing for `[δ i, δ (i+1))`.
struct NodePrefix {
    delta: f64,
    values: Vec<f64>,
    prefix: Vec<f64>,
}

impl NodePrefix {
    fn new(delta: f64, values: Vec<f64>) -> Self {
        let mut prefix = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for &v in &values {
            acc += v * delta;
            prefix.push(acc);
        }
        Self {
            delta,
            values,
            prefix,
        }
    }

    fn at(&self, omega: f64) -> f64 {
        let m = self.values.len();
        let x = omega / self.delta;
        if x >= m as f64 {
            return self.prefix[m];
        }
        let i = x as usize;
        self.prefix[i] + self.values[i] * (omega - i as f64 * self.delta)
    }

    fn integrate(&self, e: &Element) -> f64 {
        e.pieces
            .iter()
            .map(|&(lo, hi, a)| a * (self.at(hi) - self.at(lo)))
            .sum::<f64>()
            / std::f64::consts::PI
    }
}

impl FavorableStatistics {
    pub fn simulate(
        model: &DensityModel,
        n: usize,
        replications: usize,
        seed: u64,
    ) -> Result<Self> {
        if replications == 0 {
            return Err(Error::InvalidArgument(
                "at least one replication is required".into(),
            ));
        }
        if n < 2 {
            return Err(Error::SampleTooSmall {
                what: "the favorable-event check",
                required: 2,
                actual: n,
            });
        }
        let haar = SpectralHaarBasis::for_sample_size(n);
        let band = haar.band();
        let adapted = FAdaptedBasis::for_sample_size(model, band, n)?;
        let mut probes: Vec<Probe> = Vec::new();
        let haar_elements = haar.fathers().into_iter().chain(
            haar.mother_scales((PROBE_MAX_SCALE + 1) as u32)
                .into_iter()
                .flat_map(|s| haar.mother_row(s)),
        );
        probes.extend(haar_elements.map(|element| Probe {
            event: EventKind::UStatistic,
            element,
        }));
        let adapted_elements = adapted
            .fathers()
            .into_iter()
            .chain((1..=PROBE_MAX_SCALE as u32).flat_map(|s| adapted.mother_row(s)));
        probes.extend(adapted_elements.map(|element| Probe {
            event: EventKind::PartialSum,
            element,
        }));

        let grid = FrequencyGrid::new(band, NODE_RESOLUTION)?;
        let delta = grid.width() / NODES_PER_BIN as f64;
        let cf: Vec<Complex64> = (0..grid.bins() * NODES_PER_BIN)
            .map(|i| model.cf(delta * (i as f64 + 0.5)))
            .collect();
        let nf = n as f64;
        let values = (0..replications as u64)
            .into_par_iter()
            .map(|rep| -> Result<Vec<f64>> {
                let sample = model.sample_stream(n, seed, rep)?;
                let spectrum = EmpiricalSpectrum::with_nodes(&sample, grid, NODES_PER_BIN)?;
                let (d, h): (Vec<f64>, Vec<f64>) = spectrum
                    .ecf()
                    .iter()
                    .zip(&cf)
                    .map(|(s, f)| {
                        let cross = (f * s.conj()).re;
                        let d = (s.norm_sqr() - nf) / (nf * (nf - 1.0)) - 2.0 * cross / nf
                            + f.norm_sqr();
                        let h = cross / nf - f.norm_sqr();
                        (d, h)
                    })
                    .unzip();
                let d = NodePrefix::new(delta, d);
                let h = NodePrefix::new(delta, h);
                Ok(probes
                    .iter()
                    .map(|p| match p.event {
                        EventKind::UStatistic => d.integrate(&p.element),
                        EventKind::PartialSum => h.integrate(&p.element),
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            replications,
            seed,
            haar_depth: haar.depth(),
            adapted_depth: adapted.depth(),
            probes,
            values,
        })
    }

    fn threshold(&self, probe: &Probe, lambda: f64) -> f64 {
        let nf = self.n as f64;
        let ln = nf.ln();
        let s = probe.element.s;
        let is_mother = probe.element.kind == ElementKind::Mother;
        match probe.event {
            EventKind::UStatistic if is_mother && s >= 0 => (lambda * ln + s as f64) / nf,
            EventKind::UStatistic => lambda * ln.powf(1.5) / nf,
            EventKind::PartialSum if is_mother && s >= self.adapted_depth as i32 => {
                (lambda * ln + s as f64) / nf.sqrt()
            }
            EventKind::PartialSum => lambda * ln / nf.sqrt(),
        }
    }

    pub fn report(&self, lambda: f64) -> FavorableReport {
        let rows: Vec<ExceedanceRow> = self
            .probes
            .iter()
            .enumerate()
            .map(|(p, probe)| {
                let threshold = self.threshold(probe, lambda);
                let (mut exceedances, mut max_abs) = (0, 0.0f64);
                for rep in &self.values {
                    let x = rep[p].abs();
                    max_abs = max_abs.max(x);
                    if x > threshold {
                        exceedances += 1;
                    }
                }
                ExceedanceRow {
                    event: probe.event,
                    kind: probe.element.kind,
                    s: probe.element.s,
                    t: probe.element.t,
                    threshold,
                    exceedances,
                    frequency: exceedances as f64 / self.replications as f64,
                    max_abs,
                }
            })
            .collect();
        let nf = self.n as f64;
        FavorableReport {
            n: self.n,
            lambda,
            replications: self.replications,
            seed: self.seed,
            d_n: self.haar_depth,
            s_n: self.adapted_depth,
            u_statistic_threshold: lambda * nf.ln().powf(1.5) / nf,
            partial_sum_threshold: lambda * nf.ln() / nf.sqrt(),
            probes: rows.len(),
            probes_exceeded: rows.iter().filter(|r| r.exceedances > 0).count(),
            max_frequency: rows.iter().map(|r| r.frequency).fold(0.0, f64::max),
            rows,
        }
    }
}

/// Simulates `replications` samples of size `n` and reports how often each
/// probe statistic exceeds its threshold at level `λ`.
pub fn favorable_event_frequencies(
    model: &DensityModel,
    n: usize,
    lambda: f64,
    replications: usize,
    seed: u64,
) -> Result<FavorableReport> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "λ = {lambda} must be positive"
        )));
    }
    Ok(FavorableStatistics::simulate(model, n, replications, seed)?.report(lambda))
}
