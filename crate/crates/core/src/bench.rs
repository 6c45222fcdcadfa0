//! Seeded Monte Carlo benchmark of the CV-optimal kernel against the
//! monotone oracle.
//!
//! Replication `r` draws its sample from stream `r` of the base seed, so
//! rows do not depend on how many replications run or in which order they
//! finish.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::criteria::{cv_value, ise_from_spectrum, mise_value, EmpiricalSpectrum};
use crate::densities::DensityModel;
use crate::error::{Error, Result};
use crate::selector::{cv_optimal_kernel, oracle_kernel};
use crate::spectral::{FrequencyGrid, SpectralKernel};

pub const BENCH_CSV_HEADER: &str = "replication,n,t,cv,ise,mise_oracle,ratio,cv_oracle,wall_time";

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub model: DensityModel,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub grid: FrequencyGrid,
    /// Record per-replication wall time. Off by default so that reruns are
    /// byte-identical.
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub replication: u64,
    pub n: usize,
    pub t: u32,
    /// Minimized CV, `CV(K_0)`.
    pub cv: f64,
    pub ise: f64,
    pub mise_oracle: f64,
    /// `ISE(K_0) / MISE(K*)`.
    pub ratio: f64,
    /// `CV(K*)` on the same sample, for the unbiasedness residual.
    pub cv_oracle: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

/// Mean and standard error of a Monte Carlo average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
}

impl MeanEstimate {
    pub fn of(values: &[f64]) -> Self {
        let r = values.len() as f64;
        let mean = values.iter().sum::<f64>() / r;
        let se = if values.len() > 1 {
            let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
            (var / r).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSummary {
    pub model: String,
    pub n: usize,
    #[serde(rename = "R")]
    pub replications: usize,
    #[serde(rename = "W")]
    pub band: f64,
    pub t: u32,
    pub seed: u64,
    pub mise_oracle: f64,
    pub mean_ise: f64,
    pub mean_ratio: f64,
    /// Standard error of `mean_ratio`.
    pub se: f64,
    /// `mean CV(K*) + ||f||^2 - MISE(K*)`, zero in expectation.
    pub cv_residual: f64,
    pub cv_residual_se: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub oracle: SpectralKernel,
    pub rows: Vec<BenchRow>,
    pub summary: BenchSummary,
}

impl BenchOutcome {
    pub fn rows_csv(&self) -> String {
        let mut out = format!("{BENCH_CSV_HEADER}\n");
        for r in &self.rows {
            let time = r.wall_time.map(|t| t.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{time}",
                r.replication, r.n, r.t, r.cv, r.ise, r.mise_oracle, r.ratio, r.cv_oracle
            );
        }
        out
    }
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchOutcome> {
    if config.replications < 1 {
        return Err(Error::InvalidArgument(
            "bench needs R ≥ 1 replications".into(),
        ));
    }
    if config.n < 2 {
        return Err(Error::SampleTooSmall {
            what: "the benchmark",
            required: 2,
            actual: config.n,
        });
    }
    let started = Instant::now();
    let model = &config.model;
    let grid = config.grid;
    let oracle = oracle_kernel(model, config.n, grid)?;
    let mise_oracle = mise_value(&oracle, model, config.n);
    let rows = (0..config.replications as u64)
        .into_par_iter()
        .map(|rep| -> Result<BenchRow> {
            let clock = Instant::now();
            let sample = model.sample_stream(config.n, config.seed, rep)?;
            let spectrum = EmpiricalSpectrum::new(&sample, grid)?;
            let k0 = cv_optimal_kernel(&spectrum)?;
            let cv = cv_value(&k0, &spectrum)?;
            let ise = ise_from_spectrum(&k0, &spectrum, model)?;
            let cv_oracle = cv_value(&oracle, &spectrum)?;
            Ok(BenchRow {
                replication: rep,
                n: config.n,
                t: grid.resolution(),
                cv,
                ise,
                mise_oracle,
                ratio: ise / mise_oracle,
                cv_oracle,
                wall_time: config.timing.then(|| clock.elapsed().as_secs_f64()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ise: Vec<f64> = rows.iter().map(|r| r.ise).collect();
    let ratio = MeanEstimate::of(&rows.iter().map(|r| r.ratio).collect::<Vec<_>>());
    let residual = MeanEstimate::of(&rows.iter().map(|r| r.cv_oracle).collect::<Vec<_>>());
    let summary = BenchSummary {
        model: model.to_string(),
        n: config.n,
        replications: config.replications,
        band: grid.band(),
        t: grid.resolution(),
        seed: config.seed,
        mise_oracle,
        mean_ise: MeanEstimate::of(&ise).mean,
        mean_ratio: ratio.mean,
        se: ratio.se,
        cv_residual: residual.mean + model.l2_norm_sq() - mise_oracle,
        cv_residual_se: residual.se,
        wall_time: config.timing.then(|| started.elapsed().as_secs_f64()),
    };
    Ok(BenchOutcome {
        oracle,
        rows,
        summary,
    })
}

/// `CV(K)` over `replications` seeded samples; its mean estimates
/// `MISE(K) - ||f||^2`.
pub fn cv_replicates(
    kernel: &SpectralKernel,
    model: &DensityModel,
    n: usize,
    replications: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..replications as u64)
        .into_par_iter()
        .map(|rep| {
            let sample = model.sample_stream(n, seed, rep)?;
            cv_value(kernel, &EmpiricalSpectrum::new(&sample, *kernel.grid())?)
        })
        .collect()
}
