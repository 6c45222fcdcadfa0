//! Independent space-domain and brute-force oracles shared by the
//! integration tests. Nothing here goes through the frequency-domain
//! formulas under test.

#![allow(dead_code)]

use std::f64::consts::PI;

use monoracle::densities::{Component, Family};
use monoracle::quad;
use monoracle::{DensityModel, FrequencyGrid, SampleSet, SpectralKernel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Objective = Box<dyn Fn(&[f64]) -> f64>;

/// `(ω_j, J_j)`: the downward jumps of `K^` at the interior edges and at `W`.
pub fn jumps(kernel: &SpectralKernel) -> Vec<(f64, f64)> {
    let v = kernel.values();
    let grid = kernel.grid();
    (1..=v.len())
        .map(|j| {
            let next = if j < v.len() { v[j] } else { 0.0 };
            (grid.edge(j), v[j - 1] - next)
        })
        .collect()
}

/// `K(x) = (1/π) ∫_0^W K^(ω) cos(ωx) dω` by quadrature on each bin.
pub fn kernel_by_cosine_integral(kernel: &SpectralKernel, x: f64) -> f64 {
    let grid = kernel.grid();
    let panel = 1.0 / (1.0 + x.abs());
    kernel
        .values()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            v * quad::composite(grid.edge(k), grid.edge(k + 1), panel, |w| (w * x).cos())
        })
        .sum::<f64>()
        / PI
}

fn panel_for(band: f64) -> f64 {
    (1.0 / band).min(0.25)
}

// Half-width of the space window for slowly decaying integrands.
const WINDOW: f64 = 800.0;

/// `∫ K(x)^2 dx` over `[-L, L]` by quadrature plus the averaged `1/x^2`
/// tail `Σ J^2 / (π^2 L)`.
pub fn space_l2(kernel: &SpectralKernel) -> f64 {
    let band = kernel.grid().band();
    let body = 2.0 * quad::composite(0.0, WINDOW, panel_for(band), |x| kernel.evaluate(x).powi(2));
    let tail: f64 = jumps(kernel).iter().map(|(_, j)| j * j).sum::<f64>() / (PI * PI * WINDOW);
    body + tail
}

pub fn estimate(kernel: &SpectralKernel, sample: &SampleSet, x: f64) -> f64 {
    sample
        .values
        .iter()
        .map(|&xi| kernel.evaluate(xi - x))
        .sum::<f64>()
        / sample.len() as f64
}

fn center(sample: &SampleSet) -> f64 {
    sample.values.iter().sum::<f64>() / sample.len() as f64
}

/// `∫ f~^2` by space quadrature around the sample, plus the tail
/// `Σ_j J_j^2 |φ(ω_j)|^2 / (π^2 L)` with `φ` the empirical characteristic
/// function.
pub fn space_estimate_sq(kernel: &SpectralKernel, sample: &SampleSet) -> f64 {
    let c = center(sample);
    let band = kernel.grid().band();
    let body = quad::composite(c - WINDOW, c + WINDOW, panel_for(band), |x| {
        estimate(kernel, sample, x).powi(2)
    });
    let n = sample.len() as f64;
    let tail: f64 = jumps(kernel)
        .iter()
        .map(|&(w, j)| {
            let (re, im) = sample.values.iter().fold((0.0, 0.0), |(re, im), &x| {
                (re + (w * x).cos(), im + (w * x).sin())
            });
            j * j * (re * re + im * im) / (n * n)
        })
        .sum::<f64>()
        / (PI * PI * WINDOW);
    body + tail
}

/// Least-squares CV straight from its definition,
/// `∫ f~^2 - 2/(n(n-1)) Σ_{i≠j} K(X_i - X_j)`.
pub fn space_cv(kernel: &SpectralKernel, sample: &SampleSet) -> f64 {
    let xs = &sample.values;
    let n = xs.len() as f64;
    let mut pairs = 0.0;
    for (i, &a) in xs.iter().enumerate() {
        for (j, &b) in xs.iter().enumerate() {
            if i != j {
                pairs += kernel.evaluate(a - b);
            }
        }
    }
    space_estimate_sq(kernel, sample) - 2.0 * pairs / (n * (n - 1.0))
}

fn families(model: &DensityModel) -> Vec<Component> {
    match model {
        DensityModel::Single(f) => vec![Component {
            weight: 1.0,
            family: *f,
        }],
        DensityModel::Mixture(parts) => parts.clone(),
    }
}

fn location_and_spread(f: &Family) -> (f64, f64) {
    match *f {
        Family::Gaussian { mean, sd } => (mean, sd),
        Family::Laplace { location, scale } => (location, scale),
        Family::Cauchy { .. } | Family::Uniform { .. } => {
            panic!("oracle supports Gaussian and Laplace components only")
        }
    }
}

/// Integrates `g` against a density-like weight concentrated around the
/// given (location, spread) pairs, splitting at every location.
fn integrate_around(centers: &[(f64, f64)], panel: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
    let lo = centers
        .iter()
        .map(|(m, s)| m - 45.0 * s)
        .fold(f64::INFINITY, f64::min);
    let hi = centers
        .iter()
        .map(|(m, s)| m + 45.0 * s)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut cuts: Vec<f64> = centers.iter().map(|c| c.0).collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .map(|p| quad::composite(p[0], p[1], panel, &mut g))
        .sum()
}

fn model_centers(model: &DensityModel) -> Vec<(f64, f64)> {
    families(model)
        .iter()
        .map(|c| location_and_spread(&c.family))
        .collect()
}

/// Integrated squared error by space quadrature:
/// `∫ f~^2 - 2 ∫ f~ f + ||f||^2`.
pub fn space_ise(kernel: &SpectralKernel, sample: &SampleSet, model: &DensityModel) -> f64 {
    let panel = panel_for(kernel.grid().band()).min(0.05);
    let cross = integrate_around(&model_centers(model), panel, |x| {
        estimate(kernel, sample, x) * model.pdf(x)
    });
    let norm = integrate_around(&model_centers(model), panel, |x| model.pdf(x).powi(2));
    space_estimate_sq(kernel, sample) - 2.0 * cross + norm
}

/// `(f * K)(x) = ∫ K(x - z) f(z) dz`.
pub fn smoothed_direct(kernel: &SpectralKernel, model: &DensityModel, x: f64) -> f64 {
    let panel = panel_for(kernel.grid().band()).min(0.05);
    integrate_around(&model_centers(model), panel, |z| {
        kernel.evaluate(x - z) * model.pdf(z)
    })
}

/// Density of `X - Y` for independent `X, Y ~ f`, for mixtures of Gaussians
/// or a single Laplace law.
fn difference_density(model: &DensityModel) -> (Vec<(f64, f64)>, impl Fn(f64) -> f64) {
    let parts = families(model);
    let mut terms = Vec::new();
    for a in &parts {
        for b in &parts {
            terms.push((a.weight * b.weight, a.family, b.family));
        }
    }
    let centers = terms
        .iter()
        .map(|(_, a, b)| {
            let (ma, sa) = location_and_spread(a);
            let (mb, sb) = location_and_spread(b);
            (ma - mb, sa.max(sb) * 2.0)
        })
        .collect();
    let density = move |u: f64| {
        terms
            .iter()
            .map(|&(w, a, b)| {
                w * match (a, b) {
                    (
                        Family::Gaussian { mean: m1, sd: s1 },
                        Family::Gaussian { mean: m2, sd: s2 },
                    ) => {
                        let var = s1 * s1 + s2 * s2;
                        (-(u - m1 + m2).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
                    }
                    (
                        Family::Laplace {
                            location: m1,
                            scale: b1,
                        },
                        Family::Laplace {
                            location: m2,
                            scale: b2,
                        },
                    ) if b1 == b2 => {
                        let r = (u - m1 + m2).abs() / b1;
                        (1.0 + r) * (-r).exp() / (4.0 * b1)
                    }
                    _ => panic!("difference density not available for this pair"),
                }
            })
            .sum::<f64>()
    };
    (centers, density)
}

/// `E K(X - Y) = ∫ K(u) g(u) du` with `g` the density of `X - Y`.
pub fn expected_kernel_direct(kernel: &SpectralKernel, model: &DensityModel) -> f64 {
    let (centers, g) = difference_density(model);
    let panel = panel_for(kernel.grid().band()).min(0.05);
    integrate_around(&centers, panel, |u| kernel.evaluate(u) * g(u))
}

pub fn u_direct(kernel: &SpectralKernel, model: &DensityModel, x: f64, y: f64) -> f64 {
    kernel.evaluate(x - y) - smoothed_direct(kernel, model, x) - smoothed_direct(kernel, model, y)
        + expected_kernel_direct(kernel, model)
}

/// Minimum of `objective` over `{1 = v_0 >= v_1 >= ... >= v_{m-1} >= 0}`
/// by exhaustive search on the 1/64 lattice, followed by an exhaustive
/// search on the 1/4096 lattice within two coarse steps of the coarse
/// minimizer.
pub fn lattice_minimize(m: usize, objective: impl Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let coarse: i64 = 64;
    let (best, v) = search(&vec![(0, coarse); m], coarse, &objective);
    let fine: i64 = 4096;
    let ratio = fine / coarse;
    let ranges: Vec<(i64, i64)> = v
        .iter()
        .map(|&x| {
            let c = (x * coarse as f64).round() as i64 * ratio;
            ((c - 2 * ratio).max(0), (c + 2 * ratio).min(fine))
        })
        .collect();
    let (fine_best, fine_v) = search(&ranges, fine, &objective);
    if fine_best <= best {
        (fine_best, fine_v)
    } else {
        (best, v)
    }
}

fn search(
    ranges: &[(i64, i64)],
    scale: i64,
    objective: &impl Fn(&[f64]) -> f64,
) -> (f64, Vec<f64>) {
    let m = ranges.len();
    let mut v = vec![1.0; m];
    let mut best = (f64::INFINITY, v.clone());
    fn recurse(
        i: usize,
        upper: i64,
        ranges: &[(i64, i64)],
        scale: i64,
        v: &mut Vec<f64>,
        objective: &impl Fn(&[f64]) -> f64,
        best: &mut (f64, Vec<f64>),
    ) {
        if i == v.len() {
            let value = objective(v);
            if value < best.0 {
                *best = (value, v.clone());
            }
            return;
        }
        let (lo, hi) = ranges[i];
        for k in lo..=hi.min(upper) {
            v[i] = k as f64 / scale as f64;
            recurse(i + 1, k, ranges, scale, v, objective, best);
        }
    }
    if m > 0 {
        recurse(1, scale, ranges, scale, &mut v, objective, &mut best);
    }
    best
}

/// Random admissible values: `v_0 = 1`, then a nonincreasing sequence with
/// occasional plateaus and a zero tail.
pub fn random_monotone(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(m);
    let mut current: f64 = 1.0;
    v.push(current);
    for _ in 1..m {
        match rng.random_range(0..4) {
            0 => {}
            1 => current = 0.0,
            _ => current *= rng.random::<f64>(),
        }
        v.push(current);
    }
    v
}

pub fn random_kernel(rng: &mut ChaCha8Rng, grid: FrequencyGrid) -> SpectralKernel {
    SpectralKernel::new(grid, random_monotone(rng, grid.bins())).unwrap()
}

/// Gaussian, Laplace or two-component Gaussian mixture with random
/// parameters.
pub fn random_model(rng: &mut ChaCha8Rng) -> DensityModel {
    match rng.random_range(0..3) {
        0 => {
            DensityModel::gaussian(rng.random_range(-1.0..1.0), rng.random_range(0.5..2.0)).unwrap()
        }
        1 => {
            DensityModel::laplace(rng.random_range(-1.0..1.0), rng.random_range(0.5..2.0)).unwrap()
        }
        _ => {
            let w = rng.random_range(0.2..0.8);
            DensityModel::mixture(vec![
                (
                    w,
                    DensityModel::gaussian(
                        rng.random_range(-3.0..-1.0),
                        rng.random_range(0.5..1.5),
                    )
                    .unwrap(),
                ),
                (
                    1.0 - w,
                    DensityModel::gaussian(rng.random_range(1.0..3.0), rng.random_range(0.5..1.5))
                        .unwrap(),
                ),
            ])
            .unwrap()
        }
    }
}

/// The density roster used by property sweeps.
pub fn roster() -> Vec<(&'static str, DensityModel)> {
    vec![
        ("gaussian", DensityModel::gaussian(0.0, 1.0).unwrap()),
        ("laplace", DensityModel::laplace(0.0, 1.0).unwrap()),
        (
            "mixture",
            DensityModel::mixture(vec![
                (0.5, DensityModel::gaussian(-2.0, 1.0).unwrap()),
                (0.5, DensityModel::gaussian(2.0, 1.0).unwrap()),
            ])
            .unwrap(),
        ),
    ]
}

/// Mean and standard error.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

/// A random CV or MISE instance on `m <= 4` bins, solved both by the
/// library and by lattice search. Returns `(solver, lattice)` objective
/// values, each computed by a formula written out here.
pub fn solver_vs_lattice(rng: &mut ChaCha8Rng, oracle: bool) -> (f64, f64) {
    use monoracle::selector::{cv_optimal_kernel, oracle_kernel};
    use monoracle::EmpiricalSpectrum;
    let m = rng.random_range(1..=4usize);
    let t = rng.random_range(0..=2u32);
    let grid = FrequencyGrid::new(m as f64 / (1u32 << t) as f64, t).unwrap();
    let h = grid.width();
    let model = random_model(rng);
    let n = rng.random_range(2..40usize);
    let nf = n as f64;
    let (kernel, objective): (SpectralKernel, Objective) = if oracle {
        let p: Vec<f64> = (0..m)
            .map(|k| quad::adaptive(grid.edge(k), grid.edge(k + 1), 1e-15, |w| model.power(w)) / h)
            .collect();
        let tail = quad::adaptive(grid.band(), grid.band() + 60.0, 1e-15, |w| model.power(w)) / PI;
        let objective = move |v: &[f64]| {
            v.iter()
                .zip(&p)
                .map(|(v, p)| p * (1.0 - v).powi(2) + v * v * (1.0 - p) / nf)
                .sum::<f64>()
                * h
                / PI
                + tail
        };
        (oracle_kernel(&model, n, grid).unwrap(), Box::new(objective))
    } else {
        let sample = model.sample(n, rng.random()).unwrap();
        let s: Vec<f64> = (0..m)
            .map(|k| {
                let w = grid.midpoint(k);
                let (re, im) = sample.values.iter().fold((0.0, 0.0), |(re, im), &x| {
                    (re + (w * x).cos(), im + (w * x).sin())
                });
                re * re + im * im
            })
            .collect();
        let objective = move |v: &[f64]| {
            v.iter()
                .zip(&s)
                .map(|(v, s)| v * v * s / (nf * nf) - 2.0 * v * (s - nf) / (nf * (nf - 1.0)))
                .sum::<f64>()
                * h
                / PI
        };
        let kernel = cv_optimal_kernel(&EmpiricalSpectrum::new(&sample, grid).unwrap()).unwrap();
        (kernel, Box::new(objective))
    };
    let solver = objective(kernel.values());
    let (lattice, _) = lattice_minimize(m, |v| objective(v));
    (solver, lattice)
}
