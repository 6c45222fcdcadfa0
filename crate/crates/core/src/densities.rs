//! Analytic test densities with closed-form characteristic functions.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use libm::{erf, erfc};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad;

pub const MODEL_GRAMMAR: &str =
    "gaussian:MU,SIGMA | laplace:MU,B | cauchy:MU,GAMMA | uniform:A,B | \
     mix:W1*COMPONENT+W2*COMPONENT+... (weights positive, summing to 1)";

/// A single (non-mixture) density family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Gaussian { mean: f64, sd: f64 },
    Laplace { location: f64, scale: f64 },
    Cauchy { location: f64, scale: f64 },
    Uniform { lower: f64, upper: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub family: Family,
}

/// Ground-truth density: one family or a finite mixture of families.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityModel {
    Single(Family),
    Mixture(Vec<Component>),
}

impl Family {
    fn validate(self) -> Result<Self> {
        let ok = match self {
            Family::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Family::Laplace { location, scale } | Family::Cauchy { location, scale } => {
                location.is_finite() && scale.is_finite() && scale > 0.0
            }
            Family::Uniform { lower, upper } => {
                lower.is_finite() && upper.is_finite() && upper > lower
            }
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid density parameters: {self}"
            )))
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Family::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
            }
            Family::Laplace { location, scale } => {
                (-(x - location).abs() / scale).exp() / (2.0 * scale)
            }
            Family::Cauchy { location, scale } => {
                let z = (x - location) / scale;
                1.0 / (PI * scale * (1.0 + z * z))
            }
            Family::Uniform { lower, upper } => {
                if (lower..upper).contains(&x) {
                    1.0 / (upper - lower)
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫ f(x) e^{iωx} dx`.
    pub fn cf(&self, omega: f64) -> Complex64 {
        let (shift, modulus) = match *self {
            Family::Gaussian { mean, sd } => (mean, (-0.5 * sd * sd * omega * omega).exp()),
            Family::Laplace { location, scale } => {
                (location, 1.0 / (1.0 + scale * scale * omega * omega))
            }
            Family::Cauchy { location, scale } => (location, (-scale * omega.abs()).exp()),
            Family::Uniform { lower, upper } => (
                0.5 * (lower + upper),
                crate::spectral::sinc(0.5 * omega * (upper - lower)),
            ),
        };
        Complex64::from_polar(1.0, shift * omega) * modulus
    }

    fn l2_norm_sq(&self) -> f64 {
        match *self {
            Family::Gaussian { sd, .. } => 1.0 / (2.0 * sd * PI.sqrt()),
            Family::Laplace { scale, .. } => 1.0 / (4.0 * scale),
            Family::Cauchy { scale, .. } => 1.0 / (2.0 * PI * scale),
            Family::Uniform { lower, upper } => 1.0 / (upper - lower),
        }
    }

    fn sup_norm(&self) -> f64 {
        match *self {
            Family::Gaussian { sd, .. } => 1.0 / (sd * (2.0 * PI).sqrt()),
            Family::Laplace { scale, .. } => 1.0 / (2.0 * scale),
            Family::Cauchy { scale, .. } => 1.0 / (PI * scale),
            Family::Uniform { lower, upper } => 1.0 / (upper - lower),
        }
    }

    fn location(&self) -> f64 {
        match *self {
            Family::Gaussian { mean, .. } => mean,
            Family::Laplace { location, .. } | Family::Cauchy { location, .. } => location,
            Family::Uniform { lower, upper } => 0.5 * (lower + upper),
        }
    }

    fn spread(&self) -> f64 {
        match *self {
            Family::Gaussian { sd, .. } => sd,
            Family::Laplace { scale, .. } | Family::Cauchy { scale, .. } => scale,
            Family::Uniform { lower, upper } => upper - lower,
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match *self {
            Family::Gaussian { .. } | Family::Cauchy { .. } => Vec::new(),
            Family::Laplace { location, .. } => vec![location],
            Family::Uniform { lower, upper } => vec![lower, upper],
        }
    }

    /// Closed form of `∫_0^ω |f^(τ)|^2 dτ` where one is known.
    fn power_integral_closed(&self, omega: f64) -> Option<f64> {
        match *self {
            Family::Gaussian { sd, .. } => Some(PI.sqrt() / (2.0 * sd) * erf(sd * omega)),
            Family::Laplace { scale, .. } => {
                let u = scale * omega;
                Some((u / (1.0 + u * u) + u.atan()) / (2.0 * scale))
            }
            Family::Cauchy { scale, .. } => Some(-(-2.0 * scale * omega).exp_m1() / (2.0 * scale)),
            Family::Uniform { .. } => None,
        }
    }

    /// Closed form of `(1/π) ∫_W^∞ |f^|^2` where one is known.
    fn tail_energy_closed(&self, band: f64) -> Option<f64> {
        match *self {
            Family::Gaussian { sd, .. } => Some(erfc(sd * band) / (2.0 * sd * PI.sqrt())),
            Family::Laplace { scale, .. } => {
                let u = scale * band;
                // ∫_u^∞ (1+s²)^-2 ds = (atan(1/u) - u/(1+u²)) / 2
                let remaining = if u == 0.0 {
                    0.5 * PI
                } else {
                    (1.0 / u).atan() - u / (1.0 + u * u)
                };
                Some(remaining.max(0.0) / (2.0 * PI * scale))
            }
            Family::Cauchy { scale, .. } => Some((-2.0 * scale * band).exp() / (2.0 * PI * scale)),
            Family::Uniform { .. } => None,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Family::Gaussian { mean, sd } => mean + sd * rng.sample::<f64, _>(StandardNormal),
            Family::Laplace { location, scale } => {
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                location - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Family::Cauchy { location, scale } => {
                let u: f64 = rng.sample(Open01);
                location + scale * (PI * (u - 0.5)).tan()
            }
            Family::Uniform { lower, upper } => {
                let u: f64 = rng.sample(Open01);
                lower + (upper - lower) * u
            }
        }
    }

    fn mean(&self) -> Option<f64> {
        match *self {
            Family::Cauchy { .. } => None,
            _ => Some(self.location()),
        }
    }

    fn second_moment(&self) -> Option<f64> {
        let mu = self.mean()?;
        let var = match *self {
            Family::Gaussian { sd, .. } => sd * sd,
            Family::Laplace { scale, .. } => 2.0 * scale * scale,
            Family::Uniform { lower, upper } => (upper - lower).powi(2) / 12.0,
            Family::Cauchy { .. } => unreachable!(),
        };
        Some(var + mu * mu)
    }
}

/// `∫ f_a f_b dx` for two families.
fn cross_l2(a: &Family, b: &Family) -> f64 {
    match (*a, *b) {
        (Family::Gaussian { mean: m1, sd: s1 }, Family::Gaussian { mean: m2, sd: s2 }) => {
            Family::Gaussian {
                mean: m1,
                sd: (s1 * s1 + s2 * s2).sqrt(),
            }
            .pdf(m2)
        }
        (
            Family::Cauchy {
                location: m1,
                scale: g1,
            },
            Family::Cauchy {
                location: m2,
                scale: g2,
            },
        ) => Family::Cauchy {
            location: m1,
            scale: g1 + g2,
        }
        .pdf(m2),
        (
            Family::Uniform {
                lower: a1,
                upper: b1,
            },
            Family::Uniform {
                lower: a2,
                upper: b2,
            },
        ) => (b1.min(b2) - a1.max(a2)).max(0.0) / ((b1 - a1) * (b2 - a2)),
        _ if a == b => a.l2_norm_sq(),
        _ => {
            let mut kinks = a.kinks();
            kinks.extend(b.kinks());
            let center = 0.5 * (a.location() + b.location());
            let scale = a.spread().max(b.spread());
            quad::real_line(center, scale, &kinks, 1e-14, |x| a.pdf(x) * b.pdf(x))
        }
    }
}

impl DensityModel {
    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        Family::Gaussian { mean, sd }.validate().map(Self::Single)
    }

    pub fn laplace(location: f64, scale: f64) -> Result<Self> {
        Family::Laplace { location, scale }
            .validate()
            .map(Self::Single)
    }

    pub fn cauchy(location: f64, scale: f64) -> Result<Self> {
        Family::Cauchy { location, scale }
            .validate()
            .map(Self::Single)
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        Family::Uniform { lower, upper }
            .validate()
            .map(Self::Single)
    }

    /// Mixture with weights that must be positive and sum to one (within 1e-9).
    pub fn mixture(components: Vec<(f64, DensityModel)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument(
                "mixture needs at least one component".into(),
            ));
        }
        let mut parts = Vec::with_capacity(components.len());
        for (weight, model) in components {
            let family = match model {
                DensityModel::Single(f) => f,
                DensityModel::Mixture(_) => {
                    return Err(Error::InvalidArgument("mixtures cannot be nested".into()))
                }
            };
            if !(weight.is_finite() && weight > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "mixture weight {weight} must be positive"
                )));
            }
            parts.push(Component { weight, family });
        }
        let total: f64 = parts.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        Ok(Self::Mixture(parts))
    }

    fn components(&self) -> Vec<Component> {
        match self {
            DensityModel::Single(f) => vec![Component {
                weight: 1.0,
                family: *f,
            }],
            DensityModel::Mixture(parts) => parts.clone(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            DensityModel::Single(f) => f.pdf(x),
            DensityModel::Mixture(parts) => parts.iter().map(|c| c.weight * c.family.pdf(x)).sum(),
        }
    }

    /// Characteristic function `f^(ω) = ∫ f(x) e^{iωx} dx`.
    pub fn cf(&self, omega: f64) -> Complex64 {
        match self {
            DensityModel::Single(f) => f.cf(omega),
            DensityModel::Mixture(parts) => {
                parts.iter().map(|c| c.family.cf(omega) * c.weight).sum()
            }
        }
    }

    /// `|f^(ω)|^2`.
    pub fn power(&self, omega: f64) -> f64 {
        self.cf(omega).norm_sqr()
    }

    /// `||f||_2^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        match self {
            DensityModel::Single(f) => f.l2_norm_sq(),
            DensityModel::Mixture(parts) => {
                let mut total = 0.0;
                for (i, a) in parts.iter().enumerate() {
                    total += a.weight * a.weight * a.family.l2_norm_sq();
                    for b in &parts[i + 1..] {
                        total += 2.0 * a.weight * b.weight * cross_l2(&a.family, &b.family);
                    }
                }
                total
            }
        }
    }

    /// `||f||_∞`; for mixtures the maximum over component locations and a
    /// dense grid spanning them.
    pub fn sup_norm(&self) -> f64 {
        match self {
            DensityModel::Single(f) => f.sup_norm(),
            DensityModel::Mixture(parts) => {
                let lo = parts
                    .iter()
                    .map(|c| c.family.location() - 3.0 * c.family.spread())
                    .fold(f64::INFINITY, f64::min);
                let hi = parts
                    .iter()
                    .map(|c| c.family.location() + 3.0 * c.family.spread())
                    .fold(f64::NEG_INFINITY, f64::max);
                let grid = (0..=4000).map(|i| lo + (hi - lo) * i as f64 / 4000.0);
                parts
                    .iter()
                    .flat_map(|c| {
                        let mut xs = c.family.kinks();
                        xs.push(c.family.location());
                        xs
                    })
                    .chain(grid)
                    .map(|x| self.pdf(x))
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Largest length scale of the model; the power spectrum varies on
    /// frequency scales no finer than its reciprocal.
    pub fn length_scale(&self) -> f64 {
        let parts = self.components();
        let spread = parts.iter().map(|c| c.family.spread()).fold(0.0, f64::max);
        let locations = parts.iter().map(|c| c.family.location());
        let (lo, hi) = locations.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });
        spread.max(hi - lo).max(1e-12)
    }

    pub(crate) fn quadrature_panel(&self) -> f64 {
        0.25 / self.length_scale().max(1.0)
    }

    /// `∫_a^b |f^(ω)|^2 dω` for `0 <= a <= b`.
    pub fn power_integral(&self, a: f64, b: f64) -> f64 {
        if let DensityModel::Single(f) = self {
            if let (Some(hi), Some(lo)) = (f.power_integral_closed(b), f.power_integral_closed(a)) {
                return hi - lo;
            }
        }
        quad::composite(a, b, self.quadrature_panel(), |w| self.power(w))
    }

    /// `(1/2π) ∫_{|ω|>W} |f^(ω)|^2 dω`, the energy a band-limited estimator
    /// cannot reach.
    pub fn tail_energy(&self, band: f64) -> f64 {
        if let DensityModel::Single(f) = self {
            if let Some(tail) = f.tail_energy_closed(band) {
                return tail;
            }
        }
        (self.l2_norm_sq() - self.power_integral(0.0, band) / PI).max(0.0)
    }

    /// Tabulated cumulative power `∫_0^ω |f^|^2` on `[0, band]` for fast
    /// repeated evaluation.
    pub fn power_profile(&self, band: f64) -> PowerProfile {
        PowerProfile::new(self.clone(), band)
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleSet> {
        self.sample_stream(n, seed, 0)
    }

    /// Draws `n` values from stream `stream` of the generator seeded by
    /// `seed`. Streams are independent, so replication `r` of a Monte Carlo
    /// run uses stream `r` without disturbing the others.
    pub fn sample_stream(&self, n: usize, seed: u64, stream: u64) -> Result<SampleSet> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "sample size n must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let values = match self {
            DensityModel::Single(f) => (0..n).map(|_| f.sample(&mut rng)).collect(),
            DensityModel::Mixture(parts) => {
                let cumulative: Vec<f64> = parts
                    .iter()
                    .scan(0.0, |acc, c| {
                        *acc += c.weight;
                        Some(*acc)
                    })
                    .collect();
                (0..n)
                    .map(|_| {
                        let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                        let idx = cumulative.partition_point(|&c| c <= u).min(parts.len() - 1);
                        parts[idx].family.sample(&mut rng)
                    })
                    .collect()
            }
        };
        Ok(SampleSet {
            values,
            seed: Some(seed),
            model_tag: Some(self.to_string()),
        })
    }

    /// Expectation, when finite.
    pub fn mean(&self) -> Option<f64> {
        self.components()
            .iter()
            .map(|c| c.family.mean().map(|m| c.weight * m))
            .sum()
    }

    pub fn variance(&self) -> Option<f64> {
        let second: Option<f64> = self
            .components()
            .iter()
            .map(|c| c.family.second_moment().map(|m| c.weight * m))
            .sum();
        let mean = self.mean()?;
        Some(second? - mean * mean)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Family::Gaussian { mean, sd } => write!(f, "gaussian:{mean},{sd}"),
            Family::Laplace { location, scale } => write!(f, "laplace:{location},{scale}"),
            Family::Cauchy { location, scale } => write!(f, "cauchy:{location},{scale}"),
            Family::Uniform { lower, upper } => write!(f, "uniform:{lower},{upper}"),
        }
    }
}

impl fmt::Display for DensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityModel::Single(family) => family.fmt(f),
            DensityModel::Mixture(parts) => {
                f.write_str("mix:")?;
                for (i, c) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str("+")?;
                    }
                    write!(f, "{}*{}", c.weight, c.family)?;
                }
                Ok(())
            }
        }
    }
}

impl Serialize for DensityModel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

fn parse_family(text: &str, whole: &str) -> Result<Family> {
    let fail = |reason: String| Error::ModelSpec {
        spec: whole.to_string(),
        reason,
    };
    let (name, args) = text
        .split_once(':')
        .ok_or_else(|| fail(format!("component {text:?} lacks a ':'")))?;
    let params: Vec<f64> = args
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| fail(format!("{p:?} is not a number")))
        })
        .collect::<Result<_>>()?;
    if params.len() != 2 {
        return Err(fail(format!(
            "{name} takes 2 parameters, got {}",
            params.len()
        )));
    }
    let (p, q) = (params[0], params[1]);
    let family = match name.trim().to_ascii_lowercase().as_str() {
        "gaussian" | "normal" => Family::Gaussian { mean: p, sd: q },
        "laplace" => Family::Laplace {
            location: p,
            scale: q,
        },
        "cauchy" => Family::Cauchy {
            location: p,
            scale: q,
        },
        "uniform" => Family::Uniform { lower: p, upper: q },
        other => return Err(fail(format!("unknown family {other:?}"))),
    };
    family.validate().map_err(|e| fail(e.to_string()))
}

impl FromStr for DensityModel {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let text: String = spec.trim().replace('\u{2212}', "-");
        let fail = |reason: String| Error::ModelSpec {
            spec: spec.to_string(),
            reason,
        };
        let Some(body) = text.strip_prefix("mix:") else {
            return parse_family(&text, spec).map(DensityModel::Single);
        };
        // A '+' also appears in exponents such as 1e+3; rejoin pieces until
        // each one carries its own weight.
        let mut terms: Vec<String> = Vec::new();
        for piece in body.split('+') {
            match terms.last_mut() {
                Some(last) if !piece.contains('*') => {
                    last.push('+');
                    last.push_str(piece);
                }
                _ => terms.push(piece.to_string()),
            }
        }
        let mut components = Vec::new();
        for term in &terms {
            let (weight, family) = term
                .split_once('*')
                .ok_or_else(|| fail(format!("mixture term {term:?} lacks a 'WEIGHT*'")))?;
            let weight: f64 = weight
                .trim()
                .parse()
                .map_err(|_| fail(format!("weight {weight:?} is not a number")))?;
            components.push((weight, DensityModel::Single(parse_family(family, spec)?)));
        }
        DensityModel::mixture(components).map_err(|e| fail(e.to_string()))
    }
}

/// Cumulative power `Q(ω) = ∫_0^ω |f^(τ)|^2 dτ`, tabulated on panels so
/// that evaluation costs one Gauss–Legendre panel.
#[derive(Debug, Clone)]
pub struct PowerProfile {
    model: DensityModel,
    panel: f64,
    band: f64,
    cumulative: Vec<f64>,
    closed_form: bool,
}

impl PowerProfile {
    fn new(model: DensityModel, band: f64) -> Self {
        let closed_form =
            matches!(&model, DensityModel::Single(f) if f.power_integral_closed(0.0).is_some());
        let panel = model.quadrature_panel();
        let mut cumulative = vec![0.0];
        if !closed_form {
            let panels = (band / panel).ceil() as usize;
            let mut acc = 0.0;
            for i in 0..panels {
                let lo = i as f64 * panel;
                acc += quad::gauss_legendre(lo, lo + panel, |w| model.power(w));
                cumulative.push(acc);
            }
        }
        Self {
            model,
            panel,
            band,
            cumulative,
            closed_form,
        }
    }

    pub fn model(&self) -> &DensityModel {
        &self.model
    }

    pub fn band(&self) -> f64 {
        self.band
    }

    /// `Q(ω)` for `ω` in `[0, band]`.
    pub fn cumulative(&self, omega: f64) -> f64 {
        if self.closed_form {
            return self.model.power_integral(0.0, omega);
        }
        let idx = ((omega / self.panel) as usize).min(self.cumulative.len() - 1);
        let start = idx as f64 * self.panel;
        self.cumulative[idx] + quad::gauss_legendre(start, omega, |w| self.model.power(w))
    }

    /// `∫_a^b |f^|^2`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.cumulative(b) - self.cumulative(a)
    }
}

/// An i.i.d. sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub seed: Option<u64>,
    pub model_tag: Option<String>,
}

impl SampleSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample value {x} is not finite"
            )));
        }
        Ok(Self {
            values,
            seed: None,
            model_tag: None,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Reads newline-delimited reals; blank lines and `#` comments are skipped.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let values = parse_reals(&text, &path.display().to_string())?;
        let mut sample = Self::new(values)?;
        sample.model_tag = Some(format!("file:{}", path.display()));
        Ok(sample)
    }
}

/// Parses newline-delimited reals with `#` comments.
pub fn parse_reals(text: &str, origin: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let value = content.parse::<f64>().map_err(|_| Error::ParseValue {
            path: origin.to_string(),
            line: i + 1,
            text: content.to_string(),
        })?;
        values.push(value);
    }
    Ok(values)
}
