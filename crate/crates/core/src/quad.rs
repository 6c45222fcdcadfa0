//! Gauss–Legendre quadrature helpers shared by the density models and the
//! wavelet diagnostics.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

const RULE_DEGREE: usize = 20;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(RULE_DEGREE).unwrap()))
}

/// Single 20-point Gauss–Legendre panel on `[a, b]`.
pub fn gauss_legendre<F: FnMut(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    if a == b {
        return 0.0;
    }
    rule().integrate(a, b, f)
}

/// Composite rule with panels no wider than `max_width`.
pub fn composite<F: FnMut(f64) -> f64>(a: f64, b: f64, max_width: f64, mut f: F) -> f64 {
    if a == b {
        return 0.0;
    }
    let panels = (((b - a).abs() / max_width).ceil() as usize).max(1);
    let width = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == panels { b } else { lo + width };
            gauss_legendre(lo, hi, &mut f)
        })
        .sum()
}

/// Adaptive bisection on `[a, b]` until a panel agrees with its two halves
/// to within `tol` (absolute).
pub fn adaptive<F: FnMut(f64) -> f64>(a: f64, b: f64, tol: f64, mut f: F) -> f64 {
    fn recurse<F: FnMut(f64) -> f64>(
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: u32,
        f: &mut F,
    ) -> f64 {
        let mid = 0.5 * (a + b);
        let left = gauss_legendre(a, mid, &mut *f);
        let right = gauss_legendre(mid, b, &mut *f);
        let halves = left + right;
        if depth == 0 || (halves - whole).abs() <= tol {
            return halves;
        }
        recurse(a, mid, left, 0.5 * tol, depth - 1, f)
            + recurse(mid, b, right, 0.5 * tol, depth - 1, f)
    }
    let whole = gauss_legendre(a, b, &mut f);
    recurse(a, b, whole, tol, 40, &mut f)
}

/// Integral over the whole real line via `x = center + scale * tan(θ)`,
/// splitting at the images of `breakpoints`.
pub fn real_line<F: FnMut(f64) -> f64>(
    center: f64,
    scale: f64,
    breakpoints: &[f64],
    tol: f64,
    mut f: F,
) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .map(|&x| ((x - center) / scale).atan())
        .collect();
    cuts.push(-half_pi);
    cuts.push(half_pi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut integrand = |theta: f64| {
        let c = theta.cos();
        if c <= 0.0 {
            return 0.0;
        }
        let x = center + scale * theta.tan();
        let v = f(x);
        if v == 0.0 {
            0.0
        } else {
            v * scale / (c * c)
        }
    };
    cuts.windows(2)
        .map(|w| adaptive(w[0], w[1], tol, &mut integrand))
        .sum()
}
