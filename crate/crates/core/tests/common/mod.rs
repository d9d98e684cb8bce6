//! Closed-form oracles for exponential lifetimes, written independently of
//! the library's numerics.
#![allow(dead_code)]

/// Birth rate, death rate and clock rate of the reference model.
pub const B: f64 = 0.8;
pub const D: f64 = 1.0;
pub const DELTA: f64 = 0.3;

/// Laplace exponent `a − b a/(a + d)` of the contour process.
pub fn psi(b: f64, d: f64, a: f64) -> f64 {
    a - b * a / (a + d)
}

/// Roots of `ψ(a) = q`, i.e. of `a² + (d − b − q)a − qd`, largest first.
pub fn roots(b: f64, d: f64, q: f64) -> (f64, f64) {
    let c1 = d - b - q;
    let disc = (c1 * c1 + 4.0 * q * d).sqrt();
    ((-c1 + disc) / 2.0, (-c1 - disc) / 2.0)
}

/// `W^(q)` by partial fractions of `(a + d)/((a − r1)(a − r2))`.
pub fn scale(b: f64, d: f64, q: f64, x: f64) -> f64 {
    let (r1, r2) = roots(b, d, q);
    let c1 = (r1 + d) / (r1 - r2);
    let c2 = (r2 + d) / (r2 - r1);
    c1 * (r1 * x).exp() + c2 * (r2 * x).exp()
}

pub fn scale_integral(b: f64, d: f64, q: f64, x: f64) -> f64 {
    let (r1, r2) = roots(b, d, q);
    let c1 = (r1 + d) / (r1 - r2);
    let c2 = (r2 + d) / (r2 - r1);
    let part = |c: f64, r: f64| if r == 0.0 { c * x } else { c * ((r * x).exp() - 1.0) / r };
    part(c1, r1) + part(c2, r2)
}

/// Reference `W^(0.3)`.
pub fn w_reference(x: f64) -> f64 {
    (1.6 * (0.6 * x).exp() - 0.5 * (-0.5 * x).exp()) / 1.1
}

/// Reference `W^(0)`.
pub fn w0_reference(x: f64) -> f64 {
    5.0 - 4.0 * (-0.2 * x).exp()
}

/// `(1 + q∫W)/W` in the reference model with `q = δ`.
pub fn g_reference(y: f64) -> f64 {
    (1.0 + DELTA * scale_integral(B, D, DELTA, y)) / scale(B, D, DELTA, y)
}

/// `P(T < y)` in the reference model.
pub fn cdf_t_reference(y: f64) -> f64 {
    let g = g_reference(y);
    DELTA / B * (1.0 - g) / g
}

/// `P(N_T = n | T < ∞)`: geometric with parameter 1/2.
pub fn geometric_reference(n: u64) -> f64 {
    0.5f64.powi(n as i32)
}

pub fn exp_cdf(rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        1.0 - (-rate * x).exp()
    }
}

/// `P(N_t = 0)` without a clock: `5(1 − e^{−0.2t})/(5 − 4e^{−0.2t})`.
pub fn extinct_by_reference(t: f64) -> f64 {
    let e = (-0.2 * t).exp();
    5.0 * (1.0 - e) / (5.0 - 4.0 * e)
}

/// Cdf of the observed stay `H` for `K ~ Exp(ν)`, integrating
/// `((ν+g)ν/g)(1 − e^{−gy})e^{−νy}`.
pub fn h_cdf_exponential(nu: f64, g: f64, y: f64) -> f64 {
    let c = (nu + g) * nu / g;
    c * ((1.0 - (-nu * y).exp()) / nu - (1.0 - (-(nu + g) * y).exp()) / (nu + g))
}
