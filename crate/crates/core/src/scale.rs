//! Tabulated q-scale functions.
//!
//! `W^(q)` is characterised by `∫ e^{-ax} W^(q)(x) dx = 1/(ψ(a) − q)`. Expanding
//! the right-hand side as a geometric series in the transform of `q + π̄`
//! gives the renewal equation
//!
//! ```text
//! W^(q)(x) = 1 + ∫_0^x (q + π̄(y)) W^(q)(x − y) dy,
//! ```
//!
//! which is solved on a uniform grid by product trapezoidal integration: the
//! kernel is integrated exactly over each cell and `W^(q)` is taken linear
//! across it. Exact cell integrals keep the scheme second order when `π̄`
//! has jumps (atoms of the lifetime law).

use crate::error::{config, domain, Error, Result};
use crate::levy::{LaplaceExponent, LifespanMeasure};

pub const DEFAULT_STEP: f64 = 1e-3;

/// Default table horizon `20 / max(η, 1/E[L])`.
pub fn default_horizon(exponent: &LaplaceExponent) -> f64 {
    let rate = exponent.eta().max(1.0 / exponent.measure().mean_lifetime());
    if rate > 0.0 && rate.is_finite() {
        20.0 / rate
    } else {
        20.0
    }
}

#[derive(Debug, Clone)]
pub struct ScaleTable {
    q: f64,
    step: f64,
    x_max: f64,
    phi_q: f64,
    measure: LifespanMeasure,
    values: Vec<f64>,
    cumulative: Vec<f64>,
    slopes: Vec<f64>,
}

impl ScaleTable {
    pub fn build(exponent: &LaplaceExponent, q: f64, step: f64, x_max: f64) -> Result<Self> {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(config(format!("q must be finite and nonnegative, got {q}")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(config(format!("grid step must be positive, got {step}")));
        }
        if !(x_max.is_finite() && x_max >= step) {
            return Err(config(format!("horizon {x_max} must be at least the grid step {step}")));
        }
        let measure = exponent.measure().clone();
        let b = measure.birth_rate();
        let law = measure.lifetime();

        let ratio = x_max / step;
        let cells = if (ratio - ratio.round()).abs() <= 1e-9 * ratio {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        };
        let x_max = cells as f64 * step;

        // ∫ over cell j of (q + π̄)
        let kernel: Vec<f64> = (0..cells)
            .map(|j| {
                let lo = j as f64 * step;
                q * step + b * law.tail_integral(lo, lo + step)
            })
            .collect();
        let diag = 1.0 - 0.5 * kernel[0];
        if diag <= 0.0 {
            return Err(config(format!(
                "grid step {step} too coarse for total rate q + b = {}",
                q + b
            )));
        }

        let mut values = vec![0.0; cells + 1];
        values[0] = 1.0;
        for n in 1..=cells {
            let mut acc = 0.0;
            for j in 1..n {
                acc += kernel[j] * (values[n - j] + values[n - j - 1]);
            }
            values[n] = (1.0 + 0.5 * kernel[0] * values[n - 1] + 0.5 * acc) / diag;
        }

        let mut cumulative = vec![0.0; cells + 1];
        for k in 1..=cells {
            cumulative[k] = cumulative[k - 1] + 0.5 * step * (values[k - 1] + values[k]);
        }

        let slopes = node_derivatives(&values, step);
        let phi_q = exponent.phi(q)?;
        Ok(ScaleTable { q, step, x_max, phi_q, measure, values, cumulative, slopes })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// `φ(q)` of the exponent the table was built from.
    pub fn phi_q(&self) -> f64 {
        self.phi_q
    }

    pub fn measure(&self) -> &LifespanMeasure {
        &self.measure
    }

    /// Grid values `W^(q)(k h)`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Grid values of `∫_0^{kh} W^(q)`.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| k as f64 * self.step)
    }

    fn check(&self, x: f64) -> Result<()> {
        if x.is_nan() || x > self.x_max * (1.0 + 1e-12) {
            Err(Error::OutOfTable { level: x, x_max: self.x_max })
        } else {
            Ok(())
        }
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let pos = x / self.step;
        let k = (pos.floor() as usize).min(self.values.len() - 2);
        (k, pos - k as f64)
    }

    fn w_in_range(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if self.values.len() == 1 {
            return 1.0;
        }
        let (k, frac) = self.locate(x);
        self.values[k] + frac * (self.values[k + 1] - self.values[k])
    }

    /// `W^(q)(x)`, zero on the negative half-line.
    pub fn w(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.w_in_range(x))
    }

    /// `∫_0^x W^(q)(s) ds`.
    pub fn integral(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        if x <= 0.0 {
            return Ok(0.0);
        }
        let (k, frac) = self.locate(x);
        let wx = self.w_in_range(x);
        Ok(self.cumulative[k] + 0.5 * frac * self.step * (self.values[k] + wx))
    }

    /// Finite-difference derivative of `W^(q)`, refused where the stencil
    /// meets a jump of `π̄`.
    pub fn w_prime(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        if x < 0.0 {
            return Err(domain(format!("derivative requested at negative level {x}")));
        }
        let reach = 2.0 * self.step;
        if let Some(atom) = self.measure.lifetime().atoms().into_iter().find(|a| (a - x).abs() <= reach) {
            return Err(Error::Unsupported(format!(
                "difference stencil at {x} straddles the jump of the lifespan tail at {atom}"
            )));
        }
        let (k, frac) = self.locate(x);
        Ok(self.slopes[k] + frac * (self.slopes[k + 1] - self.slopes[k]))
    }

    /// `E_s(e^{-q ρ_t}, τ_0 < τ_t^+) = W^(q)(t−s)/W^(q)(t)`.
    pub fn exit_bottom_lt(&self, s: f64, t: f64) -> Result<f64> {
        if !(0.0..=t).contains(&s) {
            return Err(domain(format!("need 0 <= s <= t, got s = {s}, t = {t}")));
        }
        Ok(self.w(t - s)? / self.w(t)?)
    }

    /// `G_q(t) = (1 + q ∫_0^t W^(q)) / W^(q)(t)`; `G_q(∞) = q/φ(q)`.
    pub fn g(&self, t: f64) -> Result<f64> {
        if t == f64::INFINITY {
            return Ok(if self.q == 0.0 { 0.0 } else { self.q / self.phi_q });
        }
        if t < 0.0 {
            return Err(domain(format!("G_q needs t >= 0, got {t}")));
        }
        Ok((1.0 + self.q * self.integral(t)?) / self.w(t)?)
    }

    /// `G_q'(t) = q − G_q(t) W^(q)'(t) / W^(q)(t)`.
    pub fn g_prime(&self, t: f64) -> Result<f64> {
        let w = self.w(t)?;
        Ok(self.q - self.g(t)? * self.w_prime(t)? / w)
    }

    /// q-resolvent density of the process killed on exiting `(0, t]`.
    pub fn resolvent_interval(&self, s: f64, y: f64, t: f64) -> Result<f64> {
        if !(s > 0.0 && s <= t && y > 0.0 && y <= t) {
            return Err(domain(format!("resolvent on (0, t] needs s, y in (0, {t}], got s = {s}, y = {y}")));
        }
        self.check(t)?;
        let first = self.w_in_range(t - s) * self.w_in_range(y) / self.w_in_range(t);
        let second = if y > s { self.w_in_range(y - s) } else { 0.0 };
        Ok(first - second)
    }

    /// q-resolvent density of the process killed on exiting `(−∞, 0]`,
    /// started at `−s`, in the variable `−X = y`.
    pub fn resolvent_halfline(&self, s: f64, y: f64) -> Result<f64> {
        if !(s >= 0.0 && y >= 0.0) {
            return Err(domain(format!("half-line resolvent needs s, y >= 0, got s = {s}, y = {y}")));
        }
        self.check(s)?;
        let second = if s > y { self.w_in_range(s - y) } else { 0.0 };
        Ok((-self.phi_q * y).exp() * self.w_in_range(s) - second)
    }

    /// Joint density of (pre-exit level, jump size) on the event of exiting
    /// `(0, t]` through the top, against `dy × π(dz)`.
    pub fn undershoot_overshoot_density(&self, s: f64, t: f64, y: f64, z: f64) -> Result<f64> {
        if !(y > 0.0 && y < t) {
            return Err(domain(format!("undershoot level must lie in (0, {t}), got {y}")));
        }
        if z + y <= t {
            return Err(domain(format!("jump of size {z} from {y} does not cross {t}")));
        }
        self.resolvent_interval(s, y, t)
    }

    /// Same as [`Self::undershoot_overshoot_density`] but against `dy × dz`,
    /// for lifetime laws with a density.
    pub fn undershoot_overshoot_lebesgue(&self, s: f64, t: f64, y: f64, z: f64) -> Result<f64> {
        let u = self.undershoot_overshoot_density(s, t, y, z)?;
        let pi = self
            .measure
            .density(z)
            .ok_or_else(|| Error::Unsupported("lifespan measure has no density".into()))?;
        Ok(u * pi)
    }

    /// `E_s(e^{-q ρ_t}, τ_t^+ < τ_0) = ∫_0^t u_t^q(s, y) π̄(t − y) dy`.
    pub fn upcross_lt(&self, s: f64, t: f64) -> Result<f64> {
        if !(s > 0.0 && s <= t) {
            return Err(domain(format!("upcrossing transform needs 0 < s <= t, got s = {s}, t = {t}")));
        }
        self.check(t)?;
        let wt = self.w_in_range(t);
        let wts = self.w_in_range(t - s);
        let integrand = |y: f64| {
            let jump = if y > s { self.w_in_range(y - s) } else { 0.0 };
            (wts * self.w_in_range(y) / wt - jump) * self.measure.tail(t - y)
        };
        let mut breaks = vec![0.0, s, t];
        breaks.extend(self.measure.lifetime().atoms().into_iter().map(|a| t - a).filter(|&y| y > 0.0 && y < t));
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut total = 0.0;
        for w in breaks.windows(2) {
            total += trapezoid_open_ends(&integrand, w[0], w[1], self.step);
        }
        Ok(total)
    }

    /// Trapezoidal evaluation of `∫_0^∞ e^{-ax} W^(q)(x) dx` from the
    /// table, with the tail beyond the horizon closed by `W^(q)(x) ∝ e^{φ(q) x}`.
    pub fn laplace_transform(&self, a: f64) -> Result<f64> {
        if a <= self.phi_q {
            return Err(domain(format!("transform needs a > φ(q) = {}, got {a}", self.phi_q)));
        }
        let h = self.step;
        let mut body = 0.0;
        for k in 0..self.values.len() - 1 {
            let x0 = k as f64 * h;
            body += 0.5 * h * ((-a * x0).exp() * self.values[k] + (-a * (x0 + h)).exp() * self.values[k + 1]);
        }
        let w_end = *self.values.last().unwrap();
        let tail = (-a * self.x_max).exp() * w_end / (a - self.phi_q);
        Ok(body + tail)
    }
}

fn node_derivatives(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    if n < 3 {
        let slope = if n == 2 { (values[1] - values[0]) / h } else { 0.0 };
        return vec![slope; n];
    }
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    for k in 1..n - 1 {
        d[k] = (values[k + 1] - values[k - 1]) / (2.0 * h);
    }
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    d
}

// Trapezoid with endpoints nudged inside the interval, so that one-sided
// limits are used at discontinuities sitting on the breakpoints.
fn trapezoid_open_ends<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, max_step: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let pieces = ((b - a) / max_step).ceil().max(1.0) as usize;
    let h = (b - a) / pieces as f64;
    let nudge = (b - a) * 1e-12;
    let mut total = 0.5 * (f(a + nudge) + f(b - nudge));
    for i in 1..pieces {
        total += f(a + i as f64 * h);
    }
    total * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{LifetimeLaw, TailTable};

    fn standard_table(q: f64) -> ScaleTable {
        let e = LaplaceExponent::new(LifespanMeasure::exponential(0.8, 1.0).unwrap());
        ScaleTable::build(&e, q, 1e-3, 10.0).unwrap()
    }

    #[test]
    fn starts_at_one() {
        let t = standard_table(0.3);
        assert_eq!(t.w(0.0).unwrap(), 1.0);
        assert_eq!(t.values()[0], 1.0);
    }

    #[test]
    fn no_births_gives_exponential() {
        let e = LaplaceExponent::new(LifespanMeasure::exponential(0.0, 1.0).unwrap());
        let t = ScaleTable::build(&e, 0.3, 1e-3, 4.0).unwrap();
        assert!((t.w(2.0).unwrap() / 0.6f64.exp() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn standard_value_at_one() {
        let t = standard_table(0.3);
        let exact = (1.6 * 0.6f64.exp() - 0.5 * (-0.5f64).exp()) / 1.1;
        assert!((t.w(1.0).unwrap() - exact).abs() < 1e-7);
        assert!((exact - 2.3747).abs() < 1e-4);
    }

    #[test]
    fn exit_bottom_examples() {
        let t = standard_table(0.0);
        assert_eq!(t.exit_bottom_lt(0.0, 3.0).unwrap(), 1.0);
        assert!((t.exit_bottom_lt(3.0, 3.0).unwrap() - 1.0 / t.w(3.0).unwrap()).abs() < 1e-15);
        let w = |x: f64| 5.0 - 4.0 * (-0.2 * x).exp();
        assert!((t.exit_bottom_lt(1.0, 2.0).unwrap() - w(1.0) / w(2.0)).abs() < 1e-7);
        assert!(t.exit_bottom_lt(1.0, 11.0).is_err());
        assert!(t.exit_bottom_lt(2.0, 1.0).is_err());
    }

    #[test]
    fn g_limits() {
        let t = standard_table(0.0);
        assert!((t.g(2.0).unwrap() - 1.0 / t.w(2.0).unwrap()).abs() < 1e-15);
        let t = standard_table(0.3);
        assert!((t.g(f64::INFINITY).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(t.g(0.0).unwrap(), 1.0);
        let mut prev = 1.0;
        for x in t.grid().step_by(100).skip(1) {
            let g = t.g(x).unwrap();
            assert!(g <= prev + 1e-12);
            prev = g;
        }
        assert!((t.g(10.0).unwrap() - 0.5).abs() < 1e-2);
    }

    #[test]
    fn resolvent_edge_values() {
        let t = standard_table(0.3);
        let wt = t.w(3.0).unwrap();
        assert!((t.resolvent_interval(3.0, 1.0, 3.0).unwrap() - t.w(1.0).unwrap() / wt).abs() < 1e-14);
        assert!((t.resolvent_interval(3.0, 3.0, 3.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(t.resolvent_interval(0.0, 1.0, 3.0).is_err());
        assert!(t.resolvent_interval(1.0, 3.5, 3.0).is_err());
        assert!((t.resolvent_halfline(0.0, 2.0).unwrap() - (-1.2f64).exp()).abs() < 1e-12);
        assert!(t.resolvent_halfline(2.0, 0.0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn resolvents_nonnegative_on_sweep() {
        let t = standard_table(0.3);
        let top = 3.0;
        for i in 1..=50 {
            for j in 1..=50 {
                let s = top * i as f64 / 50.0;
                let y = top * j as f64 / 50.0;
                assert!(t.resolvent_interval(s, y, top).unwrap() >= -1e-12, "{s} {y}");
                assert!(t.resolvent_halfline(s, y).unwrap() >= -1e-12, "{s} {y}");
            }
        }
    }

    #[test]
    fn undershoot_overshoot_domain() {
        let t = standard_table(0.3);
        assert!(t.undershoot_overshoot_density(2.0, 2.0, 0.5, 1.0).is_err());
        let d = t.undershoot_overshoot_density(2.0, 2.0, 0.5, 1.6).unwrap();
        assert!((d - t.w(0.5).unwrap() / t.w(2.0).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn upcross_complements_exit_at_q0() {
        let t = standard_table(0.0);
        for (s, top) in [(1.0, 2.0), (0.37, 1.5), (2.0, 2.0), (4.2, 6.0)] {
            let up = t.upcross_lt(s, top).unwrap();
            let down = t.exit_bottom_lt(s, top).unwrap();
            assert!((up + down - 1.0).abs() < 1e-6, "{s} {top}: {}", up + down - 1.0);
        }
    }

    #[test]
    fn upcross_near_zero_and_monotone_in_q() {
        let t = standard_table(0.0);
        assert!(t.upcross_lt(1e-3, 2.0).unwrap() <= 1e-3);
        let e = LaplaceExponent::new(LifespanMeasure::exponential(0.8, 1.0).unwrap());
        let mut prev = f64::INFINITY;
        for q in [0.0, 0.3, 1.0, 3.0] {
            let table = ScaleTable::build(&e, q, 1e-3, 3.0).unwrap();
            let v = table.upcross_lt(1.0, 2.0).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let e = LaplaceExponent::new(LifespanMeasure::exponential(0.8, 1.0).unwrap());
        assert!(ScaleTable::build(&e, 0.3, 2.0, 1.0).is_err());
        assert!(ScaleTable::build(&e, 0.3, 0.0, 1.0).is_err());
        assert!(ScaleTable::build(&e, 0.3, 5.0, 10.0).is_err());
    }

    #[test]
    fn derivative_refused_next_to_atoms() {
        let law = LifetimeLaw::Table(TailTable::new(vec![(1.0, 0.4), (2.0, 0.0)]).unwrap());
        let e = LaplaceExponent::new(LifespanMeasure::new(0.5, law).unwrap());
        let t = ScaleTable::build(&e, 0.2, 1e-3, 5.0).unwrap();
        assert!(matches!(t.w_prime(1.0005), Err(Error::Unsupported(_))));
        assert!(t.w_prime(1.5).is_ok());
    }
}
