//! Closed-form laws of the detection time, the number of carriers at that
//! time, their ages and residual lifetimes, and the population at a fixed
//! time, all evaluated through one scale-function table.

use crate::error::{config, domain, Error, Result};
use crate::levy::{LaplaceExponent, LifespanMeasure, LifetimeLaw};
use crate::numeric::integrate;
use crate::scale::ScaleTable;

/// Laws attached to detection clocks of rate `δ`; holds `W^(δ)`.
#[derive(Debug, Clone)]
pub struct DetectionLaw {
    delta: f64,
    phi: f64,
    table: ScaleTable,
}

impl DetectionLaw {
    pub fn new(exponent: &LaplaceExponent, delta: f64, step: f64, x_max: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(config(format!("detection rate must be positive, got {delta}")));
        }
        if exponent.measure().birth_rate() <= 0.0 {
            return Err(config("detection laws need a positive birth rate"));
        }
        let table = ScaleTable::build(exponent, delta, step, x_max)?;
        let phi = table.phi_q();
        Ok(DetectionLaw { delta, phi, table })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn table(&self) -> &ScaleTable {
        &self.table
    }

    pub fn measure(&self) -> &LifespanMeasure {
        self.table.measure()
    }

    fn b(&self) -> f64 {
        self.measure().birth_rate()
    }

    /// `P(T < ∞) = (φ(δ) − δ)/b`.
    pub fn detection_probability(&self) -> f64 {
        (self.phi - self.delta) / self.b()
    }

    /// Parameter `δ/φ(δ)` of the geometric law of `N_T` given detection.
    pub fn geometric_parameter(&self) -> f64 {
        self.delta / self.phi
    }

    /// `P(N_T = n, T < ∞) = (δ/b)(1 − δ/φ(δ))^n`.
    pub fn pmf_nt(&self, n: u64) -> Result<f64> {
        check_count(n)?;
        Ok(self.delta / self.b() * (1.0 - self.geometric_parameter()).powf(n as f64))
    }

    /// `P(N_T = n | T < ∞)`.
    pub fn pmf_nt_given_detection(&self, n: u64) -> Result<f64> {
        check_count(n)?;
        let g = self.geometric_parameter();
        Ok(g * (1.0 - g).powf(n as f64 - 1.0))
    }

    /// `P(T < y) = (δ/b)(1 − G_δ(y))/G_δ(y)`; `y` may be infinite.
    pub fn cdf_t(&self, y: f64) -> Result<f64> {
        if y == f64::INFINITY {
            return Ok(self.detection_probability());
        }
        if !(y >= 0.0) {
            return Err(domain(format!("detection time must be nonnegative, got {y}")));
        }
        let g = self.table.g(y)?;
        Ok(self.delta / self.b() * (1.0 - g) / g)
    }

    /// `P(T < y | T < ∞)`.
    pub fn cdf_t_given_detection(&self, y: f64) -> Result<f64> {
        Ok(self.cdf_t(y)? / self.detection_probability())
    }

    /// `P(N_T = n, T < y) = (δ/b)(1 − G_δ(y))^n`.
    pub fn joint_cdf(&self, n: u64, y: f64) -> Result<f64> {
        check_count(n)?;
        let g = self.table.g(y)?;
        Ok(self.delta / self.b() * (1.0 - g).powf(n as f64))
    }

    /// Density of `T` on `{N_T = n}`: `−(nδ/b) G_δ'(t) (1 − G_δ(t))^{n−1}`.
    pub fn joint_density(&self, n: u64, t: f64) -> Result<f64> {
        check_count(n)?;
        let g = self.table.g(t)?;
        let dg = self.table.g_prime(t)?;
        Ok(-(n as f64) * self.delta / self.b() * dg * (1.0 - g).powf(n as f64 - 1.0))
    }

    /// Density of `T` on `{T < ∞}`, summed over `n`: `−(δ/b) G_δ'/G_δ²`.
    pub fn density_t(&self, t: f64) -> Result<f64> {
        let g = self.table.g(t)?;
        Ok(-self.delta / self.b() * self.table.g_prime(t)? / (g * g))
    }

    /// `P(N_T = n | T = t) = n G² (1 − G)^{n−1}`.
    pub fn pmf_nt_given_time(&self, n: u64, t: f64) -> Result<f64> {
        check_count(n)?;
        let g = self.table.g(t)?;
        Ok(n as f64 * g * g * (1.0 - g).powf(n as f64 - 1.0))
    }

    /// `P(N_T = n | T < y) = G (1 − G)^{n−1}`.
    pub fn pmf_nt_given_time_before(&self, n: u64, y: f64) -> Result<f64> {
        check_count(n)?;
        let g = self.table.g(y)?;
        Ok(g * (1.0 - g).powf(n as f64 - 1.0))
    }

    fn window_norm(&self, y: f64) -> Result<f64> {
        Ok(self.table.w(y)? - 1.0 - self.delta * self.table.integral(y)?)
    }

    // weight of age `a` before the lifespan tail factor
    fn age_weight(&self, y: f64, a: f64) -> Result<f64> {
        if y == f64::INFINITY {
            Ok(self.phi / (self.phi - self.delta) * (-self.phi * a).exp())
        } else if a >= y {
            Ok(0.0)
        } else {
            Ok(self.table.w(y - a)? / self.window_norm(y)?)
        }
    }

    fn check_window(y: f64, a: f64) -> Result<()> {
        if !(y > 0.0) {
            return Err(domain(format!("window must be positive, got {y}")));
        }
        if !(a >= 0.0) {
            return Err(domain(format!("age must be nonnegative, got {a}")));
        }
        Ok(())
    }

    /// Joint density of a carrier's (age, residual lifetime) given detection
    /// before `y` (`y` infinite for plain detection).
    pub fn age_residual_density(&self, y: f64, a: f64, r: f64) -> Result<f64> {
        Self::check_window(y, a)?;
        if !(r > 0.0) {
            return Err(domain(format!("residual lifetime must be positive, got {r}")));
        }
        let pi = self.measure().density(a + r).ok_or_else(|| {
            Error::Unsupported("lifespan measure has no density; use the age marginal or cell masses".into())
        })?;
        Ok(self.age_weight(y, a)? * pi)
    }

    /// Marginal density of a carrier's age: the joint density with the
    /// lifespan density replaced by its tail.
    pub fn age_density(&self, y: f64, a: f64) -> Result<f64> {
        Self::check_window(y, a)?;
        Ok(self.age_weight(y, a)? * self.measure().tail(a))
    }

    /// `P(A ∈ [a0, a1), R ∈ (r0, r1])` for one carrier; works with atoms.
    pub fn age_residual_mass(&self, y: f64, a0: f64, a1: f64, r0: f64, r1: f64) -> Result<f64> {
        Self::check_window(y, a0)?;
        if !(a1 >= a0 && r1 >= r0 && r0 >= 0.0) {
            return Err(domain("cell bounds must be ordered and nonnegative"));
        }
        let hi = if y.is_finite() { a1.min(y) } else { a1 };
        if hi <= a0 {
            return Ok(0.0);
        }
        let tail = |x: f64| if x.is_finite() { self.measure().tail(x) } else { self.measure().killing_rate() };
        let mut err = None;
        let q = integrate(
            |a| match self.age_weight(y, a) {
                Ok(w) => w * (tail(a + r0) - tail(a + r1)),
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            a0,
            if hi.is_finite() { hi } else { a0 + 60.0 / self.phi },
            1e-12,
            1e-10,
        );
        match err {
            Some(e) => Err(e),
            None => Ok(q.value),
        }
    }

    /// `P(N_t = n, T > t)`, from the decomposition of the contour at level `t`
    /// into independent pieces.
    pub fn survival_pmf(&self, n: u64, t: f64) -> Result<f64> {
        Ok(self.survival_factors(t)?.pmf(n))
    }

    /// Factors of `P(N_t = n, T > t)` for all `n` at once.
    pub fn survival_factors(&self, t: f64) -> Result<SurvivalFactors> {
        if !(t > 0.0) {
            return Err(domain(format!("time must be positive, got {t}")));
        }
        let table = &self.table;
        let law = self.measure().lifetime();
        let wt = table.w(t)?;
        let none = against_lifetime(law, t, |s| table.w(t - s).map(|w| w / wt))?;
        let first = against_lifetime(law, t, |s| if s > 0.0 { table.upcross_lt(s, t) } else { Ok(0.0) })? + law.tail(t);
        let middle = table.upcross_lt(t, t)?;
        Ok(SurvivalFactors { none, first, middle, last: 1.0 / wt })
    }
}

/// `P(N_t = 0, T > t) = none`, and for `n ≥ 1`
/// `P(N_t = n, T > t) = first · middle^{n−1} · last`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalFactors {
    pub none: f64,
    /// Reaching `t` from the root's death date before 0, discounted by the clocks.
    pub first: f64,
    /// Returning above `t` from `t` before 0, discounted.
    pub middle: f64,
    /// Going from `t` down to 0 without returning above `t`, discounted.
    pub last: f64,
}

impl SurvivalFactors {
    pub fn pmf(&self, n: u64) -> f64 {
        if n == 0 {
            self.none
        } else {
            self.first * self.middle.powf(n as f64 - 1.0) * self.last
        }
    }
}

fn check_count(n: u64) -> Result<()> {
    if n == 0 {
        Err(domain("carrier count must be at least 1 on detection"))
    } else {
        Ok(())
    }
}

const STIELTJES_PIECES: usize = 2000;

/// `∫_{[0,t)} g(s) μ(ds)` for a continuous `g`, by trapezoidal Riemann–Stieltjes
/// sums on the lifetime distribution function, with atoms as grid points.
pub fn against_lifetime<F>(law: &LifetimeLaw, t: f64, mut g: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut points: Vec<f64> = (0..=STIELTJES_PIECES).map(|k| t * k as f64 / STIELTJES_PIECES as f64).collect();
    for atom in law.atoms() {
        if atom > 0.0 && atom < t {
            points.push(atom);
            // the jump of the distribution function is charged to [a − ε, a]
            points.push(atom * (1.0 - 1e-12));
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    // mass strictly below t, so the right end uses the left limit
    let cdf = |x: f64, last: bool| {
        if last {
            1.0 - law_tail_left(law, x)
        } else {
            1.0 - law.tail(x)
        }
    };
    let mut total = 0.0;
    let mut g_prev = g(points[0])?;
    let mut f_prev = cdf(points[0], false);
    for (i, &x) in points.iter().enumerate().skip(1) {
        let last = i == points.len() - 1;
        let gx = g(x)?;
        let fx = cdf(x, last);
        total += 0.5 * (g_prev + gx) * (fx - f_prev);
        g_prev = gx;
        f_prev = fx;
    }
    Ok(total)
}

fn law_tail_left(law: &LifetimeLaw, x: f64) -> f64 {
    law.tail(x * (1.0 - 1e-14))
}

/// Laws of the population at a fixed time `t`, from `W = W^(0)`.
#[derive(Debug, Clone)]
pub struct FixedTimeLaw {
    table: ScaleTable,
}

impl FixedTimeLaw {
    pub fn new(exponent: &LaplaceExponent, step: f64, x_max: f64) -> Result<Self> {
        Ok(FixedTimeLaw { table: ScaleTable::build(exponent, 0.0, step, x_max)? })
    }

    pub fn table(&self) -> &ScaleTable {
        &self.table
    }

    /// `P(N_t = 0) = ∫ μ(ds) W(t − s)/W(t)`.
    pub fn extinct_by(&self, t: f64) -> Result<f64> {
        let wt = self.table.w(t)?;
        against_lifetime(self.table.measure().lifetime(), t, |s| self.table.w(t - s).map(|w| w / wt))
    }

    /// `P(N_t = n | N_t ≠ 0) = (1 − 1/W(t))^{n−1} / W(t)`.
    pub fn pmf_given_alive(&self, n: u64, t: f64) -> Result<f64> {
        if n == 0 {
            return Err(domain("count must be at least 1 given survival"));
        }
        let inv = 1.0 / self.table.w(t)?;
        Ok(inv * (1.0 - inv).powf(n as f64 - 1.0))
    }

    /// `P(N_t = n)`.
    pub fn pmf(&self, n: u64, t: f64) -> Result<f64> {
        let zero = self.extinct_by(t)?;
        if n == 0 {
            Ok(zero)
        } else {
            Ok((1.0 - zero) * self.pmf_given_alive(n, t)?)
        }
    }
}
