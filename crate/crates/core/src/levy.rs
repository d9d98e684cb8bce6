//! Lifespan measures `π = b·μ`, the Laplace exponent `ψ` of the compound
//! Poisson process with slope −1 and jump measure `π`, its largest root `η`
//! and the inverse `φ` of `ψ` on `[η, ∞)`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{config, Error, Result};
use crate::numeric::{self, integrate, integrate_to_infinity};

const QUAD_ABS: f64 = 1e-10;
const QUAD_REL: f64 = 1e-12;
const ROOT_TOL: f64 = 1e-12;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Lifetime law given by a tail function `x ↦ P(L > x)`, optionally with a
/// density. The tail must decrease from 1 to `infinite_mass`.
#[derive(Clone)]
pub struct CustomLaw {
    label: String,
    tail: RealFn,
    density: Option<RealFn>,
    infinite_mass: f64,
}

impl CustomLaw {
    pub fn new(label: impl Into<String>, tail: RealFn, density: Option<RealFn>, infinite_mass: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&infinite_mass) {
            return Err(config(format!("mass at infinity must lie in [0, 1), got {infinite_mass}")));
        }
        let t0 = tail(0.0);
        if (t0 - 1.0).abs() > 1e-12 {
            return Err(config(format!("tail at 0 must equal 1, got {t0}")));
        }
        Ok(CustomLaw { label: label.into(), tail, density, infinite_mass })
    }
}

/// Piecewise-constant right-continuous tail: `P(L > x) = tails[k]` for
/// `x ∈ [xs[k], xs[k+1])`, and 1 below `xs[0]`. The last tail value is the
/// mass at infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct TailTable {
    xs: Vec<f64>,
    tails: Vec<f64>,
}

impl TailTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let mut xs = Vec::with_capacity(points.len());
        let mut tails = Vec::with_capacity(points.len());
        let mut prev_x = 0.0;
        let mut prev_tail = 1.0;
        for (x, tail) in points {
            if !x.is_finite() || !tail.is_finite() {
                return Err(config("tail table entries must be finite"));
            }
            if x == 0.0 && tail == 1.0 && xs.is_empty() {
                continue;
            }
            if x <= prev_x {
                return Err(config(format!("tail table abscissae must be positive and increasing (at x = {x})")));
            }
            if !(0.0..=prev_tail).contains(&tail) {
                return Err(config(format!("tail table values must decrease within [0, 1] (at x = {x})")));
            }
            xs.push(x);
            tails.push(tail);
            prev_x = x;
            prev_tail = tail;
        }
        if xs.is_empty() {
            return Err(config("tail table is empty"));
        }
        if tails[tails.len() - 1] >= 1.0 {
            return Err(config("tail table puts all its mass at infinity"));
        }
        Ok(TailTable { xs, tails })
    }

    /// Reads `x,tail` rows; a header line is tolerated.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(source) => Error::Read { path: path.to_path_buf(), source },
                other => config(format!("{}: {other:?}", path.display())),
            })?;
        let mut points = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() < 2 {
                return Err(config(format!("{}: row {} needs two columns", path.display(), i + 1)));
            }
            match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
                (Ok(x), Ok(t)) => points.push((x, t)),
                _ if i == 0 => continue,
                _ => return Err(config(format!("{}: row {} is not numeric", path.display(), i + 1))),
            }
        }
        Self::new(points)
    }

    fn tail(&self, x: f64) -> f64 {
        // number of abscissae <= x
        let k = self.xs.partition_point(|&xk| xk <= x);
        if k == 0 {
            1.0
        } else {
            self.tails[k - 1]
        }
    }

    fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mut prev = 1.0;
        self.xs.iter().zip(&self.tails).map(move |(&x, &t)| {
            let mass = prev - t;
            prev = t;
            (x, mass)
        })
    }

    fn infinite_mass(&self) -> f64 {
        self.tails[self.tails.len() - 1]
    }

    fn integral(&self, lo: f64, hi: f64) -> f64 {
        // ∫_lo^hi P(L > x) dx for a step function
        let mut total = 0.0;
        let mut left = lo;
        let mut k = self.xs.partition_point(|&xk| xk <= lo);
        while left < hi {
            let right = if k < self.xs.len() { self.xs[k].min(hi) } else { hi };
            let level = if k == 0 { 1.0 } else { self.tails[k - 1] };
            total += level * (right - left);
            left = right;
            k += 1;
        }
        total
    }
}

#[derive(Clone)]
pub enum LifetimeLaw {
    Exponential { rate: f64 },
    Custom(CustomLaw),
    Table(TailTable),
}

impl fmt::Debug for LifetimeLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl LifetimeLaw {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(config(format!("exponential rate must be positive, got {rate}")));
        }
        Ok(LifetimeLaw::Exponential { rate })
    }

    /// Parses `exp:<rate>` or `table:<path>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, arg) = spec
            .split_once(':')
            .ok_or_else(|| config(format!("lifetime spec `{spec}` must look like exp:<rate> or table:<path>")))?;
        match kind.trim() {
            "exp" => {
                let rate = arg
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| config(format!("bad exponential rate `{arg}`")))?;
                Self::exponential(rate)
            }
            "table" => Ok(LifetimeLaw::Table(TailTable::from_csv(Path::new(arg.trim()))?)),
            other => Err(config(format!("unknown lifetime family `{other}`"))),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            LifetimeLaw::Exponential { rate } => format!("exp:{rate}"),
            LifetimeLaw::Custom(c) => format!("custom:{}", c.label),
            LifetimeLaw::Table(t) => format!("table:{} rows", t.xs.len()),
        }
    }

    /// `P(L > x)`, including the mass at infinity.
    pub fn tail(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match self {
            LifetimeLaw::Exponential { rate } => (-rate * x).exp(),
            LifetimeLaw::Custom(c) => (c.tail)(x),
            LifetimeLaw::Table(t) => t.tail(x),
        }
    }

    pub fn density(&self, x: f64) -> Option<f64> {
        if x < 0.0 {
            return Some(0.0);
        }
        match self {
            LifetimeLaw::Exponential { rate } => Some(rate * (-rate * x).exp()),
            LifetimeLaw::Custom(c) => c.density.as_ref().map(|d| d(x)),
            LifetimeLaw::Table(_) => None,
        }
    }

    pub fn has_density(&self) -> bool {
        match self {
            LifetimeLaw::Exponential { .. } => true,
            LifetimeLaw::Custom(c) => c.density.is_some(),
            LifetimeLaw::Table(_) => false,
        }
    }

    pub fn infinite_mass(&self) -> f64 {
        match self {
            LifetimeLaw::Exponential { .. } => 0.0,
            LifetimeLaw::Custom(c) => c.infinite_mass,
            LifetimeLaw::Table(t) => t.infinite_mass(),
        }
    }

    /// Locations of finite atoms (jump points of the tail).
    pub fn atoms(&self) -> Vec<f64> {
        match self {
            LifetimeLaw::Table(t) => t.atoms().filter(|a| a.1 > 0.0).map(|a| a.0).collect(),
            _ => Vec::new(),
        }
    }

    /// Finite atoms with their masses.
    pub fn atom_masses(&self) -> Vec<(f64, f64)> {
        match self {
            LifetimeLaw::Table(t) => t.atoms().filter(|a| a.1 > 0.0).collect(),
            _ => Vec::new(),
        }
    }

    /// `E[L]`; infinite when there is mass at infinity or the tail is not integrable.
    pub fn mean(&self) -> f64 {
        if self.infinite_mass() > 0.0 {
            return f64::INFINITY;
        }
        match self {
            LifetimeLaw::Exponential { rate } => 1.0 / rate,
            LifetimeLaw::Table(t) => t.atoms().map(|(x, m)| x * m).sum(),
            LifetimeLaw::Custom(c) => {
                let q = integrate_to_infinity(|x| (c.tail)(x), 0.0, QUAD_ABS, QUAD_REL);
                if q.converged {
                    q.value
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `∫_lo^hi P(L > x) dx`.
    pub fn tail_integral(&self, lo: f64, hi: f64) -> f64 {
        match self {
            LifetimeLaw::Exponential { rate } => ((-rate * lo).exp() - (-rate * hi).exp()) / rate,
            LifetimeLaw::Table(t) => t.integral(lo, hi),
            LifetimeLaw::Custom(c) => integrate(|x| (c.tail)(x), lo, hi, QUAD_ABS * (hi - lo), QUAD_REL).value,
        }
    }

    /// `∫_0^∞ e^{-a x} P(L > x) dx` for `a > 0`.
    pub fn tail_transform(&self, a: f64) -> f64 {
        match self {
            LifetimeLaw::Exponential { rate } => 1.0 / (a + rate),
            LifetimeLaw::Table(t) => {
                let mut total = 0.0;
                let mut left = 0.0;
                let mut level = 1.0;
                for (&x, &tail) in t.xs.iter().zip(&t.tails) {
                    total += level * ((-a * left).exp() - (-a * x).exp()) / a;
                    left = x;
                    level = tail;
                }
                total + level * (-a * left).exp() / a
            }
            LifetimeLaw::Custom(c) => {
                integrate_to_infinity(|x| (-a * x).exp() * (c.tail)(x), 0.0, QUAD_ABS, QUAD_REL).value
            }
        }
    }

    /// `E[L e^{-a L}; L < ∞]` for `a > 0`.
    pub fn weighted_transform(&self, a: f64) -> f64 {
        match self {
            LifetimeLaw::Exponential { rate } => rate / ((a + rate) * (a + rate)),
            LifetimeLaw::Table(t) => t.atoms().map(|(x, m)| m * x * (-a * x).exp()).sum(),
            LifetimeLaw::Custom(c) => {
                // E[L e^{-aL}] = ∫ (1 - a x) e^{-a x} (S(x) - S(∞)) dx
                let inf = c.infinite_mass;
                integrate_to_infinity(
                    |x| (1.0 - a * x) * (-a * x).exp() * ((c.tail)(x) - inf),
                    0.0,
                    QUAD_ABS,
                    QUAD_REL,
                )
                .value
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            LifetimeLaw::Exponential { rate } => rng.sample::<f64, _>(Exp1) / rate,
            LifetimeLaw::Table(t) => {
                let u: f64 = rng.random();
                let k = t.tails.iter().position(|&tail| tail <= u);
                k.map_or(f64::INFINITY, |k| t.xs[k])
            }
            LifetimeLaw::Custom(c) => {
                let u: f64 = rng.random();
                if u < c.infinite_mass {
                    return f64::INFINITY;
                }
                let mut hi = 1.0;
                while (c.tail)(hi) > u {
                    hi *= 2.0;
                    if hi > 1e300 {
                        return f64::INFINITY;
                    }
                }
                numeric::bisect(|x| u - (c.tail)(x), 0.0, hi, 1e-14 * hi)
            }
        }
    }
}

/// `π = b·μ`: birth rate times lifetime law.
#[derive(Debug, Clone)]
pub struct LifespanMeasure {
    birth_rate: f64,
    lifetime: LifetimeLaw,
}

impl LifespanMeasure {
    pub fn new(birth_rate: f64, lifetime: LifetimeLaw) -> Result<Self> {
        if !(birth_rate >= 0.0 && birth_rate.is_finite()) {
            return Err(config(format!("birth rate must be finite and nonnegative, got {birth_rate}")));
        }
        Ok(LifespanMeasure { birth_rate, lifetime })
    }

    pub fn exponential(birth_rate: f64, death_rate: f64) -> Result<Self> {
        Self::new(birth_rate, LifetimeLaw::exponential(death_rate)?)
    }

    pub fn birth_rate(&self) -> f64 {
        self.birth_rate
    }

    pub fn lifetime(&self) -> &LifetimeLaw {
        &self.lifetime
    }

    /// `π̄(x) = π((x, ∞])`; equals `b` at 0.
    pub fn tail(&self, x: f64) -> f64 {
        self.birth_rate * self.lifetime.tail(x)
    }

    /// Lebesgue density of `π` at `x`, when it has one.
    pub fn density(&self, x: f64) -> Option<f64> {
        self.lifetime.density(x).map(|f| self.birth_rate * f)
    }

    /// `π({∞})`, the killing rate.
    pub fn killing_rate(&self) -> f64 {
        self.birth_rate * self.lifetime.infinite_mass()
    }

    pub fn mean_lifetime(&self) -> f64 {
        self.lifetime.mean()
    }
}

/// `ψ(a) = a − ∫ π(dx)(1 − e^{−a x})` together with its largest root.
#[derive(Debug, Clone)]
pub struct LaplaceExponent {
    measure: LifespanMeasure,
    eta: f64,
}

impl LaplaceExponent {
    pub fn new(measure: LifespanMeasure) -> Self {
        let mut exponent = LaplaceExponent { measure, eta: 0.0 };
        exponent.eta = exponent.find_eta();
        exponent
    }

    pub fn measure(&self) -> &LifespanMeasure {
        &self.measure
    }

    /// `ψ(a)`; `ψ(0) = −π({∞})`.
    pub fn psi(&self, a: f64) -> f64 {
        let b = self.measure.birth_rate;
        if a <= 0.0 {
            return -self.measure.killing_rate();
        }
        let law = &self.measure.lifetime;
        match law {
            LifetimeLaw::Exponential { rate } => a - b * a / (a + rate),
            LifetimeLaw::Table(t) => {
                let finite: f64 = t.atoms().map(|(x, m)| m * (-(-a * x).exp_m1())).sum();
                a - b * (finite + t.infinite_mass())
            }
            LifetimeLaw::Custom(_) => a - b * a * law.tail_transform(a),
        }
    }

    /// `ψ'(a)` for `a > 0`.
    pub fn psi_prime(&self, a: f64) -> f64 {
        1.0 - self.measure.birth_rate * self.measure.lifetime.weighted_transform(a)
    }

    /// Largest root of `ψ`.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    fn find_eta(&self) -> f64 {
        let b = self.measure.birth_rate;
        if b == 0.0 {
            return 0.0;
        }
        let mut hi = 1.0;
        while self.psi(hi) <= 0.0 {
            hi *= 2.0;
        }
        let lo = if self.measure.killing_rate() > 0.0 {
            0.0
        } else {
            if 1.0 - b * self.measure.mean_lifetime() >= 0.0 {
                return 0.0;
            }
            // ψ'(0+) < 0: walk towards 0 until ψ turns negative
            let mut lo = 0.5 * hi;
            let mut found = false;
            for _ in 0..1100 {
                if self.psi(lo) < 0.0 {
                    found = true;
                    break;
                }
                lo *= 0.5;
            }
            if !found {
                return 0.0;
            }
            lo
        };
        numeric::bisect(|a| self.psi(a), lo, hi, ROOT_TOL)
    }

    /// The unique `a ≥ η` with `ψ(a) = q`.
    pub fn phi(&self, q: f64) -> Result<f64> {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(Error::Domain(format!("phi needs q >= 0, got {q}")));
        }
        if q == 0.0 {
            return Ok(self.eta);
        }
        let lo = self.eta;
        // ψ(a) ≥ a − b
        let hi = lo.max(q + self.measure.birth_rate + 1.0);
        Ok(numeric::newton_bracketed(
            |a| self.psi(a) - q,
            |a| self.psi_prime(a),
            lo,
            hi,
            1e-15,
        ))
    }

    /// `ψ(a)` through adaptive quadrature of the defining integral, against
    /// the density of `π` when it has one and against its tail otherwise.
    pub fn psi_by_quadrature(&self, a: f64) -> f64 {
        if a <= 0.0 {
            return -self.measure.killing_rate();
        }
        let law = &self.measure.lifetime;
        let b = self.measure.birth_rate;
        let killed = law.infinite_mass();
        let jumps = if law.has_density() {
            integrate_to_infinity(
                |x| law.density(x).unwrap_or(0.0) * (-(-a * x).exp_m1()),
                0.0,
                QUAD_ABS,
                QUAD_REL,
            )
            .value
        } else if let LifetimeLaw::Table(t) = law {
            t.atoms().map(|(x, m)| m * (1.0 - (-a * x).exp())).sum()
        } else {
            integrate_to_infinity(|x| a * (-a * x).exp() * (law.tail(x) - killed), 0.0, QUAD_ABS, QUAD_REL).value
        };
        a - b * (jumps + killed)
    }
}
