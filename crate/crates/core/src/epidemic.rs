//! Hospital outbreak model: patients stay for i.i.d. durations `K`, carriers
//! infect at rate `b` while in hospital and each carrier is detected at rate
//! `δ`. An infected patient's stay is size-biased and the infection time is
//! uniform within it, so infective lifetimes have density `P(K > x)/E[K]`.
//!
//! Inference uses the outbreak sizes and, for every carrier, the time `H`
//! spent in hospital before detection.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::levy::{CustomLaw, LaplaceExponent, LifespanMeasure, LifetimeLaw};
use crate::numeric::{bisect, golden_section_max, integrate, integrate_to_infinity};
use crate::rng::run_replicates;
use crate::tree::{Caps, Carrier, LifetimeSampler, TreeSimulator};

pub const DATASET_SCHEMA_VERSION: u32 = 1;

/// Half-width of a 95% profile likelihood interval on the log scale.
pub const PROFILE_DROP: f64 = 1.920_729_410_347_062;

const G2_MIN: f64 = 1e-4;
const G2_MAX: f64 = 1e4;

/// Length-of-stay distribution `K`.
#[derive(Debug, Clone)]
pub struct StayDistribution {
    law: LifetimeLaw,
    mean: f64,
    // size-biased atoms (location, cumulative probability) for tables
    biased_atoms: Vec<(f64, f64)>,
}

/// Pre-infection stay `U` and infective lifetime `V` of one carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfectionPair {
    pub before: f64,
    pub lifetime: f64,
}

impl StayDistribution {
    pub fn new(law: LifetimeLaw) -> Result<Self> {
        if law.infinite_mass() > 0.0 {
            return Err(config("length of stay must be finite almost surely"));
        }
        let mean = law.mean();
        if !(mean.is_finite() && mean > 0.0) {
            return Err(config(format!("length of stay needs a finite positive mean, got {mean}")));
        }
        let mut biased_atoms = Vec::new();
        let mut acc = 0.0;
        for (x, mass) in law.atom_masses() {
            acc += x * mass / mean;
            biased_atoms.push((x, acc));
        }
        Ok(StayDistribution { law, mean, biased_atoms })
    }

    pub fn parse(spec: &str) -> Result<Self> {
        Self::new(LifetimeLaw::parse(spec)?)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(LifetimeLaw::exponential(rate)?)
    }

    pub fn law(&self) -> &LifetimeLaw {
        &self.law
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn tail(&self, x: f64) -> f64 {
        self.law.tail(x)
    }

    fn biased_tail(&self, z: f64) -> f64 {
        // P(Z > z) = (z P(K > z) + ∫_z^∞ P(K > x) dx) / m
        let rest = (self.mean - self.law.tail_integral(0.0, z)).max(0.0);
        ((z * self.law.tail(z) + rest) / self.mean).min(1.0)
    }

    /// Stay of an infected patient, size-biased: `P(Z ∈ dz) ∝ z P(K ∈ dz)`.
    pub fn sample_biased_stay<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.law {
            LifetimeLaw::Exponential { rate } => (rng.sample::<f64, _>(Exp1) + rng.sample::<f64, _>(Exp1)) / rate,
            LifetimeLaw::Table(_) => {
                let u: f64 = rng.random();
                let k = self.biased_atoms.partition_point(|&(_, c)| c <= u);
                self.biased_atoms[k.min(self.biased_atoms.len() - 1)].0
            }
            LifetimeLaw::Custom(_) => {
                let u: f64 = rng.random();
                let mut hi = self.mean.max(1e-300);
                while self.biased_tail(hi) > u {
                    hi *= 2.0;
                }
                bisect(|z| u - self.biased_tail(z), 0.0, hi, 1e-13 * hi)
            }
        }
    }

    /// Size-biased stay split uniformly into the time before and after infection.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> InfectionPair {
        let z = self.sample_biased_stay(rng);
        let before = z * rng.random::<f64>();
        InfectionPair { before, lifetime: z - before }
    }

    /// Law of the infective lifetime, `μ(dx) = P(K > x)dx / E[K]`.
    pub fn infection_lifetime(&self) -> Result<LifetimeLaw> {
        match &self.law {
            LifetimeLaw::Exponential { rate } => LifetimeLaw::exponential(*rate),
            law => {
                let (tail_law, density_law, m) = (law.clone(), law.clone(), self.mean);
                let tail = Arc::new(move |x: f64| ((m - tail_law.tail_integral(0.0, x)) / m).clamp(0.0, 1.0));
                let density = Arc::new(move |x: f64| density_law.tail(x) / m);
                Ok(LifetimeLaw::Custom(CustomLaw::new(
                    format!("stay-residual of {}", law.describe()),
                    tail,
                    Some(density),
                    0.0,
                )?))
            }
        }
    }

    /// `D(g) = ∫_0^∞ P(K > x)(1 − e^{−g x}) dx`.
    pub fn denominator(&self, g: f64) -> f64 {
        self.mean - self.law.tail_transform(g)
    }

    /// `D'(g) = ∫_0^∞ x e^{−g x} P(K > x) dx`.
    pub fn denominator_slope(&self, g: f64) -> f64 {
        match &self.law {
            LifetimeLaw::Exponential { rate } => 1.0 / ((g + rate) * (g + rate)),
            law => {
                let eps = 1e-5 * g;
                (law.tail_transform(g - eps) - law.tail_transform(g + eps)) / (2.0 * eps)
            }
        }
    }

    /// Density of `H` at `y` given the parameter `g2 = φ(δ)`.
    pub fn h_density(&self, g2: f64, y: f64) -> Result<f64> {
        check_g2(g2)?;
        if y <= 0.0 {
            return Ok(0.0);
        }
        Ok(self.tail(y) * -(-g2 * y).exp_m1() / self.denominator(g2))
    }

    /// `P(H <= y)`.
    pub fn h_cdf(&self, g2: f64, y: f64) -> Result<f64> {
        check_g2(g2)?;
        if y <= 0.0 {
            return Ok(0.0);
        }
        let num = match &self.law {
            LifetimeLaw::Exponential { rate } => {
                let nu = *rate;
                -(-nu * y).exp_m1() / nu + (-(nu + g2) * y).exp_m1() / (nu + g2)
            }
            law => integrate(|x| law.tail(x) * -(-g2 * x).exp_m1(), 0.0, y, 1e-13, 1e-11).value,
        };
        Ok((num / self.denominator(g2)).clamp(0.0, 1.0))
    }
}

fn check_g2(g2: f64) -> Result<()> {
    if g2 > 0.0 && g2.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("g2 must be positive and finite, got {g2}")))
    }
}

impl LifetimeSampler for StayDistribution {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, Option<f64>) {
        let pair = self.sample_pair(rng);
        (pair.lifetime, Some(pair.before))
    }
}

/// One observed outbreak: the time each carrier spent in hospital before detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outbreak {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hospital: Option<String>,
    pub durations: Vec<f64>,
}

impl Outbreak {
    pub fn size(&self) -> usize {
        self.durations.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutbreakDataset {
    pub outbreaks: Vec<Outbreak>,
}

#[derive(Debug, Deserialize)]
struct DatasetRow {
    #[serde(default)]
    schema_version: Option<u32>,
    outbreak_id: String,
    y: f64,
    #[serde(default)]
    hospital: Option<String>,
}

impl OutbreakDataset {
    pub fn new(outbreaks: Vec<Outbreak>) -> Result<Self> {
        let data = OutbreakDataset { outbreaks };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        for o in &self.outbreaks {
            if o.durations.is_empty() {
                return Err(Error::Integrity(format!("outbreak {} has no carriers", o.id)));
            }
            if let Some(y) = o.durations.iter().find(|y| !(**y > 0.0 && y.is_finite())) {
                return Err(Error::Integrity(format!("outbreak {} has a non-positive duration {y}", o.id)));
            }
        }
        Ok(())
    }

    /// Number of outbreaks `n`.
    pub fn count(&self) -> usize {
        self.outbreaks.len()
    }

    /// Number of carriers `s(n)`.
    pub fn carriers(&self) -> usize {
        self.outbreaks.iter().map(Outbreak::size).sum()
    }

    pub fn durations(&self) -> impl Iterator<Item = f64> + '_ {
        self.outbreaks.iter().flat_map(|o| o.durations.iter().copied())
    }

    /// Reads rows `[schema_version,]outbreak_id,y[,hospital]`, one per carrier.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut outbreaks: Vec<Outbreak> = Vec::new();
        for row in reader.deserialize::<DatasetRow>() {
            let row = row?;
            if let Some(v) = row.schema_version.filter(|&v| v != DATASET_SCHEMA_VERSION) {
                return Err(config(format!("dataset schema version {v} is not supported")));
            }
            let k = *index.entry(row.outbreak_id.clone()).or_insert_with(|| {
                outbreaks.push(Outbreak { id: row.outbreak_id.clone(), hospital: row.hospital.clone(), durations: Vec::new() });
                outbreaks.len() - 1
            });
            if outbreaks[k].hospital != row.hospital {
                return Err(Error::Integrity(format!("outbreak {} is listed under two hospitals", row.outbreak_id)));
            }
            outbreaks[k].durations.push(row.y);
        }
        Self::new(outbreaks)
    }

    pub fn to_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let with_hospital = self.outbreaks.iter().any(|o| o.hospital.is_some());
        let version = DATASET_SCHEMA_VERSION.to_string();
        if with_hospital {
            w.write_record(["schema_version", "outbreak_id", "y", "hospital"])?;
        } else {
            w.write_record(["schema_version", "outbreak_id", "y"])?;
        }
        for o in &self.outbreaks {
            for y in &o.durations {
                let y = format!("{y:?}");
                if with_hospital {
                    w.write_record([&version, o.id.as_str(), y.as_str(), o.hospital.as_deref().unwrap_or("")])?;
                } else {
                    w.write_record([&version, o.id.as_str(), y.as_str()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Splits by hospital label; outbreaks without one form their own group.
    pub fn by_hospital(&self) -> Vec<(Option<String>, OutbreakDataset)> {
        let mut groups: Vec<(Option<String>, OutbreakDataset)> = Vec::new();
        for o in &self.outbreaks {
            match groups.iter_mut().find(|(h, _)| *h == o.hospital) {
                Some((_, d)) => d.outbreaks.push(o.clone()),
                None => groups.push((o.hospital.clone(), OutbreakDataset { outbreaks: vec![o.clone()] })),
            }
        }
        groups
    }
}

/// Log-likelihood pieces that do not change between evaluations.
struct Likelihood<'a> {
    stay: &'a StayDistribution,
    n: f64,
    s: f64,
    durations: Vec<f64>,
    log_tails: f64,
}

impl<'a> Likelihood<'a> {
    fn new(data: &OutbreakDataset, stay: &'a StayDistribution) -> Result<Self> {
        if data.count() == 0 {
            return Err(Error::EmptyDataset("no outbreaks to fit".into()));
        }
        data.validate()?;
        let durations: Vec<f64> = data.durations().collect();
        let log_tails = durations.iter().map(|&y| stay.tail(y).ln()).sum();
        Ok(Likelihood { stay, n: data.count() as f64, s: data.carriers() as f64, durations, log_tails })
    }

    fn size_part(&self, g1: f64) -> f64 {
        let rest = self.s - self.n;
        let tail = if rest == 0.0 { 0.0 } else { rest * (1.0 - g1).ln() };
        self.n * g1.ln() + tail
    }

    fn duration_part(&self, g2: f64) -> f64 {
        let sum: f64 = self.durations.iter().map(|&y| (-(-g2 * y).exp_m1()).ln()).sum();
        sum + self.log_tails - self.durations.len() as f64 * self.stay.denominator(g2).ln()
    }

    fn duration_score(&self, g2: f64) -> f64 {
        let sum: f64 = self.durations.iter().map(|&y| y / (g2 * y).exp_m1()).sum();
        sum - self.durations.len() as f64 * self.stay.denominator_slope(g2) / self.stay.denominator(g2)
    }

    fn total(&self, g1: f64, g2: f64) -> f64 {
        self.size_part(g1) + self.duration_part(g2)
    }

    fn g1_hat(&self) -> f64 {
        self.n / self.s
    }

    fn b_of(&self, g1: f64, g2: f64) -> f64 {
        self.stay.mean() * g2 * (1.0 - g1) / self.stay.denominator(g2)
    }

    /// `max` over `log g2` in `[lo, hi]`, by a grid scan followed by golden section.
    fn maximise<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64, usize) {
        const GRID: usize = 48;
        let step = (hi - lo) / GRID as f64;
        let (mut best_k, mut best) = (0usize, f64::NEG_INFINITY);
        for k in 0..=GRID {
            let v = f(lo + k as f64 * step);
            if v > best {
                best = v;
                best_k = k;
            }
        }
        let a = lo + best_k.saturating_sub(1) as f64 * step;
        let b = (lo + (best_k + 1) as f64 * step).min(hi);
        let r = golden_section_max(&f, a, b, tol);
        if r.max >= best {
            (r.argmax, r.max, r.iterations)
        } else {
            (lo + best_k as f64 * step, best, r.iterations)
        }
    }

    fn g2_hat(&self) -> (f64, usize, usize) {
        let (lo, hi) = (G2_MIN.ln(), G2_MAX.ln());
        let (mut u, _, golden_iterations) = Self::maximise(|u| self.duration_part(u.exp()), lo, hi, 1e-6);
        let mut newton_iterations = 0;
        // Newton on the score in log g2, with a difference quotient for its slope
        for _ in 0..20 {
            let g = u.exp();
            let score = g * self.duration_score(g);
            let e = 1e-5;
            let slope = ((u + e).exp() * self.duration_score((u + e).exp())
                - (u - e).exp() * self.duration_score((u - e).exp()))
                / (2.0 * e);
            if !(slope < 0.0) {
                break;
            }
            let next = (u - score / slope).clamp(lo, hi);
            newton_iterations += 1;
            if self.duration_part(next.exp()) < self.duration_part(g) - 1e-9 {
                break;
            }
            let done = (next - u).abs() < 1e-8;
            u = next;
            if done {
                break;
            }
        }
        (u.exp(), golden_iterations, newton_iterations)
    }

    /// Profile of the log-likelihood along `δ = g1 g2`.
    fn profile_delta(&self, delta: f64) -> f64 {
        let lo = delta.max(G2_MIN).ln();
        let hi = G2_MAX.ln();
        if lo >= hi {
            return f64::NEG_INFINITY;
        }
        let f = |u: f64| {
            let g2 = u.exp();
            let g1 = (delta / g2).min(1.0);
            if g1 < 1.0 || self.s == self.n {
                self.total(g1, g2)
            } else {
                f64::NEG_INFINITY
            }
        };
        Self::maximise(f, lo + 1e-12, hi, 1e-7).1
    }

    /// Profile of the log-likelihood along `b = m g2 (1 − g1)/D(g2)`.
    fn profile_b(&self, b: f64) -> f64 {
        // g1 = 1 − b D(g2)/(m g2) must be positive; D(g)/g decreases in g
        let m = self.stay.mean();
        let ratio = |g: f64| b * self.stay.denominator(g) / (m * g);
        let (mut lo, hi) = (G2_MIN.ln(), G2_MAX.ln());
        if ratio(G2_MAX) >= 1.0 {
            return f64::NEG_INFINITY;
        }
        if ratio(G2_MIN) >= 1.0 {
            lo = bisect(|u| 1.0 - ratio(u.exp()), lo, hi, 1e-12);
        }
        let f = |u: f64| {
            let g2 = u.exp();
            let g1 = 1.0 - ratio(g2);
            if g1 > 0.0 {
                self.total(g1, g2)
            } else {
                f64::NEG_INFINITY
            }
        };
        Self::maximise(f, lo + 1e-9, hi, 1e-7).1
    }
}

/// Where the profile drops by [`PROFILE_DROP`] on each side of `centre`.
fn profile_interval<F: Fn(f64) -> f64>(profile: F, centre: f64, peak: f64) -> (f64, f64) {
    let target = peak - PROFILE_DROP;
    let below = |x: f64| profile(x) < target;
    let side = |factor: f64| {
        let mut inner = centre;
        let mut outer = centre * factor;
        let mut steps = 0;
        while !below(outer) {
            inner = outer;
            outer *= factor;
            steps += 1;
            if steps > 60 || outer <= 1e-12 || outer >= 1e12 {
                return if factor < 1.0 { 0.0 } else { f64::INFINITY };
            }
        }
        let (mut a, mut b) = (inner.ln(), outer.ln());
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if below(mid.exp()) {
                b = mid;
            } else {
                a = mid;
            }
            if (b - a).abs() < 1e-7 {
                break;
            }
        }
        (0.5 * (a + b)).exp()
    };
    (side(0.8), side(1.25))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Ok,
    /// Every outbreak has size 1: `ĝ1 = 1` and `b̂ = 0`.
    BoundaryG1,
    /// The duration likelihood peaks at the edge of the search range.
    NonIdentifiable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub golden_iterations: usize,
    pub newton_iterations: usize,
    /// Score of the duration likelihood in `log g2` at the optimum.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub status: FitStatus,
    pub outbreaks: usize,
    pub carriers: usize,
    pub g1_hat: f64,
    pub g2_hat: f64,
    pub b_hat: f64,
    pub delta_hat: f64,
    pub log_likelihood: f64,
    pub delta_interval: Option<Interval>,
    pub b_interval: Option<Interval>,
    pub diagnostics: Diagnostics,
}

/// `n log g1 + (s − n) log(1 − g1) + Σ log h(y)`.
pub fn log_likelihood(data: &OutbreakDataset, stay: &StayDistribution, g1: f64, g2: f64) -> Result<f64> {
    if !(g1 > 0.0 && g1 <= 1.0) {
        return Err(domain(format!("g1 must lie in (0, 1], got {g1}")));
    }
    check_g2(g2)?;
    Ok(Likelihood::new(data, stay)?.total(g1, g2))
}

pub struct FitOptions {
    pub intervals: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { intervals: true }
    }
}

/// Maximum-likelihood estimates of `(b, δ)` from outbreak data.
pub fn fit(data: &OutbreakDataset, stay: &StayDistribution, options: &FitOptions) -> Result<EstimationResult> {
    let lik = Likelihood::new(data, stay)?;
    let g1 = lik.g1_hat();
    let (g2, golden_iterations, newton_iterations) = lik.g2_hat();
    let score = g2 * lik.duration_score(g2);
    let at_edge = (g2.ln() - G2_MIN.ln()).abs() < 1e-3 || (g2.ln() - G2_MAX.ln()).abs() < 1e-3;
    let status = if at_edge {
        FitStatus::NonIdentifiable
    } else if lik.s == lik.n {
        FitStatus::BoundaryG1
    } else {
        FitStatus::Ok
    };
    let delta = g1 * g2;
    let b = lik.b_of(g1, g2);
    let peak = lik.total(g1, g2);
    let (delta_interval, b_interval) = if options.intervals && status == FitStatus::Ok {
        let (lo, hi) = profile_interval(|d| lik.profile_delta(d), delta, peak);
        let di = Interval { lower: lo, upper: hi };
        let (lo, hi) = profile_interval(|x| lik.profile_b(x), b, peak);
        (Some(di), Some(Interval { lower: lo, upper: hi }))
    } else {
        (None, None)
    };
    Ok(EstimationResult {
        status,
        outbreaks: data.count(),
        carriers: data.carriers(),
        g1_hat: g1,
        g2_hat: g2,
        b_hat: b,
        delta_hat: delta,
        log_likelihood: peak,
        delta_interval,
        b_interval,
        diagnostics: Diagnostics { golden_iterations, newton_iterations, score },
    })
}

/// Per-hospital fits and an inverse-variance pooled `δ̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledEstimate {
    pub hospitals: Vec<(Option<String>, EstimationResult)>,
    /// Solves `Σ w_h (δ − δ̂_h) = 0` with `w_h` the inverse squared
    /// profile-interval half-width of hospital `h`.
    pub delta_pooled: Option<f64>,
}

pub fn fit_per_hospital(data: &OutbreakDataset, stay: &StayDistribution) -> Result<PooledEstimate> {
    use rayon::prelude::*;
    let groups = data.by_hospital();
    let hospitals: Vec<(Option<String>, EstimationResult)> = groups
        .into_par_iter()
        .map(|(h, d)| fit(&d, stay, &FitOptions::default()).map(|r| (h, r)))
        .collect::<Result<_>>()?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (_, r) in &hospitals {
        if let Some(iv) = r.delta_interval {
            let half = 0.5 * (iv.upper - iv.lower);
            if half.is_finite() && half > 0.0 {
                let w = 1.0 / (half * half);
                num += w * r.delta_hat;
                den += w;
            }
        }
    }
    Ok(PooledEstimate { hospitals, delta_pooled: (den > 0.0).then(|| num / den) })
}

/// One simulated outbreak with its carriers.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedOutbreak {
    pub replicate: u64,
    pub time: f64,
    pub carriers: Vec<Carrier>,
}

impl SimulatedOutbreak {
    /// `H = U + A` for each carrier.
    pub fn durations(&self) -> Vec<f64> {
        self.carriers.iter().map(|c| c.mark.unwrap_or(0.0) + c.age).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutbreakSimulation {
    pub outbreaks: Vec<SimulatedOutbreak>,
    /// Trees simulated, detected or not.
    pub attempts: u64,
    pub capped: u64,
}

impl OutbreakSimulation {
    pub fn dataset(&self) -> OutbreakDataset {
        OutbreakDataset {
            outbreaks: self
                .outbreaks
                .iter()
                .map(|o| Outbreak { id: o.replicate.to_string(), hospital: None, durations: o.durations() })
                .collect(),
        }
    }
}

/// Lifespan measure of the hospital model.
pub fn infection_measure(stay: &StayDistribution, b: f64) -> Result<LifespanMeasure> {
    LifespanMeasure::new(b, stay.infection_lifetime()?)
}

/// Simulates trees until `count` are detected, in replicate order, using at
/// most `budget` trees.
pub fn simulate_outbreaks(
    stay: &StayDistribution,
    b: f64,
    delta: f64,
    count: usize,
    seed: u64,
    budget: u64,
    caps: Caps,
) -> Result<OutbreakSimulation> {
    if !(b > 0.0 && delta > 0.0) {
        return Err(config("birth and detection rates must be positive"));
    }
    let sim = TreeSimulator::new(b, stay)?.with_clock(delta)?.with_caps(caps)?;
    let mut outbreaks = Vec::with_capacity(count);
    let mut attempts = 0u64;
    let mut capped = 0u64;
    let batch = (count as u64 * 4).clamp(64, 1 << 16);
    while outbreaks.len() < count && attempts < budget {
        let size = batch.min(budget - attempts);
        let runs = run_replicates(seed, attempts, size, |i, rng| (i, sim.run(rng).1));
        for (i, out) in runs {
            attempts = i + 1;
            if out.status.is_capped() {
                capped += 1;
            }
            if out.detected() {
                outbreaks.push(SimulatedOutbreak { replicate: i, time: out.time, carriers: out.carriers });
                if outbreaks.len() == count {
                    break;
                }
            }
        }
    }
    if outbreaks.is_empty() && count > 0 {
        return Err(Error::EmptyDataset(format!("no outbreak detected in {attempts} simulated trees")));
    }
    Ok(OutbreakSimulation { outbreaks, attempts, capped })
}

/// Normalising constant of the joint law of `(U, A)`: equals 1 when the
/// parameters are consistent.
pub fn joint_law_mass(stay: &StayDistribution, b: f64, delta: f64) -> Result<f64> {
    let measure = infection_measure(stay, b)?;
    let phi = LaplaceExponent::new(measure).phi(delta)?;
    let m = stay.mean();
    // ∫∫∫ e^{−φa} 1{z ≥ u + a} du da P(K ∈ dz) = ∫ e^{−φa} ∫_{a}^∞ (z − a) P(K ∈ dz) da
    //   = ∫ e^{−φa} ∫_a^∞ P(K > x) dx da
    let inner = |a: f64| m - stay.law().tail_integral(0.0, a);
    let q = integrate_to_infinity(|a| (-phi * a).exp() * inner(a), 0.0, 1e-13, 1e-11);
    Ok(b / m * phi / (phi - delta) * q.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replicate_rng;

    fn data(sizes: &[usize]) -> OutbreakDataset {
        let outbreaks = sizes
            .iter()
            .enumerate()
            .map(|(i, &k)| Outbreak {
                id: i.to_string(),
                hospital: None,
                durations: (0..k).map(|j| 0.3 + 0.7 * ((i * 7 + j * 3) % 11) as f64 / 11.0).collect(),
            })
            .collect();
        OutbreakDataset::new(outbreaks).unwrap()
    }

    #[test]
    fn g1_is_outbreaks_over_carriers() {
        let stay = StayDistribution::exponential(1.0).unwrap();
        let r = fit(&data(&[1, 2, 2, 3]), &stay, &FitOptions { intervals: false }).unwrap();
        assert_eq!(r.g1_hat, 0.5);
        assert!((r.delta_hat - r.g1_hat * r.g2_hat).abs() < 1e-15);
        let expected_b = (1.0 - r.g1_hat) * (1.0 + r.g2_hat);
        assert!((r.b_hat - expected_b).abs() < 1e-10 * expected_b);
    }

    #[test]
    fn all_singletons_hit_the_boundary() {
        let stay = StayDistribution::exponential(1.0).unwrap();
        let r = fit(&data(&[1, 1, 1, 1, 1]), &stay, &FitOptions::default()).unwrap();
        assert_eq!(r.g1_hat, 1.0);
        assert_eq!(r.b_hat, 0.0);
        assert_eq!(r.status, FitStatus::BoundaryG1);
    }

    #[test]
    fn exponential_h_density_closed_form() {
        let stay = StayDistribution::exponential(1.5).unwrap();
        let (nu, g) = (1.5f64, 0.7f64);
        for y in [0.1f64, 1.0, 3.0] {
            let closed = (nu + g) * nu / g * (1.0 - (-g * y).exp()) * (-nu * y).exp();
            assert!((stay.h_density(g, y).unwrap() - closed).abs() < 1e-12);
        }
        let total = integrate_to_infinity(|y| stay.h_density(g, y).unwrap(), 0.0, 1e-12, 1e-10);
        assert!((total.value - 1.0).abs() < 1e-8);
        assert!((stay.h_cdf(g, 2.0).unwrap() - integrate(|y| stay.h_density(g, y).unwrap(), 0.0, 2.0, 1e-13, 1e-12).value).abs() < 1e-10);
        assert!(stay.h_density(g, 1e-12).unwrap() < 1e-10);
    }

    #[test]
    fn large_g2_tends_to_stay_residual_shape() {
        let table = crate::levy::TailTable::new(vec![(0.5, 0.6), (2.0, 0.2), (4.0, 0.0)]).unwrap();
        let stay = StayDistribution::new(LifetimeLaw::Table(table)).unwrap();
        for y in [0.2, 1.0, 3.0] {
            let limit = stay.tail(y) / stay.mean();
            assert!((stay.h_density(1e6, y).unwrap() - limit).abs() < 1e-4);
        }
    }

    #[test]
    fn likelihood_matches_product_of_densities() {
        let stay = StayDistribution::exponential(1.0).unwrap();
        let d = data(&[1, 3, 2, 5]);
        let (g1, g2): (f64, f64) = (0.4, 0.9);
        let mut direct = 1.0f64;
        for o in &d.outbreaks {
            direct *= g1 * (1.0 - g1).powi(o.size() as i32 - 1);
            for &y in &o.durations {
                direct *= stay.h_density(g2, y).unwrap();
            }
        }
        let ll = log_likelihood(&d, &stay, g1, g2).unwrap();
        assert!((ll - direct.ln()).abs() < 1e-10);
        let other = log_likelihood(&d, &stay, 0.7, g2).unwrap();
        let shift = log_likelihood(&d, &stay, 0.4, 2.0).unwrap() - log_likelihood(&d, &stay, 0.7, 2.0).unwrap();
        assert!((ll - other - shift).abs() < 1e-12);
        assert!(log_likelihood(&OutbreakDataset::default(), &stay, 0.5, 1.0).is_err());
    }

    #[test]
    fn rescaling_durations_rescales_g2() {
        let d = data(&[1, 3, 2, 5, 2, 2, 1, 4]);
        let c = 2.5;
        let scaled = OutbreakDataset::new(
            d.outbreaks
                .iter()
                .map(|o| Outbreak { durations: o.durations.iter().map(|y| y * c).collect(), ..o.clone() })
                .collect(),
        )
        .unwrap();
        let opts = FitOptions { intervals: false };
        let a = fit(&d, &StayDistribution::exponential(1.0).unwrap(), &opts).unwrap();
        let b = fit(&scaled, &StayDistribution::exponential(1.0 / c).unwrap(), &opts).unwrap();
        assert_eq!(a.g1_hat, b.g1_hat);
        assert!((a.g2_hat / c - b.g2_hat).abs() < 1e-6 * b.g2_hat);
    }

    #[test]
    fn size_biased_pairs() {
        let stay = StayDistribution::exponential(1.0).unwrap();
        let mut rng = replicate_rng(4, 0);
        let n = 20000;
        let pairs: Vec<InfectionPair> = (0..n).map(|_| stay.sample_pair(&mut rng)).collect();
        // E[Z] = E[K²]/E[K] = 2, Var Z = 2
        let mean_z = pairs.iter().map(|p| p.before + p.lifetime).sum::<f64>() / n as f64;
        assert!((mean_z - 2.0).abs() < 3.0 * (2.0f64 / n as f64).sqrt());
        let v: Vec<f64> = pairs.iter().map(|p| p.lifetime).collect();
        assert!(crate::stats::ks_one_sample(&v, |x| 1.0 - (-x).exp()).passes(0.001));

        let table = crate::levy::TailTable::new(vec![(2.0, 0.0)]).unwrap();
        let point = StayDistribution::new(LifetimeLaw::Table(table)).unwrap();
        for _ in 0..100 {
            let p = point.sample_pair(&mut rng);
            assert_eq!(p.before + p.lifetime, 2.0);
        }
    }

    #[test]
    fn non_exponential_stays_give_consistent_lifetime_laws() {
        let table = crate::levy::TailTable::new(vec![(0.5, 0.6), (2.0, 0.2), (4.0, 0.0)]).unwrap();
        let stay = StayDistribution::new(LifetimeLaw::Table(table)).unwrap();
        let law = stay.infection_lifetime().unwrap();
        assert!((law.tail(0.0) - 1.0).abs() < 1e-12);
        assert!(law.tail(4.0).abs() < 1e-12);
        let mut rng = replicate_rng(8, 0);
        let v: Vec<f64> = (0..5000).map(|_| stay.sample_pair(&mut rng).lifetime).collect();
        assert!(crate::stats::ks_one_sample(&v, |x| 1.0 - law.tail(x)).passes(0.001));
    }

    #[test]
    fn joint_law_is_normalised() {
        let stay = StayDistribution::exponential(1.0).unwrap();
        let mass = joint_law_mass(&stay, 0.8, 0.3).unwrap();
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
    }

    #[test]
    fn dataset_csv_round_trip() {
        let d = data(&[1, 3, 2]);
        let mut buf = Vec::new();
        d.to_csv(&mut buf).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, &buf).unwrap();
        let back = OutbreakDataset::from_csv(&path).unwrap();
        assert_eq!(back, d);
    }
}
