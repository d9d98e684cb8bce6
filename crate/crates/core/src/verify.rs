//! Monte Carlo batteries comparing the tree simulator with the Lévy-side
//! construction and with the closed-form laws.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::excursion::build_killed_reflected;
use crate::laws::DetectionLaw;
use crate::levy::{LaplaceExponent, LifespanMeasure};
use crate::rng::run_replicates;
use crate::scale::{default_horizon, DEFAULT_STEP};
use crate::stats::{self, TestResult};
use crate::tree::{decompose_contour, simulate_tree, Caps, DetectionOutcome};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub statistic: f64,
    /// p-value for hypothesis tests, absent for z-score checks.
    pub p_value: Option<f64>,
    /// Significance level for tests, largest allowed |z| otherwise.
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn test(name: impl Into<String>, r: TestResult, alpha: f64) -> Self {
        Check { name: name.into(), statistic: r.statistic, p_value: Some(r.p_value), threshold: alpha, pass: r.passes(alpha) }
    }

    pub fn z_score(name: impl Into<String>, z: f64, limit: f64) -> Self {
        Check { name: name.into(), statistic: z, p_value: None, threshold: limit, pass: z.abs() <= limit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub battery: String,
    pub seed: u64,
    pub replicates: u64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Report {
    fn new(battery: &str, seed: u64, replicates: u64, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Report { schema_version: REPORT_SCHEMA_VERSION, battery: battery.into(), seed, replicates, checks, pass }
    }
}

#[derive(Debug, Clone)]
pub struct Battery {
    pub measure: LifespanMeasure,
    pub delta: f64,
    pub replicates: u64,
    pub seed: u64,
    pub alpha: f64,
    pub caps: Caps,
}

/// Tree-side sample conditioned on detection.
#[derive(Debug, Clone, Default)]
pub struct DetectionSample {
    pub trials: u64,
    pub capped: u64,
    pub counts: Vec<u64>,
    pub times: Vec<f64>,
    pub ages: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl DetectionSample {
    pub fn detected(&self) -> u64 {
        self.counts.len() as u64
    }

    /// Histogram of counts, index `n − 1` holding `n`.
    pub fn count_histogram(&self) -> Vec<u64> {
        histogram(&self.counts)
    }
}

pub fn histogram(values: &[u64]) -> Vec<u64> {
    let top = values.iter().copied().max().unwrap_or(0) as usize;
    let mut h = vec![0u64; top.max(1)];
    for &v in values {
        h[v as usize - 1] += 1;
    }
    h
}

/// Runs `replicates` trees from stream `seed`.
pub fn sample_trees(measure: &LifespanMeasure, delta: f64, replicates: u64, seed: u64, caps: Caps) -> Result<DetectionSample> {
    let outcomes: Vec<Result<DetectionOutcome>> =
        run_replicates(seed, 0, replicates, |_, rng| simulate_tree(measure, delta, rng, caps).map(|(_, o)| o));
    let mut s = DetectionSample { trials: replicates, ..Default::default() };
    for o in outcomes {
        let o = o?;
        if o.status.is_capped() {
            s.capped += 1;
        }
        if o.detected() {
            s.counts.push(o.size() as u64);
            s.times.push(o.time);
            s.ages.extend(o.carriers.iter().map(|c| c.age));
            s.residuals.extend(o.carriers.iter().map(|c| c.residual));
        }
    }
    Ok(s)
}

/// Lévy-side sample: completed excursion count `M`, `−I_M` and the
/// undershoots of the shifted path at level `−I_M`, on `{M ≠ 0}`.
#[derive(Debug, Clone, Default)]
pub struct KilledPathSample {
    pub trials: u64,
    pub counts: Vec<u64>,
    pub depths: Vec<f64>,
    pub undershoots: Vec<f64>,
    pub overshoots: Vec<f64>,
}

pub fn sample_killed_paths(measure: &LifespanMeasure, delta: f64, replicates: u64, seed: u64) -> Result<KilledPathSample> {
    let runs: Vec<Result<Option<(u64, f64, Vec<(f64, f64)>)>>> = run_replicates(seed, 0, replicates, |_, rng| {
        let k = build_killed_reflected(measure, delta, rng)?;
        let Some(ver) = k.vervaat()? else {
            return Ok(None);
        };
        let depth = -k.infimum();
        let shifted = crate::path::JccpPath::new(
            ver.path.origin(),
            ver.path.jumps().to_vec(),
            ver.path.lifetime(),
            ver.path.terminal(),
            Some(depth),
        )?;
        let pieces = decompose_contour(&shifted, depth)?;
        let shoots = pieces.iter().filter_map(|p| Some((p.undershoot?, p.overshoot?))).collect();
        Ok(Some((k.count() as u64, depth, shoots)))
    });
    let mut s = KilledPathSample { trials: replicates, ..Default::default() };
    for r in runs {
        if let Some((m, depth, shoots)) = r? {
            s.counts.push(m);
            s.depths.push(depth);
            for (u, o) in shoots {
                s.undershoots.push(u);
                s.overshoots.push(o);
            }
        }
    }
    Ok(s)
}

/// Tree side against the shifted killed path: counts, depth and ages.
pub fn vervaat_battery(b: &Battery) -> Result<Report> {
    let trees = sample_trees(&b.measure, b.delta, b.replicates, b.seed, b.caps)?;
    let paths = sample_killed_paths(&b.measure, b.delta, b.replicates, b.seed.wrapping_add(1))?;
    let alpha = b.alpha / 3.0;
    let checks = vec![
        Check::test("count_vs_excursions", stats::chi_square_homogeneity(&trees.count_histogram(), &histogram(&paths.counts)), alpha),
        Check::test("time_vs_depth", stats::ks_two_sample(&trees.times, &paths.depths), alpha),
        Check::test("ages_vs_undershoots", stats::ks_two_sample(&trees.ages, &paths.undershoots), alpha),
    ];
    Ok(Report::new("vervaat", b.seed, b.replicates, checks))
}

/// Tree side against the closed-form laws.
pub fn laws_battery(b: &Battery) -> Result<Report> {
    let exponent = LaplaceExponent::new(b.measure.clone());
    let x_max = default_horizon(&exponent).max(4.0);
    let law = DetectionLaw::new(&exponent, b.delta, DEFAULT_STEP, x_max)?;
    let trees = sample_trees(&b.measure, b.delta, b.replicates, b.seed, b.caps)?;
    let mut checks = Vec::new();

    let hist = trees.count_histogram();
    let mut probs: Vec<f64> = (1..=hist.len() as u64).map(|n| law.pmf_nt_given_detection(n)).collect::<Result<_>>()?;
    let covered: f64 = probs.iter().sum();
    if let Some(last) = probs.last_mut() {
        *last += 1.0 - covered;
    }
    checks.push(Check::test("count_geometric", stats::chi_square_gof(&hist, &probs), b.alpha));
    checks.push(Check::z_score(
        "detection_frequency",
        stats::binomial_z(trees.detected(), trees.trials, law.detection_probability()),
        3.0,
    ));
    for y in [0.5, 1.0, 2.0] {
        let hits = trees.times.iter().filter(|&&t| t < y).count() as u64;
        checks.push(Check::z_score(format!("time_cdf_{y}"), stats::binomial_z(hits, trees.trials, law.cdf_t(y)?), 3.0));
    }
    let inf = f64::INFINITY;
    let age_cdf = |a: f64| law.age_residual_mass(inf, 0.0, a, 0.0, inf).unwrap_or(f64::NAN);
    let residual_cdf = |r: f64| 1.0 - law.age_residual_mass(inf, 0.0, inf, r, inf).unwrap_or(f64::NAN);
    let tests = 4.0;
    checks[0].threshold = b.alpha / tests;
    checks[0].pass = checks[0].p_value.is_some_and(|p| p >= b.alpha / tests);
    let ages = thin(&trees.ages, 10_000);
    checks.push(Check::test("ages", stats::ks_one_sample(&ages, age_cdf), b.alpha / tests));
    let residuals = thin(&trees.residuals, 10_000);
    checks.push(Check::test("residuals", stats::ks_one_sample(&residuals, residual_cdf), b.alpha / tests));
    let (xs, ys): (Vec<f64>, Vec<f64>) = {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut k = 0;
        for &count in &trees.counts {
            // first carrier of each outbreak, carriers are already shuffled
            xs.push(count as f64);
            ys.push(trees.ages[k]);
            k += count as usize;
        }
        (xs, ys)
    };
    let corr = stats::pearson(&xs, &ys);
    checks.push(Check::z_score("count_age_correlation", corr * (xs.len() as f64).sqrt(), 3.0));
    let residuals = thin(&trees.residuals, 10_000);
    let corr = stats::pearson(&ages, &residuals);
    checks.push(Check::z_score("age_residual_correlation", corr * (ages.len() as f64).sqrt(), 3.0));
    Ok(Report::new("laws", b.seed, b.replicates, checks))
}

/// Evenly spaced subsample of at most `max` values, keeping order.
pub fn thin(values: &[f64], max: usize) -> Vec<f64> {
    if values.len() <= max {
        return values.to_vec();
    }
    let stride = values.len() as f64 / max as f64;
    (0..max).map(|i| values[(i as f64 * stride) as usize]).collect()
}
