//! Goodness-of-fit and comparison tests used by the verification harness.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

impl TestResult {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// Upper tail of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_tail(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        // the alternating series converges slowly here; the tail is 1 to machine precision
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * x * x).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> TestResult {
    let xs = sorted(sample);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    TestResult { statistic: d, p_value: kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d) }
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestResult {
    let xs = sorted(a);
    let ys = sorted(b);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    TestResult { statistic: d, p_value: kolmogorov_tail((ne + 0.12 + 0.11 / ne) * d) }
}

fn chi_square_p(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

/// Merges adjacent cells, left to right, until every expected count is at
/// least `min_expected`.
fn merge_cells(observed: &[f64], expected: &[f64], min_expected: f64) -> (Vec<f64>, Vec<f64>) {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&oi, &ei) in observed.iter().zip(expected) {
        o += oi;
        e += ei;
        if e >= min_expected {
            obs.push(o);
            exp.push(e);
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match (obs.last_mut(), exp.last_mut()) {
            (Some(lo), Some(le)) => {
                *lo += o;
                *le += e;
            }
            _ => {
                obs.push(o);
                exp.push(e);
            }
        }
    }
    (obs, exp)
}

/// Pearson goodness of fit. `probabilities` cover all outcomes (the last
/// cell is usually a tail); cells with expected count below 5 are merged.
pub fn chi_square_gof(counts: &[u64], probabilities: &[f64]) -> TestResult {
    assert_eq!(counts.len(), probabilities.len(), "one probability per cell");
    let total: u64 = counts.iter().sum();
    let observed: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let expected: Vec<f64> = probabilities.iter().map(|&p| p * total as f64).collect();
    let (obs, exp) = merge_cells(&observed, &expected, 5.0);
    let stat: f64 = obs.iter().zip(&exp).map(|(o, e)| (o - e) * (o - e) / e).sum();
    TestResult { statistic: stat, p_value: chi_square_p(stat, obs.len().saturating_sub(1)) }
}

/// Pearson test that two count vectors come from the same distribution.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> TestResult {
    let len = a.len().max(b.len());
    let get = |v: &[u64], i: usize| v.get(i).copied().unwrap_or(0) as f64;
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let n = na + nb;
    // merge on pooled expected counts of the smaller sample
    let pooled: Vec<f64> = (0..len).map(|i| (get(a, i) + get(b, i)) * na.min(nb) / n).collect();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb, mut e) = (0.0, 0.0, 0.0);
    for i in 0..len {
        ca += get(a, i);
        cb += get(b, i);
        e += pooled[i];
        if e >= 5.0 {
            cells.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
            e = 0.0;
        }
    }
    if ca + cb > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += ca;
                last.1 += cb;
            }
            None => cells.push((ca, cb)),
        }
    }
    let mut stat = 0.0;
    for &(x, y) in &cells {
        let col = x + y;
        for (obs, row) in [(x, na), (y, nb)] {
            let exp = row * col / n;
            if exp > 0.0 {
                stat += (obs - exp) * (obs - exp) / exp;
            }
        }
    }
    TestResult { statistic: stat, p_value: chi_square_p(stat, cells.len().saturating_sub(1)) }
}

/// `|successes/trials − p| / σ` with `σ² = p(1−p)/trials`.
pub fn binomial_z(successes: u64, trials: u64, p: f64) -> f64 {
    let n = trials as f64;
    let sigma = (p * (1.0 - p) / n).sqrt();
    ((successes as f64 / n) - p).abs() / sigma
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    let v = sorted(xs);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Correlation of `values` with their position, calibrated by random
/// permutations: a small p-value indicates a trend along the sequence.
pub fn permutation_trend<R: Rng + ?Sized>(values: &[f64], permutations: usize, rng: &mut R) -> TestResult {
    let index: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
    let observed = pearson(&index, values).abs();
    let mut shuffled = values.to_vec();
    let mut exceed = 0usize;
    for _ in 0..permutations {
        shuffled.shuffle(rng);
        if pearson(&index, &shuffled).abs() >= observed {
            exceed += 1;
        }
    }
    TestResult { statistic: observed, p_value: (exceed + 1) as f64 / (permutations + 1) as f64 }
}
