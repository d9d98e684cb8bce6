//! Excursions of the slope −1 compound Poisson process below 0, the path
//! reflected below its supremum and killed by an exponential clock, and the
//! cyclic shift that turns it into a contour.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{config, domain, Error, Result};
use crate::levy::LifespanMeasure;
use crate::path::{JccpPath, Jump, Vervaat};

/// How a simulated excursion is stopped if it has not crossed 0 yet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Censor {
    /// Independent exponential clock of this rate along path time.
    Clock(f64),
    /// Fixed path time.
    At(f64),
    /// Hard path-time cap; reaching it leaves the excursion undecided.
    Cap(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcursionStatus {
    /// Jumped into `(0, ∞)`.
    Crossed,
    /// Jumped to `+∞`; the lifetime is infinite.
    InfiniteJump,
    /// Stopped by a clock or a fixed time before crossing.
    Censored,
    /// Stopped by the hard cap before crossing.
    Undecided,
}

/// Excursion from 0 killed upon entering `(0, +∞]`.
///
/// For a crossed excursion the path ends with the crossing jump at its
/// lifetime; otherwise it is the observed part up to the stopping time.
#[derive(Debug, Clone, PartialEq)]
pub struct Excursion {
    pub path: JccpPath,
    pub status: ExcursionStatus,
}

impl Excursion {
    pub fn crossed(&self) -> bool {
        self.status == ExcursionStatus::Crossed
    }

    /// `V`, infinite after a jump to `+∞`.
    pub fn lifetime(&self) -> f64 {
        match self.status {
            ExcursionStatus::InfiniteJump => f64::INFINITY,
            _ => self.path.lifetime(),
        }
    }

    /// Left limit at the crossing.
    pub fn undershoot(&self) -> Option<f64> {
        self.crossed().then(|| -self.path.terminal())
    }

    /// Value right after the crossing.
    pub fn overshoot(&self) -> Option<f64> {
        self.crossed().then(|| self.path.jumps().last().map_or(0.0, |j| j.after_raw))
    }

    /// `(ȷ, h)`: infimum and the time at whose left limit it is reached.
    pub fn infimum(&self) -> Result<(f64, f64)> {
        if !self.crossed() {
            return Err(domain("infimum of an excursion that never crossed 0 is not determined"));
        }
        self.path.infimum()
    }

    /// Pre-minimum and post-minimum pieces.
    pub fn split_at_min(&self) -> Result<(JccpPath, JccpPath)> {
        let (low, h) = self.infimum()?;
        let p = &self.path;
        let ceiling = p.ceiling();
        let pre: Vec<Jump> = p.jumps().iter().filter(|j| j.time < h).copied().collect();
        let post: Vec<Jump> = p
            .jumps()
            .iter()
            .filter(|j| j.time >= h)
            .map(|j| Jump { time: j.time - h, ..*j })
            .collect();
        let before = JccpPath::from_parts(p.origin(), pre, h, low, ceiling);
        let after = if h == p.lifetime() {
            let last = p.jumps().last().ok_or_else(|| Error::Integrity("crossed excursion without a jump".into()))?;
            JccpPath::one_point(low, last.after_raw, ceiling)
        } else {
            JccpPath::from_parts(low, post, p.lifetime() - h, p.terminal(), ceiling)
        };
        Ok((before, after))
    }
}

/// Runs the process from 0 until it enters `(0, +∞]` or the censor fires.
/// Jumps are drawn at rate `b` with sizes from the lifetime law; the path is
/// reflected at 0, so the crossing jump lands at `min(overshoot, 0)`.
pub fn sample_excursion<R: Rng + ?Sized>(measure: &LifespanMeasure, rng: &mut R, censor: Censor) -> Result<Excursion> {
    let limit = match censor {
        Censor::Clock(rate) => {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(config(format!("clock rate must be positive, got {rate}")));
            }
            rng.sample::<f64, _>(Exp1) / rate
        }
        Censor::At(t) | Censor::Cap(t) => {
            if !(t >= 0.0) {
                return Err(config(format!("censoring time must be nonnegative, got {t}")));
            }
            t
        }
    };
    let b = measure.birth_rate();
    let mut level = 0.0;
    let mut time = 0.0;
    let mut jumps = Vec::new();
    loop {
        let gap = if b > 0.0 { rng.sample::<f64, _>(Exp1) / b } else { f64::INFINITY };
        if time + gap > limit {
            let stop = limit;
            let terminal = level - (stop - time);
            let status = match censor {
                Censor::Cap(_) => ExcursionStatus::Undecided,
                _ => ExcursionStatus::Censored,
            };
            return Ok(Excursion { path: JccpPath::from_parts(0.0, jumps, stop, terminal, Some(0.0)), status });
        }
        time += gap;
        let before = level - gap;
        let size = measure.lifetime().sample(rng);
        let after_raw = before + size;
        jumps.push(Jump { time, before, after_raw });
        if after_raw > 0.0 {
            let status = if size.is_infinite() { ExcursionStatus::InfiniteJump } else { ExcursionStatus::Crossed };
            return Ok(Excursion { path: JccpPath::from_parts(0.0, jumps, time, before, Some(0.0)), status });
        }
        level = after_raw;
    }
}

/// Reflected path killed at its last visit of 0 before an exponential clock.
#[derive(Debug, Clone, PartialEq)]
pub struct KilledReflectedPath {
    /// Completed excursions, in order.
    pub excursions: Vec<Excursion>,
    /// Clock value.
    pub clock: f64,
    /// Concatenation of the completed excursions (`None` when there are none).
    pub path: Option<JccpPath>,
}

impl KilledReflectedPath {
    /// Number of completed excursions before the clock.
    pub fn count(&self) -> usize {
        self.excursions.len()
    }

    /// Infimum over the completed excursions, 0 when there are none.
    pub fn infimum(&self) -> f64 {
        self.excursions.iter().map(|e| e.path.terminal().min(lowest_before(&e.path))).fold(0.0, f64::min)
    }

    /// Cyclic shift of the killed path at its argmin.
    pub fn vervaat(&self) -> Result<Option<Vervaat>> {
        self.path.as_ref().map(vervaat_transform).transpose()
    }
}

fn lowest_before(path: &JccpPath) -> f64 {
    path.jumps().iter().map(|j| j.before).fold(f64::INFINITY, f64::min)
}

/// Draws the clock, then concatenates excursions while they end before it.
pub fn build_killed_reflected<R: Rng + ?Sized>(measure: &LifespanMeasure, delta: f64, rng: &mut R) -> Result<KilledReflectedPath> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(config(format!("clock rate must be positive, got {delta}")));
    }
    let clock = rng.sample::<f64, _>(Exp1) / delta;
    let mut elapsed = 0.0;
    let mut excursions = Vec::new();
    let mut path: Option<JccpPath> = None;
    loop {
        let exc = sample_excursion(measure, rng, Censor::At(clock - elapsed))?;
        if !exc.crossed() {
            break;
        }
        elapsed += exc.path.lifetime();
        path = Some(match path {
            None => exc.path.clone(),
            Some(p) => p.concat(&exc.path)?,
        });
        excursions.push(exc);
    }
    Ok(KilledReflectedPath { excursions, clock, path })
}

/// Vervaat transform of a finite path returning to its starting level.
pub fn vervaat_transform(path: &JccpPath) -> Result<Vervaat> {
    path.vervaat()
}
