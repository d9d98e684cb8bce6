//! Piecewise-linear càdlàg paths with slope −1 and positive jumps.
//!
//! A path stores its jumps as exact `(time, level before, raw level after)`
//! records. When the path is reflected below a ceiling, the value after a
//! jump is `min(raw, ceiling)` while the raw level keeps the unreflected
//! target (a date of death for contours, an overshoot for excursions).
//! Levels are stored rather than recomputed from elapsed time, so functionals
//! read off the path (undershoots, overshoots, infima) are exact copies of
//! the values that generated it.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub before: f64,
    pub after_raw: f64,
}

impl Jump {
    pub fn size(&self) -> f64 {
        self.after_raw - self.before
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JccpPath {
    origin: f64,
    jumps: Vec<Jump>,
    lifetime: f64,
    terminal: f64,
    ceiling: Option<f64>,
}

impl JccpPath {
    /// `origin` is the level just before time 0, `terminal` the left limit at
    /// the lifetime.
    pub fn new(origin: f64, jumps: Vec<Jump>, lifetime: f64, terminal: f64, ceiling: Option<f64>) -> Result<Self> {
        if !(lifetime >= 0.0 && lifetime.is_finite()) {
            return Err(Error::Integrity(format!("lifetime must be finite and nonnegative, got {lifetime}")));
        }
        let mut prev = 0.0;
        for j in &jumps {
            if !(j.time >= prev && j.time <= lifetime) {
                return Err(Error::Integrity(format!("jump time {} out of order or beyond {lifetime}", j.time)));
            }
            if !(j.after_raw > j.before) {
                return Err(Error::Integrity(format!("jump at {} is not positive", j.time)));
            }
            prev = j.time;
        }
        Ok(JccpPath { origin, jumps, lifetime, terminal, ceiling })
    }

    pub(crate) fn from_parts(origin: f64, jumps: Vec<Jump>, lifetime: f64, terminal: f64, ceiling: Option<f64>) -> Self {
        JccpPath { origin, jumps, lifetime, terminal, ceiling }
    }

    /// One-point path: origin followed by a jump at time 0, lifetime 0.
    pub fn one_point(origin: f64, after_raw: f64, ceiling: Option<f64>) -> Self {
        let jump = Jump { time: 0.0, before: origin, after_raw };
        JccpPath { origin, jumps: vec![jump], lifetime: 0.0, terminal: origin, ceiling }
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn lifetime(&self) -> f64 {
        self.lifetime
    }

    pub fn ceiling(&self) -> Option<f64> {
        self.ceiling
    }

    /// Left limit at the lifetime.
    pub fn terminal(&self) -> f64 {
        self.terminal
    }

    pub fn after(&self, jump: &Jump) -> f64 {
        match self.ceiling {
            Some(c) => jump.after_raw.min(c),
            None => jump.after_raw,
        }
    }

    /// Value at time 0.
    pub fn start(&self) -> f64 {
        let mut value = self.origin;
        for j in self.jumps.iter().take_while(|j| j.time == 0.0) {
            value = self.after(j);
        }
        value
    }

    /// Value at the lifetime, after any terminal jump.
    pub fn end_value(&self) -> f64 {
        match self.jumps.last() {
            Some(j) if j.time == self.lifetime => self.after(j),
            _ => self.terminal,
        }
    }

    /// `X(s)` for `0 <= s <= V`.
    pub fn value_at(&self, s: f64) -> f64 {
        if s >= self.lifetime {
            return self.end_value();
        }
        let k = self.jumps.partition_point(|j| j.time <= s);
        if k == 0 {
            self.origin - s
        } else {
            let j = &self.jumps[k - 1];
            self.after(j) - (s - j.time)
        }
    }

    /// `X(s−)` for `0 < s <= V`.
    pub fn left_limit(&self, s: f64) -> f64 {
        if s >= self.lifetime {
            return self.terminal;
        }
        let k = self.jumps.partition_point(|j| j.time < s);
        if k == 0 {
            self.origin - s
        } else {
            let j = &self.jumps[k - 1];
            self.after(j) - (s - j.time)
        }
    }

    /// Largest discrepancy between stored levels and the slope −1 dynamics.
    pub fn slope_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut level = self.origin;
        let mut time = 0.0;
        for j in &self.jumps {
            worst = worst.max((level - (j.time - time) - j.before).abs());
            level = self.after(j);
            time = j.time;
        }
        match self.jumps.last() {
            // a jump at the lifetime ends the path; its left limit is the terminal
            Some(j) if j.time == self.lifetime => worst.max((j.before - self.terminal).abs()),
            _ => worst.max((level - (self.lifetime - time) - self.terminal).abs()),
        }
    }

    /// Infimum of the path and the unique time `H` with `X(H−) = I`.
    pub fn infimum(&self) -> Result<(f64, f64)> {
        if self.lifetime == 0.0 {
            return Ok((self.start(), 0.0));
        }
        let mut best = (self.terminal, self.lifetime);
        let mut tie: Option<f64> = None;
        for j in self.jumps.iter().filter(|j| j.time > 0.0 && j.time < self.lifetime) {
            if j.before < best.0 {
                best = (j.before, j.time);
                tie = None;
            } else if j.before == best.0 {
                tie = Some(j.time);
            }
        }
        if let Some(other) = tie {
            return Err(Error::AmbiguousArgmin { first: best.1.min(other), second: best.1.max(other) });
        }
        Ok(best)
    }

    /// Vervaat transform: `Z'(s) = Z(s + H mod V) − I` where `H` is the
    /// unique argmin of the left limits, with `Z'(V) = 0`. Jumps in `[H, V]`
    /// move to the front; a jump sitting at the lifetime wraps to `V − H`.
    pub fn vervaat(&self) -> Result<Vervaat> {
        if !self.lifetime.is_finite() {
            return Err(Error::Domain("Vervaat transform needs a finite lifetime".into()));
        }
        let (infimum, argmin) = self.infimum()?;
        let v = self.lifetime;
        if v == 0.0 {
            return Ok(Vervaat { path: self.clone(), infimum, argmin, split: self.jumps.len(), source_origin: self.origin });
        }
        let has_terminal_jump = self.jumps.last().is_some_and(|j| j.time == v);
        if argmin < v || has_terminal_jump {
            let gap = (self.end_value() - self.origin).abs();
            if gap > 1e-9 * (1.0 + self.origin.abs()) {
                return Err(Error::Integrity(format!(
                    "path does not close up (ends at {}, starts from {})",
                    self.end_value(),
                    self.origin
                )));
            }
        }
        let lowered = |j: &Jump, time: f64| Jump { time, before: j.before - infimum, after_raw: j.after_raw - infimum };
        let mut jumps: Vec<Jump> = self.jumps.iter().filter(|j| j.time >= argmin).map(|j| lowered(j, j.time - argmin)).collect();
        let split = jumps.len();
        jumps.extend(self.jumps.iter().filter(|j| j.time < argmin).map(|j| lowered(j, j.time + (v - argmin))));
        let origin = if argmin < v || has_terminal_jump { 0.0 } else { self.origin - infimum };
        let path = JccpPath {
            origin,
            jumps,
            lifetime: v,
            terminal: 0.0,
            ceiling: self.ceiling.map(|c| c - infimum),
        };
        Ok(Vervaat { path, infimum, argmin, split, source_origin: self.origin })
    }

    /// Appends `next`, which must start from this path's end value.
    pub fn concat(&self, next: &JccpPath) -> Result<JccpPath> {
        let end = self.end_value();
        if (next.origin - end).abs() > 1e-12 * (1.0 + end.abs()) {
            return Err(Error::Integrity(format!("cannot join a path ending at {end} to one starting from {}", next.origin)));
        }
        let offset = self.lifetime;
        let mut jumps = self.jumps.clone();
        jumps.extend(next.jumps.iter().map(|j| Jump { time: offset + j.time, ..*j }));
        Ok(JccpPath {
            origin: self.origin,
            jumps,
            lifetime: offset + next.lifetime,
            terminal: next.terminal,
            ceiling: self.ceiling.or(next.ceiling),
        })
    }
}

/// Output of [`JccpPath::vervaat`] with what is needed to undo it.
#[derive(Debug, Clone, PartialEq)]
pub struct Vervaat {
    pub path: JccpPath,
    pub infimum: f64,
    pub argmin: f64,
    /// Number of leading jumps that came from `[H, V]`.
    split: usize,
    source_origin: f64,
}

impl Vervaat {
    /// Shifts back by `V − H` and re-adds the infimum.
    pub fn invert(&self) -> JccpPath {
        let z = &self.path;
        let v = z.lifetime;
        let back = v - self.argmin;
        let lift = self.infimum;
        let raised = |j: &Jump, time: f64| Jump { time, before: j.before + lift, after_raw: j.after_raw + lift };
        let (front, rest) = z.jumps.split_at(self.split);
        let mut jumps: Vec<Jump> = rest.iter().map(|j| raised(j, j.time - back)).collect();
        jumps.extend(front.iter().map(|j| raised(j, j.time + self.argmin)));
        let terminal = if self.argmin < v { z.left_limit(back) + lift } else { z.terminal + lift };
        JccpPath {
            origin: self.source_origin,
            jumps,
            lifetime: v,
            terminal,
            ceiling: z.ceiling.map(|c| c + lift),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j(time: f64, before: f64, after_raw: f64) -> Jump {
        Jump { time, before, after_raw }
    }

    // 0 ─▶ -1 at t=1, jump +0.5 → -0.5, down to -2 at t=2.5, jump to +0.3 (terminal)
    fn excursion() -> JccpPath {
        JccpPath::new(0.0, vec![j(1.0, -1.0, -0.5), j(2.5, -2.0, 0.3)], 2.5, -2.0, None).unwrap()
    }

    #[test]
    fn values_and_limits() {
        let p = excursion();
        assert_eq!(p.start(), 0.0);
        assert_eq!(p.value_at(0.5), -0.5);
        assert_eq!(p.value_at(1.0), -0.5);
        assert_eq!(p.left_limit(1.0), -1.0);
        assert_eq!(p.end_value(), 0.3);
        assert_eq!(p.terminal(), -2.0);
        assert!(p.slope_defect() < 1e-15);
    }

    #[test]
    fn infimum_at_terminal_jump() {
        let p = excursion();
        assert_eq!(p.infimum().unwrap(), (-2.0, 2.5));
    }

    #[test]
    fn ambiguous_argmin_is_reported() {
        let p = JccpPath::new(0.0, vec![j(1.0, -1.0, 0.0)], 2.0, -1.0, None).unwrap();
        assert!(matches!(p.infimum(), Err(Error::AmbiguousArgmin { .. })));
    }

    #[test]
    fn vervaat_when_minimum_is_at_the_end() {
        // contour-like: starts with a jump to 2, childless descent to 0
        let p = JccpPath::new(0.0, vec![j(0.0, 0.0, 2.0)], 2.0, 0.0, None).unwrap();
        let v = p.vervaat().unwrap();
        assert_eq!(v.infimum, 0.0);
        assert_eq!(v.argmin, 2.0);
        assert_eq!(v.path, p);
    }

    #[test]
    fn vervaat_of_reflected_concatenation() {
        // two excursions reflected at 0
        let e1 = JccpPath::new(0.0, vec![j(1.0, -1.0, 0.4)], 1.0, -1.0, Some(0.0)).unwrap();
        let e2 = JccpPath::new(0.0, vec![j(0.5, -0.5, -0.2), j(2.0, -1.7, 1.0)], 2.0, -1.7, Some(0.0)).unwrap();
        let y = e1.concat(&e2).unwrap();
        assert_eq!(y.lifetime(), 3.0);
        let v = y.vervaat().unwrap();
        assert_eq!(v.infimum, -1.7);
        assert_eq!(v.argmin, 3.0);
        let z = &v.path;
        assert_eq!(z.origin(), 0.0);
        assert_eq!(z.terminal(), 0.0);
        assert_eq!(z.ceiling(), Some(1.7));
        assert!((z.start() - 1.7).abs() < 1e-15);
        assert!(z.slope_defect() < 1e-12);
        assert!(z.jumps().iter().filter(|j| j.time > 0.0).all(|j| j.before > 0.0));
        assert_eq!(z.lifetime(), y.lifetime());
    }

    #[test]
    fn vervaat_interior_minimum_round_trips() {
        let e1 = JccpPath::new(0.0, vec![j(0.7, -0.7, -0.1), j(2.9, -2.3, 0.2)], 2.9, -2.3, Some(0.0)).unwrap();
        let e2 = JccpPath::new(0.0, vec![j(1.1, -1.1, 0.6)], 1.1, -1.1, Some(0.0)).unwrap();
        let y = e1.concat(&e2).unwrap();
        let v = y.vervaat().unwrap();
        assert_eq!(v.argmin, 2.9);
        assert_eq!(v.path.origin(), 0.0);
        assert_eq!(v.path.terminal(), 0.0);
        assert_eq!(v.path.jumps()[0].time, 0.0);
        assert!(v.path.slope_defect() < 1e-12);
        let back = v.invert();
        assert_eq!(back.jumps().len(), y.jumps().len());
        for (a, b) in back.jumps().iter().zip(y.jumps()) {
            assert!((a.time - b.time).abs() < 1e-12);
            assert!((a.before - b.before).abs() < 1e-12);
            assert!((a.after_raw - b.after_raw).abs() < 1e-12);
        }
    }

    #[test]
    fn open_path_cannot_be_rotated() {
        let p = JccpPath::new(0.0, vec![j(0.7, -0.7, -0.1), j(2.0, -1.4, -1.2), j(2.9, -2.1, 0.2)], 2.9, -2.1, None).unwrap();
        assert!(matches!(p.vervaat(), Err(Error::Integrity(_))));
    }

    #[test]
    fn rejects_malformed() {
        assert!(JccpPath::new(0.0, vec![j(1.0, -1.0, -1.5)], 2.0, -2.0, None).is_err());
        assert!(JccpPath::new(0.0, vec![j(3.0, -3.0, 1.0)], 2.0, -2.0, None).is_err());
    }
}
