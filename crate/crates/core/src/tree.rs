//! Splitting trees with per-individual exponential detection clocks.
//!
//! Individuals give birth at rate `b` during their lifetime; lifetimes are
//! i.i.d. and each individual carries an exponential clock of rate `δ`
//! started at its birth. The simulation is event driven and stops at the
//! first clock that rings during a lifetime (detection), at extinction, or at
//! an optional horizon.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Exp1;

use crate::error::{config, domain, Error, Result};
use crate::levy::{LifespanMeasure, LifetimeLaw};
use crate::path::{JccpPath, Jump};

/// Source of lifetimes, possibly paired with a mark carried by the individual.
pub trait LifetimeSampler: Sync {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, Option<f64>);
}

impl LifetimeSampler for LifetimeLaw {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, Option<f64>) {
        (self.sample(rng), None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Caps {
    pub max_individuals: usize,
    pub max_time: f64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { max_individuals: 10_000_000, max_time: 1e6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub parent: Option<usize>,
    pub birth: f64,
    pub death: f64,
    /// Birth time plus an exponential(δ) draw; infinite without clocks.
    pub ring: f64,
    pub mark: Option<f64>,
    pub children: Vec<usize>,
}

impl Individual {
    pub fn alive_at(&self, t: f64) -> bool {
        self.birth < t && self.death > t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Detected,
    Extinct,
    HorizonReached,
    CappedIndividuals,
    CappedTime,
}

impl RunStatus {
    pub fn is_capped(self) -> bool {
        matches!(self, RunStatus::CappedIndividuals | RunStatus::CappedTime)
    }
}

/// Individual alive at the detection time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Carrier {
    pub age: f64,
    pub residual: f64,
    /// Mark drawn with the lifetime (stay before infection in the hospital model).
    pub mark: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    pub status: RunStatus,
    /// Detection time, infinite when no clock rang.
    pub time: f64,
    /// Carriers in uniformly random order.
    pub carriers: Vec<Carrier>,
}

impl DetectionOutcome {
    pub fn detected(&self) -> bool {
        self.status == RunStatus::Detected
    }

    pub fn size(&self) -> usize {
        self.carriers.len()
    }
}

/// Genealogy of a simulated tree, complete below `observed_until`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitTree {
    individuals: Vec<Individual>,
    observed_until: f64,
}

impl SplitTree {
    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub fn root(&self) -> &Individual {
        &self.individuals[0]
    }

    pub fn observed_until(&self) -> f64 {
        self.observed_until
    }

    /// `N_t`.
    pub fn population(&self, t: f64) -> usize {
        self.individuals.iter().filter(|i| i.alive_at(t)).count()
    }

    /// `(age, residual)` of every individual alive at `t`.
    pub fn ages_residuals(&self, t: f64) -> Vec<(f64, f64)> {
        self.individuals
            .iter()
            .filter(|i| i.alive_at(t))
            .map(|i| (t - i.birth, i.death - t))
            .collect()
    }

    /// `Σ (ω ∧ t − α)` over individuals born before `t`.
    pub fn total_length(&self, t: f64) -> f64 {
        self.individuals.iter().filter(|i| i.birth < t).map(|i| i.death.min(t) - i.birth).sum()
    }

    fn children_before(&self, idx: usize, t: f64) -> &[usize] {
        let children = &self.individuals[idx].children;
        let n = children.partition_point(|&c| self.individuals[c].birth < t);
        &children[..n]
    }

    /// Ulam–Harris label of an individual in the tree truncated at `t`:
    /// daughters are numbered from the youngest born before `t`.
    pub fn label(&self, idx: usize, t: f64) -> Option<Vec<u32>> {
        if self.individuals.get(idx)?.birth >= t && idx != 0 {
            return None;
        }
        let mut label = Vec::new();
        let mut node = idx;
        while let Some(parent) = self.individuals[node].parent {
            let siblings = self.children_before(parent, t);
            let pos = siblings.iter().position(|&c| c == node)?;
            label.push((siblings.len() - pos) as u32);
            node = parent;
        }
        label.reverse();
        Some(label)
    }

    /// Jumping chronological contour of the tree truncated at `t`.
    ///
    /// The path starts with a jump at time 0 from 0 to the root's death
    /// date, visits each lifespan downwards at speed 1, jumps from the birth
    /// date to the death date of every daughter (youngest first), and ends at
    /// 0. Jumps keep the untruncated death date; the path is reflected at `t`.
    pub fn contour(&self, t: f64) -> Result<JccpPath> {
        if !(t > 0.0) {
            return Err(domain(format!("contour level must be positive, got {t}")));
        }
        if t > self.observed_until {
            return Err(domain(format!(
                "tree is only known up to {}, cannot truncate at {t}",
                self.observed_until
            )));
        }
        let root = &self.individuals[0];
        let mut jumps = vec![Jump { time: 0.0, before: 0.0, after_raw: root.death }];
        let mut elapsed = 0.0;
        // (individual, current level, daughters left to visit)
        let mut stack = vec![(0usize, root.death.min(t), self.children_before(0, t).len())];
        while let Some(top) = stack.last_mut() {
            let (node, level, left) = *top;
            if left > 0 {
                let child = self.children_before(node, t)[left - 1];
                let c = &self.individuals[child];
                elapsed += level - c.birth;
                jumps.push(Jump { time: elapsed, before: c.birth, after_raw: c.death });
                *top = (node, c.birth, left - 1);
                stack.push((child, c.death.min(t), self.children_before(child, t).len()));
            } else {
                elapsed += level - self.individuals[node].birth;
                stack.pop();
            }
        }
        Ok(JccpPath::from_parts(0.0, jumps, elapsed, 0.0, Some(t)))
    }
}

/// Piece of a contour between consecutive visits of the truncation level.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourPiece {
    pub path: JccpPath,
    /// `t − X(σ−)` at the crossing that ends the piece (the age of the
    /// individual visited next).
    pub undershoot: Option<f64>,
    /// Raw level minus `t` at that crossing (its residual lifetime).
    pub overshoot: Option<f64>,
}

/// Splits a contour reflected at `t` into the piece before the first visit
/// of `t` and the excursions between consecutive visits.
pub fn decompose_contour(path: &JccpPath, t: f64) -> Result<Vec<ContourPiece>> {
    if path.ceiling() != Some(t) {
        return Err(Error::Integrity(format!(
            "path is reflected at {:?}, not at the requested level {t}",
            path.ceiling()
        )));
    }
    let tol = 1e-9 * (1.0 + t);
    let jumps = path.jumps();
    if let Some(j) = jumps.iter().find(|j| j.before < -tol) {
        return Err(Error::Integrity(format!("path dips below 0 (to {}) at time {}", j.before, j.time)));
    }
    if path.terminal() < -tol || path.origin() < -tol {
        return Err(Error::Integrity("path starts or ends below 0".into()));
    }
    let visits: Vec<usize> = jumps.iter().enumerate().filter(|(_, j)| j.after_raw > t).map(|(k, _)| k).collect();

    let mut pieces = Vec::with_capacity(visits.len() + 1);
    let mut start_idx = 0usize;
    let mut start_time = 0.0;
    let mut origin = path.origin();
    for &v in &visits {
        let crossing = jumps[v];
        let piece_jumps = jumps[start_idx..=v]
            .iter()
            .map(|j| Jump { time: j.time - start_time, ..*j })
            .collect();
        pieces.push(ContourPiece {
            path: JccpPath::from_parts(origin, piece_jumps, crossing.time - start_time, crossing.before, Some(t)),
            undershoot: Some(t - crossing.before),
            overshoot: Some(crossing.after_raw - t),
        });
        start_idx = v + 1;
        start_time = crossing.time;
        origin = t;
    }
    let rest = jumps[start_idx..]
        .iter()
        .map(|j| Jump { time: j.time - start_time, ..*j })
        .collect();
    pieces.push(ContourPiece {
        path: JccpPath::from_parts(origin, rest, path.lifetime() - start_time, path.terminal(), Some(t)),
        undershoot: None,
        overshoot: None,
    });
    Ok(pieces)
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    Birth(usize),
    Death,
    Ring,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

/// Event-driven simulator of a splitting tree.
#[derive(Debug, Clone)]
pub struct TreeSimulator<'a, S> {
    birth_rate: f64,
    lifetimes: &'a S,
    clock_rate: Option<f64>,
    horizon: f64,
    caps: Caps,
}

impl<'a, S: LifetimeSampler> TreeSimulator<'a, S> {
    pub fn new(birth_rate: f64, lifetimes: &'a S) -> Result<Self> {
        if !(birth_rate >= 0.0 && birth_rate.is_finite()) {
            return Err(config(format!("birth rate must be finite and nonnegative, got {birth_rate}")));
        }
        Ok(TreeSimulator { birth_rate, lifetimes, clock_rate: None, horizon: f64::INFINITY, caps: Caps::default() })
    }

    pub fn with_clock(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(config(format!("clock rate must be positive, got {delta}")));
        }
        self.clock_rate = Some(delta);
        Ok(self)
    }

    /// Stops the simulation at `horizon`; the tree is complete below it.
    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(config(format!("horizon must be positive, got {horizon}")));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn with_caps(mut self, caps: Caps) -> Result<Self> {
        if caps.max_individuals == 0 || !(caps.max_time > 0.0) {
            return Err(config("caps must be positive"));
        }
        self.caps = caps;
        Ok(self)
    }

    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> (SplitTree, DetectionOutcome) {
        let mut state = Engine { sim: self, individuals: Vec::new(), queue: BinaryHeap::new(), seq: 0 };
        state.spawn(None, 0.0, rng);
        let (status, stop) = loop {
            let Some(event) = state.queue.pop() else {
                break (RunStatus::Extinct, f64::INFINITY);
            };
            if event.time >= self.horizon {
                break (RunStatus::HorizonReached, self.horizon);
            }
            if event.time > self.caps.max_time {
                break (RunStatus::CappedTime, event.time);
            }
            match event.kind {
                EventKind::Ring => break (RunStatus::Detected, event.time),
                EventKind::Death => {}
                EventKind::Birth(parent) => {
                    if state.individuals.len() >= self.caps.max_individuals {
                        break (RunStatus::CappedIndividuals, event.time);
                    }
                    let child = state.spawn(Some(parent), event.time, rng);
                    state.individuals[parent].children.push(child);
                    state.schedule_birth(parent, event.time, rng);
                }
            }
        };

        let tree = SplitTree { individuals: state.individuals, observed_until: stop };
        let carriers = if status == RunStatus::Detected {
            let mut carriers: Vec<Carrier> = tree
                .individuals
                .iter()
                .filter(|i| i.birth <= stop && i.death > stop)
                .map(|i| Carrier { age: stop - i.birth, residual: i.death - stop, mark: i.mark })
                .collect();
            carriers.shuffle(rng);
            carriers
        } else {
            Vec::new()
        };
        let time = if status == RunStatus::Detected { stop } else { f64::INFINITY };
        (tree, DetectionOutcome { status, time, carriers })
    }
}

struct Engine<'s, 'a, S> {
    sim: &'s TreeSimulator<'a, S>,
    individuals: Vec<Individual>,
    queue: BinaryHeap<Event>,
    seq: u64,
}

impl<S: LifetimeSampler> Engine<'_, '_, S> {
    fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Event { time, seq: self.seq, kind });
    }

    fn spawn<R: Rng + ?Sized>(&mut self, parent: Option<usize>, birth: f64, rng: &mut R) -> usize {
        let idx = self.individuals.len();
        let (lifetime, mark) = self.sim.lifetimes.draw(rng);
        let death = birth + lifetime;
        let ring = match self.sim.clock_rate {
            Some(delta) => birth + rng.sample::<f64, _>(Exp1) / delta,
            None => f64::INFINITY,
        };
        self.individuals.push(Individual { parent, birth, death, ring, mark, children: Vec::new() });
        if death.is_finite() {
            self.push(death, EventKind::Death);
        }
        if ring < death {
            self.push(ring, EventKind::Ring);
        }
        self.schedule_birth(idx, birth, rng);
        idx
    }

    fn schedule_birth<R: Rng + ?Sized>(&mut self, idx: usize, now: f64, rng: &mut R) {
        if self.sim.birth_rate == 0.0 {
            return;
        }
        let next = now + rng.sample::<f64, _>(Exp1) / self.sim.birth_rate;
        if next < self.individuals[idx].death {
            self.push(next, EventKind::Birth(idx));
        }
    }
}

/// Simulates one tree stopped at the first clock ring.
pub fn simulate_tree<R: Rng + ?Sized>(
    measure: &LifespanMeasure,
    delta: f64,
    rng: &mut R,
    caps: Caps,
) -> Result<(SplitTree, DetectionOutcome)> {
    let sim = TreeSimulator::new(measure.birth_rate(), measure.lifetime())?
        .with_clock(delta)?
        .with_caps(caps)?;
    Ok(sim.run(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replicate_rng;

    fn manual_tree() -> SplitTree {
        // root (0, 3): daughters born at 1 (dies 2.5) and 2 (dies 4.5);
        // the daughter born at 1 has a daughter born at 1.5 (dies 5).
        let ind = |parent, birth, death, children: Vec<usize>| Individual {
            parent,
            birth,
            death,
            ring: f64::INFINITY,
            mark: None,
            children,
        };
        SplitTree {
            individuals: vec![
                ind(None, 0.0, 3.0, vec![1, 2]),
                ind(Some(0), 1.0, 2.5, vec![3]),
                ind(Some(0), 2.0, 4.5, vec![]),
                ind(Some(1), 1.5, 5.0, vec![]),
            ],
            observed_until: f64::INFINITY,
        }
    }

    #[test]
    fn childless_root_contour() {
        let tree = SplitTree {
            individuals: vec![Individual {
                parent: None,
                birth: 0.0,
                death: 0.7,
                ring: f64::INFINITY,
                mark: None,
                children: vec![],
            }],
            observed_until: f64::INFINITY,
        };
        let p = tree.contour(1.0).unwrap();
        assert_eq!(p.start(), 0.7);
        assert_eq!(p.lifetime(), 0.7);
        assert_eq!(p.end_value(), 0.0);
    }

    #[test]
    fn contour_of_manual_tree() {
        let tree = manual_tree();
        let t = 4.0;
        let p = tree.contour(t).unwrap();
        assert_eq!(p.start(), 3.0);
        // visit order: root, youngest daughter (2), then daughter 1 and its daughter 3
        let befores: Vec<f64> = p.jumps().iter().map(|j| j.before).collect();
        assert_eq!(befores, vec![0.0, 2.0, 1.0, 1.5]);
        assert!((p.lifetime() - tree.total_length(t)).abs() < 1e-12);
        assert!(p.slope_defect() < 1e-12);
        assert_eq!(tree.population(t), 2);
        assert_eq!(tree.label(2, t).unwrap(), vec![1]);
        assert_eq!(tree.label(1, t).unwrap(), vec![2]);
        assert_eq!(tree.label(3, t).unwrap(), vec![2, 1]);
    }

    #[test]
    fn decomposition_of_manual_tree() {
        let tree = manual_tree();
        let t = 2.2;
        let p = tree.contour(t).unwrap();
        let pieces = decompose_contour(&p, t).unwrap();
        // alive at 2.2: root (0,3), daughter (1,2.5), daughter (2,4.5), granddaughter (1.5,5)
        assert_eq!(tree.population(t), 4);
        assert_eq!(pieces.len(), 5);
        assert_eq!(pieces[0].path.lifetime(), 0.0);
        let total: f64 = pieces.iter().map(|q| q.path.lifetime()).sum();
        assert!((total - p.lifetime()).abs() < 1e-12);
        let mut from_path: Vec<(f64, f64)> =
            pieces.iter().filter_map(|q| Some((q.undershoot?, q.overshoot?))).collect();
        let mut from_tree = tree.ages_residuals(t);
        from_path.sort_by(|a, b| a.partial_cmp(b).unwrap());
        from_tree.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(from_path, from_tree);
    }

    #[test]
    fn empty_level_gives_single_piece() {
        let tree = manual_tree();
        let p = tree.contour(5.5).unwrap();
        let pieces = decompose_contour(&p, 5.5).unwrap();
        assert_eq!(pieces.len(), 1);
        assert_eq!(pieces[0].path.end_value(), 0.0);
    }

    #[test]
    fn decomposition_rejects_wrong_level_and_negative_paths() {
        let tree = manual_tree();
        let p = tree.contour(2.0).unwrap();
        assert!(matches!(decompose_contour(&p, 3.0), Err(Error::Integrity(_))));
        let bad = JccpPath::new(0.0, vec![Jump { time: 0.0, before: 0.0, after_raw: 1.0 }, Jump { time: 1.5, before: -0.5, after_raw: 0.2 }], 1.7, 0.0, Some(2.0)).unwrap();
        assert!(matches!(decompose_contour(&bad, 2.0), Err(Error::Integrity(_))));
    }

    #[test]
    fn huge_clock_rate_detects_root_alone() {
        let measure = LifespanMeasure::exponential(0.8, 1.0).unwrap();
        let mut alone = 0;
        for i in 0..2000 {
            let mut rng = replicate_rng(3, i);
            let (_, out) = simulate_tree(&measure, 1e6, &mut rng, Caps::default()).unwrap();
            if out.detected() && out.size() == 1 {
                alone += 1;
            }
        }
        assert!(alone >= 1995);
    }

    #[test]
    fn caps_are_reported() {
        let measure = LifespanMeasure::exponential(5.0, 0.1).unwrap();
        let sim = TreeSimulator::new(5.0, measure.lifetime())
            .unwrap()
            .with_caps(Caps { max_individuals: 50, max_time: 1e6 })
            .unwrap();
        let mut rng = replicate_rng(1, 0);
        let (_, out) = sim.run(&mut rng);
        assert_eq!(out.status, RunStatus::CappedIndividuals);
        assert!(!out.detected());
    }

    #[test]
    fn no_births_no_clock_goes_extinct() {
        let law = LifetimeLaw::exponential(1.0).unwrap();
        let sim = TreeSimulator::new(0.0, &law).unwrap();
        let mut rng = replicate_rng(1, 0);
        let (tree, out) = sim.run(&mut rng);
        assert_eq!(out.status, RunStatus::Extinct);
        assert_eq!(tree.individuals().len(), 1);
        assert!(out.time.is_infinite());
    }

    #[test]
    fn detected_outcome_matches_tree() {
        let measure = LifespanMeasure::exponential(1.2, 1.0).unwrap();
        for i in 0..200 {
            let mut rng = replicate_rng(11, i);
            let (tree, out) = simulate_tree(&measure, 0.3, &mut rng, Caps::default()).unwrap();
            if !out.detected() {
                continue;
            }
            assert_eq!(out.size(), tree.population(out.time));
            assert!(out.carriers.iter().all(|c| c.age >= 0.0 && c.residual > 0.0));
            let ringer = tree.individuals().iter().filter(|i| i.ring == out.time).count();
            assert_eq!(ringer, 1);
            assert!(tree.individuals().iter().all(|i| i.ring >= out.time || i.ring >= i.death));
        }
    }
}
