//! Reliability model of the simulated machine.
//!
//! Every rank is in one of four states: ideal, faulty, erroneous or failed.
//! Fault events are injected at outer-iteration boundaries from a
//! [`FaultSchedule`]; detected errors and fail-stops put the rank into the
//! failed state, which removes it from the redundant correction until a
//! repair brings it back (and triggers a resynchronisation). A rank is
//! *alive* whenever it is not failed.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::redundancy::PairingMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RankStatus {
    Ideal,
    Faulty,
    Erroneous,
    Failed,
}

impl RankStatus {
    fn level(self) -> u8 {
        match self {
            RankStatus::Ideal => 0,
            RankStatus::Faulty => 1,
            RankStatus::Erroneous => 2,
            RankStatus::Failed => 3,
        }
    }

    /// Forward moves along ideal → faulty → erroneous → failed (a single
    /// event may pass through intermediate states at once), plus recovery
    /// back to ideal from any other state.
    pub fn can_transition_to(self, next: RankStatus) -> bool {
        next == RankStatus::Ideal && self != RankStatus::Ideal || next.level() > self.level()
    }

    pub fn is_alive(self) -> bool {
        self != RankStatus::Failed
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankState {
    pub state: RankStatus,
    pub since: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// Incorrect data that is never exercised; the rank stays alive.
    TransientFault,
    /// Detected corruption; the rank is demoted to failed once detected.
    SoftError,
    /// The rank stops responding.
    FailStop,
}

impl FaultKind {
    pub fn name(self) -> &'static str {
        match self {
            FaultKind::TransientFault => "transient_fault",
            FaultKind::SoftError => "soft_error",
            FaultKind::FailStop => "fail_stop",
        }
    }
}

impl std::str::FromStr for FaultKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transient_fault" => Ok(Self::TransientFault),
            "soft_error" => Ok(Self::SoftError),
            "fail_stop" => Ok(Self::FailStop),
            other => Err(Error::Schedule(format!("unknown fault kind `{other}`"))),
        }
    }
}

/// One injected fault. `repair_at = None` means the fault is permanent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub at_iteration: usize,
    pub rank: usize,
    pub kind: FaultKind,
    pub repair_at: Option<usize>,
}

impl FaultEvent {
    pub fn permanent(at_iteration: usize, rank: usize, kind: FaultKind) -> Self {
        Self {
            at_iteration,
            rank,
            kind,
            repair_at: None,
        }
    }

    pub fn repaired(at_iteration: usize, rank: usize, kind: FaultKind, repair_at: usize) -> Self {
        Self {
            at_iteration,
            rank,
            kind,
            repair_at: Some(repair_at),
        }
    }
}

impl fmt::Display for FaultEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.at_iteration, self.rank, self.kind.name())?;
        if let Some(r) = self.repair_at {
            write!(f, " {r}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSchedule {
    events: Vec<FaultEvent>,
    pub enforce_a1: bool,
    /// Iterations a soft error or fail-stop spends erroneous before it is
    /// detected and the rank is marked failed.
    pub detection_latency: usize,
}

impl Default for FaultSchedule {
    fn default() -> Self {
        Self::empty()
    }
}

impl FaultSchedule {
    pub fn empty() -> Self {
        Self {
            events: Vec::new(),
            enforce_a1: true,
            detection_latency: 0,
        }
    }

    pub fn new(mut events: Vec<FaultEvent>, enforce_a1: bool) -> Result<Self> {
        for e in &events {
            if let Some(r) = e.repair_at {
                if r <= e.at_iteration {
                    return Err(Error::Schedule(format!(
                        "event `{e}`: repair must come after the fault"
                    )));
                }
            }
        }
        events.sort_by_key(|e| (e.at_iteration, e.rank));
        Ok(Self {
            events,
            enforce_a1,
            detection_latency: 0,
        })
    }

    pub fn with_detection_latency(mut self, latency: usize) -> Self {
        self.detection_latency = latency;
        self
    }

    pub fn events(&self) -> &[FaultEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Parses `iter rank kind [repair_iter]` records separated by newlines
    /// or `;`. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut events = Vec::new();
        for (lineno, raw) in text.split(['\n', ';']).enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if !(3..=4).contains(&toks.len()) {
                return Err(Error::Schedule(format!(
                    "record {}: expected `iter rank kind [repair_iter]`, got `{line}`",
                    lineno + 1
                )));
            }
            let num = |t: &str| {
                t.parse::<usize>().map_err(|_| {
                    Error::Schedule(format!("record {}: `{t}` is not an iteration/rank", lineno + 1))
                })
            };
            events.push(FaultEvent {
                at_iteration: num(toks[0])?,
                rank: num(toks[1])?,
                kind: toks[2].parse()?,
                repair_at: toks.get(3).map(|t| num(t)).transpose()?,
            });
        }
        Self::new(events, true)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        self.events.iter().map(|e| format!("{e}\n")).collect()
    }

    /// Sequential, non-overlapping fail-stops with repairs, drawn from a
    /// seeded generator so the same seed gives the same schedule.
    pub fn random_fail_stops(n_ranks: usize, count: usize, horizon: usize, seed: u64) -> Result<Self> {
        if n_ranks == 0 || horizon < 2 * count.max(1) {
            return Err(Error::Schedule("horizon too short for the requested events".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slot = horizon / count.max(1);
        let mut events = Vec::with_capacity(count);
        for k in 0..count {
            let start = k * slot + rng.gen_range(0..slot / 2);
            let repair = start + 1 + rng.gen_range(0..(slot / 2).max(1));
            let kind = if rng.gen_bool(0.5) {
                FaultKind::FailStop
            } else {
                FaultKind::SoftError
            };
            events.push(FaultEvent::repaired(start, rng.gen_range(0..n_ranks), kind, repair));
        }
        Self::new(events, true)
    }

    fn failed_interval(&self, e: &FaultEvent) -> Option<(usize, usize)> {
        if e.kind == FaultKind::TransientFault {
            return None;
        }
        let start = e.at_iteration + self.detection_latency;
        let end = e.repair_at.unwrap_or(usize::MAX);
        (start < end).then_some((start, end))
    }

    fn unavailable_interval(&self, e: &FaultEvent) -> Option<(usize, usize)> {
        if e.kind == FaultKind::TransientFault {
            return None;
        }
        Some((e.at_iteration, e.repair_at.unwrap_or(usize::MAX)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    RankOutOfRange { event: FaultEvent },
    BeyondHorizon { event: FaultEvent },
    /// Two ranks erroneous/failed at once while A1 is enforced.
    A1 { iteration: usize, ranks: (usize, usize) },
    /// Both members of a pair failed at once.
    PairWide { iteration: usize, pair: (usize, usize) },
}

fn overlap(a: (usize, usize), b: (usize, usize)) -> Option<usize> {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    (lo < hi).then_some(lo)
}

/// Checks a schedule against the pairing before a run. Permanent faults
/// are legal; an empty result means the schedule is usable.
pub fn validate_schedule(
    schedule: &FaultSchedule,
    pairing: &PairingMap,
    horizon: Option<usize>,
) -> Vec<Violation> {
    let n_ranks = pairing.n_ranks();
    let mut out = Vec::new();
    let events = schedule.events();
    for e in events {
        if e.rank >= n_ranks {
            out.push(Violation::RankOutOfRange { event: *e });
        }
        if let Some(h) = horizon {
            if e.at_iteration >= h {
                out.push(Violation::BeyondHorizon { event: *e });
            }
        }
    }
    for (i, x) in events.iter().enumerate() {
        for y in &events[i + 1..] {
            if x.rank >= n_ranks || y.rank >= n_ranks || x.rank == y.rank {
                continue;
            }
            if schedule.enforce_a1 {
                if let (Some(a), Some(b)) = (schedule.unavailable_interval(x), schedule.unavailable_interval(y)) {
                    if let Some(t) = overlap(a, b) {
                        out.push(Violation::A1 {
                            iteration: t,
                            ranks: (x.rank.min(y.rank), x.rank.max(y.rank)),
                        });
                    }
                }
            }
            if pairing.buddy(x.rank) == y.rank {
                if let (Some(a), Some(b)) = (schedule.failed_interval(x), schedule.failed_interval(y)) {
                    if let Some(t) = overlap(a, b) {
                        out.push(Violation::PairWide {
                            iteration: t,
                            pair: (x.rank.min(y.rank), x.rank.max(y.rank)),
                        });
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ActionKind {
    Repair,
    Detect,
}

#[derive(Clone, Copy, Debug)]
struct Pending {
    at: usize,
    rank: usize,
    kind: ActionKind,
}

/// Outcome of advancing the simulator to an iteration boundary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub iteration: usize,
    pub alive: Vec<bool>,
    /// Ranks that entered the failed state at this boundary.
    pub newly_failed: Vec<usize>,
    /// Ranks repaired from the failed state that must be resynchronised.
    pub resync: Vec<usize>,
}

impl Step {
    pub fn active_ranks(&self) -> Vec<usize> {
        (0..self.alive.len()).filter(|&r| self.alive[r]).collect()
    }
}

/// Drives rank states from a schedule; single-threaded and deterministic.
#[derive(Clone, Debug)]
pub struct FaultSimulator {
    schedule: FaultSchedule,
    states: Vec<RankState>,
    last: Option<usize>,
    next_event: usize,
    pending: Vec<Pending>,
}

impl FaultSimulator {
    pub fn new(schedule: FaultSchedule, n_ranks: usize) -> Result<Self> {
        if let Some(e) = schedule.events().iter().find(|e| e.rank >= n_ranks) {
            return Err(Error::Schedule(format!(
                "event `{e}` names rank {} but only {n_ranks} ranks exist",
                e.rank
            )));
        }
        Ok(Self {
            schedule,
            states: vec![
                RankState {
                    state: RankStatus::Ideal,
                    since: 0
                };
                n_ranks
            ],
            last: None,
            next_event: 0,
            pending: Vec::new(),
        })
    }

    pub fn schedule(&self) -> &FaultSchedule {
        &self.schedule
    }

    pub fn states(&self) -> &[RankState] {
        &self.states
    }

    pub fn n_ranks(&self) -> usize {
        self.states.len()
    }

    pub fn alive(&self) -> Vec<bool> {
        self.states.iter().map(|s| s.state.is_alive()).collect()
    }

    fn set_state(&mut self, rank: usize, next: RankStatus, at: usize) -> Result<()> {
        let cur = self.states[rank].state;
        if cur == next {
            return Ok(());
        }
        if !cur.can_transition_to(next) {
            return Err(Error::Schedule(format!(
                "rank {rank}: illegal transition {cur:?} -> {next:?} at iteration {at}"
            )));
        }
        self.states[rank] = RankState {
            state: next,
            since: at,
        };
        Ok(())
    }

    /// Applies every action due at or before `iteration` and returns the
    /// alive set for the iteration that starts there.
    pub fn advance(&mut self, iteration: usize) -> Result<Step> {
        if let Some(last) = self.last {
            if iteration <= last {
                return Err(Error::NonMonotoneIteration {
                    last,
                    got: iteration,
                });
            }
        }
        self.last = Some(iteration);
        let mut newly_failed = Vec::new();
        let mut resync = Vec::new();

        loop {
            // Earliest due time among pending actions and scheduled events.
            let next_pending = self.pending.iter().filter(|p| p.at <= iteration).map(|p| p.at).min();
            let next_event = self
                .schedule
                .events
                .get(self.next_event)
                .filter(|e| e.at_iteration <= iteration)
                .map(|e| e.at_iteration);
            let t = match (next_pending, next_event) {
                (None, None) => break,
                (Some(a), None) | (None, Some(a)) => a,
                (Some(a), Some(b)) => a.min(b),
            };

            // Repairs first, then detections, then new events.
            let mut due: Vec<Pending> = self.pending.iter().copied().filter(|p| p.at == t).collect();
            self.pending.retain(|p| p.at != t);
            due.sort_by_key(|p| (p.kind == ActionKind::Detect, p.rank));
            for p in due {
                match p.kind {
                    ActionKind::Repair => {
                        let was = self.states[p.rank].state;
                        if was != RankStatus::Ideal {
                            // A repair before detection cancels the detection.
                            self.pending
                                .retain(|q| !(q.rank == p.rank && q.kind == ActionKind::Detect));
                            self.set_state(p.rank, RankStatus::Ideal, t)?;
                            if was == RankStatus::Failed {
                                resync.push(p.rank);
                                newly_failed.retain(|&r| r != p.rank);
                            }
                        }
                    }
                    ActionKind::Detect => {
                        if self.states[p.rank].state == RankStatus::Erroneous {
                            self.set_state(p.rank, RankStatus::Failed, t)?;
                            newly_failed.push(p.rank);
                        }
                    }
                }
            }

            while let Some(e) = self.schedule.events.get(self.next_event).copied() {
                if e.at_iteration != t {
                    break;
                }
                self.next_event += 1;
                self.apply_event(&e, t, &mut newly_failed)?;
            }

            if self.schedule.enforce_a1 {
                let bad: Vec<usize> = (0..self.states.len())
                    .filter(|&r| {
                        matches!(self.states[r].state, RankStatus::Erroneous | RankStatus::Failed)
                    })
                    .collect();
                if bad.len() > 1 {
                    return Err(Error::A1Violation {
                        iteration: t,
                        ranks: bad,
                    });
                }
            }
        }

        Ok(Step {
            iteration,
            alive: self.alive(),
            newly_failed,
            resync,
        })
    }

    fn apply_event(&mut self, e: &FaultEvent, t: usize, newly_failed: &mut Vec<usize>) -> Result<()> {
        let cur = self.states[e.rank].state;
        match e.kind {
            FaultKind::TransientFault => {
                if cur == RankStatus::Ideal {
                    self.set_state(e.rank, RankStatus::Faulty, t)?;
                }
            }
            FaultKind::SoftError | FaultKind::FailStop => {
                if matches!(cur, RankStatus::Erroneous | RankStatus::Failed) {
                    return Err(Error::Schedule(format!(
                        "event `{e}` hits rank {} which is already {cur:?}",
                        e.rank
                    )));
                }
                if self.schedule.detection_latency == 0 {
                    self.set_state(e.rank, RankStatus::Failed, t)?;
                    newly_failed.push(e.rank);
                } else {
                    self.set_state(e.rank, RankStatus::Erroneous, t)?;
                    self.pending.push(Pending {
                        at: t + self.schedule.detection_latency,
                        rank: e.rank,
                        kind: ActionKind::Detect,
                    });
                }
            }
        }
        if let Some(r) = e.repair_at {
            self.pending.push(Pending {
                at: r,
                rank: e.rank,
                kind: ActionKind::Repair,
            });
        }
        Ok(())
    }
}
