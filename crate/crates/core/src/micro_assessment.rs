//! Adaptive micro-assessment: a deterministic binary search over the six
//! cognitive process levels that localizes the highest level a learner
//! masters for one learning outcome.
//!
//! The hypothesis is an interval `(low, high)` where `low` is the highest
//! level confirmed correct and `high` the highest level still possible. A
//! correct answer at level `p` raises `low` to `p`, a wrong one lowers `high`
//! to `p - 1`. Levels are assumed cumulative (mastering a level implies the
//! levels below it).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::domain_model::{de_process_level, DomainModel, MAX_PROCESS_LEVEL};
use crate::error::{Error, Result};
use crate::item_pool::{score_response, AssessmentItem, ItemPool};
use crate::learner_model::{EvidenceRecord, IndividualModel};
use crate::time::Timestamp;

pub const DEFAULT_BUDGET: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionStatus {
    Active,
    Concluded,
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelInterval {
    pub low: u8,
    pub high: u8,
}

/// A probe level with the number of correct answers collected at it so far.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    #[serde(deserialize_with = "de_process_level")]
    pub level: u8,
    pub hits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub budget: u32,
    /// Correct answers needed at a level before it counts as confirmed.
    pub confirmations: u32,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig { budget: DEFAULT_BUDGET, confirmations: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub schema_version: String,
    pub session_id: String,
    pub learner_id: String,
    pub lo_id: String,
    pub pool_id: String,
    pub required_level: u8,
    pub interval: LevelInterval,
    pub asked: Vec<String>,
    pub budget: u32,
    pub confirmations: u32,
    pub pending: Option<String>,
    pub probe: Option<Probe>,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionResult {
    pub lo_id: String,
    pub localized_level: u8,
    pub exact: bool,
    pub items_used: usize,
}

/// Opens a session for `lo_id` and selects the first item, placed at the
/// outcome's required level.
pub fn start_session(
    session_id: impl Into<String>,
    pool: &ItemPool,
    model: &DomainModel,
    individual: &IndividualModel,
    lo_id: &str,
    config: SessionConfig,
) -> Result<SessionState> {
    let (_, lo) = model.outcome(lo_id).ok_or_else(|| Error::UnknownLo(lo_id.to_owned()))?;
    if config.budget == 0 || config.confirmations == 0 {
        return Err(Error::BadParameter("budget and confirmations must be positive".into()));
    }
    if pool.items_for(lo_id, 1..=MAX_PROCESS_LEVEL, &BTreeSet::new()).is_empty() {
        return Err(Error::NoItems(lo_id.to_owned()));
    }
    let mut session = SessionState {
        schema_version: crate::SCHEMA_VERSION.to_owned(),
        session_id: session_id.into(),
        learner_id: individual.learner_id.clone(),
        lo_id: lo_id.to_owned(),
        pool_id: pool.pool_id.clone(),
        required_level: lo.required_level,
        interval: LevelInterval { low: 0, high: MAX_PROCESS_LEVEL },
        asked: Vec::new(),
        budget: config.budget,
        confirmations: config.confirmations,
        pending: None,
        probe: None,
        status: SessionStatus::Active,
    };
    session.next_item(pool)?;
    Ok(session)
}

impl SessionState {
    pub fn is_active(&self) -> bool {
        self.status == SessionStatus::Active
    }

    /// Level the next fresh probe targets.
    pub fn probe_level(&self) -> u8 {
        let LevelInterval { low, high } = self.interval;
        if let Some(probe) = self.probe {
            return probe.level;
        }
        if self.asked.is_empty() {
            return self.required_level.clamp(low + 1, high);
        }
        low + (high - low).div_ceil(2)
    }

    /// Returns the pending item, selecting one if none is pending.
    ///
    /// Picks the lowest-id unasked item at the probe level, falling back to
    /// other open levels by increasing distance (lower level first on ties).
    /// When nothing is left the session becomes Exhausted and
    /// [`Error::Exhausted`] is returned.
    pub fn next_item<'p>(&mut self, pool: &'p ItemPool) -> Result<&'p AssessmentItem> {
        if !self.is_active() {
            return Err(Error::SessionClosed);
        }
        if let Some(id) = &self.pending {
            return pool.item(id).ok_or_else(|| Error::NoItems(self.lo_id.clone()));
        }
        let asked: BTreeSet<String> = self.asked.iter().cloned().collect();
        if let Some(probe) = self.probe {
            let same_level = pool.items_for(&self.lo_id, probe.level..=probe.level, &asked);
            if let Some(item) = same_level.first() {
                self.pending = Some(item.id.clone());
                return Ok(item);
            }
            // No item left to confirm with: accept the hits collected so far.
            self.interval.low = probe.level;
            self.probe = None;
            if self.interval.low == self.interval.high {
                self.status = SessionStatus::Concluded;
                return Err(Error::SessionClosed);
            }
        }
        let LevelInterval { low, high } = self.interval;
        let target = self.probe_level();
        let chosen = pool
            .items_for(&self.lo_id, low + 1..=high, &asked)
            .into_iter()
            .min_by_key(|item| (item.level().abs_diff(target), item.level(), item.id.clone()));
        match chosen {
            Some(item) => {
                self.pending = Some(item.id.clone());
                Ok(item)
            }
            None => {
                self.status = SessionStatus::Exhausted;
                Err(Error::Exhausted)
            }
        }
    }

    /// Scores the answer to the pending item, narrows the interval and
    /// returns the evidence record to append to the learner model.
    pub fn submit_answer(
        &mut self,
        item: &AssessmentItem,
        chosen: &BTreeSet<usize>,
        seconds: u32,
        now: Timestamp,
    ) -> Result<EvidenceRecord> {
        if !self.is_active() {
            return Err(Error::SessionClosed);
        }
        if self.pending.as_deref() != Some(item.id.as_str()) {
            return Err(Error::WrongItem { expected: self.pending.clone(), got: item.id.clone() });
        }
        let correct = score_response(item, chosen)?;
        let level = item.level();
        if correct {
            let hits = match self.probe {
                Some(p) if p.level == level => p.hits + 1,
                _ => 1,
            };
            if hits >= self.confirmations {
                self.interval.low = level;
                self.probe = None;
            } else {
                self.probe = Some(Probe { level, hits });
            }
        } else {
            self.interval.high = level - 1;
            self.probe = None;
        }
        self.asked.push(item.id.clone());
        self.pending = None;
        if self.interval.low == self.interval.high {
            self.status = SessionStatus::Concluded;
        } else if self.asked.len() >= self.budget as usize {
            self.status = SessionStatus::Exhausted;
        }
        Ok(EvidenceRecord {
            item_id: item.id.clone(),
            lo_id: self.lo_id.clone(),
            process_level: level,
            correct,
            timestamp: now,
            seconds,
        })
    }

    pub fn result(&self) -> SessionResult {
        SessionResult {
            lo_id: self.lo_id.clone(),
            localized_level: self.interval.low,
            exact: self.interval.low == self.interval.high,
            items_used: self.asked.len(),
        }
    }
}

/// A deterministic learner that answers correctly exactly when the item's
/// process level does not exceed its true level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatedLearner {
    pub true_level: u8,
    /// Response time as a fraction of the item's `max_seconds`.
    pub time_fraction: f64,
}

impl SimulatedLearner {
    pub fn new(true_level: u8) -> Self {
        SimulatedLearner { true_level, time_fraction: 0.5 }
    }

    pub fn answer(&self, item: &AssessmentItem) -> (BTreeSet<usize>, u32) {
        let chosen = if item.level() <= self.true_level {
            item.answer_key.clone()
        } else {
            wrong_choice(item)
        };
        let seconds = (item.max_seconds as f64 * self.time_fraction).floor() as u32;
        (chosen, seconds)
    }
}

fn wrong_choice(item: &AssessmentItem) -> BTreeSet<usize> {
    (0..item.options.len())
        .map(|i| BTreeSet::from([i]))
        .find(|c| *c != item.answer_key)
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub item_id: String,
    pub level: u8,
    pub correct: bool,
    pub interval: LevelInterval,
}

/// Drives an open session to completion with a simulated learner. Answers
/// are stamped one second apart starting at `start`.
pub fn run_simulated(
    session: &mut SessionState,
    pool: &ItemPool,
    learner: &SimulatedLearner,
    start: Timestamp,
) -> Result<(Vec<TraceStep>, Vec<EvidenceRecord>)> {
    let mut trace = Vec::new();
    let mut evidence = Vec::new();
    while session.is_active() {
        let item = match session.next_item(pool) {
            Ok(item) => item,
            Err(Error::Exhausted | Error::SessionClosed) => break,
            Err(e) => return Err(e),
        };
        let (chosen, seconds) = learner.answer(item);
        let rec = session.submit_answer(item, &chosen, seconds, start.plus_seconds(evidence.len() as i64))?;
        trace.push(TraceStep { item_id: item.id.clone(), level: item.level(), correct: rec.correct, interval: session.interval });
        evidence.push(rec);
    }
    Ok((trace, evidence))
}
