//! Event-sourced individual learner model.
//!
//! The model is an append-only evidence log kept in (timestamp, item id)
//! order. Mastery, confirmed taxonomy level and achievement are recomputed
//! from the log on every query; nothing derived is ever stored. Queries that
//! take a `now` only see evidence recorded at or before `now`.

use serde::{Deserialize, Serialize};

use crate::domain_model::{de_process_level, LearningOutcome, MAX_PROCESS_LEVEL};
use crate::error::{Error, Result};
use crate::time::Timestamp;
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub item_id: String,
    pub lo_id: String,
    #[serde(deserialize_with = "de_process_level")]
    pub process_level: u8,
    pub correct: bool,
    pub timestamp: Timestamp,
    /// Response time in seconds.
    pub seconds: u32,
}

impl EvidenceRecord {
    fn sort_key(&self) -> (Timestamp, &str) {
        (self.timestamp, &self.item_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndividualModel {
    pub schema_version: String,
    pub learner_id: String,
    pub evidence: Vec<EvidenceRecord>,
}

/// Forgetting and achievement parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    /// Half-life of mastery in seconds. [`DecayParams::NO_DECAY`] (zero)
    /// disables forgetting.
    pub half_life_seconds: u64,
    pub mastery_threshold: f64,
    pub ema_alpha: f64,
}

impl DecayParams {
    pub const NO_DECAY: u64 = 0;
    pub const DEFAULT_HALF_LIFE: u64 = 7_776_000;

    pub fn new(half_life_seconds: u64, mastery_threshold: f64, ema_alpha: f64) -> Result<Self> {
        let params = DecayParams { half_life_seconds, mastery_threshold, ema_alpha };
        params.check()?;
        Ok(params)
    }

    pub fn without_decay() -> Self {
        DecayParams { half_life_seconds: Self::NO_DECAY, ..Default::default() }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.mastery_threshold > 0.0 && self.mastery_threshold <= 1.0) {
            return Err(Error::BadParameter(format!("mastery_threshold {} not in (0, 1]", self.mastery_threshold)));
        }
        if !(self.ema_alpha > 0.0 && self.ema_alpha < 1.0) {
            return Err(Error::BadParameter(format!("ema_alpha {} not in (0, 1)", self.ema_alpha)));
        }
        Ok(())
    }

    /// Multiplicative retention after `elapsed` seconds.
    pub fn retention(&self, elapsed: i64) -> f64 {
        if self.half_life_seconds == Self::NO_DECAY || elapsed <= 0 {
            return 1.0;
        }
        (-(elapsed as f64) / self.half_life_seconds as f64).exp2()
    }
}

impl Default for DecayParams {
    fn default() -> Self {
        DecayParams { half_life_seconds: Self::DEFAULT_HALF_LIFE, mastery_threshold: 0.75, ema_alpha: 0.5 }
    }
}

/// Derived per-outcome state; never persisted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoState {
    pub lo_id: String,
    pub mastery: f64,
    pub confirmed_level: u8,
    pub last_evidence: Option<Timestamp>,
}

impl IndividualModel {
    pub fn new(learner_id: impl Into<String>) -> Self {
        IndividualModel { schema_version: SCHEMA_VERSION.to_owned(), learner_id: learner_id.into(), evidence: Vec::new() }
    }

    /// Returns a copy of the model with `rec` at its sorted position.
    pub fn record_evidence(&self, rec: EvidenceRecord) -> Result<IndividualModel> {
        let mut next = self.clone();
        next.insert(rec)?;
        Ok(next)
    }

    /// In-place variant of [`IndividualModel::record_evidence`].
    pub fn insert(&mut self, rec: EvidenceRecord) -> Result<()> {
        if !(1..=MAX_PROCESS_LEVEL).contains(&rec.process_level) {
            return Err(Error::BadParameter(format!("process level {} out of range", rec.process_level)));
        }
        match self.evidence.binary_search_by(|e| e.sort_key().cmp(&rec.sort_key())) {
            Ok(_) => Err(Error::DuplicateEvidence { item: rec.item_id, timestamp: rec.timestamp.to_string() }),
            Err(pos) => {
                self.evidence.insert(pos, rec);
                Ok(())
            }
        }
    }

    pub fn is_sorted(&self) -> bool {
        self.evidence.windows(2).all(|w| w[0].sort_key() < w[1].sort_key())
    }

    /// Restores canonical order. Returns whether anything moved.
    pub fn sort_evidence(&mut self) -> bool {
        if self.is_sorted() {
            return false;
        }
        self.evidence.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        true
    }

    pub fn evidence_for<'a>(&'a self, lo_id: &'a str) -> impl Iterator<Item = &'a EvidenceRecord> + 'a {
        self.evidence.iter().filter(move |e| e.lo_id == lo_id)
    }

    fn visible<'a>(&'a self, lo_id: &'a str, now: Timestamp) -> impl Iterator<Item = &'a EvidenceRecord> + 'a {
        self.evidence_for(lo_id).filter(move |e| e.timestamp <= now)
    }

    pub fn has_evidence(&self, lo_id: &str, now: Timestamp) -> bool {
        self.visible(lo_id, now).next().is_some()
    }

    /// Recency-weighted mastery: an exponential moving average of the
    /// outcome's scored answers, decayed by the time since the last one.
    pub fn mastery(&self, lo_id: &str, now: Timestamp, params: &DecayParams) -> f64 {
        let mut ema: Option<f64> = None;
        let mut last = now;
        for rec in self.visible(lo_id, now) {
            let x = if rec.correct { 1.0 } else { 0.0 };
            ema = Some(match ema {
                None => x,
                Some(prev) => params.ema_alpha * x + (1.0 - params.ema_alpha) * prev,
            });
            last = rec.timestamp;
        }
        match ema {
            Some(m) => (m * params.retention(now.0 - last.0)).clamp(0.0, 1.0),
            None => 0.0,
        }
    }

    /// Highest process level whose most recent answer was correct; 0 if none.
    pub fn confirmed_level(&self, lo_id: &str) -> u8 {
        confirmed(self.evidence_for(lo_id))
    }

    pub fn confirmed_level_at(&self, lo_id: &str, now: Timestamp) -> u8 {
        confirmed(self.visible(lo_id, now))
    }

    pub fn is_achieved(&self, lo: &LearningOutcome, now: Timestamp, params: &DecayParams) -> bool {
        self.mastery(&lo.id, now, params) >= params.mastery_threshold
            && self.confirmed_level_at(&lo.id, now) >= lo.required_level
    }

    pub fn state(&self, lo_id: &str, now: Timestamp, params: &DecayParams) -> LoState {
        LoState {
            lo_id: lo_id.to_owned(),
            mastery: self.mastery(lo_id, now, params),
            confirmed_level: self.confirmed_level_at(lo_id, now),
            last_evidence: self.visible(lo_id, now).last().map(|e| e.timestamp),
        }
    }
}

fn confirmed<'a>(records: impl Iterator<Item = &'a EvidenceRecord>) -> u8 {
    let mut latest = [None::<bool>; MAX_PROCESS_LEVEL as usize];
    for rec in records {
        latest[rec.process_level as usize - 1] = Some(rec.correct);
    }
    latest.iter().rposition(|r| *r == Some(true)).map(|i| i as u8 + 1).unwrap_or(0)
}
