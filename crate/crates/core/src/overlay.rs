//! Overlay of a course's domain model with a learner's individual model.
//!
//! Each course outcome receives one [`LoStatus`]. Failed outcomes cast
//! suspicion on the untested outcomes of their prerequisite concepts, the
//! boundary of fully achieved concepts forms the learner's frontier, and
//! supporting concepts outside the course are listed as out of course.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain_model::{merge_models, Concept, DomainModel, EdgeKind};
use crate::error::{Error, Result};
use crate::item_pool::ItemPool;
use crate::learner_model::{DecayParams, IndividualModel};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LoStatus {
    Achieved,
    NotAchieved,
    Suspected,
    Unknown,
    OutOfCourse,
}

impl LoStatus {
    pub fn is_deficit(self) -> bool {
        matches!(self, LoStatus::NotAchieved | LoStatus::Suspected)
    }
}

/// Status of a whole concept, aggregated over its outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConceptStatus {
    Achieved,
    NotAchieved,
    Suspected,
    Open,
    OutOfCourse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayReport {
    pub course_id: String,
    pub learner_id: String,
    pub now: Timestamp,
    pub statuses: BTreeMap<String, LoStatus>,
    /// Deficient outcomes in topological concept order.
    pub deficits: Vec<String>,
    pub frontier: BTreeSet<String>,
    pub no_statement: bool,
}

impl OverlayReport {
    pub fn status(&self, lo_id: &str) -> Option<LoStatus> {
        self.statuses.get(lo_id).copied()
    }

    /// True when the concept has outcomes and all of them are Achieved.
    pub fn fully_achieved(&self, concept: &Concept) -> bool {
        !concept.outcomes.is_empty()
            && concept.outcomes.iter().all(|lo| self.status(&lo.id) == Some(LoStatus::Achieved))
    }

    pub fn concept_status(&self, concept: &Concept, in_course: bool) -> ConceptStatus {
        if !in_course {
            return ConceptStatus::OutOfCourse;
        }
        let statuses: Vec<Option<LoStatus>> = concept.outcomes.iter().map(|lo| self.status(&lo.id)).collect();
        if self.fully_achieved(concept) {
            ConceptStatus::Achieved
        } else if statuses.contains(&Some(LoStatus::NotAchieved)) {
            ConceptStatus::NotAchieved
        } else if statuses.contains(&Some(LoStatus::Suspected)) {
            ConceptStatus::Suspected
        } else {
            ConceptStatus::Open
        }
    }
}

fn check_course(model: &DomainModel, course: &BTreeSet<String>) -> Result<()> {
    for id in course {
        model.concept(id)?;
    }
    Ok(())
}

pub fn overlay(
    model: &DomainModel,
    course: &BTreeSet<String>,
    individual: &IndividualModel,
    now: Timestamp,
    params: &DecayParams,
) -> Result<OverlayReport> {
    check_course(model, course)?;
    let course_concepts: Vec<&Concept> = course.iter().map(|id| &model.concepts[id]).collect();

    let no_statement = !course_concepts
        .iter()
        .flat_map(|c| &c.outcomes)
        .any(|lo| individual.has_evidence(&lo.id, now));

    let mut statuses = BTreeMap::new();
    for concept in &course_concepts {
        for lo in &concept.outcomes {
            let status = if no_statement || !individual.has_evidence(&lo.id, now) {
                LoStatus::Unknown
            } else if individual.is_achieved(lo, now, params) {
                LoStatus::Achieved
            } else {
                LoStatus::NotAchieved
            };
            statuses.insert(lo.id.clone(), status);
        }
    }

    let graph = model.graph();
    if !no_statement {
        let failing: BTreeSet<&str> = course_concepts
            .iter()
            .filter(|c| c.outcomes.iter().any(|lo| statuses[&lo.id] == LoStatus::NotAchieved))
            .map(|c| c.id.as_str())
            .collect();
        let suspects: BTreeSet<&str> = failing
            .iter()
            .flat_map(|c| graph.ancestors(c))
            .filter(|c| course.contains(*c))
            .collect();
        for id in suspects {
            for lo in &model.concepts[id].outcomes {
                let status = statuses.get_mut(&lo.id).expect("course outcome has a status");
                if *status == LoStatus::Unknown {
                    *status = LoStatus::Suspected;
                }
            }
        }
    }

    for edge in model.edges.iter().filter(|e| e.kind == EdgeKind::Supporting) {
        let outside = match (course.contains(&edge.from), course.contains(&edge.to)) {
            (false, true) => &edge.from,
            (true, false) => &edge.to,
            _ => continue,
        };
        if let Some(concept) = model.concepts.get(outside) {
            for lo in &concept.outcomes {
                statuses.entry(lo.id.clone()).or_insert(LoStatus::OutOfCourse);
            }
        }
    }

    let mut report = OverlayReport {
        course_id: model.module_id.clone(),
        learner_id: individual.learner_id.clone(),
        now,
        statuses,
        deficits: Vec::new(),
        frontier: BTreeSet::new(),
        no_statement,
    };
    if no_statement {
        return Ok(report);
    }

    for id in model.topological_order(course)? {
        for lo in &model.concepts[&id].outcomes {
            if report.statuses[&lo.id].is_deficit() {
                report.deficits.push(lo.id.clone());
            }
        }
    }

    let frontier: BTreeSet<String> = course_concepts
        .iter()
        .filter(|c| report.fully_achieved(c))
        .filter(|c| {
            graph
                .successors(&c.id)
                .any(|next| course.contains(next) && !report.fully_achieved(&model.concepts[next]))
        })
        .map(|c| c.id.clone())
        .collect();
    report.frontier = frontier;
    Ok(report)
}

/// Merges the course model with extension models and returns the concepts of
/// the merged model whose outcomes the learner has all achieved.
pub fn find_anchors(
    course_model: &DomainModel,
    extensions: &[DomainModel],
    individual: &IndividualModel,
    now: Timestamp,
    params: &DecayParams,
) -> Result<(DomainModel, BTreeSet<String>)> {
    let mut all = Vec::with_capacity(extensions.len() + 1);
    all.push(course_model.clone());
    all.extend(extensions.iter().cloned());
    let merged = merge_models(&all)?;
    let anchors = merged
        .concepts
        .values()
        .filter(|c| !c.outcomes.is_empty() && c.outcomes.iter().all(|lo| individual.is_achieved(lo, now, params)))
        .map(|c| c.id.clone())
        .collect();
    Ok((merged, anchors))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChallengeConfig {
    pub streak_len: usize,
    pub fast_factor: f64,
    pub time_factor: f64,
}

impl Default for ChallengeConfig {
    fn default() -> Self {
        ChallengeConfig { streak_len: 5, fast_factor: 0.5, time_factor: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeSuggestion {
    pub concept_id: String,
    pub next_level: u8,
    pub time_factor: f64,
}

/// Suggests a harder, faster assessment for a concept the learner has fully
/// achieved with a streak of quick correct answers. Response times are
/// compared against the answered items' `max_seconds` from `pool`; answers to
/// items missing from the pool break the streak.
pub fn challenge_check(
    model: &DomainModel,
    pool: &ItemPool,
    concept_id: &str,
    individual: &IndividualModel,
    now: Timestamp,
    params: &DecayParams,
    config: &ChallengeConfig,
) -> Result<Option<ChallengeSuggestion>> {
    let concept = model.concept(concept_id)?;
    if config.streak_len == 0 {
        return Err(Error::BadParameter("streak_len must be positive".into()));
    }
    if concept.outcomes.is_empty() || !concept.outcomes.iter().all(|lo| individual.is_achieved(lo, now, params)) {
        return Ok(None);
    }
    let lo_ids: BTreeSet<&str> = concept.outcomes.iter().map(|lo| lo.id.as_str()).collect();
    let recent: Vec<_> = individual
        .evidence
        .iter()
        .filter(|e| e.timestamp <= now && lo_ids.contains(e.lo_id.as_str()))
        .rev()
        .take(config.streak_len)
        .collect();
    if recent.len() < config.streak_len {
        return Ok(None);
    }
    let fast_streak = recent.iter().all(|e| {
        e.correct
            && pool
                .item(&e.item_id)
                .is_some_and(|item| e.seconds as f64 <= config.fast_factor * item.max_seconds as f64)
    });
    if !fast_streak {
        return Ok(None);
    }
    let top = concept.outcomes.iter().map(|lo| lo.required_level).max().unwrap_or(0);
    Ok(Some(ChallengeSuggestion {
        concept_id: concept.id.clone(),
        next_level: (top + 1).min(crate::domain_model::MAX_PROCESS_LEVEL),
        time_factor: config.time_factor,
    }))
}
