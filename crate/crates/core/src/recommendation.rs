//! Study plans and resource rankings derived from an overlay.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain_model::{order_by_reachability, Concept, DomainModel, LearningResource, PrerequisiteGraph};
use crate::error::{Error, Result};
use crate::overlay::{LoStatus, OverlayReport};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearningPlan {
    pub target_concept: String,
    pub steps: Vec<String>,
    /// Supporting concept inserted into the primary plan; `None` for the
    /// primary plan itself.
    pub variant_of: Option<String>,
    pub unmet_lo_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceRecommendation {
    pub lo_id: String,
    pub ranked: Vec<LearningResource>,
    pub preference_tags_applied: BTreeSet<String>,
}

fn unmet(concept: &Concept, overlay: &OverlayReport) -> usize {
    concept
        .outcomes
        .iter()
        .filter(|lo| overlay.status(&lo.id) != Some(LoStatus::Achieved))
        .count()
}

/// Builds the primary study plan towards `target` and up to `k_alternatives`
/// variants that each insert one supporting concept right before the step it
/// supports.
///
/// A concept is deficient when any of its outcomes is not Achieved (outcomes
/// without a status count as Unknown). The primary plan lists the deficient
/// prerequisites of the target in topological order, followed by the target.
/// If the target itself is not deficient, a single plan with no steps is
/// returned. Variants whose insertion would contradict a prerequisite
/// relation among the plan's concepts are skipped.
pub fn recommend_path(
    model: &DomainModel,
    course: &BTreeSet<String>,
    overlay: &OverlayReport,
    target: &str,
    k_alternatives: usize,
) -> Result<Vec<LearningPlan>> {
    let target_concept = model.concept(target)?;
    if !course.contains(target) {
        return Err(Error::UnknownConcept(format!("{target} (not part of the course)")));
    }
    let deficient = |c: &Concept| unmet(c, overlay) > 0;
    if !deficient(target_concept) {
        return Ok(vec![LearningPlan {
            target_concept: target.to_owned(),
            steps: Vec::new(),
            variant_of: None,
            unmet_lo_count: 0,
        }]);
    }

    let graph = model.graph();
    let mut members: BTreeSet<&str> = graph
        .ancestors(target)
        .into_iter()
        .filter(|id| deficient(&model.concepts[*id]))
        .collect();
    members.insert(target_concept.id.as_str());
    let steps = order_by_reachability(&graph, &members);

    let count = |steps: &[&str]| steps.iter().map(|id| unmet(&model.concepts[*id], overlay)).sum();
    let mut plans = vec![LearningPlan {
        target_concept: target.to_owned(),
        steps: steps.iter().map(|s| s.to_string()).collect(),
        variant_of: None,
        unmet_lo_count: count(&steps),
    }];

    let positions: BTreeMap<&str, usize> = steps.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut candidates: Vec<(&str, &str)> = Vec::new();
    for &step in positions.keys() {
        for supporter in model.supporters_of(step) {
            if !positions.contains_key(supporter) {
                candidates.push((step, supporter));
            }
        }
    }
    for (supported, supporter) in candidates {
        if plans.len() > k_alternatives {
            break;
        }
        let at = positions[supported];
        if !insertion_consistent(&graph, &steps, supporter, at) {
            continue;
        }
        let mut variant = steps.clone();
        variant.insert(at, supporter);
        plans.push(LearningPlan {
            target_concept: target.to_owned(),
            unmet_lo_count: count(&variant),
            steps: variant.into_iter().map(str::to_owned).collect(),
            variant_of: Some(supporter.to_owned()),
        });
    }
    Ok(plans)
}

/// True when placing `inserted` at index `at` keeps every step after all of
/// its prerequisites.
fn insertion_consistent(graph: &PrerequisiteGraph<'_>, steps: &[&str], inserted: &str, at: usize) -> bool {
    let below = graph.descendants(inserted);
    let above = graph.ancestors(inserted);
    steps[..at].iter().all(|s| !below.contains(s)) && steps[at..].iter().all(|s| !above.contains(s))
}

/// Ranks the resources of the outcome's concept and of the concepts that
/// support it: most matching preference tags first, then introductory before
/// deepening before alternative, then by id.
pub fn recommend_resources(
    model: &DomainModel,
    lo_id: &str,
    preference_tags: &BTreeSet<String>,
) -> Result<ResourceRecommendation> {
    let (owner, _) = model.outcome(lo_id).ok_or_else(|| Error::UnknownLo(lo_id.to_owned()))?;
    let mut candidates: Vec<&LearningResource> = owner.resources.iter().collect();
    for supporter in model.supporters_of(&owner.id) {
        candidates.extend(&model.concepts[supporter].resources);
    }
    let mut seen = BTreeSet::new();
    candidates.retain(|r| seen.insert(r.id.as_str()));

    let mut applied = BTreeSet::new();
    let mut keyed: Vec<(usize, &LearningResource)> = candidates
        .into_iter()
        .map(|r| {
            let matching: Vec<&String> = r.tags.intersection(preference_tags).collect();
            applied.extend(matching.iter().map(|t| t.to_string()));
            (matching.len(), r)
        })
        .collect();
    keyed.sort_by(|(ma, a), (mb, b)| mb.cmp(ma).then(a.kind.cmp(&b.kind)).then(a.id.cmp(&b.id)));
    Ok(ResourceRecommendation {
        lo_id: lo_id.to_owned(),
        ranked: keyed.into_iter().map(|(_, r)| r.clone()).collect(),
        preference_tags_applied: applied,
    })
}
