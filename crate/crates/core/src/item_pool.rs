//! Assessment items, each bound to exactly one learning outcome at one
//! taxonomy cell, plus coverage reporting and exact-match scoring.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::domain_model::{DomainModel, Finding, TaxonomyCell, ValidationReport, MAX_KNOWLEDGE_DIM, MAX_PROCESS_LEVEL};
use crate::error::{Error, Result};
use crate::SCHEMA_VERSION;

pub const DEFAULT_MIN_ITEMS_PER_LEVEL: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentItem {
    pub id: String,
    pub lo_id: String,
    pub cell: TaxonomyCell,
    pub stem: String,
    pub options: Vec<String>,
    pub answer_key: BTreeSet<usize>,
    pub max_seconds: u32,
}

impl AssessmentItem {
    pub fn level(&self) -> u8 {
        self.cell.process_level
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemPool {
    pub schema_version: String,
    pub pool_id: String,
    /// Domain model the pool's outcomes refer to, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module_id: Option<String>,
    #[serde(with = "item_list")]
    pub items: BTreeMap<String, AssessmentItem>,
}

mod item_list {
    use super::*;
    use serde::ser::SerializeSeq;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(map: &BTreeMap<String, AssessmentItem>, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(map.len()))?;
        for item in map.values() {
            seq.serialize_element(item)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<String, AssessmentItem>, D::Error> {
        let mut map = BTreeMap::new();
        for item in Vec::<AssessmentItem>::deserialize(d)? {
            let id = item.id.clone();
            if map.insert(id.clone(), item).is_some() {
                return Err(serde::de::Error::custom(format!("duplicate item id `{id}`")));
            }
        }
        Ok(map)
    }
}

/// Item counts per learning outcome on the 6×4 taxonomy grid, indexed
/// `[process_level - 1][knowledge_dim - 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageMatrix {
    pub outcomes: BTreeMap<String, [[u32; MAX_KNOWLEDGE_DIM as usize]; MAX_PROCESS_LEVEL as usize]>,
}

impl CoverageMatrix {
    pub fn count(&self, lo_id: &str, cell: TaxonomyCell) -> u32 {
        self.outcomes
            .get(lo_id)
            .map(|grid| grid[cell.process_level as usize - 1][cell.knowledge_dim as usize - 1])
            .unwrap_or(0)
    }

    pub fn total(&self, lo_id: &str) -> u32 {
        self.outcomes.get(lo_id).map(|g| g.iter().flatten().sum()).unwrap_or(0)
    }
}

impl ItemPool {
    pub fn new(pool_id: impl Into<String>) -> Self {
        ItemPool {
            schema_version: SCHEMA_VERSION.to_owned(),
            pool_id: pool_id.into(),
            module_id: None,
            items: BTreeMap::new(),
        }
    }

    pub fn add_item(&mut self, item: AssessmentItem) {
        self.items.insert(item.id.clone(), item);
    }

    pub fn item(&self, id: &str) -> Option<&AssessmentItem> {
        self.items.get(id)
    }

    pub fn validate(&self, model: &DomainModel) -> ValidationReport {
        self.validate_with(model, DEFAULT_MIN_ITEMS_PER_LEVEL)
    }

    /// Checks referential integrity and item well-formedness, and warns about
    /// outcomes with no items or fewer than `min_items_per_level` items at
    /// their required level.
    pub fn validate_with(&self, model: &DomainModel, min_items_per_level: usize) -> ValidationReport {
        let mut findings = Vec::new();
        let mut per_lo: BTreeMap<&str, Vec<&AssessmentItem>> = BTreeMap::new();

        for item in self.items.values() {
            match model.outcome(&item.lo_id) {
                Some(_) => per_lo.entry(&item.lo_id).or_default().push(item),
                None => findings.push(Finding::error(
                    "UNKNOWN_LO",
                    &item.id,
                    format!("item references unknown learning outcome `{}`", item.lo_id),
                )),
            }
            if item.answer_key.is_empty() || item.answer_key.iter().any(|&i| i >= item.options.len()) {
                findings.push(Finding::error(
                    "BAD_KEY",
                    &item.id,
                    format!("answer key {:?} invalid for {} options", item.answer_key, item.options.len()),
                ));
            }
            if item.options.len() < 2 || item.max_seconds == 0 || !item.cell.is_valid() {
                findings.push(Finding::error(
                    "BAD_ITEM",
                    &item.id,
                    "items need at least two options, a positive time limit and a valid taxonomy cell",
                ));
            }
        }

        for (_, lo) in model.outcomes() {
            let items = per_lo.get(lo.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            if items.is_empty() {
                findings.push(Finding::warning("NO_ITEMS", &lo.id, "learning outcome has no items"));
                continue;
            }
            let at_level = items.iter().filter(|i| i.level() == lo.required_level).count();
            if at_level < min_items_per_level {
                findings.push(Finding::warning(
                    "THIN_COVERAGE",
                    &lo.id,
                    format!(
                        "{at_level} item(s) at required level {}, expected at least {min_items_per_level}",
                        lo.required_level
                    ),
                ));
            }
        }

        ValidationReport::from_findings(findings)
    }

    pub fn coverage_matrix(&self, model: &DomainModel) -> Result<CoverageMatrix> {
        let mut outcomes: BTreeMap<String, _> = model
            .outcomes()
            .map(|(_, lo)| (lo.id.clone(), [[0u32; MAX_KNOWLEDGE_DIM as usize]; MAX_PROCESS_LEVEL as usize]))
            .collect();
        for item in self.items.values() {
            let grid = outcomes.get_mut(&item.lo_id).ok_or_else(|| Error::UnknownLo(item.lo_id.clone()))?;
            if !item.cell.is_valid() {
                return Err(Error::BadParameter(format!("item `{}` has an invalid taxonomy cell", item.id)));
            }
            grid[item.cell.process_level as usize - 1][item.cell.knowledge_dim as usize - 1] += 1;
        }
        Ok(CoverageMatrix { outcomes })
    }

    /// Items for `lo_id` whose process level lies in `levels`, minus
    /// `exclude`, sorted by (process level, id).
    pub fn items_for(&self, lo_id: &str, levels: RangeInclusive<u8>, exclude: &BTreeSet<String>) -> Vec<&AssessmentItem> {
        let mut out: Vec<&AssessmentItem> = self
            .items
            .values()
            .filter(|i| i.lo_id == lo_id && levels.contains(&i.level()) && !exclude.contains(&i.id))
            .collect();
        out.sort_by(|a, b| (a.level(), &a.id).cmp(&(b.level(), &b.id)));
        out
    }
}

/// True iff `chosen` equals the answer key exactly.
pub fn score_response(item: &AssessmentItem, chosen: &BTreeSet<usize>) -> Result<bool> {
    if let Some(&bad) = chosen.iter().find(|&&i| i >= item.options.len()) {
        return Err(Error::BadResponse { item: item.id.clone(), index: bad, options: item.options.len() });
    }
    Ok(*chosen == item.answer_key)
}
