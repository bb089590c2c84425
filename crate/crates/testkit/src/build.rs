//! Hand-built models for example-style tests.

use compass_core::{Concept, DomainModel, Edge, EvidenceRecord, LearningOutcome, TaxonomyCell, Timestamp};

use crate::gen::BASE_TIME;

/// Each concept `X` gets one outcome `LO-X` at cell (3, 2) requiring level 3.
pub fn simple_model(module_id: &str, concepts: &[&str], edges: &[Edge]) -> DomainModel {
    let mut m = DomainModel::new(module_id, format!("Module {module_id}"));
    for id in concepts {
        m.add_concept(Concept {
            id: id.to_string(),
            title: format!("Concept {id}"),
            outcomes: vec![LearningOutcome {
                id: format!("LO-{id}"),
                description: format!("outcome of {id}"),
                cell: TaxonomyCell::new(3, 2).unwrap(),
                required_level: 3,
            }],
            resources: vec![],
        });
    }
    m.edges = edges.to_vec();
    m
}

pub fn chain(ids: &[&str]) -> DomainModel {
    let edges: Vec<Edge> = ids.windows(2).map(|w| Edge::prerequisite(w[0], w[1])).collect();
    simple_model("chain", ids, &edges)
}

/// Evidence `offset` seconds after the generators' base time.
pub fn record(item: &str, lo: &str, level: u8, correct: bool, offset: i64) -> EvidenceRecord {
    EvidenceRecord {
        item_id: item.into(),
        lo_id: lo.into(),
        process_level: level,
        correct,
        timestamp: Timestamp(BASE_TIME + offset),
        seconds: 10,
    }
}

pub fn at(offset: i64) -> Timestamp {
    Timestamp(BASE_TIME + offset)
}
