//! Seeded random instances.

use std::collections::BTreeSet;

use compass_core::{
    AssessmentItem, Concept, DomainModel, Edge, EdgeKind, EvidenceRecord, IndividualModel, ItemPool, LearningOutcome,
    LearningResource, ResourceKind, TaxonomyCell, Timestamp,
};
use rand::rngs::StdRng;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};

pub const BASE_TIME: i64 = 1_735_689_600; // 2025-01-01T00:00:00Z

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct DagShape {
    pub max_nodes: usize,
    pub max_prerequisite_edges: usize,
    pub max_supporting_edges: usize,
}

impl Default for DagShape {
    fn default() -> Self {
        DagShape { max_nodes: 20, max_prerequisite_edges: 60, max_supporting_edges: 6 }
    }
}

fn cell(rng: &mut StdRng) -> TaxonomyCell {
    TaxonomyCell::new(rng.random_range(1..=6), rng.random_range(1..=4)).unwrap()
}

fn concept(rng: &mut StdRng, id: &str, tag_pool: &[&str]) -> Concept {
    let outcomes = (0..rng.random_range(1..=2))
        .map(|k| LearningOutcome {
            id: format!("{id}-lo{k}"),
            description: format!("outcome {k} of {id}"),
            cell: cell(rng),
            required_level: rng.random_range(1..=6),
        })
        .collect();
    let resources = (0..rng.random_range(0..=2))
        .map(|k| LearningResource {
            id: format!("{id}-r{k}"),
            title: format!("resource {k} of {id}"),
            uri: format!("https://example.org/{id}/{k}"),
            kind: *[ResourceKind::Introductory, ResourceKind::Deepening, ResourceKind::Alternative].choose(rng).unwrap(),
            tags: tag_pool.iter().filter(|_| rng.random_bool(0.4)).map(|t| t.to_string()).collect(),
        })
        .collect();
    Concept { id: id.to_owned(), title: format!("Concept {id}"), outcomes, resources }
}

pub const TAGS: [&str; 4] = ["text", "video", "exercise", "audio"];

/// A random model whose prerequisite edges form a DAG. Concept ids are
/// shuffled relative to the topology so id order carries no information.
pub fn random_dag(rng: &mut StdRng, module_id: &str, prefix: &str, shape: DagShape) -> DomainModel {
    let n = rng.random_range(1..=shape.max_nodes);
    let mut ids: Vec<String> = (0..n).map(|i| format!("{prefix}{i:02}")).collect();
    ids.shuffle(rng);
    // ids[i] may only point at ids[j] with i < j.
    let mut model = DomainModel::new(module_id, format!("Module {module_id}"));
    for id in &ids {
        model.add_concept(concept(rng, id, &TAGS));
    }
    let target_edges = rng.random_range(0..=shape.max_prerequisite_edges);
    let mut edges = BTreeSet::new();
    if n > 1 {
        for _ in 0..target_edges * 2 {
            if edges.len() >= target_edges {
                break;
            }
            let i = rng.random_range(0..n - 1);
            let j = rng.random_range(i + 1..n);
            edges.insert(Edge::prerequisite(ids[i].clone(), ids[j].clone()));
        }
        for _ in 0..rng.random_range(0..=shape.max_supporting_edges) {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j {
                edges.insert(Edge::supporting(ids[i].clone(), ids[j].clone()));
            }
        }
    }
    model.edges = edges.into_iter().collect();
    model.edges.shuffle(rng);
    model
}

/// Adds one prerequisite edge from a concept back to one of its transitive
/// prerequisites, closing a cycle. Returns the injected edge, or `None` when
/// the model has no prerequisite edge to reverse.
pub fn inject_back_edge(rng: &mut StdRng, model: &mut DomainModel) -> Option<Edge> {
    let reach = crate::oracle::reachability(model);
    let pairs: Vec<(String, String)> = reach
        .pairs()
        .into_iter()
        .filter(|(u, v)| u != v)
        .collect();
    let (from, to) = pairs.choose(rng)?.clone();
    // `to` is reachable from `from`; the new edge `to -> from` closes a cycle.
    let edge = Edge::prerequisite(to, from);
    model.edges.push(edge.clone());
    Some(edge)
}

/// A random model guaranteed to have at least one prerequisite edge.
pub fn random_dag_with_edges(rng: &mut StdRng, shape: DagShape) -> DomainModel {
    loop {
        let m = random_dag(rng, "m", "c", shape);
        if m.edges.iter().any(|e| e.kind == EdgeKind::Prerequisite) {
            return m;
        }
    }
}

pub fn random_pool(rng: &mut StdRng, model: &DomainModel, max_items: usize) -> ItemPool {
    let los: Vec<String> = model.outcomes().map(|(_, lo)| lo.id.clone()).collect();
    let mut pool = ItemPool::new("pool");
    pool.module_id = Some(model.module_id.clone());
    if los.is_empty() {
        return pool;
    }
    for k in 0..rng.random_range(0..=max_items) {
        let options = rng.random_range(2..=5);
        let mut key: BTreeSet<usize> = (0..options).filter(|_| rng.random_bool(0.3)).collect();
        if key.is_empty() {
            key.insert(rng.random_range(0..options));
        }
        pool.add_item(AssessmentItem {
            id: format!("item{k:03}"),
            lo_id: los.choose(rng).unwrap().clone(),
            cell: cell(rng),
            stem: format!("stem {k}"),
            options: (0..options).map(|o| format!("option {o}")).collect(),
            answer_key: key,
            max_seconds: rng.random_range(10..=300),
        });
    }
    pool
}

/// Random evidence records over the model's outcomes. Records are unique by
/// (timestamp, item id) and returned in arbitrary order.
pub fn random_evidence(rng: &mut StdRng, model: &DomainModel, max_records: usize, span_seconds: i64) -> Vec<EvidenceRecord> {
    let los: Vec<String> = model.outcomes().map(|(_, lo)| lo.id.clone()).collect();
    if los.is_empty() {
        return Vec::new();
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for _ in 0..rng.random_range(0..=max_records) {
        let item_id = format!("item{:03}", rng.random_range(0..40));
        // Coarse timestamps so ties on the clock happen regularly.
        let timestamp = Timestamp(BASE_TIME + rng.random_range(0..=span_seconds / 60) * 60);
        if !seen.insert((timestamp, item_id.clone())) {
            continue;
        }
        out.push(EvidenceRecord {
            item_id,
            lo_id: los.choose(rng).unwrap().clone(),
            process_level: rng.random_range(1..=6),
            correct: rng.random_bool(0.6),
            timestamp,
            seconds: rng.random_range(0..=300),
        });
    }
    out.shuffle(rng);
    out
}

pub fn learner_from(records: &[EvidenceRecord]) -> IndividualModel {
    let mut m = IndividualModel::new("learner");
    for r in records {
        m.insert(r.clone()).expect("generated records are unique");
    }
    m
}

/// Random subset of the model's concepts (possibly empty).
pub fn random_course(rng: &mut StdRng, model: &DomainModel, p: f64) -> BTreeSet<String> {
    model.concepts.keys().filter(|_| rng.random_bool(p)).cloned().collect()
}
