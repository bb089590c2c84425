//! The didactically enriched domain model: concepts with their learning
//! outcomes and resources, joined by typed edges.
//!
//! Prerequisite edges point from the prerequisite to the dependent concept,
//! so a topological order reads in study order. Supporting edges mark an
//! optional auxiliary concept that eases the acquisition of its target.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::SCHEMA_VERSION;

pub const MIN_LEVEL: u8 = 1;
pub const MAX_PROCESS_LEVEL: u8 = 6;
pub const MAX_KNOWLEDGE_DIM: u8 = 4;
pub const DEFAULT_REQUIRED_LEVEL: u8 = 3;

/// A cell of the 6×4 taxonomy grid: cognitive process level
/// (Remember..Create) by knowledge dimension (Factual..Metacognitive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawCell")]
pub struct TaxonomyCell {
    pub process_level: u8,
    pub knowledge_dim: u8,
}

#[derive(Deserialize)]
struct RawCell {
    process_level: i64,
    knowledge_dim: i64,
}

impl TryFrom<RawCell> for TaxonomyCell {
    type Error = String;

    fn try_from(raw: RawCell) -> std::result::Result<Self, String> {
        let level = check_range(raw.process_level, MAX_PROCESS_LEVEL, "process_level")?;
        let dim = check_range(raw.knowledge_dim, MAX_KNOWLEDGE_DIM, "knowledge_dim")?;
        Ok(TaxonomyCell { process_level: level, knowledge_dim: dim })
    }
}

fn check_range(value: i64, max: u8, field: &str) -> std::result::Result<u8, String> {
    if (MIN_LEVEL as i64..=max as i64).contains(&value) {
        Ok(value as u8)
    } else {
        Err(format!("{field} must lie in {MIN_LEVEL}..={max}, got {value}"))
    }
}

impl TaxonomyCell {
    pub fn new(process_level: u8, knowledge_dim: u8) -> Result<Self> {
        TaxonomyCell::try_from(RawCell {
            process_level: process_level as i64,
            knowledge_dim: knowledge_dim as i64,
        })
        .map_err(Error::BadParameter)
    }

    pub fn is_valid(&self) -> bool {
        (MIN_LEVEL..=MAX_PROCESS_LEVEL).contains(&self.process_level)
            && (MIN_LEVEL..=MAX_KNOWLEDGE_DIM).contains(&self.knowledge_dim)
    }
}

pub(crate) fn de_process_level<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<u8, D::Error> {
    let raw = i64::deserialize(d)?;
    check_range(raw, MAX_PROCESS_LEVEL, "level").map_err(serde::de::Error::custom)
}

fn default_required_level() -> u8 {
    DEFAULT_REQUIRED_LEVEL
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearningOutcome {
    pub id: String,
    pub description: String,
    pub cell: TaxonomyCell,
    /// Process level at which the course demands mastery.
    #[serde(default = "default_required_level", deserialize_with = "de_process_level")]
    pub required_level: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceKind {
    Introductory,
    Deepening,
    Alternative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearningResource {
    pub id: String,
    pub title: String,
    pub uri: String,
    pub kind: ResourceKind,
    #[serde(default)]
    pub tags: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub outcomes: Vec<LearningOutcome>,
    #[serde(default)]
    pub resources: Vec<LearningResource>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Prerequisite,
    Supporting,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn prerequisite(from: impl Into<String>, to: impl Into<String>) -> Self {
        Edge { from: from.into(), to: to.into(), kind: EdgeKind::Prerequisite }
    }

    pub fn supporting(from: impl Into<String>, to: impl Into<String>) -> Self {
        Edge { from: from.into(), to: to.into(), kind: EdgeKind::Supporting }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainModel {
    pub schema_version: String,
    pub module_id: String,
    pub title: String,
    #[serde(with = "concept_list")]
    pub concepts: BTreeMap<String, Concept>,
    pub edges: Vec<Edge>,
}

/// Concepts travel as an id-sorted array; duplicate ids are rejected on read.
mod concept_list {
    use super::*;
    use serde::ser::SerializeSeq;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(map: &BTreeMap<String, Concept>, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(map.len()))?;
        for concept in map.values() {
            seq.serialize_element(concept)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<String, Concept>, D::Error> {
        let list = Vec::<Concept>::deserialize(d)?;
        let mut map = BTreeMap::new();
        for concept in list {
            let id = concept.id.clone();
            if map.insert(id.clone(), concept).is_some() {
                return Err(serde::de::Error::custom(format!("duplicate concept id `{id}`")));
            }
        }
        Ok(map)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    pub subject: String,
    /// Node list for CYCLE findings, in edge order starting at the smallest id.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<String>,
}

impl Finding {
    pub fn error(code: &str, subject: impl Into<String>, message: impl Into<String>) -> Self {
        Finding {
            severity: Severity::Error,
            code: code.to_owned(),
            message: message.into(),
            subject: subject.into(),
            nodes: Vec::new(),
        }
    }

    pub fn warning(code: &str, subject: impl Into<String>, message: impl Into<String>) -> Self {
        Finding { severity: Severity::Warning, ..Finding::error(code, subject, message) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    /// Sorts findings by (code, subject) and derives `ok`.
    pub fn from_findings(mut findings: Vec<Finding>) -> Self {
        findings.sort_by(|a, b| {
            (&a.code, &a.subject, &a.message, &a.nodes).cmp(&(&b.code, &b.subject, &b.message, &b.nodes))
        });
        let ok = findings.iter().all(|f| f.severity != Severity::Error);
        ValidationReport { ok, findings }
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn with_code<'a>(&'a self, code: &'a str) -> impl Iterator<Item = &'a Finding> + 'a {
        self.findings.iter().filter(move |f| f.code == code)
    }

    pub fn has(&self, code: &str) -> bool {
        self.with_code(code).next().is_some()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ok: {}", self.ok)?;
        for finding in &self.findings {
            writeln!(f, "{finding}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let severity = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{severity} {} [{}]: {}", self.code, self.subject, self.message)?;
        if !self.nodes.is_empty() {
            write!(f, " ({})", self.nodes.join(" -> "))?;
        }
        Ok(())
    }
}

/// Adjacency over prerequisite edges whose endpoints both exist.
pub struct PrerequisiteGraph<'a> {
    successors: BTreeMap<&'a str, BTreeSet<&'a str>>,
    predecessors: BTreeMap<&'a str, BTreeSet<&'a str>>,
}

impl<'a> PrerequisiteGraph<'a> {
    pub fn new(model: &'a DomainModel) -> Self {
        let mut successors: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut predecessors: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for id in model.concepts.keys() {
            successors.insert(id, BTreeSet::new());
            predecessors.insert(id, BTreeSet::new());
        }
        for edge in &model.edges {
            if edge.kind != EdgeKind::Prerequisite
                || !model.concepts.contains_key(&edge.from)
                || !model.concepts.contains_key(&edge.to)
            {
                continue;
            }
            successors.get_mut(edge.from.as_str()).unwrap().insert(&edge.to);
            predecessors.get_mut(edge.to.as_str()).unwrap().insert(&edge.from);
        }
        PrerequisiteGraph { successors, predecessors }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.successors.contains_key(id)
    }

    pub fn successors(&self, id: &str) -> impl Iterator<Item = &'a str> + '_ {
        self.successors.get(id).into_iter().flatten().copied()
    }

    /// All concepts from which `id` can be reached (its direct and indirect
    /// prerequisites). `id` itself is included only if it lies on a cycle.
    pub fn ancestors(&self, id: &str) -> BTreeSet<&'a str> {
        walk(&self.predecessors, id)
    }

    /// All concepts reachable from `id`.
    pub fn descendants(&self, id: &str) -> BTreeSet<&'a str> {
        walk(&self.successors, id)
    }

    /// Strongly connected components with more than one member, each sorted.
    fn cyclic_components(&self) -> Vec<BTreeSet<&'a str>> {
        let mut seen = BTreeSet::new();
        let mut components = Vec::new();
        for &id in self.successors.keys() {
            if seen.contains(id) {
                continue;
            }
            let down = self.descendants(id);
            if !down.contains(id) {
                continue;
            }
            let up = self.ancestors(id);
            let component: BTreeSet<&str> = down.intersection(&up).copied().collect();
            seen.extend(component.iter().copied());
            components.push(component);
        }
        components
    }

    /// Shortest cycle through the smallest member of `component`.
    fn cycle_through(&self, component: &BTreeSet<&'a str>) -> Vec<String> {
        let start = *component.iter().next().expect("component is non-empty");
        let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            for next in self.successors(node) {
                if !component.contains(next) {
                    continue;
                }
                if next == start {
                    let mut path = vec![node];
                    let mut cur = node;
                    while cur != start {
                        cur = parent[cur];
                        path.push(cur);
                    }
                    path.reverse();
                    return path.into_iter().map(str::to_owned).collect();
                }
                if next != start && !parent.contains_key(next) {
                    parent.insert(next, node);
                    queue.push_back(next);
                }
            }
        }
        component.iter().map(|s| s.to_string()).collect()
    }
}

fn walk<'a>(adjacency: &BTreeMap<&'a str, BTreeSet<&'a str>>, start: &str) -> BTreeSet<&'a str> {
    let mut out = BTreeSet::new();
    let mut stack: Vec<&str> = adjacency.get(start).into_iter().flatten().copied().collect();
    while let Some(node) = stack.pop() {
        if out.insert(node) {
            stack.extend(adjacency.get(node).into_iter().flatten().copied());
        }
    }
    out
}

impl DomainModel {
    pub fn new(module_id: impl Into<String>, title: impl Into<String>) -> Self {
        DomainModel {
            schema_version: SCHEMA_VERSION.to_owned(),
            module_id: module_id.into(),
            title: title.into(),
            concepts: BTreeMap::new(),
            edges: Vec::new(),
        }
    }

    pub fn add_concept(&mut self, concept: Concept) {
        self.concepts.insert(concept.id.clone(), concept);
    }

    pub fn concept(&self, id: &str) -> Result<&Concept> {
        self.concepts.get(id).ok_or_else(|| Error::UnknownConcept(id.to_owned()))
    }

    /// Finds an outcome and the concept that owns it.
    pub fn outcome(&self, lo_id: &str) -> Option<(&Concept, &LearningOutcome)> {
        self.concepts
            .values()
            .find_map(|c| c.outcomes.iter().find(|lo| lo.id == lo_id).map(|lo| (c, lo)))
    }

    pub fn outcomes(&self) -> impl Iterator<Item = (&Concept, &LearningOutcome)> {
        self.concepts.values().flat_map(|c| c.outcomes.iter().map(move |lo| (c, lo)))
    }

    pub fn graph(&self) -> PrerequisiteGraph<'_> {
        PrerequisiteGraph::new(self)
    }

    /// Concepts linked to `id` by a supporting edge into it, sorted.
    pub fn supporters_of(&self, id: &str) -> BTreeSet<&str> {
        self.edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Supporting && e.to == id && self.concepts.contains_key(&e.from))
            .map(|e| e.from.as_str())
            .collect()
    }

    /// Sorts edges and each concept's resources; outcome order is preserved.
    pub fn canonicalize(&mut self) {
        self.edges.sort();
        for concept in self.concepts.values_mut() {
            concept.resources.sort_by(|a, b| a.id.cmp(&b.id));
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut findings = Vec::new();

        let mut lo_owner: BTreeMap<&str, &str> = BTreeMap::new();
        let mut resource_owner: BTreeMap<&str, &str> = BTreeMap::new();
        for concept in self.concepts.values() {
            if concept.outcomes.is_empty() {
                findings.push(Finding::warning(
                    "EMPTY_OUTCOMES",
                    &concept.id,
                    format!("concept `{}` has no learning outcomes", concept.id),
                ));
            }
            for lo in &concept.outcomes {
                if let Some(prev) = lo_owner.insert(&lo.id, &concept.id) {
                    findings.push(Finding::error(
                        "DUP_LO_ID",
                        &lo.id,
                        format!("learning outcome `{}` declared in `{prev}` and `{}`", lo.id, concept.id),
                    ));
                }
                if !lo.cell.is_valid() || !(MIN_LEVEL..=MAX_PROCESS_LEVEL).contains(&lo.required_level) {
                    findings.push(Finding::error(
                        "BAD_LEVEL",
                        &lo.id,
                        format!(
                            "taxonomy cell ({}, {}) or required level {} out of range",
                            lo.cell.process_level, lo.cell.knowledge_dim, lo.required_level
                        ),
                    ));
                }
            }
            for resource in &concept.resources {
                if let Some(prev) = resource_owner.insert(&resource.id, &concept.id) {
                    findings.push(Finding::error(
                        "DUP_RESOURCE_ID",
                        &resource.id,
                        format!("resource `{}` declared in `{prev}` and `{}`", resource.id, concept.id),
                    ));
                }
            }
        }

        let mut seen_edges = BTreeSet::new();
        for edge in &self.edges {
            let subject = format!("{}->{}", edge.from, edge.to);
            for end in [&edge.from, &edge.to] {
                if !self.concepts.contains_key(end) {
                    findings.push(Finding::error(
                        "DANGLING_EDGE",
                        &subject,
                        format!("edge references unknown concept `{end}`"),
                    ));
                }
            }
            if edge.from == edge.to {
                findings.push(Finding::error("SELF_LOOP", &subject, "edge connects a concept to itself"));
            }
            if !seen_edges.insert(edge) {
                findings.push(Finding::error(
                    "DUP_EDGE",
                    &subject,
                    format!("duplicate {:?} edge", edge.kind).to_lowercase(),
                ));
            }
        }

        let graph = self.graph();
        for component in graph.cyclic_components() {
            let nodes = graph.cycle_through(&component);
            let mut finding = Finding::error(
                "CYCLE",
                nodes[0].clone(),
                format!("prerequisite cycle through {} concept(s)", nodes.len()),
            );
            finding.nodes = nodes;
            findings.push(finding);
        }

        ValidationReport::from_findings(findings)
    }

    /// All direct and indirect prerequisites of `concept_id`, excluding the
    /// concept itself. Supporting edges are ignored.
    pub fn prerequisite_closure(&self, concept_id: &str) -> Result<BTreeSet<String>> {
        self.concept(concept_id)?;
        Ok(self
            .graph()
            .ancestors(concept_id)
            .into_iter()
            .filter(|&id| id != concept_id)
            .map(str::to_owned)
            .collect())
    }

    /// Linearizes `subset` so that every concept comes after all of its
    /// (transitive) prerequisites within the subset. Among ready concepts the
    /// smallest id goes first. Members of a prerequisite cycle, if any, are
    /// appended in id order.
    pub fn topological_order<I, S>(&self, subset: I) -> Result<Vec<String>>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let graph = self.graph();
        let mut members = BTreeSet::new();
        for id in subset {
            let id = id.as_ref();
            let key = self
                .concepts
                .get_key_value(id)
                .map(|(k, _)| k.as_str())
                .ok_or_else(|| Error::UnknownConcept(id.to_owned()))?;
            members.insert(key);
        }
        Ok(order_by_reachability(&graph, &members).into_iter().map(str::to_owned).collect())
    }
}

pub(crate) fn order_by_reachability<'a>(graph: &PrerequisiteGraph<'a>, members: &BTreeSet<&'a str>) -> Vec<&'a str> {
    let mut indegree: BTreeMap<&str, usize> = members.iter().map(|&m| (m, 0)).collect();
    let mut induced: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for &m in members {
        let below: Vec<&str> = graph
            .descendants(m)
            .into_iter()
            .filter(|d| *d != m && members.contains(d))
            .collect();
        for &d in &below {
            *indegree.get_mut(d).unwrap() += 1;
        }
        induced.insert(m, below);
    }
    let mut ready: BTreeSet<&str> = indegree.iter().filter(|(_, &n)| n == 0).map(|(&m, _)| m).collect();
    let mut order = Vec::with_capacity(members.len());
    while let Some(next) = ready.pop_first() {
        order.push(next);
        for &d in &induced[next] {
            let n = indegree.get_mut(d).unwrap();
            *n -= 1;
            if *n == 0 {
                ready.insert(d);
            }
        }
    }
    if order.len() < members.len() {
        let placed: BTreeSet<&str> = order.iter().copied().collect();
        order.extend(members.iter().filter(|m| !placed.contains(*m)));
    }
    order
}

fn joined_components(parts: &[&str], separator: &str) -> String {
    let mut pieces: Vec<&str> = parts
        .iter()
        .flat_map(|p| p.split(separator))
        .filter(|p| !p.is_empty())
        .collect();
    pieces.sort_unstable();
    pieces.join(separator)
}

/// Unions several domain models into one canonical model.
///
/// Concepts with the same id must agree on title and outcomes; their resource
/// lists are unioned by id. The merged `module_id` is the sorted list of all
/// input module ids joined with `+`.
pub fn merge_models(models: &[DomainModel]) -> Result<DomainModel> {
    let mut concepts: BTreeMap<String, Concept> = BTreeMap::new();
    for model in models {
        for concept in model.concepts.values() {
            let Some(existing) = concepts.get_mut(&concept.id) else {
                concepts.insert(concept.id.clone(), concept.clone());
                continue;
            };
            if existing.title != concept.title {
                return Err(Error::MergeConflict {
                    id: concept.id.clone(),
                    detail: format!("title `{}` vs `{}`", existing.title, concept.title),
                });
            }
            if existing.outcomes != concept.outcomes {
                return Err(Error::MergeConflict { id: concept.id.clone(), detail: "outcomes differ".into() });
            }
            for resource in &concept.resources {
                match existing.resources.iter().find(|r| r.id == resource.id) {
                    Some(r) if r != resource => {
                        return Err(Error::MergeConflict {
                            id: concept.id.clone(),
                            detail: format!("resource `{}` differs", resource.id),
                        })
                    }
                    Some(_) => {}
                    None => existing.resources.push(resource.clone()),
                }
            }
        }
    }
    let edges: BTreeSet<Edge> = models.iter().flat_map(|m| m.edges.iter().cloned()).collect();

    let ids: Vec<&str> = models.iter().map(|m| m.module_id.as_str()).collect();
    let titles: Vec<&str> = models.iter().map(|m| m.title.as_str()).collect();
    let mut merged = DomainModel {
        schema_version: SCHEMA_VERSION.to_owned(),
        module_id: joined_components(&ids, "+"),
        title: joined_components(&titles, " + "),
        concepts,
        edges: edges.into_iter().collect(),
    };
    merged.canonicalize();

    let report = merged.validate();
    if let Some(cycle) = report.with_code("CYCLE").next() {
        return Err(Error::MergeCycle(cycle.nodes.clone()));
    }
    if !report.ok {
        return Err(Error::Invalid(report));
    }
    Ok(merged)
}
