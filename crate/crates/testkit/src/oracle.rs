//! Reference implementations used to check the engine. They work from the
//! raw edge list with dense matrices and recursion, sharing no code with the
//! engine's graph routines.

use std::collections::{BTreeMap, BTreeSet};

use compass_core::{AssessmentItem, DomainModel, EdgeKind, ItemPool};

/// Boolean transitive closure over prerequisite edges.
pub struct Reachability {
    ids: Vec<String>,
    index: BTreeMap<String, usize>,
    reach: Vec<Vec<bool>>,
}

impl Reachability {
    /// True if `to` is reachable from `from` by a path of length ≥ 1.
    pub fn reaches(&self, from: &str, to: &str) -> bool {
        match (self.index.get(from), self.index.get(to)) {
            (Some(&i), Some(&j)) => self.reach[i][j],
            _ => false,
        }
    }

    pub fn ancestors(&self, id: &str) -> BTreeSet<String> {
        let j = self.index[id];
        (0..self.ids.len()).filter(|&i| self.reach[i][j]).map(|i| self.ids[i].clone()).collect()
    }

    pub fn pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for i in 0..self.ids.len() {
            for j in 0..self.ids.len() {
                if self.reach[i][j] {
                    out.push((self.ids[i].clone(), self.ids[j].clone()));
                }
            }
        }
        out
    }
}

/// Floyd–Warshall boolean reachability.
#[allow(clippy::needless_range_loop)]
pub fn reachability(model: &DomainModel) -> Reachability {
    let ids: Vec<String> = model.concepts.keys().cloned().collect();
    let index: BTreeMap<String, usize> = ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    let n = ids.len();
    let mut reach = vec![vec![false; n]; n];
    for e in model.edges.iter().filter(|e| e.kind == EdgeKind::Prerequisite) {
        if let (Some(&i), Some(&j)) = (index.get(&e.from), index.get(&e.to)) {
            reach[i][j] = true;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    Reachability { ids, index, reach }
}

/// Recursive three-color DFS; true if any prerequisite cycle exists.
pub fn has_cycle(model: &DomainModel) -> bool {
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in model.edges.iter().filter(|e| e.kind == EdgeKind::Prerequisite) {
        adj.entry(&e.from).or_default().push(&e.to);
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    fn visit<'a>(node: &'a str, adj: &BTreeMap<&'a str, Vec<&'a str>>, color: &mut BTreeMap<&'a str, Color>) -> bool {
        color.insert(node, Color::Gray);
        for &next in adj.get(node).map(Vec::as_slice).unwrap_or(&[]) {
            match color.get(next).copied().unwrap_or(Color::White) {
                Color::Gray => return true,
                Color::White if visit(next, adj, color) => return true,
                _ => {}
            }
        }
        color.insert(node, Color::Black);
        false
    }
    let mut color = BTreeMap::new();
    let nodes: Vec<&str> = adj.keys().copied().collect();
    nodes
        .into_iter()
        .any(|n| color.get(n).copied().unwrap_or(Color::White) == Color::White && visit(n, &adj, &mut color))
}

/// True if consecutive nodes (wrapping around) are joined by prerequisite
/// edges and no node repeats.
pub fn is_true_cycle(model: &DomainModel, nodes: &[String]) -> bool {
    if nodes.is_empty() || nodes.iter().collect::<BTreeSet<_>>().len() != nodes.len() {
        return false;
    }
    (0..nodes.len()).all(|i| {
        let (from, to) = (&nodes[i], &nodes[(i + 1) % nodes.len()]);
        model.edges.iter().any(|e| e.kind == EdgeKind::Prerequisite && &e.from == from && &e.to == to)
    })
}

/// True if `order` places `u` before `v` whenever `u` reaches `v`.
pub fn respects_reachability(reach: &Reachability, order: &[String]) -> bool {
    for (i, u) in order.iter().enumerate() {
        for v in &order[..i] {
            if reach.reaches(u, v) {
                return false;
            }
        }
    }
    true
}

/// Per-outcome item counts by a single linear scan.
pub fn count_items_per_lo(pool: &ItemPool) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    for item in pool.items.values() {
        *counts.entry(item.lo_id.clone()).or_insert(0) += 1;
    }
    counts
}

/// Linear filter followed by a sort on (level, id).
pub fn filter_items<'a>(pool: &'a ItemPool, lo_id: &str, lo: u8, hi: u8, exclude: &BTreeSet<String>) -> Vec<&'a AssessmentItem> {
    let mut out = Vec::new();
    for item in pool.items.values() {
        let level = item.cell.process_level;
        if item.lo_id == lo_id && level >= lo && level <= hi && !exclude.contains(&item.id) {
            out.push(item);
        }
    }
    out.sort_by_key(|i| (i.cell.process_level, i.id.clone()));
    out
}

/// Mastery evaluated directly from the recurrence and the decay formula over
/// a list of (correct, unix seconds) answers sorted by time.
pub fn mastery_formula(answers: &[(bool, i64)], now: i64, alpha: f64, half_life: f64) -> f64 {
    let Some(&(first, _)) = answers.first() else { return 0.0 };
    let mut m = if first { 1.0 } else { 0.0 };
    for &(correct, _) in &answers[1..] {
        let x = if correct { 1.0 } else { 0.0 };
        m = alpha * x + (1.0 - alpha) * m;
    }
    let last = answers.last().unwrap().1;
    m * 0.5f64.powf((now - last) as f64 / half_life)
}
