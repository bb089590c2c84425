//! Graphviz rendering of a domain model, optionally colored by an overlay.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::domain_model::{DomainModel, EdgeKind};
use crate::overlay::{ConceptStatus, OverlayReport};

pub fn status_color(status: ConceptStatus) -> &'static str {
    match status {
        ConceptStatus::Achieved => "green",
        ConceptStatus::NotAchieved => "red",
        ConceptStatus::Suspected => "orange",
        ConceptStatus::Open | ConceptStatus::OutOfCourse => "gray",
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Renders the model as a DOT digraph. Prerequisite edges are solid and come
/// first; supporting edges are dashed. An empty `course` means every concept
/// belongs to the course. Concepts outside the course get a dashed gray
/// border; with an overlay, course concepts are filled by aggregated status.
pub fn export_dot(model: &DomainModel, course: &BTreeSet<String>, overlay: Option<&OverlayReport>) -> String {
    let mut out = String::from("digraph fachlandkarte {\n");
    for concept in model.concepts.values() {
        let in_course = course.is_empty() || course.contains(&concept.id);
        let mut attrs = vec![format!("label={}", quote(&concept.title))];
        if !in_course {
            attrs.push("style=dashed".into());
            attrs.push("color=gray".into());
        } else if let Some(report) = overlay {
            let color = status_color(report.concept_status(concept, true));
            attrs.push("style=filled".into());
            attrs.push(format!("fillcolor={color}"));
        }
        let _ = writeln!(out, "  {} [{}];", quote(&concept.id), attrs.join(", "));
    }
    let mut edges: Vec<_> = model.edges.iter().collect();
    edges.sort();
    for edge in edges.iter().filter(|e| e.kind == EdgeKind::Prerequisite) {
        let _ = writeln!(out, "  {} -> {};", quote(&edge.from), quote(&edge.to));
    }
    for edge in edges.iter().filter(|e| e.kind == EdgeKind::Supporting) {
        let _ = writeln!(out, "  {} -> {} [style=dashed];", quote(&edge.from), quote(&edge.to));
    }
    out.push_str("}\n");
    out
}
