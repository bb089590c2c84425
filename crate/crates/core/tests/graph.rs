use std::collections::BTreeSet;

use compass_core::storage::{load_domain_model, save_domain_model};
use compass_core::{merge_models, DomainModel, Edge, EdgeKind, Error};
use compass_testkit::build::{chain, simple_model};
use compass_testkit::gen::{inject_back_edge, random_dag, random_dag_with_edges, rng, DagShape};
use compass_testkit::oracle::{has_cycle, is_true_cycle, reachability, respects_reachability};
use rand::Rng;

#[test]
fn closure_matches_floyd_warshall() {
    let mut r = rng(11);
    for _ in 0..200 {
        let m = random_dag(&mut r, "m", "c", DagShape::default());
        let reach = reachability(&m);
        for id in m.concepts.keys() {
            assert_eq!(m.prerequisite_closure(id).unwrap(), reach.ancestors(id), "closure of {id}");
        }
    }
}

#[test]
fn random_dags_validate_and_back_edges_are_caught() {
    let mut r = rng(12);
    for _ in 0..200 {
        let mut m = random_dag_with_edges(&mut r, DagShape::default());
        assert!(!has_cycle(&m));
        assert!(m.validate().ok, "{}", m.validate());
        inject_back_edge(&mut r, &mut m).unwrap();
        assert!(has_cycle(&m));
        let report = m.validate();
        let cycles: Vec<_> = report.with_code("CYCLE").collect();
        assert!(!cycles.is_empty());
        for finding in cycles {
            assert!(is_true_cycle(&m, &finding.nodes), "not a cycle: {:?}", finding.nodes);
        }
    }
}

#[test]
fn closure_is_transitive_and_excludes_itself() {
    let mut r = rng(13);
    for _ in 0..100 {
        let m = random_dag(&mut r, "m", "c", DagShape::default());
        for id in m.concepts.keys() {
            let closure = m.prerequisite_closure(id).unwrap();
            assert!(!closure.contains(id));
            for member in &closure {
                assert!(m.prerequisite_closure(member).unwrap().is_subset(&closure));
            }
        }
    }
}

#[test]
fn topological_order_respects_reachability() {
    let mut r = rng(14);
    for _ in 0..200 {
        let m = random_dag(&mut r, "m", "c", DagShape::default());
        let reach = reachability(&m);
        let subset: BTreeSet<String> = m.concepts.keys().filter(|_| r.random_bool(0.6)).cloned().collect();
        let order = m.topological_order(&subset).unwrap();
        assert_eq!(order.iter().cloned().collect::<BTreeSet<_>>(), subset);
        assert!(respects_reachability(&reach, &order));
    }
}

#[test]
fn topological_order_reproduces_chains() {
    let ids = ["q", "b", "z", "a", "m"];
    let m = chain(&ids);
    let subset: Vec<&str> = ids.iter().rev().copied().collect();
    assert_eq!(m.topological_order(subset).unwrap(), ids.to_vec());
}

#[test]
fn validation_survives_serialization() {
    let mut r = rng(15);
    for _ in 0..50 {
        let mut m = random_dag(&mut r, "m", "c", DagShape::default());
        if r.random_bool(0.5) {
            inject_back_edge(&mut r, &mut m);
        }
        m.edges.push(Edge::supporting("ghost", m.concepts.keys().next().unwrap().clone()));
        let reloaded = load_domain_model(&save_domain_model(&m)).unwrap().value;
        assert_eq!(m.validate(), reloaded.validate());
    }
}

fn canonical(m: &DomainModel) -> Vec<u8> {
    save_domain_model(m)
}

#[test]
fn merge_identity_commutativity_associativity() {
    let mut r = rng(16);
    let shape = DagShape { max_nodes: 8, max_prerequisite_edges: 12, max_supporting_edges: 3 };
    for _ in 0..100 {
        let a = random_dag(&mut r, "ma", "a", shape);
        let b = random_dag(&mut r, "mb", "b", shape);
        let c = random_dag(&mut r, "mc", "c", shape);

        let mut with_empty = merge_models(&[a.clone(), DomainModel::new("", "")]).unwrap();
        with_empty.title = a.title.clone();
        assert_eq!(canonical(&with_empty), canonical(&a));

        assert_eq!(canonical(&merge_models(&[a.clone(), b.clone()]).unwrap()), canonical(&merge_models(&[b.clone(), a.clone()]).unwrap()));

        let left = merge_models(&[merge_models(&[a.clone(), b.clone()]).unwrap(), c.clone()]).unwrap();
        let right = merge_models(&[a.clone(), merge_models(&[b.clone(), c.clone()]).unwrap()]).unwrap();
        assert_eq!(canonical(&left), canonical(&right));
    }
}

#[test]
fn merge_joins_overlapping_models() {
    let course = simple_model("course", &["B", "C"], &[Edge::prerequisite("B", "C")]);
    let ext = simple_model("ext", &["A", "B"], &[Edge::prerequisite("A", "B")]);
    let merged = merge_models(&[ext, course]).unwrap();
    assert_eq!(merged.prerequisite_closure("C").unwrap(), ["A", "B"].iter().map(|s| s.to_string()).collect());
    assert!(merged.edges.iter().all(|e| e.kind == EdgeKind::Prerequisite));
}

#[test]
fn merge_resource_union_and_conflict() {
    let mut a = simple_model("a", &["X"], &[]);
    let mut b = simple_model("b", &["X"], &[]);
    let res = |id: &str, title: &str| compass_core::LearningResource {
        id: id.into(),
        title: title.into(),
        uri: "u".into(),
        kind: compass_core::ResourceKind::Introductory,
        tags: BTreeSet::new(),
    };
    a.concepts.get_mut("X").unwrap().resources.push(res("r2", "two"));
    b.concepts.get_mut("X").unwrap().resources.push(res("r1", "one"));
    let merged = merge_models(&[a.clone(), b.clone()]).unwrap();
    let ids: Vec<_> = merged.concepts["X"].resources.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, vec!["r1", "r2"]);

    b.concepts.get_mut("X").unwrap().resources.push(res("r2", "different"));
    assert!(matches!(merge_models(&[a, b]), Err(Error::MergeConflict { .. })));
}
