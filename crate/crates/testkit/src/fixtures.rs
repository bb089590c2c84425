//! The "Differenzierbarkeit von Funktionen" course: C1 (derivatives of basic
//! functions) is a prerequisite of C2 (derivative of the inverse function);
//! chain rule, inverse functions and implicit differentiation are supporting
//! units outside the course.

use std::collections::BTreeSet;

use compass_core::storage::{load_domain_model, load_individual, load_item_pool};
use compass_core::{DomainModel, IndividualModel, ItemPool, Timestamp};

pub const DOMAIN_JSON: &str = include_str!("../../../fixtures/worked_example/domain.json");
pub const ITEMS_JSON: &str = include_str!("../../../fixtures/worked_example/items.json");
pub const LEARNER_JSON: &str = include_str!("../../../fixtures/worked_example/learner.json");
pub const OVERLAY_DOT: &str = include_str!("../../../fixtures/worked_example/overlay.dot");

pub const NOW: &str = "2025-01-31T12:00:00Z";
pub const COURSE: [&str; 2] = ["C1", "C2"];
pub const SUPPORTING: [&str; 3] = ["Z-ableitung-gleichungen", "Z-kettenregel", "Z-umkehrfunktion"];
pub const SUPPORTING_LOS: [&str; 3] = ["LOZ-gleichungen", "LOZ-kettenregel", "LOZ-umkehrfunktion"];

pub struct WorkedExample {
    pub domain: DomainModel,
    pub pool: ItemPool,
    pub learner: IndividualModel,
    pub course: BTreeSet<String>,
    pub now: Timestamp,
}

pub fn worked_example() -> WorkedExample {
    WorkedExample {
        domain: load_domain_model(DOMAIN_JSON.as_bytes()).expect("domain fixture").value,
        pool: load_item_pool(ITEMS_JSON.as_bytes()).expect("item fixture").value,
        learner: load_individual(LEARNER_JSON.as_bytes()).expect("learner fixture").value,
        course: COURSE.iter().map(|s| s.to_string()).collect(),
        now: Timestamp::parse(NOW).unwrap(),
    }
}
