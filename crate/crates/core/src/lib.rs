//! Competence overlay engine.
//!
//! A course is described by a [`DomainModel`]: concepts carrying learning
//! outcomes classified on the 6×4 process/knowledge taxonomy, linked by
//! prerequisite and supporting edges. A learner is described by an
//! [`IndividualModel`], an append-only log of scored answers. Overlaying the
//! two yields per-outcome statuses, presumed gaps in untested prerequisites
//! and the learner's frontier; adaptive micro-assessments pin down the
//! mastered process level of a single outcome; recommendations turn the
//! overlay into prerequisite-consistent study plans and ranked resources.
//!
//! All operations are pure functions of their inputs. Time is always passed
//! in explicitly as a [`Timestamp`].

pub mod domain_model;
pub mod dot;
pub mod error;
pub mod item_pool;
pub mod learner_model;
pub mod micro_assessment;
pub mod overlay;
pub mod recommendation;
pub mod storage;
pub mod time;

pub use domain_model::{
    merge_models, Concept, DomainModel, Edge, EdgeKind, Finding, LearningOutcome, LearningResource, ResourceKind,
    Severity, TaxonomyCell, ValidationReport,
};
pub use dot::export_dot;
pub use error::{Error, Result};
pub use item_pool::{score_response, AssessmentItem, CoverageMatrix, ItemPool};
pub use learner_model::{DecayParams, EvidenceRecord, IndividualModel, LoState};
pub use micro_assessment::{
    run_simulated, start_session, SessionConfig, SessionResult, SessionState, SessionStatus, SimulatedLearner,
};
pub use overlay::{challenge_check, find_anchors, overlay, ChallengeConfig, ChallengeSuggestion, LoStatus, OverlayReport};
pub use recommendation::{recommend_path, recommend_resources, LearningPlan, ResourceRecommendation};
pub use time::Timestamp;

/// Version written into every document.
pub const SCHEMA_VERSION: &str = "1.0";
pub(crate) const SCHEMA_MAJOR: &str = "1";
