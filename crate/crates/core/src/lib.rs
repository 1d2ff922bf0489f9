//! Knowledge-map engine: builds a navigable, terrain-style map of a document
//! collection from folder paths or concept co-occurrence, and serves it.
//!
//! Pipeline order: [`ingestion`] → [`ceg`] → [`thg`] → [`tog`] → [`layout`] →
//! [`topography`], bundled by [`store`] and served by [`api`]. [`pipeline`]
//! runs the whole chain from a [`pipeline::BuildConfig`].

pub mod api;
pub mod ceg;
pub mod demo;
pub mod ingestion;
pub mod layout;
pub mod pipeline;
pub mod store;
pub mod thg;
pub mod tog;
pub mod topography;

pub type EntityId = String;
pub type ConceptId = String;
pub type TopicId = String;

pub use ceg::{build_ceg, ensure_connected, CoreGraph, SimilarityEdge};
pub use ingestion::{AnnotationTable, ConceptEntry, EntityRecord, FolderTree, Gazetteer};
pub use layout::{Circle, LayoutParams, LayoutTree, ViewState};
pub use pipeline::{build_bundle, BuildConfig, BuildSummary, PipelineError};
pub use store::{load_bundle, save_bundle, GraphBundle, StoreError, FORMAT_VERSION};
pub use thg::{HierarchyMode, Provenance, TopicAssignment, TopicHierarchy, TopicNode};
pub use tog::{InstanceNode, OccupancyGraph};
pub use topography::{ColorScale, ContourSet, ElevationGrid, TopographyParams};
