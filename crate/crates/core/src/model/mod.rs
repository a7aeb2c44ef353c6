//! Shared domain types for the persisted artifacts.

mod index;
mod media;
mod plan;

pub use index::{
    Affect, CharacterEdge, CharacterGraph, CharacterNode, Dialogue, GlobalSynopsis, IndexMeta,
    MediaFormat, NarrativeIndex, PlotPoint, SceneTrace, SemanticAnnotation, UNATTRIBUTED,
};
pub use media::{MediaAsset, Project, SegmentArtifact};
pub use plan::{
    ClipSelection, EditPlan, MusicRef, NarrationSegment, PlanMeta, RenderingMode, SourceMedia,
};

/// Version stamped into every persisted artifact.
pub const SCHEMA_VERSION: u32 = 1;

/// Case-folds a name for identity comparisons.
pub fn fold_name(name: &str) -> String {
    name.trim().to_lowercase()
}
