//! JSON Schemas for the persisted artifact families.
//!
//! The checked-in copies under `docs/schemas/` are regenerated with
//! `write_schemas` and compared against the live types in tests.

use std::path::Path;

use schemars::schema_for;
use serde_json::Value;

use crate::canonical::to_canonical_bytes;
use crate::error::Result;
use crate::model::{EditPlan, NarrativeIndex};
use crate::orchestrator::WorkflowRecord;
use crate::validate::SchemaKind;

pub const ALL: [SchemaKind; 3] = [SchemaKind::NarrativeIndex, SchemaKind::EditPlan, SchemaKind::WorkflowRecord];

pub fn file_name(kind: SchemaKind) -> &'static str {
    match kind {
        SchemaKind::NarrativeIndex => "narrative_index.schema.json",
        SchemaKind::EditPlan => "edit_plan.schema.json",
        SchemaKind::WorkflowRecord => "workflow_record.schema.json",
    }
}

pub fn schema(kind: SchemaKind) -> Value {
    let s = match kind {
        SchemaKind::NarrativeIndex => schema_for!(NarrativeIndex),
        SchemaKind::EditPlan => schema_for!(EditPlan),
        SchemaKind::WorkflowRecord => schema_for!(WorkflowRecord),
    };
    s.to_value()
}

/// Canonical bytes of a schema, as written to disk.
pub fn schema_bytes(kind: SchemaKind) -> Result<Vec<u8>> {
    to_canonical_bytes(&schema(kind))
}

pub fn write_schemas(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for kind in ALL {
        std::fs::write(dir.join(file_name(kind)), schema_bytes(kind)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schemas_name_their_required_fields() {
        let s = schema(SchemaKind::EditPlan);
        let required: Vec<&str> = s["required"].as_array().unwrap().iter().filter_map(|v| v.as_str()).collect();
        assert!(required.contains(&"entries") && required.contains(&"narration"));
        let s = schema(SchemaKind::NarrativeIndex);
        assert!(s["properties"]["scenes"].is_object());
    }
}
