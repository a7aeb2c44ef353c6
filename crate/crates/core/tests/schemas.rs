//! The published schemas must match the types they describe.

use std::path::PathBuf;

use reelmind_core::schema::{file_name, schema_bytes, write_schemas, ALL};

fn docs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas")
}

#[test]
fn checked_in_schemas_are_current() {
    let dir = docs_dir();
    if std::env::var_os("UPDATE_SCHEMAS").is_some() {
        write_schemas(&dir).unwrap();
    }
    for kind in ALL {
        let path = dir.join(file_name(kind));
        let on_disk = std::fs::read(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
        assert!(
            on_disk == schema_bytes(kind).unwrap(),
            "{} is stale; rerun with UPDATE_SCHEMAS=1",
            path.display()
        );
    }
}
