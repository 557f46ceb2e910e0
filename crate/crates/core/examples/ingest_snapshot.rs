//! Ingests the epilepsy fixture into a scratch index directory and reopens
//! the snapshot the way the service does.

use std::path::Path;

use semcube::{ingest, load_snapshot, open_index, EngineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = EngineConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/epilepsy/config.toml"))?;
    let scratch = tempfile::tempdir()?;
    config.index = scratch.path().join("index");

    let summary = ingest(&config)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    for entry in std::fs::read_dir(&config.index)? {
        let entry = entry?;
        println!("{}\t{} bytes", entry.file_name().to_string_lossy(), entry.metadata()?.len());
    }

    let snapshot = load_snapshot(&config.index)?;
    println!("format {}, {} facts, {} flagged", snapshot.format_version, snapshot.facts.len(), snapshot.flagged.len());
    let index = open_index(&config)?;
    println!("reopened: {} documents, assignments per dimension {:?}", index.n_col(), index.assignment_counts());
    Ok(())
}
