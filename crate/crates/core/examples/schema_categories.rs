//! Builds the dimensions of the ToF collection and lists their categories.

use std::path::Path;

use semcube::{build_snapshot, load_corpus, load_taxonomy, validate_schema, EngineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = EngineConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/tof/config.toml"))?;
    let ontology = load_taxonomy(std::io::BufReader::new(std::fs::File::open(&config.taxonomy)?))?;
    let docs = load_corpus(&config.corpus)?;
    let (snapshot, summary) = build_snapshot(&ontology, &docs, &config.group_map, config.alpha)?;
    println!("signature: {} concepts ({} unknown annotations dropped)", summary.signature, summary.dropped_cuis);

    let index = snapshot.into_index()?;
    for dim in index.dimensions() {
        println!("\n{} (groups {:?}, {} members)", dim.id, dim.groups, dim.members.len());
        for cat in &dim.categories {
            let labels: Vec<String> = cat
                .concepts
                .iter()
                .map(|c| format!("{c} {}", dim.fragment.concept(c).map(|x| x.preferred_label.as_str()).unwrap_or("?")))
                .collect();
            println!("  level {}: {}", cat.level, labels.join(", "));
        }
    }
    println!("\nviolations: {:?}", validate_schema(index.dimensions()));
    Ok(())
}
