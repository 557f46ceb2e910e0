//! Searches a disease and protein collection for "epilepsy" and lists the
//! proteins filed under each matching disease.

use std::path::Path;

use semcube::{build_snapshot, drill_through_concept, load_corpus, load_taxonomy, ConceptMap, EngineConfig, LayerRequest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = EngineConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/epilepsy/config.toml"))?;
    let ontology = load_taxonomy(std::io::BufReader::new(std::fs::File::open(&config.taxonomy)?))?;
    let (snapshot, summary) = build_snapshot(&ontology, &load_corpus(&config.corpus)?, &config.group_map, config.alpha)?;
    println!("{} objects in {:?}", summary.documents, summary.dimensions);
    let index = snapshot.into_index()?;

    let map = ConceptMap::build(&index, "epilepsy", &[LayerRequest::query(None, "epilepsy")], config.map_settings())?;
    for layer in &map.layers {
        println!("\n{}:", layer.dimension);
        for ball in &layer.balls {
            println!("  {} {} (relevance {})", ball.concept, ball.label, ball.relevance);
            for o in drill_through_concept(&index, &ball.concept).iter().filter(|o| o.object_type == "protein") {
                let link = config.links.get("protein").map(|t| t.replace("{doc_id}", &o.doc_id)).unwrap_or_default();
                println!("    {}\t{:.4}\t{link}", o.doc_id, o.relevance);
            }
        }
    }
    Ok(())
}
