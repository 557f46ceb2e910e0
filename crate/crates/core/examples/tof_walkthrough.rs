//! Browses procedures against findings in the ToF collection: search for
//! "repair", drill down to the Fallot repair, keep only it and read the
//! documents behind its strongest bridge.

use std::path::Path;

use semcube::{build_snapshot, drill_through_bridge, load_corpus, load_taxonomy, ConceptMap, EngineConfig, LayerRequest};

fn show(map: &ConceptMap) {
    for (i, layer) in map.layers.iter().enumerate() {
        let balls: Vec<String> = layer.balls.iter().map(|b| format!("{} [{:?} {:.0}]", b.label, b.state, b.relevance)).collect();
        println!("  layer {i} {}: {}", layer.dimension, balls.join(", "));
    }
    for lb in &map.bridges {
        for b in &lb.items {
            println!("  bridge {} -> {} ({:.2})", b.from, b.to, b.score);
        }
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = EngineConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/tof/config.toml"))?;
    let ontology = load_taxonomy(std::io::BufReader::new(std::fs::File::open(&config.taxonomy)?))?;
    let (snapshot, _) = build_snapshot(&ontology, &load_corpus(&config.corpus)?, &config.group_map, config.alpha)?;
    let index = snapshot.into_index()?;

    let mut settings = config.map_settings();
    settings.query = Some(vec!["repair".into()]);
    let layers = [LayerRequest::category("Individual.Health_Procedures", 1), LayerRequest::category("Individual.Finding", 1)];
    let mut map = ConceptMap::build(&index, "tof", &layers, settings)?;
    println!("initial map:");
    show(&map);

    for concept in ["HP0100", "HP0140", "HP0120"] {
        map.drill_down(&index, 0, concept)?;
        println!("\nafter drilling into {concept}:");
        show(&map);
    }

    map.keep_only(0, "HP0121")?;
    println!("\nkeeping only HP0121:");
    show(&map);

    let top = &map.bridges[0].items[0];
    println!("\ndocuments behind {} -> {}:", top.from, top.to);
    for o in drill_through_bridge(&index, &top.from, &top.to) {
        println!("  {}\t{:.4}", o.doc_id, o.relevance);
    }
    Ok(())
}
