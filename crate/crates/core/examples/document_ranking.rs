//! Ranks the concepts of one document by propagating frequencies over its
//! affinity graph, then assigns one concept per dimension.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use nalgebra::DVector;
use semcube::facts::DEFAULT_ALPHA;
use semcube::{
    build_affinity, build_dimensions, load_taxonomy, normalize_laplacian, parse_iexml, rank_concepts, EngineConfig, FactBuilder,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/figure");
    let config = EngineConfig::load(&dir.join("config.toml"))?;
    let ontology = load_taxonomy(BufReader::new(File::open(&config.taxonomy)?))?;
    let doc = parse_iexml("document", "pubmed", &std::fs::read_to_string(dir.join("document.xml"))?)?;

    let (m, dropped) = build_affinity(&doc, &ontology);
    println!("affinity over {} concepts ({} unknown dropped)", m.len(), dropped);
    let s = normalize_laplacian(&m.values)?;
    let total: f64 = m.concepts.iter().map(|c| f64::from(doc.frequencies[c])).sum();
    let y = DVector::from_iterator(m.len(), m.concepts.iter().map(|c| f64::from(doc.frequencies[c]) / total));
    for alpha in [0.0, 0.5, DEFAULT_ALPHA] {
        let r = rank_concepts(&s, &y, alpha)?;
        let mut top: Vec<(&String, f64)> = m.concepts.iter().zip(r.scores.iter().copied()).collect();
        top.sort_by(|a, b| b.1.total_cmp(&a.1));
        println!("alpha {alpha}: top {:?}", &top[..3]);
    }

    let dimensions = build_dimensions(&ontology, doc.frequencies.keys().map(String::as_str), &config.group_map)?;
    let outcome = FactBuilder::new(&ontology, &dimensions).with_alpha(config.alpha).build(&doc)?;
    println!("\nfact for {}:", outcome.fact.doc_id);
    for (dim, concept) in &outcome.fact.assignments {
        let label = concept.as_deref().map(|c| ontology.concept(c).map(|x| x.preferred_label.as_str()).unwrap_or("?"));
        println!("  {dim:<18} {:<10} {}", concept.as_deref().unwrap_or("-"), label.unwrap_or(""));
    }
    Ok(())
}
