//! Loads a taxonomy, prints its interval labels and answers a few
//! reachability questions without walking the graph.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use semcube::load_taxonomy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/tof/taxonomy.jsonl");
    let ontology = load_taxonomy(BufReader::new(File::open(path)?))?;
    println!("{} concepts, roots {:?}", ontology.len(), ontology.roots());

    println!("\nconcept\tpre\tanc\tdesc\tancestors\ttopo");
    print!("{}", ontology.descriptor_table());

    // Repair of Fallot tetralogy sits under two parents
    let rft = "HP0121";
    println!("\nparents of {rft}: {:?}", ontology.parents_of(rft)?);
    println!("ancestors of {rft}: {:?}", ontology.ancestors_of(rft)?);
    for other in ["HP0120", "HP0140", "HP0200"] {
        println!("{rft} below {other}: {}", ontology.is_descendant(rft, other)?);
    }
    println!("descendants of HP0100: {:?}", ontology.descendants_of("HP0100")?);

    let fragment = ontology.extract_fragment(["HP0121", "FN0110"])?;
    println!("\nfragment for {{HP0121, FN0110}}: {} concepts", fragment.len());
    print!("{}", fragment.descriptor_table());
    Ok(())
}
