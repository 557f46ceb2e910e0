//! Parses the annotated sentence bundled with the `figure` fixture.

use std::path::Path;

use semcube::iexml::{sentence_cooccurrences, to_iexml};
use semcube::parse_iexml;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/figure/document.xml");
    let doc = parse_iexml("document", "pubmed", &std::fs::read_to_string(path)?)?;
    println!("{} sentence(s), {} mentions, {} readings", doc.sentence_count, doc.mentions.len(), doc.reading_count());

    for m in &doc.mentions {
        let readings: Vec<String> = m.readings.iter().map(|r| format!("{}{:?}", r.cui, r.semtypes)).collect();
        println!("  {:<28} {}", m.surface, readings.join(" | "));
    }

    println!("\nfrequencies:");
    for (cui, n) in &doc.frequencies {
        println!("  {cui}\t{n}");
    }
    println!("\n{} co-occurring pairs", sentence_cooccurrences(&doc).len());
    println!("\ncanonical form:\n{}", to_iexml(&doc));
    Ok(())
}
