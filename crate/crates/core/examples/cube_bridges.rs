//! Counts a concept cube between procedures and findings and lists the
//! bridges each association measure finds.

use std::path::Path;

use semcube::{build_snapshot, load_corpus, load_taxonomy, BridgeSpec, ContingencyMode, EngineConfig, Measure};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = EngineConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/tof/config.toml"))?;
    let ontology = load_taxonomy(std::io::BufReader::new(std::fs::File::open(&config.taxonomy)?))?;
    let (snapshot, _) = build_snapshot(&ontology, &load_corpus(&config.corpus)?, &config.group_map, config.alpha)?;
    let index = snapshot.into_index()?;

    let procedures = index.dimension("Individual.Health_Procedures")?;
    let findings = index.dimension("Individual.Finding")?;
    let (lp, lf) = (&procedures.categories[3], &findings.categories[1]);
    let cube = index.build_cube(lp, lf)?;
    println!("cube level {} x level {} over {} documents", lp.level, lf.level, cube.n_col);
    print!("{}", cube.to_tsv(Measure::InterestFactor, ContingencyMode::Standard));

    for (measure, delta) in [
        (Measure::InterestFactor, 1.0),
        (Measure::LogLikelihoodRatio, 3.84),
        (Measure::MutualInformation, 0.0),
        (Measure::F1, 0.3),
    ] {
        let spec = BridgeSpec { measure, delta, mode: ContingencyMode::Standard };
        println!("\n{} > {delta}:", measure.name());
        for b in index.bridges(lp, lf, &spec)? {
            println!("  {} -> {}\t{:.3}", b.from, b.to, b.score);
        }
    }
    Ok(())
}
