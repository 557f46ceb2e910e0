//! Random browsing sessions over a synthetic collection.

use rand::rngs::StdRng;
use rand::Rng;
use semcube::map::{contains, BallState, ConceptMap, LayerRequest, MapSettings};
use semcube::{Measure, Scorer};

use super::{rng, synthetic_collection, Synthetic};

/// Checks every structural invariant of a map; returns a description of
/// the first violation.
pub fn check_map(s: &Synthetic, map: &ConceptMap) -> Result<(), String> {
    for lb in &map.bridges {
        let [a, b] = lb.layer_pair;
        if b != a + 1 {
            return Err(format!("bridges between non-adjacent layers {a} and {b}"));
        }
        for item in &lb.items {
            if map.layers[a].position(&item.from).is_none() || map.layers[b].position(&item.to).is_none() {
                return Err(format!("dangling bridge {} -> {}", item.from, item.to));
            }
        }
    }
    for layer in &map.layers {
        let dim = s.index.dimension(&layer.dimension).unwrap();
        for (i, x) in layer.balls.iter().enumerate() {
            if x.relevance < 0.0 {
                return Err(format!("negative relevance for {}", x.concept));
            }
            for y in &layer.balls[i + 1..] {
                let below = |a: &str, b: &str| dim.fragment.is_descendant(a, b).unwrap();
                if below(&x.concept, &y.concept) || below(&y.concept, &x.concept) {
                    return Err(format!("{} and {} are comparable", x.concept, y.concept));
                }
            }
            let hit = map
                .settings
                .query
                .as_ref()
                .is_some_and(|q| !contains(&s.index, &layer.dimension, &x.concept, q).unwrap().is_empty());
            if (x.state == BallState::QueryMatch) != hit {
                return Err(format!("{} has state {:?}", x.concept, x.state));
            }
        }
    }
    let fresh = map.fresh_bridges(&s.index).map_err(|e| e.to_string())?;
    if fresh != map.bridges {
        return Err("bridges differ from a fresh build".into());
    }
    Ok(())
}

fn settings(r: &mut StdRng) -> MapSettings {
    let measures = [Measure::InterestFactor, Measure::LogLikelihoodRatio, Measure::MutualInformation, Measure::F1];
    MapSettings {
        measure: measures[r.random_range(0..4)],
        delta: r.random_range(0.0..1.5),
        scorer: if r.random_bool(0.5) { Scorer::Hits } else { Scorer::ScoreSum },
        // synthetic labels are "concept xNN"; a digit picks out a few balls
        query: Some(vec![format!("{}", r.random_range(0..10))]),
        ..MapSettings::default()
    }
}

fn fresh_map(s: &Synthetic, r: &mut StdRng) -> ConceptMap {
    let layers = [LayerRequest::category("X", 0), LayerRequest::category("Y", 0), LayerRequest::category("X", 1)];
    let n = r.random_range(2..=3);
    ConceptMap::build(&s.index, "m", &layers[..n], settings(r)).unwrap()
}

/// Applies 100 random operations, checking the invariants after each.
pub fn random_walk(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let s = synthetic_collection(&mut r, 14, 60);
    let mut map = fresh_map(&s, &mut r);
    check_map(&s, &map)?;
    for step in 0..100 {
        if map.layers.iter().all(|l| l.balls.is_empty()) {
            map = fresh_map(&s, &mut r);
        }
        let layer = r.random_range(0..map.layers.len());
        if map.layers[layer].balls.is_empty() {
            continue;
        }
        let ball = map.layers[layer].balls[r.random_range(0..map.layers[layer].balls.len())].concept.clone();
        let before = map.clone();
        let result = match r.random_range(0..10) {
            0..=4 => map.drill_down(&s.index, layer, &ball),
            5..=6 => map.roll_up(&s.index, layer, &ball),
            7 => map.keep_only(layer, &ball),
            _ => map.remove_concept(layer, &ball),
        };
        if result.is_err() && map != before {
            return Err(format!("step {step}: failed operation changed the map"));
        }
        check_map(&s, &map).map_err(|e| format!("step {step}: {e}"))?;
    }
    Ok(())
}
