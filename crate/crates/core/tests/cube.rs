mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use common::{rng, synthetic_collection, Reach};
use proptest::prelude::*;
use semcube::cube::ContingencyCell;
use semcube::facts::DocumentFact;
use semcube::{measure_score, Aggregator, BridgeSpec, ContingencyMode, Measure, Scorer};

const MEASURES: [Measure; 4] = [Measure::InterestFactor, Measure::LogLikelihoodRatio, Measure::MutualInformation, Measure::F1];

/// G² written out cell by cell with the expected counts of the margins.
fn g2_oracle(n_ij: f64, n_i: f64, n_j: f64, n: f64) -> f64 {
    let observed = [n_ij, n_i - n_ij, n_j - n_ij, n - n_i - n_j + n_ij];
    let expected = [n_i * n_j / n, n_i * (n - n_j) / n, (n - n_i) * n_j / n, (n - n_i) * (n - n_j) / n];
    2.0 * observed.iter().zip(expected).filter(|(o, _)| **o > 0.0).map(|(o, e)| o * (o / e).ln()).sum::<f64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cube_counts_match_double_loop(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = synthetic_collection(&mut r, 12, 50);
        let reach = Reach::new(&s.concepts);
        let xs: Vec<String> = s.index.dimension("X").unwrap().members.iter().cloned().collect();
        let ys: Vec<String> = s.index.dimension("Y").unwrap().members.iter().cloned().collect();
        let cube = s.index.cube_for("X", &xs, "Y", &ys).unwrap();
        for x in &xs {
            for y in &ys {
                let cell = cube.cell(x, y).unwrap();
                prop_assert_eq!((cell.n_ij, cell.n_i, cell.n_j), common::brute_cell(&s, &reach, x, y));
            }
        }
        prop_assert!(cube.cells().all(|c| c.n_ij > 0));
    }

    #[test]
    fn scorers_match_brute_force(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = synthetic_collection(&mut r, 10, 40);
        let reach = Reach::new(&s.concepts);
        let xs: Vec<String> = s.index.dimension("X").unwrap().members.iter().cloned().collect();
        for c in &xs {
            let below: Vec<&DocumentFact> = s.facts.iter().filter(|f| f.assignment("X").is_some_and(|x| reach.is_below(x, c))).collect();
            prop_assert_eq!(s.index.hits(c, "X"), below.len());
            let exact = s.facts.iter().filter(|f| f.assignment("X") == Some(c.as_str())).count();
            prop_assert_eq!(s.index.exact_hits(c, "X"), exact);
            let mass: f64 = below.iter().map(|f| f.rank.get(f.assignment("X").unwrap()).unwrap()).sum();
            prop_assert!((s.index.score_sum(c, "X") - mass).abs() < 1e-9);
            // one concept per dimension and document: summing exact hits over descendants counts each document once
            let rel = s.index.concept_relevance(c, "X", Aggregator::Sum, Scorer::Hits).unwrap();
            prop_assert_eq!(rel, below.len() as f64);
            let rel = s.index.concept_relevance(c, "X", Aggregator::Sum, Scorer::ScoreSum).unwrap();
            prop_assert!((rel - mass).abs() < 1e-9);
            let max = s.index.concept_relevance(c, "X", Aggregator::Max, Scorer::Hits).unwrap();
            let avg = s.index.concept_relevance(c, "X", Aggregator::Avg, Scorer::Hits).unwrap();
            prop_assert!(avg <= max + 1e-12 && max <= below.len() as f64);
        }
        for (d, f) in s.facts.iter().enumerate() {
            for c in &xs {
                let expected: f64 = f.rank.iter().filter(|(k, _)| reach.is_below(k, c)).map(|(_, v)| v).sum();
                prop_assert!((s.index.document_relevance(d, c) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bridges_shrink_as_delta_grows(seed in any::<u64>(), d1 in -1.0f64..5.0, step in 0.0f64..5.0) {
        let mut r = rng(seed);
        let s = synthetic_collection(&mut r, 10, 50);
        let x = &s.index.dimension("X").unwrap().categories;
        let y = &s.index.dimension("Y").unwrap().categories;
        for measure in MEASURES {
            for mode in [ContingencyMode::Standard, ContingencyMode::Truncated] {
                let lo = BridgeSpec { measure, delta: d1, mode };
                let hi = BridgeSpec { delta: d1 + step, ..lo };
                let a: BTreeSet<_> = s.index.bridges(&x[0], &y[0], &lo).unwrap().into_iter().map(|b| (b.from, b.to)).collect();
                let b: BTreeSet<_> = s.index.bridges(&x[0], &y[0], &hi).unwrap().into_iter().map(|b| (b.from, b.to)).collect();
                prop_assert!(b.is_subset(&a));
            }
        }
    }

    #[test]
    fn measures_match_formulas(n_ij in 1usize..40, extra_i in 0usize..40, extra_j in 0usize..40, rest in 0usize..80) {
        let (n_i, n_j) = (n_ij + extra_i, n_ij + extra_j);
        let n = n_ij + extra_i + extra_j + rest;
        let cell = ContingencyCell { c_i: "a", c_j: "b", n_ij, n_i, n_j };
        let score = |m| measure_score(&cell, n, m, ContingencyMode::Standard).unwrap();
        let (a, b, c, nn) = (n_ij as f64, n_i as f64, n_j as f64, n as f64);
        let lift = a * nn / (b * c);
        prop_assert!((score(Measure::InterestFactor) - lift).abs() <= 1e-12 * lift);
        prop_assert!((score(Measure::F1) - 2.0 * a / (b + c)).abs() <= 1e-12);
        prop_assert!((score(Measure::MutualInformation) - lift.log2()).abs() <= 1e-9);
        let g2 = g2_oracle(a, b, c, nn);
        prop_assert!((score(Measure::LogLikelihoodRatio) - g2).abs() <= 1e-9 * g2.max(1.0));
        prop_assert!(score(Measure::LogLikelihoodRatio) >= -1e-9);
    }
}

#[test]
fn independence_cell() {
    let index = common::independent_index();
    let cube = index.cube_for("X", &["x1".into()], "Y", &["y1".into()]).unwrap();
    let cell = cube.cell("x1", "y1").unwrap();
    assert_eq!((cell.n_ij, cell.n_i, cell.n_j, cube.n_col), (2, 5, 4, 10));
    let score = |m| measure_score(&cell, cube.n_col, m, ContingencyMode::Standard).unwrap();
    assert!((score(Measure::InterestFactor) - 1.0).abs() <= 1e-9);
    assert!(score(Measure::LogLikelihoodRatio).abs() <= 1e-9);
    assert!(score(Measure::MutualInformation).abs() <= 1e-9);
    assert!(measure_score(&cell, cube.n_col, Measure::LogLikelihoodRatio, ContingencyMode::Truncated).unwrap() > 1e-3);
}

#[test]
fn cubes_are_cached_per_category_pair() {
    let index = common::independent_index();
    let x = &index.dimension("X").unwrap().categories[1];
    let y = &index.dimension("Y").unwrap().categories[1];
    let a = index.build_cube(x, y).unwrap();
    let b = index.build_cube(x, y).unwrap();
    assert!(Arc::ptr_eq(&a, &b));
    let tsv = a.to_tsv(Measure::InterestFactor, ContingencyMode::Standard);
    assert_eq!(tsv.lines().count(), 1 + a.nonzero.len());
    assert!(tsv.starts_with("c_i\tc_j\tn_ij\tn_i\tn_j\tscore\n"));
}

#[test]
fn bridges_sorted_and_above_delta() {
    let s = synthetic_collection(&mut rng(3), 12, 60);
    let x = &s.index.dimension("X").unwrap().categories[1];
    let y = &s.index.dimension("Y").unwrap().categories[1];
    let spec = BridgeSpec::default();
    let bridges = s.index.bridges(x, y, &spec).unwrap();
    assert!(bridges.iter().all(|b| b.score > spec.delta));
    assert!(bridges.windows(2).all(|w| w[0].score >= w[1].score));
}
