use arpair::box_graph::TransitionGraph;
use arpair::canonical;
use arpair::decomposition::{classify_alpha, leveled_decomposition, AlphaClass};
use arpair::interval_set::IntervalUnion;
use arpair::lorenz_renorm::detect_renormalization;
use arpair::lyapunov::LyapunovEvaluator;
use arpair::PiecewiseMap;

fn maps() -> Vec<(&'static str, PiecewiseMap, usize)> {
    vec![
        ("square", canonical::square(), 256),
        ("doubling", canonical::doubling(), 256),
        ("sqrt2", canonical::sqrt2_lorenz(), 256),
        ("renormalizable", canonical::renormalizable_lorenz(), 512),
        ("logistic 3.2", canonical::logistic(3.2), 256),
    ]
}

#[test]
fn attracting_sets_nest_and_repellers_grow() {
    for (name, f, n) in maps() {
        let chain = leveled_decomposition(&f, 8, n).unwrap();
        let w = chain.box_width;
        for pair in chain.levels.windows(2) {
            assert!(
                pair[1].attracting.is_subset_of(&pair[0].attracting, w),
                "{name}"
            );
            assert!(
                pair[0].repelling.is_subset_of(&pair[1].repelling, w),
                "{name}"
            );
        }
    }
}

#[test]
fn attracting_boxes_are_forward_invariant() {
    for (name, f, n) in maps() {
        let chain = leveled_decomposition(&f, 8, n).unwrap();
        let g = TransitionGraph::build(&f, n).unwrap();
        for level in &chain.levels {
            for k in level.attracting_boxes.iter() {
                for &j in g.successors(k) {
                    assert!(level.attracting_boxes.contains(j), "{name}: {k} -> {j}");
                }
            }
        }
    }
}

#[test]
fn morse_sets_and_connecting_regions_cover_the_interval() {
    for (name, f, n) in maps() {
        let chain = leveled_decomposition(&f, 8, n).unwrap();
        let mut cover = IntervalUnion::empty();
        for m in chain.morse_sets.iter().chain(&chain.connecting_regions) {
            cover = cover.union(m);
        }
        if chain.level_count == 0 {
            continue;
        }
        assert!(
            IntervalUnion::full().is_subset_of(&cover.union(&chain.overlap()), 1e-12),
            "{name}: {cover:?}"
        );
    }
}

#[test]
fn classification_matches_lyapunov_degeneracy() {
    for (name, f, n) in maps() {
        let chain = leveled_decomposition(&f, 8, n).unwrap();
        let ev = LyapunovEvaluator::from_chain(&chain, 200, 40).unwrap();
        assert_eq!(ev.is_degenerate(), chain.level_count == 0, "{name}");
        if chain.level_count == 0 {
            assert!(chain.transitive, "{name}");
            assert_eq!(
                classify_alpha(&chain, 0.37),
                AlphaClass::WholeSpace,
                "{name}"
            );
        }
    }
}

#[test]
fn renormalization_agrees_with_level_count() {
    for (name, f, n) in maps() {
        if f.critical_point().is_none() {
            continue;
        }
        let chain = leveled_decomposition(&f, 8, n).unwrap();
        let renorm = detect_renormalization(&f, 64);
        assert_eq!(renorm.is_some(), chain.level_count >= 1, "{name}");
    }
}
