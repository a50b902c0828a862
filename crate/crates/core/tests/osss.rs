use std::sync::Arc;

use ossslab::dtree::{BoolFn, DecisionTree, StoppingRule};
use ossslab::graph::{build_box, FiniteGraph, LatticeFamily, LatticeSpec};
use ossslab::measure::{BoundaryCondition, Measure, ProductMeasure, RandomCluster};
use ossslab::osss::{
    check_lemma32, check_osss, check_osss_stopped, check_variant, covariance,
    exploration_revealment_bound, influence, variance, CheckOptions, OsssVariant,
};
use ossslab::Error;

fn uniform(n: usize, p: f64) -> Measure {
    ProductMeasure::uniform(n, p).unwrap().into()
}

#[test]
fn and_of_two_is_tight_for_the_fixed_order() {
    // Var = 3/16; δ = (1, 1/2); Cov = (1/8, 1/8).
    let m = uniform(2, 0.5);
    let f = BoolFn::and(2, &[0, 1]).unwrap();
    let r = check_osss(&m, &DecisionTree::identity(2), &f, CheckOptions::default()).unwrap();
    assert!((r.variance - 3.0 / 16.0).abs() < 1e-15);
    assert!((r.rhs - 3.0 / 16.0).abs() < 1e-15);
    assert!(r.holds);
}

#[test]
fn dictator_is_tight() {
    let m = uniform(3, 0.3);
    let f = BoolFn::dictator(3, 1).unwrap();
    let r = check_osss(&m, &DecisionTree::reversed(3), &f, CheckOptions::default()).unwrap();
    assert!((r.variance - 0.21).abs() < 1e-15);
    assert!(r.slack.abs() < 1e-15);
}

#[test]
fn influence_of_product_measure_is_covariance_over_variance_of_the_bit() {
    let m = uniform(3, 0.2);
    let law = m.exact_law(20).unwrap();
    let f = BoolFn::majority(3, &[0, 1, 2]).unwrap();
    for e in 0..3 {
        let i = influence(&law, &f, e).unwrap();
        let c = covariance(&law, &f, e);
        assert!((c - 0.16 * i).abs() < 1e-15);
    }
    assert!(variance(&law, &f) > 0.0);
}

#[test]
fn poincare_rhs_dominates_the_covariance_rhs() {
    let g = Arc::new(build_box(&LatticeSpec::new(LatticeFamily::Square, 1)).unwrap());
    let m: Measure = RandomCluster::with_p(g.clone(), 2.0, 0.4, BoundaryCondition::Wired)
        .unwrap()
        .into();
    let f = BoolFn::connect(g.clone(), vec![g.origin()], g.boundary().to_vec()).unwrap();
    let tree = DecisionTree::exploration(g, 1, 1).unwrap();
    let cov = check_variant(
        OsssVariant::Covariance,
        &m,
        &tree,
        &f,
        CheckOptions::default(),
    )
    .unwrap();
    let poi = check_variant(
        OsssVariant::Poincare,
        &m,
        &tree,
        &f,
        CheckOptions::default(),
    )
    .unwrap();
    let inf = check_variant(
        OsssVariant::Influence,
        &m,
        &tree,
        &f,
        CheckOptions::default(),
    )
    .unwrap();
    assert!(cov.holds && poi.holds && inf.holds);
    assert!(poi.rhs >= cov.rhs - 1e-15);
}

#[test]
fn stopped_variant_at_full_reading_has_no_residual() {
    let m = uniform(3, 0.5);
    let f = BoolFn::or(3, &[0, 1, 2]).unwrap();
    let r = check_osss_stopped(
        &m,
        &DecisionTree::identity(3),
        &StoppingRule::Full,
        &f,
        CheckOptions::default(),
    )
    .unwrap();
    assert_eq!(r.residual, Some(0.0));
    assert!(r.holds);
    let early = check_osss_stopped(
        &m,
        &DecisionTree::identity(3),
        &StoppingRule::AfterQueries(1),
        &f,
        CheckOptions::default(),
    )
    .unwrap();
    assert!(early.residual.unwrap() > 0.0 && early.holds);
}

#[test]
fn decreasing_function_is_refused_unless_forced() {
    let m = uniform(2, 0.5);
    let anti = BoolFn::from_indicator("not-0", 2, |mask| mask & 1 == 0).unwrap();
    let tree = DecisionTree::identity(2);
    assert!(matches!(
        check_osss(&m, &tree, &anti, CheckOptions::default()),
        Err(Error::Hypothesis(_))
    ));
    let forced = check_osss(&m, &tree, &anti, CheckOptions { force: true }).unwrap();
    assert!(!forced.warnings.is_empty());
}

#[test]
fn non_monotonic_measure_is_refused_unless_forced() {
    let tri = Arc::new(
        FiniteGraph::new(
            vec![0, 1, 2],
            vec![[0, 1], [1, 2], [0, 2]],
            vec![1.0; 3],
            vec![],
            0,
        )
        .unwrap(),
    );
    let m: Measure = RandomCluster::with_p(tri, 0.2, 0.5, BoundaryCondition::Free)
        .unwrap()
        .into();
    let f = BoolFn::and(3, &[0, 1, 2]).unwrap();
    let tree = DecisionTree::identity(3);
    assert!(matches!(
        check_osss(&m, &tree, &f, CheckOptions::default()),
        Err(Error::Hypothesis(_))
    ));
    let forced = check_osss(&m, &tree, &f, CheckOptions { force: true }).unwrap();
    assert!(forced.warnings.iter().any(|w| w.contains("not monotonic")));
}

#[test]
fn signed_functions_are_rescaled() {
    let m = uniform(2, 0.5);
    let f = BoolFn::table("signed-dictator", 2, vec![-1.0, 1.0, -1.0, 1.0]).unwrap();
    let r = check_osss(&m, &DecisionTree::identity(2), &f, CheckOptions::default()).unwrap();
    assert!(!r.warnings.is_empty());
    assert!((r.variance - 0.25).abs() < 1e-15);
}

#[test]
fn covariance_lower_bound_on_small_boxes() {
    for n in [1, 2] {
        let g = Arc::new(build_box(&LatticeSpec::new(LatticeFamily::Square, n)).unwrap());
        for q in [1.0, 2.0] {
            let m: Measure = RandomCluster::with_p(g.clone(), q, 0.5, BoundaryCondition::Wired)
                .unwrap()
                .into();
            let r = check_lemma32(&m, n).unwrap();
            assert!(r.holds, "n={n} q={q}: {r:?}");
            let bound = exploration_revealment_bound(&m, 1, n).unwrap();
            assert!(bound.iter().all(|row| row.revealment <= row.bound + 1e-12));
        }
    }
}

#[test]
fn csv_has_one_row_per_edge() {
    let m = uniform(3, 0.5);
    let f = BoolFn::or(3, &[0, 1, 2]).unwrap();
    let r = check_osss(&m, &DecisionTree::identity(3), &f, CheckOptions::default()).unwrap();
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("edge,revealment,covariance,influence")
    );
    assert_eq!(text.lines().count(), 4);
}
