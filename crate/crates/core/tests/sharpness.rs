use std::sync::Arc;

use ossslab::graph::{build_box, LatticeFamily, LatticeSpec};
use ossslab::sharpness::{
    beta1_estimate, beta_of_p, check_differential_inequality, dual_parameter,
    duality_relation_check, exact_theta_grid, mean_field_scan, p_of_beta, pc_solve, ExactTheta,
    GridSource, ThetaGrid,
};
use ossslab::stats::Estimate;

#[test]
fn critical_points_of_the_planar_lattices() {
    let sq = pc_solve(LatticeFamily::Square, 2.0).unwrap();
    assert!((sq.p_c - 2f64.sqrt() / (1.0 + 2f64.sqrt())).abs() < 1e-12);
    let tri = pc_solve(LatticeFamily::Triangular, 1.0).unwrap();
    assert!((tri.p_c - 2.0 * (std::f64::consts::PI / 18.0).sin()).abs() < 1e-12);
    let hex = pc_solve(LatticeFamily::Hexagonal, 1.0).unwrap();
    assert!((hex.p_c - (1.0 - 2.0 * (std::f64::consts::PI / 18.0).sin())).abs() < 1e-12);
    // Ising on the square lattice: β_c = ln(1 + √2) / 2 for J = 1/2 spins, i.e. ln(1+√2) here.
    assert!((sq.beta_c - (1.0 + 2f64.sqrt()).ln()).abs() < 1e-12);
    assert!(pc_solve(LatticeFamily::Square, 0.0).is_err());
}

#[test]
fn duality_map_is_an_involution() {
    for q in [1.0, 2.5, 4.0] {
        for p in [0.1, 0.5, 0.9] {
            let star = dual_parameter(p, q);
            assert!((dual_parameter(star, q) - p).abs() < 1e-14);
        }
        let r = duality_relation_check(LatticeFamily::Triangular, q, 0.3).unwrap();
        assert!(r.relation_residual < 1e-12 && r.critical_pair_residual < 1e-10);
    }
    let sq = pc_solve(LatticeFamily::Square, 3.0).unwrap();
    assert!((dual_parameter(sq.p_c, 3.0) - sq.p_c).abs() < 1e-12);
}

#[test]
fn beta_and_p_are_inverse() {
    for beta in [0.0, 0.3, 2.0] {
        assert!((beta_of_p(p_of_beta(beta, 0.7), 0.7) - beta).abs() < 1e-12);
    }
}

#[test]
fn one_step_connection_for_independent_percolation() {
    let p: f64 = 0.35;
    let beta = beta_of_p(p, 1.0);
    for (family, degree) in [
        (LatticeFamily::Square, 4),
        (LatticeFamily::Triangular, 6),
        (LatticeFamily::Hexagonal, 3),
    ] {
        // Independent edges: only the edges at the origin matter.
        let g = build_box(&LatticeSpec::new(family, 1)).unwrap();
        let theta = ExactTheta::new(Arc::new(g), 1).unwrap();
        let truth = 1.0 - (1.0 - p).powi(degree);
        let value = theta.value(1.0, beta).unwrap();
        assert!(
            (value - truth).abs() < 1e-12,
            "{family:?}: {value} vs {truth}"
        );
    }
}

#[test]
fn exact_grid_satisfies_the_differential_inequality() {
    let betas = [0.3, 0.5, 0.7, 0.9];
    let grid = exact_theta_grid(LatticeFamily::Square, &[1], 2.0, &betas).unwrap();
    assert!(grid.monotonicity_in_n_violations().is_empty());
    let r = check_differential_inequality(&grid, None).unwrap();
    assert_eq!(r.violations, 0);
    assert!(r.c > 0.0);
}

fn flat_grid(value: f64) -> ThetaGrid {
    let betas = vec![0.1, 0.2, 0.3, 0.4];
    let sizes = vec![1, 2, 4];
    let values = vec![vec![Estimate::exact(value); 3]; 4];
    ThetaGrid::new(1.0, 1.0, betas, sizes, values, GridSource::Exact).unwrap()
}

#[test]
fn flat_theta_violates_the_differential_inequality() {
    let r = check_differential_inequality(&flat_grid(0.5), Some(0.1)).unwrap();
    assert!(r.violations > 0);
    assert!(r.min_margin < 0.0);
}

#[test]
fn csv_lists_every_cell() {
    let grid = flat_grid(0.25);
    let mut buf = Vec::new();
    grid.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("beta,n,theta,half_width,source"));
    assert_eq!(text.lines().count(), 1 + 12);
}

#[test]
fn malformed_grids_and_windows_are_rejected() {
    let bad = ThetaGrid::new(
        1.0,
        1.0,
        vec![0.2, 0.1],
        vec![1],
        vec![vec![Estimate::exact(0.1)]; 2],
        GridSource::Exact,
    );
    assert!(bad.is_err());
    let grid = flat_grid(0.5);
    assert!(beta1_estimate(&grid, Some(&[1, 2])).is_err());
    assert!(mean_field_scan(&grid, 5.0).is_err());
}
