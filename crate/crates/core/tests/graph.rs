use std::sync::Arc;

use ossslab::graph::{
    build_box, dual_graph, rectangle, wired_dual, FiniteGraph, GraphFile, LatticeFamily,
    LatticeSpec,
};
use proptest::prelude::*;

fn lattice_box(family: LatticeFamily, n: usize) -> FiniteGraph {
    build_box(&LatticeSpec::new(family, n)).unwrap()
}

#[test]
fn box_sizes_match_hand_counts() {
    // (family, radius, vertices, edges)
    let cases = [
        (LatticeFamily::Square, 1, 5, 4),
        (LatticeFamily::Square, 2, 13, 16),
        (LatticeFamily::Square, 3, 25, 36),
        (LatticeFamily::Triangular, 1, 7, 12),
        (LatticeFamily::Hexagonal, 1, 4, 3),
        (LatticeFamily::Hexagonal, 2, 10, 9),
    ];
    for (family, n, v, e) in cases {
        let g = lattice_box(family, n);
        assert_eq!(
            (g.n_vertices(), g.n_edges()),
            (v, e),
            "{family:?} radius {n}"
        );
    }
}

#[test]
fn box_boundary_is_the_outer_sphere() {
    for family in [
        LatticeFamily::Square,
        LatticeFamily::Triangular,
        LatticeFamily::Hexagonal,
    ] {
        let g = lattice_box(family, 2);
        let dist = g.box_distances(g.origin());
        for (v, d) in dist.iter().enumerate() {
            assert_eq!(g.is_boundary(v), *d == Some(2), "{family:?} vertex {v}");
        }
        assert!(g.is_connected());
    }
}

#[test]
fn rectangle_has_expected_shape() {
    let g = rectangle(3, 2, 1.0).unwrap();
    assert_eq!(g.n_vertices(), 12);
    // 3 horizontal edges per row over 3 rows, 2 vertical per column over 4 columns.
    assert_eq!(g.n_edges(), 9 + 8);
    assert_eq!(g.boundary().len(), 10);
}

#[test]
fn zero_radius_box_is_rejected() {
    assert!(build_box(&LatticeSpec::new(LatticeFamily::Square, 0)).is_err());
}

#[test]
fn family_names_parse() {
    assert_eq!(
        "honeycomb".parse::<LatticeFamily>().unwrap(),
        LatticeFamily::Hexagonal
    );
    assert_eq!(
        "triangular".parse::<LatticeFamily>().unwrap(),
        LatticeFamily::Triangular
    );
    assert!("cubic".parse::<LatticeFamily>().is_err());
}

#[test]
fn self_loops_and_unknown_vertices_are_rejected() {
    assert!(FiniteGraph::new(vec![0, 1], vec![[0, 0]], vec![1.0], vec![], 0).is_err());
    assert!(FiniteGraph::new(vec![0, 1], vec![[0, 2]], vec![1.0], vec![], 0).is_err());
}

#[test]
fn free_dual_of_a_rectangle_has_euler_characteristic_two() {
    let g = rectangle(3, 2, 1.0).unwrap();
    let d = dual_graph(&g).unwrap();
    let faces = d.dual.n_vertices();
    assert_eq!(g.n_vertices() as i64 - g.n_edges() as i64 + faces as i64, 2);
    assert_eq!(d.dual.n_edges(), g.n_edges());
}

#[test]
fn bridges_have_no_dual() {
    assert!(dual_graph(&lattice_box(LatticeFamily::Square, 2)).is_err());
}

#[test]
fn dual_configuration_map_is_an_involution() {
    let g = Arc::new(rectangle(2, 2, 1.0).unwrap());
    let map = wired_dual(&g).unwrap();
    for mask in [0u64, 1, 0b1010_1010_1010, (1 << 12) - 1] {
        let omega: Vec<bool> = (0..12).map(|e| mask >> e & 1 == 1).collect();
        let star = map.dual_config(&omega);
        assert!(omega.iter().zip(&star).all(|(a, b)| a != b));
        assert_eq!(map.primal_config(&star), omega);
    }
}

#[test]
fn graph_distance_on_lattice_labels() {
    let g = lattice_box(LatticeFamily::Square, 2);
    let far = g
        .boundary()
        .iter()
        .map(|&b| g.label(b))
        .find(|_| true)
        .unwrap();
    assert_eq!(g.graph_distance(g.label(g.origin()), far).unwrap(), Some(2));
}

fn arbitrary_graph() -> impl Strategy<Value = GraphFile> {
    (2usize..8).prop_flat_map(|n| {
        let pairs: Vec<(u64, u64)> = (0..n as u64)
            .flat_map(|a| (a + 1..n as u64).map(move |b| (a, b)))
            .collect();
        (
            proptest::sample::subsequence(pairs.clone(), 1..=pairs.len()),
            proptest::collection::vec(0.01f64..10.0, pairs.len()),
            proptest::sample::subsequence((0..n as u64).collect::<Vec<_>>(), 0..=n),
            0..n as u64,
        )
            .prop_map(move |(edges, js, boundary, origin)| GraphFile {
                vertices: (0..n as u64).map(|v| 100 + 7 * v).collect(),
                edges: edges
                    .iter()
                    .zip(js)
                    .map(|(&(a, b), j)| (100 + 7 * a, 100 + 7 * b, j))
                    .collect(),
                boundary: boundary.iter().map(|v| 100 + 7 * v).collect(),
                origin: 100 + 7 * origin,
                faces: None,
            })
    })
}

proptest! {
    #[test]
    fn graph_json_round_trip_is_bit_exact(file in arbitrary_graph()) {
        let g = FiniteGraph::from_file(file.clone()).unwrap();
        let json = g.to_json();
        let back = FiniteGraph::from_json(&json).unwrap();
        prop_assert_eq!(back.to_file(), file);
        prop_assert_eq!(back.to_json(), json);
    }
}
