use nalgebra::DMatrix;
use proptest::prelude::*;

use spectral_mds::mesh_io::{generate_grid_mesh, generate_sphere_mesh};
use spectral_mds::metric::{
    dijkstra, farthest_point_indices, farthest_point_sampling, farthest_point_sampling_table, geodesic_all_pairs,
    subsample_rows, WeightedGraph,
};

fn random_graph(n: usize, extra: &[(usize, usize, f64)]) -> WeightedGraph {
    // a path keeps the graph connected, extra edges add shortcuts
    let mut edges: Vec<(usize, usize, f64)> = (1..n).map(|i| (i - 1, i, 1.0 + (i % 3) as f64)).collect();
    edges.extend(extra.iter().map(|&(i, j, l)| (i % n, j % n, l)));
    WeightedGraph::from_edges(n, edges).unwrap()
}

fn graph_strategy() -> impl Strategy<Value = WeightedGraph> {
    (3usize..30).prop_flat_map(|n| {
        prop::collection::vec((0usize..30, 0usize..30, 0.1f64..5.0), 0..40)
            .prop_map(move |extra| random_graph(n, &extra))
    })
}

/// Floyd–Warshall on the adjacency lists.
fn brute_force_distances(g: &WeightedGraph) -> DMatrix<f64> {
    let n = g.num_nodes();
    let mut d = DMatrix::from_element(n, n, f64::INFINITY);
    for i in 0..n {
        d[(i, i)] = 0.0;
        for (j, l) in g.neighbors(i) {
            d[(i, j)] = d[(i, j)].min(l);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[(i, k)] + d[(k, j)];
                if via < d[(i, j)] {
                    d[(i, j)] = via;
                }
            }
        }
    }
    d
}

#[test]
fn lattice_distances_are_manhattan() {
    let g = WeightedGraph::lattice(4, 5, 0.5, 2.0).unwrap();
    let d = dijkstra(&g, 0);
    for i in 0..4 {
        for j in 0..5 {
            assert!((d[i * 5 + j] - (0.5 * j as f64 + 2.0 * i as f64)).abs() < 1e-12);
        }
    }
}

#[test]
fn grid_geodesics_are_symmetric_with_zero_diagonal() {
    let mesh = generate_grid_mesh(6, 7, 1.0, 1.0).unwrap();
    let d = geodesic_all_pairs(&mesh).unwrap();
    assert_eq!(d, d.transpose());
    assert!(d.diagonal().iter().all(|&x| x == 0.0));
    // the triangulation diagonal is a shortcut across each quad
    assert!((d[(0, 7 + 1)] - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn sampling_is_deterministic_and_matches_pruned_variant() {
    let mesh = generate_sphere_mesh(3);
    let mut coords = mesh.coordinates();
    for (k, v) in coords.iter_mut().enumerate() {
        *v *= 1.0 + 1e-3 * ((k * 7919) % 101) as f64 / 101.0;
    }
    let jittered = mesh.with_coordinates(&coords).unwrap();
    let g = WeightedGraph::from_mesh(&jittered);
    let a = farthest_point_sampling(&g, 60, 5).unwrap();
    let b = farthest_point_sampling(&g, 60, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(farthest_point_indices(&g, 60, 5).unwrap(), a.indices);
    let full = geodesic_all_pairs(&jittered).unwrap();
    let table = farthest_point_sampling_table(&full, 60, 5).unwrap();
    assert_eq!(table.indices, a.indices);
    assert!((table.distances.clone() - &a.distances).amax() < 1e-12);
    assert_eq!(a.prefix(20).indices, a.indices[..20]);
}

#[test]
fn subsample_rows_examples() {
    let d = DMatrix::from_fn(4, 4, |i, j| (10 * i + j) as f64);
    let s = subsample_rows(&d, &[3, 1]);
    assert_eq!(s, DMatrix::from_row_slice(2, 2, &[33.0, 31.0, 13.0, 11.0]));
    assert_eq!(subsample_rows(&d, &[]).nrows(), 0);
}

#[test]
fn sampling_set_csv_round_trip() {
    let g = WeightedGraph::lattice(5, 5, 1.0, 1.0).unwrap();
    let s = farthest_point_sampling(&g, 6, 12).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    s.write_csv(&path).unwrap();
    let back = spectral_mds::SamplingSet::read_csv(&path).unwrap();
    assert_eq!(back.indices, s.indices);
    assert!((back.distances - s.distances).amax() < 1e-12);
}

#[test]
fn disconnected_and_bad_arguments_are_rejected() {
    let g = WeightedGraph::from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
    assert!(farthest_point_sampling(&g, 2, 0).is_err());
    let ok = random_graph(5, &[]);
    assert!(farthest_point_sampling(&ok, 0, 0).is_err());
    assert!(farthest_point_sampling(&ok, 6, 0).is_err());
    assert!(farthest_point_sampling(&ok, 2, 5).is_err());
    assert!(WeightedGraph::from_edges(2, [(0, 1, -1.0)]).is_err());
}

proptest! {
    #[test]
    fn dijkstra_matches_floyd_warshall(g in graph_strategy()) {
        let brute = brute_force_distances(&g);
        for s in 0..g.num_nodes() {
            let d = dijkstra(&g, s);
            for v in 0..g.num_nodes() {
                prop_assert!((d[v] - brute[(s, v)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn geodesics_satisfy_triangle_inequality(g in graph_strategy()) {
        let n = g.num_nodes();
        let d = DMatrix::from_fn(n, n, |i, j| dijkstra(&g, i)[j]);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    prop_assert!(d[(i, j)] <= d[(i, k)] + d[(k, j)] + 1e-9);
                }
            }
        }
    }

    /// Each new sample is a brute-force farthest point from the previous
    /// ones, and the covering radii never grow.
    #[test]
    fn sampling_radii_are_nonincreasing(g in graph_strategy(), q_frac in 0.1f64..1.0, seed_frac in 0.0f64..1.0) {
        let n = g.num_nodes();
        let q = ((q_frac * n as f64) as usize).clamp(1, n);
        let seed = ((seed_frac * n as f64) as usize).min(n - 1);
        let s = farthest_point_sampling(&g, q, seed).unwrap();
        let brute = brute_force_distances(&g);
        prop_assert_eq!(s.indices[0], seed);
        let mut radii = Vec::new();
        for k in 1..q {
            let prev = &s.indices[..k];
            let dist_to = |v: usize| prev.iter().map(|&p| brute[(p, v)]).fold(f64::INFINITY, f64::min);
            let best = (0..n).filter(|v| !prev.contains(v)).map(dist_to).fold(f64::NEG_INFINITY, f64::max);
            let got = dist_to(s.indices[k]);
            prop_assert!((got - best).abs() < 1e-9);
            radii.push(got);
        }
        prop_assert!(radii.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        for a in 0..q {
            for b in 0..q {
                prop_assert!((s.distances[(a, b)] - brute[(s.indices[a], s.indices[b])]).abs() < 1e-9);
            }
        }
    }
}
