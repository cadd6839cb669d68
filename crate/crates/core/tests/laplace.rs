use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use spectral_mds::laplace::{cotan_matrices, eigenbasis, graph_laplacian, read_basis_cache, write_basis_cache};
use spectral_mds::mesh_io::{generate_grid_mesh, generate_sphere_mesh};

#[test]
fn sphere_basis_is_mass_orthonormal_with_spherical_harmonic_spectrum() {
    let mesh = generate_sphere_mesh(3);
    let (w, a) = cotan_matrices(&mesh).unwrap();
    let basis = eigenbasis(&w, &a, 16).unwrap();
    assert!(basis.orthonormality_error() < 1e-8);
    assert!(basis.residual(&w) < 1e-6);
    assert!(basis.eigenvalues.windows(2).all(|p| p[0] <= p[1] + 1e-12));
    // degree l has eigenvalue l(l+1) with multiplicity 2l + 1
    let expected = [0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0, 12.0, 12.0, 12.0, 12.0, 12.0, 12.0, 12.0];
    assert!(basis.eigenvalues[0].abs() < 1e-8);
    for (l, e) in basis.eigenvalues.iter().zip(expected).skip(1) {
        assert!((l - e).abs() / e < 0.03, "{l} vs {e}");
    }
}

#[test]
fn single_mode_is_constant() {
    let mesh = generate_grid_mesh(12, 9, 0.3, 0.5).unwrap();
    let (w, a) = cotan_matrices(&mesh).unwrap();
    let basis = eigenbasis(&w, &a, 1).unwrap();
    let col = basis.phi.column(0);
    let area: f64 = a.diagonal().iter().sum();
    assert!(basis.eigenvalues[0].abs() < 1e-10);
    for v in col.iter() {
        assert!((v.abs() - 1.0 / area.sqrt()).abs() < 1e-8);
    }
}

#[test]
fn grid_cotan_weights_and_lumped_area() {
    let mesh = generate_grid_mesh(5, 6, 0.5, 0.5).unwrap();
    let (w, a) = cotan_matrices(&mesh).unwrap();
    let total: f64 = a.diagonal().iter().sum();
    assert!((total - 2.0 * 2.5).abs() < 1e-12);
    assert!(w.row_sums().iter().all(|s| s.abs() < 1e-12));
    // right-isosceles triangles: axis edges get 1/2 per adjacent face, diagonals 0
    let c = 2 * 6 + 2;
    assert!((w.get(c, c + 1) + 1.0).abs() < 1e-12);
    assert!((w.get(c, c + 6) + 1.0).abs() < 1e-12);
    assert!(w.get(c, c + 7).abs() < 1e-12);
}

#[test]
fn cache_round_trip() {
    let mesh = generate_sphere_mesh(2);
    let (w, a) = cotan_matrices(&mesh).unwrap();
    let basis = eigenbasis(&w, &a, 12).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("basis.bin");
    write_basis_cache(&path, &basis).unwrap();
    let back = read_basis_cache(&path).unwrap();
    assert_eq!(back.phi, basis.phi);
    assert_eq!(back.eigenvalues, basis.eigenvalues);
    assert_eq!(back.mass.diagonal(), basis.mass.diagonal());

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
    assert!(read_basis_cache(&path).is_err());
}

#[test]
fn rejects_bad_sizes() {
    let mesh = generate_sphere_mesh(0);
    let (w, a) = cotan_matrices(&mesh).unwrap();
    assert!(eigenbasis(&w, &a, 0).is_err());
    assert!(eigenbasis(&w, &a, 12).is_err());
    assert!(graph_laplacian(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0])).is_err());
}

proptest! {
    #[test]
    fn graph_laplacian_is_psd_with_zero_row_sums(
        (n, w) in (2usize..10).prop_flat_map(|n| (Just(n), prop::collection::vec(0.0f64..4.0, n * n)))
    ) {
        let raw = DMatrix::from_vec(n, n, w);
        let sym = (&raw + raw.transpose()) * 0.5;
        let l = graph_laplacian(&sym).unwrap().to_dense();
        for i in 0..n {
            prop_assert!(l.row(i).sum().abs() < 1e-12);
            for j in 0..n {
                if i != j {
                    prop_assert!((l[(i, j)] + sym[(i, j)]).abs() < 1e-12);
                }
            }
        }
        let min = l.clone().symmetric_eigenvalues().min();
        prop_assert!(min > -1e-10 * sym.amax().max(1.0));
        let ones = DVector::from_element(n, 1.0);
        prop_assert!((&l * ones).amax() < 1e-12);
    }
}
