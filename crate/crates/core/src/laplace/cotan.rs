use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh_io::TriangleMesh;
use crate::sparse::SparseSymmetricMatrix;

/// Triangle area from its edge lengths (Heron's formula in Kahan's
/// cancellation-free arrangement).
pub(crate) fn heron_area(a: f64, b: f64, c: f64) -> f64 {
    let mut s = [a, b, c];
    s.sort_by(|x, y| y.total_cmp(x));
    let [a, b, c] = s;
    let prod = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    0.25 * prod.max(0.0).sqrt()
}

/// Cotangent stiffness `W` (positive semidefinite, `W·1 = 0`) and lumped
/// barycentric mass `A` of a triangle mesh.
///
/// Off-diagonal entries are `-(cot α + cot β) / 2` over the angles opposite
/// an edge (a single cotangent on boundary edges); negative cotangents from
/// obtuse triangles are kept. `A_ii` is a third of the area of the faces
/// around vertex `i`.
pub fn cotan_matrices(mesh: &TriangleMesh) -> Result<(SparseSymmetricMatrix, SparseSymmetricMatrix)> {
    let n = mesh.num_vertices();
    let v = mesh.vertices();
    let mut stiff = Vec::with_capacity(mesh.num_faces() * 6);
    let mut mass = vec![0.0; n];
    for (fi, f) in mesh.faces().iter().enumerate() {
        // l2[k]: squared length of the edge opposite corner k
        let mut l2 = [0.0; 3];
        for k in 0..3 {
            l2[k] = (v[f[(k + 1) % 3]] - v[f[(k + 2) % 3]]).norm_squared();
        }
        let area = heron_area(l2[0].sqrt(), l2[1].sqrt(), l2[2].sqrt());
        if !(area > 0.0) {
            return Err(Error::DegenerateFace { face: fi });
        }
        for k in 0..3 {
            // law of cosines over the area: cot θ_k = (b² + c² - a²) / 4A
            let cot = (l2[(k + 1) % 3] + l2[(k + 2) % 3] - l2[k]) / (4.0 * area);
            let (i, j) = (f[(k + 1) % 3], f[(k + 2) % 3]);
            let w = 0.5 * cot;
            stiff.push((i, j, -w));
            stiff.push((i, i, w));
            stiff.push((j, j, w));
            mass[f[k]] += area / 3.0;
        }
    }
    Ok((
        SparseSymmetricMatrix::from_triplets(n, stiff)?,
        SparseSymmetricMatrix::from_diagonal(&mass)?,
    ))
}

/// Graph Laplacian of a symmetric nonnegative weight table:
/// `v_ij = -w_ij` off the diagonal, `v_ii = Σ_{k≠i} w_ik`. The diagonal of
/// `weights` is ignored.
pub fn graph_laplacian(weights: &DMatrix<f64>) -> Result<SparseSymmetricMatrix> {
    let n = weights.nrows();
    if weights.ncols() != n {
        return Err(Error::ShapeMismatch(format!("{}x{} weight table", n, weights.ncols())));
    }
    let mut trip = Vec::new();
    let mut diag = vec![0.0; n];
    for j in 0..n {
        for i in 0..j {
            let w = weights[(i, j)];
            let tol = 1e-12 * w.abs().max(1.0);
            if (w - weights[(j, i)]).abs() > tol {
                return Err(Error::Asymmetric { row: i, col: j });
            }
            if w < 0.0 || !w.is_finite() {
                return Err(Error::InvalidArgument(format!("weight ({i}, {j}) = {w} is not a nonnegative number")));
            }
            if w != 0.0 {
                trip.push((i, j, -w));
                diag[i] += w;
                diag[j] += w;
            }
        }
    }
    trip.extend(diag.into_iter().enumerate().map(|(i, d)| (i, i, d)));
    SparseSymmetricMatrix::from_triplets(n, trip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_io::{generate_grid_mesh, generate_sphere_mesh};
    use nalgebra::Vector3;

    /// Interior angle at `a` of triangle (a, b, c) via acos, for an oracle
    /// independent of the edge-length formula.
    fn angle(a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>) -> f64 {
        let (u, v) = ((b - a).normalize(), (c - a).normalize());
        u.dot(&v).clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn right_isoceles_triangle() {
        let verts = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
        ];
        let mesh = TriangleMesh::new(verts.clone(), vec![[0, 1, 2]]).unwrap();
        let (w, a) = cotan_matrices(&mesh).unwrap();
        // trigonometric oracle: w_ij = -cot(angle at the third vertex) / 2
        let cot = |t: f64| t.cos() / t.sin();
        let oracle_01 = -0.5 * cot(angle(verts[2], verts[0], verts[1]));
        let oracle_02 = -0.5 * cot(angle(verts[1], verts[0], verts[2]));
        let oracle_12 = -0.5 * cot(angle(verts[0], verts[1], verts[2]));
        assert!((w.get(0, 1) - -0.5).abs() < 1e-15 && (w.get(0, 1) - oracle_01).abs() < 1e-12);
        assert!((w.get(0, 2) - -0.5).abs() < 1e-15 && (w.get(0, 2) - oracle_02).abs() < 1e-12);
        assert!(w.get(1, 2).abs() < 1e-15 && (w.get(1, 2) - oracle_12).abs() < 1e-12);
        assert!(a.diagonal().iter().all(|&m| (m - 0.5 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn heron_matches_cross_product_area() {
        let s = generate_sphere_mesh(2);
        let v = s.vertices();
        for (fi, f) in s.faces().iter().enumerate() {
            let l = |i: usize, j: usize| (v[f[i]] - v[f[j]]).norm();
            let h = heron_area(l(1, 2), l(2, 0), l(0, 1));
            assert!((h - s.face_area(fi)).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_mesh_rows_sum_to_zero() {
        let (w, _) = cotan_matrices(&generate_sphere_mesh(2)).unwrap();
        assert!(w.row_sums().iter().all(|s| s.abs() < 1e-12));
        assert_eq!(w.asymmetry(), 0.0);
    }

    #[test]
    fn flat_grid_interior_matches_five_point_stencil() {
        let (rows, cols) = (6, 7);
        let grid = generate_grid_mesh(rows, cols, 1.0, 1.0).unwrap();
        let (w, a) = cotan_matrices(&grid).unwrap();
        // finite-difference oracle: 4 on the diagonal, -1 on axis neighbours
        for i in 1..rows - 1 {
            for j in 1..cols - 1 {
                let v = i * cols + j;
                let mut stencil = vec![0.0; rows * cols];
                stencil[v] = 4.0;
                for u in [v - 1, v + 1, v - cols, v + cols] {
                    stencil[u] = -1.0;
                }
                for u in 0..rows * cols {
                    assert!((w.get(v, u) - stencil[u]).abs() < 1e-12, "row {v} col {u}");
                }
                assert!((a.get(v, v) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn degenerate_face_is_reported() {
        let verts = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(2.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
        ];
        let mesh = TriangleMesh::new(verts, vec![[0, 1, 3], [0, 1, 2]]).unwrap();
        assert!(matches!(cotan_matrices(&mesh), Err(Error::DegenerateFace { face: 1 })));
    }

    #[test]
    fn graph_laplacian_examples() {
        let ones = DMatrix::from_element(3, 3, 1.0);
        let v = graph_laplacian(&ones).unwrap().to_dense();
        let expect = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
        assert_eq!(v, expect);
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 5.0, 5.0, 0.0]);
        let v = graph_laplacian(&w).unwrap().to_dense();
        assert_eq!(v, DMatrix::from_row_slice(2, 2, &[5.0, -5.0, -5.0, 5.0]));
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 5.0, 4.0, 0.0]);
        assert!(matches!(graph_laplacian(&bad), Err(Error::Asymmetric { .. })));
    }
}
