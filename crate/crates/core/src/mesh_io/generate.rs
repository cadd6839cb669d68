use std::collections::HashMap;

use nalgebra::Vector3;

use super::TriangleMesh;
use crate::error::{Error, Result};

/// Regular planar lattice in the `z = 0` plane. Vertex `(i, j)` (row `i`,
/// column `j`) sits at `(j * spacing_x, i * spacing_y)` with index
/// `i * cols + j`; each quad is split along its `(i, j)`–`(i+1, j+1)` diagonal.
pub fn generate_grid_mesh(rows: usize, cols: usize, spacing_x: f64, spacing_y: f64) -> Result<TriangleMesh> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid needs at least 2 rows and 2 columns, got {rows}x{cols}"
        )));
    }
    if !(spacing_x > 0.0 && spacing_y > 0.0) {
        return Err(Error::InvalidArgument("grid spacing must be positive".into()));
    }
    let mut vertices = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            vertices.push(Vector3::new(j as f64 * spacing_x, i as f64 * spacing_y, 0.0));
        }
    }
    let mut faces = Vec::with_capacity(2 * (rows - 1) * (cols - 1));
    for i in 0..rows - 1 {
        for j in 0..cols - 1 {
            let a = i * cols + j;
            let b = a + 1;
            let c = a + cols;
            let d = c + 1;
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Icosahedron subdivided `level` times (each triangle into four), with all
/// vertices projected to the unit sphere. Has `10 * 4^level + 2` vertices.
pub fn generate_sphere_mesh(level: usize) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vector3<f64>> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vector3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vector3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(vertices, faces).expect("subdivided icosahedron is a valid closed mesh")
}
