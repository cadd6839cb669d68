use std::collections::HashMap;

use nalgebra::{DMatrix, Vector3};

use crate::error::{Error, Result};

/// A validated triangle mesh.
///
/// Face indices are in range, every face has three distinct vertices and no
/// edge is shared by more than two faces. The undirected edge set and the
/// per-vertex boundary flags are derived once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vector3<f64>>,
    faces: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    boundary: Vec<bool>,
    closed: bool,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, v) in vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidMesh(format!("vertex {fi} has non-finite coordinates")));
            }
        }
        let mut edge_faces: HashMap<[usize; 2], u32> = HashMap::with_capacity(faces.len() * 2);
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex {bad}, but the mesh has {n} vertices"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} repeats a vertex: {f:?}")));
            }
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *edge_faces.entry([a.min(b), a.max(b)]).or_insert(0) += 1;
            }
        }
        let mut boundary = vec![false; n];
        let mut closed = !faces.is_empty();
        for (e, &count) in &edge_faces {
            if count > 2 {
                return Err(Error::InvalidMesh(format!(
                    "edge ({}, {}) is shared by {count} faces",
                    e[0], e[1]
                )));
            }
            if count == 1 {
                boundary[e[0]] = true;
                boundary[e[1]] = true;
                closed = false;
            }
        }
        let mut edges: Vec<[usize; 2]> = edge_faces.into_keys().collect();
        edges.sort_unstable();
        Ok(Self {
            vertices,
            faces,
            edges,
            boundary,
            closed,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Undirected edges `[i, j]` with `i < j`, sorted.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// `true` for vertices lying on an edge with a single incident face.
    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    /// Every edge has exactly two incident faces.
    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Symmetric adjacency lists with Euclidean edge lengths.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &[a, b] in &self.edges {
            let len = (self.vertices[a] - self.vertices[b]).norm();
            adj[a].push((b, len));
            adj[b].push((a, len));
        }
        adj
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.faces[face];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * (pb - pa).cross(&(pc - pa)).norm()
    }

    /// Vertex coordinates as an `N x 3` matrix.
    pub fn coordinates(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.vertices.len(), 3, |i, j| self.vertices[i][j])
    }

    /// Same connectivity, new vertex positions (rows of an `N x m` table,
    /// `m <= 3`, missing coordinates set to zero).
    pub fn with_coordinates(&self, coords: &DMatrix<f64>) -> Result<Self> {
        if coords.nrows() != self.vertices.len() || coords.ncols() > 3 {
            return Err(Error::ShapeMismatch(format!(
                "expected {} rows and at most 3 columns, got {}x{}",
                self.vertices.len(),
                coords.nrows(),
                coords.ncols()
            )));
        }
        let vertices = (0..coords.nrows())
            .map(|i| Vector3::from_fn(|j, _| if j < coords.ncols() { coords[(i, j)] } else { 0.0 }))
            .collect();
        let mut mesh = self.clone();
        mesh.vertices = vertices;
        Ok(mesh)
    }

    /// Byte-level fingerprint of geometry and connectivity, stable across runs.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a
        let mut h: u64 = 0xcbf29ce484222325;
        let mut feed = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        feed(&(self.vertices.len() as u64).to_le_bytes());
        for v in &self.vertices {
            for c in v.iter() {
                feed(&c.to_le_bytes());
            }
        }
        for f in &self.faces {
            for &i in f {
                feed(&(i as u64).to_le_bytes());
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> Vec<Vector3<f64>> {
        vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
        ]
    }

    #[test]
    fn rejects_out_of_range_index() {
        let err = TriangleMesh::new(tri(), vec![[0, 1, 3]]).unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
    }

    #[test]
    fn rejects_repeated_vertex() {
        assert!(TriangleMesh::new(tri(), vec![[0, 1, 1]]).is_err());
    }

    #[test]
    fn rejects_non_manifold_edge() {
        let mut v = tri();
        v.push(Vector3::new(0.0, -1.0, 0.0));
        v.push(Vector3::new(0.0, 0.0, 1.0));
        let faces = vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]];
        assert!(TriangleMesh::new(v, faces).is_err());
    }

    #[test]
    fn single_triangle_is_all_boundary() {
        let m = TriangleMesh::new(tri(), vec![[0, 1, 2]]).unwrap();
        assert_eq!(m.edges().len(), 3);
        assert!(m.boundary_flags().iter().all(|&b| b));
        assert!(!m.is_closed());
        assert!((m.face_area(0) - 0.5).abs() < 1e-15);
    }
}
