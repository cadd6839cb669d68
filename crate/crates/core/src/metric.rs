//! Graph geodesics and farthest point sampling.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh_io::TriangleMesh;

/// Undirected weighted graph in compressed adjacency form.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    lengths: Vec<f64>,
}

impl WeightedGraph {
    /// Builds the graph from undirected edges `(i, j, length)`.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let edges: Vec<(usize, usize, f64)> = edges.into_iter().collect();
        let mut degree = vec![0usize; n];
        for &(i, j, len) in &edges {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("edge ({i}, {j}) out of range for {n} nodes")));
            }
            if !(len >= 0.0 && len.is_finite()) {
                return Err(Error::InvalidArgument(format!("edge ({i}, {j}) has length {len}")));
            }
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut offsets = vec![0; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0; offsets[n]];
        let mut lengths = vec![0.0; offsets[n]];
        for &(i, j, len) in &edges {
            targets[fill[i]] = j;
            lengths[fill[i]] = len;
            fill[i] += 1;
            targets[fill[j]] = i;
            lengths[fill[j]] = len;
            fill[j] += 1;
        }
        Ok(Self {
            offsets,
            targets,
            lengths,
        })
    }

    /// Mesh edges weighted by Euclidean length.
    pub fn from_mesh(mesh: &TriangleMesh) -> Self {
        let v = mesh.vertices();
        let edges = mesh.edges().iter().map(|&[i, j]| (i, j, (v[i] - v[j]).norm()));
        Self::from_edges(mesh.num_vertices(), edges).expect("mesh edges are valid")
    }

    /// 4-neighbor lattice of `rows x cols` nodes (index `i * cols + j`)
    /// with horizontal spacing `hx` and vertical spacing `hy`.
    pub fn lattice(rows: usize, cols: usize, hx: f64, hy: f64) -> Result<Self> {
        let mut edges = Vec::with_capacity(2 * rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let v = i * cols + j;
                if j + 1 < cols {
                    edges.push((v, v + 1, hx));
                }
                if i + 1 < rows {
                    edges.push((v, v + cols, hy));
                }
            }
        }
        Self::from_edges(rows * cols, edges)
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.targets[r.clone()].iter().copied().zip(self.lengths[r].iter().copied())
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    // min-heap on distance, ties by smaller node index
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path distances from `source`; unreachable nodes stay infinite.
pub fn dijkstra(graph: &WeightedGraph, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; graph.num_nodes()];
    dijkstra_bounded(graph, source, &mut dist);
    dist
}

/// Dijkstra that only relaxes nodes whose current value in `bound` it can
/// lower, writing improved distances into `bound`. With `bound` all infinite
/// this is plain Dijkstra; with `bound` holding distances to earlier sources
/// it updates the running minimum while visiting only the new Voronoi cell.
fn dijkstra_bounded(graph: &WeightedGraph, source: usize, bound: &mut [f64]) {
    let mut heap = BinaryHeap::new();
    bound[source] = 0.0;
    heap.push(Entry(0.0, source));
    while let Some(Entry(d, u)) = heap.pop() {
        if d > bound[u] {
            continue;
        }
        for (v, len) in graph.neighbors(u) {
            let nd = d + len;
            if nd < bound[v] {
                bound[v] = nd;
                heap.push(Entry(nd, v));
            }
        }
    }
}

fn check_reachable(source: usize, row: &[f64]) -> Result<()> {
    let unreachable = row.iter().filter(|d| d.is_infinite()).count();
    if unreachable > 0 {
        return Err(Error::Disconnected {
            source_vertex: source,
            unreachable,
        });
    }
    Ok(())
}

/// Distances from each source to every node, one row per source.
pub fn geodesic_from_sources(graph: &WeightedGraph, sources: &[usize]) -> Result<DMatrix<f64>> {
    let n = graph.num_nodes();
    if let Some(&s) = sources.iter().find(|&&s| s >= n) {
        return Err(Error::InvalidArgument(format!("source {s} out of range for {n} nodes")));
    }
    let rows: Vec<Vec<f64>> = sources.par_iter().map(|&s| dijkstra(graph, s)).collect();
    for (row, &s) in rows.iter().zip(sources) {
        check_reachable(s, row)?;
    }
    Ok(DMatrix::from_fn(sources.len(), n, |r, c| rows[r][c]))
}

/// Symmetrized all-pairs geodesic table of the mesh edge graph.
pub fn geodesic_all_pairs(mesh: &TriangleMesh) -> Result<DMatrix<f64>> {
    geodesic_all_pairs_graph(&WeightedGraph::from_mesh(mesh))
}

pub fn geodesic_all_pairs_graph(graph: &WeightedGraph) -> Result<DMatrix<f64>> {
    let all: Vec<usize> = (0..graph.num_nodes()).collect();
    Ok(symmetrized(geodesic_from_sources(graph, &all)?))
}

fn symmetrized(mut d: DMatrix<f64>) -> DMatrix<f64> {
    let n = d.nrows();
    for j in 0..n {
        for i in 0..j {
            let avg = 0.5 * (d[(i, j)] + d[(j, i)]);
            d[(i, j)] = avg;
            d[(j, i)] = avg;
        }
        d[(j, j)] = 0.0;
    }
    d
}

/// Farthest point samples and their mutual geodesic distances.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSet {
    pub indices: Vec<usize>,
    /// Symmetric `q x q` table of distances between samples.
    pub distances: DMatrix<f64>,
}

impl SamplingSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// The leading `q` samples (a farthest point prefix is itself a
    /// farthest point sampling).
    pub fn prefix(&self, q: usize) -> SamplingSet {
        let q = q.min(self.len());
        SamplingSet {
            indices: self.indices[..q].to_vec(),
            distances: self.distances.view((0, 0), (q, q)).into_owned(),
        }
    }

    /// One line per sample: its vertex index followed by its distances to
    /// every sample.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("vertex");
        for k in 0..self.len() {
            let _ = write!(s, ",d{k}");
        }
        s.push('\n');
        for (r, &v) in self.indices.iter().enumerate() {
            let _ = write!(s, "{v}");
            for c in 0..self.len() {
                let _ = write!(s, ",{:e}", self.distances[(r, c)]);
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<SamplingSet> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::parse(1, "empty sampling file"))?;
        let q = header.split(',').count() - 1;
        let mut indices = Vec::with_capacity(q);
        let mut values = Vec::with_capacity(q * q);
        for (r, line) in lines.enumerate() {
            let mut fields = line.split(',');
            let v = fields.next().unwrap_or("");
            indices.push(v.trim().parse().map_err(|_| Error::parse(r + 2, format!("bad vertex index {v:?}")))?);
            for f in fields {
                values.push(f.trim().parse::<f64>().map_err(|_| Error::parse(r + 2, format!("bad distance {f:?}")))?);
            }
        }
        if indices.len() != q || values.len() != q * q {
            return Err(Error::parse(0, format!("expected {q} rows of {q} distances")));
        }
        Ok(SamplingSet {
            indices,
            distances: DMatrix::from_row_slice(q, q, &values),
        })
    }
}

/// Greedy max-min sampling from `seed`, ties broken by the smaller index.
/// Returns the samples and the `q x N` distance rows from each sample.
pub fn farthest_point_sampling_rows(graph: &WeightedGraph, q: usize, seed: usize) -> Result<(Vec<usize>, DMatrix<f64>)> {
    let n = graph.num_nodes();
    if q == 0 || q > n {
        return Err(Error::InvalidArgument(format!("q = {q} samples requested from {n} nodes")));
    }
    if seed >= n {
        return Err(Error::InvalidArgument(format!("seed {seed} out of range for {n} nodes")));
    }
    let mut samples = vec![seed];
    let mut chosen = vec![false; n];
    chosen[seed] = true;
    let mut rows = DMatrix::zeros(q, n);
    let mut nearest = vec![f64::INFINITY; n];
    for k in 0..q {
        let s = samples[k];
        let row = dijkstra(graph, s);
        check_reachable(s, &row)?;
        for (v, &d) in row.iter().enumerate() {
            rows[(k, v)] = d;
            nearest[v] = nearest[v].min(d);
        }
        if k + 1 < q {
            let next = argmax_unchosen(&nearest, &chosen);
            chosen[next] = true;
            samples.push(next);
        }
    }
    Ok((samples, rows))
}

fn argmax_unchosen(nearest: &[f64], chosen: &[bool]) -> usize {
    let mut best = usize::MAX;
    let mut best_d = f64::NEG_INFINITY;
    for (v, &d) in nearest.iter().enumerate() {
        if !chosen[v] && d > best_d {
            best = v;
            best_d = d;
        }
    }
    best
}

/// Farthest point sampling with the `q x q` sample distance table.
pub fn farthest_point_sampling(graph: &WeightedGraph, q: usize, seed: usize) -> Result<SamplingSet> {
    let (indices, rows) = farthest_point_sampling_rows(graph, q, seed)?;
    Ok(SamplingSet {
        distances: symmetrized(subsample_columns(&rows, &indices)),
        indices,
    })
}

/// Farthest point sampling indices only. Each sweep is pruned to the region
/// where the new sample is nearer than all earlier ones, so the total cost
/// stays close to a few full sweeps even for large `q`.
pub fn farthest_point_indices(graph: &WeightedGraph, q: usize, seed: usize) -> Result<Vec<usize>> {
    let n = graph.num_nodes();
    if q == 0 || q > n {
        return Err(Error::InvalidArgument(format!("q = {q} samples requested from {n} nodes")));
    }
    if seed >= n {
        return Err(Error::InvalidArgument(format!("seed {seed} out of range for {n} nodes")));
    }
    let mut nearest = vec![f64::INFINITY; n];
    let mut chosen = vec![false; n];
    let mut samples = Vec::with_capacity(q);
    let mut next = seed;
    for k in 0..q {
        chosen[next] = true;
        samples.push(next);
        dijkstra_bounded(graph, next, &mut nearest);
        if k == 0 {
            check_reachable(seed, &nearest)?;
        }
        if k + 1 < q {
            next = argmax_unchosen(&nearest, &chosen);
        }
    }
    Ok(samples)
}

/// Farthest point sampling driven by a precomputed full distance table.
pub fn farthest_point_sampling_table(d: &DMatrix<f64>, q: usize, seed: usize) -> Result<SamplingSet> {
    let n = d.nrows();
    if q == 0 || q > n {
        return Err(Error::InvalidArgument(format!("q = {q} samples requested from {n} points")));
    }
    if seed >= n {
        return Err(Error::InvalidArgument(format!("seed {seed} out of range for {n} points")));
    }
    let mut nearest = vec![f64::INFINITY; n];
    let mut chosen = vec![false; n];
    let mut indices = Vec::with_capacity(q);
    let mut next = seed;
    for k in 0..q {
        chosen[next] = true;
        indices.push(next);
        for (v, nv) in nearest.iter_mut().enumerate() {
            *nv = nv.min(d[(next, v)]);
        }
        if k + 1 < q {
            next = argmax_unchosen(&nearest, &chosen);
        }
    }
    Ok(SamplingSet {
        distances: subsample_rows(d, &indices),
        indices,
    })
}

/// `D[indices, indices]`.
pub fn subsample_rows(d: &DMatrix<f64>, indices: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(indices.len(), indices.len(), |a, b| d[(indices[a], indices[b])])
}

fn subsample_columns(rows: &DMatrix<f64>, indices: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.nrows(), indices.len(), |a, b| rows[(a, indices[b])])
}
