//! k-NN graphs over feature rows and the self-loop normalized adjacency
//! `D̃^{-1/2}(A + I)D̃^{-1/2}` consumed by the GCN layers.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `exp(−‖z_i − z_j‖² / t)`.
pub fn heat_kernel_similarity(z_i: &[f64], z_j: &[f64], t_heat: f64) -> Result<f64> {
    if !(t_heat > 0.0) {
        return Err(Error::Config(format!("t_heat must be positive, got {t_heat}")));
    }
    if z_i.len() != z_j.len() {
        return Err(Error::dim("heat_kernel_similarity", &[z_i.len()], &[z_j.len()]));
    }
    Ok((-squared_distance(z_i, z_j) / t_heat).exp())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Undirected k-NN graph with a dense 0/1 adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    num_nodes: usize,
    k: usize,
    adjacency: Vec<bool>,
    similarity: Option<Tensor>,
}

impl KnnGraph {
    /// Graph from an explicit undirected edge list; `k` is recorded as given.
    pub fn from_edges(num_nodes: usize, k: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![false; num_nodes * num_nodes];
        for &(i, j) in edges {
            if i >= num_nodes || j >= num_nodes || i == j {
                return Err(Error::Contract(format!("invalid edge ({i}, {j}) for {num_nodes} nodes")));
            }
            adjacency[i * num_nodes + j] = true;
            adjacency[j * num_nodes + i] = true;
        }
        Ok(Self {
            num_nodes,
            k,
            adjacency,
            similarity: None,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.num_nodes + j]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i * self.num_nodes..(i + 1) * self.num_nodes]
            .iter()
            .filter(|&&e| e)
            .count()
    }

    /// Heat-kernel similarities, when retained at construction.
    pub fn similarity(&self) -> Option<&Tensor> {
        self.similarity.as_ref()
    }

    /// Adjacency as a dense `0/1` matrix.
    pub fn adjacency(&self) -> Tensor {
        let data = self.adjacency.iter().map(|&e| if e { 1.0 } else { 0.0 }).collect();
        Tensor::matrix(self.num_nodes, self.num_nodes, data).expect("square")
    }

    /// Undirected edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.num_nodes;
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.has_edge(i, j))
            .collect()
    }

    /// One `"i j"` line per undirected edge.
    pub fn edge_list_text(&self) -> String {
        let mut out = String::new();
        for (i, j) in self.edges() {
            writeln!(out, "{i} {j}").expect("write to String");
        }
        out
    }
}

/// Directed k-nearest-neighbour choice of each row, nearest first.
///
/// Ranks by squared Euclidean distance, which orders candidates exactly as
/// descending heat-kernel similarity without underflow. Ties go to the
/// lower node index.
pub fn nearest_neighbors(z: &Tensor, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = z.rows();
    if k == 0 || k >= n {
        return Err(Error::Config(format!("k must satisfy 1 <= k < N = {n}, got {k}")));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut cand: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (squared_distance(z.row(i), z.row(j)), j))
            .collect();
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.push(cand[..k].iter().map(|&(_, j)| j).collect());
    }
    Ok(out)
}

/// k-NN graph over the rows of `z`, symmetrized by logical OR. The heat-kernel
/// similarity matrix is retained.
pub fn build_knn_graph(z: &Tensor, k: usize, t_heat: f64) -> Result<KnnGraph> {
    if !(t_heat > 0.0) {
        return Err(Error::Config(format!("t_heat must be positive, got {t_heat}")));
    }
    let n = z.rows();
    let neighbors = nearest_neighbors(z, k)?;
    let mut adjacency = vec![false; n * n];
    for (i, row) in neighbors.iter().enumerate() {
        for &j in row {
            adjacency[i * n + j] = true;
            adjacency[j * n + i] = true;
        }
    }
    let mut sim = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            sim[i * n + j] = (-squared_distance(z.row(i), z.row(j)) / t_heat).exp();
        }
    }
    Ok(KnnGraph {
        num_nodes: n,
        k,
        adjacency,
        similarity: Some(Tensor::matrix(n, n, sim)?),
    })
}

/// Symmetric propagation operator `D̃^{-1/2}(A + I)D̃^{-1/2}` of one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: Tensor,
}

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.rows()
    }

    /// Wraps a precomputed operator; used for hand-built test graphs.
    pub fn from_matrix(matrix: Tensor) -> Result<Self> {
        if matrix.shape().len() != 2 || matrix.shape()[0] != matrix.shape()[1] {
            return Err(Error::dim("NormalizedAdjacency", matrix.shape(), &[]));
        }
        Ok(Self { matrix })
    }
}

pub fn normalize_adjacency(graph: &KnnGraph) -> NormalizedAdjacency {
    let n = graph.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / ((graph.degree(i) + 1) as f64).sqrt())
        .collect();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j || graph.has_edge(i, j) {
                m[i * n + j] = inv_sqrt[i] * inv_sqrt[j];
            }
        }
    }
    NormalizedAdjacency {
        matrix: Tensor::matrix(n, n, m).expect("square"),
    }
}
