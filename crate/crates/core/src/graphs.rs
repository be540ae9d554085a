//! Graphs, incidence matrices and average-consensus systems.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, LinearSystem, Matrix};

/// Undirected simple graph with edges stored as `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(vertex_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        for &(i, j) in &edges {
            if i >= j || j >= vertex_count {
                return Err(Error::InvalidInput(format!(
                    "edge ({i}, {j}) must satisfy i < j < {vertex_count}"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidInput(format!("duplicate edge ({i}, {j})")));
            }
        }
        Ok(Self { vertex_count, edges })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertex_count];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn is_connected(&self) -> bool {
        if self.vertex_count == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); self.vertex_count];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.vertex_count];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.vertex_count
    }

    /// One `i j` pair per line, 0-based.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(self.edges.len() * 8);
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }
}

pub fn complete_graph(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("complete graph needs n >= 2, got {n}")));
    }
    let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    Ok(Graph { vertex_count: n, edges })
}

/// Preferential attachment grown from the complete graph on `n_initial`
/// vertices. Each new vertex joins `edges_per_step` distinct existing
/// vertices, each drawn with probability proportional to its degree.
pub fn barabasi_albert<R: Rng + ?Sized>(
    n_final: usize,
    n_initial: usize,
    edges_per_step: usize,
    rng: &mut R,
) -> Result<Graph> {
    if n_initial < 2 || n_final < n_initial || edges_per_step == 0 || edges_per_step > n_initial {
        return Err(Error::InvalidInput(format!(
            "invalid preferential attachment parameters: n_final={n_final}, n_initial={n_initial}, edges_per_step={edges_per_step}"
        )));
    }
    let mut graph = complete_graph(n_initial)?;
    // every vertex appears once per incident edge
    let mut endpoints: Vec<usize> = graph.edges.iter().flat_map(|&(i, j)| [i, j]).collect();
    let mut targets = Vec::with_capacity(edges_per_step);
    for v in n_initial..n_final {
        targets.clear();
        while targets.len() < edges_per_step {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        targets.sort_unstable();
        for &t in &targets {
            graph.edges.push((t, v));
            endpoints.push(t);
            endpoints.push(v);
        }
        graph.vertex_count = v + 1;
    }
    Ok(graph)
}

/// `|E| × |V|` matrix with `+1` at the lower and `−1` at the higher endpoint.
pub fn incidence_matrix(graph: &Graph) -> CsrMatrix {
    let triplets: Vec<(usize, usize, f64)> = graph
        .edges
        .iter()
        .enumerate()
        .flat_map(|(e, &(i, j))| [(e, i, 1.0), (e, j, -1.0)])
        .collect();
    CsrMatrix::from_triplets(graph.edge_count(), graph.vertex_count, &triplets)
        .expect("graph edges are in range")
}

/// `Q x = 0` started at `node_values`, whose solution-set projection is
/// the mean of the values on every vertex.
pub fn ac_system(graph: &Graph, node_values: &[f64]) -> Result<LinearSystem> {
    if node_values.len() != graph.vertex_count {
        return Err(Error::DimensionMismatch {
            expected: graph.vertex_count,
            got: node_values.len(),
        });
    }
    if !graph.is_connected() {
        return Err(Error::InvalidInput("average consensus needs a connected graph".into()));
    }
    let q = Matrix::from(incidence_matrix(graph));
    let rhs = vec![0.0; graph.edge_count()];
    LinearSystem::new(q, rhs)?.with_start(node_values.to_vec())
}

/// `x_i − x_j` for every edge `(i, j)`, the residual of `Q x = 0`.
pub fn edge_differences(graph: &Graph, x: &[f64]) -> Vec<f64> {
    graph.edges.iter().map(|&(i, j)| x[i] - x[j]).collect()
}
