//! Per-edge node grids with one shared unknown per vertex.
//!
//! Edge `j` with `N_j` cells carries nodes `k = 0..=N_j` at `s_k = k / N_j`.
//! Node `0` is the tail vertex and node `N_j` the head vertex; both map to the
//! vertex's single global index, so continuity at vertices holds by
//! construction. Interior nodes own a control volume `d_j Δx_j`; a vertex owns
//! `Σ d_j Δx_j / 2` over its incident edges.
//!
//! Global layout: vertices first (`0..V`), then the interior nodes of each
//! edge in edge order.

use crate::error::DiscretizationError;
use crate::graph::MetricGraph;

/// A face between two consecutive nodes of one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub edge: usize,
    /// Global index of node `k` (toward the tail).
    pub left: usize,
    /// Global index of node `k + 1` (toward the head).
    pub right: usize,
    /// `d_j / Δx_j`.
    pub coeff: f64,
}

#[derive(Debug, Clone)]
pub struct GraphGrid {
    graph: MetricGraph,
    cells: Vec<usize>,
    dx: Vec<f64>,
    edge_offset: Vec<usize>,
    measure: Vec<f64>,
    faces: Vec<Face>,
}

impl GraphGrid {
    pub fn new(graph: &MetricGraph, cells: &[usize]) -> Result<GraphGrid, DiscretizationError> {
        if cells.len() != graph.edge_count() {
            return Err(DiscretizationError::CellCountMismatch {
                expected: graph.edge_count(),
                got: cells.len(),
            });
        }
        if let Some((edge, &c)) = cells.iter().enumerate().find(|(_, &c)| c < 3) {
            return Err(DiscretizationError::TooFewCells { edge, cells: c });
        }

        let nv = graph.vertex_count();
        let mut edge_offset = Vec::with_capacity(cells.len());
        let mut next = nv;
        for &c in cells {
            edge_offset.push(next);
            next += c - 1;
        }
        let n_tot = next;

        let dx: Vec<f64> = graph
            .edges()
            .iter()
            .zip(cells)
            .map(|(e, &c)| e.length / c as f64)
            .collect();

        let mut measure = vec![0.0; n_tot];
        let mut faces = Vec::new();
        for (j, e) in graph.edges().iter().enumerate() {
            let h = dx[j];
            let vol = e.weight * h;
            measure[e.tail] += 0.5 * vol;
            measure[e.head] += 0.5 * vol;
            for k in 1..cells[j] {
                measure[edge_offset[j] + k - 1] = vol;
            }
        }

        let mut grid = GraphGrid {
            graph: graph.clone(),
            cells: cells.to_vec(),
            dx,
            edge_offset,
            measure,
            faces: Vec::new(),
        };
        for (j, e) in graph.edges().iter().enumerate() {
            let coeff = e.weight / grid.dx[j];
            for k in 0..cells[j] {
                faces.push(Face {
                    edge: j,
                    left: grid.node_index(j, k),
                    right: grid.node_index(j, k + 1),
                    coeff,
                });
            }
        }
        grid.faces = faces;
        Ok(grid)
    }

    /// Same cell count on every edge.
    pub fn uniform(graph: &MetricGraph, cells: usize) -> Result<GraphGrid, DiscretizationError> {
        GraphGrid::new(graph, &vec![cells; graph.edge_count()])
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn cells(&self, edge: usize) -> usize {
        self.cells[edge]
    }

    pub fn cell_counts(&self) -> &[usize] {
        &self.cells
    }

    pub fn dx(&self, edge: usize) -> f64 {
        self.dx[edge]
    }

    /// Measure weight (control-volume size) of each global unknown.
    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn total_measure(&self) -> f64 {
        self.measure.iter().sum()
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    /// Faces of one edge, ordered from tail to head.
    pub fn edge_faces(&self, edge: usize) -> &[Face] {
        let start: usize = self.cells[..edge].iter().sum();
        &self.faces[start..start + self.cells[edge]]
    }

    /// Global index of node `k` (`0..=N_j`) on edge `edge`.
    pub fn node_index(&self, edge: usize, k: usize) -> usize {
        let e = self.graph.edge(edge);
        let n = self.cells[edge];
        debug_assert!(k <= n);
        if k == 0 {
            e.tail
        } else if k == n {
            e.head
        } else {
            self.edge_offset[edge] + k - 1
        }
    }

    /// Values of `u` along one edge, nodes `0..=N_j`.
    pub fn edge_values(&self, u: &[f64], edge: usize) -> Vec<f64> {
        (0..=self.cells[edge]).map(|k| u[self.node_index(edge, k)]).collect()
    }

    /// Edge-local coordinate `s ∈ [0, 1]` of node `k`.
    pub fn local_coord(&self, edge: usize, k: usize) -> f64 {
        k as f64 / self.cells[edge] as f64
    }

    /// Start of each edge in a global arc-length coordinate laid out edge by
    /// edge in edge order.
    pub fn arc_offsets(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.graph
            .edges()
            .iter()
            .map(|e| {
                let start = acc;
                acc += e.length;
                start
            })
            .collect()
    }

    /// Measure-weighted mean of `u` over the interior nodes and both endpoint
    /// half-cells of one edge.
    pub fn edge_mean(&self, u: &[f64], edge: usize) -> f64 {
        let vals = self.edge_values(u, edge);
        let n = vals.len() - 1;
        let inner: f64 = vals[1..n].iter().sum();
        (inner + 0.5 * (vals[0] + vals[n])) / n as f64
    }

    pub fn check_len(&self, u: &[f64]) -> Result<(), DiscretizationError> {
        if u.len() != self.len() {
            return Err(DiscretizationError::StateLength {
                expected: self.len(),
                got: u.len(),
            });
        }
        Ok(())
    }
}
