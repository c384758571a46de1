//! Metric graphs: vertices, directed edges with lengths, and the boundary set.
//!
//! Edge direction is a bookkeeping convention. An edge `(tail, head)` is
//! parameterized by `s ∈ [0, 1]` with `s = 0` at the tail and `s = 1` at the
//! head; the physical length `ℓ` scales the coordinate. Boundary vertices are
//! declared explicitly and are never inferred from degree.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::GraphError;

fn default_weight() -> f64 {
    1.0
}

/// One directed edge of a graph description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub tail: String,
    pub head: String,
    pub length: f64,
    /// Cross-section weight `d_j`.
    #[serde(default = "default_weight")]
    pub weight: f64,
}

impl EdgeSpec {
    pub fn new(tail: &str, head: &str, length: f64) -> Self {
        EdgeSpec {
            tail: tail.to_string(),
            head: head.to_string(),
            length,
            weight: 1.0,
        }
    }
}

/// Unvalidated graph description, as read from a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeSpec>,
    #[serde(default)]
    pub boundary: Vec<String>,
}

/// Names of the topologies that ship with the crate.
pub const BUILTIN_NAMES: [&str; 3] = ["star3", "cycle4", "paper-example-8"];

impl GraphSpec {
    /// Resolves a built-in topology by name. All built-ins use unit edges.
    pub fn builtin(name: &str) -> Option<GraphSpec> {
        let names = |ids: &[&str]| ids.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let spec = match name {
            "star3" => GraphSpec {
                vertices: names(&["a0", "a1", "a2", "a3"]),
                edges: vec![
                    EdgeSpec::new("a1", "a0", 1.0),
                    EdgeSpec::new("a2", "a0", 1.0),
                    EdgeSpec::new("a3", "a0", 1.0),
                ],
                boundary: names(&["a1", "a2", "a3"]),
            },
            "cycle4" => GraphSpec {
                vertices: names(&["a1", "a2", "a3", "a4"]),
                edges: vec![
                    EdgeSpec::new("a1", "a2", 1.0),
                    EdgeSpec::new("a2", "a3", 1.0),
                    EdgeSpec::new("a3", "a4", 1.0),
                    EdgeSpec::new("a4", "a1", 1.0),
                ],
                boundary: Vec::new(),
            },
            "paper-example-8" => GraphSpec {
                vertices: names(&["a1", "a2", "a3", "a4", "a5", "a6", "a7", "a8"]),
                edges: vec![
                    EdgeSpec::new("a1", "a5", 1.0),
                    EdgeSpec::new("a2", "a6", 1.0),
                    EdgeSpec::new("a3", "a7", 1.0),
                    EdgeSpec::new("a4", "a8", 1.0),
                    EdgeSpec::new("a5", "a6", 1.0),
                    EdgeSpec::new("a6", "a8", 1.0),
                    EdgeSpec::new("a7", "a8", 1.0),
                    EdgeSpec::new("a5", "a7", 1.0),
                ],
                boundary: names(&["a1", "a2", "a3", "a4"]),
            },
            _ => return None,
        };
        Some(spec)
    }
}

/// A validated edge with resolved vertex indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub length: f64,
    pub weight: f64,
}

/// A validated metric graph. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    vertices: Vec<String>,
    edges: Vec<Edge>,
    is_boundary: Vec<bool>,
}

/// Per-vertex incoming (`j_plus`) and outgoing (`j_minus`) edge index sets.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceSets {
    pub j_plus: Vec<Vec<usize>>,
    pub j_minus: Vec<Vec<usize>>,
}

impl IncidenceSets {
    pub fn degree(&self, vertex: usize) -> usize {
        self.j_plus[vertex].len() + self.j_minus[vertex].len()
    }

    /// Reconstructs `(tail, head)` per edge from the incidence sets.
    pub fn edge_endpoints(&self, edge_count: usize) -> Vec<(usize, usize)> {
        let mut tails = vec![usize::MAX; edge_count];
        let mut heads = vec![usize::MAX; edge_count];
        for (v, set) in self.j_minus.iter().enumerate() {
            for &e in set {
                tails[e] = v;
            }
        }
        for (v, set) in self.j_plus.iter().enumerate() {
            for &e in set {
                heads[e] = v;
            }
        }
        tails.into_iter().zip(heads).collect()
    }
}

impl MetricGraph {
    /// Validates a description and builds the graph, returning the first
    /// failed check as an error.
    pub fn build(spec: &GraphSpec) -> Result<MetricGraph, GraphError> {
        let outcome = run_checks(spec);
        if let Some(err) = outcome.errors.into_iter().next() {
            return Err(err);
        }
        let index = vertex_index(&spec.vertices);
        let edges = spec
            .edges
            .iter()
            .map(|e| Edge {
                tail: index[e.tail.as_str()],
                head: index[e.head.as_str()],
                length: e.length,
                weight: e.weight,
            })
            .collect();
        let boundary: HashSet<&str> = spec.boundary.iter().map(String::as_str).collect();
        let is_boundary = spec
            .vertices
            .iter()
            .map(|v| boundary.contains(v.as_str()))
            .collect();
        Ok(MetricGraph {
            vertices: spec.vertices.clone(),
            edges,
            is_boundary,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_name(&self, v: usize) -> &str {
        &self.vertices[v]
    }

    pub fn vertex_id(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, j: usize) -> &Edge {
        &self.edges[j]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.is_boundary[v]
    }

    pub fn boundary_set(&self) -> Vec<usize> {
        (0..self.vertex_count()).filter(|&v| self.is_boundary[v]).collect()
    }

    pub fn interior_set(&self) -> Vec<usize> {
        (0..self.vertex_count()).filter(|&v| !self.is_boundary[v]).collect()
    }

    /// Σ_j d_j ℓ_j.
    pub fn total_measure(&self) -> f64 {
        self.edges.iter().map(|e| e.weight * e.length).sum()
    }

    pub fn incidence(&self) -> IncidenceSets {
        let mut j_plus = vec![Vec::new(); self.vertex_count()];
        let mut j_minus = vec![Vec::new(); self.vertex_count()];
        for (j, e) in self.edges.iter().enumerate() {
            j_minus[e.tail].push(j);
            j_plus[e.head].push(j);
        }
        IncidenceSets { j_plus, j_minus }
    }

    /// Converts back to a description (inverse of [`MetricGraph::build`]).
    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    tail: self.vertices[e.tail].clone(),
                    head: self.vertices[e.head].clone(),
                    length: e.length,
                    weight: e.weight,
                })
                .collect(),
            boundary: self.boundary_set().iter().map(|&v| self.vertices[v].clone()).collect(),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate(&self.to_spec())
    }
}

/// Result of one validation check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub messages: Vec<String>,
}

/// Per-check outcome of [`validate`]; never an error by itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn has_empty_boundary_warning(&self) -> bool {
        self.warnings.iter().any(|w| w.starts_with(EMPTY_BOUNDARY_WARNING))
    }
}

pub const EMPTY_BOUNDARY_WARNING: &str = "empty boundary: outside the hypotheses of the existence theory";

struct CheckOutcome {
    errors: Vec<GraphError>,
    report: ValidationReport,
}

fn vertex_index(vertices: &[String]) -> HashMap<&str, usize> {
    vertices.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect()
}

/// Runs every structural check on a candidate graph and reports each one.
pub fn validate(spec: &GraphSpec) -> ValidationReport {
    run_checks(spec).report
}

fn run_checks(spec: &GraphSpec) -> CheckOutcome {
    let mut errors = Vec::new();
    let mut checks = Vec::new();
    let mut warnings = Vec::new();

    let mut record = |name: &'static str, errs: Vec<GraphError>, errors: &mut Vec<GraphError>| {
        checks.push(CheckResult {
            name,
            passed: errs.is_empty(),
            messages: errs.iter().map(|e| e.to_string()).collect(),
        });
        errors.extend(errs);
    };

    // vertices
    let mut errs = Vec::new();
    if spec.vertices.is_empty() {
        errs.push(GraphError::Empty);
    }
    let mut seen = HashSet::new();
    for v in &spec.vertices {
        if !seen.insert(v.as_str()) {
            errs.push(GraphError::DuplicateVertex(v.clone()));
        }
    }
    if spec.edges.is_empty() {
        errs.push(GraphError::NoEdges);
    }
    record("vertices", errs, &mut errors);

    let index = vertex_index(&spec.vertices);

    // endpoints
    let mut errs = Vec::new();
    for (j, e) in spec.edges.iter().enumerate() {
        for v in [&e.tail, &e.head] {
            if !index.contains_key(v.as_str()) {
                errs.push(GraphError::UnknownVertex {
                    edge: j,
                    vertex: v.clone(),
                });
            }
        }
    }
    let endpoints_ok = errs.is_empty();
    record("endpoints", errs, &mut errors);

    // boundary / interior partition
    let errs: Vec<_> = spec
        .boundary
        .iter()
        .filter(|b| !index.contains_key(b.as_str()))
        .map(|b| GraphError::UnknownBoundaryVertex(b.clone()))
        .collect();
    record("boundary", errs, &mut errors);

    // simplicity
    let mut errs = Vec::new();
    let mut pairs: HashMap<(&str, &str), usize> = HashMap::new();
    for (j, e) in spec.edges.iter().enumerate() {
        if e.tail == e.head {
            errs.push(GraphError::SelfLoop {
                edge: j,
                vertex: e.tail.clone(),
            });
            continue;
        }
        let key = if e.tail < e.head {
            (e.tail.as_str(), e.head.as_str())
        } else {
            (e.head.as_str(), e.tail.as_str())
        };
        if let Some(&first) = pairs.get(&key) {
            errs.push(GraphError::DuplicateEdge { first, second: j });
        } else {
            pairs.insert(key, j);
        }
    }
    record("simple", errs, &mut errors);

    // lengths and weights
    let errs = spec
        .edges
        .iter()
        .enumerate()
        .filter(|(_, e)| !(e.length > 0.0 && e.length.is_finite()))
        .map(|(j, e)| GraphError::NonPositiveLength {
            edge: j,
            length: e.length,
        })
        .collect();
    record("lengths", errs, &mut errors);
    let errs = spec
        .edges
        .iter()
        .enumerate()
        .filter(|(_, e)| !(e.weight > 0.0 && e.weight.is_finite()))
        .map(|(j, e)| GraphError::NonPositiveWeight {
            edge: j,
            weight: e.weight,
        })
        .collect();
    record("weights", errs, &mut errors);

    // connectivity
    let mut errs = Vec::new();
    if endpoints_ok && !spec.vertices.is_empty() {
        let n = spec.vertices.len();
        let mut adj = vec![Vec::new(); n];
        for e in &spec.edges {
            let (a, b) = (index[e.tail.as_str()], index[e.head.as_str()]);
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut component = vec![usize::MAX; n];
        let mut components = 0;
        for start in 0..n {
            if component[start] != usize::MAX {
                continue;
            }
            let mut queue = VecDeque::from([start]);
            component[start] = components;
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if component[w] == usize::MAX {
                        component[w] = components;
                        queue.push_back(w);
                    }
                }
            }
            components += 1;
        }
        if components > 1 {
            errs.push(GraphError::Disconnected { components });
        }

        let boundary: HashSet<&str> = spec.boundary.iter().map(String::as_str).collect();
        for (v, name) in spec.vertices.iter().enumerate() {
            if adj[v].len() == 1 && !boundary.contains(name.as_str()) {
                warnings.push(format!(
                    "vertex `{name}` has degree 1 but is declared interior"
                ));
            }
        }
    }
    record("connected", errs, &mut errors);

    if spec.boundary.is_empty() {
        warnings.insert(0, EMPTY_BOUNDARY_WARNING.to_string());
    }

    CheckOutcome {
        errors,
        report: ValidationReport { checks, warnings },
    }
}
