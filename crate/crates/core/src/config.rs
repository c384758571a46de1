//! Run configuration files (TOML).
//!
//! ```toml
//! seed = 7                        # optional, default 0
//!
//! [graph]
//! builtin = "star3"               # or: vertices, edges, boundary
//!
//! [cells]
//! default = 128
//! e2 = 64                         # per-edge override, edges are e1..eN
//!
//! [solver]                        # any SolverConfig field, all optional
//! n = 1.0
//! snapshot = { steps = 100 }      # or { time = 0.05 }
//!
//! [initial]
//! default = { kind = "droplet", center = 1.0, width = 0.3, height = 1.0, base = 0.05 }
//! e3 = { kind = "constant", value = 0.05 }
//!
//! [output]
//! dir = "out/star3"
//! ```
//!
//! An explicit graph replaces `builtin` with
//! `vertices = [...]`, `boundary = [...]` and `[[graph.edges]]` tables with
//! `tail`, `head`, `length` and optional `weight`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ConfigError;
use crate::graph::{self, EdgeSpec, GraphSpec, MetricGraph, BUILTIN_NAMES};
use crate::grid::GraphGrid;
use crate::profile::{self, InitialProfile};
use crate::stepper::{FilmState, SolverConfig};

/// Where the graph of a run comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    Builtin(String),
    Explicit(GraphSpec),
}

/// A fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub graph: GraphSource,
    pub default_cells: usize,
    /// Per-edge cell overrides keyed by 0-based edge index.
    pub edge_cells: BTreeMap<usize, usize>,
    pub solver: SolverConfig,
    pub default_initial: Option<InitialProfile>,
    /// Per-edge profiles keyed by 0-based edge index.
    pub edge_initial: BTreeMap<usize, InitialProfile>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

pub const DEFAULT_CELLS: usize = 64;
pub const DEFAULT_OUTPUT_DIR: &str = "out";

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    graph: RawGraph,
    #[serde(default)]
    cells: BTreeMap<String, usize>,
    #[serde(default)]
    solver: SolverConfig,
    #[serde(default)]
    initial: BTreeMap<String, InitialProfile>,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vertices: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    boundary: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<EdgeSpec>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dir: Option<PathBuf>,
}

/// Parses and validates a configuration text.
pub fn parse_config(text: &str) -> Result<RunSpec, ConfigError> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    let graph = match (raw.graph.builtin, raw.graph.vertices, raw.graph.edges) {
        (Some(name), None, None) => {
            if raw.graph.boundary.is_some() {
                return Err(ConfigError::semantic(
                    "graph.boundary",
                    "a built-in topology fixes its own boundary",
                ));
            }
            if GraphSpec::builtin(&name).is_none() {
                return Err(ConfigError::semantic(
                    "graph.builtin",
                    format!("unknown topology `{name}` (known: {})", BUILTIN_NAMES.join(", ")),
                ));
            }
            GraphSource::Builtin(name)
        }
        (None, Some(vertices), Some(edges)) => GraphSource::Explicit(GraphSpec {
            vertices,
            edges,
            boundary: raw.graph.boundary.unwrap_or_default(),
        }),
        (Some(_), _, _) => {
            return Err(ConfigError::semantic(
                "graph",
                "give either `builtin` or an explicit `vertices`/`edges` description, not both",
            ))
        }
        (None, _, _) => {
            return Err(ConfigError::semantic(
                "graph",
                "missing `builtin` or explicit `vertices` and `edges`",
            ))
        }
    };
    let spec_graph = source_spec(&graph);
    let edge_count = spec_graph.edges.len();

    let mut default_cells = DEFAULT_CELLS;
    let mut edge_cells = BTreeMap::new();
    for (key, value) in raw.cells {
        match edge_key(&key, edge_count) {
            Some(None) => default_cells = value,
            Some(Some(j)) => {
                edge_cells.insert(j, value);
            }
            None => return Err(unknown_edge_key("cells", &key, edge_count)),
        }
    }

    let mut default_initial = None;
    let mut edge_initial = BTreeMap::new();
    for (key, value) in raw.initial {
        match edge_key(&key, edge_count) {
            Some(None) => default_initial = Some(value),
            Some(Some(j)) => {
                edge_initial.insert(j, value);
            }
            None => return Err(unknown_edge_key("initial", &key, edge_count)),
        }
    }

    let spec = RunSpec {
        graph,
        default_cells,
        edge_cells,
        solver: raw.solver,
        default_initial,
        edge_initial,
        output_dir: raw.output.dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        seed: raw.seed.unwrap_or(0),
    };
    spec.check()?;
    Ok(spec)
}

fn parse_error(text: &str, e: &toml::de::Error) -> ConfigError {
    let message = e.message().to_string();
    match e.span() {
        Some(span) => {
            let (line, col) = line_col(text, span.start);
            ConfigError::Parse(format!("line {line}, column {col}: {message}"))
        }
        None => ConfigError::Parse(message),
    }
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// `Some(None)` for `default`, `Some(Some(j))` for `e{j+1}`.
fn edge_key(key: &str, edge_count: usize) -> Option<Option<usize>> {
    if key == "default" {
        return Some(None);
    }
    let idx: usize = key.strip_prefix('e')?.parse().ok()?;
    (1..=edge_count).contains(&idx).then_some(Some(idx - 1))
}

fn unknown_edge_key(section: &str, key: &str, edge_count: usize) -> ConfigError {
    ConfigError::semantic(
        format!("{section}.{key}"),
        format!("expected `default` or an edge name e1..e{edge_count}"),
    )
}

/// Config label of edge `j` (0-based).
pub fn edge_label(j: usize) -> String {
    format!("e{}", j + 1)
}

fn source_spec(source: &GraphSource) -> GraphSpec {
    match source {
        GraphSource::Builtin(name) => GraphSpec::builtin(name).expect("checked built-in name"),
        GraphSource::Explicit(spec) => spec.clone(),
    }
}

/// Everything needed to start a run.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub grid: GraphGrid,
    /// Initial state with the regularizing lift applied.
    pub state0: FilmState,
    pub warnings: Vec<String>,
}

impl RunSpec {
    pub fn graph_spec(&self) -> GraphSpec {
        source_spec(&self.graph)
    }

    pub fn build_graph(&self) -> Result<MetricGraph, ConfigError> {
        MetricGraph::build(&self.graph_spec()).map_err(|e| ConfigError::semantic("graph", e.to_string()))
    }

    /// Validation warnings of the graph (e.g. an empty boundary).
    pub fn warnings(&self) -> Vec<String> {
        graph::validate(&self.graph_spec()).warnings
    }

    pub fn cell_counts(&self, edge_count: usize) -> Vec<usize> {
        (0..edge_count)
            .map(|j| self.edge_cells.get(&j).copied().unwrap_or(self.default_cells))
            .collect()
    }

    pub fn profiles(&self, edge_count: usize) -> Result<Vec<InitialProfile>, ConfigError> {
        (0..edge_count)
            .map(|j| {
                self.edge_initial
                    .get(&j)
                    .or(self.default_initial.as_ref())
                    .cloned()
                    .ok_or_else(|| {
                        ConfigError::semantic(
                            format!("initial.{}", edge_label(j)),
                            format!("edge {} has no initial condition", edge_label(j)),
                        )
                    })
            })
            .collect()
    }

    /// Builds graph, grid and the lifted initial state.
    pub fn setup(&self) -> Result<RunSetup, ConfigError> {
        let graph = self.build_graph()?;
        let cells = self.cell_counts(graph.edge_count());
        let grid = GraphGrid::new(&graph, &cells).map_err(|e| ConfigError::semantic("cells", e.to_string()))?;
        let profiles = self.profiles(graph.edge_count())?;
        for (j, p) in profiles.iter().enumerate() {
            p.check(j).map_err(|e| {
                ConfigError::semantic(format!("initial.{}", edge_label(j)), e.to_string())
            })?;
        }
        let u0 = profile::assemble_initial(&grid, &profiles, self.seed)
            .map_err(|e| ConfigError::semantic("initial", e.to_string()))?;
        Ok(RunSetup {
            state0: FilmState::lifted(u0, &self.solver),
            warnings: self.warnings(),
            grid,
        })
    }

    fn check(&self) -> Result<(), ConfigError> {
        self.solver
            .validate()
            .map_err(|e| ConfigError::semantic("solver", e.to_string()))?;
        self.setup()?;
        Ok(())
    }

    /// Canonical TOML text; `parse_config(spec.to_toml())` returns `spec`.
    pub fn to_toml(&self) -> String {
        let graph = match &self.graph {
            GraphSource::Builtin(name) => RawGraph {
                builtin: Some(name.clone()),
                ..RawGraph::default()
            },
            GraphSource::Explicit(spec) => RawGraph {
                builtin: None,
                vertices: Some(spec.vertices.clone()),
                boundary: Some(spec.boundary.clone()),
                edges: Some(spec.edges.clone()),
            },
        };
        let mut cells = BTreeMap::new();
        cells.insert("default".to_string(), self.default_cells);
        for (&j, &c) in &self.edge_cells {
            cells.insert(edge_label(j), c);
        }
        let mut initial = BTreeMap::new();
        if let Some(p) = &self.default_initial {
            initial.insert("default".to_string(), p.clone());
        }
        for (&j, p) in &self.edge_initial {
            initial.insert(edge_label(j), p.clone());
        }
        let raw = RawSpec {
            seed: Some(self.seed),
            graph,
            cells,
            solver: self.solver.clone(),
            initial,
            output: RawOutput {
                dir: Some(self.output_dir.clone()),
            },
        };
        toml::to_string(&raw).expect("run spec serializes to TOML")
    }

    /// SHA-256 of the canonical TOML text, hex encoded.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STAR: &str = r#"
[graph]
builtin = "star3"

[initial]
default = { kind = "droplet", center = 1.0, width = 0.3, height = 1.0, base = 0.05 }
"#;

    #[test]
    fn minimal_star() {
        let spec = parse_config(STAR).unwrap();
        let g = spec.build_graph().unwrap();
        assert_eq!(g.edge_count(), 3);
        assert!(g.edges().iter().all(|e| e.length == 1.0));
        let names: Vec<&str> = g.boundary_set().iter().map(|&v| g.vertex_name(v)).collect();
        assert_eq!(names, ["a1", "a2", "a3"]);
        assert!(spec.warnings().is_empty());
        assert_eq!(spec.solver, SolverConfig::default());
    }

    #[test]
    fn cycle_has_warning() {
        let spec = parse_config(
            "[graph]\nbuiltin = \"cycle4\"\n[initial]\ndefault = { kind = \"constant\", value = 0.2 }\n",
        )
        .unwrap();
        assert_eq!(spec.build_graph().unwrap().edge_count(), 4);
        assert!(spec.build_graph().unwrap().boundary_set().is_empty());
        assert!(spec.warnings().iter().any(|w| w.starts_with("empty boundary")));
    }

    #[test]
    fn missing_initial_names_edge() {
        let text = r#"
[graph]
builtin = "star3"
[initial]
e1 = { kind = "constant", value = 0.2 }
e3 = { kind = "constant", value = 0.2 }
"#;
        let err = parse_config(text).unwrap_err();
        match err {
            ConfigError::Semantic { path, message } => {
                assert_eq!(path, "initial.e2");
                assert!(message.contains("e2"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_errors() {
        let err = parse_config(&format!("{STAR}\n[solver]\nstep_size = 0.1\n")).unwrap_err();
        match err {
            ConfigError::Parse(msg) => assert!(msg.contains("line 9, column 1"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let err = parse_config(&format!("{STAR}\n[cells]\ne9 = 10\n")).unwrap_err();
        assert!(matches!(err, ConfigError::Semantic { ref path, .. } if path == "cells.e9"));
        assert!(parse_config("[graph]\nbuiltin = \"star4\"\n").is_err());
        assert!(parse_config("[graph]\nbuiltin = \"star3\"\nextra = 1\n").is_err());
    }

    #[test]
    fn bad_boundary_set_is_semantic() {
        let text = r#"
[graph]
vertices = ["a", "b"]
boundary = ["c"]
[[graph.edges]]
tail = "a"
head = "b"
length = 1.0
[initial]
default = { kind = "constant", value = 0.2 }
"#;
        let err = parse_config(text).unwrap_err();
        assert!(matches!(err, ConfigError::Semantic { ref path, .. } if path == "graph"));
    }

    #[test]
    fn round_trip() {
        let text = r#"
seed = 11
[graph]
vertices = ["a", "b", "c"]
boundary = ["a", "c"]
[[graph.edges]]
tail = "a"
head = "b"
length = 1.5
weight = 2.0
[[graph.edges]]
tail = "b"
head = "c"
length = 0.5
[cells]
default = 12
e2 = 7
[solver]
n = 2.0
eps = 1e-4
snapshot = { time = 0.25 }
[initial]
default = { kind = "random", base = 0.1, amplitude = 0.3 }
e1 = { kind = "linear", a = 0.1, b = 0.1 }
[output]
dir = "out/x"
"#;
        let spec = parse_config(text).unwrap();
        let again = parse_config(&spec.to_toml()).unwrap();
        assert_eq!(spec, again);
        assert_eq!(spec.config_hash(), again.config_hash());
        assert_eq!(spec.config_hash().len(), 64);
        let star = parse_config(STAR).unwrap();
        assert_eq!(parse_config(&star.to_toml()).unwrap(), star);
        assert_ne!(star.config_hash(), spec.config_hash());
    }
}
