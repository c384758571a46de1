//! CSV snapshots and diagnostics series.
//!
//! Both formats start with `# key=value` metadata lines followed by a CSV
//! header. Floats are written with 17 significant digits, which round-trips
//! every `f64` exactly.
//!
//! Snapshot columns: `edge_id,s,x,u` with one row per node `k = 0..=N_j` of
//! every edge (vertices appear once per incident edge). `edge_id` is the
//! config label `e1..eN`, `s` the edge-local coordinate and `x` the global
//! arc length with edges laid end to end in edge order.
//!
//! Diagnostics columns: `t,M,E,S,min_u,max_u,vertex_residual_max,
//! clamp_events,decay_moment`, one row for the initial state and one per
//! accepted step.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::config::edge_label;
use crate::diagnostics::DiagnosticsRecord;
use crate::error::Error;
use crate::grid::GraphGrid;
use crate::stepper::{FilmState, RunObserver};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const PARTIAL_MARKER: &str = "PARTIAL";
pub const CONFIG_COPY: &str = "config.toml";

const SNAPSHOT_COLUMNS: [&str; 4] = ["edge_id", "s", "x", "u"];
const DIAGNOSTICS_COLUMNS: [&str; 9] = [
    "t",
    "M",
    "E",
    "S",
    "min_u",
    "max_u",
    "vertex_residual_max",
    "clamp_events",
    "decay_moment",
];

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_num(field: &str, what: &str) -> Result<f64, Error> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("bad {what} value `{field}`")))
}

/// Splits `# key=value` lines from the CSV body.
fn split_meta(text: &str) -> (Vec<(String, String)>, String) {
    let mut meta = Vec::new();
    let mut body = String::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    (meta, body)
}

fn meta_value<'a>(meta: &'a [(String, String)], key: &str) -> Result<&'a str, Error> {
    meta.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Format(format!("missing `# {key}=` header line")))
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<(), Error> {
    let header = reader.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Format(format!(
            "expected columns {}, found {}",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

/// Writes one snapshot of `state`.
pub fn write_snapshot<W: Write>(
    state: &FilmState,
    grid: &GraphGrid,
    config_hash: &str,
    mut sink: W,
) -> Result<(), Error> {
    writeln!(sink, "# t={}", num(state.t))?;
    writeln!(sink, "# step={}", state.step)?;
    writeln!(sink, "# config_hash={config_hash}")?;
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(SNAPSHOT_COLUMNS)?;
    let offsets = grid.arc_offsets();
    for (j, edge) in grid.graph().edges().iter().enumerate() {
        let label = edge_label(j);
        for k in 0..=grid.cells(j) {
            let s = grid.local_coord(j, k);
            let x = offsets[j] + s * edge.length;
            let u = state.u[grid.node_index(j, k)];
            w.write_record([label.clone(), num(s), num(x), num(u)])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRow {
    /// 0-based edge index.
    pub edge: usize,
    pub s: f64,
    pub x: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub step: usize,
    pub config_hash: String,
    pub rows: Vec<SnapshotRow>,
}

impl Snapshot {
    /// Rebuilds the global state vector on `grid`.
    pub fn to_state(&self, grid: &GraphGrid) -> Result<Vec<f64>, Error> {
        let expected: usize = (0..grid.graph().edge_count()).map(|j| grid.cells(j) + 1).sum();
        if self.rows.len() != expected {
            return Err(Error::Format(format!(
                "snapshot has {} rows, grid needs {expected}",
                self.rows.len()
            )));
        }
        let mut u = vec![f64::NAN; grid.len()];
        let mut rows = self.rows.iter();
        for j in 0..grid.graph().edge_count() {
            for k in 0..=grid.cells(j) {
                let row = rows.next().expect("row count checked");
                if row.edge != j {
                    return Err(Error::Format(format!(
                        "row for {} found where {} node {k} was expected",
                        edge_label(row.edge),
                        edge_label(j)
                    )));
                }
                u[grid.node_index(j, k)] = row.u;
            }
        }
        Ok(u)
    }
}

pub fn read_snapshot<R: Read>(mut source: R) -> Result<Snapshot, Error> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let (meta, body) = split_meta(&text);
    let t = parse_num(meta_value(&meta, "t")?, "t")?;
    let step = meta_value(&meta, "step")?
        .parse()
        .map_err(|_| Error::Format("bad step header".into()))?;
    let config_hash = meta_value(&meta, "config_hash")?.to_string();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    check_header(&mut reader, &SNAPSHOT_COLUMNS)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let edge = rec[0]
            .strip_prefix('e')
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&v| v >= 1)
            .ok_or_else(|| Error::Format(format!("bad edge_id `{}`", &rec[0])))?;
        rows.push(SnapshotRow {
            edge: edge - 1,
            s: parse_num(&rec[1], "s")?,
            x: parse_num(&rec[2], "x")?,
            u: parse_num(&rec[3], "u")?,
        });
    }
    Ok(Snapshot {
        t,
        step,
        config_hash,
        rows,
    })
}

/// Metadata written above the diagnostics table.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsMeta {
    /// Mobility exponent the decay moment was evaluated with.
    pub n: f64,
    pub eps: f64,
    pub total_measure: f64,
    pub config_hash: String,
}

/// Streams diagnostics rows to a sink in step order.
pub struct DiagnosticsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> DiagnosticsWriter<W> {
    pub fn new(mut sink: W, meta: &DiagnosticsMeta) -> Result<Self, Error> {
        writeln!(sink, "# n={}", num(meta.n))?;
        writeln!(sink, "# eps={}", num(meta.eps))?;
        writeln!(sink, "# total_measure={}", num(meta.total_measure))?;
        writeln!(sink, "# config_hash={}", meta.config_hash)?;
        let mut inner = csv::Writer::from_writer(sink);
        inner.write_record(DIAGNOSTICS_COLUMNS)?;
        Ok(DiagnosticsWriter { inner })
    }

    pub fn push(&mut self, r: &DiagnosticsRecord) -> Result<(), Error> {
        self.inner.write_record([
            num(r.t),
            num(r.mass),
            num(r.energy),
            num(r.entropy),
            num(r.min_u),
            num(r.max_u),
            num(r.vertex_residual_max),
            r.clamp_events.to_string(),
            num(r.decay_moment),
        ])?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), Error> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_diagnostics<R: Read>(
    mut source: R,
) -> Result<(DiagnosticsMeta, Vec<DiagnosticsRecord>), Error> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let (meta_lines, body) = split_meta(&text);
    let meta = DiagnosticsMeta {
        n: parse_num(meta_value(&meta_lines, "n")?, "n")?,
        eps: parse_num(meta_value(&meta_lines, "eps")?, "eps")?,
        total_measure: parse_num(meta_value(&meta_lines, "total_measure")?, "total_measure")?,
        config_hash: meta_value(&meta_lines, "config_hash")?.to_string(),
    };
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    check_header(&mut reader, &DIAGNOSTICS_COLUMNS)?;
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let f = |i: usize| parse_num(&rec[i], DIAGNOSTICS_COLUMNS[i]);
        records.push(DiagnosticsRecord {
            t: f(0)?,
            mass: f(1)?,
            energy: f(2)?,
            entropy: f(3)?,
            min_u: f(4)?,
            max_u: f(5)?,
            vertex_residual_max: f(6)?,
            clamp_events: rec[7]
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad clamp_events `{}`", &rec[7])))?,
            decay_moment: f(8)?,
        });
    }
    Ok((meta, records))
}

/// File name of the snapshot taken at `step`.
pub fn snapshot_file_name(step: usize) -> String {
    format!("snapshot_{step:08}.csv")
}

/// Observer that writes snapshots and the diagnostics series into a
/// directory.
pub struct DirectoryOutput<'g> {
    dir: PathBuf,
    grid: &'g GraphGrid,
    config_hash: String,
    diagnostics: DiagnosticsWriter<BufWriter<File>>,
    pub snapshots_written: usize,
}

impl<'g> DirectoryOutput<'g> {
    /// Creates `dir` and opens the diagnostics file. A stale partial-output
    /// marker from an earlier run is removed.
    pub fn create(dir: &Path, grid: &'g GraphGrid, meta: &DiagnosticsMeta) -> Result<Self, Error> {
        fs::create_dir_all(dir)?;
        let marker = dir.join(PARTIAL_MARKER);
        if marker.exists() {
            fs::remove_file(&marker)?;
        }
        let file = File::create(dir.join(DIAGNOSTICS_FILE))?;
        Ok(DirectoryOutput {
            dir: dir.to_path_buf(),
            grid,
            config_hash: meta.config_hash.clone(),
            diagnostics: DiagnosticsWriter::new(BufWriter::new(file), meta)?,
            snapshots_written: 0,
        })
    }

    pub fn finish(mut self) -> Result<(), Error> {
        self.diagnostics.flush()
    }
}

fn to_io(e: Error) -> std::io::Error {
    match e {
        Error::Io(e) => e,
        other => std::io::Error::other(other.to_string()),
    }
}

impl RunObserver for DirectoryOutput<'_> {
    fn on_record(&mut self, record: &DiagnosticsRecord) -> std::io::Result<()> {
        self.diagnostics.push(record).map_err(to_io)
    }

    fn on_snapshot(&mut self, state: &FilmState) -> std::io::Result<()> {
        let path = self.dir.join(snapshot_file_name(state.step));
        let file = BufWriter::new(File::create(path)?);
        write_snapshot(state, self.grid, &self.config_hash, file).map_err(to_io)?;
        self.snapshots_written += 1;
        Ok(())
    }
}

/// Leaves a marker so partial output is not mistaken for a complete run.
pub fn mark_partial(dir: &Path, reason: &str) -> std::io::Result<()> {
    fs::write(dir.join(PARTIAL_MARKER), format!("{reason}\n"))
}
