//! Run artifacts: metrics CSV, graph snapshots (DOT and adjacency JSON), and
//! experiment tables. Every file is written to a temporary sibling first and
//! renamed into place, so a failed write never leaves a partial file.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::StepMetrics;
use crate::experiments::{ExperimentResult, Summary};
use crate::network::{AdjacencyMatrix, OpinionMatrix};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn invalid(path: &Path, message: impl Into<String>) -> OutputError {
    OutputError::Invalid {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| OutputError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Header of the per-step metrics CSV for `m` topics.
pub fn metrics_header(m: usize) -> Vec<String> {
    let mut h = vec!["step".to_string()];
    h.extend((0..m).map(|j| format!("mean_op_{j}")));
    h.extend((0..m).map(|j| format!("mean_op_all_{j}")));
    h.extend(
        ["component_count", "mean_degree", "intra_cluster_dispersion"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

fn metrics_record(row: &StepMetrics) -> Vec<String> {
    let mut r = vec![row.k.to_string()];
    r.extend(row.mean_opinion.iter().map(|&v| fmt_f64(v)));
    r.extend(row.mean_opinion_all.iter().map(|&v| fmt_f64(v)));
    r.push(row.component_count.to_string());
    r.push(fmt_f64(row.mean_degree));
    r.push(fmt_f64(row.intra_cluster_dispersion));
    r
}

fn csv_bytes(
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
    path: &Path,
) -> Result<Vec<u8>, OutputError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let to_err = |e: csv::Error| invalid(path, e.to_string());
    w.write_record(header).map_err(to_err)?;
    for r in rows {
        w.write_record(&r).map_err(to_err)?;
    }
    w.into_inner().map_err(|e| invalid(path, e.to_string()))
}

/// One row per step, header first. Identical trajectories give identical
/// bytes.
pub fn write_metrics_csv(trajectory: &[StepMetrics], path: &Path) -> Result<(), OutputError> {
    let first = trajectory
        .first()
        .ok_or_else(|| invalid(path, "empty trajectory"))?;
    let m = first.mean_opinion.len();
    let bytes = csv_bytes(
        &metrics_header(m),
        trajectory.iter().map(metrics_record),
        path,
    )?;
    write_atomic(path, &bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Dot,
    AdjacencyJson,
}

/// `#rrggbb` with each channel `round(255 * opinion)`.
pub fn rgb_hex(opinion: &[f64]) -> String {
    let ch = |v: f64| (255.0 * v.clamp(0.0, 1.0)).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        ch(opinion[0]),
        ch(opinion[1]),
        ch(opinion[2])
    )
}

pub fn graph_to_dot(a: &AdjacencyMatrix, x: &OpinionMatrix) -> String {
    let mut s = String::from("graph opinions {\n");
    for i in 0..x.n() {
        let _ = write!(s, "  {i} [");
        let attrs: Vec<String> = x
            .row(i)
            .iter()
            .enumerate()
            .map(|(j, &v)| format!("opinion_{j}=\"{}\"", fmt_f64(v)))
            .collect();
        s.push_str(&attrs.join(", "));
        if x.m() == 3 {
            let _ = write!(s, ", color=\"{}\", style=filled", rgb_hex(x.row(i)));
        }
        s.push_str("];\n");
    }
    for (i, j) in a.edges() {
        let _ = writeln!(s, "  {i} -- {j};");
    }
    s.push_str("}\n");
    s
}

/// Adjacency-JSON snapshot: `{n, edges: [[i, j], ...] with i < j, opinions}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSnapshot {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    pub opinions: Vec<Vec<f64>>,
}

impl GraphSnapshot {
    pub fn new(a: &AdjacencyMatrix, x: &OpinionMatrix) -> Self {
        GraphSnapshot {
            n: a.n(),
            edges: a.edges().into_iter().map(|(i, j)| [i, j]).collect(),
            opinions: (0..x.n()).map(|i| x.row(i).to_vec()).collect(),
        }
    }

    pub fn into_parts(self) -> crate::Result<(AdjacencyMatrix, OpinionMatrix)> {
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        let a = AdjacencyMatrix::from_edges(self.n, &edges)?;
        let x = OpinionMatrix::from_rows(&self.opinions)?;
        if x.n() != self.n {
            return Err(crate::SimError::Dimension(format!(
                "{} opinion rows for {} vertices",
                x.n(),
                self.n
            )));
        }
        Ok((a, x))
    }
}

pub fn export_graph(
    a: &AdjacencyMatrix,
    x: &OpinionMatrix,
    path: &Path,
    format: GraphFormat,
) -> Result<(), OutputError> {
    if a.n() != x.n() {
        return Err(invalid(
            path,
            format!("{} vertices but {} opinion rows", a.n(), x.n()),
        ));
    }
    let text = match format {
        GraphFormat::Dot => graph_to_dot(a, x),
        GraphFormat::AdjacencyJson => {
            serde_json::to_string(&GraphSnapshot::new(a, x))
                .map_err(|e| invalid(path, e.to_string()))?
                + "\n"
        }
    };
    write_atomic(path, text.as_bytes())
}

/// Reads an adjacency-JSON snapshot back into matrices.
pub fn import_graph_json(path: &Path) -> Result<(AdjacencyMatrix, OpinionMatrix), OutputError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let snap: GraphSnapshot =
        serde_json::from_str(&text).map_err(|e| invalid(path, e.to_string()))?;
    snap.into_parts().map_err(|e| invalid(path, e.to_string()))
}

/// One row per completed run with its final metrics.
pub fn write_raw_csv(result: &ExperimentResult, path: &Path) -> Result<(), OutputError> {
    let mut header = vec!["experiment".to_string(), "variation".into(), "seed".into()];
    header.extend(metrics_header(result.m));
    header.push("stabilized_at".into());
    let rows = result.runs.iter().map(|r| {
        let mut row = vec![result.name.clone(), r.variation.clone(), r.seed.to_string()];
        row.extend(metrics_record(&r.final_metrics));
        row.push(r.stabilized_at.map(|k| k.to_string()).unwrap_or_default());
        row
    });
    write_atomic(path, &csv_bytes(&header, rows, path)?)
}

/// One row per variation with across-seed statistics of the final metrics.
pub fn write_aggregate_csv(result: &ExperimentResult, path: &Path) -> Result<(), OutputError> {
    let stats = ["mean", "std", "min", "max"];
    let mut header = vec![
        "experiment".to_string(),
        "variation".into(),
        "runs".into(),
        "failures".into(),
    ];
    let mut columns: Vec<String> = (0..result.m).map(|j| format!("mean_op_{j}")).collect();
    columns.extend(
        ["l1", "component_count", "intra_cluster_dispersion"]
            .iter()
            .map(|s| s.to_string()),
    );
    for c in &columns {
        header.extend(stats.iter().map(|s| format!("{c}_{s}")));
    }
    let cells = |s: Option<&Summary>| -> Vec<String> {
        match s {
            Some(s) => [s.mean, s.std, s.min, s.max]
                .iter()
                .map(|&v| fmt_f64(v))
                .collect(),
            None => vec![String::new(); 4],
        }
    };
    let rows = result.aggregates.iter().map(|a| {
        let mut row = vec![
            result.name.clone(),
            a.variation.clone(),
            a.runs.to_string(),
            a.failures.to_string(),
        ];
        for j in 0..result.m {
            row.extend(cells(a.mean_opinion.get(j)));
        }
        row.extend(cells(a.l1.as_ref()));
        row.extend(cells(a.component_count.as_ref()));
        row.extend(cells(a.intra_cluster_dispersion.as_ref()));
        row
    });
    write_atomic(path, &csv_bytes(&header, rows, path)?)
}

pub fn write_result_json(result: &ExperimentResult, path: &Path) -> Result<(), OutputError> {
    let text = serde_json::to_string_pretty(result).map_err(|e| invalid(path, e.to_string()))?;
    write_atomic(path, (text + "\n").as_bytes())
}

/// Writes `<prefix>_raw.csv`, `<prefix>_aggregate.csv` and `<prefix>.json`
/// into `dir`, returning the paths written.
pub fn write_experiment(
    result: &ExperimentResult,
    dir: &Path,
    prefix: &str,
) -> Result<Vec<PathBuf>, OutputError> {
    let raw = dir.join(format!("{prefix}_raw.csv"));
    let agg = dir.join(format!("{prefix}_aggregate.csv"));
    let json = dir.join(format!("{prefix}.json"));
    write_raw_csv(result, &raw)?;
    write_aggregate_csv(result, &agg)?;
    write_result_json(result, &json)?;
    Ok(vec![raw, agg, json])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(k: usize) -> StepMetrics {
        StepMetrics {
            k,
            mean_opinion: vec![0.1, 1.0 / 3.0],
            mean_opinion_all: vec![0.2, 0.5],
            component_count: 3,
            mean_degree: 1.25,
            intra_cluster_dispersion: 1e-20,
            opinion_change: 0.0,
        }
    }

    #[test]
    fn metrics_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let traj: Vec<_> = (1..=180).map(metrics).collect();
        write_metrics_csv(&traj, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 181);
        assert_eq!(
            lines[0],
            "step,mean_op_0,mean_op_1,mean_op_all_0,mean_op_all_1,component_count,mean_degree,intra_cluster_dispersion"
        );
        assert_eq!(lines[1], "1,0.1,0.3333333333333333,0.2,0.5,3,1.25,1e-20");
        let parsed: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(parsed, 1.0 / 3.0);
    }

    #[test]
    fn empty_trajectory_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        assert!(matches!(
            write_metrics_csv(&[], &path),
            Err(OutputError::Invalid { .. })
        ));
        assert!(!path.exists());
    }

    #[test]
    fn dot_export() {
        let a = AdjacencyMatrix::from_edges(2, &[(0, 1)]).unwrap();
        let x = OpinionMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.5, 0.5, 0.5]]).unwrap();
        let dot = graph_to_dot(&a, &x);
        assert_eq!(dot.matches("--").count(), 1);
        assert!(dot.contains("color=\"#ff0000\""));
        assert!(dot.contains("opinion_2=\"0.5\""));
        assert_eq!(rgb_hex(&[0.5, 0.5, 0.5]), "#808080");
    }

    #[test]
    fn dot_without_color_for_other_m() {
        let x = OpinionMatrix::from_rows(&[[0.2], [0.9]]).unwrap();
        let dot = graph_to_dot(&AdjacencyMatrix::empty(2), &x);
        assert!(!dot.contains("color"));
        assert!(!dot.contains("--"));
    }

    #[test]
    fn json_snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        let a = AdjacencyMatrix::from_edges(3, &[(0, 2), (1, 2)]).unwrap();
        let x = OpinionMatrix::from_rows(&[
            [0.1, 1.0 / 3.0],
            [0.7, 0.2],
            [std::f64::consts::FRAC_1_PI, 0.0],
        ])
        .unwrap();
        export_graph(&a, &x, &path, GraphFormat::AdjacencyJson).unwrap();
        let (a2, x2) = import_graph_json(&path).unwrap();
        assert_eq!(a2, a);
        assert_eq!(x2, x);
    }

    #[test]
    fn export_rejects_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let x = OpinionMatrix::from_rows(&[[0.1]]).unwrap();
        assert!(export_graph(
            &AdjacencyMatrix::empty(2),
            &x,
            &dir.path().join("g.dot"),
            GraphFormat::Dot
        )
        .is_err());
    }
}
