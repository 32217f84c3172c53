//! Plain-text artifact formats.
//!
//! | artifact     | layout                                                        |
//! |--------------|---------------------------------------------------------------|
//! | point cloud  | CSV, header `x1,..,xd`, one row per point                     |
//! | graph        | whitespace separated `i j w` with `i <= j`, 0-based            |
//! | eigenpairs   | `# {json header}` line, then CSV `u1,..,uk`, one row per node |
//! | assignments  | CSV `index,label`, label empty for excluded rows              |
//! | centers      | JSON `{"dim": d, "centers": [[..], ..]}`                      |
//! | plan         | CSV `i,j,mass`                                                |
//! | grid values  | CSV `x1,..,xd,weight,f1,..,fk`, one row per cell              |

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use specclust_core::geometry::{GridMeasure, PointCloud};
use specclust_core::graph::WeightedGraph;
use specclust_core::kmeans::CenterSet;
use specclust_core::transport::TransportPlan;

use crate::error::{LabError, LabResult};

fn create(path: &Path) -> LabResult<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn numbered(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

pub fn write_cloud(path: &Path, cloud: &PointCloud) -> LabResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(numbered("x", cloud.dim()))?;
    for i in 0..cloud.len() {
        w.write_record(cloud.point(i).iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a cloud written by [`write_cloud`]; the seed is recorded as 0.
pub fn read_cloud(path: &Path) -> LabResult<PointCloud> {
    let mut r = csv::Reader::from_path(path)?;
    let dim = r.headers()?.len();
    let mut coords = Vec::new();
    for row in r.records() {
        let row = row?;
        if row.len() != dim {
            return Err(LabError::Parse(format!("row with {} fields, expected {dim}", row.len())));
        }
        for field in row.iter() {
            coords.push(parse_f64(field)?);
        }
    }
    Ok(PointCloud::from_coords(dim, coords, 0)?)
}

fn parse_f64(s: &str) -> LabResult<f64> {
    s.trim().parse::<f64>().map_err(|_| LabError::Parse(format!("not a number: '{s}'")))
}

pub fn write_graph(path: &Path, graph: &WeightedGraph) -> LabResult<()> {
    let mut w = create(path)?;
    for (i, j, x) in graph.triplets() {
        writeln!(w, "{i} {j} {x}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_graph(path: &Path) -> LabResult<Vec<(usize, usize, f64)>> {
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad = || LabError::Parse(format!("line {}: expected 'i j w'", lineno + 1));
        if parts.len() != 3 {
            return Err(bad());
        }
        let i = parts[0].parse().map_err(|_| bad())?;
        let j = parts[1].parse().map_err(|_| bad())?;
        out.push((i, j, parse_f64(parts[2])?));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenHeader {
    pub n: usize,
    pub eps: f64,
    pub kind: String,
    pub values: Vec<f64>,
    pub rescaled: Vec<f64>,
    pub residuals: Vec<f64>,
}

pub fn write_eigenpairs(path: &Path, header: &EigenHeader, vectors: &[Vec<f64>]) -> LabResult<()> {
    let mut out = create(path)?;
    writeln!(out, "# {}", serde_json::to_string(header)?)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(numbered("u", vectors.len()))?;
    for i in 0..header.n {
        w.write_record(vectors.iter().map(|v| v[i].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_eigenpairs(path: &Path) -> LabResult<(EigenHeader, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let (first, rest) = text.split_once('\n').ok_or_else(|| LabError::Parse("missing header line".into()))?;
    let json = first.strip_prefix("# ").ok_or_else(|| LabError::Parse("header must start with '# '".into()))?;
    let header: EigenHeader = serde_json::from_str(json)?;
    let mut r = csv::Reader::from_reader(rest.as_bytes());
    let k = r.headers()?.len();
    let mut vectors = vec![Vec::with_capacity(header.n); k];
    for row in r.records() {
        for (j, field) in row?.iter().enumerate() {
            vectors[j].push(parse_f64(field)?);
        }
    }
    if vectors.iter().any(|v| v.len() != header.n) {
        return Err(LabError::Parse("row count differs from header n".into()));
    }
    Ok((header, vectors))
}

pub fn write_assignments(path: &Path, labels: &[Option<usize>]) -> LabResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["index", "label"])?;
    for (i, l) in labels.iter().enumerate() {
        w.write_record([i.to_string(), l.map(|l| l.to_string()).unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_assignments(path: &Path) -> LabResult<Vec<Option<usize>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let label = row.get(1).unwrap_or("");
        out.push(if label.is_empty() {
            None
        } else {
            Some(label.parse().map_err(|_| LabError::Parse(format!("bad label '{label}'")))?)
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentersFile {
    pub dim: usize,
    pub centers: Vec<Vec<f64>>,
    pub objective: f64,
}

pub fn write_centers(path: &Path, centers: &CenterSet, objective: f64) -> LabResult<()> {
    let file = CentersFile {
        dim: centers.dim(),
        centers: (0..centers.k()).map(|j| centers.center(j).to_vec()).collect(),
        objective,
    };
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &file)?;
    writeln!(w)?;
    Ok(())
}

pub fn write_plan(path: &Path, plan: &TransportPlan) -> LabResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["i", "j", "mass"])?;
    for &(i, j, m) in &plan.entries {
        w.write_record([i.to_string(), j.to_string(), m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_grid_values(path: &Path, grid: &GridMeasure, values: &[Vec<f64>]) -> LabResult<()> {
    let d = grid.domain().dim();
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = numbered("x", d);
    header.push("weight".into());
    header.extend(numbered("f", values.len()));
    w.write_record(&header)?;
    for c in 0..grid.len() {
        let mut row: Vec<String> = grid.cell_center(c).iter().map(|x| x.to_string()).collect();
        row.push(grid.weights()[c].to_string());
        row.extend(values.iter().map(|v| v[c].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes any serializable rows as CSV with a header from the field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> LabResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> LabResult<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(LabError::from)).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> LabResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
