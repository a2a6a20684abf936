//! Row-per-node numeric tables with a named, ordered column schema.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::DescriptorSpec;
use crate::graph::{NodeId, TimeStep};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Graph descriptors computed on `G<=t` for nodes at timestep `t`.
    Causal,
    /// Graph descriptors computed once on the union graph.
    Full,
    /// Opaque per-transaction attributes from the input file.
    Transaction,
    /// Column-wise concatenation of other matrices.
    Combined,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    row_ids: Vec<NodeId>,
    columns: Vec<String>,
    values: Vec<f64>,
    provenance: Provenance,
    row_timesteps: Option<Vec<TimeStep>>,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major `values`.
    pub fn new(row_ids: Vec<NodeId>, columns: Vec<String>, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if values.len() != row_ids.len() * columns.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} values for {} rows x {} columns",
                values.len(),
                row_ids.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(Error::SchemaMismatch(format!("duplicate column `{c}`")));
            }
        }
        let mut seen_rows = HashSet::with_capacity(row_ids.len());
        for id in &row_ids {
            if !seen_rows.insert(*id) {
                return Err(Error::DuplicateNode(*id));
            }
        }
        Ok(FeatureMatrix {
            row_ids,
            columns,
            values,
            provenance,
            row_timesteps: None,
        })
    }

    pub fn with_timesteps(mut self, timesteps: Vec<TimeStep>) -> Result<Self> {
        if timesteps.len() != self.row_ids.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} timesteps for {} rows",
                timesteps.len(),
                self.row_ids.len()
            )));
        }
        self.row_timesteps = Some(timesteps);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row_ids(&self) -> &[NodeId] {
        &self.row_ids
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn row_timesteps(&self) -> Option<&[TimeStep]> {
        self.row_timesteps.as_deref()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.columns.len();
        &self.values[r * w..(r + 1) * w]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.columns.len() + c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.get(r, c)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn row_index(&self) -> HashMap<NodeId, usize> {
        self.row_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect()
    }

    pub fn validate_finite(&self) -> Result<()> {
        let w = self.columns.len();
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(p) => Err(Error::NonFinite {
                row: p / w,
                column: self.columns[p % w].clone(),
            }),
        }
    }

    /// Appends `name` as a new last column.
    pub fn push_column(&mut self, name: String, col: Vec<f64>) -> Result<()> {
        if self.column_index(&name).is_some() {
            return Err(Error::SchemaMismatch(format!("duplicate column `{name}`")));
        }
        if col.len() != self.n_rows() {
            return Err(Error::SchemaMismatch(format!(
                "column `{name}` has {} values for {} rows",
                col.len(),
                self.n_rows()
            )));
        }
        let w = self.columns.len();
        let mut values = Vec::with_capacity(self.values.len() + col.len());
        for (r, v) in col.into_iter().enumerate() {
            values.extend_from_slice(&self.values[r * w..(r + 1) * w]);
            values.push(v);
        }
        self.values = values;
        self.columns.push(name);
        Ok(())
    }

    /// Rows looked up by node id, in the order given; ids absent from this
    /// matrix are filled with zeros.
    pub fn gather(&self, ids: &[NodeId]) -> FeatureMatrix {
        let index = self.row_index();
        let w = self.n_cols();
        let mut values = Vec::with_capacity(ids.len() * w);
        for id in ids {
            match index.get(id) {
                Some(&r) => values.extend_from_slice(self.row(r)),
                None => values.extend(std::iter::repeat_n(0.0, w)),
            }
        }
        FeatureMatrix {
            row_ids: ids.to_vec(),
            columns: self.columns.clone(),
            values,
            provenance: self.provenance,
            row_timesteps: None,
        }
    }

    /// Concatenates columns of row-aligned matrices, left to right.
    pub fn hconcat(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
        let first = parts.first().ok_or_else(|| Error::invalid("nothing to concatenate"))?;
        if parts.len() == 1 {
            return Ok((*first).clone());
        }
        for p in &parts[1..] {
            if p.row_ids != first.row_ids {
                return Err(Error::SchemaMismatch(
                    "concatenated matrices are not row-aligned".into(),
                ));
            }
        }
        let columns: Vec<String> = parts.iter().flat_map(|p| p.columns.clone()).collect();
        let mut values = Vec::with_capacity(first.n_rows() * columns.len());
        for r in 0..first.n_rows() {
            for p in parts {
                values.extend_from_slice(p.row(r));
            }
        }
        let mut m = FeatureMatrix::new(first.row_ids.clone(), columns, values, Provenance::Combined)?;
        m.row_timesteps = first.row_timesteps.clone();
        Ok(m)
    }

    /// Same rows with columns reordered (or subset) by name.
    pub fn select_columns(&self, names: &[String]) -> Result<FeatureMatrix> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::SchemaMismatch(format!("missing column `{n}`")))
            })
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(self.n_rows() * idx.len());
        for r in 0..self.n_rows() {
            let row = self.row(r);
            values.extend(idx.iter().map(|&c| row[c]));
        }
        let mut m = FeatureMatrix::new(self.row_ids.clone(), names.to_vec(), values, self.provenance)?;
        m.row_timesteps = self.row_timesteps.clone();
        Ok(m)
    }

    /// Writes `node_id,<col1>,...` with shortest round-trip float formatting.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut line = String::from("node_id");
        for c in &self.columns {
            line.push(',');
            line.push_str(c);
        }
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
        for r in 0..self.n_rows() {
            line.clear();
            line.push_str(&self.row_ids[r].to_string());
            for v in self.row(r) {
                line.push(',');
                line.push_str(&format_float(*v));
            }
            line.push('\n');
            out.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, provenance: Provenance) -> Result<FeatureMatrix> {
        let file_name = path.display().to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| csv_error(&file_name, e))?;
        let headers = rdr.headers().map_err(|e| csv_error(&file_name, e))?.clone();
        if headers.get(0) != Some("node_id") {
            return Err(Error::Parse {
                file: file_name,
                line: 1,
                message: "first column must be `node_id`".into(),
            });
        }
        let columns: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut row_ids = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(&file_name, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let parse_err = |message: String| Error::Parse {
                file: file_name.clone(),
                line,
                message,
            };
            let id = rec[0]
                .trim()
                .parse::<u64>()
                .map_err(|_| parse_err(format!("bad node id `{}`", &rec[0])))?;
            row_ids.push(NodeId(id));
            for (c, field) in rec.iter().skip(1).enumerate() {
                let v = parse_finite(field)
                    .ok_or_else(|| parse_err(format!("bad value `{field}` in column `{}`", columns[c])))?;
                values.push(v);
            }
        }
        FeatureMatrix::new(row_ids, columns, values, provenance)
    }
}

pub(crate) fn parse_finite(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

pub(crate) fn csv_error(file: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        file: file.to_string(),
        line,
        message: e.to_string(),
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v}")
}

/// Sidecar manifest written next to every matrix CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixManifest {
    pub provenance: Provenance,
    pub columns: Vec<String>,
    pub rows: usize,
    /// Run-length encoded row timesteps as `[timestep, run_length]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_timesteps: Option<Vec<(u32, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptors: Option<DescriptorSpec>,
    pub version: String,
}

impl MatrixManifest {
    pub fn describe(m: &FeatureMatrix, descriptors: Option<&DescriptorSpec>) -> Self {
        MatrixManifest {
            provenance: m.provenance,
            columns: m.columns.clone(),
            rows: m.n_rows(),
            row_timesteps: m.row_timesteps.as_deref().map(run_length_encode),
            descriptors: descriptors.cloned(),
            version: crate::VERSION.to_string(),
        }
    }

    pub fn timesteps(&self) -> Result<Option<Vec<TimeStep>>> {
        let Some(runs) = &self.row_timesteps else {
            return Ok(None);
        };
        let mut out = Vec::with_capacity(self.rows);
        for &(t, n) in runs {
            let t = TimeStep::new(t)?;
            out.extend(std::iter::repeat_n(t, n));
        }
        Ok(Some(out))
    }

    pub fn sidecar_path(csv: &Path) -> std::path::PathBuf {
        csv.with_extension("manifest.json")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn run_length_encode(ts: &[TimeStep]) -> Vec<(u32, usize)> {
    let mut runs: Vec<(u32, usize)> = Vec::new();
    for t in ts {
        match runs.last_mut() {
            Some((last, n)) if *last == t.get() => *n += 1,
            _ => runs.push((t.get(), 1)),
        }
    }
    runs
}

/// Writes a matrix CSV plus its sidecar manifest; returns the manifest path.
pub fn write_with_manifest(
    m: &FeatureMatrix,
    csv: &Path,
    descriptors: Option<&DescriptorSpec>,
) -> Result<std::path::PathBuf> {
    m.write_csv(csv)?;
    let side = MatrixManifest::sidecar_path(csv);
    MatrixManifest::describe(m, descriptors).write(&side)?;
    Ok(side)
}

/// Reads a matrix CSV, attaching timesteps and provenance from the sidecar
/// manifest when present.
pub fn read_with_manifest(csv: &Path, fallback: Provenance) -> Result<FeatureMatrix> {
    let side = MatrixManifest::sidecar_path(csv);
    if !side.exists() {
        return FeatureMatrix::read_csv(csv, fallback);
    }
    let manifest = MatrixManifest::read(&side)?;
    let m = FeatureMatrix::read_csv(csv, manifest.provenance)?;
    if m.columns != manifest.columns || m.n_rows() != manifest.rows {
        return Err(Error::SchemaMismatch(format!(
            "{} disagrees with its manifest",
            csv.display()
        )));
    }
    match manifest.timesteps()? {
        Some(ts) => m.with_timesteps(ts),
        None => Ok(m),
    }
}
