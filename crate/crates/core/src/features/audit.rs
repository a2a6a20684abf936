//! Comparison of causal descriptors against the full-graph baseline.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{format_float, FeatureMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnLeakage {
    pub column: String,
    pub rows: usize,
    pub differing_rows: usize,
    pub differing_fraction: f64,
    pub mean_abs_diff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimestepLeakage {
    pub timestep: u32,
    pub column: String,
    pub rows: usize,
    pub differing_fraction: f64,
    pub mean_abs_diff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageAuditReport {
    pub tolerance: f64,
    pub rows: usize,
    pub columns: Vec<ColumnLeakage>,
    /// Empty when neither matrix carries row timesteps.
    pub per_timestep: Vec<TimestepLeakage>,
}

/// A cell differs when `|causal - full| > tol`.
pub fn leakage_audit(causal: &FeatureMatrix, full: &FeatureMatrix, tol: f64) -> Result<LeakageAuditReport> {
    if causal.columns() != full.columns() {
        let mut mismatched: Vec<&str> = causal
            .columns()
            .iter()
            .filter(|c| !full.columns().contains(c))
            .chain(full.columns().iter().filter(|c| !causal.columns().contains(c)))
            .map(String::as_str)
            .collect();
        if mismatched.is_empty() {
            mismatched.push("<column order differs>");
        }
        return Err(Error::SchemaMismatch(format!(
            "causal/full columns differ: {}",
            mismatched.join(", ")
        )));
    }
    if causal.row_ids() != full.row_ids() {
        return Err(Error::SchemaMismatch("causal/full row ids differ".into()));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::invalid("tolerance must be non-negative"));
    }
    let n = causal.n_rows();
    let times = causal.row_timesteps().or(full.row_timesteps());

    let mut columns = Vec::with_capacity(causal.n_cols());
    let mut per_timestep = Vec::new();
    for (c, name) in causal.columns().iter().enumerate() {
        let mut differing = 0usize;
        let mut abs_sum = 0.0;
        // timestep -> (rows, differing, abs_sum)
        let mut by_t: BTreeMap<u32, (usize, usize, f64)> = BTreeMap::new();
        for r in 0..n {
            let d = (causal.get(r, c) - full.get(r, c)).abs();
            let differs = d > tol;
            differing += differs as usize;
            abs_sum += d;
            if let Some(ts) = times {
                let e = by_t.entry(ts[r].get()).or_default();
                e.0 += 1;
                e.1 += differs as usize;
                e.2 += d;
            }
        }
        columns.push(ColumnLeakage {
            column: name.clone(),
            rows: n,
            differing_rows: differing,
            differing_fraction: ratio(differing as f64, n),
            mean_abs_diff: ratio(abs_sum, n),
        });
        per_timestep.extend(by_t.into_iter().map(|(t, (rows, diff, sum))| TimestepLeakage {
            timestep: t,
            column: name.clone(),
            rows,
            differing_fraction: ratio(diff as f64, rows),
            mean_abs_diff: ratio(sum, rows),
        }));
    }
    per_timestep.sort_by_key(|a| a.timestep);
    Ok(LeakageAuditReport {
        tolerance: tol,
        rows: n,
        columns,
        per_timestep,
    })
}

fn ratio(x: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        x / n as f64
    }
}

impl LeakageAuditReport {
    pub fn column(&self, name: &str) -> Option<&ColumnLeakage> {
        self.columns.iter().find(|c| c.column == name)
    }

    pub fn timestep_column(&self, t: u32, name: &str) -> Option<&TimestepLeakage> {
        self.per_timestep.iter().find(|p| p.timestep == t && p.column == name)
    }

    pub fn write_columns_csv(&self, path: &Path) -> Result<()> {
        let mut s = String::from("column,rows,differing_rows,differing_fraction,mean_abs_diff\n");
        for c in &self.columns {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                c.column,
                c.rows,
                c.differing_rows,
                format_float(c.differing_fraction),
                format_float(c.mean_abs_diff)
            ));
        }
        write_file(path, &s)
    }

    pub fn write_timesteps_csv(&self, path: &Path) -> Result<()> {
        let mut s = String::from("timestep,column,rows,differing_fraction,mean_abs_diff\n");
        for p in &self.per_timestep {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                p.timestep,
                p.column,
                p.rows,
                format_float(p.differing_fraction),
                format_float(p.mean_abs_diff)
            ));
        }
        write_file(path, &s)
    }
}

fn write_file(path: &Path, s: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeId, TimeStep};
    use crate::matrix::Provenance;

    fn m(cols: &[&str], vals: Vec<f64>) -> FeatureMatrix {
        let rows = vals.len() / cols.len();
        FeatureMatrix::new(
            (0..rows as u64).map(NodeId).collect(),
            cols.iter().map(|s| s.to_string()).collect(),
            vals,
            Provenance::Causal,
        )
        .unwrap()
        .with_timesteps((0..rows).map(|i| TimeStep::new(1 + (i % 2) as u32).unwrap()).collect())
        .unwrap()
    }

    #[test]
    fn identical_matrices_have_no_leakage() {
        let a = m(&["x", "y"], vec![1.0, 2.0, 3.0, 4.0]);
        let r = leakage_audit(&a, &a, 0.0).unwrap();
        assert!(r
            .columns
            .iter()
            .all(|c| c.differing_fraction == 0.0 && c.mean_abs_diff == 0.0));
        assert_eq!(r.per_timestep.len(), 4);
    }

    #[test]
    fn fractions_and_profile() {
        let a = m(&["x"], vec![0.0, 0.0, 0.0, 0.0]);
        let b = m(&["x"], vec![2.0, 0.0, 0.0, 0.0]);
        let r = leakage_audit(&a, &b, 1e-9).unwrap();
        assert_eq!(r.columns[0].differing_fraction, 0.25);
        assert_eq!(r.columns[0].mean_abs_diff, 0.5);
        assert_eq!(r.timestep_column(1, "x").unwrap().differing_fraction, 0.5);
        assert_eq!(r.timestep_column(2, "x").unwrap().differing_fraction, 0.0);
    }

    #[test]
    fn schema_mismatch_lists_columns() {
        let a = m(&["x", "y"], vec![1.0, 2.0]);
        let b = m(&["x", "z"], vec![1.0, 2.0]);
        let err = leakage_audit(&a, &b, 0.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('y') && msg.contains('z'), "{msg}");
    }
}
