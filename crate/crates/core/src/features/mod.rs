//! Structural node descriptors, computed either causally (each node on the
//! historical snapshot at its own timestep) or on the full union graph.

mod audit;
mod centrality;
mod structure;

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, TemporalGraph, TimeStep, UndirectedView};
use crate::matrix::{FeatureMatrix, Provenance};

pub use audit::{leakage_audit, ColumnLeakage, LeakageAuditReport, TimestepLeakage};
pub use centrality::{hits, pagerank};
pub use structure::{degrees, kcore, neighbor_degree_stats, two_hop_reach, Degrees};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Descriptor {
    InDegree,
    OutDegree,
    TotalDegree,
    Pagerank,
    Hub,
    Authority,
    Kcore,
    NbrDegMean,
    NbrDegMax,
    TwoHopReach,
}

impl Descriptor {
    pub const ALL: [Descriptor; 10] = [
        Descriptor::InDegree,
        Descriptor::OutDegree,
        Descriptor::TotalDegree,
        Descriptor::Pagerank,
        Descriptor::Hub,
        Descriptor::Authority,
        Descriptor::Kcore,
        Descriptor::NbrDegMean,
        Descriptor::NbrDegMax,
        Descriptor::TwoHopReach,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Descriptor::InDegree => "in_degree",
            Descriptor::OutDegree => "out_degree",
            Descriptor::TotalDegree => "total_degree",
            Descriptor::Pagerank => "pagerank",
            Descriptor::Hub => "hub",
            Descriptor::Authority => "authority",
            Descriptor::Kcore => "kcore",
            Descriptor::NbrDegMean => "nbr_deg_mean",
            Descriptor::NbrDegMax => "nbr_deg_max",
            Descriptor::TwoHopReach => "two_hop_reach",
        }
    }

    /// Degree- and reach-based counts that get a `log1p_` companion column.
    pub fn is_log_target(self) -> bool {
        matches!(
            self,
            Descriptor::InDegree
                | Descriptor::OutDegree
                | Descriptor::TotalDegree
                | Descriptor::NbrDegMean
                | Descriptor::NbrDegMax
                | Descriptor::TwoHopReach
        )
    }

    pub fn from_name(name: &str) -> Option<Descriptor> {
        Descriptor::ALL.into_iter().find(|d| d.name() == name)
    }
}

/// Which descriptors to compute, in column order, plus iteration constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescriptorSpec {
    pub descriptors: Vec<Descriptor>,
    /// Append `log1p_<name>` columns for degree- and reach-based descriptors.
    pub log1p: bool,
    pub pagerank_damping: f64,
    pub pagerank_tol: f64,
    pub pagerank_max_iter: usize,
    pub hits_tol: f64,
    pub hits_max_iter: usize,
}

impl Default for DescriptorSpec {
    fn default() -> Self {
        DescriptorSpec {
            descriptors: Descriptor::ALL.to_vec(),
            log1p: true,
            pagerank_damping: 0.85,
            pagerank_tol: 1e-9,
            pagerank_max_iter: 200,
            hits_tol: 1e-9,
            hits_max_iter: 200,
        }
    }
}

impl DescriptorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.descriptors.is_empty() {
            return Err(Error::invalid("descriptor list is empty"));
        }
        let mut seen = HashSet::new();
        for d in &self.descriptors {
            if !seen.insert(*d) {
                return Err(Error::invalid(format!("descriptor `{}` listed twice", d.name())));
            }
        }
        if !(self.pagerank_damping > 0.0 && self.pagerank_damping < 1.0) {
            return Err(Error::invalid("pagerank_damping must lie in (0, 1)"));
        }
        if !(self.pagerank_tol > 0.0 && self.hits_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if self.pagerank_max_iter == 0 || self.hits_max_iter == 0 {
            return Err(Error::invalid("iteration limits must be positive"));
        }
        Ok(())
    }

    pub fn base_columns(&self) -> Vec<String> {
        self.descriptors.iter().map(|d| d.name().to_string()).collect()
    }

    /// Final column order: base descriptors, then log1p companions.
    pub fn column_names(&self) -> Vec<String> {
        let mut cols = self.base_columns();
        if self.log1p {
            cols.extend(
                self.descriptors
                    .iter()
                    .filter(|d| d.is_log_target())
                    .map(|d| format!("log1p_{}", d.name())),
            );
        }
        cols
    }
}

/// Per-node values keyed by external id, in view insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeScores<T> {
    pub ids: Vec<NodeId>,
    pub values: Vec<T>,
    pub converged: bool,
    pub iterations: usize,
    index: HashMap<NodeId, usize>,
}

impl<T> NodeScores<T> {
    pub(crate) fn new(ids: Vec<NodeId>, values: Vec<T>, converged: bool, iterations: usize) -> Self {
        let index = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        NodeScores {
            ids,
            values,
            converged,
            iterations,
            index,
        }
    }

    pub fn get(&self, id: NodeId) -> Option<&T> {
        self.index.get(&id).map(|&i| &self.values[i])
    }
}

/// All requested descriptors for every node of one projected snapshot,
/// column-major over local indices.
fn snapshot_columns(view: &UndirectedView<'_>, spec: &DescriptorSpec) -> Vec<Vec<f64>> {
    let g = &view.digraph;
    let adj = &view.adj;
    let n = g.len();
    let wants = |d: Descriptor| spec.descriptors.contains(&d);

    let pagerank = wants(Descriptor::Pagerank).then(|| {
        let r = centrality::pagerank_local(g, spec.pagerank_damping, spec.pagerank_tol, spec.pagerank_max_iter);
        if !r.converged {
            tracing::warn!(horizon = %view.snapshot().horizon(), "pagerank did not converge");
        }
        r.values
    });
    let hits = (wants(Descriptor::Hub) || wants(Descriptor::Authority)).then(|| {
        let r = centrality::hits_local(g, spec.hits_tol, spec.hits_max_iter);
        if !r.converged {
            tracing::warn!(horizon = %view.snapshot().horizon(), "hits did not converge");
        }
        r.values
    });
    let cores = wants(Descriptor::Kcore).then(|| structure::core_numbers(adj));
    let nbr = (wants(Descriptor::NbrDegMean) || wants(Descriptor::NbrDegMax))
        .then(|| (0..n).map(|v| structure::nbr_stats(adj, v)).collect::<Vec<_>>());
    let reach = wants(Descriptor::TwoHopReach).then(|| {
        let mut stamp = vec![u32::MAX; n];
        (0..n)
            .map(|v| structure::reach2(adj, v, &mut stamp) as f64)
            .collect::<Vec<_>>()
    });

    spec.descriptors
        .iter()
        .map(|d| match d {
            Descriptor::InDegree => g.inn.iter().map(|x| x.len() as f64).collect(),
            Descriptor::OutDegree => g.out.iter().map(|x| x.len() as f64).collect(),
            Descriptor::TotalDegree => adj.iter().map(|x| x.len() as f64).collect(),
            Descriptor::Pagerank => pagerank.clone().unwrap_or_default(),
            Descriptor::Hub => hits.as_ref().map(|h| h.0.clone()).unwrap_or_default(),
            Descriptor::Authority => hits.as_ref().map(|h| h.1.clone()).unwrap_or_default(),
            Descriptor::Kcore => cores
                .as_ref()
                .map(|c| c.iter().map(|&k| k as f64).collect())
                .unwrap_or_default(),
            Descriptor::NbrDegMean => nbr
                .as_ref()
                .map(|s| s.iter().map(|x| x.0).collect())
                .unwrap_or_default(),
            Descriptor::NbrDegMax => nbr
                .as_ref()
                .map(|s| s.iter().map(|x| x.1 as f64).collect())
                .unwrap_or_default(),
            Descriptor::TwoHopReach => reach.clone().unwrap_or_default(),
        })
        .collect()
}

/// Rows for the nodes of `view` selected by `keep`, as `(dense index, values)`.
fn rows_from_view(
    view: &UndirectedView<'_>,
    spec: &DescriptorSpec,
    keep: impl Fn(usize) -> bool,
) -> Vec<(usize, Vec<f64>)> {
    let cols = snapshot_columns(view, spec);
    view.digraph
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, &idx)| keep(idx))
        .map(|(l, &idx)| (idx, cols.iter().map(|c| c[l]).collect()))
        .collect()
}

fn assemble(
    graph: &TemporalGraph,
    spec: &DescriptorSpec,
    mut rows: Vec<(usize, Vec<f64>)>,
    provenance: Provenance,
) -> Result<FeatureMatrix> {
    rows.sort_unstable_by_key(|(idx, _)| *idx);
    let ids = rows.iter().map(|(i, _)| graph.id_at(*i)).collect();
    let times = rows.iter().map(|(i, _)| graph.time_at(*i)).collect();
    let values = rows.into_iter().flat_map(|(_, v)| v).collect();
    let m = FeatureMatrix::new(ids, spec.base_columns(), values, provenance)?.with_timesteps(times)?;
    if spec.log1p {
        apply_log1p(&m, spec)
    } else {
        Ok(m)
    }
}

/// Causal descriptors: each node's row is computed on `G<=t(v)`.
///
/// Timesteps are processed in parallel; each snapshot is computed from
/// scratch and rows are merged in dense node order, so the result does not
/// depend on the thread count.
pub fn extract_causal(graph: &TemporalGraph, spec: &DescriptorSpec) -> Result<FeatureMatrix> {
    spec.validate()?;
    let per_step: Vec<Vec<(usize, Vec<f64>)>> = graph
        .timesteps()
        .into_par_iter()
        .map(|t: TimeStep| {
            let view = graph.snapshot_at(t).undirected();
            rows_from_view(&view, spec, |idx| graph.time_at(idx) == t)
        })
        .collect();
    assemble(
        graph,
        spec,
        per_step.into_iter().flatten().collect(),
        Provenance::Causal,
    )
}

/// Descriptors of every node on the full union graph (leaky baseline).
pub fn extract_full(graph: &TemporalGraph, spec: &DescriptorSpec) -> Result<FeatureMatrix> {
    spec.validate()?;
    let view = graph.full_view().undirected();
    let rows = rows_from_view(&view, spec, |_| true);
    assemble(graph, spec, rows, Provenance::Full)
}

/// Appends `log1p_<name>` for each degree- and reach-based descriptor column
/// present in `matrix`; originals are kept.
pub fn apply_log1p(matrix: &FeatureMatrix, spec: &DescriptorSpec) -> Result<FeatureMatrix> {
    let mut out = matrix.clone();
    for d in spec.descriptors.iter().filter(|d| d.is_log_target()) {
        let Some(c) = matrix.column_index(d.name()) else {
            continue;
        };
        let mut col = Vec::with_capacity(matrix.n_rows());
        for r in 0..matrix.n_rows() {
            let x = matrix.get(r, c);
            if x < 0.0 {
                return Err(Error::NegativeValue {
                    row: r,
                    node: matrix.row_ids()[r],
                    column: d.name().to_string(),
                    value: x,
                });
            }
            col.push(x.ln_1p());
        }
        out.push_column(format!("log1p_{}", d.name()), col)?;
    }
    Ok(out)
}
