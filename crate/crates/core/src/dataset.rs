//! Elliptic-format ingestion, label handling and chronological splits.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, TemporalGraph, TimeStep};
use crate::matrix::{csv_error, parse_finite, FeatureMatrix, Provenance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Licit,
    Illicit,
    Unknown,
}

impl Label {
    /// Accepts raw Elliptic codes (`1` illicit, `2` licit) and names.
    pub fn parse(s: &str) -> Option<Label> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "illicit" => Some(Label::Illicit),
            "2" | "licit" => Some(Label::Licit),
            "unknown" | "" => Some(Label::Unknown),
            _ => None,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Label::Illicit => Some(true),
            Label::Licit => Some(false),
            Label::Unknown => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub node: NodeId,
    pub t: TimeStep,
    pub label: Label,
}

#[derive(Clone, Debug)]
pub struct EllipticData {
    pub graph: TemporalGraph,
    /// Transaction attributes, rows ordered by `(timestep, node id)`.
    pub attributes: FeatureMatrix,
    /// One record per node (unknown labels included), ordered like `attributes`.
    pub records: Vec<LabeledRecord>,
}

impl EllipticData {
    /// Records usable for supervised learning.
    pub fn supervised(&self) -> Vec<LabeledRecord> {
        self.records
            .iter()
            .copied()
            .filter(|r| r.label != Label::Unknown)
            .collect()
    }
}

fn reader(path: &Path, has_headers: bool) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(has_headers).from_reader(file))
}

fn parse_id(field: &str) -> Option<u64> {
    field.trim().parse::<u64>().ok()
}

/// Loads features, edges and classes.
///
/// With `raw` set the features file is the header-less Elliptic layout
/// (`txId, timestep, attr...`) and attribute columns are named
/// `tx_feat_0..`. Nodes are inserted ordered by `(timestep, node id)` and
/// edges by `(src, dst)`, so the result is independent of file row order.
pub fn load_elliptic(features: &Path, edges: &Path, classes: &Path, raw: bool) -> Result<EllipticData> {
    let fname = features.display().to_string();
    let mut rdr = reader(features, !raw)?;
    let mut columns: Option<Vec<String>> = if raw {
        None
    } else {
        let h = rdr.headers().map_err(|e| csv_error(&fname, e))?;
        if h.len() < 2 {
            return Err(Error::Parse {
                file: fname.clone(),
                line: 1,
                message: "expected `node_id,time_step,...` header".into(),
            });
        }
        Some(h.iter().skip(2).map(|s| s.trim().to_string()).collect())
    };

    let mut rows: Vec<(TimeStep, NodeId, Vec<f64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(&fname, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Parse {
            file: fname.clone(),
            line,
            message,
        };
        if rec.len() < 2 {
            return Err(err("expected node id and timestep".into()));
        }
        let id = parse_id(&rec[0]).ok_or_else(|| err(format!("bad node id `{}`", &rec[0])))?;
        let t = rec[1]
            .trim()
            .parse::<u32>()
            .ok()
            .and_then(|t| TimeStep::new(t).ok())
            .ok_or_else(|| err(format!("bad timestep `{}`", &rec[1])))?;
        let cols = columns.get_or_insert_with(|| (0..rec.len() - 2).map(|i| format!("tx_feat_{i}")).collect());
        let mut vals = Vec::with_capacity(cols.len());
        for (i, f) in rec.iter().skip(2).enumerate() {
            let v =
                parse_finite(f).ok_or_else(|| err(format!("non-numeric attribute `{f}` in column `{}`", cols[i])))?;
            vals.push(v);
        }
        rows.push((t, NodeId(id), vals));
    }
    let columns = columns.unwrap_or_default();
    rows.sort_by_key(|a| (a.0, a.1));

    let mut graph = TemporalGraph::new();
    for (t, id, _) in &rows {
        graph.add_node(*id, *t)?;
    }

    let ename = edges.display().to_string();
    let mut edge_list = Vec::new();
    let mut rdr = reader(edges, false)?;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(&ename, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() < 2 {
            return Err(Error::Parse {
                file: ename.clone(),
                line,
                message: "expected `src_id,dst_id`".into(),
            });
        }
        match (parse_id(&rec[0]), parse_id(&rec[1])) {
            (Some(s), Some(d)) => edge_list.push((NodeId(s), NodeId(d))),
            // header row
            _ if i == 0 => {}
            _ => {
                return Err(Error::Parse {
                    file: ename.clone(),
                    line,
                    message: format!("bad edge `{},{}`", &rec[0], &rec[1]),
                })
            }
        }
    }
    edge_list.sort_unstable();
    for (s, d) in edge_list {
        graph.add_edge(s, d)?;
    }

    let cname = classes.display().to_string();
    let mut labels: HashMap<NodeId, Label> = HashMap::new();
    let mut rdr = reader(classes, false)?;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(&cname, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Parse {
            file: cname.clone(),
            line,
            message,
        };
        if rec.len() < 2 {
            return Err(err("expected `node_id,class`".into()));
        }
        let Some(id) = parse_id(&rec[0]) else {
            if i == 0 {
                continue;
            }
            return Err(err(format!("bad node id `{}`", &rec[0])));
        };
        let label = Label::parse(&rec[1]).ok_or_else(|| err(format!("bad class `{}`", &rec[1])))?;
        if graph.index_of(NodeId(id)).is_none() {
            return Err(Error::UnknownNode(NodeId(id)));
        }
        labels.insert(NodeId(id), label);
    }

    let records = rows
        .iter()
        .map(|(t, id, _)| LabeledRecord {
            node: *id,
            t: *t,
            label: labels.get(id).copied().unwrap_or(Label::Unknown),
        })
        .collect();
    let times = rows.iter().map(|r| r.0).collect();
    let ids = rows.iter().map(|r| r.1).collect();
    let values = rows.into_iter().flat_map(|r| r.2).collect();
    let attributes = FeatureMatrix::new(ids, columns, values, Provenance::Transaction)?.with_timesteps(times)?;
    Ok(EllipticData {
        graph,
        attributes,
        records,
    })
}

/// Chronological boundaries: train `<= train_end`, validation
/// `val_start..=val_end`, test `>= test_start`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_end: u32,
    pub val_start: u32,
    pub val_end: u32,
    pub test_start: u32,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_end: 34,
            val_start: 35,
            val_end: 41,
            test_start: 42,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitPart {
    Train,
    Validation,
    Test,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.train_end >= 1
            && self.train_end < self.val_start
            && self.val_start <= self.val_end
            && self.val_end < self.test_start
        {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "split boundaries must satisfy 1 <= train_end < val_start <= val_end < test_start, got {self:?}"
            )))
        }
    }

    pub fn route(&self, t: TimeStep) -> Option<SplitPart> {
        let t = t.get();
        if t <= self.train_end {
            Some(SplitPart::Train)
        } else if (self.val_start..=self.val_end).contains(&t) {
            Some(SplitPart::Validation)
        } else if t >= self.test_start {
            Some(SplitPart::Test)
        } else {
            None
        }
    }

    fn range(&self, part: SplitPart) -> String {
        match part {
            SplitPart::Train => format!("<= {}", self.train_end),
            SplitPart::Validation => format!("{}..={}", self.val_start, self.val_end),
            SplitPart::Test => format!(">= {}", self.test_start),
        }
    }
}

/// Transaction-only, graph-only, or hybrid feature set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureConfig {
    T,
    G,
    TG,
}

impl FeatureConfig {
    pub fn uses_attributes(self) -> bool {
        matches!(self, FeatureConfig::T | FeatureConfig::TG)
    }

    pub fn uses_graph(self) -> bool {
        matches!(self, FeatureConfig::G | FeatureConfig::TG)
    }
}

impl fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureConfig::T => "T",
            FeatureConfig::G => "G",
            FeatureConfig::TG => "TG",
        })
    }
}

impl FromStr for FeatureConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "T" => Ok(FeatureConfig::T),
            "G" => Ok(FeatureConfig::G),
            "TG" | "T+G" => Ok(FeatureConfig::TG),
            _ => Err(Error::invalid(format!("unknown feature configuration `{s}`"))),
        }
    }
}

/// Labelled rows of one period.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub matrix: FeatureMatrix,
    /// `true` = illicit.
    pub labels: Vec<bool>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitBundle {
    pub config: FeatureConfig,
    pub train: Split,
    pub validation: Split,
    pub test: Split,
}

impl SplitBundle {
    pub fn columns(&self) -> &[String] {
        self.train.matrix.columns()
    }
}

/// Routes labelled rows by timestep and assembles the feature matrices.
///
/// Unknown labels are dropped, rows are ordered by `(timestep, node id)`, and
/// the hybrid configuration lists attribute columns before graph columns.
/// Graph rows missing for a node are imputed with zeros.
pub fn make_splits(
    records: &[LabeledRecord],
    attributes: Option<&FeatureMatrix>,
    graph_features: Option<&FeatureMatrix>,
    spec: &SplitSpec,
    config: FeatureConfig,
) -> Result<SplitBundle> {
    spec.validate()?;
    if config.uses_attributes() && attributes.is_none() {
        return Err(Error::invalid(format!(
            "feature configuration {config} needs transaction attributes"
        )));
    }
    if config.uses_graph() && graph_features.is_none() {
        return Err(Error::invalid(format!(
            "feature configuration {config} needs graph features"
        )));
    }
    let mut parts: [Vec<LabeledRecord>; 3] = Default::default();
    for r in records.iter().filter(|r| r.label != Label::Unknown) {
        match spec.route(r.t) {
            Some(SplitPart::Train) => parts[0].push(*r),
            Some(SplitPart::Validation) => parts[1].push(*r),
            Some(SplitPart::Test) => parts[2].push(*r),
            None => {}
        }
    }
    let attr_index = attributes.map(FeatureMatrix::row_index);
    let build = |part: SplitPart, mut recs: Vec<LabeledRecord>| -> Result<Split> {
        if recs.is_empty() {
            return Err(Error::EmptySplit {
                split: match part {
                    SplitPart::Train => "train",
                    SplitPart::Validation => "validation",
                    SplitPart::Test => "test",
                },
                range: spec.range(part),
            });
        }
        recs.sort_by_key(|r| (r.t, r.node));
        let ids: Vec<NodeId> = recs.iter().map(|r| r.node).collect();
        let mut pieces = Vec::new();
        if config.uses_attributes() {
            let index = attr_index.as_ref().expect("checked above");
            if let Some(missing) = ids.iter().find(|id| !index.contains_key(id)) {
                return Err(Error::UnknownNode(*missing));
            }
            pieces.push(attributes.expect("checked above").gather(&ids));
        }
        if config.uses_graph() {
            pieces.push(graph_features.expect("checked above").gather(&ids));
        }
        let refs: Vec<&FeatureMatrix> = pieces.iter().collect();
        let matrix = FeatureMatrix::hconcat(&refs)?.with_timesteps(recs.iter().map(|r| r.t).collect())?;
        let labels = recs.iter().map(|r| r.label == Label::Illicit).collect();
        Ok(Split { matrix, labels })
    };
    let [train, validation, test] = parts;
    let bundle = SplitBundle {
        config,
        train: build(SplitPart::Train, train)?,
        validation: build(SplitPart::Validation, validation)?,
        test: build(SplitPart::Test, test)?,
    };
    for s in [&bundle.validation, &bundle.test] {
        if s.matrix.columns() != bundle.train.matrix.columns() {
            return Err(Error::SchemaMismatch("column schema differs between splits".into()));
        }
    }
    Ok(bundle)
}

/// Illicit / (illicit + licit) per timestep; timesteps without labelled rows
/// are omitted.
pub fn fraud_rate_by_timestep(records: &[LabeledRecord]) -> BTreeMap<TimeStep, f64> {
    let mut counts: BTreeMap<TimeStep, (usize, usize)> = BTreeMap::new();
    for r in records {
        if let Some(y) = r.label.as_bool() {
            let e = counts.entry(r.t).or_default();
            e.0 += y as usize;
            e.1 += 1;
        }
    }
    counts
        .into_iter()
        .map(|(t, (pos, n))| (t, pos as f64 / n as f64))
        .collect()
}

/// `(licit, illicit)` counts of labelled records whose timestep satisfies `keep`.
pub fn label_counts(records: &[LabeledRecord], keep: impl Fn(TimeStep) -> bool) -> (usize, usize) {
    records
        .iter()
        .filter(|r| keep(r.t))
        .fold((0, 0), |(l, i), r| match r.label {
            Label::Licit => (l + 1, i),
            Label::Illicit => (l, i + 1),
            Label::Unknown => (l, i),
        })
}
