//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fraudkit::graph::{NodeId, TemporalGraph, TimeStep};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Node list `(id, timestep)` plus directed edge list.
#[derive(Clone, Debug)]
pub struct RawGraph {
    pub nodes: Vec<(u64, u32)>,
    pub edges: Vec<(u64, u64)>,
}

impl RawGraph {
    pub fn build(&self) -> TemporalGraph {
        let mut g = TemporalGraph::new();
        for &(id, t) in &self.nodes {
            g.add_node(NodeId(id), TimeStep::new(t).unwrap()).unwrap();
        }
        for &(a, b) in &self.edges {
            g.add_edge(NodeId(a), NodeId(b)).unwrap();
        }
        g
    }

    pub fn time_of(&self) -> HashMap<u64, u32> {
        self.nodes.iter().copied().collect()
    }

    /// Nodes with `t <= horizon` and the distinct, non-loop edges among them.
    pub fn visible(&self, horizon: u32) -> (Vec<u64>, Vec<(u64, u64)>) {
        let t = self.time_of();
        let mut nodes: Vec<u64> = self.nodes.iter().filter(|n| n.1 <= horizon).map(|n| n.0).collect();
        nodes.sort_unstable();
        let edges: BTreeSet<(u64, u64)> = self
            .edges
            .iter()
            .copied()
            .filter(|&(a, b)| a != b && t[&a] <= horizon && t[&b] <= horizon)
            .collect();
        (nodes, edges.into_iter().collect())
    }
}

/// Random digraph with `n` nodes spread over `timesteps`; ids are shuffled
/// so dense order differs from id order. Duplicate edges and self-loop
/// attempts are included on purpose.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, timesteps: u32, p: f64) -> RawGraph {
    let mut ids: Vec<u64> = (0..n as u64).map(|i| i * 7 + 3).collect();
    rand::seq::SliceRandom::shuffle(&mut ids[..], rng);
    let nodes: Vec<(u64, u32)> = ids.iter().map(|&id| (id, rng.gen_range(1..=timesteps))).collect();
    let mut edges = Vec::new();
    for &(a, _) in &nodes {
        for &(b, _) in &nodes {
            if a != b && rng.gen_bool(p) {
                edges.push((a, b));
                if rng.gen_bool(0.05) {
                    edges.push((a, b));
                }
            }
        }
        if rng.gen_bool(0.02) {
            edges.push((a, a));
        }
    }
    RawGraph { nodes, edges }
}

/// Brute-force descriptor values for one view, by node id.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleRow {
    pub in_degree: f64,
    pub out_degree: f64,
    pub total_degree: f64,
    pub pagerank: f64,
    pub hub: f64,
    pub authority: f64,
    pub kcore: f64,
    pub nbr_deg_mean: f64,
    pub nbr_deg_max: f64,
    pub two_hop_reach: f64,
}

impl OracleRow {
    /// Values in the default descriptor column order.
    pub fn values(&self) -> [f64; 10] {
        [
            self.in_degree,
            self.out_degree,
            self.total_degree,
            self.pagerank,
            self.hub,
            self.authority,
            self.kcore,
            self.nbr_deg_mean,
            self.nbr_deg_max,
            self.two_hop_reach,
        ]
    }
}

pub fn undirected(nodes: &[u64], edges: &[(u64, u64)]) -> BTreeMap<u64, BTreeSet<u64>> {
    let mut adj: BTreeMap<u64, BTreeSet<u64>> = nodes.iter().map(|&v| (v, BTreeSet::new())).collect();
    for &(a, b) in edges {
        adj.get_mut(&a).unwrap().insert(b);
        adj.get_mut(&b).unwrap().insert(a);
    }
    adj
}

/// Core numbers by repeated peeling: `core(v)` is the largest `k` for which
/// `v` survives removal of every vertex of degree `< k`.
pub fn peel_cores(adj: &BTreeMap<u64, BTreeSet<u64>>) -> BTreeMap<u64, usize> {
    let mut core: BTreeMap<u64, usize> = adj.keys().map(|&v| (v, 0)).collect();
    for k in 1.. {
        let mut alive: BTreeSet<u64> = adj.keys().copied().collect();
        loop {
            let drop: Vec<u64> = alive
                .iter()
                .copied()
                .filter(|v| adj[v].iter().filter(|u| alive.contains(u)).count() < k)
                .collect();
            if drop.is_empty() {
                break;
            }
            for v in drop {
                alive.remove(&v);
            }
        }
        if alive.is_empty() {
            break;
        }
        for v in alive {
            core.insert(v, k);
        }
    }
    core
}

pub fn bfs2(adj: &BTreeMap<u64, BTreeSet<u64>>, v: u64) -> usize {
    let mut dist: BTreeMap<u64, usize> = BTreeMap::from([(v, 0)]);
    let mut frontier = vec![v];
    for d in 1..=2 {
        let mut next = Vec::new();
        for u in frontier {
            for &w in &adj[&u] {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(w) {
                    e.insert(d);
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    dist.len() - 1
}

/// Dense power iteration run to a much tighter tolerance than the library.
pub fn dense_pagerank(nodes: &[u64], edges: &[(u64, u64)], d: f64) -> BTreeMap<u64, f64> {
    let n = nodes.len();
    let pos: HashMap<u64, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut m = vec![vec![0.0f64; n]; n];
    let mut outdeg = vec![0usize; n];
    for &(a, _) in edges {
        outdeg[pos[&a]] += 1;
    }
    for &(a, b) in edges {
        m[pos[&b]][pos[&a]] = 1.0 / outdeg[pos[&a]] as f64;
    }
    let mut r = vec![1.0 / n as f64; n];
    for _ in 0..10_000 {
        let dangling: f64 = (0..n).filter(|&i| outdeg[i] == 0).map(|i| r[i]).sum();
        let next: Vec<f64> = (0..n)
            .map(|i| (1.0 - d) / n as f64 + d * (dangling / n as f64 + (0..n).map(|j| m[i][j] * r[j]).sum::<f64>()))
            .collect();
        let diff: f64 = next.iter().zip(&r).map(|(a, b)| (a - b).abs()).sum();
        r = next;
        if diff < 1e-14 {
            break;
        }
    }
    let s: f64 = r.iter().sum();
    nodes.iter().zip(r).map(|(&v, x)| (v, x / s)).collect()
}

fn unit(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Dense `a = A^T h`, `h = A a` iteration from the uniform unit vector,
/// stopping once the combined L1 change drops below `tol`.
pub fn dense_hits(nodes: &[u64], edges: &[(u64, u64)], tol: f64, max_iter: usize) -> BTreeMap<u64, (f64, f64)> {
    let n = nodes.len();
    let pos: HashMap<u64, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut a = vec![vec![0.0f64; n]; n];
    for &(x, y) in edges {
        a[pos[&x]][pos[&y]] = 1.0;
    }
    if edges.is_empty() {
        return nodes.iter().map(|&v| (v, (0.0, 0.0))).collect();
    }
    let mut hub = vec![1.0 / (n as f64).sqrt(); n];
    let mut auth = hub.clone();
    for _ in 0..max_iter {
        let mut na: Vec<f64> = (0..n).map(|j| (0..n).map(|i| a[i][j] * hub[i]).sum()).collect();
        unit(&mut na);
        let mut nh: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[i][j] * na[j]).sum()).collect();
        unit(&mut nh);
        let diff: f64 = nh
            .iter()
            .zip(&hub)
            .chain(na.iter().zip(&auth))
            .map(|(x, y)| (x - y).abs())
            .sum();
        hub = nh;
        auth = na;
        if diff < tol {
            break;
        }
    }
    nodes.iter().enumerate().map(|(i, &v)| (v, (hub[i], auth[i]))).collect()
}

/// HITS run to its limit, for comparison with converged library results.
pub fn hits_limit(nodes: &[u64], edges: &[(u64, u64)]) -> BTreeMap<u64, (f64, f64)> {
    dense_hits(nodes, edges, 1e-14, 20_000)
}

/// All descriptors of every visible node of `G<=horizon`, computed from the
/// edge list alone. HITS follows the stopping rule `(hits_tol, hits_max_iter)`.
pub fn oracle_view(g: &RawGraph, horizon: u32, spec: &fraudkit::features::DescriptorSpec) -> BTreeMap<u64, OracleRow> {
    let (nodes, edges) = g.visible(horizon);
    let adj = undirected(&nodes, &edges);
    let cores = peel_cores(&adj);
    let pr = dense_pagerank(&nodes, &edges, spec.pagerank_damping);
    let hits = dense_hits(&nodes, &edges, spec.hits_tol, spec.hits_max_iter);
    nodes
        .iter()
        .map(|&v| {
            let degs: Vec<usize> = adj[&v].iter().map(|u| adj[u].len()).collect();
            let row = OracleRow {
                in_degree: edges.iter().filter(|e| e.1 == v).count() as f64,
                out_degree: edges.iter().filter(|e| e.0 == v).count() as f64,
                total_degree: adj[&v].len() as f64,
                pagerank: pr[&v],
                hub: hits[&v].0,
                authority: hits[&v].1,
                kcore: cores[&v] as f64,
                nbr_deg_mean: if degs.is_empty() {
                    0.0
                } else {
                    degs.iter().sum::<usize>() as f64 / degs.len() as f64
                },
                nbr_deg_max: degs.iter().copied().max().unwrap_or(0) as f64,
                two_hop_reach: bfs2(&adj, v) as f64,
            };
            (v, row)
        })
        .collect()
}

/// Pairwise ROC-AUC: P(score_pos > score_neg) + 0.5 P(tie).
pub fn auc_pairs(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Step-sum AP with precision and recall recounted at every distinct score.
pub fn ap_bruteforce(scores: &[f64], labels: &[bool]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let pos = labels.iter().filter(|&&y| y).count() as f64;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for t in thresholds {
        let tp = scores.iter().zip(labels).filter(|(&s, &y)| s >= t && y).count() as f64;
        let k = scores.iter().filter(|&&s| s >= t).count() as f64;
        let recall = tp / pos;
        ap += (recall - prev_recall) * (tp / k);
        prev_recall = recall;
    }
    ap
}

/// Row `i` is in the top `k` iff fewer than `k` rows outrank it (higher
/// score, or equal score and smaller id).
pub fn precision_at_k_ranks(scores: &[f64], labels: &[bool], ids: &[u64], k: usize) -> f64 {
    let n = scores.len();
    let mut hits = 0;
    for i in 0..n {
        let better = (0..n)
            .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && ids[j] < ids[i]))
            .count();
        if better < k && labels[i] {
            hits += 1;
        }
    }
    hits as f64 / k as f64
}

/// Least-squares monotone fit by the min-max formula over tie-pooled
/// groups: `f_i = max_{j<=i} min_{k>=i} mean(y[j..=k])`.
pub fn isotonic_minmax(scores: &[f64], labels: &[bool]) -> BTreeMap<u64, f64> {
    let mut groups: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for (&s, &y) in scores.iter().zip(labels) {
        let e = groups.entry(ordered(s)).or_default();
        e.0 += 1.0;
        e.1 += y as u8 as f64;
    }
    let g: Vec<(u64, f64, f64)> = groups.into_iter().map(|(k, (w, s))| (k, w, s)).collect();
    let m = g.len();
    (0..m)
        .map(|i| {
            let mut best = f64::NEG_INFINITY;
            for j in 0..=i {
                let mut inner = f64::INFINITY;
                for k in i..m {
                    let w: f64 = g[j..=k].iter().map(|x| x.1).sum();
                    let s: f64 = g[j..=k].iter().map(|x| x.2).sum();
                    inner = inner.min(s / w);
                }
                best = best.max(inner);
            }
            (g[i].0, best)
        })
        .collect()
}

/// Order-preserving key for non-negative floats.
pub fn ordered(x: f64) -> u64 {
    assert!(x >= 0.0);
    x.to_bits()
}

/// Layout of a synthetic Elliptic-like dataset.
#[derive(Clone, Debug)]
pub struct SyntheticSpec {
    pub timesteps: u32,
    pub nodes_per_step: usize,
    pub n_attrs: usize,
    pub illicit_rate: f64,
    pub unknown_rate: f64,
    /// Allow edges to nodes of earlier timesteps.
    pub cross_time: bool,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            timesteps: 9,
            nodes_per_step: 60,
            n_attrs: 4,
            illicit_rate: 0.15,
            unknown_rate: 0.2,
            cross_time: true,
            seed: 1,
        }
    }
}

pub struct DatasetFiles {
    pub features: PathBuf,
    pub edges: PathBuf,
    pub classes: PathBuf,
}

/// Writes features/edges/classes CSVs. Attribute `a0` carries the label
/// signal; illicit nodes also emit more edges.
pub fn write_synthetic(dir: &Path, spec: &SyntheticSpec) -> DatasetFiles {
    let mut r = rng(spec.seed);
    let mut nodes: Vec<(u64, u32, bool, bool)> = Vec::new();
    for t in 1..=spec.timesteps {
        for i in 0..spec.nodes_per_step {
            let id = 100_000 + t as u64 * 1000 + i as u64;
            let illicit = r.gen_bool(spec.illicit_rate);
            let unknown = r.gen_bool(spec.unknown_rate);
            nodes.push((id, t, illicit, unknown));
        }
    }
    let mut features = String::from("node_id,time_step");
    for a in 0..spec.n_attrs {
        let _ = write!(features, ",a{a}");
    }
    features.push('\n');
    for &(id, t, illicit, _) in &nodes {
        let _ = write!(features, "{id},{t}");
        for a in 0..spec.n_attrs {
            let noise: f64 = (0..3).map(|_| r.gen::<f64>()).sum::<f64>() - 1.5;
            let v = if a == 0 && illicit { noise + 2.0 } else { noise };
            let _ = write!(features, ",{v}");
        }
        features.push('\n');
    }
    let mut edges = String::from("txId1,txId2\n");
    for (k, &(id, t, illicit, _)) in nodes.iter().enumerate() {
        let fanout = if illicit {
            r.gen_range(3..=5)
        } else {
            r.gen_range(0..=2)
        };
        for _ in 0..fanout {
            let lo = if spec.cross_time && t > 1 {
                (t as usize - 2) * spec.nodes_per_step
            } else {
                (t as usize - 1) * spec.nodes_per_step
            };
            let hi = t as usize * spec.nodes_per_step;
            let j = r.gen_range(lo..hi);
            if j != k {
                let _ = writeln!(edges, "{id},{}", nodes[j].0);
            }
        }
    }
    let mut classes = String::from("txId,class\n");
    for &(id, _, illicit, unknown) in &nodes {
        let c = if unknown {
            "unknown"
        } else if illicit {
            "1"
        } else {
            "2"
        };
        let _ = writeln!(classes, "{id},{c}");
    }
    let files = DatasetFiles {
        features: dir.join("features.csv"),
        edges: dir.join("edges.csv"),
        classes: dir.join("classes.csv"),
    };
    std::fs::write(&files.features, features).unwrap();
    std::fs::write(&files.edges, edges).unwrap();
    std::fs::write(&files.classes, classes).unwrap();
    files
}

/// Split boundaries matching the default nine-step synthetic layout.
pub const SYNTHETIC_SPLIT: &str = r#"{"train_end": 5, "val_start": 6, "val_end": 7, "test_start": 8}"#;

/// Pipeline config JSON for a synthetic dataset.
pub fn synthetic_config(files: &DatasetFiles, n_trees: usize, extra: &str) -> String {
    format!(
        r#"{{
  "inputs": {{"features": {:?}, "edges": {:?}, "classes": {:?}}},
  "split": {SYNTHETIC_SPLIT},
  "train": {{"n_trees": {n_trees}}},
  "metrics": {{"precision_at_k": [10, 20], "importance_repeats": 2}}{extra}
}}"#,
        files.features.display().to_string(),
        files.edges.display().to_string(),
        files.classes.display().to_string(),
    )
}
