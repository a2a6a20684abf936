//! Directed temporal transaction graph with historical snapshot views.
//!
//! Nodes carry the timestep at which they appear; every edge is observed at
//! the later of its two endpoint timesteps. A [`SnapshotView`] is a borrowed
//! filter over the immutable base graph exposing `G<=t`, and an
//! [`UndirectedView`] is the symmetric projection of such a view.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// External transaction identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Positive timestep index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeStep(u32);

impl TimeStep {
    pub fn new(t: u32) -> Result<Self> {
        if t == 0 {
            return Err(Error::invalid("timesteps start at 1"));
        }
        Ok(TimeStep(t))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for TimeStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A stored directed edge between dense node indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub etime: TimeStep,
}

#[derive(Clone, Debug, Default)]
pub struct TemporalGraph {
    ids: Vec<NodeId>,
    times: Vec<TimeStep>,
    index: HashMap<NodeId, usize>,
    edges: Vec<Edge>,
    edge_keys: HashSet<(usize, usize)>,
    // (neighbor, etime) in edge insertion order
    out_adj: Vec<Vec<(u32, TimeStep)>>,
    in_adj: Vec<Vec<(u32, TimeStep)>>,
    self_loops: usize,
    duplicate_edges: usize,
}

impl TemporalGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a node; dense indices follow insertion order.
    pub fn add_node(&mut self, id: NodeId, t: TimeStep) -> Result<usize> {
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateNode(id));
        }
        let idx = self.ids.len();
        self.ids.push(id);
        self.times.push(t);
        self.index.insert(id, idx);
        self.out_adj.push(Vec::new());
        self.in_adj.push(Vec::new());
        Ok(idx)
    }

    /// Adds `src -> dst`. Duplicates are ignored and self-loops are dropped
    /// with a counted warning.
    pub fn add_edge(&mut self, src: NodeId, dst: NodeId) -> Result<()> {
        let s = self.index_of(src).ok_or(Error::UnknownNode(src))?;
        let d = self.index_of(dst).ok_or(Error::UnknownNode(dst))?;
        if s == d {
            self.self_loops += 1;
            tracing::warn!(node = %src, "self-loop dropped");
            return Ok(());
        }
        if !self.edge_keys.insert((s, d)) {
            self.duplicate_edges += 1;
            return Ok(());
        }
        let etime = self.times[s].max(self.times[d]);
        self.edges.push(Edge { src: s, dst: d, etime });
        self.out_adj[s].push((d as u32, etime));
        self.in_adj[d].push((s as u32, etime));
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn self_loop_warnings(&self) -> usize {
        self.self_loops
    }

    pub fn duplicate_edges(&self) -> usize {
        self.duplicate_edges
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn id_at(&self, idx: usize) -> NodeId {
        self.ids[idx]
    }

    pub fn time_at(&self, idx: usize) -> TimeStep {
        self.times[idx]
    }

    pub fn timestep(&self, id: NodeId) -> Option<TimeStep> {
        self.index_of(id).map(|i| self.times[i])
    }

    /// External ids in dense-index order.
    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn max_timestep(&self) -> Option<TimeStep> {
        self.times.iter().copied().max()
    }

    /// Distinct node timesteps in ascending order.
    pub fn timesteps(&self) -> Vec<TimeStep> {
        let mut ts: Vec<TimeStep> = self.times.clone();
        ts.sort_unstable();
        ts.dedup();
        ts
    }

    /// Historical view `G<=t`.
    pub fn snapshot_at(&self, horizon: TimeStep) -> SnapshotView<'_> {
        SnapshotView { graph: self, horizon }
    }

    /// View over the whole graph.
    pub fn full_view(&self) -> SnapshotView<'_> {
        SnapshotView {
            graph: self,
            horizon: self.max_timestep().unwrap_or(TimeStep(1)),
        }
    }
}

/// Read-only filter over a [`TemporalGraph`]: nodes with timestep <= horizon
/// and edges with etime <= horizon.
#[derive(Clone, Copy, Debug)]
pub struct SnapshotView<'g> {
    graph: &'g TemporalGraph,
    horizon: TimeStep,
}

impl<'g> SnapshotView<'g> {
    pub fn graph(&self) -> &'g TemporalGraph {
        self.graph
    }

    pub fn horizon(&self) -> TimeStep {
        self.horizon
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.graph
            .index_of(id)
            .is_some_and(|i| self.graph.times[i] <= self.horizon)
    }

    pub fn contains_index(&self, idx: usize) -> bool {
        self.graph.times[idx] <= self.horizon
    }

    /// Dense indices of visible nodes, in insertion order.
    pub fn node_indices(&self) -> impl Iterator<Item = usize> + 'g {
        let h = self.horizon;
        self.graph
            .times
            .iter()
            .enumerate()
            .filter(move |(_, &t)| t <= h)
            .map(|(i, _)| i)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + 'g {
        let g = self.graph;
        self.node_indices().map(move |i| g.ids[i])
    }

    pub fn node_count(&self) -> usize {
        self.graph.times.iter().filter(|&&t| t <= self.horizon).count()
    }

    pub fn edges(&self) -> impl Iterator<Item = &'g Edge> + 'g {
        let h = self.horizon;
        self.graph.edges.iter().filter(move |e| e.etime <= h)
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn out_neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + 'g {
        let h = self.horizon;
        self.graph.out_adj[idx]
            .iter()
            .filter(move |(_, t)| *t <= h)
            .map(|&(n, _)| n as usize)
    }

    pub fn in_neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + 'g {
        let h = self.horizon;
        self.graph.in_adj[idx]
            .iter()
            .filter(move |(_, t)| *t <= h)
            .map(|&(n, _)| n as usize)
    }

    pub fn undirected(&self) -> UndirectedView<'g> {
        undirected_projection(*self)
    }

    pub(crate) fn local_digraph(&self) -> LocalDigraph {
        LocalDigraph::build(self)
    }
}

const ABSENT: u32 = u32::MAX;

/// Visible nodes of a snapshot renumbered `0..k`, with directed adjacency.
#[derive(Clone, Debug)]
pub(crate) struct LocalDigraph {
    /// Dense graph index of each local node.
    pub nodes: Vec<usize>,
    /// Dense graph index -> local index, `ABSENT` if not visible.
    pub local: Vec<u32>,
    pub out: Vec<Vec<u32>>,
    pub inn: Vec<Vec<u32>>,
}

impl LocalDigraph {
    fn build(view: &SnapshotView<'_>) -> Self {
        let g = view.graph;
        let nodes: Vec<usize> = view.node_indices().collect();
        let mut local = vec![ABSENT; g.node_count()];
        for (l, &i) in nodes.iter().enumerate() {
            local[i] = l as u32;
        }
        let out = nodes
            .iter()
            .map(|&i| view.out_neighbors(i).map(|n| local[n]).collect())
            .collect();
        let inn = nodes
            .iter()
            .map(|&i| view.in_neighbors(i).map(|n| local[n]).collect())
            .collect();
        LocalDigraph { nodes, local, out, inn }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn local_of(&self, idx: usize) -> Option<usize> {
        match self.local.get(idx) {
            Some(&l) if l != ABSENT => Some(l as usize),
            _ => None,
        }
    }
}

/// Symmetric projection of a snapshot: `u - v` iff `u -> v` or `v -> u`.
#[derive(Clone, Debug)]
pub struct UndirectedView<'g> {
    view: SnapshotView<'g>,
    pub(crate) digraph: LocalDigraph,
    /// Local symmetric adjacency, ascending and deduplicated.
    pub(crate) adj: Vec<Vec<u32>>,
}

pub fn undirected_projection(view: SnapshotView<'_>) -> UndirectedView<'_> {
    let digraph = view.local_digraph();
    let adj = digraph
        .out
        .iter()
        .zip(&digraph.inn)
        .map(|(o, i)| {
            let mut nb: Vec<u32> = o.iter().chain(i.iter()).copied().collect();
            nb.sort_unstable();
            nb.dedup();
            nb
        })
        .collect();
    UndirectedView { view, digraph, adj }
}

impl<'g> UndirectedView<'g> {
    pub fn snapshot(&self) -> SnapshotView<'g> {
        self.view
    }

    pub fn node_count(&self) -> usize {
        self.digraph.len()
    }

    /// Visible external ids in insertion order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.digraph.nodes.iter().map(|&i| self.view.graph.ids[i])
    }

    pub(crate) fn local(&self, id: NodeId) -> Result<usize> {
        self.view
            .graph
            .index_of(id)
            .and_then(|i| self.digraph.local_of(i))
            .ok_or(Error::UnknownNode(id))
    }

    pub fn degree(&self, id: NodeId) -> Result<usize> {
        Ok(self.adj[self.local(id)?].len())
    }

    pub fn neighbors(&self, id: NodeId) -> Result<Vec<NodeId>> {
        let l = self.local(id)?;
        let g = self.view.graph;
        Ok(self.adj[l]
            .iter()
            .map(|&n| g.ids[self.digraph.nodes[n as usize]])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(x: u32) -> TimeStep {
        TimeStep::new(x).unwrap()
    }

    #[test]
    fn add_node_counts_and_rejects_duplicates() {
        let mut g = TemporalGraph::new();
        g.add_node(NodeId(7), t(3)).unwrap();
        assert_eq!(g.node_count(), 1);
        match g.add_node(NodeId(7), t(4)) {
            Err(Error::DuplicateNode(NodeId(7))) => {}
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn dense_indices_follow_insertion_order() {
        let mut g = TemporalGraph::new();
        for i in 0..1000u64 {
            let idx = g.add_node(NodeId(5000 - i), t(1 + (i % 7) as u32)).unwrap();
            assert_eq!(idx, i as usize);
        }
        assert_eq!(g.node_count(), 1000);
        assert_eq!(g.id_at(999), NodeId(4001));
    }

    #[test]
    fn zero_timestep_rejected() {
        assert!(TimeStep::new(0).is_err());
    }

    #[test]
    fn edge_time_is_max_of_endpoints() {
        let mut g = TemporalGraph::new();
        g.add_node(NodeId(1), t(2)).unwrap();
        g.add_node(NodeId(2), t(5)).unwrap();
        g.add_edge(NodeId(1), NodeId(2)).unwrap();
        assert_eq!(g.edges()[0].etime, t(5));
        g.add_edge(NodeId(1), NodeId(2)).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.duplicate_edges(), 1);
    }

    #[test]
    fn self_loop_is_dropped_and_counted() {
        let mut g = TemporalGraph::new();
        g.add_node(NodeId(1), t(1)).unwrap();
        g.add_edge(NodeId(1), NodeId(1)).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.self_loop_warnings(), 1);
    }

    #[test]
    fn unknown_endpoint_is_named() {
        let mut g = TemporalGraph::new();
        g.add_node(NodeId(1), t(1)).unwrap();
        let err = g.add_edge(NodeId(1), NodeId(99)).unwrap_err();
        assert!(matches!(err, Error::UnknownNode(NodeId(99))));
        assert!(err.to_string().contains("99"));
    }

    #[test]
    fn snapshot_filters_nodes_and_edges() {
        let mut g = TemporalGraph::new();
        for (id, ts) in [(1, 1), (2, 2), (3, 3)] {
            g.add_node(NodeId(id), t(ts)).unwrap();
        }
        g.add_edge(NodeId(1), NodeId(2)).unwrap();
        g.add_edge(NodeId(2), NodeId(3)).unwrap();
        let s = g.snapshot_at(t(2));
        assert_eq!(s.node_ids().collect::<Vec<_>>(), vec![NodeId(1), NodeId(2)]);
        assert_eq!(s.edge_count(), 1);
        assert!(!s.contains(NodeId(3)));
        let full = g.snapshot_at(t(3));
        assert_eq!(full.edge_count(), g.edge_count());
        // beyond the last timestep is the full graph
        assert_eq!(g.snapshot_at(t(100)).edge_count(), 2);
    }

    #[test]
    fn projection_dedups_reciprocal_edges() {
        let mut g = TemporalGraph::new();
        g.add_node(NodeId(1), t(1)).unwrap();
        g.add_node(NodeId(2), t(1)).unwrap();
        g.add_edge(NodeId(1), NodeId(2)).unwrap();
        g.add_edge(NodeId(2), NodeId(1)).unwrap();
        let u = g.full_view().undirected();
        assert_eq!(u.degree(NodeId(1)).unwrap(), 1);
    }

    #[test]
    fn star_projection_degrees() {
        let mut g = TemporalGraph::new();
        for id in 0..4 {
            g.add_node(NodeId(id), t(1)).unwrap();
        }
        for leaf in 1..4 {
            g.add_edge(NodeId(0), NodeId(leaf)).unwrap();
        }
        let u = g.full_view().undirected();
        assert_eq!(u.degree(NodeId(0)).unwrap(), 3);
        assert_eq!(u.degree(NodeId(1)).unwrap(), 1);
    }
}
