//! Degree, core and neighbourhood descriptors.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{NodeId, UndirectedView};

use super::NodeScores;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degrees {
    pub in_degree: usize,
    pub out_degree: usize,
    /// Distinct undirected neighbours.
    pub total: usize,
}

/// In/out degree on the directed snapshot, total degree on its projection.
pub fn degrees(view: &UndirectedView<'_>, v: NodeId) -> Result<Degrees> {
    let l = view.local(v)?;
    Ok(Degrees {
        in_degree: view.digraph.inn[l].len(),
        out_degree: view.digraph.out[l].len(),
        total: view.adj[l].len(),
    })
}

/// Core number of every visible node.
pub fn kcore(view: &UndirectedView<'_>) -> NodeScores<usize> {
    let cores = core_numbers(&view.adj);
    NodeScores::new(view.node_ids().collect(), cores, true, 0)
}

pub fn neighbor_degree_stats(view: &UndirectedView<'_>, v: NodeId) -> Result<(f64, usize)> {
    Ok(nbr_stats(&view.adj, view.local(v)?))
}

pub fn two_hop_reach(view: &UndirectedView<'_>, v: NodeId) -> Result<usize> {
    let l = view.local(v)?;
    let mut stamp = vec![u32::MAX; view.adj.len()];
    Ok(reach2(&view.adj, l, &mut stamp))
}

/// Bucket-based min-degree peeling (Batagelj–Zaversnik).
pub(crate) fn core_numbers(adj: &[Vec<u32>]) -> Vec<usize> {
    let n = adj.len();
    let mut deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let max_deg = deg.iter().copied().max().unwrap_or(0);
    let mut bin = vec![0usize; max_deg + 1];
    for &d in &deg {
        bin[d] += 1;
    }
    let mut start = 0;
    for b in bin.iter_mut() {
        let count = *b;
        *b = start;
        start += count;
    }
    let mut pos = vec![0usize; n];
    let mut vert = vec![0usize; n];
    for v in 0..n {
        pos[v] = bin[deg[v]];
        vert[pos[v]] = v;
        bin[deg[v]] += 1;
    }
    for d in (1..=max_deg).rev() {
        bin[d] = bin[d - 1];
    }
    bin[0] = 0;
    for i in 0..n {
        let v = vert[i];
        for &u in &adj[v] {
            let u = u as usize;
            if deg[u] > deg[v] {
                let du = deg[u];
                let pu = pos[u];
                let pw = bin[du];
                let w = vert[pw];
                if u != w {
                    pos[u] = pw;
                    vert[pu] = w;
                    pos[w] = pu;
                    vert[pw] = u;
                }
                bin[du] += 1;
                deg[u] -= 1;
            }
        }
    }
    deg
}

pub(crate) fn nbr_stats(adj: &[Vec<u32>], v: usize) -> (f64, usize) {
    let nb = &adj[v];
    if nb.is_empty() {
        return (0.0, 0);
    }
    let mut sum = 0usize;
    let mut max = 0usize;
    for &u in nb {
        let d = adj[u as usize].len();
        sum += d;
        max = max.max(d);
    }
    (sum as f64 / nb.len() as f64, max)
}

/// `|{u != v : dist(v,u) <= 2}|`; `stamp` is scratch space of length `adj.len()`.
pub(crate) fn reach2(adj: &[Vec<u32>], v: usize, stamp: &mut [u32]) -> usize {
    let mark = v as u32;
    stamp[v] = mark;
    let mut count = 0;
    for &u in &adj[v] {
        if stamp[u as usize] != mark {
            stamp[u as usize] = mark;
            count += 1;
        }
    }
    for &u in &adj[v] {
        for &w in &adj[u as usize] {
            if stamp[w as usize] != mark {
                stamp[w as usize] = mark;
                count += 1;
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{TemporalGraph, TimeStep};

    fn graph(n: u64, edges: &[(u64, u64)]) -> TemporalGraph {
        let mut g = TemporalGraph::new();
        for i in 0..n {
            g.add_node(NodeId(i), TimeStep::new(1).unwrap()).unwrap();
        }
        for &(a, b) in edges {
            g.add_edge(NodeId(a), NodeId(b)).unwrap();
        }
        g
    }

    #[test]
    fn degrees_of_sink() {
        let g = graph(3, &[(0, 1), (2, 1)]);
        let u = g.full_view().undirected();
        let d = degrees(&u, NodeId(1)).unwrap();
        assert_eq!((d.in_degree, d.out_degree, d.total), (2, 0, 2));
    }

    #[test]
    fn isolated_node_is_all_zero() {
        let g = graph(2, &[]);
        let u = g.full_view().undirected();
        let d = degrees(&u, NodeId(0)).unwrap();
        assert_eq!((d.in_degree, d.out_degree, d.total), (0, 0, 0));
        assert_eq!(neighbor_degree_stats(&u, NodeId(0)).unwrap(), (0.0, 0));
        assert_eq!(two_hop_reach(&u, NodeId(0)).unwrap(), 0);
        assert_eq!(kcore(&u).get(NodeId(0)), Some(&0));
    }

    #[test]
    fn absent_node_is_an_error() {
        let mut g = graph(1, &[]);
        g.add_node(NodeId(9), TimeStep::new(3).unwrap()).unwrap();
        let u = g.snapshot_at(TimeStep::new(1).unwrap()).undirected();
        assert!(degrees(&u, NodeId(9)).is_err());
        assert!(degrees(&u, NodeId(77)).is_err());
    }

    #[test]
    fn triangle_and_path_cores() {
        let tri = graph(3, &[(0, 1), (1, 2), (2, 0)]);
        let u = tri.full_view().undirected();
        assert_eq!(kcore(&u).values, vec![2, 2, 2]);
        let path = graph(3, &[(0, 1), (1, 2)]);
        let u = path.full_view().undirected();
        assert_eq!(kcore(&u).values, vec![1, 1, 1]);
    }

    #[test]
    fn star_neighbor_stats() {
        let g = graph(4, &[(0, 1), (0, 2), (0, 3)]);
        let u = g.full_view().undirected();
        assert_eq!(neighbor_degree_stats(&u, NodeId(1)).unwrap(), (3.0, 3));
        assert_eq!(neighbor_degree_stats(&u, NodeId(0)).unwrap(), (1.0, 1));
    }

    #[test]
    fn path_two_hop() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let u = g.full_view().undirected();
        assert_eq!(two_hop_reach(&u, NodeId(0)).unwrap(), 2);
        assert_eq!(two_hop_reach(&u, NodeId(1)).unwrap(), 2);
    }
}
