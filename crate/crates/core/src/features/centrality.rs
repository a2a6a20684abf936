//! PageRank and HITS by power iteration on a directed snapshot.

use crate::error::{Error, Result};
use crate::graph::{LocalDigraph, SnapshotView};

use super::{DescriptorSpec, NodeScores};

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Iterated<T> {
    pub values: T,
    pub converged: bool,
    pub iterations: usize,
}

/// PageRank with uniform teleport and uniform redistribution of dangling
/// mass. Non-convergence is reported through [`NodeScores::converged`].
pub fn pagerank(view: &SnapshotView<'_>, spec: &DescriptorSpec) -> Result<NodeScores<f64>> {
    let g = view.local_digraph();
    if g.len() == 0 {
        return Err(Error::invalid("pagerank on an empty view"));
    }
    let r = pagerank_local(&g, spec.pagerank_damping, spec.pagerank_tol, spec.pagerank_max_iter);
    Ok(NodeScores::new(
        view.node_ids().collect(),
        r.values,
        r.converged,
        r.iterations,
    ))
}

/// Hub and authority scores, each L2-normalised; all zero without edges.
pub fn hits(view: &SnapshotView<'_>, spec: &DescriptorSpec) -> Result<NodeScores<(f64, f64)>> {
    let g = view.local_digraph();
    if g.len() == 0 {
        return Err(Error::invalid("hits on an empty view"));
    }
    let r = hits_local(&g, spec.hits_tol, spec.hits_max_iter);
    let (hub, auth) = r.values;
    Ok(NodeScores::new(
        view.node_ids().collect(),
        hub.into_iter().zip(auth).collect(),
        r.converged,
        r.iterations,
    ))
}

pub(crate) fn pagerank_local(g: &LocalDigraph, damping: f64, tol: f64, max_iter: usize) -> Iterated<Vec<f64>> {
    let n = g.len();
    let nf = n as f64;
    let out_deg: Vec<usize> = g.out.iter().map(Vec::len).collect();
    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut share = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut dangling = 0.0;
        for v in 0..n {
            if out_deg[v] == 0 {
                dangling += rank[v];
                share[v] = 0.0;
            } else {
                share[v] = rank[v] / out_deg[v] as f64;
            }
        }
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        let mut diff = 0.0;
        for v in 0..n {
            let mut s = 0.0;
            for &u in &g.inn[v] {
                s += share[u as usize];
            }
            next[v] = base + damping * s;
            diff += (next[v] - rank[v]).abs();
        }
        std::mem::swap(&mut rank, &mut next);
        if diff < tol {
            converged = true;
            break;
        }
    }
    let total: f64 = rank.iter().sum();
    for r in rank.iter_mut() {
        *r /= total;
    }
    Iterated {
        values: rank,
        converged,
        iterations,
    }
}

fn normalize_l2(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Returns `(hub, authority)`.
pub(crate) fn hits_local(g: &LocalDigraph, tol: f64, max_iter: usize) -> Iterated<(Vec<f64>, Vec<f64>)> {
    let n = g.len();
    if g.out.iter().all(Vec::is_empty) {
        return Iterated {
            values: (vec![0.0; n], vec![0.0; n]),
            converged: true,
            iterations: 0,
        };
    }
    let init = 1.0 / (n as f64).sqrt();
    let mut hub = vec![init; n];
    let mut auth = vec![init; n];
    let mut next_hub = vec![0.0; n];
    let mut next_auth = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        for (a, preds) in next_auth.iter_mut().zip(&g.inn) {
            *a = preds.iter().map(|&u| hub[u as usize]).sum();
        }
        normalize_l2(&mut next_auth);
        for (h, succs) in next_hub.iter_mut().zip(&g.out) {
            *h = succs.iter().map(|&v| next_auth[v as usize]).sum();
        }
        normalize_l2(&mut next_hub);
        let diff: f64 = next_hub
            .iter()
            .zip(&hub)
            .chain(next_auth.iter().zip(&auth))
            .map(|(a, b)| (a - b).abs())
            .sum();
        std::mem::swap(&mut hub, &mut next_hub);
        std::mem::swap(&mut auth, &mut next_auth);
        if diff < tol {
            converged = true;
            break;
        }
    }
    Iterated {
        values: (hub, auth),
        converged,
        iterations,
    }
}
