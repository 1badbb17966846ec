use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::Market;

/// Vertex count above which exact sparsity is refused.
pub const EXACT_VERTEX_LIMIT: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SparsityMode {
    /// Minimum cut of every induced subgraph.
    #[default]
    Exact,
    /// Degeneracy of the multigraph: an upper bound on the exact value,
    /// since a minimum cut never exceeds a minimum degree.
    DegeneracyBound,
}

/// Smallest `m ≥ 1` such that every induced subgraph on at least two agents
/// has a cut into two non-empty sides crossed by at most `m` trades.
///
/// Trade directions are ignored and parallel trades counted with
/// multiplicity.
pub fn sparsity(market: &Market, mode: SparsityMode) -> Result<u32> {
    let edges: Vec<(usize, usize)> = market
        .trades()
        .iter()
        .map(|t| {
            (
                market.agent_index(t.buyer).expect("validated"),
                market.agent_index(t.seller).expect("validated"),
            )
        })
        .collect();
    sparsity_of_graph(market.num_agents(), &edges, mode)
}

/// [`sparsity`] for an undirected multigraph on vertices `0..n`.
pub fn sparsity_of_graph(n: usize, edges: &[(usize, usize)], mode: SparsityMode) -> Result<u32> {
    if let Some(&(a, b)) = edges.iter().find(|(a, b)| *a >= n || *b >= n) {
        return Err(Error::Domain(format!("edge ({a}, {b}) leaves the vertex range 0..{n}")));
    }
    let mut w = vec![vec![0u32; n]; n];
    for &(a, b) in edges {
        if a != b {
            w[a][b] += 1;
            w[b][a] += 1;
        }
    }
    let m = match mode {
        SparsityMode::Exact => {
            if n > EXACT_VERTEX_LIMIT {
                return Err(Error::Capacity {
                    what: "vertices for exact sparsity",
                    actual: n as u64,
                    limit: EXACT_VERTEX_LIMIT as u64,
                });
            }
            (0u32..1 << n)
                .into_par_iter()
                .filter(|s| s.count_ones() >= 2)
                .map(|s| {
                    let vs: Vec<usize> = (0..n).filter(|v| s & (1 << v) != 0).collect();
                    min_cut(&vs, &w)
                })
                .max()
                .unwrap_or(0)
        }
        SparsityMode::DegeneracyBound => degeneracy(&w),
    };
    Ok(m.max(1))
}

/// Stoer–Wagner global minimum cut of the subgraph induced by `vs`.
fn min_cut(vs: &[usize], w: &[Vec<u32>]) -> u32 {
    let n = vs.len();
    let mut g: Vec<Vec<u32>> = vs.iter().map(|&a| vs.iter().map(|&b| w[a][b]).collect()).collect();
    let mut alive: Vec<usize> = (0..n).collect();
    let mut best = u32::MAX;
    while alive.len() > 1 {
        let mut added = vec![false; n];
        let mut weight = vec![0u32; n];
        let mut prev = alive[0];
        let mut last = alive[0];
        for _ in 0..alive.len() {
            let next = *alive
                .iter()
                .filter(|&&v| !added[v])
                .max_by_key(|&&v| (weight[v], std::cmp::Reverse(v)))
                .expect("unadded vertex");
            added[next] = true;
            prev = last;
            last = next;
            for &v in &alive {
                if !added[v] {
                    weight[v] += g[next][v];
                }
            }
        }
        best = best.min(weight[last]);
        // merge `last` into `prev`
        for &v in &alive {
            g[prev][v] += g[last][v];
            g[v][prev] = g[prev][v];
        }
        g[prev][prev] = 0;
        alive.retain(|&v| v != last);
    }
    best
}

fn degeneracy(w: &[Vec<u32>]) -> u32 {
    let n = w.len();
    let mut deg: Vec<u32> = w.iter().map(|row| row.iter().sum()).collect();
    let mut removed = vec![false; n];
    let mut k = 0;
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !removed[v])
            .min_by_key(|&v| deg[v])
            .expect("vertex left");
        k = k.max(deg[v]);
        removed[v] = true;
        for u in 0..n {
            if !removed[u] {
                deg[u] -= w[v][u];
            }
        }
    }
    k
}
