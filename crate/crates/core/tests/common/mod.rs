//! Oracles shared by the integration test targets.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeSet, VecDeque};

/// Pair dependencies by enumerating every shortest path explicitly.
pub fn brute_force_betweenness(n: usize, edges: &[(usize, usize)]) -> Vec<f64> {
    let mut adj = vec![BTreeSet::new(); n];
    for &(a, b) in edges {
        if a != b {
            adj[a].insert(b);
            adj[b].insert(a);
        }
    }
    let bfs = |s: usize| {
        let mut dist = vec![usize::MAX; n];
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        dist
    };
    let dists: Vec<Vec<usize>> = (0..n).map(bfs).collect();

    fn walk(
        u: usize,
        t: usize,
        path: &mut Vec<usize>,
        adj: &[BTreeSet<usize>],
        dist_t: &[usize],
        out: &mut Vec<Vec<usize>>,
    ) {
        if u == t {
            out.push(path.clone());
            return;
        }
        for &v in &adj[u] {
            if dist_t[v] != usize::MAX && dist_t[v] + 1 == dist_t[u] {
                path.push(v);
                walk(v, t, path, adj, dist_t, out);
                path.pop();
            }
        }
    }

    let mut bc = vec![0.0; n];
    for s in 0..n {
        for t in (s + 1)..n {
            if dists[s][t] == usize::MAX {
                continue;
            }
            let mut paths = Vec::new();
            walk(s, t, &mut vec![s], &adj, &dists[t], &mut paths);
            let total = paths.len() as f64;
            for v in 0..n {
                if v == s || v == t {
                    continue;
                }
                let through = paths.iter().filter(|p| p.contains(&v)).count() as f64;
                bc[v] += through / total;
            }
        }
    }
    if n < 3 {
        return vec![0.0; n];
    }
    let norm = ((n - 1) * (n - 2)) as f64 / 2.0;
    bc.iter().map(|b| b / norm).collect()
}

/// Deterministic Fisher-Yates shuffle driven by a 64-bit LCG.
pub fn shuffle<T>(items: &mut [T], seed: u64) {
    let mut s = seed;
    for i in (1..items.len()).rev() {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        items.swap(i, (s >> 33) as usize % (i + 1));
    }
}
