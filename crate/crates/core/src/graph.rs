//! Communication graph and its structural attributes.

use std::collections::VecDeque;

use crate::error::{Result, SimError};
use crate::model::SensorDevice;

/// Undirected unit-disk graph over the alive devices.
///
/// Nodes are indexed `0..n` in ascending device-id order; `adjacency[i]`
/// holds sorted node indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NeighborGraph {
    ids: Vec<usize>,
    index: Vec<Option<usize>>,
    adjacency: Vec<Vec<usize>>,
}

impl NeighborGraph {
    /// Builds a graph directly from node-index edges; ids are `0..n`.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b && a < n && b < n {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in adjacency.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }
        Self {
            ids: (0..n).collect(),
            index: (0..n).map(Some).collect(),
            adjacency,
        }
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn index_of(&self, device_id: usize) -> Option<usize> {
        self.index.get(device_id).copied().flatten()
    }

    /// Neighbor device ids, ascending.
    pub fn neighbors(&self, device_id: usize) -> Result<Vec<usize>> {
        let i = self
            .index_of(device_id)
            .ok_or(SimError::UnknownDevice(device_id))?;
        Ok(self.adjacency[i].iter().map(|&j| self.ids[j]).collect())
    }

    pub fn degree_of(&self, device_id: usize) -> Result<usize> {
        self.index_of(device_id)
            .map(|i| self.adjacency[i].len())
            .ok_or(SimError::UnknownDevice(device_id))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Edge between two alive devices iff their distance is within `comm_range`.
pub fn build_graph(devices: &[SensorDevice], comm_range: f64) -> NeighborGraph {
    let mut alive: Vec<&SensorDevice> = devices.iter().filter(|d| d.is_alive()).collect();
    alive.sort_by_key(|d| d.id);

    let max_id = devices.iter().map(|d| d.id).max().map_or(0, |m| m + 1);
    let mut index = vec![None; max_id];
    for (i, d) in alive.iter().enumerate() {
        index[d.id] = Some(i);
    }

    let n = alive.len();
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if alive[i].position.distance(&alive[j].position) <= comm_range {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    // j is pushed in increasing order for both endpoints, so lists are sorted.

    NeighborGraph {
        ids: alive.iter().map(|d| d.id).collect(),
        index,
        adjacency,
    }
}

/// Brandes accumulation over unweighted shortest paths.
///
/// Returns, per node index, the sum over unordered pairs `{s, t}` of the
/// fraction of shortest `s`-`t` paths through the node.
pub fn betweenness_raw(graph: &NeighborGraph) -> Vec<f64> {
    let n = graph.n();
    let adj = graph.adjacency();
    let mut bc = vec![0.0; n];

    let mut stack = Vec::with_capacity(n);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![-1i64; n];
    let mut delta = vec![0.0f64; n];
    let mut queue = VecDeque::with_capacity(n);

    for s in 0..n {
        stack.clear();
        for p in preds.iter_mut() {
            p.clear();
        }
        sigma.fill(0.0);
        dist.fill(-1);
        delta.fill(0.0);

        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &adj[v] {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }

        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                bc[w] += delta[w];
            }
        }
    }

    // Each unordered pair was counted from both endpoints.
    bc.iter_mut().for_each(|b| *b /= 2.0);
    bc
}

/// Betweenness normalized by the `(n-1)(n-2)/2` pairs that exclude the node.
pub fn betweenness_all(graph: &NeighborGraph) -> Vec<f64> {
    let n = graph.n();
    if n < 3 {
        return vec![0.0; n];
    }
    let norm = ((n - 1) * (n - 2)) as f64 / 2.0;
    betweenness_raw(graph).into_iter().map(|b| b / norm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DeviceState, Point};

    fn device(id: usize, x: f64, y: f64) -> SensorDevice {
        SensorDevice {
            id,
            position: Point::new(x, y),
            energy: 0.5,
            state: DeviceState::Active,
            consumption_rate: 1e-4,
            degree: 0,
            betweenness: 0.0,
            open_request: None,
        }
    }

    #[test]
    fn edge_rule_is_inclusive_range() {
        let g = build_graph(&[device(0, 0.0, 0.0), device(1, 40.0, 0.0)], 50.0);
        assert_eq!(g.edge_count(), 1);
        let g = build_graph(&[device(0, 0.0, 0.0), device(1, 60.0, 0.0)], 50.0);
        assert_eq!(g.edge_count(), 0);
        let g = build_graph(&[device(0, 0.0, 0.0), device(1, 50.0, 0.0)], 50.0);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn three_in_a_row_make_a_path() {
        let devs = [device(0, 0.0, 0.0), device(1, 30.0, 0.0), device(2, 60.0, 0.0)];
        let g = build_graph(&devs, 50.0);
        assert_eq!(g.neighbors(0).unwrap(), vec![1]);
        assert_eq!(g.neighbors(1).unwrap(), vec![0, 2]);
        assert_eq!(g.neighbors(2).unwrap(), vec![1]);
        assert_eq!(g.degree_of(1).unwrap(), 2);
    }

    #[test]
    fn dead_devices_are_left_out() {
        let mut devs = vec![device(0, 0.0, 0.0), device(1, 30.0, 0.0), device(2, 60.0, 0.0)];
        devs[1].state = DeviceState::Dead;
        let g = build_graph(&devs, 50.0);
        assert_eq!(g.n(), 2);
        assert_eq!(g.edge_count(), 0);
        assert!(matches!(g.degree_of(1), Err(SimError::UnknownDevice(1))));
        assert_eq!(g.degree_of(2).unwrap(), 0);
    }

    #[test]
    fn degrees() {
        let isolated = NeighborGraph::from_edges(1, &[]);
        assert_eq!(isolated.degree_of(0).unwrap(), 0);
        let star = NeighborGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]);
        assert_eq!(star.degree_of(0).unwrap(), 3);
        assert!(star.degree_of(9).is_err());
    }

    #[test]
    fn analytic_betweenness() {
        let path = NeighborGraph::from_edges(3, &[(0, 1), (1, 2)]);
        assert_eq!(betweenness_all(&path), vec![0.0, 1.0, 0.0]);

        let star = NeighborGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]);
        assert_eq!(betweenness_all(&star), vec![1.0, 0.0, 0.0, 0.0]);

        let c4 = NeighborGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        for b in betweenness_all(&c4) {
            assert!((b - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_graphs_are_zero() {
        let g = NeighborGraph::from_edges(2, &[(0, 1)]);
        assert_eq!(betweenness_all(&g), vec![0.0, 0.0]);
        assert!(betweenness_all(&NeighborGraph::default()).is_empty());
    }

    #[test]
    fn disconnected_components_counted_separately() {
        // Two paths of three nodes: each center bridges one pair out of 10.
        let g = NeighborGraph::from_edges(6, &[(0, 1), (1, 2), (3, 4), (4, 5)]);
        let bc = betweenness_all(&g);
        assert!((bc[1] - 0.1).abs() < 1e-12);
        assert!((bc[4] - 0.1).abs() < 1e-12);
        assert_eq!(bc[0], 0.0);
    }
}
