//! Dinic max-flow on a directed graph with `f64` capacities.
//!
//! Exact whenever capacities are dyadic rationals of moderate size (every
//! partial sum is then representable). The returned cut is the *maximal*
//! source side: the complement of the nodes that can still reach the sink in
//! the final residual graph. That choice is unique, so cuts are deterministic.

use std::collections::VecDeque;

#[derive(Clone, Copy, Debug)]
struct Arc {
    to: usize,
    cap: f64,
}

#[derive(Clone, Debug, Default)]
pub struct FlowGraph {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

impl FlowGraph {
    pub fn new(n: usize) -> Self {
        FlowGraph { arcs: Vec::new(), adj: vec![Vec::new(); n] }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Adds `u → v` with capacity `cap` and `v → u` with capacity `rev`.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: f64, rev: f64) {
        debug_assert!(cap >= 0.0 && rev >= 0.0);
        let id = self.arcs.len();
        self.arcs.push(Arc { to: v, cap });
        self.arcs.push(Arc { to: u, cap: rev });
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
    }

    fn largest_capacity(&self) -> f64 {
        self.arcs.iter().fold(0.0f64, |m, a| m.max(a.cap))
    }

    /// Pushes a maximum flow from `s` to `t` and returns its value together
    /// with the maximal minimum cut.
    pub fn max_flow(mut self, s: usize, t: usize) -> MinCut {
        let n = self.node_count();
        // residual capacities below this are treated as saturated
        let eps = 1e-13 * self.largest_capacity().max(f64::MIN_POSITIVE);
        let mut flow = 0.0;
        let mut level = vec![-1i64; n];
        let mut next = vec![0usize; n];
        loop {
            if !self.bfs_levels(s, t, eps, &mut level) {
                break;
            }
            next.iter_mut().for_each(|x| *x = 0);
            flow += self.blocking_flow(s, t, eps, &level, &mut next);
        }
        let source_side = self.maximal_source_side(t, eps);
        MinCut { value: flow, source_side }
    }

    fn bfs_levels(&self, s: usize, t: usize, eps: f64, level: &mut [i64]) -> bool {
        level.iter_mut().for_each(|l| *l = -1);
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &id in &self.adj[v] {
                let a = self.arcs[id];
                if a.cap > eps && level[a.to] < 0 {
                    level[a.to] = level[v] + 1;
                    queue.push_back(a.to);
                }
            }
        }
        level[t] >= 0
    }

    /// Iterative DFS over the level graph; returns the flow pushed.
    fn blocking_flow(&mut self, s: usize, t: usize, eps: f64, level: &[i64], next: &mut [usize]) -> f64 {
        let mut total = 0.0;
        let mut path: Vec<usize> = Vec::new(); // arc ids from s
        let mut v = s;
        loop {
            if v == t {
                let push = path.iter().fold(f64::INFINITY, |m, &id| m.min(self.arcs[id].cap));
                total += push;
                let mut cut_at = None;
                for (pos, &id) in path.iter().enumerate() {
                    self.arcs[id].cap -= push;
                    self.arcs[id ^ 1].cap += push;
                    if cut_at.is_none() && self.arcs[id].cap <= eps {
                        cut_at = Some(pos);
                    }
                }
                // retreat to the tail of the first saturated arc
                let pos = cut_at.unwrap_or(0);
                path.truncate(pos);
                v = path.last().map_or(s, |&id| self.arcs[id].to);
                continue;
            }
            let mut advanced = false;
            while next[v] < self.adj[v].len() {
                let id = self.adj[v][next[v]];
                let a = self.arcs[id];
                if a.cap > eps && level[a.to] == level[v] + 1 {
                    path.push(id);
                    v = a.to;
                    advanced = true;
                    break;
                }
                next[v] += 1;
            }
            if advanced {
                continue;
            }
            // dead end
            if v == s {
                break;
            }
            let id = path.pop().expect("non-source node has a path arc");
            v = self.arcs[id ^ 1].to;
            next[v] += 1;
        }
        total
    }

    fn maximal_source_side(&self, t: usize, eps: f64) -> Vec<bool> {
        let n = self.node_count();
        let mut reaches_sink = vec![false; n];
        reaches_sink[t] = true;
        let mut queue = VecDeque::from([t]);
        while let Some(v) = queue.pop_front() {
            // arc u → v has residual iff its partner v → u is in adj[v]
            for &id in &self.adj[v] {
                let u = self.arcs[id].to;
                if !reaches_sink[u] && self.arcs[id ^ 1].cap > eps {
                    reaches_sink[u] = true;
                    queue.push_back(u);
                }
            }
        }
        reaches_sink.iter().map(|r| !r).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinCut {
    pub value: f64,
    /// Membership of each node in the maximal source side.
    pub source_side: Vec<bool>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn textbook_network() {
        // CLRS example, max flow 23
        let mut g = FlowGraph::new(6);
        for (u, v, c) in [(0, 1, 16.0), (0, 2, 13.0), (2, 1, 4.0), (1, 3, 12.0), (3, 2, 9.0), (2, 4, 14.0), (4, 3, 7.0), (3, 5, 20.0), (4, 5, 4.0)] {
            g.add_edge(u, v, c, 0.0);
        }
        let cut = g.max_flow(0, 5);
        assert_eq!(cut.value, 23.0);
        assert!(cut.source_side[0] && !cut.source_side[5]);
    }

    #[test]
    fn maximal_side_on_ties() {
        // s → a → t with equal capacities: both {s} and {s, a} are minimum
        let mut g = FlowGraph::new(3);
        g.add_edge(0, 1, 1.0, 0.0);
        g.add_edge(1, 2, 1.0, 0.0);
        let cut = g.max_flow(0, 2);
        assert_eq!(cut.value, 1.0);
        assert_eq!(cut.source_side, vec![true, true, false]);
    }

    fn brute_min_cut(n: usize, edges: &[(usize, usize, f64)]) -> f64 {
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << (n - 2)) {
            let side = |v: usize| v == 0 || (v != n - 1 && mask >> (v - 1) & 1 == 1);
            let c: f64 = edges.iter().filter(|(u, v, _)| side(*u) && !side(*v)).map(|e| e.2).sum();
            best = best.min(c);
        }
        best
    }

    #[test]
    fn random_graphs_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(3..10);
            let mut edges = Vec::new();
            let mut g = FlowGraph::new(n);
            for _ in 0..rng.random_range(1..3 * n) {
                let u = rng.random_range(0..n);
                let v = rng.random_range(0..n);
                if u == v {
                    continue;
                }
                let c = rng.random_range(0..16) as f64 * 0.25;
                edges.push((u, v, c));
                g.add_edge(u, v, c, 0.0);
            }
            let cut = g.max_flow(0, n - 1);
            assert_eq!(cut.value, brute_min_cut(n, &edges));
            let side_value: f64 = edges
                .iter()
                .filter(|(u, v, _)| cut.source_side[*u] && !cut.source_side[*v])
                .map(|e| e.2)
                .sum();
            assert_eq!(side_value, cut.value);
        }
    }
}
