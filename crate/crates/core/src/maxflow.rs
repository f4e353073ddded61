//! Dinic's maximum flow on integer capacities.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: i64,
    rev: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct FlowNetwork {
    adj: Vec<Vec<Arc>>,
    /// `(vertex, slot)` of every forward arc with its original capacity.
    arcs: Vec<(usize, usize, i64)>,
}

impl FlowNetwork {
    pub fn new(n: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); n],
            arcs: Vec::new(),
        }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cap: i64) -> usize {
        debug_assert!(cap >= 0);
        let a = self.adj[from].len();
        let b = self.adj[to].len() + usize::from(from == to);
        self.adj[from].push(Arc { to, cap, rev: b });
        self.adj[to].push(Arc { to: from, cap: 0, rev: a });
        self.arcs.push((from, a, cap));
        self.arcs.len() - 1
    }

    /// Flow currently carried by arc `id`.
    pub fn flow(&self, id: usize) -> i64 {
        let (v, slot, cap) = self.arcs[id];
        cap - self.adj[v][slot].cap
    }

    fn levels(&self, s: usize) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for a in &self.adj[v] {
                if a.cap > 0 && level[a.to] == usize::MAX {
                    level[a.to] = level[v] + 1;
                    queue.push_back(a.to);
                }
            }
        }
        level
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut total = 0;
        loop {
            let level = self.levels(s);
            if level[t] == usize::MAX {
                return total;
            }
            let mut it = vec![0usize; self.adj.len()];
            loop {
                let pushed = self.blocking_path(s, t, &level, &mut it);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
    }

    /// One augmenting path in the level graph, found iteratively.
    fn blocking_path(&mut self, s: usize, t: usize, level: &[usize], it: &mut [usize]) -> i64 {
        let mut path: Vec<(usize, usize)> = Vec::new();
        let mut v = s;
        loop {
            if v == t {
                let push = path
                    .iter()
                    .map(|&(u, k)| self.adj[u][k].cap)
                    .min()
                    .unwrap_or(0);
                for &(u, k) in &path {
                    let Arc { to, rev, .. } = self.adj[u][k];
                    self.adj[u][k].cap -= push;
                    self.adj[to][rev].cap += push;
                }
                return push;
            }
            let mut advanced = false;
            while it[v] < self.adj[v].len() {
                let a = &self.adj[v][it[v]];
                if a.cap > 0 && level[a.to] == level[v] + 1 {
                    path.push((v, it[v]));
                    v = a.to;
                    advanced = true;
                    break;
                }
                it[v] += 1;
            }
            if !advanced {
                // Dead end: retreat and skip the arc that led here.
                match path.pop() {
                    Some((u, k)) => {
                        it[u] = k + 1;
                        v = u;
                    }
                    None => return 0,
                }
            }
        }
    }

    /// Vertices reachable from `s` in the residual network.
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        self.levels(s).into_iter().map(|l| l != usize::MAX).collect()
    }
}
