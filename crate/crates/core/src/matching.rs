//! Bipartite matching engine shared by the oracle, the shift sampler and the
//! per-cube assignment: Hopcroft-Karp for maximum matchings and single-root
//! augmentation (which never unmatches an already matched vertex).

use std::collections::{HashMap, VecDeque};

pub(crate) const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub(crate) struct Matching {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    seen: Vec<u32>,
    stamp: u32,
}

impl Matching {
    pub fn new(n_left: usize, n_right: usize) -> Self {
        Matching {
            left: vec![NONE; n_left],
            right: vec![NONE; n_right],
            seen: Vec::new(),
            stamp: 0,
        }
    }

    pub fn size(&self) -> usize {
        self.left.iter().filter(|&&v| v != NONE).count()
    }

    fn next_stamp(&mut self, n: usize) -> u32 {
        if self.seen.len() < n {
            self.seen.resize(n, 0);
        }
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.seen.iter_mut().for_each(|s| *s = 0);
            self.stamp = 1;
        }
        self.stamp
    }

    /// Try to match left vertex `root` by an augmenting path.
    pub fn augment_left(&mut self, adj: &[Vec<usize>], root: usize) -> bool {
        let stamp = self.next_stamp(self.right.len());
        augment(adj, &mut self.left, &mut self.right, &mut self.seen, stamp, root)
    }

    /// Try to match right vertex `root`; `radj` lists left neighbours.
    pub fn augment_right(&mut self, radj: &[Vec<usize>], root: usize) -> bool {
        let stamp = self.next_stamp(self.left.len());
        augment(radj, &mut self.right, &mut self.left, &mut self.seen, stamp, root)
    }

    /// Grow to a maximum matching.
    pub fn hopcroft_karp(&mut self, adj: &[Vec<usize>]) -> usize {
        let n = self.left.len();
        let inf = usize::MAX;
        let mut dist = vec![inf; n];
        let mut it = vec![0usize; n];
        loop {
            let mut queue = VecDeque::new();
            for u in 0..n {
                if self.left[u] == NONE {
                    dist[u] = 0;
                    queue.push_back(u);
                } else {
                    dist[u] = inf;
                }
            }
            let mut found = false;
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    let w = self.right[v];
                    if w == NONE {
                        found = true;
                    } else if dist[w] == inf {
                        dist[w] = dist[u] + 1;
                        queue.push_back(w);
                    }
                }
            }
            if !found {
                break;
            }
            it.iter_mut().for_each(|i| *i = 0);
            for root in 0..n {
                if self.left[root] != NONE || dist[root] != 0 {
                    continue;
                }
                let mut stack = vec![root];
                let mut via: Vec<usize> = Vec::new();
                while let Some(&u) = stack.last() {
                    if it[u] == adj[u].len() {
                        dist[u] = inf;
                        stack.pop();
                        via.pop();
                        continue;
                    }
                    let v = adj[u][it[u]];
                    it[u] += 1;
                    let w = self.right[v];
                    if w == NONE {
                        via.push(v);
                        for (&u, &v) in stack.iter().zip(&via) {
                            self.left[u] = v;
                            self.right[v] = u;
                        }
                        break;
                    }
                    if dist[w] == dist[u] + 1 {
                        via.push(v);
                        stack.push(w);
                    }
                }
            }
        }
        self.size()
    }
}

fn augment(
    adj: &[Vec<usize>],
    mate_from: &mut [usize],
    mate_to: &mut [usize],
    seen: &mut [u32],
    stamp: u32,
    root: usize,
) -> bool {
    if mate_from[root] != NONE {
        return true;
    }
    let mut stack = vec![(root, 0usize)];
    let mut via: Vec<usize> = Vec::new();
    while let Some(top) = stack.last_mut() {
        let (u, i) = *top;
        if i == adj[u].len() {
            stack.pop();
            via.pop();
            continue;
        }
        top.1 += 1;
        let v = adj[u][i];
        if seen[v] == stamp {
            continue;
        }
        seen[v] = stamp;
        via.push(v);
        if mate_to[v] == NONE {
            for (&(u, _), &v) in stack.iter().zip(&via) {
                mate_from[u] = v;
                mate_to[v] = u;
            }
            return true;
        }
        stack.push((mate_to[v], 0));
    }
    false
}

/// Uniform-grid bucket index over a point cloud for radius queries.
pub(crate) struct SpatialHash<'a> {
    points: &'a [Vec<f64>],
    cell: f64,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl<'a> SpatialHash<'a> {
    pub fn new(points: &'a [Vec<f64>], cell: f64) -> Self {
        let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (k, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(k);
        }
        SpatialHash {
            points,
            cell,
            buckets,
        }
    }

    fn key(p: &[f64], cell: f64) -> Vec<i64> {
        p.iter().map(|c| (c / cell).floor() as i64).collect()
    }

    /// Indices `k` with `dist(q, points[k]) < radius`, ascending. `radius`
    /// must not exceed the cell size.
    pub fn within(&self, q: &[f64], radius: f64, dist: impl Fn(&[f64], &[f64]) -> f64) -> Vec<usize> {
        debug_assert!(radius <= self.cell);
        let base = Self::key(q, self.cell);
        let ranges: Vec<_> = base.iter().map(|&b| (b - 1)..(b + 2)).collect();
        let mut out = Vec::new();
        for key in crate::model::grid_indices(&ranges) {
            if let Some(list) = self.buckets.get(&key) {
                out.extend(
                    list.iter()
                        .copied()
                        .filter(|&k| dist(q, &self.points[k]) < radius),
                );
            }
        }
        out.sort_unstable();
        out
    }
}
