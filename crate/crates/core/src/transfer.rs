//! Fractional inter-cube transfers.
//!
//! A [`GridFlow`] carries rational values `p_{i,j}` on pairs of interior
//! cubes at `l∞` index distance 1, so that every interior cube reaches the
//! common target `N^d = P_i - Σ_j p_{i,j}`. [`solve_fractional_transfers`]
//! computes the flow with the smallest possible `max |p_{i,j}|`; the
//! alternative [`average_shift_transfers`] averages the transfers induced by
//! bounded shift bijections over a box of integer shifts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::density::{cube_counts, CubeGrid};
use crate::error::{check_dim, input, Error, Result};
use crate::flow_round::{format_rational, write_flow_graph, FlowGraph, Rational};
use crate::matching::{Matching, SpatialHash, NONE};
use crate::maxflow::FlowNetwork;
use crate::model::{grid_indices, linf, GridIndex, PointSet};

/// Offsets `o ∈ {-1,0,1}^d`, `o ≠ 0`, in lexicographic order.
pub(crate) fn neighbour_offsets(dim: usize) -> Vec<GridIndex> {
    grid_indices(&vec![-1..2; dim])
        .into_iter()
        .filter(|o| o.iter().any(|&c| c != 0))
        .collect()
}

pub(crate) fn add_index(a: &[i64], b: &[i64]) -> GridIndex {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn index_dist(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or(0)
}

/// Integer cube side as the per-cube target `N^d`.
fn cube_target(side: f64, dim: usize) -> Result<u64> {
    if side.fract() != 0.0 || side < 1.0 {
        return input(format!("cube side N must be a positive integer, got {side}"));
    }
    (side as u64)
        .checked_pow(dim as u32)
        .ok_or_else(|| Error::Input(format!("N^d overflows for N = {side}")))
}

/// Antisymmetric rational flow on the interior-cube adjacency graph.
///
/// Vertex `k < cubes.len()` is the cube `cubes[k]`; when present, the slack
/// vertex is `cubes.len()` and stands for everything outside the interior.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFlow {
    pub side: f64,
    pub origin: Vec<f64>,
    pub target: u64,
    pub cubes: Vec<GridIndex>,
    pub counts: Vec<u64>,
    /// Vertices at which the divergence identity is required.
    pub constrained: Vec<bool>,
    pub slack: Option<usize>,
    pub graph: FlowGraph,
    /// `max |p|` over all edges.
    pub bottleneck: Rational,
}

impl GridFlow {
    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn vertex_of(&self, i: &[i64]) -> Option<usize> {
        self.cubes.binary_search_by(|c| c.as_slice().cmp(i)).ok()
    }

    /// `p_{i,j}`, zero when the pair carries no edge.
    pub fn value(&self, i: &[i64], j: &[i64]) -> Rational {
        let (Some(u), Some(v)) = (self.vertex_of(i), self.vertex_of(j)) else {
            return Rational::zero();
        };
        self.vertex_value(u, v)
    }

    pub(crate) fn vertex_value(&self, u: usize, v: usize) -> Rational {
        let mut sum = Rational::zero();
        for e in self.graph.edges() {
            if e.tail == u && e.head == v {
                sum += &e.value;
            } else if e.tail == v && e.head == u {
                sum -= &e.value;
            }
        }
        sum
    }

    /// `N^d - P_i + Σ_j p_{i,j}` per cube vertex (zero when unconstrained).
    pub fn residuals(&self) -> Vec<Rational> {
        let div = self.graph.divergences();
        let target = Rational::from_integer(BigInt::from(self.target));
        (0..self.cubes.len())
            .map(|k| {
                if self.constrained[k] {
                    &target - Rational::from_integer(BigInt::from(self.counts[k])) + &div[k]
                } else {
                    Rational::zero()
                }
            })
            .collect()
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.residuals()
            .iter()
            .map(|r| r.abs().to_f64().unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    pub fn mean_abs_residual(&self) -> f64 {
        let res = self.residuals();
        let n = self.constrained.iter().filter(|&&c| c).count();
        if n == 0 {
            return 0.0;
        }
        let total: Rational = res.iter().map(|r| r.abs()).sum();
        total.to_f64().unwrap_or(f64::INFINITY) / n as f64
    }

    /// Edges between two cubes whose indices are not adjacent.
    pub fn support_violations(&self) -> usize {
        self.graph
            .edges()
            .iter()
            .filter(|e| Some(e.tail) != self.slack && Some(e.head) != self.slack)
            .filter(|e| index_dist(&self.cubes[e.tail], &self.cubes[e.head]) != 1)
            .count()
    }

    /// Flow-graph text with `# cube` / `# slack` comment lines mapping vertex
    /// ids to grid indices.
    pub fn to_graph_file(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# side {} target {}", self.side, self.target);
        for (k, c) in self.cubes.iter().enumerate() {
            let idx: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "# cube {k} {} count {}", idx.join(","), self.counts[k]);
        }
        if let Some(s) = self.slack {
            let _ = writeln!(out, "# slack {s}");
        }
        let _ = writeln!(out, "# bottleneck {}", format_rational(&self.bottleneck));
        out.push_str(&write_flow_graph(&self.graph));
        out
    }
}

fn max_abs(g: &FlowGraph) -> Rational {
    g.edges()
        .iter()
        .map(|e| e.value.abs())
        .max()
        .unwrap_or_else(Rational::zero)
}

/// Multiply coordinates by `density^(1/d)` so the estimated density becomes 1.
pub fn rescale_to_unit_density(set: &PointSet, density: f64) -> Result<PointSet> {
    if !(density > 0.0 && density.is_finite()) {
        return input(format!("density must be positive, got {density}"));
    }
    set.scaled(density.powf(1.0 / set.dim() as f64))
}

/// Interior cubes with a neighbouring index outside the interior.
fn ring_flags(grid: &CubeGrid, cubes: &[GridIndex]) -> Vec<bool> {
    let offsets = neighbour_offsets(grid.dim());
    cubes
        .iter()
        .map(|c| offsets.iter().any(|o| !grid.is_interior(&add_index(c, o))))
        .collect()
}

/// Bottleneck-minimal transfers on the interior cubes of `grid`.
///
/// Edges join interior cubes at index distance 1. If the interior total
/// differs from `n·N^d`, ring cubes get one-directional edges to a slack
/// vertex that absorbs the difference. The smallest bound `B` admitting a
/// flow with `|p| <= B` on every edge is found exactly by Newton iteration on
/// parametric minimum cuts; each step solves one integer max-flow.
pub fn solve_fractional_transfers(grid: &CubeGrid) -> Result<GridFlow> {
    let dim = grid.dim();
    let target = cube_target(grid.side(), dim)?;
    let cubes = grid.interior_indices();
    if cubes.is_empty() {
        return input("grid has no interior cubes");
    }
    let n = cubes.len();
    let counts: Vec<u64> = cubes.iter().map(|c| grid.count(c).unwrap_or(0)).collect();
    let excess: Vec<i64> = counts.iter().map(|&p| p as i64 - target as i64).collect();
    let total: i64 = excess.iter().sum();
    let ring = ring_flags(grid, &cubes);

    let lookup: BTreeMap<&[i64], usize> =
        cubes.iter().enumerate().map(|(k, c)| (c.as_slice(), k)).collect();
    let offsets = neighbour_offsets(dim);
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (u, c) in cubes.iter().enumerate() {
        for o in &offsets {
            if let Some(&v) = lookup.get(add_index(c, o).as_slice()) {
                if u < v {
                    pairs.push((u, v));
                }
            }
        }
    }
    let slack = (total != 0).then_some(n);
    let slack_edges: Vec<usize> = if slack.is_some() {
        (0..n).filter(|&k| ring[k]).collect()
    } else {
        Vec::new()
    };

    let supply: i64 = excess.iter().filter(|&&e| e > 0).sum::<i64>() + (-total).max(0);
    let (src, snk, sv) = (n + 1, n + 2, n);
    let build = |b: Ratio<i64>| {
        let (num, den) = (*b.numer(), *b.denom());
        let mut net = FlowNetwork::new(n + 3);
        let mut fixed = Vec::new();
        for (k, &e) in excess.iter().enumerate() {
            if e > 0 {
                fixed.push((src, k, e, net.add_arc(src, k, e * den)));
            } else if e < 0 {
                fixed.push((k, snk, -e, net.add_arc(k, snk, -e * den)));
            }
        }
        if total > 0 {
            fixed.push((sv, snk, total, net.add_arc(sv, snk, total * den)));
        } else if total < 0 {
            fixed.push((src, sv, -total, net.add_arc(src, sv, -total * den)));
        }
        let mut variable = Vec::new();
        for &(u, v) in &pairs {
            variable.push((u, v, net.add_arc(u, v, num)));
            variable.push((v, u, net.add_arc(v, u, num)));
        }
        for &k in &slack_edges {
            if total > 0 {
                variable.push((k, sv, net.add_arc(k, sv, num)));
            } else {
                variable.push((sv, k, net.add_arc(sv, k, num)));
            }
        }
        (net, fixed, variable)
    };

    let mut b = Ratio::<i64>::zero();
    let (net, variable) = loop {
        let (mut net, fixed, variable) = build(b);
        let flow = net.max_flow(src, snk);
        if flow == supply * b.denom() {
            break (net, variable);
        }
        let side = net.source_side(src);
        let crossing = |u: usize, v: usize| side[u] && !side[v];
        let a: i64 = fixed
            .iter()
            .filter(|f| crossing(f.0, f.1))
            .map(|f| f.2)
            .sum();
        let k = variable.iter().filter(|v| crossing(v.0, v.1)).count() as i64;
        if k == 0 {
            return Err(Error::Infeasible {
                cube: Vec::new(),
                reason: "cube excess cannot reach a deficit or the boundary".into(),
            });
        }
        let next = Ratio::new(supply - a, k);
        if next <= b {
            return Err(Error::Contract("bottleneck search failed to advance".into()));
        }
        b = next;
    };

    let den = BigInt::from(*b.denom());
    let scaled = |f: i64| Rational::new(BigInt::from(f), den.clone());
    let mut graph = FlowGraph::new(n + usize::from(slack.is_some()));
    for (k, &(u, v)) in pairs.iter().enumerate() {
        let fwd = net.flow(variable[2 * k].2);
        let back = net.flow(variable[2 * k + 1].2);
        graph.add_edge(u, v, scaled(fwd - back))?;
    }
    for (k, &c) in slack_edges.iter().enumerate() {
        let f = net.flow(variable[2 * pairs.len() + k].2);
        graph.add_edge(c, sv, scaled(if total > 0 { f } else { -f }))?;
    }

    let flow = GridFlow {
        side: grid.side(),
        origin: grid.origin().to_vec(),
        target,
        cubes,
        counts,
        constrained: vec![true; n],
        slack,
        bottleneck: max_abs(&graph),
        graph,
    };
    if flow.residuals().iter().any(|r| !r.is_zero()) {
        return Err(Error::Contract("solver flow violates the divergence identity".into()));
    }
    Ok(flow)
}

/// Transfers induced by one bounded shift bijection `σ` with
/// `|a + N x - σ(a)|∞ < L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftTransferSample {
    pub shift: Vec<i64>,
    pub side: f64,
    pub origin: Vec<f64>,
    pub bound: f64,
    /// Cubes `i` at which the transfers were measured.
    pub cubes: Vec<GridIndex>,
    /// `P_j` for the measured cubes, their neighbours and their shifts.
    pub cube_counts: BTreeMap<GridIndex, u64>,
    /// `#M^x_{j,i}` keyed by `(j, i)`: units of cube `j` sent into cube `i + x`.
    pub moved: BTreeMap<(GridIndex, GridIndex), u64>,
    /// `p^x_{i,j}` for measured `i` and `|i - j|∞ = 1`.
    pub transfers: BTreeMap<(GridIndex, GridIndex), i64>,
    /// Matched pairs `(a, σ(a))` touching the measured cubes.
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
    pub unmatched_sources: Vec<Vec<f64>>,
    pub unmatched_targets: Vec<Vec<f64>>,
    /// Pairs whose cubes are more than one index apart after the shift.
    pub support_violations: usize,
    /// `N > 2L`, the regime in which the support condition must hold.
    pub support_checked: bool,
    /// `P_{i+x} = P_i - Σ_j p^x_{i,j}` at every measured cube.
    pub identity_holds: bool,
}

impl ShiftTransferSample {
    /// Every required unit found a partner.
    pub fn complete(&self) -> bool {
        self.unmatched_sources.is_empty() && self.unmatched_targets.is_empty()
    }

    pub fn max_abs_transfer(&self) -> i64 {
        self.transfers.values().map(|p| p.abs()).max().unwrap_or(0)
    }

    /// `N^(d - 1/2)`.
    pub fn size_bound(&self) -> f64 {
        self.side.powf(self.shift.len() as f64 - 0.5)
    }

    pub fn transfer(&self, i: &[i64], j: &[i64]) -> i64 {
        self.transfers
            .get(&(i.to_vec(), j.to_vec()))
            .copied()
            .unwrap_or(0)
    }
}

/// Cubes `i` such that `i`, `i + x` and all their neighbours are interior.
pub fn valid_shift_cubes(grid: &CubeGrid, shifts: &[Vec<i64>]) -> Vec<GridIndex> {
    let mut around = neighbour_offsets(grid.dim());
    around.push(vec![0; grid.dim()]);
    grid.interior_indices()
        .into_iter()
        .filter(|i| {
            shifts.iter().all(|x| {
                let ix = add_index(i, x);
                around.iter().all(|o| {
                    grid.is_interior(&add_index(i, o)) && grid.is_interior(&add_index(&ix, o))
                })
            })
        })
        .collect()
}

/// Measure `p^x` for one integer shift `x` of the cube grid of side `N`.
///
/// The bijection is built by augmenting paths that never unmatch a unit:
/// first every unit of a measured cube `i` is matched as a source, then every
/// unit of `i + x` as a target. `cubes` defaults to [`valid_shift_cubes`].
pub fn shift_transfer_sample(
    set: &PointSet,
    shift: &[i64],
    side: f64,
    bound: f64,
    cubes: Option<&[GridIndex]>,
) -> Result<ShiftTransferSample> {
    let dim = set.dim();
    check_dim(dim, shift.len())?;
    if !(bound > 0.0 && bound.is_finite()) {
        return input(format!("shift bound L must be positive, got {bound}"));
    }
    if bound > side {
        return input(format!("shift bound L = {bound} exceeds the cube side {side}"));
    }
    let grid = cube_counts(set, side, None)?;
    let cubes: Vec<GridIndex> = match cubes {
        Some(c) => {
            let mut c = c.to_vec();
            c.sort();
            c.dedup();
            c
        }
        None => valid_shift_cubes(&grid, &[shift.to_vec()]),
    };
    let measured: BTreeSet<&[i64]> = cubes.iter().map(|c| c.as_slice()).collect();
    let shifted: BTreeSet<GridIndex> = cubes.iter().map(|c| add_index(c, shift)).collect();

    let units: Vec<Vec<f64>> = set.units().map(|(_, p)| p.to_vec()).collect();
    let cube_of: Vec<GridIndex> = units
        .iter()
        .map(|p| grid.index_of(p))
        .collect::<Result<_>>()?;
    let offset: Vec<f64> = shift.iter().map(|&x| x as f64 * side).collect();
    let hash = SpatialHash::new(&units, bound);
    let adj: Vec<Vec<usize>> = units
        .iter()
        .map(|a| {
            let q: Vec<f64> = a.iter().zip(&offset).map(|(c, o)| c + o).collect();
            let mut near = hash.within(&q, bound, linf);
            // Nearest candidates first, so augmentation prefers short moves.
            near.sort_by(|&u, &v| linf(&q, &units[u]).total_cmp(&linf(&q, &units[v])).then(u.cmp(&v)));
            near
        })
        .collect();
    let mut radj = vec![Vec::new(); units.len()];
    for (a, list) in adj.iter().enumerate() {
        for &b in list {
            radj[b].push(a);
        }
    }

    let mut m = Matching::new(units.len(), units.len());
    let mut unmatched_sources = Vec::new();
    let mut unmatched_targets = Vec::new();
    for a in 0..units.len() {
        if measured.contains(cube_of[a].as_slice()) && !m.augment_left(&adj, a) {
            unmatched_sources.push(units[a].clone());
        }
    }
    for b in 0..units.len() {
        if shifted.contains(&cube_of[b]) && !m.augment_right(&radj, b) {
            unmatched_targets.push(units[b].clone());
        }
    }

    let mut moved: BTreeMap<(GridIndex, GridIndex), u64> = BTreeMap::new();
    let mut pairs = Vec::new();
    let mut support_violations = 0usize;
    for a in 0..units.len() {
        let b = m.left[a];
        if b == NONE {
            continue;
        }
        let j = &cube_of[a];
        if !measured.contains(j.as_slice()) && !shifted.contains(&cube_of[b]) {
            continue;
        }
        let i: GridIndex = cube_of[b].iter().zip(shift).map(|(c, x)| c - x).collect();
        if index_dist(j, &i) > 1 {
            support_violations += 1;
        }
        *moved.entry((j.clone(), i)).or_default() += 1;
        pairs.push((units[a].clone(), units[b].clone()));
    }

    let mut cube_counts_map = BTreeMap::new();
    let mut around = neighbour_offsets(dim);
    around.push(vec![0; dim]);
    for c in &cubes {
        for o in &around {
            for base in [c.clone(), add_index(c, shift)] {
                let k = add_index(&base, o);
                if let Some(p) = grid.count(&k) {
                    cube_counts_map.insert(k, p);
                }
            }
        }
    }

    let get = |j: &GridIndex, i: &GridIndex| moved.get(&(j.clone(), i.clone())).copied().unwrap_or(0);
    let mut transfers = BTreeMap::new();
    let mut identity_holds = true;
    for i in &cubes {
        let mut sum = 0i64;
        for o in neighbour_offsets(dim) {
            let j = add_index(i, &o);
            let p = get(i, &j) as i64 - get(&j, i) as i64;
            sum += p;
            transfers.insert((i.clone(), j), p);
        }
        let p_i = cube_counts_map.get(i).copied().unwrap_or(0) as i64;
        let p_ix = cube_counts_map.get(&add_index(i, shift)).copied().unwrap_or(0) as i64;
        if p_ix != p_i - sum {
            identity_holds = false;
        }
    }

    Ok(ShiftTransferSample {
        shift: shift.to_vec(),
        side,
        origin: grid.origin().to_vec(),
        bound,
        cubes,
        cube_counts: cube_counts_map,
        moved,
        transfers,
        pairs,
        unmatched_sources,
        unmatched_targets,
        support_violations,
        support_checked: side > 2.0 * bound,
        identity_holds,
    })
}

/// `p_{i,j} = (1/|X|) Σ_x p^x_{i,j}` on the cubes measured by every sample.
///
/// The result's constrained vertices are those cubes; its residuals equal
/// `N^d - (1/|X|) Σ_x P_{i+x}` whenever each sample's identity holds.
pub fn average_shift_transfers(samples: &[ShiftTransferSample]) -> Result<GridFlow> {
    let Some(first) = samples.first() else {
        return input("no shift samples to average");
    };
    let dim = first.shift.len();
    let target = cube_target(first.side, dim)?;
    for s in samples {
        if s.side != first.side || s.bound != first.bound || s.origin != first.origin {
            return input("shift samples must share N and L");
        }
        if !s.complete() {
            return input(format!("shift sample x = {:?} has unmatched units", s.shift));
        }
    }
    let mut common: BTreeSet<GridIndex> = first.cubes.iter().cloned().collect();
    for s in &samples[1..] {
        let here: BTreeSet<GridIndex> = s.cubes.iter().cloned().collect();
        common = common.intersection(&here).cloned().collect();
    }
    if common.is_empty() {
        return input("shift samples share no measured cube");
    }
    let offsets = neighbour_offsets(dim);
    let mut vertices: BTreeSet<GridIndex> = common.clone();
    for c in &common {
        for o in &offsets {
            vertices.insert(add_index(c, o));
        }
    }
    let cubes: Vec<GridIndex> = vertices.into_iter().collect();
    let lookup: BTreeMap<&GridIndex, usize> = cubes.iter().enumerate().map(|(k, c)| (c, k)).collect();
    let counts: Vec<u64> = cubes
        .iter()
        .map(|c| first.cube_counts.get(c).copied().unwrap_or(0))
        .collect();
    let constrained: Vec<bool> = cubes.iter().map(|c| common.contains(c)).collect();

    let len = BigInt::from(samples.len());
    let mut graph = FlowGraph::new(cubes.len());
    for i in &common {
        for o in &offsets {
            let j = add_index(i, o);
            if common.contains(&j) && j < *i {
                continue;
            }
            let sum: i64 = samples.iter().map(|s| s.transfer(i, &j)).sum();
            graph.add_edge(lookup[i], lookup[&j], Rational::new(BigInt::from(sum), len.clone()))?;
        }
    }
    Ok(GridFlow {
        side: first.side,
        origin: first.origin.clone(),
        target,
        cubes,
        counts,
        constrained,
        slack: None,
        bottleneck: max_abs(&graph),
        graph,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{generate, GeneratorSpec};
    use crate::model::Window;

    fn line_set(counts: &[usize], side: f64) -> PointSet {
        let mut entries = Vec::new();
        for (k, &c) in counts.iter().enumerate() {
            for t in 0..c {
                let x = k as f64 * side + (t as f64 + 0.5) * side / c as f64;
                entries.push((vec![x], 1));
            }
        }
        let w = Window::new(vec![0.0], vec![counts.len() as f64 * side]).unwrap();
        PointSet::new(w, entries).unwrap()
    }

    fn int(v: i64) -> Rational {
        Rational::from_integer(BigInt::from(v))
    }

    #[test]
    fn balanced_counts_give_zero_flow() {
        let set = line_set(&[16, 16, 16], 16.0);
        let f = solve_fractional_transfers(&cube_counts(&set, 16.0, None).unwrap()).unwrap();
        assert!(f.slack.is_none());
        assert!(f.graph.edges().iter().all(|e| e.value.is_zero()));
        assert_eq!(f.bottleneck, int(0));
    }

    #[test]
    fn two_cube_transfer_is_forced() {
        let set = line_set(&[17, 15], 16.0);
        let f = solve_fractional_transfers(&cube_counts(&set, 16.0, None).unwrap()).unwrap();
        assert_eq!(f.value(&[0], &[1]), int(1));
        assert_eq!(f.value(&[1], &[0]), int(-1));
    }

    #[test]
    fn three_cube_transfer_matches_enumeration() {
        let counts = [17i64, 16, 15];
        // Enumerate integer flows on the two path edges in a small box.
        let mut best: Option<(i64, (i64, i64))> = None;
        let mut optimal = Vec::new();
        for p01 in -4..=4 {
            for p12 in -4..=4 {
                let ok = 16 == counts[0] - p01 && 16 == counts[1] + p01 - p12 && 16 == counts[2] + p12;
                if !ok {
                    continue;
                }
                let m = p01.abs().max(p12.abs());
                match best {
                    Some((b, _)) if b < m => {}
                    Some((b, _)) if b == m => optimal.push((p01, p12)),
                    _ => {
                        best = Some((m, (p01, p12)));
                        optimal = vec![(p01, p12)];
                    }
                }
            }
        }
        assert_eq!(optimal, vec![(1, 1)]);
        let set = line_set(&[17, 16, 15], 16.0);
        let f = solve_fractional_transfers(&cube_counts(&set, 16.0, None).unwrap()).unwrap();
        assert_eq!(f.value(&[0], &[1]), int(1));
        assert_eq!(f.value(&[1], &[2]), int(1));
        assert_eq!(f.bottleneck, int(1));
    }

    #[test]
    fn slack_absorbs_total_mismatch() {
        let set = line_set(&[18, 16, 16], 16.0);
        let f = solve_fractional_transfers(&cube_counts(&set, 16.0, None).unwrap()).unwrap();
        let s = f.slack.unwrap();
        assert_eq!(f.graph.divergence(s), int(-2));
        assert!(f.residuals().iter().all(|r| r.is_zero()));
        // Only the end cubes touch the slack; the cheapest way out splits
        // the excess across both ends.
        assert_eq!(f.bottleneck, int(1));
        assert_eq!(f.support_violations(), 0);
    }

    #[test]
    fn fractional_bottleneck_in_two_dimensions() {
        // One cube of a 3x3 block has 4 extra points and a single cube has a
        // deficit of 4; spread over the 8 king-move neighbours of the centre.
        let w = Window::cube(2, 0.0, 6.0).unwrap();
        let mut entries = Vec::new();
        for x in 0..6 {
            for y in 0..6 {
                entries.push((vec![x as f64 + 0.5, y as f64 + 0.5], 1));
            }
        }
        entries.push((vec![2.25, 2.25], 4));
        let mut set = PointSet::new(w.clone(), entries).unwrap();
        // Remove four points from the corner cube (0,0).
        let kept: Vec<(Vec<f64>, u32)> = set
            .iter()
            .filter(|(p, _)| !(p[0] < 2.0 && p[1] < 2.0))
            .map(|(p, m)| (p.to_vec(), m))
            .collect();
        set = PointSet::new(w, kept).unwrap();
        let grid = cube_counts(&set, 2.0, None).unwrap();
        let f = solve_fractional_transfers(&grid).unwrap();
        assert!(f.slack.is_none());
        assert!(f.residuals().iter().all(|r| r.is_zero()));
        // The corner cube has three neighbours, so B* >= 4/3; it is attained.
        assert_eq!(f.bottleneck, Rational::new(BigInt::from(4), BigInt::from(3)));
    }

    #[test]
    fn empty_interior_is_an_error() {
        let w = Window::new(vec![0.5], vec![2.5]).unwrap();
        let set = PointSet::new(w, vec![(vec![1.0], 1)]).unwrap();
        let grid = cube_counts(&set, 2.0, None).unwrap();
        assert!(solve_fractional_transfers(&grid).is_err());
    }

    #[test]
    fn graph_file_round_trips() {
        let set = line_set(&[18, 16, 14], 16.0);
        let f = solve_fractional_transfers(&cube_counts(&set, 16.0, None).unwrap()).unwrap();
        let text = f.to_graph_file();
        assert!(text.contains("# cube 1 1 count 16"));
        let g = crate::flow_round::read_flow_graph(&text).unwrap();
        assert_eq!(g, f.graph);
    }

    #[test]
    fn rescaling() {
        let w = Window::new(vec![0.0], vec![20.0]).unwrap();
        let set = generate(&GeneratorSpec::lattice(w, 2.0)).unwrap();
        let z = rescale_to_unit_density(&set, 0.5).unwrap();
        let pts: Vec<f64> = z.iter().map(|(p, _)| p[0]).collect();
        assert_eq!(pts, (0..10).map(|k| k as f64).collect::<Vec<_>>());
        assert_eq!(rescale_to_unit_density(&set, 1.0).unwrap(), set);
        assert!(rescale_to_unit_density(&set, 0.0).is_err());
    }

    #[test]
    fn rescaled_fibonacci_has_unit_gap() {
        let w = Window::new(vec![0.0], vec![2000.0]).unwrap();
        let set = generate(&GeneratorSpec::fibonacci(w)).unwrap();
        let est = crate::density::estimate_density(&set, &[1000.0], &[vec![0.0], vec![500.0], vec![1000.0]])
            .unwrap();
        let z = rescale_to_unit_density(&set, est.density).unwrap();
        let xs: Vec<f64> = z.iter().map(|(p, _)| p[0]).collect();
        let gap = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        assert!((gap - 1.0).abs() < 2e-3, "gap {gap}");
    }

    #[test]
    fn identity_shift_has_no_transfers() {
        let w = Window::cube(2, 0.0, 24.0).unwrap();
        let set = generate(&GeneratorSpec::perturbed_lattice(w, 1.0, 0.4, 3)).unwrap();
        let s = shift_transfer_sample(&set, &[0, 0], 4.0, 1.0, None).unwrap();
        assert!(s.complete());
        assert!(!s.cubes.is_empty());
        assert!(s.pairs.iter().all(|(a, b)| a == b));
        assert!(s.transfers.values().all(|&p| p == 0));
        assert!(s.moved.keys().all(|(j, i)| j == i));
    }

    #[test]
    fn lattice_shift_maps_cubes_onto_cubes() {
        let w = Window::new(vec![0.0], vec![64.0]).unwrap();
        let set = generate(&GeneratorSpec::lattice(w, 1.0)).unwrap();
        for x in 0..5 {
            let s = shift_transfer_sample(&set, &[x], 4.0, 1.0, None).unwrap();
            assert!(s.complete() && s.identity_holds);
            assert!(s.transfers.values().all(|&p| p == 0), "x = {x}");
        }
    }

    #[test]
    fn perturbed_sample_matches_direct_tally() {
        let w = Window::new(vec![0.0], vec![80.0]).unwrap();
        let set = generate(&GeneratorSpec::perturbed_lattice(w, 1.0, 0.4, 11)).unwrap();
        let s = shift_transfer_sample(&set, &[1], 4.0, 1.0, None).unwrap();
        assert!(s.complete());
        assert!(s.identity_holds);
        assert_eq!(s.support_violations, 0);
        let cube = |p: &[f64]| (p[0] / 4.0).floor() as i64;
        for i in &s.cubes {
            for j in [i[0] - 1, i[0] + 1] {
                let out = s
                    .pairs
                    .iter()
                    .filter(|(a, b)| cube(a) == i[0] && cube(b) - 1 == j)
                    .count() as i64;
                let back = s
                    .pairs
                    .iter()
                    .filter(|(a, b)| cube(a) == j && cube(b) - 1 == i[0])
                    .count() as i64;
                assert_eq!(s.transfer(i, &[j]), out - back);
            }
            let p = |k: i64| set.iter().filter(|(q, _)| cube(q) == k).count() as i64;
            let sum = s.transfer(i, &[i[0] - 1]) + s.transfer(i, &[i[0] + 1]);
            assert_eq!(p(i[0] + 1), p(i[0]) - sum);
            assert!((s.transfer(i, &[i[0] + 1]).abs() as f64) <= s.size_bound());
        }
    }

    #[test]
    fn averaging() {
        let w = Window::cube(2, 0.0, 40.0).unwrap();
        let lattice = generate(&GeneratorSpec::lattice(w.clone(), 1.0)).unwrap();
        let s = shift_transfer_sample(&lattice, &[1, 0], 4.0, 1.0, None).unwrap();
        let avg = average_shift_transfers(std::slice::from_ref(&s)).unwrap();
        assert!(avg.graph.edges().iter().all(|e| e.value.is_zero()));
        assert_eq!(avg.max_abs_residual(), 0.0);
        assert!(average_shift_transfers(&[]).is_err());

        let set = generate(&GeneratorSpec::perturbed_lattice(w, 1.0, 0.4, 5)).unwrap();
        let s = shift_transfer_sample(&set, &[1, 1], 4.0, 1.0, None).unwrap();
        let avg = average_shift_transfers(std::slice::from_ref(&s)).unwrap();
        for i in &s.cubes {
            for o in neighbour_offsets(2) {
                let j = add_index(i, &o);
                assert_eq!(avg.value(i, &j), int(s.transfer(i, &j)));
            }
        }
        assert_eq!(avg.support_violations(), 0);
    }

    #[test]
    fn unmatched_units_are_reported() {
        // A single missing site leaves one target without a preimage.
        let w = Window::new(vec![0.0], vec![40.0]).unwrap();
        let entries: Vec<(Vec<f64>, u32)> = (0..40)
            .filter(|&k| k != 21)
            .map(|k| (vec![k as f64 + 0.5], 1))
            .collect();
        let set = PointSet::new(w, entries).unwrap();
        let s = shift_transfer_sample(&set, &[1], 4.0, 0.5, None).unwrap();
        assert!(!s.complete());
        assert!(average_shift_transfers(&[s]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            // On a path with zero total excess the flow is forced: the value
            // on edge (k, k+1) is the prefix sum of the excesses.
            #[test]
            fn path_flow_is_prefix_sum(mut counts in prop::collection::vec(8usize..24, 2..8)) {
                let target = 16usize;
                let n = counts.len();
                let rest: usize = counts[..n - 1].iter().sum();
                prop_assume!(rest <= target * n);
                counts[n - 1] = target * n - rest;
                let set = line_set(&counts, 16.0);
                let f = solve_fractional_transfers(&cube_counts(&set, 16.0, None).unwrap()).unwrap();
                prop_assert!(f.slack.is_none());
                let mut prefix = 0i64;
                let mut worst = 0i64;
                for k in 0..n - 1 {
                    prefix += counts[k] as i64 - target as i64;
                    worst = worst.max(prefix.abs());
                    prop_assert_eq!(f.value(&[k as i64], &[k as i64 + 1]), int(prefix));
                }
                prop_assert_eq!(f.bottleneck.clone(), int(worst));
            }

            #[test]
            fn solver_invariants_in_two_dimensions(
                pts in prop::collection::vec((0.0f64..12.0, 0.0f64..12.0), 60..200)
            ) {
                let w = Window::cube(2, 0.0, 12.0).unwrap();
                let set = PointSet::new(w, pts.iter().map(|&(x, y)| (vec![x, y], 1)).collect()).unwrap();
                let grid = cube_counts(&set, 3.0, None).unwrap();
                let f = solve_fractional_transfers(&grid).unwrap();
                prop_assert!(f.residuals().iter().all(|r| r.is_zero()));
                prop_assert_eq!(f.support_violations(), 0);
                prop_assert_eq!(f.bottleneck.clone(), max_abs(&f.graph));
                // Antisymmetry: reading an edge backwards negates it.
                for e in f.graph.edges() {
                    prop_assert_eq!(f.vertex_value(e.head, e.tail), -f.vertex_value(e.tail, e.head));
                }
                if let Some(s) = f.slack {
                    let total: i64 = f.counts.iter().map(|&p| p as i64 - 9).sum();
                    prop_assert_eq!(f.graph.divergence(s), int(-total));
                }
            }
        }
    }
}
