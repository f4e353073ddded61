//! Integer rounding of antisymmetric edge flows.
//!
//! Given a finite directed (multi)graph with rational edge values `p_e`
//! (`p_{-e} = -p_e` implied for the reverse edge), [`round_flow`] produces
//! integers `t_e ∈ {⌊p_e⌋, ⌊p_e⌋ + 1}` with `t_{-e} = -t_e` and the same
//! divergence `Σ_{e ∈ E_v} t_e = R_v` at every vertex where `R_v` is an
//! integer. It works in two passes:
//!
//! 1. Bad cycles (simple cycles whose traversed values are all fractional)
//!    are cancelled one at a time by pushing the smallest fractional part
//!    around the cycle. Every push makes at least one edge integral and keeps
//!    all divergences.
//! 2. The remaining fractional edges form a forest. Each tree is walked in
//!    BFS order from its smallest vertex and every edge is rounded down or up
//!    so that the partial divergence at the already-visited endpoint stays
//!    strictly within 1 of its target.
//!
//! All arithmetic is exact.

use std::collections::VecDeque;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{input, Error, Result};

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowEdge {
    pub tail: usize,
    pub head: usize,
    pub value: Rational,
}

/// Directed multigraph with antisymmetric rational edge values. Only the
/// forward edge of each pair is stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FlowGraph {
    vertices: usize,
    edges: Vec<FlowEdge>,
}

impl FlowGraph {
    pub fn new(vertices: usize) -> Self {
        FlowGraph {
            vertices,
            edges: Vec::new(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[FlowEdge] {
        &self.edges
    }

    pub fn value(&self, edge: usize) -> &Rational {
        &self.edges[edge].value
    }

    pub fn add_edge(&mut self, tail: usize, head: usize, value: Rational) -> Result<usize> {
        if tail >= self.vertices || head >= self.vertices {
            return input(format!(
                "edge {tail}->{head} references a vertex outside 0..{}",
                self.vertices
            ));
        }
        self.edges.push(FlowEdge { tail, head, value });
        Ok(self.edges.len() - 1)
    }

    /// Adds an edge whose value is the exact binary value of `value`.
    pub fn add_edge_f64(&mut self, tail: usize, head: usize, value: f64) -> Result<usize> {
        let r = Rational::from_float(value)
            .ok_or_else(|| Error::Input(format!("edge value {value} is not finite")))?;
        self.add_edge(tail, head, r)
    }

    /// `R_v`: the sum of values over edges starting at `v`, reverses included.
    pub fn divergence(&self, v: usize) -> Rational {
        let mut sum = Rational::zero();
        for e in &self.edges {
            if e.tail == v {
                sum += &e.value;
            }
            if e.head == v {
                sum -= &e.value;
            }
        }
        sum
    }

    pub fn divergences(&self) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.vertices];
        for e in &self.edges {
            out[e.tail] += &e.value;
            out[e.head] -= &e.value;
        }
        out
    }

    pub fn fractional_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| !e.value.is_integer()).count()
    }

    /// Undirected adjacency of the fractional non-loop edges, sorted by
    /// `(neighbor, edge)`.
    fn fractional_adjacency(&self) -> Vec<Vec<(usize, usize, bool)>> {
        let mut adj = vec![Vec::new(); self.vertices];
        for (k, e) in self.edges.iter().enumerate() {
            if e.value.is_integer() || e.tail == e.head {
                continue;
            }
            adj[e.tail].push((e.head, k, true));
            adj[e.head].push((e.tail, k, false));
        }
        for list in &mut adj {
            list.sort_unstable_by_key(|&(w, k, _)| (w, k));
        }
        adj
    }

    /// Value of the edge as traversed in the given direction.
    fn traversed(&self, step: &Step) -> Rational {
        let v = &self.edges[step.edge].value;
        if step.forward {
            v.clone()
        } else {
            -v
        }
    }
}

/// Traversal of edge `edge` tail→head (`forward`) or head→tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub edge: usize,
    pub forward: bool,
}

/// A closed walk `vertices[0] → vertices[1] → … → vertices[0]`; `steps[k]`
/// leads from `vertices[k]` to `vertices[k+1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cycle {
    pub vertices: Vec<usize>,
    pub steps: Vec<Step>,
}

fn frac(r: &Rational) -> Rational {
    r - r.floor()
}

/// Lexicographically first simple cycle of fractional edges found by DFS
/// from the smallest vertex, or `None` if the fractional edges form a forest.
pub fn find_bad_cycle(g: &FlowGraph) -> Option<Cycle> {
    let adj = g.fractional_adjacency();
    let n = g.vertex_count();
    let mut visited = vec![false; n];
    let mut pos = vec![usize::MAX; n];

    for root in 0..n {
        if visited[root] || adj[root].is_empty() {
            continue;
        }
        // Frames: (vertex, next adjacency slot, step used to enter).
        let mut stack: Vec<(usize, usize, Option<Step>)> = vec![(root, 0, None)];
        visited[root] = true;
        pos[root] = 0;
        while let Some(top) = stack.last_mut() {
            let (v, slot, entered) = *top;
            if slot == adj[v].len() {
                pos[v] = usize::MAX;
                stack.pop();
                continue;
            }
            top.1 += 1;
            let (w, edge, forward) = adj[v][slot];
            if entered.is_some_and(|s| s.edge == edge) {
                continue;
            }
            let step = Step { edge, forward };
            if pos[w] != usize::MAX {
                let start = pos[w];
                let vertices = stack[start..].iter().map(|f| f.0).collect();
                let mut steps: Vec<Step> = stack[start + 1..]
                    .iter()
                    .map(|f| f.2.expect("non-root frame has an entering step"))
                    .collect();
                steps.push(step);
                return Some(Cycle { vertices, steps });
            }
            if !visited[w] {
                visited[w] = true;
                pos[w] = stack.len();
                stack.push((w, 0, Some(step)));
            }
        }
    }
    None
}

fn check_cycle(g: &FlowGraph, cycle: &Cycle) -> Result<()> {
    let n = cycle.vertices.len();
    if n == 0 || cycle.steps.len() != n {
        return Err(Error::Contract("cycle must have one step per vertex".into()));
    }
    let mut seen = vec![false; g.vertex_count()];
    for &v in &cycle.vertices {
        if v >= g.vertex_count() || std::mem::replace(&mut seen[v], true) {
            return Err(Error::Contract(format!("cycle vertex {v} repeated or out of range")));
        }
    }
    if n == 1 {
        return Err(Error::Contract("a cycle needs at least two vertices".into()));
    }
    if n == 2 && cycle.steps[0].edge == cycle.steps[1].edge {
        return Err(Error::Contract("a 2-cycle needs two distinct edges".into()));
    }
    for (k, s) in cycle.steps.iter().enumerate() {
        let e = g
            .edges
            .get(s.edge)
            .ok_or_else(|| Error::Contract(format!("edge {} out of range", s.edge)))?;
        let (from, to) = if s.forward { (e.tail, e.head) } else { (e.head, e.tail) };
        if from != cycle.vertices[k] || to != cycle.vertices[(k + 1) % n] {
            return Err(Error::Contract(format!("step {k} does not connect the cycle")));
        }
        if e.value.is_integer() {
            return Err(Error::Contract(format!("edge {} has an integer value", s.edge)));
        }
    }
    Ok(())
}

fn eliminate_in_place(g: &mut FlowGraph, cycle: &Cycle) -> Result<Rational> {
    check_cycle(g, cycle)?;
    let tau = cycle
        .steps
        .iter()
        .map(|s| frac(&g.traversed(s)))
        .min()
        .expect("nonempty cycle");
    for s in &cycle.steps {
        let v = &mut g.edges[s.edge].value;
        if s.forward {
            *v -= &tau;
        } else {
            *v += &tau;
        }
    }
    Ok(tau)
}

/// Push the smallest fractional part `τ` around a bad cycle: traversed values
/// drop by `τ`, so at least one becomes an integer and every divergence is
/// unchanged.
pub fn eliminate_cycle(g: &FlowGraph, cycle: &Cycle) -> Result<FlowGraph> {
    let mut out = g.clone();
    eliminate_in_place(&mut out, cycle)?;
    Ok(out)
}

/// Round every fractional edge of a graph whose fractional edges form a
/// forest. Targets are the divergences of `g`; integer targets are met
/// exactly, fractional ones to within less than 1.
pub fn round_forest(g: &FlowGraph) -> Result<FlowGraph> {
    if let Some(c) = find_bad_cycle(g) {
        return Err(Error::Contract(format!(
            "fractional edges contain a cycle through vertices {:?}",
            c.vertices
        )));
    }
    let mut out = g.clone();
    // A loop adds p and -p at the same vertex, so any rounding keeps R_v.
    for e in out.edges.iter_mut() {
        if e.tail == e.head && !e.value.is_integer() {
            e.value = e.value.floor();
        }
    }
    let adj = out.fractional_adjacency();
    let n = out.vertex_count();
    // Current divergence minus target.
    let mut dev = vec![Rational::zero(); n];
    let mut visited = vec![false; n];
    let minus_one = -Rational::one();

    for root in 0..n {
        if visited[root] || adj[root].is_empty() {
            continue;
        }
        visited[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(w, edge, forward) in &adj[u] {
                if visited[w] {
                    continue;
                }
                let step = Step { edge, forward };
                let q = out.traversed(&step);
                let down = q.floor();
                let t = if &dev[u] + (&down - &q) > minus_one {
                    down
                } else {
                    down + Rational::one()
                };
                let delta = &t - &q;
                dev[u] += &delta;
                dev[w] -= &delta;
                out.edges[edge].value = if forward { t } else { -t };
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    debug_assert!(dev.iter().all(|d| d.abs() < Rational::one()));
    Ok(out)
}

/// Integer flow produced by [`round_flow`]; `values[e]` is `t_e` for the
/// stored direction of edge `e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundedFlow {
    pub values: Vec<BigInt>,
    /// Number of bad cycles cancelled in the first pass.
    pub cycles_eliminated: usize,
    /// Fractional edges left for the forest pass.
    pub forest_edges: usize,
}

impl RoundedFlow {
    pub fn divergences(&self, g: &FlowGraph) -> Vec<BigInt> {
        let mut out = vec![BigInt::zero(); g.vertex_count()];
        for (e, t) in g.edges().iter().zip(&self.values) {
            out[e.tail] += t;
            out[e.head] -= t;
        }
        out
    }

    /// Integer graph with the same topology, for serialization.
    pub fn to_graph(&self, g: &FlowGraph) -> FlowGraph {
        FlowGraph {
            vertices: g.vertex_count(),
            edges: g
                .edges()
                .iter()
                .zip(&self.values)
                .map(|(e, t)| FlowEdge {
                    tail: e.tail,
                    head: e.head,
                    value: Rational::from_integer(t.clone()),
                })
                .collect(),
        }
    }
}

pub fn round_flow(g: &FlowGraph) -> Result<RoundedFlow> {
    let mut work = g.clone();
    let initial = work.fractional_edge_count();
    let mut cycles = 0usize;
    while let Some(c) = find_bad_cycle(&work) {
        eliminate_in_place(&mut work, &c)?;
        cycles += 1;
        if cycles > initial {
            return Err(Error::Contract("cycle cancelling failed to terminate".into()));
        }
    }
    let forest_edges = work.fractional_edge_count();
    let rounded = round_forest(&work)?;
    let values = rounded
        .edges
        .iter()
        .map(|e| {
            debug_assert!(e.value.is_integer());
            e.value.to_integer()
        })
        .collect();
    Ok(RoundedFlow {
        values,
        cycles_eliminated: cycles,
        forest_edges,
    })
}

/// Parse `a/b`, an integer, or a decimal with optional exponent exactly.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let bad = || Error::Input(format!("cannot parse `{text}` as a rational"));
    let s = text.trim();
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(num, den));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(k) => (&s[..k], s[k + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty()
        || !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let all: BigInt = format!("{int_part}{frac_part}0").parse().map_err(|_| bad())?;
    let scale = exp - frac_part.len() as i32 - 1;
    let ten = BigInt::from(10);
    let mut r = Rational::from_integer(all);
    if scale >= 0 {
        r *= Rational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= Rational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -r } else { r })
}

pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parse the `flowgraph v=<n> e=<m>` text format.
pub fn read_flow_graph(text: &str) -> Result<FlowGraph> {
    let mut graph: Option<(FlowGraph, usize)> = None;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let parse_err = |msg: String| Error::Parse { line: line_no, msg };
        let Some((g, _)) = graph.as_mut() else {
            let field = |t: &str, key: &str| {
                t.strip_prefix(key)
                    .and_then(|v| v.strip_prefix('='))
                    .and_then(|v| v.parse::<usize>().ok())
                    .ok_or_else(|| parse_err(format!("expected `{key}=<integer>`, found `{t}`")))
            };
            if tokens.len() != 3 || tokens[0] != "flowgraph" {
                return Err(parse_err("expected header `flowgraph v=<n> e=<m>`".into()));
            }
            graph = Some((FlowGraph::new(field(tokens[1], "v")?), field(tokens[2], "e")?));
            continue;
        };
        if tokens.len() != 3 {
            return Err(parse_err(format!("expected `u v p`, found {} fields", tokens.len())));
        }
        let vertex = |t: &str, name: &str| {
            t.parse::<usize>()
                .map_err(|_| parse_err(format!("{name}: `{t}` is not a vertex id")))
        };
        let u = vertex(tokens[0], "u")?;
        let v = vertex(tokens[1], "v")?;
        let p = parse_rational(tokens[2]).map_err(|e| parse_err(format!("p: {e}")))?;
        g.add_edge(u, v, p).map_err(|e| parse_err(e.to_string()))?;
    }
    let (g, m) = graph.ok_or(Error::Parse {
        line: 1,
        msg: "missing `flowgraph` header".into(),
    })?;
    if g.edge_count() != m {
        return Err(Error::Parse {
            line: 1,
            msg: format!("header declares e={m} edges but {} were found", g.edge_count()),
        });
    }
    Ok(g)
}

pub fn write_flow_graph(g: &FlowGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "flowgraph v={} e={}", g.vertex_count(), g.edge_count());
    for e in g.edges() {
        let _ = writeln!(out, "{} {} {}", e.tail, e.head, format_rational(&e.value));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn graph(n: usize, edges: &[(usize, usize, &str)]) -> FlowGraph {
        let mut g = FlowGraph::new(n);
        for &(u, v, p) in edges {
            g.add_edge(u, v, q(p)).unwrap();
        }
        g
    }

    fn triangle() -> FlowGraph {
        graph(3, &[(0, 1, "0.5"), (1, 2, "0.5"), (2, 0, "0.5")])
    }

    #[test]
    fn parse_rational_forms() {
        assert_eq!(q("3"), Rational::from_integer(3.into()));
        assert_eq!(q("-1/2"), Rational::new((-1).into(), 2.into()));
        assert_eq!(q("0.3"), Rational::new(3.into(), 10.into()));
        assert_eq!(q("-.25"), Rational::new((-1).into(), 4.into()));
        assert_eq!(q("1.5e2"), Rational::from_integer(150.into()));
        assert_eq!(q("25e-3"), Rational::new(1.into(), 40.into()));
        for bad in ["", "x", "1/0", "1.2.3", "--1", "e5"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn no_bad_cycle_when_integral() {
        let g = graph(3, &[(0, 1, "2"), (1, 2, "-1"), (2, 0, "4")]);
        assert_eq!(find_bad_cycle(&g), None);
        let r = round_flow(&g).unwrap();
        assert_eq!(r.values, vec![2.into(), (-1).into(), 4.into()]);
        assert_eq!(r.cycles_eliminated, 0);
    }

    #[test]
    fn triangle_cycle_found_and_cancelled() {
        let g = triangle();
        assert!(g.divergences().iter().all(Zero::is_zero));
        let c = find_bad_cycle(&g).unwrap();
        assert_eq!(c.vertices, vec![0, 1, 2]);
        assert!(c.steps.iter().all(|s| s.forward));
        let h = eliminate_cycle(&g, &c).unwrap();
        assert!(h.edges().iter().all(|e| e.value.is_zero()));
        let r = round_flow(&g).unwrap();
        assert_eq!(r.values, vec![BigInt::zero(); 3]);
        assert_eq!(r.forest_edges, 0);
    }

    #[test]
    fn parallel_pair_is_a_two_cycle() {
        let g = graph(2, &[(0, 1, "0.5"), (0, 1, "0.5")]);
        let c = find_bad_cycle(&g).unwrap();
        assert_eq!(c.vertices, vec![0, 1]);
        assert_eq!(
            c.steps,
            vec![Step { edge: 0, forward: true }, Step { edge: 1, forward: false }]
        );
        let h = eliminate_cycle(&g, &c).unwrap();
        assert_eq!(h.value(0), &q("0"));
        assert_eq!(h.value(1), &q("1"));
        assert_eq!(h.divergence(0), q("1"));
    }

    #[test]
    fn four_cycle_of_point_three() {
        let g = graph(4, &[(0, 1, "0.3"), (1, 2, "0.3"), (2, 3, "0.3"), (3, 0, "0.3")]);
        let c = find_bad_cycle(&g).unwrap();
        let h = eliminate_cycle(&g, &c).unwrap();
        assert!(h.edges().iter().all(|e| e.value.is_zero()));
    }

    #[test]
    fn eliminate_rejects_non_bad_cycles() {
        let g = graph(3, &[(0, 1, "0.5"), (1, 2, "1"), (2, 0, "0.5")]);
        let c = Cycle {
            vertices: vec![0, 1, 2],
            steps: (0..3).map(|edge| Step { edge, forward: true }).collect(),
        };
        assert!(matches!(eliminate_cycle(&g, &c), Err(Error::Contract(_))));
        let broken = Cycle {
            vertices: vec![0, 2, 1],
            steps: (0..3).map(|edge| Step { edge, forward: true }).collect(),
        };
        assert!(matches!(eliminate_cycle(&triangle(), &broken), Err(Error::Contract(_))));
    }

    #[test]
    fn forest_rounding_of_boundary_edge_picks_floor() {
        let g = graph(2, &[(0, 1, "0.5")]);
        assert_eq!(g.divergence(0), q("0.5"));
        let h = round_forest(&g).unwrap();
        assert_eq!(h.value(0), &q("0"));
        assert_eq!((h.divergence(0) - g.divergence(0)).abs(), q("1/2"));
        let r = round_flow(&g).unwrap();
        assert_eq!(r.values, vec![BigInt::zero()]);
        assert_eq!(r.forest_edges, 1);
    }

    #[test]
    fn forest_rounding_without_fractional_edges_is_identity() {
        let g = graph(3, &[(0, 1, "3"), (1, 2, "-2")]);
        assert_eq!(round_forest(&g).unwrap(), g);
    }

    #[test]
    fn forest_rounding_rejects_cycles() {
        assert!(matches!(round_forest(&triangle()), Err(Error::Contract(_))));
    }

    #[test]
    fn fractional_leaf_forces_fractional_divergence() {
        // A star whose leaves carry fractional edges: every leaf divergence is
        // that edge's value, so integer divergences exclude this shape.
        let g = graph(4, &[(0, 1, "0.25"), (0, 2, "1/3"), (0, 3, "-7/12")]);
        assert!(g.divergence(0).is_integer());
        for leaf in 1..4 {
            assert!(!g.divergence(leaf).is_integer());
        }
        let r = round_flow(&g).unwrap();
        assert_eq!(r.divergences(&g)[0], BigInt::zero());
    }

    #[test]
    fn path_with_fractional_ends_keeps_integer_interior() {
        let g = graph(4, &[(0, 1, "0.4"), (1, 2, "1.4"), (2, 3, "0.7")]);
        let div = g.divergences();
        let r = round_flow(&g).unwrap();
        let out = r.divergences(&g);
        for v in 0..4 {
            let err = (Rational::from_integer(out[v].clone()) - &div[v]).abs();
            assert!(err < Rational::one());
            if div[v].is_integer() {
                assert!(err.is_zero());
            }
        }
    }

    #[test]
    fn self_loops_round_without_touching_divergence() {
        let g = graph(2, &[(0, 0, "2.5"), (0, 1, "1")]);
        let r = round_flow(&g).unwrap();
        assert_eq!(r.values, vec![2.into(), 1.into()]);
    }

    #[test]
    fn graph_file_round_trip_and_errors() {
        let text = "# triangle\nflowgraph v=3 e=3\n0 1 0.5\n1 2 1/2\n2 0 .5\n";
        let g = read_flow_graph(text).unwrap();
        assert_eq!(g, triangle());
        assert_eq!(read_flow_graph(&write_flow_graph(&g)).unwrap(), g);
        let out = round_flow(&g).unwrap().to_graph(&g);
        assert_eq!(write_flow_graph(&out), "flowgraph v=3 e=3\n0 1 0\n1 2 0\n2 0 0\n");

        for (bad, line) in [
            ("flowgraph v=2 e=1\n0 5 1\n", 2),
            ("flowgraph v=2 e=1\n0 1 abc\n", 2),
            ("flowgraph v=2 e=2\n0 1 1\n", 1),
            ("graph v=2 e=1\n", 1),
            ("flowgraph v=2 e=1\n0 1\n", 2),
        ] {
            match read_flow_graph(bad) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{bad}"),
                other => panic!("{bad}: {other:?}"),
            }
        }
    }

    #[test]
    fn f64_values_are_read_exactly() {
        let mut g = FlowGraph::new(2);
        g.add_edge_f64(0, 1, 0.1).unwrap();
        assert_ne!(g.value(0), &q("0.1"));
        assert!(g.add_edge_f64(0, 1, f64::NAN).is_err());
        assert!(g.add_edge(0, 2, q("1")).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// Random integer flow plus random fractional cycles; every
        /// divergence is an integer by construction.
        fn cyclic_graph() -> impl Strategy<Value = FlowGraph> {
            let ints = prop::collection::vec((0usize..12, 0usize..12, -3i64..4), 0..20);
            let cycles = prop::collection::vec(
                (prop::collection::vec(0usize..12, 2..6), 1i64..12, 2i64..13),
                0..10,
            );
            (ints, cycles).prop_map(|(ints, cycles)| {
                let mut g = FlowGraph::new(12);
                for (u, v, p) in ints {
                    g.add_edge(u, v, Rational::from_integer(p.into())).unwrap();
                }
                for (mut vs, num, den) in cycles {
                    vs.dedup();
                    if vs.len() < 2 || vs.first() == vs.last() {
                        continue;
                    }
                    let c = Rational::new(num.into(), den.into());
                    for k in 0..vs.len() {
                        g.add_edge(vs[k], vs[(k + 1) % vs.len()], c.clone()).unwrap();
                    }
                }
                g
            })
        }

        proptest! {
            #[test]
            fn rounding_preserves_identities(g in cyclic_graph()) {
                let div = g.divergences();
                prop_assert!(div.iter().all(|d| d.is_integer()));
                let r = round_flow(&g).unwrap();
                prop_assert!(r.cycles_eliminated <= g.fractional_edge_count());
                prop_assert_eq!(r.forest_edges, 0);
                for (e, t) in g.edges().iter().zip(&r.values) {
                    let lo = e.value.floor().to_integer();
                    prop_assert!(*t == lo || *t == &lo + 1);
                    if e.value.is_integer() {
                        prop_assert_eq!(t, &e.value.to_integer());
                    }
                }
                let out = r.divergences(&g);
                for v in 0..g.vertex_count() {
                    prop_assert_eq!(&out[v], &div[v].to_integer());
                }
            }

            #[test]
            fn fractional_subgraph_has_min_degree_two(g in cyclic_graph()) {
                let mut degree = vec![0usize; g.vertex_count()];
                for e in g.edges() {
                    if !e.value.is_integer() && e.tail != e.head {
                        degree[e.tail] += 1;
                        degree[e.head] += 1;
                    }
                }
                prop_assert!(degree.iter().all(|&d| d == 0 || d >= 2));
            }

            #[test]
            fn elimination_preserves_divergence(g in cyclic_graph()) {
                if let Some(c) = find_bad_cycle(&g) {
                    let h = eliminate_cycle(&g, &c).unwrap();
                    prop_assert_eq!(h.divergences(), g.divergences());
                    prop_assert!(h.fractional_edge_count() < g.fractional_edge_count());
                    for (a, b) in g.edges().iter().zip(h.edges()) {
                        prop_assert!((&a.value - &b.value).abs() < Rational::one());
                    }
                }
            }

            #[test]
            fn arbitrary_values_round_within_one(
                edges in prop::collection::vec((0usize..8, 0usize..8, -40i64..40, 1i64..9), 0..16)
            ) {
                let mut g = FlowGraph::new(8);
                for (u, v, n, d) in edges {
                    g.add_edge(u, v, Rational::new(n.into(), d.into())).unwrap();
                }
                let div = g.divergences();
                let r = round_flow(&g).unwrap();
                let out = r.divergences(&g);
                for v in 0..8 {
                    let err = (Rational::from_integer(out[v].clone()) - &div[v]).abs();
                    prop_assert!(err < Rational::one());
                    if div[v].is_integer() {
                        prop_assert!(err.is_zero());
                    }
                }
            }
        }
    }
}
