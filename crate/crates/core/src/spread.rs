//! Bounded-displacement bijections onto the unit lattice.
//!
//! An integer [`TransferPlan`] says how many points cross between adjacent
//! cubes. [`apply_transfers`] moves that many points, each at most once and
//! by at most `2N`, after which every interior cube holds `N^d` points (some
//! of them possibly reserved sites fed from outside the window). Within each
//! cube, [`assign_within_cubes`] then pairs points with lattice sites at
//! minimal bottleneck distance, which is below `N`.
//! [`uniform_spread_certificate`] runs the whole chain and doubles `N`
//! whenever the rounded plan is not realizable.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::density::{cube_counts, estimate_density, CubeGrid};
use crate::error::{input, Error, Result};
use crate::flow_round::{round_flow, RoundedFlow};
use crate::model::{grid_indices, linf, GridIndex, PointSet};
use crate::oracle::{one_sided_bottleneck, Metric};
use crate::transfer::{add_index, neighbour_offsets, rescale_to_unit_density, solve_fractional_transfers, GridFlow};

/// One directed integer transfer `t > 0` between plan vertices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEdge {
    pub from: usize,
    pub to: usize,
    pub amount: u64,
}

/// Integer transfers `t_{i,j}` on interior cubes, plus the slack vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferPlan {
    pub side: f64,
    pub origin: Vec<f64>,
    pub target: u64,
    pub cubes: Vec<GridIndex>,
    pub counts: Vec<u64>,
    pub slack: Option<usize>,
    /// Positive transfers only, one per direction actually used.
    pub edges: Vec<PlanEdge>,
}

impl TransferPlan {
    /// Integer plan from a rounding of `flow`'s graph.
    pub fn from_rounded(flow: &GridFlow, rounded: &RoundedFlow) -> Result<Self> {
        let g = &flow.graph;
        if rounded.values.len() != g.edge_count() {
            return Err(Error::Contract("rounded flow does not match the graph".into()));
        }
        let mut net: BTreeMap<(usize, usize), i64> = BTreeMap::new();
        for (e, t) in g.edges().iter().zip(&rounded.values) {
            let t = t
                .to_i64()
                .ok_or_else(|| Error::Contract("transfer exceeds i64".into()))?;
            let (u, v, t) = if e.tail <= e.head { (e.tail, e.head, t) } else { (e.head, e.tail, -t) };
            *net.entry((u, v)).or_default() += t;
        }
        let edges = net
            .into_iter()
            .filter(|&(_, t)| t != 0)
            .map(|((u, v), t)| {
                if t > 0 {
                    PlanEdge { from: u, to: v, amount: t as u64 }
                } else {
                    PlanEdge { from: v, to: u, amount: (-t) as u64 }
                }
            })
            .collect();
        Ok(TransferPlan {
            side: flow.side,
            origin: flow.origin.clone(),
            target: flow.target,
            cubes: flow.cubes.clone(),
            counts: flow.counts.clone(),
            slack: flow.slack,
            edges,
        })
    }

    /// Plan with no transfers on the interior cubes of `grid`.
    pub fn empty(grid: &CubeGrid) -> Self {
        let cubes = grid.interior_indices();
        TransferPlan {
            side: grid.side(),
            origin: grid.origin().to_vec(),
            target: grid.side().powi(grid.dim() as i32) as u64,
            counts: cubes.iter().map(|c| grid.count(c).unwrap_or(0)).collect(),
            cubes,
            slack: None,
            edges: Vec::new(),
        }
    }

    /// `Σ_j t_{i,j}` per cube vertex.
    pub fn divergences(&self) -> Vec<i64> {
        let mut out = vec![0i64; self.cubes.len() + 1];
        for e in &self.edges {
            out[e.from] += e.amount as i64;
            out[e.to] -= e.amount as i64;
        }
        out.truncate(self.cubes.len());
        out
    }

    /// `N^d = P_i - Σ_j t_{i,j}` at every cube.
    pub fn divergence_holds(&self) -> bool {
        self.divergences()
            .iter()
            .zip(&self.counts)
            .all(|(d, &p)| p as i64 - d == self.target as i64)
    }

    /// Cubes where `Σ_j |t_{i,j}| > min(P_i, N^d)`.
    pub fn feasibility_violations(&self) -> Vec<GridIndex> {
        let mut load = vec![0u64; self.cubes.len() + 1];
        for e in &self.edges {
            load[e.from] += e.amount;
            load[e.to] += e.amount;
        }
        (0..self.cubes.len())
            .filter(|&k| load[k] > self.counts[k].min(self.target))
            .map(|k| self.cubes[k].clone())
            .collect()
    }
}

/// One relocation of a single unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub unit: usize,
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub from_cube: GridIndex,
    /// Destination cube, `None` when the unit leaves the interior.
    pub to_cube: Option<GridIndex>,
    pub displacement: f64,
}

/// A unit of the input multiset and where it currently sits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub source: Vec<f64>,
    pub position: Vec<f64>,
    /// Plan vertex holding the unit, `None` outside the interior.
    pub cube: Option<usize>,
    pub moved: bool,
}

/// Result of [`apply_transfers`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovedSet {
    pub side: f64,
    pub origin: Vec<f64>,
    pub target: u64,
    pub cubes: Vec<GridIndex>,
    pub units: Vec<Unit>,
    /// Sites per cube left for points arriving from outside the window.
    pub reserved: Vec<u64>,
    pub log: Vec<Move>,
}

impl MovedSet {
    /// Units currently inside cube vertex `k`.
    pub fn members(&self, k: usize) -> Vec<usize> {
        (0..self.units.len())
            .filter(|&u| self.units[u].cube == Some(k))
            .collect()
    }

    /// The interior units at their current positions.
    pub fn points(&self, window: crate::model::Window) -> Result<PointSet> {
        let entries = self
            .units
            .iter()
            .filter(|u| u.cube.is_some())
            .map(|u| (u.position.clone(), 1))
            .collect();
        PointSet::new(window, entries)
    }

    pub fn max_move(&self) -> f64 {
        self.log.iter().map(|m| m.displacement).fold(0.0, f64::max)
    }
}

fn margin(side: f64) -> f64 {
    side * 1e-6
}

/// `l∞` distance from `p` to the closed cube `[a, a + N]`.
fn dist_to_cube(p: &[f64], anchor: &[f64], side: f64) -> f64 {
    p.iter()
        .zip(anchor)
        .map(|(&x, &a)| (a - x).max(x - (a + side)).max(0.0))
        .fold(0.0, f64::max)
}

/// Nearest point of the half-open cube at `anchor`, pulled inside by the
/// margin along every axis where `p` is outside.
fn project_into(p: &[f64], anchor: &[f64], side: f64) -> Vec<f64> {
    let m = margin(side);
    p.iter()
        .zip(anchor)
        .map(|(&x, &a)| {
            if x < a + m {
                a + m
            } else if x > a + side - m {
                a + side - m
            } else {
                x
            }
        })
        .collect()
}

/// Relocate points according to `plan`.
///
/// Directed transfers are processed in lexicographic order of their cube
/// indices (slack last). For each, the still-unmoved original units of the
/// source cube nearest to the destination are projected just inside it.
/// Transfers out to the slack move units into the closest cube outside the
/// interior; transfers in from the slack reserve sites in the receiving cube.
pub fn apply_transfers(set: &PointSet, grid: &CubeGrid, plan: &TransferPlan) -> Result<MovedSet> {
    if grid.side() != plan.side || grid.origin() != plan.origin.as_slice() {
        return input("plan and grid use different cubes");
    }
    if !plan.divergence_holds() {
        return Err(Error::Contract("plan violates the divergence identity".into()));
    }
    let side = plan.side;
    let lookup: BTreeMap<&[i64], usize> = plan
        .cubes
        .iter()
        .enumerate()
        .map(|(k, c)| (c.as_slice(), k))
        .collect();
    let mut units = Vec::with_capacity(set.total() as usize);
    for (_, p) in set.units() {
        let cube = lookup.get(grid.index_of(p)?.as_slice()).copied();
        units.push(Unit {
            source: p.to_vec(),
            position: p.to_vec(),
            cube,
            moved: false,
        });
    }
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); plan.cubes.len()];
    for (u, unit) in units.iter().enumerate() {
        if let Some(k) = unit.cube {
            pools[k].push(u);
        }
    }

    let is_slack = |v: usize| Some(v) == plan.slack;
    let mut order: Vec<&PlanEdge> = plan.edges.iter().collect();
    order.sort_by(|a, b| {
        let key = |v: usize| (is_slack(v), if is_slack(v) { None } else { Some(&plan.cubes[v]) });
        (key(a.from), key(a.to)).cmp(&(key(b.from), key(b.to)))
    });

    let offsets = neighbour_offsets(grid.dim());
    let mut reserved = vec![0u64; plan.cubes.len()];
    let mut log = Vec::new();
    for e in order {
        if is_slack(e.from) {
            reserved[e.to] += e.amount;
            continue;
        }
        let from_cube = plan.cubes[e.from].clone();
        // Candidate destination cubes: the neighbour, or every cube outside
        // the interior next to the source cube.
        let dests: Vec<(Option<usize>, GridIndex)> = if is_slack(e.to) {
            offsets
                .iter()
                .map(|o| add_index(&from_cube, o))
                .filter(|c| !lookup.contains_key(c.as_slice()))
                .map(|c| (None, c))
                .collect()
        } else {
            vec![(Some(e.to), plan.cubes[e.to].clone())]
        };
        if dests.is_empty() {
            return Err(Error::Infeasible {
                cube: from_cube,
                reason: "export to the boundary from a cube with no outside neighbour".into(),
            });
        }
        let anchors: Vec<Vec<f64>> = dests.iter().map(|(_, c)| grid.anchor(c)).collect();
        let nearest = |p: &[f64]| {
            anchors
                .iter()
                .enumerate()
                .map(|(k, a)| (dist_to_cube(p, a, side), k))
                .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
                .expect("nonempty destinations")
        };
        let pool = &mut pools[e.from];
        pool.retain(|&u| !units[u].moved);
        if (pool.len() as u64) < e.amount {
            return Err(Error::Infeasible {
                cube: from_cube,
                reason: format!(
                    "needs to send {} points but only {} unmoved points remain",
                    e.amount,
                    pool.len()
                ),
            });
        }
        let mut ranked: Vec<(f64, usize, usize)> = pool
            .iter()
            .map(|&u| {
                let (d, k) = nearest(&units[u].source);
                (d, u, k)
            })
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, u, k) in ranked.iter().take(e.amount as usize) {
            let to = project_into(&units[u].source, &anchors[k], side);
            let displacement = linf(&units[u].source, &to);
            let (to_vertex, to_cube) = dests[k].clone();
            log.push(Move {
                unit: u,
                from: units[u].source.clone(),
                to: to.clone(),
                from_cube: from_cube.clone(),
                to_cube: to_vertex.map(|_| to_cube),
                displacement,
            });
            let unit = &mut units[u];
            unit.position = to;
            unit.cube = to_vertex;
            unit.moved = true;
        }
    }

    let moved = MovedSet {
        side,
        origin: plan.origin.clone(),
        target: plan.target,
        cubes: plan.cubes.clone(),
        units,
        reserved,
        log,
    };
    for k in 0..moved.cubes.len() {
        let held = moved.members(k).len() as u64 + moved.reserved[k];
        if held != moved.target {
            return Err(Error::Contract(format!(
                "cube {:?} holds {held} points after transfers, expected {}",
                moved.cubes[k], moved.target
            )));
        }
    }
    if moved.log.iter().any(|m| m.displacement > 2.0 * side) {
        return Err(Error::Contract("a move exceeded 2N".into()));
    }
    Ok(moved)
}

/// Bijection entry, in the coordinates of the input set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateEntry {
    pub source: Vec<f64>,
    pub target: Vec<f64>,
    pub displacement: f64,
    /// Relocation phase (zero for unmoved points).
    pub move_displacement: f64,
    /// Within-cube assignment phase.
    pub assign_displacement: f64,
}

/// A unit moved out of the covered interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedUnit {
    pub source: Vec<f64>,
    pub position: Vec<f64>,
    pub displacement: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Certified,
    Escalated,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub density: f64,
    /// Integer cube side after rescaling to unit density.
    pub n: u32,
    /// Coordinates were multiplied by this factor before cube counting.
    pub scale: f64,
    /// `N / scale`: cube side in input coordinates.
    pub cube_side: f64,
    pub origin: Vec<f64>,
    pub metric: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub c_achieved: f64,
    pub max_move: f64,
    pub max_assign: f64,
    /// `3N` in input coordinates.
    pub bound: f64,
    pub interior_cubes: usize,
    /// Units in cubes not entirely inside the window.
    pub excluded_units: usize,
}

/// One N tried by [`uniform_spread_certificate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub n: u32,
    pub outcome: String,
    /// `max |p|` of the fractional flow, if one was computed.
    pub bottleneck: Option<f64>,
    pub infeasible_cubes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadCertificate {
    pub status: Status,
    pub parameters: Parameters,
    pub summary: Summary,
    pub entries: Vec<CertificateEntry>,
    pub exported: Vec<ExportedUnit>,
    /// Lattice sites reserved for points from outside the window.
    pub unfilled_sites: Vec<Vec<f64>>,
    pub attempts: Vec<Attempt>,
}

impl SpreadCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    /// Per-entry bounds: move `<= 2N`, assignment `< N`, total `<= 3N`, with
    /// relative tolerance `tol` for the inverse rescaling.
    pub fn bound_violations(&self, tol: f64) -> usize {
        let n = self.parameters.cube_side;
        let slack = 1.0 + tol;
        self.entries
            .iter()
            .filter(|e| {
                !(e.move_displacement <= 2.0 * n * slack
                    && e.assign_displacement < n * slack
                    && e.displacement <= 3.0 * n * slack
                    && e.displacement <= (e.move_displacement + e.assign_displacement) * slack)
            })
            .count()
    }

    /// Targets are pairwise distinct.
    pub fn is_injective(&self) -> bool {
        let mut t: Vec<&Vec<f64>> = self.entries.iter().map(|e| &e.target).collect();
        t.sort_by(|a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        t.windows(2).all(|w| w[0] != w[1])
    }
}

/// Lattice sites `anchor + {0..N-1}^d` of one cube.
fn cube_sites(anchor: &[f64], side: f64) -> Vec<Vec<f64>> {
    let n = side as i64;
    grid_indices(&vec![0..n; anchor.len()])
        .into_iter()
        .map(|o| anchor.iter().zip(&o).map(|(a, k)| a + *k as f64).collect())
        .collect()
}

/// Per-cube assignment of points to the cube's unit-lattice sites.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(unit, site)` for every interior unit.
    pub pairs: Vec<(usize, Vec<f64>)>,
    pub unfilled_sites: Vec<Vec<f64>>,
    pub max_assign: f64,
}

/// Match each cube's points to its `N^d` unit-lattice sites at minimal
/// bottleneck distance. Cube anchors must be lattice points.
pub fn assign_within_cubes(moved: &MovedSet, metric: Metric) -> Result<Assignment> {
    let side = moved.side;
    let mut pairs = Vec::new();
    let mut unfilled = Vec::new();
    let mut max_assign: f64 = 0.0;
    for (k, c) in moved.cubes.iter().enumerate() {
        let anchor: Vec<f64> = c
            .iter()
            .zip(&moved.origin)
            .map(|(&i, &o)| o + i as f64 * side)
            .collect();
        if anchor.iter().any(|a| a.fract() != 0.0) {
            return input(format!("cube {c:?} is not anchored on the unit lattice"));
        }
        let members = moved.members(k);
        if members.len() as u64 + moved.reserved[k] != moved.target {
            return Err(Error::Contract(format!(
                "cube {c:?} holds {} points and {} reserved sites, expected {}",
                members.len(),
                moved.reserved[k],
                moved.target
            )));
        }
        let sites = cube_sites(&anchor, side);
        let pts: Vec<Vec<f64>> = members.iter().map(|&u| moved.units[u].position.clone()).collect();
        let m = one_sided_bottleneck(&pts, &sites, metric)?;
        let mut used = vec![false; sites.len()];
        for &(a, b) in &m.pairs {
            used[b] = true;
            let d = metric.dist(&pts[a], &sites[b]);
            if d >= side {
                return Err(Error::Contract(format!("assignment in cube {c:?} reached N")));
            }
            max_assign = max_assign.max(d);
            pairs.push((members[a], sites[b].clone()));
        }
        unfilled.extend(sites.into_iter().zip(used).filter(|(_, u)| !u).map(|(s, _)| s));
    }
    pairs.sort_by_key(|p| p.0);
    Ok(Assignment {
        pairs,
        unfilled_sites: unfilled,
        max_assign,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadConfig {
    /// First cube side tried, in unit-density coordinates.
    pub initial_n: u32,
    /// Maximum number of sides tried (`N, 2N, 4N, ...`).
    pub cap: u32,
    /// Use this density instead of estimating it.
    pub density: Option<f64>,
    pub metric: Metric,
}

impl Default for SpreadConfig {
    fn default() -> Self {
        SpreadConfig {
            initial_n: 4,
            cap: 4,
            density: None,
            metric: Metric::Linf,
        }
    }
}

/// Density from the largest cube at the window's lower corner.
pub fn default_density(set: &PointSet) -> Result<f64> {
    let w = set.window();
    let t = w.min_extent();
    Ok(estimate_density(set, &[t], &[w.lo.clone()])?.density)
}

struct Built {
    moved: MovedSet,
    assignment: Assignment,
    grid: CubeGrid,
}

fn attempt(set: &PointSet, n: u32, metric: Metric, log: &mut Vec<Attempt>) -> Result<Option<Built>> {
    let mut record = Attempt {
        n,
        outcome: String::new(),
        bottleneck: None,
        infeasible_cubes: 0,
    };
    let grid = cube_counts(set, n as f64, None)?;
    let flow = solve_fractional_transfers(&grid)?;
    record.bottleneck = flow.bottleneck.to_f64();
    let rounded = round_flow(&flow.graph)?;
    let plan = TransferPlan::from_rounded(&flow, &rounded)?;
    let bad = plan.feasibility_violations();
    if !bad.is_empty() {
        record.outcome = "transfer load exceeds min(P_i, N^d)".into();
        record.infeasible_cubes = bad.len();
        log.push(record);
        return Ok(None);
    }
    let moved = match apply_transfers(set, &grid, &plan) {
        Ok(m) => m,
        Err(Error::Infeasible { reason, .. }) => {
            record.outcome = reason;
            record.infeasible_cubes = 1;
            log.push(record);
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    let assignment = assign_within_cubes(&moved, metric)?;
    record.outcome = "certified".into();
    log.push(record);
    Ok(Some(Built {
        moved,
        assignment,
        grid,
    }))
}

/// Full pipeline with `N`-doubling; see the module docs.
pub fn uniform_spread_certificate(set: &PointSet, config: &SpreadConfig) -> Result<SpreadCertificate> {
    if set.window().is_empty() {
        return input("window is empty");
    }
    if config.initial_n == 0 || config.cap == 0 {
        return input("initial N and cap must be positive");
    }
    let density = match config.density {
        Some(d) => d,
        None => default_density(set)?,
    };
    let scale = if density > 0.0 && density.is_finite() {
        density.powf(1.0 / set.dim() as f64)
    } else {
        return input(format!("density must be positive, got {density}"));
    };
    let unit = rescale_to_unit_density(set, density)?;
    let mut attempts = Vec::new();
    let mut built = None;
    let mut n = config.initial_n;
    let mut last_n = n;
    let mut ran = false;
    for _ in 0..config.cap {
        last_n = n;
        if n as f64 > unit.window().min_extent() {
            attempts.push(Attempt {
                n,
                outcome: "cube side exceeds the window".into(),
                bottleneck: None,
                infeasible_cubes: 0,
            });
            break;
        }
        ran = true;
        if let Some(b) = attempt(&unit, n, config.metric, &mut attempts)? {
            built = Some(b);
            break;
        }
        n = n.saturating_mul(2);
    }

    let inv = 1.0 / scale;
    let back = |p: &[f64]| -> Vec<f64> { p.iter().map(|c| c * inv).collect() };
    let total_units = set.total() as usize;
    let Some(Built { moved, assignment, grid }) = built else {
        let grid = cube_counts(&unit, (last_n as f64).min(unit.window().min_extent()), None).ok();
        return Ok(SpreadCertificate {
            status: if ran { Status::Escalated } else { Status::Failed },
            parameters: Parameters {
                density,
                n: last_n,
                scale,
                cube_side: last_n as f64 * inv,
                origin: grid.as_ref().map(|g| back(g.origin())).unwrap_or_default(),
                metric: config.metric,
            },
            summary: Summary {
                c_achieved: f64::NAN,
                max_move: f64::NAN,
                max_assign: f64::NAN,
                bound: 3.0 * last_n as f64 * inv,
                interior_cubes: 0,
                excluded_units: total_units,
            },
            entries: Vec::new(),
            exported: Vec::new(),
            unfilled_sites: Vec::new(),
            attempts,
        });
    };

    // Rescaling preserves the unit order, so sources are reported exactly.
    let originals: Vec<&[f64]> = set.units().map(|(_, p)| p).collect();
    if originals.len() != moved.units.len() {
        return Err(Error::Contract("rescaling changed the number of units".into()));
    }
    let mut move_of = vec![0.0; moved.units.len()];
    let mut exported = Vec::new();
    for m in &moved.log {
        move_of[m.unit] = m.displacement;
        if m.to_cube.is_none() {
            exported.push(ExportedUnit {
                source: originals[m.unit].to_vec(),
                position: back(&m.to),
                displacement: m.displacement * inv,
            });
        }
    }
    let mut entries = Vec::with_capacity(assignment.pairs.len());
    let mut c_achieved: f64 = 0.0;
    let mut max_assign: f64 = 0.0;
    for (u, site) in &assignment.pairs {
        let unit_ref = &moved.units[*u];
        let target = back(site);
        let total = config.metric.dist(originals[*u], &target);
        let assign = config.metric.dist(&unit_ref.position, site) * inv;
        c_achieved = c_achieved.max(total);
        max_assign = max_assign.max(assign);
        entries.push(CertificateEntry {
            source: originals[*u].to_vec(),
            target,
            displacement: total,
            move_displacement: move_of[*u] * inv,
            assign_displacement: assign,
        });
    }
    let excluded = moved
        .units
        .iter()
        .filter(|u| !u.moved && u.cube.is_none())
        .count();
    if entries.len() + exported.len() + excluded != total_units {
        return Err(Error::Contract("certificate does not account for every unit".into()));
    }
    let mut exported_sorted = exported;
    exported_sorted.sort_by(|a, b| a.source.partial_cmp(&b.source).unwrap_or(std::cmp::Ordering::Equal));
    entries.sort_by(|a, b| a.source.partial_cmp(&b.source).unwrap_or(std::cmp::Ordering::Equal));
    Ok(SpreadCertificate {
        status: Status::Certified,
        parameters: Parameters {
            density,
            n: last_n,
            scale,
            cube_side: last_n as f64 * inv,
            origin: back(grid.origin()),
            metric: config.metric,
        },
        summary: Summary {
            c_achieved,
            max_move: moved.max_move() * inv,
            max_assign,
            bound: 3.0 * last_n as f64 * inv,
            interior_cubes: moved.cubes.len(),
            excluded_units: excluded,
        },
        entries,
        exported: exported_sorted,
        unfilled_sites: assignment.unfilled_sites.iter().map(|s| back(s)).collect(),
        attempts,
    })
}
