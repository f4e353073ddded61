//! Cube-count statistics: per-cube counts on a grid, the local bound `K`,
//! density estimation over growing cubes, and the ball-count discrepancy
//! statistic `s(x, R) = |#(A ∩ B(x,R)) - D m(B(x,R))| / R^(d-1)`.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, input, Error, Result};
use crate::io::format_point;
use crate::model::{
    ball_volume, count_in, cube_anchor, cube_index, grid_indices, l2_dist_sq, Cube, GridIndex,
    Point, PointSet, Region,
};

/// Counts `P_i` of the half-closed cubes `Q(origin + i*N, N)` meeting the
/// window. Cubes lying entirely inside the window are *interior*; the rest are
/// flagged as boundary cubes and carry partial counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeGrid {
    origin: Vec<f64>,
    side: f64,
    lo: GridIndex,
    shape: Vec<usize>,
    counts: Vec<u64>,
    interior: Vec<bool>,
}

impl CubeGrid {
    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    /// First index of the covered box (inclusive).
    pub fn index_lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub(crate) fn flat(&self, i: &[i64]) -> Option<usize> {
        let mut k = 0usize;
        for j in 0..self.dim() {
            let off = i[j] - self.lo[j];
            if off < 0 || off as usize >= self.shape[j] {
                return None;
            }
            k = k * self.shape[j] + off as usize;
        }
        Some(k)
    }

    pub(crate) fn unflat(&self, mut k: usize) -> GridIndex {
        let mut i = vec![0i64; self.dim()];
        for j in (0..self.dim()).rev() {
            i[j] = self.lo[j] + (k % self.shape[j]) as i64;
            k /= self.shape[j];
        }
        i
    }

    /// `P_i`, or `None` outside the covered box.
    pub fn count(&self, i: &[i64]) -> Option<u64> {
        self.flat(i).map(|k| self.counts[k])
    }

    pub fn is_interior(&self, i: &[i64]) -> bool {
        self.flat(i).is_some_and(|k| self.interior[k])
    }

    /// All covered indices in lexicographic order.
    pub fn indices(&self) -> Vec<GridIndex> {
        (0..self.len()).map(|k| self.unflat(k)).collect()
    }

    pub fn interior_indices(&self) -> Vec<GridIndex> {
        (0..self.len())
            .filter(|&k| self.interior[k])
            .map(|k| self.unflat(k))
            .collect()
    }

    pub fn boundary_indices(&self) -> Vec<GridIndex> {
        (0..self.len())
            .filter(|&k| !self.interior[k])
            .map(|k| self.unflat(k))
            .collect()
    }

    pub fn anchor(&self, i: &[i64]) -> Vec<f64> {
        cube_anchor(i, self.side, &self.origin)
    }

    pub fn cube(&self, i: &[i64]) -> Cube {
        Cube {
            anchor: Point::new(self.anchor(i)).expect("finite anchor"),
            side: self.side,
        }
    }

    pub fn index_of(&self, p: &[f64]) -> Result<GridIndex> {
        cube_index(p, self.side, &self.origin)
    }

    /// Sum of the interior counts.
    pub fn interior_total(&self) -> u64 {
        self.counts
            .iter()
            .zip(&self.interior)
            .filter(|(_, &inside)| inside)
            .map(|(c, _)| *c)
            .sum()
    }
}

/// Default grid origin: the window's lower corner snapped down to a multiple
/// of the side.
pub fn default_origin(set: &PointSet, side: f64) -> Vec<f64> {
    set.window()
        .lo
        .iter()
        .map(|l| (l / side).floor() * side)
        .collect()
}

pub fn cube_counts(set: &PointSet, side: f64, origin: Option<&[f64]>) -> Result<CubeGrid> {
    let w = set.window();
    if !(side > 0.0 && side.is_finite()) {
        return input(format!("cube side must be positive, got {side}"));
    }
    if w.is_empty() {
        return input("window is empty");
    }
    if side > w.min_extent() {
        return input(format!(
            "cube side {side} exceeds the window extent {}",
            w.min_extent()
        ));
    }
    let origin = match origin {
        Some(o) => {
            check_dim(set.dim(), o.len())?;
            o.to_vec()
        }
        None => default_origin(set, side),
    };
    let dim = set.dim();
    let first = cube_index(&w.lo, side, &origin)?;
    let mut lo = Vec::with_capacity(dim);
    let mut shape = Vec::with_capacity(dim);
    for j in 0..dim {
        // Last cube whose anchor is still below the open upper face.
        let mut last = ((w.hi[j] - origin[j]) / side).ceil() as i64;
        while origin[j] + last as f64 * side >= w.hi[j] {
            last -= 1;
        }
        while origin[j] + (last + 1) as f64 * side < w.hi[j] {
            last += 1;
        }
        lo.push(first[j]);
        shape.push((last - first[j] + 1) as usize);
    }
    let mut grid = CubeGrid {
        origin,
        side,
        lo,
        shape,
        counts: Vec::new(),
        interior: Vec::new(),
    };
    let n = grid.shape.iter().product();
    grid.counts = vec![0; n];
    grid.interior = (0..n)
        .map(|k| {
            let a = grid.anchor(&grid.unflat(k));
            (0..dim).all(|j| a[j] >= w.lo[j] && a[j] + side <= w.hi[j])
        })
        .collect();
    for (p, m) in set.iter() {
        let i = cube_index(p, side, &grid.origin)?;
        let k = grid
            .flat(&i)
            .ok_or_else(|| Error::Contract(format!("point {p:?} outside covered grid")))?;
        grid.counts[k] += m as u64;
    }
    Ok(grid)
}

/// `1 + max` count over unit cubes anchored on the half-unit grid; a witness
/// for `#(A ∩ Q(x,1)) < K` over the scanned anchors.
pub fn local_bound(set: &PointSet) -> Result<u64> {
    if set.is_empty() {
        return input("local bound needs a nonempty set");
    }
    let dim = set.dim();
    let mut counts: HashMap<Vec<i64>, u64> = HashMap::new();
    for (p, m) in set.iter() {
        // Anchor h/2 holds x iff h in (2x - 2, 2x].
        let ranges: Vec<_> = p
            .iter()
            .map(|&x| {
                let top = (2.0 * x).floor() as i64;
                (top - 1)..(top + 1)
            })
            .collect();
        for h in grid_indices(&ranges) {
            let anchor: Vec<f64> = h.iter().map(|&v| v as f64 / 2.0).collect();
            debug_assert_eq!(anchor.len(), dim);
            if anchor.iter().zip(p).all(|(a, x)| *a <= *x && *x < *a + 1.0) {
                *counts.entry(h).or_default() += m as u64;
            }
        }
    }
    Ok(1 + counts.values().copied().max().unwrap_or(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub scale: f64,
    pub center: Vec<f64>,
    pub count: u64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSummary {
    pub scale: f64,
    pub mean: f64,
    /// max - min of the normalized counts over centers.
    pub spread: f64,
    /// `T^{-1/2}`, the spread predicted for large `T`; reported only.
    pub predicted_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    /// Mean normalized count at the largest scale.
    pub density: f64,
    pub rows: Vec<DensityRow>,
    pub scales: Vec<ScaleSummary>,
}

impl DensityEstimate {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scale,center,count,normalized\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.scale,
                format_point(&r.center),
                r.count,
                r.normalized
            );
        }
        out
    }
}

/// Normalized counts `T^{-d} #(A ∩ Q(x,T))` over every scale and center.
/// Each cube must fit inside the window.
pub fn estimate_density(
    set: &PointSet,
    scales: &[f64],
    centers: &[Vec<f64>],
) -> Result<DensityEstimate> {
    if scales.is_empty() || centers.is_empty() {
        return input("density estimation needs at least one scale and one center");
    }
    let w = set.window();
    let dim = set.dim();
    let mut bad = Vec::new();
    for &t in scales {
        if !(t > 0.0 && t.is_finite()) {
            return input(format!("scale must be positive, got {t}"));
        }
        for x in centers {
            check_dim(dim, x.len())?;
            if !(0..dim).all(|j| x[j] >= w.lo[j] && x[j] + t <= w.hi[j]) {
                bad.push(format!("({x:?}, {t})"));
            }
        }
    }
    if !bad.is_empty() {
        return input(format!("cubes leave the window: {}", bad.join(", ")));
    }

    let mut sorted: Vec<f64> = scales.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &t in &sorted {
        let vol = t.powi(dim as i32);
        let mut vals = Vec::with_capacity(centers.len());
        for x in centers {
            let cube = Cube::new(Point::new(x.clone())?, t)?;
            let count = count_in(set, &Region::Cube(cube))?;
            let normalized = count as f64 / vol;
            vals.push(normalized);
            rows.push(DensityRow {
                scale: t,
                center: x.clone(),
                count,
                normalized,
            });
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        summaries.push(ScaleSummary {
            scale: t,
            mean,
            spread: max - min,
            predicted_spread: t.powf(-0.5),
        });
    }
    Ok(DensityEstimate {
        density: summaries.last().map(|s| s.mean).unwrap_or(0.0),
        rows,
        scales: summaries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyRow {
    pub center: Vec<f64>,
    pub radius: f64,
    pub count: u64,
    pub expected: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyProfile {
    pub density: f64,
    pub rows: Vec<DiscrepancyRow>,
    pub max_s: f64,
}

impl DiscrepancyProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("center,radius,count,expected,s\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                format_point(&r.center),
                r.radius,
                r.count,
                r.expected,
                r.s
            );
        }
        out
    }
}

/// Ball-count discrepancy table. Rows are ordered by center (input order),
/// then by ascending radius.
pub fn discrepancy_profile(
    set: &PointSet,
    density: f64,
    centers: &[Vec<f64>],
    radii: &[f64],
) -> Result<DiscrepancyProfile> {
    if !(density > 0.0 && density.is_finite()) {
        return input(format!("density must be positive, got {density}"));
    }
    let dim = set.dim();
    let w = set.window();
    let mut radii: Vec<f64> = radii.to_vec();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return input(format!("radius must be positive, got {r}"));
    }
    let mut rows = Vec::with_capacity(centers.len() * radii.len());
    let mut max_s: f64 = 0.0;
    let sq: Vec<f64> = radii.iter().map(|r| r * r).collect();
    for c in centers {
        check_dim(dim, c.len())?;
        if let Some(r) = radii.last() {
            let fits = (0..dim).all(|j| c[j] - r >= w.lo[j] && c[j] + r <= w.hi[j]);
            if !fits {
                return input(format!("ball B({c:?}, {r}) leaves the window"));
            }
        }
        // bucket[k] = points whose first strictly-larger radius is radii[k].
        let mut bucket = vec![0u64; radii.len() + 1];
        for (p, m) in set.iter() {
            let d2 = l2_dist_sq(p, c);
            let k = sq.partition_point(|&r2| r2 <= d2);
            bucket[k] += m as u64;
        }
        let mut count = 0u64;
        for (k, &r) in radii.iter().enumerate() {
            count += bucket[k];
            let expected = density * ball_volume(dim, r);
            let s = (count as f64 - expected).abs() / r.powi(dim as i32 - 1);
            max_s = max_s.max(s);
            rows.push(DiscrepancyRow {
                center: c.clone(),
                radius: r,
                count,
                expected,
                s,
            });
        }
    }
    Ok(DiscrepancyProfile {
        density,
        rows,
        max_s,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub side: f64,
    /// max over anchors of `|#Q(x,N) - #Q(x0,N)|`, `x0` the first anchor.
    pub max_deviation: u64,
    /// `N^{d-1/2}`.
    pub bound: f64,
}

impl StabilityRow {
    pub fn holds(&self) -> bool {
        (self.max_deviation as f64) < self.bound
    }
}

/// Translation stability of cube counts at each side `N` over the given
/// anchors; every cube must fit in the window.
pub fn translation_stability(
    set: &PointSet,
    sides: &[f64],
    anchors: &[Vec<f64>],
) -> Result<Vec<StabilityRow>> {
    let mut out = Vec::new();
    for &n in sides {
        let est = estimate_density(set, &[n], anchors)?;
        let base = est.rows[0].count;
        let max_deviation = est.rows.iter().map(|r| r.count.abs_diff(base)).max().unwrap_or(0);
        out.push(StabilityRow {
            side: n,
            max_deviation,
            bound: n.powf(set.dim() as f64 - 0.5),
        });
    }
    out.sort_by(|a, b| a.side.total_cmp(&b.side));
    Ok(out)
}

/// Smallest tested side from which the stability bound holds at every larger
/// tested side, if any.
pub fn empirical_threshold(rows: &[StabilityRow]) -> Option<f64> {
    let mut threshold = None;
    for r in rows.iter().rev() {
        if r.holds() {
            threshold = Some(r.side);
        } else {
            break;
        }
    }
    threshold
}
