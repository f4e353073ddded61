//! Geometric primitives: points, windowed multisets, half-closed cubes, open
//! balls and scaled integer lattices.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, input, Error, Result};

/// Index of a cube `Q(origin + i*N, N)` in the cube grid.
pub type GridIndex = Vec<i64>;

/// A point of `R^d` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return input("point must have at least one coordinate");
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return input(format!("non-finite coordinate {c}"));
        }
        Ok(Point(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Axis-aligned half-open box `lo <= x < hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Window {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() {
            return input("window must have dimension >= 1");
        }
        if lo.iter().chain(&hi).any(|c| !c.is_finite()) {
            return input("window corners must be finite");
        }
        Ok(Window { lo, hi })
    }

    /// Cube window `[lo, lo + side)^d`.
    pub fn cube(dim: usize, lo: f64, side: f64) -> Result<Self> {
        Window::new(vec![lo; dim], vec![lo + side; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| h <= l)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| *l <= *x && *x < *h)
    }

    pub fn extent(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]).max(0.0)
    }

    pub fn min_extent(&self) -> f64 {
        (0..self.dim())
            .map(|j| self.extent(j))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.extent(j)).product()
    }

    /// l∞ distance from an interior point to the window's boundary.
    pub fn depth(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(x, (l, h))| (x - l).min(h - x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest half-open box containing all `points`, or `None` if empty.
    pub fn bounding<'a, I>(dim: usize, points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        let mut any = false;
        for p in points {
            any = true;
            for j in 0..dim {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        if !any {
            return None;
        }
        // The upper face is open, so step just past the largest coordinate.
        let hi = hi.into_iter().map(next_up).collect();
        Some(Window { lo, hi })
    }

    pub fn scaled(&self, factor: f64) -> Window {
        Window {
            lo: self.lo.iter().map(|c| c * factor).collect(),
            hi: self.hi.iter().map(|c| c * factor).collect(),
        }
    }
}

pub(crate) fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let bits = x.to_bits();
    if x > 0.0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}

/// Finite window of a discrete multiset in `R^d`.
///
/// Coordinates are stored flat (`dim` values per entry). Entries are kept in
/// lexicographic coordinate order and coincident input points are merged into
/// one entry carrying the summed multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    mult: Vec<u32>,
    window: Window,
}

impl PointSet {
    pub fn new(window: Window, entries: Vec<(Vec<f64>, u32)>) -> Result<Self> {
        let dim = window.dim();
        let mut coords = Vec::with_capacity(entries.len() * dim);
        let mut mult = Vec::with_capacity(entries.len());
        for (p, m) in entries {
            coords.extend(p.iter().copied());
            check_dim(dim, p.len())?;
            mult.push(m);
        }
        PointSet::from_flat(window, coords, mult)
    }

    /// Build from flat coordinates, one multiplicity per entry.
    pub fn from_flat(window: Window, coords: Vec<f64>, mult: Vec<u32>) -> Result<Self> {
        let dim = window.dim();
        if coords.len() != mult.len() * dim {
            return input("coordinate buffer length does not match entry count");
        }
        for (k, p) in coords.chunks_exact(dim).enumerate() {
            if p.iter().any(|c| !c.is_finite()) {
                return input(format!("entry {k} has a non-finite coordinate"));
            }
            if !window.contains(p) {
                return input(format!("entry {k} at {p:?} lies outside the window"));
            }
            if mult[k] == 0 {
                return input(format!("entry {k} has multiplicity 0"));
            }
        }
        let mut order: Vec<usize> = (0..mult.len()).collect();
        order.sort_by(|&a, &b| {
            lex_cmp(
                &coords[a * dim..(a + 1) * dim],
                &coords[b * dim..(b + 1) * dim],
            )
        });
        let mut out_coords: Vec<f64> = Vec::with_capacity(coords.len());
        let mut out_mult: Vec<u32> = Vec::with_capacity(mult.len());
        for k in order {
            let p = &coords[k * dim..(k + 1) * dim];
            let n = out_mult.len();
            if n > 0 && out_coords[(n - 1) * dim..] == *p {
                out_mult[n - 1] = out_mult[n - 1]
                    .checked_add(mult[k])
                    .ok_or_else(|| Error::Input("multiplicity overflow".into()))?;
            } else {
                // Normalise -0.0 so equal points compare bitwise equal.
                out_coords.extend(p.iter().map(|c| c + 0.0));
                out_mult.push(mult[k]);
            }
        }
        Ok(PointSet {
            dim,
            coords: out_coords,
            mult: out_mult,
            window,
        })
    }

    pub fn empty(window: Window) -> Self {
        PointSet {
            dim: window.dim(),
            coords: Vec::new(),
            mult: Vec::new(),
            window,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    /// Number of distinct entries.
    pub fn len(&self) -> usize {
        self.mult.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mult.is_empty()
    }

    /// Number of points counted with multiplicity.
    pub fn total(&self) -> u64 {
        self.mult.iter().map(|&m| m as u64).sum()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn multiplicity(&self, k: usize) -> u32 {
        self.mult[k]
    }

    pub fn multiplicities(&self) -> &[u32] {
        &self.mult
    }

    pub fn flat_coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], u32)> + '_ {
        self.coords
            .chunks_exact(self.dim)
            .zip(self.mult.iter().copied())
    }

    /// Points expanded by multiplicity, each tagged with its entry index.
    pub fn units(&self) -> impl Iterator<Item = (usize, &[f64])> + '_ {
        self.iter()
            .enumerate()
            .flat_map(|(k, (p, m))| std::iter::repeat_n((k, p), m as usize))
    }

    /// Same entries with a different (containing) window.
    pub fn with_window(&self, window: Window) -> Result<Self> {
        check_dim(self.dim, window.dim())?;
        if let Some((p, _)) = self.iter().find(|(p, _)| !window.contains(p)) {
            return input(format!("point {p:?} lies outside the new window"));
        }
        Ok(PointSet {
            window,
            ..self.clone()
        })
    }

    /// Entries lying inside `window`, carried over with their multiplicities.
    pub fn restrict(&self, window: Window) -> Result<Self> {
        check_dim(self.dim, window.dim())?;
        let mut coords = Vec::new();
        let mut mult = Vec::new();
        for (p, m) in self.iter() {
            if window.contains(p) {
                coords.extend_from_slice(p);
                mult.push(m);
            }
        }
        PointSet::from_flat(window, coords, mult)
    }

    /// Multiply every coordinate (and the window) by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return input(format!("scale factor must be positive, got {factor}"));
        }
        let window = self.window.scaled(factor);
        let coords = self.coords.iter().map(|c| c * factor).collect();
        // Scaling can collapse distinct floats; rebuild to re-merge.
        PointSet::from_flat(window, coords, self.mult.clone())
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).unwrap_or(Ordering::Equal) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Half-closed cube `Q(b, r) = { x : b_j <= x_j < b_j + r }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub anchor: Point,
    pub side: f64,
}

impl Cube {
    pub fn new(anchor: Point, side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return input(format!("cube side must be positive, got {side}"));
        }
        Ok(Cube { anchor, side })
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.anchor.dim()
            && p
                .iter()
                .zip(self.anchor.coords())
                .all(|(x, b)| *b <= *x && *x < *b + self.side)
    }

    pub fn as_window(&self) -> Window {
        Window {
            lo: self.anchor.coords().to_vec(),
            hi: self.anchor.coords().iter().map(|b| b + self.side).collect(),
        }
    }
}

/// Open Euclidean ball `B(c, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return input(format!("ball radius must be positive, got {radius}"));
        }
        Ok(Ball { center, radius })
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.center.dim() && l2_dist_sq(p, self.center.coords()) < self.radius * self.radius
    }

    /// Lebesgue measure of the ball in its dimension.
    pub fn volume(&self) -> f64 {
        ball_volume(self.center.dim(), self.radius)
    }

    /// Whether the closed ball fits inside the window.
    pub fn fits_in(&self, w: &Window) -> bool {
        self.center
            .coords()
            .iter()
            .zip(w.lo.iter().zip(&w.hi))
            .all(|(c, (l, h))| c - self.radius >= *l && c + self.radius <= *h)
    }
}

pub fn ball_volume(dim: usize, radius: f64) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = V_{d-2} * 2pi / d.
    let mut k = dim % 2;
    let mut v = if k == 0 { 1.0 } else { 2.0 };
    while k + 2 <= dim {
        k += 2;
        v *= 2.0 * std::f64::consts::PI / k as f64;
    }
    v * radius.powi(dim as i32)
}

/// The scaled integer lattice `spacing * Z^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub spacing: f64,
    pub dim: usize,
}

impl Lattice {
    pub fn new(spacing: f64, dim: usize) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return input(format!("lattice spacing must be positive, got {spacing}"));
        }
        if dim == 0 {
            return input("lattice dimension must be >= 1");
        }
        Ok(Lattice { spacing, dim })
    }

    /// Integer coordinates `k` with `spacing * k` inside the half-open box.
    pub fn index_range(&self, w: &Window) -> Vec<std::ops::Range<i64>> {
        (0..self.dim)
            .map(|j| {
                let mut a = (w.lo[j] / self.spacing).ceil() as i64;
                while (a as f64) * self.spacing < w.lo[j] {
                    a += 1;
                }
                while a > i64::MIN && ((a - 1) as f64) * self.spacing >= w.lo[j] {
                    a -= 1;
                }
                let mut b = (w.hi[j] / self.spacing).ceil() as i64;
                while (b as f64) * self.spacing < w.hi[j] {
                    b += 1;
                }
                while ((b - 1) as f64) * self.spacing >= w.hi[j] {
                    b -= 1;
                }
                a..b.max(a)
            })
            .collect()
    }

    /// Lattice sites inside the half-open box, in lexicographic order.
    pub fn sites_in(&self, w: &Window) -> Vec<Vec<f64>> {
        grid_indices(&self.index_range(w))
            .into_iter()
            .map(|k| k.iter().map(|&c| c as f64 * self.spacing).collect())
            .collect()
    }
}

/// All integer vectors in a product of ranges, lexicographic.
pub fn grid_indices(ranges: &[std::ops::Range<i64>]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::with_capacity(ranges.len())];
    for r in ranges {
        let mut next = Vec::with_capacity(out.len() * r.clone().count());
        for prefix in &out {
            for k in r.clone() {
                let mut v = prefix.clone();
                v.push(k);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Region argument for [`count_in`].
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Cube(Cube),
    Ball(Ball),
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Cube(c) => c.anchor.dim(),
            Region::Ball(b) => b.center.dim(),
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            Region::Cube(c) => c.contains(p),
            Region::Ball(b) => b.contains(p),
        }
    }
}

/// Index `i` of the unique cube `Q(origin + i*side, side)` containing `p`.
pub fn cube_index(p: &[f64], side: f64, origin: &[f64]) -> Result<GridIndex> {
    check_dim(origin.len(), p.len())?;
    if !(side > 0.0 && side.is_finite()) {
        return input(format!("cube side must be positive, got {side}"));
    }
    p.iter()
        .zip(origin)
        .map(|(&x, &o)| {
            if !x.is_finite() || !o.is_finite() {
                return input(format!("non-finite coordinate {x}"));
            }
            let mut k = ((x - o) / side).floor() as i64;
            // Settle rounding so the result agrees with `Cube::contains`.
            while o + k as f64 * side > x {
                k -= 1;
            }
            while o + (k + 1) as f64 * side <= x {
                k += 1;
            }
            Ok(k)
        })
        .collect()
}

/// Anchor of cube `i` in the grid of side `side` at `origin`.
pub fn cube_anchor(index: &[i64], side: f64, origin: &[f64]) -> Vec<f64> {
    index
        .iter()
        .zip(origin)
        .map(|(&k, &o)| o + k as f64 * side)
        .collect()
}

pub fn linf_dist(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    Ok(linf(a, b))
}

pub(crate) fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn l2_dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn l2_dist(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    Ok(l2_dist_sq(a, b).sqrt())
}

/// Points of `set` inside `region`, counted with multiplicity.
pub fn count_in(set: &PointSet, region: &Region) -> Result<u64> {
    check_dim(set.dim(), region.dim())?;
    Ok(set
        .iter()
        .filter(|(p, _)| region.contains(p))
        .map(|(_, m)| m as u64)
        .sum())
}
