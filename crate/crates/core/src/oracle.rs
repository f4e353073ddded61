//! Exact small-scale ground truth.
//!
//! [`bottleneck_matching`] finds a perfect matching between two equal-size
//! point lists minimising the largest pair distance, by binary search over
//! the sorted distinct pairwise distances with a Hopcroft-Karp feasibility
//! probe. [`check_shift_invariance`] tests one sampled shift of the
//! rough-shift-invariance property on a finite window.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, input, Result};
use crate::matching::{Matching, SpatialHash, NONE};
use crate::model::{l2_dist_sq, linf, PointSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Linf,
    L2,
}

impl Metric {
    pub fn dist(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Linf => linf(a, b),
            Metric::L2 => l2_dist_sq(a, b).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingResult {
    /// `(index into A, index into B)`, sorted by the A index.
    pub pairs: Vec<(usize, usize)>,
    pub c_star: f64,
    pub feasible: bool,
    /// Largest candidate distance below `c_star`, at which no perfect
    /// matching exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refuted_below: Option<f64>,
}

impl MatchingResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "c_star": self.c_star,
            "pairs": self.pairs,
            "feasible": self.feasible,
        })
    }
}

/// Points of a multiset repeated by multiplicity.
pub fn expand_units(set: &PointSet) -> Vec<Vec<f64>> {
    set.units().map(|(_, p)| p.to_vec()).collect()
}

pub fn bottleneck_matching(a: &[Vec<f64>], b: &[Vec<f64>], metric: Metric) -> Result<MatchingResult> {
    bottleneck_matching_capped(a, b, metric, None)
}

/// As [`bottleneck_matching`], but only pairs at distance `<= cap` are
/// allowed; `feasible` is false when no perfect matching exists under the cap.
pub fn bottleneck_matching_capped(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    metric: Metric,
    cap: Option<f64>,
) -> Result<MatchingResult> {
    if a.len() != b.len() {
        return input(format!("bottleneck matching needs |A| = |B|, got {} and {}", a.len(), b.len()));
    }
    bottleneck_core(a, b, metric, cap)
}

/// Smallest `r` such that every point of `a` matches a distinct point of `b`
/// within distance `r`; requires `|A| <= |B|`.
pub fn one_sided_bottleneck(a: &[Vec<f64>], b: &[Vec<f64>], metric: Metric) -> Result<MatchingResult> {
    if a.len() > b.len() {
        return input(format!("one-sided matching needs |A| <= |B|, got {} and {}", a.len(), b.len()));
    }
    bottleneck_core(a, b, metric, None)
}

fn bottleneck_core(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    metric: Metric,
    cap: Option<f64>,
) -> Result<MatchingResult> {
    let n = a.len();
    if n == 0 {
        return Ok(MatchingResult {
            pairs: Vec::new(),
            c_star: 0.0,
            feasible: true,
            refuted_below: None,
        });
    }
    let dim = a[0].len();
    for p in a.iter().chain(b.iter()) {
        check_dim(dim, p.len())?;
    }

    // Rows sorted by distance, so the graph at threshold r is a prefix.
    let mut rows: Vec<Vec<(f64, usize)>> = a
        .iter()
        .map(|p| {
            let mut row: Vec<(f64, usize)> =
                b.iter().enumerate().map(|(j, q)| (metric.dist(p, q), j)).collect();
            row.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            row
        })
        .collect();
    if let Some(cap) = cap {
        for row in &mut rows {
            row.retain(|(d, _)| *d <= cap);
        }
    }
    let mut cands: Vec<f64> = rows.iter().flatten().map(|(d, _)| *d).collect();
    cands.sort_by(f64::total_cmp);
    cands.dedup();

    // No perfect matching can beat the largest nearest-neighbour distance.
    let floor = rows
        .iter()
        .map(|r| r.first().map_or(f64::INFINITY, |x| x.0))
        .fold(0.0, f64::max);

    let probe = |r: f64| -> Option<Matching> {
        let adj: Vec<Vec<usize>> = rows
            .iter()
            .map(|row| row.iter().take_while(|(d, _)| *d <= r).map(|(_, j)| *j).collect())
            .collect();
        let mut m = Matching::new(n, b.len());
        (m.hopcroft_karp(&adj) == n).then_some(m)
    };

    let mut lo = cands.partition_point(|&d| d < floor);
    let mut hi = cands.len();
    let mut best: Option<(usize, Matching)> = None;
    if let Some(&top) = cands.last() {
        if let Some(m) = probe(top) {
            best = Some((cands.len() - 1, m));
            hi = cands.len() - 1;
        }
    }
    let Some(_) = best else {
        return Ok(MatchingResult {
            pairs: Vec::new(),
            c_star: f64::INFINITY,
            feasible: false,
            refuted_below: None,
        });
    };
    // Invariant: cands[hi] feasible; everything below lo infeasible.
    while lo < hi {
        let mid = (lo + hi) / 2;
        match probe(cands[mid]) {
            Some(m) => {
                best = Some((mid, m));
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    let (k, m) = best.expect("feasible at the top candidate");
    debug_assert_eq!(k, hi);
    let pairs: Vec<(usize, usize)> = m.left.iter().enumerate().map(|(i, &j)| (i, j)).collect();
    debug_assert!(pairs.iter().all(|&(_, j)| j != NONE));
    let c_star = pairs
        .iter()
        .map(|&(i, j)| metric.dist(&a[i], &b[j]))
        .fold(0.0, f64::max);
    debug_assert_eq!(c_star, cands[k]);
    Ok(MatchingResult {
        pairs,
        c_star,
        feasible: true,
        refuted_below: k.checked_sub(1).map(|j| cands[j]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftCheck {
    pub holds: bool,
    pub shift: Vec<f64>,
    pub bound: f64,
    pub metric: Metric,
    /// Units deeper than `|x| + L` inside the window.
    pub core_size: usize,
    /// Witness pairs `(a, σ(a))` for the matched core units.
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
    /// Largest `|a + x - σ(a)|` over the witness.
    pub max_displacement: f64,
    /// Core units that could not be matched, in scan order.
    pub violations: Vec<Vec<f64>>,
}

/// Does every unit of the window core, shifted by `x`, match a distinct unit
/// of the set at distance `< bound`?
pub fn check_shift_invariance(set: &PointSet, shift: &[f64], bound: f64, metric: Metric) -> Result<ShiftCheck> {
    check_dim(set.dim(), shift.len())?;
    if !(bound > 0.0 && bound.is_finite()) {
        return input(format!("shift bound L must be positive, got {bound}"));
    }
    if shift.iter().any(|c| !c.is_finite()) {
        return input("shift must be finite");
    }
    let margin = linf(shift, &vec![0.0; shift.len()]) + bound;
    let w = set.window();
    if w.min_extent() <= 2.0 * margin {
        return input(format!(
            "window extent {} too small for margin |x| + L = {margin}",
            w.min_extent()
        ));
    }
    let units = expand_units(set);
    let core: Vec<usize> = (0..units.len()).filter(|&k| w.depth(&units[k]) > margin).collect();
    let hash = SpatialHash::new(&units, bound);
    let adj: Vec<Vec<usize>> = core
        .iter()
        .map(|&k| {
            let target: Vec<f64> = units[k].iter().zip(shift).map(|(a, x)| a + x).collect();
            hash.within(&target, bound, |p, q| metric.dist(p, q))
        })
        .collect();
    let mut m = Matching::new(core.len(), units.len());
    let mut violations = Vec::new();
    for u in 0..core.len() {
        if !m.augment_left(&adj, u) {
            violations.push(units[core[u]].clone());
        }
    }
    let mut pairs = Vec::new();
    let mut max_displacement: f64 = 0.0;
    for (u, &v) in m.left.iter().enumerate() {
        if v == NONE {
            continue;
        }
        let a = &units[core[u]];
        let moved: Vec<f64> = a.iter().zip(shift).map(|(a, x)| a + x).collect();
        max_displacement = max_displacement.max(metric.dist(&moved, &units[v]));
        pairs.push((a.clone(), units[v].clone()));
    }
    Ok(ShiftCheck {
        holds: violations.is_empty(),
        shift: shift.to_vec(),
        bound,
        metric,
        core_size: core.len(),
        pairs,
        max_displacement,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{generate, GeneratorSpec};
    use crate::model::Window;

    fn line(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn identical_sets_match_at_zero() {
        let a = line(&[0.0, 3.0, 7.5]);
        let r = bottleneck_matching(&a, &a, Metric::Linf).unwrap();
        assert_eq!(r.c_star, 0.0);
        assert_eq!(r.pairs, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn two_point_examples() {
        let r = bottleneck_matching(&line(&[0.0, 1.0]), &line(&[0.4, 0.6]), Metric::Linf).unwrap();
        assert_eq!(r.c_star, 0.4);
        assert_eq!(r.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(r.refuted_below, None);

        let r = bottleneck_matching(&line(&[0.0, 10.0]), &line(&[5.0, 5.1]), Metric::Linf).unwrap();
        assert_eq!(r.c_star, 5.0);
        assert_eq!(r.pairs, vec![(0, 0), (1, 1)]);
        assert!(r.refuted_below.unwrap() < 5.0);
    }

    #[test]
    fn size_mismatch_is_an_input_error() {
        assert!(bottleneck_matching(&line(&[0.0]), &line(&[]), Metric::Linf).is_err());
        let r = bottleneck_matching(&[], &[], Metric::Linf).unwrap();
        assert!(r.feasible && r.pairs.is_empty());
    }

    #[test]
    fn cap_can_make_matching_infeasible() {
        let r = bottleneck_matching_capped(&line(&[0.0, 10.0]), &line(&[5.0, 5.1]), Metric::Linf, Some(4.0))
            .unwrap();
        assert!(!r.feasible);
    }

    #[test]
    fn json_shape() {
        let r = bottleneck_matching(&line(&[0.0]), &line(&[2.0]), Metric::Linf).unwrap();
        assert_eq!(
            r.to_json(),
            serde_json::json!({"c_star": 2.0, "pairs": [[0, 0]], "feasible": true})
        );
    }

    #[test]
    fn l2_metric_differs_from_linf() {
        let a = vec![vec![0.0, 0.0]];
        let b = vec![vec![3.0, 4.0]];
        assert_eq!(bottleneck_matching(&a, &b, Metric::Linf).unwrap().c_star, 4.0);
        assert_eq!(bottleneck_matching(&a, &b, Metric::L2).unwrap().c_star, 5.0);
    }

    fn integers(lo: f64, hi: f64) -> PointSet {
        generate(&GeneratorSpec::lattice(Window::new(vec![lo], vec![hi]).unwrap(), 1.0)).unwrap()
    }

    #[test]
    fn shift_checker_on_integers() {
        let z = integers(-50.0, 50.0);
        let ok = check_shift_invariance(&z, &[0.3], 0.5, Metric::Linf).unwrap();
        assert!(ok.holds);
        assert!(ok.pairs.iter().all(|(a, b)| a == b));
        assert!((ok.max_displacement - 0.3).abs() < 1e-12);

        let bad = check_shift_invariance(&z, &[0.5], 0.4, Metric::Linf).unwrap();
        assert!(!bad.holds);
        assert_eq!(bad.violations.len(), bad.core_size);
    }

    #[test]
    fn shift_checker_rejects_small_windows() {
        let z = integers(0.0, 4.0);
        assert!(check_shift_invariance(&z, &[1.5], 1.0, Metric::Linf).is_err());
        assert!(check_shift_invariance(&z, &[0.5], 0.0, Metric::Linf).is_err());
    }

    #[test]
    fn shift_checker_multiset_needs_matching_multiplicity() {
        let w = Window::cube(1, -20.0, 40.0).unwrap();
        let entries = (-20..20).map(|k| (vec![k as f64], if k == 0 { 2 } else { 1 })).collect();
        let s = PointSet::new(w, entries).unwrap();
        // Shifting by 1 moves the double point onto a single one.
        let r = check_shift_invariance(&s, &[1.0], 0.5, Metric::Linf).unwrap();
        assert!(!r.holds);
        assert_eq!(r.violations, vec![vec![0.0]]);
        // With room to reach a neighbour, the surplus unit finds a partner.
        assert!(check_shift_invariance(&s, &[1.0], 1.5, Metric::Linf).unwrap().holds);
    }

    #[test]
    fn poisson_gaps_violate_small_bounds() {
        let s = generate(&GeneratorSpec::poisson(Window::cube(2, 0.0, 30.0).unwrap(), 1.0, 7)).unwrap();
        let r = check_shift_invariance(&s, &[1.0, 0.0], 1.0, Metric::Linf).unwrap();
        assert!(!r.holds);
        assert!(r.max_displacement < 1.0);
        // A failed augmentation leaves every candidate of the violating point
        // taken by some other core point.
        let taken: Vec<&Vec<f64>> = r.pairs.iter().map(|(_, b)| b).collect();
        for v in &r.violations {
            let target = [v[0] + 1.0, v[1]];
            for (p, _) in s.iter().filter(|(p, _)| linf(p, &target) < 1.0) {
                assert!(taken.iter().any(|t| t.as_slice() == p), "free candidate {p:?} for {v:?}");
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn brute_force(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
            fn rec(a: &[Vec<f64>], b: &[Vec<f64>], used: &mut Vec<bool>, i: usize, cur: f64, best: &mut f64) {
                if cur >= *best {
                    return;
                }
                if i == a.len() {
                    *best = cur;
                    return;
                }
                for j in 0..b.len() {
                    if !used[j] {
                        used[j] = true;
                        rec(a, b, used, i + 1, cur.max(linf(&a[i], &b[j])), best);
                        used[j] = false;
                    }
                }
            }
            let mut best = f64::INFINITY;
            rec(a, b, &mut vec![false; b.len()], 0, 0.0, &mut best);
            if a.is_empty() { 0.0 } else { best }
        }

        fn pair() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
            (0usize..=7).prop_flat_map(|n| {
                let pts = prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), n);
                (pts.clone(), pts)
            })
        }

        proptest! {
            #[test]
            fn matches_exhaustive_minimum((a, b) in pair()) {
                let r = bottleneck_matching(&a, &b, Metric::Linf).unwrap();
                prop_assert_eq!(r.c_star, brute_force(&a, &b));
                let mut seen = vec![false; b.len()];
                for &(i, j) in &r.pairs {
                    prop_assert!(!std::mem::replace(&mut seen[j], true));
                    prop_assert!(linf(&a[i], &b[j]) <= r.c_star);
                }
            }

            #[test]
            fn extra_candidates_never_hurt(
                a in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 0..12),
                b in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 12..16),
                extra in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 0..6),
            ) {
                let base = one_sided_bottleneck(&a, &b, Metric::Linf).unwrap();
                let grown: Vec<Vec<f64>> = b.iter().chain(&extra).cloned().collect();
                let more = one_sided_bottleneck(&a, &grown, Metric::Linf).unwrap();
                prop_assert!(more.c_star <= base.c_star);
            }
        }
    }
}
