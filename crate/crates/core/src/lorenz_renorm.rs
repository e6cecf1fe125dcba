//! Renormalization of expansive Lorenz maps by bounded return-time search.
//!
//! A renormalization is an interval `[a, b] ∋ c` on which the first return
//! map is `f^l` on `[a, c)` and `f^r` on `(c, b]`, each continuous. The
//! endpoints are the one-sided critical values `a = f^r(c+)`,
//! `b = f^l(c-)`. Candidate pairs are tried in order of `(l + r, l)`; the
//! trivial pair `l = r = 1` is skipped.

use serde::Serialize;

use crate::box_graph::{BoxCover, BoxSet};
use crate::error::{Error, Result};
use crate::interval_set::{IntervalUnion, EPS_GEOM};
use crate::map_model::{Branch, BranchKind, MapKind, Orientation, PiecewiseMap, Side};

/// Default bound on `l` and `r`.
pub const DEFAULT_MAX_RETURN: usize = 64;

const RETURN_TOL: f64 = 1e-9;
const MONOTONE_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct RenormResult {
    pub interval: (f64, f64),
    /// Iterates applied left and right of `c`.
    pub return_times: (usize, usize),
    /// First-return map rescaled to `[0, 1]`; only built for piecewise
    /// linear maps, where the return branches are affine.
    pub renormalized: Option<PiecewiseMap>,
    /// Both return branches strictly increasing, checked by sampling.
    pub renormalized_increasing: bool,
    /// Slopes of the rescaled return branches, for piecewise linear maps.
    pub branch_slopes: Option<(f64, f64)>,
}

/// Image of `[lo, hi]` under the branch containing it; `None` if the
/// interval straddles the critical point.
fn image(f: &PiecewiseMap, c: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if lo < c - RETURN_TOL && hi > c + RETURN_TOL {
        return None;
    }
    let (lo_side, hi_side) = if hi <= c + RETURN_TOL {
        (Side::Left, Side::Left)
    } else {
        (Side::Right, Side::Right)
    };
    let lo = lo.clamp(0.0, 1.0);
    let hi = hi.clamp(0.0, 1.0);
    let y0 = eval_side(f, c, lo, lo_side);
    let y1 = eval_side(f, c, hi, hi_side);
    Some((y0.min(y1), y0.max(y1)))
}

/// Evaluates on the given side of `c` when `x` is within tolerance of it.
fn eval_side(f: &PiecewiseMap, c: f64, x: f64, side: Side) -> f64 {
    let x = if (x - c).abs() <= RETURN_TOL { c } else { x };
    f.eval(x, side).expect("x lies in [0, 1]")
}

/// `f^k` applied to one point, starting on the given side of `c`.
fn iterate_from(f: &PiecewiseMap, c: f64, x: f64, side: Side, k: usize) -> f64 {
    let mut y = eval_side(f, c, x, side);
    for _ in 1..k {
        let s = if y < c { Side::Left } else { Side::Right };
        y = eval_side(f, c, y, s);
    }
    y
}

/// Pushes `[lo, hi]` forward `k` times; every intermediate image must avoid
/// the open `(a, b)` and `c`, and the last must land in `[a, b]`.
fn returns_in(f: &PiecewiseMap, c: f64, (a, b): (f64, f64), mut j: (f64, f64), k: usize) -> bool {
    for step in 1..=k {
        let Some(next) = image(f, c, j.0, j.1) else {
            return false;
        };
        j = next;
        let meets_open = j.1 > a + RETURN_TOL && j.0 < b - RETURN_TOL;
        if step < k && meets_open {
            return false;
        }
    }
    j.0 >= a - RETURN_TOL && j.1 <= b + RETURN_TOL
}

fn lorenz_critical_point(f: &PiecewiseMap) -> Option<f64> {
    match f.kind() {
        MapKind::Lorenz { critical_point } => Some(critical_point),
        MapKind::Continuous => None,
    }
}

/// Minimal renormalization with `l, r <= max_return`, or `None` when no
/// candidate qualifies (or `f` is not a Lorenz map).
pub fn detect_renormalization(f: &PiecewiseMap, max_return: usize) -> Option<RenormResult> {
    let c = lorenz_critical_point(f)?;
    for total in 3..=2 * max_return {
        for l in 1..total {
            let r = total - l;
            if l > max_return || r > max_return {
                continue;
            }
            let a = iterate_from(f, c, c, Side::Right, r);
            let b = iterate_from(f, c, c, Side::Left, l);
            if !(a < c - RETURN_TOL && c + RETURN_TOL < b) || (a <= EPS_GEOM && b >= 1.0 - EPS_GEOM)
            {
                continue;
            }
            if returns_in(f, c, (a, b), (a, c), l) && returns_in(f, c, (a, b), (c, b), r) {
                return Some(build_result(f, c, (a, b), (l, r)));
            }
        }
    }
    None
}

fn build_result(
    f: &PiecewiseMap,
    c: f64,
    (a, b): (f64, f64),
    (l, r): (usize, usize),
) -> RenormResult {
    let scale = |y: f64| ((y - a) / (b - a)).clamp(0.0, 1.0);
    let unscale = |t: f64| a + t * (b - a);
    let cp = (c - a) / (b - a);
    let left = |t: f64| scale(iterate_from(f, c, unscale(t), Side::Left, l));
    let right = |t: f64| scale(iterate_from(f, c, unscale(t), Side::Right, r));

    let increasing = |g: &dyn Fn(f64) -> f64, lo: f64, hi: f64| {
        (0..MONOTONE_SAMPLES).all(|i| {
            let t0 = lo + (hi - lo) * i as f64 / MONOTONE_SAMPLES as f64;
            let t1 = lo + (hi - lo) * (i + 1) as f64 / MONOTONE_SAMPLES as f64;
            g(t1) > g(t0)
        })
    };
    let renormalized_increasing = increasing(&left, 0.0, cp) && increasing(&right, cp, 1.0);

    let (renormalized, branch_slopes) = if f.is_piecewise_linear() {
        let (l0, l1) = (left(0.0), left(cp));
        let (r0, r1) = (right(cp), right(1.0));
        let sl = (l1 - l0) / cp;
        let sr = (r1 - r0) / (1.0 - cp);
        let branches = Branch::new(
            (0.0, cp),
            BranchKind::Affine {
                slope: sl,
                intercept: l0,
            },
            Orientation::Increasing,
        )
        .and_then(|bl| {
            let br = Branch::new(
                (cp, 1.0),
                BranchKind::Affine {
                    slope: sr,
                    intercept: r0 - sr * cp,
                },
                Orientation::Increasing,
            )?;
            PiecewiseMap::new(vec![bl, br], MapKind::Lorenz { critical_point: cp })
        });
        (branches.ok(), Some((sl, sr)))
    } else {
        (None, None)
    };

    RenormResult {
        interval: (a, b),
        return_times: (l, r),
        renormalized,
        renormalized_increasing,
        branch_slopes,
    }
}

/// Pointwise re-check of the first-return property on a uniform grid of
/// `samples` points of `[a, b]`. Returns the number of failing points.
pub fn first_return_violations(f: &PiecewiseMap, r: &RenormResult, samples: usize) -> usize {
    let Some(c) = lorenz_critical_point(f) else {
        return samples;
    };
    let (a, b) = r.interval;
    let (tl, tr) = r.return_times;
    (0..samples)
        .filter(|&i| {
            let x = a + (b - a) * (i as f64 + 0.5) / samples as f64;
            if x == c {
                return false;
            }
            let k = if x < c { tl } else { tr };
            let mut y = x;
            for step in 1..=k {
                y = match f.eval(y, Side::Auto) {
                    Ok(v) => v,
                    Err(_) => return true,
                };
                let inside = y > a + RETURN_TOL && y < b - RETURN_TOL;
                if step < k && inside {
                    return true;
                }
            }
            y < a - RETURN_TOL || y > b + RETURN_TOL
        })
        .count()
}

/// Forward orbit `⋃_{k≤horizon} f^k([a, b])`, stopping once an image adds
/// nothing. The flag is `false` when the horizon ran out first.
pub fn attracting_set_from_renorm(
    f: &PiecewiseMap,
    r: &RenormResult,
    horizon: usize,
) -> Result<(IntervalUnion, bool)> {
    let (a, b) = r.interval;
    let mut image = IntervalUnion::interval(a, b)?;
    let mut orbit = image.clone();
    for _ in 0..horizon {
        image = f.image_union(&image);
        if image.is_subset_of(&orbit, EPS_GEOM) {
            return Ok((orbit, true));
        }
        orbit = orbit.union(&image);
    }
    Ok((orbit, false))
}

/// Outer box approximation of `I \ ⋃_{k≤depth} f^{-k}(a, b)`.
pub fn invariant_set_e(
    f: &PiecewiseMap,
    r: &RenormResult,
    depth: usize,
    n_boxes: usize,
) -> Result<IntervalUnion> {
    let cover = BoxCover::new(n_boxes)?;
    let (a, b) = r.interval;
    let mut layer = IntervalUnion::interval(a, b)?;
    let mut covered = layer.clone();
    for _ in 0..depth {
        layer = f.preimage_union(&layer).difference(&covered);
        if layer.measure() <= EPS_GEOM {
            break;
        }
        covered = covered.union(&layer);
    }
    let e = covered.complement();
    Ok(BoxSet::outer_from_union(&cover, &e).to_union(&cover))
}

/// `(sup E ∩ [0, c), inf E ∩ (c, 1])`.
pub fn e_endpoints(e: &IntervalUnion, c: f64) -> (Option<f64>, Option<f64>) {
    let minus = e
        .intervals()
        .iter()
        .filter(|iv| iv.0 < c)
        .map(|iv| iv.1.min(c))
        .reduce(f64::max);
    let plus = e
        .intervals()
        .iter()
        .filter(|iv| iv.1 > c)
        .map(|iv| iv.0.max(c))
        .reduce(f64::min);
    (minus, plus)
}

/// Report entry for a renormalization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenormSummary {
    pub a1: f64,
    pub b1: f64,
    pub l: usize,
    pub r: usize,
    pub e1_minus: Option<f64>,
    pub e1_plus: Option<f64>,
    /// `a1 = e1_minus` or `b1 = e1_plus` within `band`.
    pub endpoint_touches_e: bool,
    pub band: f64,
    pub branch_slopes: Option<(f64, f64)>,
    pub renormalized_increasing: bool,
}

impl RenormSummary {
    pub fn new(f: &PiecewiseMap, r: &RenormResult, e: &IntervalUnion, band: f64) -> Result<Self> {
        let c = lorenz_critical_point(f)
            .ok_or_else(|| Error::InvalidMap("renormalization needs a Lorenz map".into()))?;
        let (e1_minus, e1_plus) = e_endpoints(e, c);
        let (a1, b1) = r.interval;
        let touches = |e: Option<f64>, v: f64| e.is_some_and(|e| (e - v).abs() <= band);
        Ok(Self {
            a1,
            b1,
            l: r.return_times.0,
            r: r.return_times.1,
            e1_minus,
            e1_plus,
            endpoint_touches_e: touches(e1_minus, a1) || touches(e1_plus, b1),
            band,
            branch_slopes: r.branch_slopes,
            renormalized_increasing: r.renormalized_increasing,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical;

    fn full_interval_result() -> RenormResult {
        RenormResult {
            interval: (0.0, 1.0),
            return_times: (1, 1),
            renormalized: None,
            renormalized_increasing: true,
            branch_slopes: None,
        }
    }

    #[test]
    fn doubling_and_sqrt2_are_prime() {
        assert!(detect_renormalization(&canonical::doubling(), 64).is_none());
        assert!(detect_renormalization(&canonical::sqrt2_lorenz(), 64).is_none());
        assert!(detect_renormalization(&canonical::renormalizable_lorenz(), 0).is_none());
        assert!(detect_renormalization(&canonical::square(), 64).is_none());
    }

    #[test]
    fn renormalizable_map_found() {
        let f = canonical::renormalizable_lorenz();
        let r = detect_renormalization(&f, 64).unwrap();
        assert_eq!(r.return_times, (2, 2));
        assert!((r.interval.0 - 0.3).abs() < 1e-12);
        assert!((r.interval.1 - 0.7).abs() < 1e-12);
        assert_eq!(first_return_violations(&f, &r, 500), 0);
        let rf = r.renormalized.as_ref().unwrap();
        assert!(matches!(rf.kind(), MapKind::Lorenz { .. }));
        let (sl, sr) = r.branch_slopes.unwrap();
        assert!((sl - 1.96).abs() < 1e-9 && (sr - 1.96).abs() < 1e-9);
        assert!(r.renormalized_increasing);
    }

    #[test]
    fn attracting_set_examples() {
        let f = canonical::renormalizable_lorenz();
        let r = detect_renormalization(&f, 64).unwrap();
        let (a, stable) = attracting_set_from_renorm(&f, &r, 50).unwrap();
        assert!(stable);
        let exact = IntervalUnion::normalize(&[(0.0, 0.28), (0.3, 0.7), (0.72, 1.0)]).unwrap();
        assert!(a.hausdorff(&exact).unwrap() < 1e-9);

        let (one, stable) = attracting_set_from_renorm(&f, &r, 1).unwrap();
        assert!(!stable);
        assert!(one.hausdorff(&exact).unwrap() < 1e-12);

        let (full, _) =
            attracting_set_from_renorm(&canonical::doubling(), &full_interval_result(), 5).unwrap();
        assert_eq!(full, IntervalUnion::full());
    }

    #[test]
    fn invariant_set_examples() {
        let f = canonical::renormalizable_lorenz();
        let r = detect_renormalization(&f, 64).unwrap();
        let e0 = invariant_set_e(&f, &r, 0, 1024).unwrap();
        let expect = IntervalUnion::normalize(&[(0.0, 0.3), (0.7, 1.0)]).unwrap();
        assert!(e0.hausdorff(&expect).unwrap() <= 1.0 / 1024.0);

        let e = invariant_set_e(&f, &r, 40, 512).unwrap();
        let exact =
            IntervalUnion::normalize(&[(7.0 / 24.0, 7.0 / 24.0), (17.0 / 24.0, 17.0 / 24.0)])
                .unwrap();
        assert!(e.hausdorff(&exact).unwrap() <= 2.0 / 512.0);
        let (m, p) = e_endpoints(&e, 0.5);
        assert!((m.unwrap() - 7.0 / 24.0).abs() <= 2.0 / 512.0);
        assert!((p.unwrap() - 17.0 / 24.0).abs() <= 2.0 / 512.0);

        let none = invariant_set_e(&canonical::doubling(), &full_interval_result(), 3, 64).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn summary_fields() {
        let f = canonical::renormalizable_lorenz();
        let r = detect_renormalization(&f, 64).unwrap();
        let e = invariant_set_e(&f, &r, 40, 512).unwrap();
        let s = RenormSummary::new(&f, &r, &e, 1.0 / 512.0).unwrap();
        assert_eq!((s.l, s.r), (2, 2));
        assert!(!s.endpoint_touches_e);
        assert!(RenormSummary::new(&canonical::square(), &r, &e, 0.1).is_err());
    }
}
