//! Canonical finite unions of closed subintervals of `[0, 1]`.
//!
//! Every set handled by the rest of the crate (attracting sets, repelling
//! sets, basins, Morse sets) is an [`IntervalUnion`]. Intervals are closed,
//! sorted and separated by gaps larger than a geometric tolerance; anything
//! closer is merged at construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default geometric tolerance used for merging and membership slack.
pub const EPS_GEOM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersect,
    Difference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Closed,
    Interior,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for IntervalUnion {
    type Error = Error;

    fn try_from(raw: Vec<(f64, f64)>) -> Result<Self> {
        IntervalUnion::normalize(&raw)
    }
}

impl From<IntervalUnion> for Vec<(f64, f64)> {
    fn from(u: IntervalUnion) -> Self {
        u.intervals
    }
}

impl IntervalUnion {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn full() -> Self {
        Self {
            intervals: vec![(0.0, 1.0)],
        }
    }

    pub fn point(x: f64) -> Result<Self> {
        Self::normalize(&[(x, x)])
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::normalize(&[(lo, hi)])
    }

    /// Builds the canonical union of `raw` with the default tolerance.
    pub fn normalize(raw: &[(f64, f64)]) -> Result<Self> {
        Self::normalize_with(raw, EPS_GEOM)
    }

    /// Builds the canonical union of `raw`, merging intervals whose gap is at
    /// most `eps`.
    pub fn normalize_with(raw: &[(f64, f64)], eps: f64) -> Result<Self> {
        for &(lo, hi) in raw {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
                return Err(Error::Domain(format!(
                    "interval [{lo}, {hi}] leaves [0, 1]"
                )));
            }
            if lo > hi {
                return Err(Error::Domain(format!("interval [{lo}, {hi}] has lo > hi")));
            }
        }
        Ok(Self::merge_sorted(raw.to_vec(), eps))
    }

    /// Clamps endpoints into `[0, 1]` and drops reversed pairs instead of
    /// failing. Used for images computed in floating point.
    pub(crate) fn from_clamped(raw: Vec<(f64, f64)>) -> Self {
        let cleaned = raw
            .into_iter()
            .map(|(lo, hi)| (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0)))
            .filter(|(lo, hi)| lo <= hi)
            .collect();
        Self::merge_sorted(cleaned, EPS_GEOM)
    }

    fn merge_sorted(mut raw: Vec<(f64, f64)>, eps: f64) -> Self {
        raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (lo, hi) in raw {
            match out.last_mut() {
                Some(last) if lo - last.1 <= eps => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        Self { intervals: out }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    /// Total length.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }

    /// Length of the longest member interval.
    pub fn max_component_len(&self) -> f64 {
        self.intervals
            .iter()
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max)
    }

    pub fn apply(op: SetOp, u: &Self, v: &Self) -> Self {
        match op {
            SetOp::Union => u.union(v),
            SetOp::Intersect => u.intersect(v),
            SetOp::Difference => u.difference(v),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut raw = self.intervals.clone();
        raw.extend_from_slice(&other.intervals);
        Self::merge_sorted(raw, EPS_GEOM)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let (a, b) = (&self.intervals, &other.intervals);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            let lo = a[i].0.max(b[j].0);
            let hi = a[i].1.min(b[j].1);
            if hi >= lo - EPS_GEOM {
                out.push((lo.min(hi), hi.max(lo)));
            }
            if a[i].1 < b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::merge_sorted(out, EPS_GEOM)
    }

    /// Closure of `self \ other`.
    pub fn difference(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        for &(a, b) in &self.intervals {
            let mut cur = a;
            let mut covered = false;
            for &(c, d) in &other.intervals {
                if d < a - EPS_GEOM {
                    continue;
                }
                if c > b + EPS_GEOM {
                    break;
                }
                covered = true;
                if c - cur > EPS_GEOM {
                    out.push((cur, c));
                }
                cur = cur.max(d);
            }
            if !covered {
                out.push((a, b));
            } else if b - cur > EPS_GEOM {
                out.push((cur, b));
            }
        }
        Self::merge_sorted(out, EPS_GEOM)
    }

    /// Closure of `[0, 1] \ self`.
    pub fn complement(&self) -> Self {
        Self::full().difference(self)
    }

    /// Grows every interval by `r` on both sides, clamped to `[0, 1]`.
    pub fn dilate(&self, r: f64) -> Self {
        Self::from_clamped(
            self.intervals
                .iter()
                .map(|&(lo, hi)| (lo - r, hi + r))
                .collect(),
        )
    }

    pub fn distance_point(&self, x: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::UndefinedDistance);
        }
        Ok(self.dist_unchecked(x))
    }

    fn dist_unchecked(&self, x: f64) -> f64 {
        // first interval whose right end is >= x
        let k = self.intervals.partition_point(|&(_, hi)| hi < x);
        let mut d = f64::INFINITY;
        if k < self.intervals.len() {
            let (lo, _) = self.intervals[k];
            d = d.min((lo - x).max(0.0));
        }
        if k > 0 {
            d = d.min(x - self.intervals[k - 1].1);
        }
        d
    }

    /// Largest distance from a point of `self` to `other`.
    fn directed_hausdorff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for &(a, b) in &self.intervals {
            worst = worst.max(other.dist_unchecked(a));
            worst = worst.max(other.dist_unchecked(b));
            for w in other.intervals.windows(2) {
                let mid = 0.5 * (w[0].1 + w[1].0);
                if mid > a && mid < b {
                    worst = worst.max(other.dist_unchecked(mid));
                }
            }
        }
        worst
    }

    pub fn hausdorff(&self, other: &Self) -> Result<f64> {
        if self.is_empty() || other.is_empty() {
            return Err(Error::UndefinedDistance);
        }
        Ok(self
            .directed_hausdorff(other)
            .max(other.directed_hausdorff(self)))
    }

    pub fn contains(&self, x: f64, mode: Membership) -> bool {
        match mode {
            Membership::Closed => !self.is_empty() && self.dist_unchecked(x) <= EPS_GEOM,
            Membership::Interior => self.intervals.iter().any(|&(lo, hi)| {
                let left_ok = lo <= 0.0 + EPS_GEOM && x >= 0.0 || x > lo + EPS_GEOM;
                let right_ok = hi >= 1.0 - EPS_GEOM && x <= 1.0 || x < hi - EPS_GEOM;
                left_ok && right_ok && x >= lo && x <= hi
            }),
        }
    }

    /// `self ⊆ other` up to `slack`.
    pub fn is_subset_of(&self, other: &Self, slack: f64) -> bool {
        if self.is_empty() {
            return true;
        }
        if other.is_empty() {
            return false;
        }
        self.directed_hausdorff(other) <= slack && self.difference(&other.dilate(slack)).is_empty()
    }

    /// Endpoints that are boundary points of the set relative to `[0, 1]`.
    pub fn boundary_points(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for &(lo, hi) in &self.intervals {
            if lo > EPS_GEOM {
                out.push(lo);
            }
            if hi < 1.0 - EPS_GEOM && (hi > lo || lo <= EPS_GEOM) {
                out.push(hi);
            }
        }
        out
    }

    /// Distance from `x` to the relative boundary of the set in `[0, 1]`.
    pub fn distance_to_boundary(&self, x: f64) -> f64 {
        self.boundary_points()
            .into_iter()
            .map(|b| (b - x).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn distance_point(x: f64, s: &IntervalUnion) -> Result<f64> {
    s.distance_point(x)
}

pub fn hausdorff(u: &IntervalUnion, v: &IntervalUnion) -> Result<f64> {
    u.hausdorff(v)
}

pub fn set_algebra(op: SetOp, u: &IntervalUnion, v: &IntervalUnion) -> IntervalUnion {
    IntervalUnion::apply(op, u, v)
}
