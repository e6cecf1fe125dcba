//! Piecewise-monotone self-maps of `[0, 1]`.
//!
//! A map is an ordered list of monotone [`Branch`]es whose domains tile the
//! unit interval. Lorenz maps carry a critical point `c` that is treated as
//! two points `c-` and `c+`: the left branch is evaluated at `c` for `c-`
//! and the right branch for `c+`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval_set::{IntervalUnion, EPS_GEOM};

/// Bisection tolerance for branch inverses.
pub const TOL_INV: f64 = 1e-12;

const CONTINUITY_TOL: f64 = 1e-9;
const MONOTONE_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[serde(rename = "inc")]
    Increasing,
    #[serde(rename = "dec")]
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchKind {
    /// `slope * x + intercept`
    Affine { slope: f64, intercept: f64 },
    /// `scale * |x - center|^exponent + offset`
    Power {
        exponent: f64,
        scale: f64,
        offset: f64,
        center: f64,
    },
    /// `parameter * x * (1 - x)`
    Logistic { parameter: f64 },
}

impl BranchKind {
    fn raw(&self, x: f64) -> f64 {
        match *self {
            BranchKind::Affine { slope, intercept } => slope * x + intercept,
            BranchKind::Power {
                exponent,
                scale,
                offset,
                center,
            } => scale * (x - center).abs().powf(exponent) + offset,
            BranchKind::Logistic { parameter } => parameter * x * (1.0 - x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    domain: (f64, f64),
    kind: BranchKind,
    orientation: Orientation,
}

impl Branch {
    /// Validates strict monotonicity (by sampling) and that the image lies in
    /// `[0, 1]`.
    pub fn new(domain: (f64, f64), kind: BranchKind, orientation: Orientation) -> Result<Self> {
        let (lo, hi) = domain;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            return Err(Error::InvalidMap(format!(
                "branch domain [{lo}, {hi}] is not a nondegenerate subinterval of [0, 1]"
            )));
        }
        let b = Branch {
            domain,
            kind,
            orientation,
        };
        let mut prev = kind.raw(lo);
        for k in 0..=MONOTONE_SAMPLES {
            let x = lo + (hi - lo) * k as f64 / MONOTONE_SAMPLES as f64;
            let y = kind.raw(x);
            if !y.is_finite() || !(-EPS_GEOM * 10.0..=1.0 + EPS_GEOM * 10.0).contains(&y) {
                return Err(Error::InvalidMap(format!(
                    "branch on [{lo}, {hi}] maps {x} to {y}, outside [0, 1]"
                )));
            }
            if k > 0 {
                let ok = match orientation {
                    Orientation::Increasing => y > prev,
                    Orientation::Decreasing => y < prev,
                };
                if !ok {
                    return Err(Error::InvalidMap(format!(
                        "branch on [{lo}, {hi}] is not strictly {} near x = {x}",
                        match orientation {
                            Orientation::Increasing => "increasing",
                            Orientation::Decreasing => "decreasing",
                        }
                    )));
                }
            }
            prev = y;
        }
        Ok(b)
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn kind(&self) -> BranchKind {
        self.kind
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Branch formula, clamped into `[0, 1]`. Defined on the closed domain.
    pub fn value(&self, x: f64) -> f64 {
        self.kind.raw(x).clamp(0.0, 1.0)
    }

    /// Closed image `[min, max]` of the domain.
    pub fn range(&self) -> (f64, f64) {
        self.image_of(self.domain.0, self.domain.1)
    }

    fn image_of(&self, a: f64, b: f64) -> (f64, f64) {
        let (fa, fb) = (self.value(a), self.value(b));
        match self.orientation {
            Orientation::Increasing => (fa, fb),
            Orientation::Decreasing => (fb, fa),
        }
    }

    /// Unique `x` in the domain with `value(x) = y`, by bisection. `None` when
    /// `y` is outside the branch range.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        let (m, big_m) = self.range();
        if y < m - EPS_GEOM || y > big_m + EPS_GEOM {
            return None;
        }
        let (mut lo, mut hi) = self.domain;
        let inc = self.orientation == Orientation::Increasing;
        for _ in 0..200 {
            if hi - lo <= TOL_INV {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let below = self.kind.raw(mid) < y;
            if below == inc {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapKind {
    Continuous,
    Lorenz { critical_point: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseMap {
    branches: Vec<Branch>,
    kind: MapKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub points: Vec<f64>,
}

impl Orbit {
    /// Number of points (n + 1 for n iterations).
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl PiecewiseMap {
    pub fn new(branches: Vec<Branch>, kind: MapKind) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidMap("no branches".into()));
        }
        let mut branches = branches;
        branches.sort_by(|a, b| a.domain.0.total_cmp(&b.domain.0));
        if branches[0].domain.0.abs() > EPS_GEOM
            || (branches.last().unwrap().domain.1 - 1.0).abs() > EPS_GEOM
        {
            return Err(Error::InvalidMap("branch domains must cover [0, 1]".into()));
        }
        for (i, w) in branches.windows(2).enumerate() {
            if (w[0].domain.1 - w[1].domain.0).abs() > EPS_GEOM {
                return Err(Error::InvalidMap(format!(
                    "branches {i} and {} leave a gap or overlap at {}",
                    i + 1,
                    w[0].domain.1
                )));
            }
        }
        match kind {
            MapKind::Continuous => {
                for (i, w) in branches.windows(2).enumerate() {
                    let x = w[0].domain.1;
                    let (l, r) = (w[0].value(x), w[1].value(x));
                    if (l - r).abs() > CONTINUITY_TOL {
                        return Err(Error::InvalidMap(format!(
                            "continuous map jumps at x = {x} between branches {i} and {} ({l} vs {r})",
                            i + 1
                        )));
                    }
                }
            }
            MapKind::Lorenz { critical_point: c } => {
                if branches.len() != 2 {
                    return Err(Error::InvalidMap(
                        "a Lorenz map has exactly two branches".into(),
                    ));
                }
                if branches
                    .iter()
                    .any(|b| b.orientation != Orientation::Increasing)
                {
                    return Err(Error::InvalidMap(
                        "both Lorenz branches must be increasing".into(),
                    ));
                }
                if (branches[0].domain.1 - c).abs() > EPS_GEOM {
                    return Err(Error::InvalidMap(format!(
                        "Lorenz branches must split at the critical point {c}"
                    )));
                }
            }
        }
        Ok(Self { branches, kind })
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn critical_point(&self) -> Option<f64> {
        match self.kind {
            MapKind::Lorenz { critical_point } => Some(critical_point),
            MapKind::Continuous => None,
        }
    }

    pub fn is_piecewise_linear(&self) -> bool {
        self.branches
            .iter()
            .all(|b| matches!(b.kind, BranchKind::Affine { .. }))
    }

    pub fn eval(&self, x: f64, side: Side) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("{x} is outside [0, 1]")));
        }
        if let MapKind::Lorenz { critical_point: c } = self.kind {
            if x == c {
                return match side {
                    Side::Left => Ok(self.branches[0].value(c)),
                    Side::Right => Ok(self.branches[1].value(c)),
                    Side::Auto => Err(Error::AmbiguousCriticalPoint { x }),
                };
            }
        }
        let k = self
            .branches
            .partition_point(|b| b.domain.1 < x)
            .min(self.branches.len() - 1);
        Ok(self.branches[k].value(x))
    }

    /// Forward orbit of length `n + 1`.
    pub fn iterate(&self, x: f64, n: usize) -> Result<Orbit> {
        let mut points = Vec::with_capacity(n + 1);
        points.push(x);
        let mut cur = x;
        for index in 0..n {
            cur = match self.eval(cur, Side::Auto) {
                Ok(y) => y,
                Err(Error::AmbiguousCriticalPoint { .. }) => {
                    return Err(Error::OrbitHitCritical { index })
                }
                Err(e) => return Err(e),
            };
            points.push(cur);
        }
        Ok(Orbit { points })
    }

    /// All `x` with `f(x) = y`, sorted and deduplicated.
    pub fn preimages(&self, y: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self.branches.iter().filter_map(|b| b.inverse(y)).collect();
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= 10.0 * TOL_INV);
        out
    }

    pub fn image_union(&self, s: &IntervalUnion) -> IntervalUnion {
        let mut raw = Vec::new();
        for b in &self.branches {
            let (dlo, dhi) = b.domain;
            for &(lo, hi) in s.intervals() {
                let a = lo.max(dlo);
                let z = hi.min(dhi);
                if a <= z {
                    raw.push(b.image_of(a, z));
                }
            }
        }
        IntervalUnion::from_clamped(raw)
    }

    pub fn preimage_union(&self, s: &IntervalUnion) -> IntervalUnion {
        let mut raw = Vec::new();
        for b in &self.branches {
            let (m, big_m) = b.range();
            for &(lo, hi) in s.intervals() {
                let a = lo.max(m);
                let z = hi.min(big_m);
                if a > z + EPS_GEOM {
                    continue;
                }
                let z = z.max(a);
                let (Some(xa), Some(xz)) = (b.inverse(a), b.inverse(z)) else {
                    continue;
                };
                raw.push((xa.min(xz), xa.max(xz)));
            }
        }
        IntervalUnion::from_clamped(raw)
    }

    /// Loads and validates a JSON map definition.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: MapSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidMap(e.to_string()))?;
        spec.build()
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_spec(&self) -> MapSpec {
        let (kind, critical_point) = match self.kind {
            MapKind::Continuous => ("continuous".to_string(), None),
            MapKind::Lorenz { critical_point } => ("lorenz".to_string(), Some(critical_point)),
        };
        let branches = self
            .branches
            .iter()
            .map(|b| {
                let (ty, params): (&str, Vec<(&str, f64)>) = match b.kind {
                    BranchKind::Affine { slope, intercept } => {
                        ("affine", vec![("slope", slope), ("intercept", intercept)])
                    }
                    BranchKind::Power {
                        exponent,
                        scale,
                        offset,
                        center,
                    } => (
                        "power",
                        vec![
                            ("exponent", exponent),
                            ("scale", scale),
                            ("offset", offset),
                            ("center", center),
                        ],
                    ),
                    BranchKind::Logistic { parameter } => {
                        ("logistic", vec![("parameter", parameter)])
                    }
                };
                BranchSpec {
                    domain: [b.domain.0, b.domain.1],
                    kind: ty.to_string(),
                    params: params
                        .into_iter()
                        .map(|(k, v)| (k.to_string(), v))
                        .collect(),
                    orientation: b.orientation,
                }
            })
            .collect();
        MapSpec {
            kind,
            critical_point,
            branches,
        }
    }
}

/// On-disk map definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical_point: Option<f64>,
    pub branches: Vec<BranchSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub domain: [f64; 2],
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub orientation: Orientation,
}

impl MapSpec {
    pub fn build(&self) -> Result<PiecewiseMap> {
        let kind = match self.kind.as_str() {
            "continuous" => MapKind::Continuous,
            "lorenz" => MapKind::Lorenz {
                critical_point: self.critical_point.ok_or_else(|| {
                    Error::InvalidMap("critical_point: required for kind \"lorenz\"".into())
                })?,
            },
            other => {
                return Err(Error::InvalidMap(format!(
                    "kind: expected \"continuous\" or \"lorenz\", got {other:?}"
                )))
            }
        };
        let branches = self
            .branches
            .iter()
            .enumerate()
            .map(|(i, b)| b.build(i))
            .collect::<Result<Vec<_>>>()?;
        PiecewiseMap::new(branches, kind)
    }
}

impl BranchSpec {
    fn build(&self, i: usize) -> Result<Branch> {
        let param = |name: &str| {
            self.params
                .get(name)
                .copied()
                .ok_or_else(|| Error::InvalidMap(format!("branches[{i}].params.{name}: missing")))
        };
        let kind = match self.kind.as_str() {
            "affine" => BranchKind::Affine {
                slope: param("slope")?,
                intercept: param("intercept")?,
            },
            "power" => BranchKind::Power {
                exponent: param("exponent")?,
                scale: self.params.get("scale").copied().unwrap_or(1.0),
                offset: self.params.get("offset").copied().unwrap_or(0.0),
                center: self.params.get("center").copied().unwrap_or(0.0),
            },
            "logistic" => BranchKind::Logistic {
                parameter: param("parameter")?,
            },
            other => {
                return Err(Error::InvalidMap(format!(
                    "branches[{i}].type: unknown branch type {other:?}"
                )))
            }
        };
        Branch::new((self.domain[0], self.domain[1]), kind, self.orientation).map_err(|e| match e {
            Error::InvalidMap(m) => Error::InvalidMap(format!("branches[{i}]: {m}")),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn iu(raw: &[(f64, f64)]) -> IntervalUnion {
        IntervalUnion::normalize(raw).unwrap()
    }

    #[test]
    fn eval_examples() {
        let sq = canonical::square();
        assert_eq!(sq.eval(0.5, Side::Auto).unwrap(), 0.25);
        let dbl = canonical::doubling();
        assert_eq!(dbl.eval(0.75, Side::Auto).unwrap(), 0.5);
        let s2 = canonical::sqrt2_lorenz();
        let c = s2.critical_point().unwrap();
        assert!((s2.eval(c, Side::Left).unwrap() - 1.0).abs() < 1e-15);
        assert!(s2.eval(c, Side::Right).unwrap().abs() < 1e-15);
        assert_eq!(
            s2.eval(c, Side::Auto),
            Err(Error::AmbiguousCriticalPoint { x: c })
        );
        assert!(sq.eval(1.5, Side::Auto).is_err());
    }

    #[test]
    fn iterate_examples() {
        let sq = canonical::square();
        assert_eq!(sq.iterate(0.5, 2).unwrap().points, vec![0.5, 0.25, 0.0625]);
        assert_eq!(sq.iterate(0.3, 0).unwrap().points, vec![0.3]);
        let orbit = canonical::doubling().iterate(1.0 / 3.0, 2).unwrap();
        assert!((orbit.points[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((orbit.points[2] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            canonical::doubling().iterate(0.25, 3),
            Err(Error::OrbitHitCritical { index: 1 })
        );
    }

    #[test]
    fn preimage_examples() {
        let sq = canonical::square();
        let p = sq.preimages(0.25);
        assert_eq!(p.len(), 1);
        assert!((p[0] - 0.5).abs() < 1e-12);
        let p = canonical::doubling().preimages(0.5);
        assert_eq!(p.len(), 2);
        assert!((p[0] - 0.25).abs() < 1e-12 && (p[1] - 0.75).abs() < 1e-12);

        // repeated preimage chain against the closed form y^(1/2^k)
        let mut y = 0.9f64;
        for k in 1..=20 {
            let p = sq.preimages(y);
            assert_eq!(p.len(), 1);
            y = p[0];
            let exact = 0.9f64.powf(0.5f64.powi(k));
            assert!((y - exact).abs() < 1e-11, "k={k}: {y} vs {exact}");
        }
        // 0.9^(1/2^20) = 1 - 1.0048e-7
        assert!((1.0 - y - 1.0048e-7).abs() < 1e-10);
    }

    #[test]
    fn set_image_examples() {
        let sq = canonical::square();
        assert_eq!(
            sq.image_union(&iu(&[(0.0, 0.5)])).intervals(),
            &[(0.0, 0.25)]
        );
        assert!(sq.image_union(&IntervalUnion::empty()).is_empty());
        let dbl = canonical::doubling();
        assert_eq!(
            dbl.image_union(&IntervalUnion::full()).intervals(),
            &[(0.0, 1.0)]
        );

        let pre = dbl.preimage_union(&iu(&[(0.0, 0.5)]));
        assert_eq!(pre.len(), 2);
        assert!(pre.hausdorff(&iu(&[(0.0, 0.25), (0.5, 0.75)])).unwrap() < 1e-11);
        let pre = sq.preimage_union(&iu(&[(0.0, 0.25)]));
        assert!(pre.hausdorff(&iu(&[(0.0, 0.5)])).unwrap() < 1e-11);
        for f in [sq, dbl, canonical::renormalizable_lorenz()] {
            let pre = f.preimage_union(&IntervalUnion::full());
            assert!(pre.hausdorff(&IntervalUnion::full()).unwrap() < 1e-11);
        }
    }

    #[test]
    fn validation_errors() {
        let dec_but_inc = BranchSpec {
            domain: [0.0, 1.0],
            kind: "affine".into(),
            params: [("slope".to_string(), 1.0), ("intercept".to_string(), 0.0)]
                .into_iter()
                .collect(),
            orientation: Orientation::Decreasing,
        };
        let spec = MapSpec {
            kind: "continuous".into(),
            critical_point: None,
            branches: vec![dec_but_inc],
        };
        assert!(matches!(spec.build(), Err(Error::InvalidMap(_))));

        let text = r#"{"kind":"continuous","branches":[{"domain":[0,1],"type":"affine","params":{"slope":1},"orientation":"inc"}]}"#;
        match PiecewiseMap::from_json_str(text) {
            Err(Error::InvalidMap(m)) => assert!(m.contains("intercept"), "{m}"),
            other => panic!("{other:?}"),
        }
        // image leaving [0, 1]
        let text = r#"{"kind":"continuous","branches":[{"domain":[0,1],"type":"affine","params":{"slope":2,"intercept":0},"orientation":"inc"}]}"#;
        assert!(PiecewiseMap::from_json_str(text).is_err());
        // doubling is not continuous
        let text = r#"{"kind":"continuous","branches":[
            {"domain":[0,0.5],"type":"affine","params":{"slope":2,"intercept":0},"orientation":"inc"},
            {"domain":[0.5,1],"type":"affine","params":{"slope":2,"intercept":-1},"orientation":"inc"}]}"#;
        assert!(PiecewiseMap::from_json_str(text).is_err());
    }

    #[test]
    fn json_round_trip() {
        for f in [
            canonical::square(),
            canonical::doubling(),
            canonical::sqrt2_lorenz(),
            canonical::tent(),
        ] {
            let text = serde_json::to_string(&f.to_spec()).unwrap();
            assert_eq!(PiecewiseMap::from_json_str(&text).unwrap(), f);
        }
    }

    #[test]
    fn galois_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for f in [
            canonical::square(),
            canonical::doubling(),
            canonical::tent(),
            canonical::renormalizable_lorenz(),
        ] {
            for _ in 0..100 {
                let raw: Vec<(f64, f64)> = (0..3)
                    .map(|_| {
                        let a: f64 = rng.gen();
                        (a, (a + rng.gen::<f64>() * 0.2).min(1.0))
                    })
                    .collect();
                let s = iu(&raw);
                let back = f.preimage_union(&f.image_union(&s));
                assert!(s.is_subset_of(&back, 1e-9), "{s:?} vs {back:?}");
                let fwd = f.image_union(&f.preimage_union(&s));
                assert!(fwd.is_subset_of(&s, 1e-9), "{fwd:?} vs {s:?}");
            }
        }
    }

    #[test]
    fn pointwise_preimages_inside_set_preimage() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for f in [
            canonical::square(),
            canonical::doubling(),
            canonical::tent(),
        ] {
            for _ in 0..200 {
                let y: f64 = rng.gen();
                let set = f.preimage_union(&IntervalUnion::point(y).unwrap());
                for x in f.preimages(y) {
                    assert!(set.distance_point(x).unwrap() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn orbit_invariant_and_inverse_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for f in [
            canonical::square(),
            canonical::tent(),
            canonical::logistic(3.9),
            canonical::renormalizable_lorenz(),
        ] {
            let x: f64 = rng.gen();
            let orbit = f.iterate(x, 50).unwrap();
            for w in orbit.points.windows(2) {
                assert!((f.eval(w[0], Side::Auto).unwrap() - w[1]).abs() <= EPS_GEOM);
            }
            for b in f.branches() {
                let (m, big_m) = b.range();
                for _ in 0..1000 {
                    let y = m + (big_m - m) * rng.gen::<f64>();
                    let x = b.inverse(y).unwrap();
                    assert!((b.value(x) - y).abs() <= 10.0 * TOL_INV);
                }
            }
        }
    }
}
