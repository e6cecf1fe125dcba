//! Lyapunov function of a weak Morse decomposition `M_0, …, M_m`.
//!
//! ```text
//! g(x) = Σ_{i<m} P_i(x) / (d(x, M_i) + 2^i P_i(x)),   P_i = Π_{j≠i} d(x, M_j)
//! h(x) = sup_{n≥0} g(f^n(x))
//! V(x) = (e - 1) Σ_{k≥1} e^{-k} h(f^k(x))
//! ```
//!
//! `g` equals `1/2^i` on `M_i` and `0` on `M_m`; the `(e - 1)` factor makes
//! `V` take the same values on the Morse sets. `h` is truncated to
//! `sup_horizon` iterates and the series to `series_horizon` terms, which
//! costs at most `e^{-series_horizon}`. Within one orbit buffer `h` is a
//! suffix maximum, so `V` never increases along that buffer.

use rand::Rng;
use serde::Serialize;

use crate::decomposition::{classify_alpha, ARChain, AlphaClass};
use crate::error::{Error, Result};
use crate::interval_set::{IntervalUnion, EPS_GEOM};
use crate::map_model::PiecewiseMap;

pub const DEFAULT_SUP_HORIZON: usize = 200;
pub const DEFAULT_SERIES_HORIZON: usize = 40;

/// Extra width of a level band beyond the series tail.
pub const LEVEL_SLACK: f64 = 1e-9;

pub const CSV_HEADER: &str = "x,g,h,V,level_band,alpha_class";

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEvaluator {
    morse_sets: Vec<IntervalUnion>,
    overlap: IntervalUnion,
    sup_horizon: usize,
    series_horizon: usize,
    eps_l: f64,
}

/// `V(x)` with the truncation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VValue {
    pub value: f64,
    pub error_bound: f64,
}

impl LyapunovEvaluator {
    pub fn new(
        morse_sets: Vec<IntervalUnion>,
        overlap: IntervalUnion,
        sup_horizon: usize,
        series_horizon: usize,
        eps_l: f64,
    ) -> Result<Self> {
        if series_horizon == 0 || sup_horizon < series_horizon {
            return Err(Error::Config(format!(
                "horizons must satisfy sup_horizon >= series_horizon >= 1, got {sup_horizon} and {series_horizon}"
            )));
        }
        if morse_sets.is_empty() {
            return Err(Error::Config("at least one Morse set is required".into()));
        }
        for (i, a) in morse_sets.iter().enumerate() {
            for (j, b) in morse_sets.iter().enumerate().skip(i + 1) {
                if a.intersect(b).measure() > EPS_GEOM {
                    return Err(Error::Config(format!(
                        "Morse sets {i} and {j} have overlapping interiors"
                    )));
                }
            }
        }
        Ok(Self {
            morse_sets,
            overlap,
            sup_horizon,
            series_horizon,
            eps_l,
        })
    }

    /// Morse sets and overlap of a chain, `ε_L` = its box width.
    pub fn from_chain(chain: &ARChain, sup_horizon: usize, series_horizon: usize) -> Result<Self> {
        Self::new(
            chain.morse_sets.clone(),
            chain.overlap(),
            sup_horizon,
            series_horizon,
            chain.box_width,
        )
    }

    pub fn morse_sets(&self) -> &[IntervalUnion] {
        &self.morse_sets
    }

    /// `m`: index of the last Morse set.
    pub fn level_count(&self) -> usize {
        self.morse_sets.len() - 1
    }

    /// `m = 0`: `g`, `h` and `V` vanish identically.
    pub fn is_degenerate(&self) -> bool {
        self.level_count() == 0
    }

    pub fn sup_horizon(&self) -> usize {
        self.sup_horizon
    }

    pub fn series_horizon(&self) -> usize {
        self.series_horizon
    }

    pub fn eps_l(&self) -> f64 {
        self.eps_l
    }

    /// `e^{-N_V}`.
    pub fn tail_bound(&self) -> f64 {
        (-(self.series_horizon as f64)).exp()
    }

    /// Value of `g` and `V` on `M_i`.
    pub fn level_value(&self, i: usize) -> f64 {
        if i >= self.level_count() {
            0.0
        } else {
            0.5f64.powi(i as i32)
        }
    }

    pub fn g(&self, x: f64) -> Result<f64> {
        let m = self.level_count();
        if m == 0 {
            return Ok(0.0);
        }
        if !self.overlap.is_empty() && self.overlap.distance_point(x)? <= self.eps_l {
            return Err(Error::OnOverlap { x, eps: self.eps_l });
        }
        let d: Vec<f64> = self
            .morse_sets
            .iter()
            .map(|s| s.distance_point(x))
            .collect::<Result<_>>()?;
        let mut sum = 0.0;
        for i in 0..m {
            let p: f64 = d
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| v)
                .product();
            let denom = d[i] + 2f64.powi(i as i32) * p;
            if denom == 0.0 {
                return Err(Error::OnOverlap { x, eps: self.eps_l });
            }
            sum += p / denom;
        }
        Ok(sum)
    }

    /// `g` along the orbit of `x`, `len` points.
    fn g_buffer(&self, f: &PiecewiseMap, x: f64, len: usize) -> Result<Vec<f64>> {
        let orbit = f.iterate(x, len - 1)?;
        orbit
            .points
            .iter()
            .enumerate()
            .map(|(index, &y)| {
                self.g(y).map_err(|e| match e {
                    Error::OnOverlap { .. } => Error::OrbitOnOverlap { x, index },
                    other => other,
                })
            })
            .collect()
    }

    pub fn h(&self, f: &PiecewiseMap, x: f64) -> Result<f64> {
        if self.is_degenerate() {
            return Ok(0.0);
        }
        let g = self.g_buffer(f, x, self.sup_horizon + 1)?;
        Ok(g.into_iter().fold(0.0, f64::max))
    }

    pub fn v(&self, f: &PiecewiseMap, x: f64) -> Result<VValue> {
        Ok(VValue {
            value: self.v_along_orbit(f, x, 0)?[0],
            error_bound: self.tail_bound(),
        })
    }

    /// `h(f^n(x))` for `n = 0..=steps`, all from one orbit buffer.
    pub fn h_along_orbit(&self, f: &PiecewiseMap, x: f64, steps: usize) -> Result<Vec<f64>> {
        if self.is_degenerate() {
            return Ok(vec![0.0; steps + 1]);
        }
        let mut h = self.g_buffer(f, x, steps + self.sup_horizon + 1)?;
        for k in (0..h.len() - 1).rev() {
            h[k] = h[k].max(h[k + 1]);
        }
        h.truncate(steps + 1);
        Ok(h)
    }

    /// `V(f^n(x))` for `n = 0..=steps`, all from one orbit buffer.
    pub fn v_along_orbit(&self, f: &PiecewiseMap, x: f64, steps: usize) -> Result<Vec<f64>> {
        if self.is_degenerate() {
            return Ok(vec![0.0; steps + 1]);
        }
        let nv = self.series_horizon;
        let mut h = self.g_buffer(f, x, steps + nv + self.sup_horizon + 1)?;
        for k in (0..h.len() - 1).rev() {
            h[k] = h[k].max(h[k + 1]);
        }
        let weights: Vec<f64> = (1..=nv).map(|k| (-(k as f64)).exp()).collect();
        let norm = std::f64::consts::E - 1.0;
        Ok((0..=steps)
            .map(|n| {
                norm * weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * h[n + k + 1])
                    .sum::<f64>()
            })
            .collect())
    }

    fn band(&self) -> f64 {
        self.tail_bound() + LEVEL_SLACK
    }

    /// Level band label of a `V` value: `M{i}` on a level, `C{j}` strictly
    /// between levels `j` and `j + 1`.
    pub fn level_band(&self, v: f64) -> Result<String> {
        let m = self.level_count();
        let band = self.band();
        for i in 0..=m {
            if (v - self.level_value(i)).abs() <= band {
                return Ok(format!("M{i}"));
            }
        }
        for j in 0..m {
            if v < self.level_value(j) - band && v > self.level_value(j + 1) + band {
                return Ok(format!("C{j}"));
            }
        }
        Err(Error::AmbiguousLevel { v })
    }
}

pub fn g_pair(x: f64, a: &IntervalUnion, r: &IntervalUnion, eps_l: f64) -> Result<f64> {
    let da = a.distance_point(x)?;
    let dr = r.distance_point(x)?;
    if (da <= eps_l && dr <= eps_l) || da + dr == 0.0 {
        return Err(Error::OnOverlap { x, eps: eps_l });
    }
    Ok(da / (da + dr))
}

pub fn g_morse(x: f64, ev: &LyapunovEvaluator) -> Result<f64> {
    ev.g(x)
}

pub fn h_value(f: &PiecewiseMap, x: f64, ev: &LyapunovEvaluator) -> Result<f64> {
    ev.h(f, x)
}

pub fn v_value(f: &PiecewiseMap, x: f64, ev: &LyapunovEvaluator) -> Result<VValue> {
    ev.v(f, x)
}

/// Reads `α(x)` off `V(x)`: level `0` is `X`, level `1/2^j` is `R_{j+1}`,
/// and the open gap below `1/2^j` is the connecting region `C_j`.
pub fn alpha_from_v(v: f64, ev: &LyapunovEvaluator, chain: &ARChain) -> Result<AlphaClass> {
    let label = ev.level_band(v)?;
    let idx: usize = label[1..].parse().expect("band labels carry an index");
    let m = ev.level_count();
    Ok(match (label.as_bytes()[0], idx) {
        (b'M', i) if i == m => {
            if chain.truncated {
                AlphaClass::Unresolved { depth: m }
            } else {
                AlphaClass::WholeSpace
            }
        }
        (b'M', i) => AlphaClass::Repeller { level: i + 1 },
        (_, j) => AlphaClass::Connecting { j },
    })
}

/// Uniform sample from an interval union (by length; by component when the
/// union has measure zero).
pub fn sample_point<R: Rng>(s: &IntervalUnion, rng: &mut R) -> Option<f64> {
    let ivs = s.intervals();
    if ivs.is_empty() {
        return None;
    }
    let total = s.measure();
    if total <= EPS_GEOM {
        let (lo, hi) = ivs[rng.gen_range(0..ivs.len())];
        return Some(lo + (hi - lo) * rng.gen::<f64>());
    }
    let mut t = rng.gen::<f64>() * total;
    for &(lo, hi) in ivs {
        let len = hi - lo;
        if t <= len {
            return Some(lo + t);
        }
        t -= len;
    }
    ivs.last().map(|iv| iv.1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneReport {
    pub samples: usize,
    pub steps: usize,
    pub tested: usize,
    /// Samples dropped because the orbit hit `c` or the overlap set.
    pub skipped: usize,
    /// `V(x) - V(f^n(x)) <= -tolerance` with independent evaluations.
    pub violations: usize,
    /// `V(f^n(x)) < V(f^{n+1}(x))` within a shared orbit buffer.
    pub shared_buffer_violations: usize,
    /// Smallest `V(x) - V(f^n(x))` seen; `None` if nothing was tested.
    pub min_decrement: Option<f64>,
    pub tolerance: f64,
}

impl MonotoneReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.shared_buffer_violations == 0
    }
}

/// Samples the connecting regions of `chain`, away from the overlap set, and
/// checks that `V` decreases along `steps` iterates.
pub fn verify_monotone<R: Rng>(
    f: &PiecewiseMap,
    ev: &LyapunovEvaluator,
    chain: &ARChain,
    samples: usize,
    steps: usize,
    rng: &mut R,
) -> MonotoneReport {
    let tolerance = ev.tail_bound();
    let region = chain
        .connecting_regions
        .iter()
        .fold(IntervalUnion::empty(), |acc, c| acc.union(c));
    let mut report = MonotoneReport {
        samples,
        steps,
        tested: 0,
        skipped: 0,
        violations: 0,
        shared_buffer_violations: 0,
        min_decrement: None,
        tolerance,
    };
    if region.is_empty() {
        return report;
    }
    for _ in 0..samples {
        let x = sample_point(&region, rng).expect("region is nonempty");
        let Ok(shared) = ev.v_along_orbit(f, x, steps) else {
            report.skipped += 1;
            continue;
        };
        let independent: Result<Vec<f64>> = (1..=steps)
            .map(|n| {
                let y = f.iterate(x, n)?.points[n];
                Ok(ev.v(f, y)?.value)
            })
            .collect();
        let Ok(independent) = independent else {
            report.skipped += 1;
            continue;
        };
        report.tested += 1;
        report.shared_buffer_violations += shared.windows(2).filter(|w| w[1] > w[0]).count();
        for vn in independent {
            let dec = shared[0] - vn;
            if dec <= -tolerance {
                report.violations += 1;
            }
            report.min_decrement = Some(report.min_decrement.map_or(dec, |m| m.min(dec)));
        }
    }
    report
}

/// One row of the CSV sample dump. `None` cells are left empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRow {
    pub x: f64,
    pub g: Option<f64>,
    pub h: Option<f64>,
    #[serde(rename = "V")]
    pub v: Option<f64>,
    pub level_band: String,
    pub alpha_class: String,
}

/// Rows on the grid `i / samples`, `i = 0..=samples`.
pub fn sample_rows(
    f: &PiecewiseMap,
    ev: &LyapunovEvaluator,
    chain: &ARChain,
    samples: usize,
) -> Vec<SampleRow> {
    (0..=samples)
        .map(|i| {
            let x = i as f64 / samples.max(1) as f64;
            let v = ev.v(f, x).ok().map(|v| v.value);
            let level_band = match v {
                Some(v) => ev.level_band(v).unwrap_or_else(|_| "ambiguous".into()),
                None => "undefined".into(),
            };
            SampleRow {
                x,
                g: ev.g(x).ok(),
                h: ev.h(f, x).ok(),
                v,
                level_band,
                alpha_class: classify_alpha(chain, x).label(),
            }
        })
        .collect()
}

pub fn rows_to_csv(rows: &[SampleRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Largest `|V(x) - V(x')|` over adjacent points of grids with `k` cells,
/// for each `k` in `cells`. Points where `V` is undefined are skipped.
pub fn continuity_modulus(
    f: &PiecewiseMap,
    ev: &LyapunovEvaluator,
    cells: &[usize],
) -> Vec<(f64, f64)> {
    cells
        .iter()
        .map(|&k| {
            let v: Vec<Option<f64>> = (0..=k)
                .map(|i| ev.v(f, i as f64 / k as f64).ok().map(|v| v.value))
                .collect();
            let jump = v
                .windows(2)
                .filter_map(|w| Some((w[0]? - w[1]?).abs()))
                .fold(0.0, f64::max);
            (1.0 / k as f64, jump)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical;
    use crate::decomposition::leveled_decomposition;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(x: f64) -> IntervalUnion {
        IntervalUnion::point(x).unwrap()
    }

    fn exact_pair() -> LyapunovEvaluator {
        LyapunovEvaluator::new(
            vec![pt(1.0), pt(0.0)],
            IntervalUnion::empty(),
            200,
            40,
            1e-12,
        )
        .unwrap()
    }

    #[test]
    fn g_pair_examples() {
        let (a, r) = (pt(0.0), pt(1.0));
        assert!((g_pair(0.3, &a, &r, 1e-12).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(g_pair(0.0, &a, &r, 1e-12).unwrap(), 0.0);
        assert_eq!(g_pair(1.0, &a, &r, 1e-12).unwrap(), 1.0);
        let both = IntervalUnion::interval(0.4, 0.6).unwrap();
        assert!(matches!(
            g_pair(0.5, &both, &both, 1e-12),
            Err(Error::OnOverlap { .. })
        ));
    }

    #[test]
    fn g_morse_three_levels() {
        let ev = LyapunovEvaluator::new(
            vec![pt(1.0), pt(0.5), pt(0.0)],
            IntervalUnion::empty(),
            200,
            40,
            1e-12,
        )
        .unwrap();
        assert_eq!(g_morse(1.0, &ev).unwrap(), 1.0);
        assert_eq!(g_morse(0.5, &ev).unwrap(), 0.5);
        assert_eq!(g_morse(0.0, &ev).unwrap(), 0.0);
        let g = g_morse(0.75, &ev).unwrap();
        assert!(g > 0.5 && g < 1.0);
    }

    #[test]
    fn g_morse_reduces_to_pair() {
        let ev = exact_pair();
        for i in 1..100 {
            let x = i as f64 / 100.0;
            let a = g_pair(x, &pt(0.0), &pt(1.0), 1e-12).unwrap();
            assert!((a - g_morse(x, &ev).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn h_and_v_on_square() {
        let f = canonical::square();
        let ev = exact_pair();
        assert!((h_value(&f, 0.3, &ev).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(h_value(&f, 1.0, &ev).unwrap(), 1.0);
        assert_eq!(h_value(&f, 0.0, &ev).unwrap(), 0.0);

        let v1 = v_value(&f, 1.0, &ev).unwrap();
        assert!((v1.value - 1.0).abs() <= v1.error_bound + 1e-12);
        assert_eq!(v_value(&f, 0.0, &ev).unwrap().value, 0.0);

        let oracle = (std::f64::consts::E - 1.0)
            * (1..=60)
                .map(|k| (-(k as f64)).exp() * 0.3f64.powf(2f64.powi(k)))
                .sum::<f64>();
        let v = v_value(&f, 0.3, &ev).unwrap().value;
        assert!((v - oracle).abs() < 1e-15);
        assert!((v - 0.0588).abs() < 1e-4);
    }

    #[test]
    fn shared_buffer_is_monotone() {
        let f = canonical::renormalizable_lorenz();
        let chain = leveled_decomposition(&f, 8, 256).unwrap();
        let ev = LyapunovEvaluator::from_chain(&chain, 200, 40).unwrap();
        for i in 1..50 {
            let x = i as f64 / 50.0 + 1e-3;
            if let Ok(vs) = ev.v_along_orbit(&f, x, 10) {
                assert!(vs.windows(2).all(|w| w[1] <= w[0]));
                assert!(vs
                    .iter()
                    .all(|&v| (0.0..=1.0 + ev.tail_bound()).contains(&v)));
            }
        }
    }

    #[test]
    fn alpha_from_v_examples() {
        let f = canonical::square();
        let chain = leveled_decomposition(&f, 8, 256).unwrap();
        let ev = LyapunovEvaluator::from_chain(&chain, 200, 40).unwrap();
        assert_eq!(
            alpha_from_v(0.0, &ev, &chain).unwrap(),
            AlphaClass::WholeSpace
        );
        assert_eq!(
            alpha_from_v(1.0, &ev, &chain).unwrap(),
            AlphaClass::Repeller { level: 1 }
        );
        assert_eq!(
            alpha_from_v(0.0588, &ev, &chain).unwrap(),
            AlphaClass::Connecting { j: 0 }
        );
        assert!(matches!(
            alpha_from_v(1.5, &ev, &chain),
            Err(Error::AmbiguousLevel { .. })
        ));

        let three = LyapunovEvaluator::new(
            vec![pt(1.0), pt(0.5), pt(0.0)],
            IntervalUnion::empty(),
            200,
            40,
            1e-12,
        )
        .unwrap();
        assert_eq!(three.level_band(0.5).unwrap(), "M1");
        assert_eq!(three.level_band(0.7).unwrap(), "C0");
        assert_eq!(three.level_band(0.2).unwrap(), "C1");
    }

    #[test]
    fn transitive_is_degenerate() {
        let f = canonical::doubling();
        let chain = leveled_decomposition(&f, 8, 64).unwrap();
        let ev = LyapunovEvaluator::from_chain(&chain, 200, 40).unwrap();
        assert!(ev.is_degenerate());
        assert_eq!(v_value(&f, 0.5, &ev).unwrap().value, 0.0);
        assert_eq!(
            alpha_from_v(0.0, &ev, &chain).unwrap(),
            AlphaClass::WholeSpace
        );
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rep = verify_monotone(&f, &ev, &chain, 10, 5, &mut rng);
        assert_eq!(rep.tested, 0);
        assert!(rep.passed());
    }

    #[test]
    fn monotone_on_square() {
        let f = canonical::square();
        let chain = leveled_decomposition(&f, 8, 256).unwrap();
        let ev = LyapunovEvaluator::from_chain(&chain, 200, 40).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rep = verify_monotone(&f, &ev, &chain, 200, 5, &mut rng);
        assert_eq!(rep.tested, 200);
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn evaluator_validation() {
        let err = LyapunovEvaluator::new(vec![pt(0.0)], IntervalUnion::empty(), 10, 40, 1e-3);
        assert!(matches!(err, Err(Error::Config(_))));
        let a = IntervalUnion::interval(0.0, 0.5).unwrap();
        let b = IntervalUnion::interval(0.4, 1.0).unwrap();
        assert!(LyapunovEvaluator::new(vec![a, b], IntervalUnion::empty(), 200, 40, 1e-3).is_err());
    }

    #[test]
    fn csv_layout() {
        let f = canonical::square();
        let chain = leveled_decomposition(&f, 8, 64).unwrap();
        let ev = LyapunovEvaluator::from_chain(&chain, 200, 40).unwrap();
        let csv = rows_to_csv(&sample_rows(&f, &ev, &chain, 16)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 18);
        assert!(lines.iter().all(|l| l.split(',').count() == 6));
    }

    #[test]
    fn continuity_modulus_shrinks_on_square() {
        let f = canonical::square();
        let chain = leveled_decomposition(&f, 8, 256).unwrap();
        let ev = LyapunovEvaluator::from_chain(&chain, 200, 40).unwrap();
        let m = continuity_modulus(&f, &ev, &[32, 64, 128, 256]);
        assert!(m.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
        assert!(m[3].1 < m[0].1);
    }
}
