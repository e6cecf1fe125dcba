//! End-to-end run: decomposition, renormalization cross-check, Lyapunov
//! function and every verification suite, collected into one report.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::box_graph::{BoxCover, TransitionGraph};
use crate::decomposition::{
    alpha_limit_estimate, classify_alpha, leveled_decomposition_pair, ARChain, AlphaClass,
    AlphaSet, DEFAULT_MAX_DEPTH,
};
use crate::error::{Error, Result};
use crate::interval_set::{IntervalUnion, Membership, EPS_GEOM};
use crate::lorenz_renorm::{
    attracting_set_from_renorm, detect_renormalization, first_return_violations, invariant_set_e,
    RenormSummary, DEFAULT_MAX_RETURN,
};
use crate::lyapunov::{
    alpha_from_v, continuity_modulus, g_pair, rows_to_csv, sample_point, sample_rows,
    verify_monotone, LyapunovEvaluator, DEFAULT_SERIES_HORIZON, DEFAULT_SUP_HORIZON, LEVEL_SLACK,
};
use crate::map_model::{MapKind, MapSpec, PiecewiseMap};

pub const REPORT_SCHEMA_VERSION: &str = "1";

const ALPHA_SAMPLES_PER_REGION: usize = 50;
const LEVEL_SAMPLES: usize = 100;
const FIRST_RETURN_SAMPLES: usize = 500;
const NOWHERE_DENSE_RATIO: f64 = 0.75;
const PAIR_AGREEMENT_TOL: f64 = 1e-12;
const ALPHA_CAP: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub map_file: PathBuf,
    pub n_boxes: usize,
    pub max_depth: usize,
    pub max_return: usize,
    pub sup_horizon: usize,
    pub series_horizon: usize,
    pub samples: usize,
    pub seed: u64,
    pub monotone_steps: usize,
    pub alpha_depth: usize,
    pub e_depth: usize,
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub graph_dump: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(map_file: impl Into<PathBuf>) -> Self {
        Self {
            map_file: map_file.into(),
            n_boxes: 256,
            max_depth: DEFAULT_MAX_DEPTH,
            max_return: DEFAULT_MAX_RETURN,
            sup_horizon: DEFAULT_SUP_HORIZON,
            series_horizon: DEFAULT_SERIES_HORIZON,
            samples: 500,
            seed: 0,
            monotone_steps: 5,
            alpha_depth: 20,
            e_depth: 40,
            report: None,
            csv: None,
            graph_dump: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        BoxCover::new(self.n_boxes)?;
        let counts = [
            ("max_return", self.max_return),
            ("sup_horizon", self.sup_horizon),
            ("series_horizon", self.series_horizon),
            ("samples", self.samples),
            ("monotone_steps", self.monotone_steps),
            ("alpha_depth", self.alpha_depth),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.sup_horizon < self.series_horizon {
            return Err(Error::Config(
                "sup_horizon must be at least series_horizon".into(),
            ));
        }
        Ok(())
    }

    pub fn load_map(&self) -> Result<PiecewiseMap> {
        PiecewiseMap::from_json_file(&self.map_file)
    }
}

/// Outcome of one verification suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub applicable: bool,
    /// Worst observed value of the suite's checked quantity.
    pub worst: Option<f64>,
    /// Threshold the worst value is compared against.
    pub limit: Option<f64>,
    pub checked: usize,
    pub detail: String,
}

impl SuiteOutcome {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            passed: true,
            applicable: true,
            worst: None,
            limit: None,
            checked: 0,
            detail: String::new(),
        }
    }

    fn not_applicable(name: &'static str, why: &str) -> Self {
        Self {
            applicable: false,
            detail: format!("not applicable: {why}"),
            ..Self::new(name)
        }
    }

    fn failed(name: &'static str, e: &Error) -> Self {
        Self {
            passed: false,
            detail: e.to_string(),
            ..Self::new(name)
        }
    }

    /// Records `value` against an upper `limit`.
    fn bound(&mut self, value: f64, limit: f64) {
        self.checked += 1;
        self.limit = Some(limit);
        self.worst = Some(self.worst.map_or(value, |w| w.max(value)));
        if value.is_nan() || value > limit {
            self.passed = false;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenormSection {
    pub status: String,
    pub max_return: usize,
    pub result: Option<RenormSummary>,
    pub first_return_violations: Option<usize>,
    pub attracting_set: Option<IntervalUnion>,
    pub attracting_set_stabilized: Option<bool>,
    pub invariant_set_e: Option<IntervalUnion>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovSection {
    pub status: String,
    pub sup_horizon: usize,
    pub series_horizon: usize,
    pub tail_bound: f64,
    pub eps_l: f64,
    pub level_values: Vec<f64>,
    pub v_min: Option<f64>,
    pub v_max: Option<f64>,
    pub v_mean: Option<f64>,
    pub undefined_samples: usize,
    /// `(grid spacing, largest jump of V between neighbours)`.
    pub continuity_modulus: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub level_count: Option<usize>,
    pub classification: String,
    pub truncated: bool,
    pub suites_passed: usize,
    pub suites_failed: usize,
    pub all_passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: &'static str,
    pub generated_at_unix: u64,
    pub config: RunConfig,
    pub map: MapSpec,
    pub summary: Summary,
    pub chain: Option<ARChain>,
    pub renormalization: RenormSection,
    pub lyapunov: Option<LyapunovSection>,
    pub suites: Vec<SuiteOutcome>,
    pub errors: Vec<String>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.summary.all_passed
    }

    pub fn suite(&self, name: &str) -> Option<&SuiteOutcome> {
        self.suites.iter().find(|s| s.name == name)
    }

    /// Pretty JSON with fields in declaration order.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Independent generator per suite, so suites do not perturb each other.
fn suite_rng(seed: u64, suite: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ suite.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Loads the map named by `cfg` and runs the whole pipeline on it.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let f = cfg.load_map()?;
    Ok(run_on_map(&f, cfg))
}

/// Runs every stage on `f`. Module errors become report entries.
pub fn run_on_map(f: &PiecewiseMap, cfg: &RunConfig) -> Report {
    let mut errors = Vec::new();
    let mut suites = Vec::new();

    let graph = TransitionGraph::build(f, cfg.n_boxes);
    suites.push(match &graph {
        Ok(g) => suite_outer_approximation(f, g, cfg),
        Err(e) => SuiteOutcome::failed("outer_approximation", e),
    });

    let chains = leveled_decomposition_pair(f, cfg.max_depth, cfg.n_boxes);
    let (chain, refined) = match chains {
        Ok((c, r)) => (Some(c), Some(r)),
        Err(e) => {
            errors.push(format!("decomposition: {e}"));
            (None, None)
        }
    };

    let renorm = renorm_section(f, cfg, chain.as_ref(), &mut errors);
    let ev = chain.as_ref().and_then(|c| {
        LyapunovEvaluator::from_chain(c, cfg.sup_horizon, cfg.series_horizon)
            .map_err(|e| errors.push(format!("lyapunov: {e}")))
            .ok()
    });

    match (&chain, &refined) {
        (Some(chain), Some(refined)) => {
            suites.push(suite_refinement(chain));
            suites.push(suite_attracting_invariance(f, chain));
            suites.push(suite_repelling_bi_invariance(f, chain));
            suites.push(suite_interior_disjoint(chain));
            suites.push(suite_nesting(chain));
            suites.push(suite_nowhere_dense(chain, refined));
            suites.push(suite_morse_cover(chain));
            suites.push(suite_alpha_cross_validation(f, chain, cfg));
        }
        _ => {
            let e = Error::Config("decomposition unavailable".into());
            for name in CHAIN_SUITES {
                suites.push(SuiteOutcome::failed(name, &e));
            }
        }
    }
    match (&chain, &ev) {
        (Some(chain), Some(ev)) => {
            suites.push(suite_level_sets(f, ev, cfg));
            suites.push(suite_h_orbit_monotone(f, ev, cfg));
            suites.push(suite_v_monotone(f, ev, chain, cfg));
            suites.push(suite_alpha_readback(f, ev, chain, cfg));
            suites.push(suite_pair_agreement(ev, chain));
        }
        _ => {
            let e = Error::Config("Lyapunov evaluator unavailable".into());
            for name in LYAPUNOV_SUITES {
                suites.push(SuiteOutcome::failed(name, &e));
            }
        }
    }
    suites.extend(renorm_suites(f, chain.as_ref(), &renorm));

    let lyapunov = match (&chain, &ev) {
        (Some(chain), Some(ev)) => Some(lyapunov_section(f, ev, chain, cfg)),
        _ => None,
    };
    if let (Some(l), Some(chain)) = (&lyapunov, &chain) {
        suites.push(suite_v_bounds(l, ev.as_ref().expect("evaluator exists")));
        suites.push(suite_continuity(f, l, chain));
    } else {
        let e = Error::Config("Lyapunov evaluator unavailable".into());
        suites.push(SuiteOutcome::failed("v_bounds", &e));
        suites.push(SuiteOutcome::failed("v_continuity", &e));
    }

    let failed = suites.iter().filter(|s| !s.passed).count();
    let summary = Summary {
        level_count: chain.as_ref().map(|c| c.level_count),
        classification: match &chain {
            None => "error".into(),
            Some(c) if c.transitive => "transitive".into(),
            Some(c) if c.truncated => format!("truncated at {} levels", c.level_count),
            Some(c) => format!("{} levels", c.level_count),
        },
        truncated: chain.as_ref().is_some_and(|c| c.truncated),
        suites_passed: suites.len() - failed,
        suites_failed: failed,
        all_passed: failed == 0 && errors.is_empty(),
    };
    Report {
        schema_version: REPORT_SCHEMA_VERSION,
        generated_at_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config: cfg.clone(),
        map: f.to_spec(),
        summary,
        chain,
        renormalization: renorm,
        lyapunov,
        suites,
        errors,
    }
}

const CHAIN_SUITES: [&str; 8] = [
    "refinement_consistency",
    "attracting_invariance",
    "repelling_bi_invariance",
    "interior_disjoint",
    "nesting",
    "repelling_nowhere_dense",
    "morse_cover",
    "alpha_cross_validation",
];

const LYAPUNOV_SUITES: [&str; 5] = [
    "level_sets",
    "h_orbit_monotone",
    "v_monotone",
    "alpha_readback",
    "pair_morse_agreement",
];

fn suite_outer_approximation(
    f: &PiecewiseMap,
    g: &TransitionGraph,
    cfg: &RunConfig,
) -> SuiteOutcome {
    let mut s = SuiteOutcome::new("outer_approximation");
    let mut rng = suite_rng(cfg.seed, 1);
    let bad = g.outer_approximation_violations(f, cfg.samples, &mut rng);
    s.bound(bad as f64, 0.0);
    s.checked = cfg.samples;
    s.detail = format!("{bad} sampled points mapped outside their successor boxes");
    s
}

fn suite_refinement(chain: &ARChain) -> SuiteOutcome {
    let mut s = SuiteOutcome::new("refinement_consistency");
    for &gap in &chain.diagnostics.refinement_gaps {
        s.bound(gap, 4.0 * chain.box_width);
    }
    s.detail = "attracting sets on n and 2n boxes agree within 4 box widths".into();
    s
}

fn suite_attracting_invariance(f: &PiecewiseMap, chain: &ARChain) -> SuiteOutcome {
    let mut s = SuiteOutcome::new("attracting_invariance");
    for l in &chain.levels {
        match f.image_union(&l.attracting).hausdorff(&l.attracting) {
            Ok(d) => s.bound(d, chain.box_width + EPS_GEOM),
            Err(e) => return SuiteOutcome::failed(s.name, &e),
        }
    }
    s.detail = "hausdorff(f(A_i), A_i) per level".into();
    s
}

fn suite_repelling_bi_invariance(f: &PiecewiseMap, chain: &ARChain) -> SuiteOutcome {
    let mut s = SuiteOutcome::new("repelling_bi_invariance");
    let w = chain.box_width;
    for l in &chain.levels {
        let r = &l.repelling;
        match f.image_union(r).hausdorff(r) {
            Ok(d) => s.bound(d, 2.0 * w + EPS_GEOM),
            Err(e) => return SuiteOutcome::failed(s.name, &e),
        }
        let pre = f.preimage_union(r);
        let inside = pre.is_subset_of(&r.dilate(2.0 * w), EPS_GEOM);
        s.bound(if inside { 0.0 } else { 1.0 }, 0.0);
    }
    s.detail = "hausdorff(f(R_i), R_i) <= 2w and f^-1(R_i) within R_i dilated by 2w".into();
    s
}

fn suite_interior_disjoint(chain: &ARChain) -> SuiteOutcome {
    let mut s = SuiteOutcome::new("interior_disjoint");
    for l in &chain.levels {
        s.bound(l.attracting.intersect(&l.repelling).measure(), EPS_GEOM);
    }
    for (i, a) in chain.morse_sets.iter().enumerate() {
        for b in &chain.morse_sets[i + 1..] {
            s.bound(a.intersect(b).measure(), EPS_GEOM);
        }
    }
    s.detail = "measure of A_i ∩ R_i and of pairwise Morse set intersections".into();
    s
}

fn suite_nesting(chain: &ARChain) -> SuiteOutcome {
    let mut s = SuiteOutcome::new("nesting");
    let w = chain.box_width;
    for i in 1..=chain.level_count {
        let (a_prev, a) = (chain.attracting(i - 1), chain.attracting(i));
        let (r_prev, r) = (chain.repelling(i - 1), chain.repelling(i));
        let nested = a.is_subset_of(&a_prev, EPS_GEOM) && r_prev.is_subset_of(&r, EPS_GEOM);
        s.bound(if nested { 0.0 } else { 1.0 }, 0.0);
        // strictness: consecutive attracting sets are more than a box apart
        match a_prev.hausdorff(&a) {
            Ok(gap) => s.bound(-gap, -w),
            Err(e) => return SuiteOutcome::failed(s.name, &e),
        }
    }
    s.detail =
        "A_i ⊆ A_{i-1}, R_{i-1} ⊆ R_i; worst is minus the smallest gap between consecutive A_i"
            .into();
    s
}

fn suite_nowhere_dense(chain: &ARChain, refined: &ARChain) -> SuiteOutcome {
    let mut s = SuiteOutcome::new("repelling_nowhere_dense");
    for (a, b) in chain.levels.iter().zip(&refined.levels) {
        let coarse = a.repelling.max_component_len();
        let fine = b.repelling.max_component_len();
        s.bound(fine / coarse, NOWHERE_DENSE_RATIO);
    }
    s.detail = "longest component of R_i on 2n boxes over longest on n boxes".into();
    s
}

fn suite_morse_cover(chain: &ARChain) -> SuiteOutcome {
    let mut s = SuiteOutcome::new("morse_cover");
    let cover = chain
        .morse_sets
        .iter()
        .chain(&chain.connecting_regions)
        .fold(chain.overlap(), |acc, m| acc.union(m));
    let missing = cover.complement().measure();
    s.bound(missing, EPS_GEOM);
    if let Some(l) = chain.levels.first() {
        let c0 = &chain.connecting_regions[0];
        let level1 = l.attracting.union(&l.repelling).union(c0);
        s.bound(level1.complement().measure(), EPS_GEOM);
    }
    s.detail = "uncovered measure of ⋃M ∪ ⋃C ∪ ⋃L, and of A_1 ∪ R_1 ∪ C_0".into();
    s
}

/// `(region, expected α)` pairs: `A_{i-1} \ A_i → R_i`, or all of `X → X`
/// for a transitive map.
fn alpha_regions(chain: &ARChain) -> Vec<(IntervalUnion, IntervalUnion, AlphaClass)> {
    if chain.level_count == 0 {
        if chain.truncated {
            return vec![];
        }
        return vec![(
            IntervalUnion::full(),
            IntervalUnion::full(),
            AlphaClass::WholeSpace,
        )];
    }
    (1..=chain.level_count)
        .map(|i| {
            (
                chain.attracting(i - 1).difference(&chain.attracting(i)),
                chain.repelling(i),
                AlphaClass::Repeller { level: i },
            )
        })
        .collect()
}

fn suite_alpha_cross_validation(
    f: &PiecewiseMap,
    chain: &ARChain,
    cfg: &RunConfig,
) -> SuiteOutcome {
    let mut s = SuiteOutcome::new("alpha_cross_validation");
    let mut rng = suite_rng(cfg.seed, 2);
    let limit = 5.0 * chain.box_width;
    let mut skipped = 0;
    for (region, target, class) in alpha_regions(chain) {
        let mut found = 0;
        for _ in 0..ALPHA_SAMPLES_PER_REGION * 20 {
            if found == ALPHA_SAMPLES_PER_REGION {
                break;
            }
            let Some(x) = sample_point(&region, &mut rng) else {
                break;
            };
            if classify_alpha(chain, x) != class {
                continue;
            }
            found += 1;
            match alpha_limit_estimate(f, x, cfg.alpha_depth, ALPHA_CAP) {
                Ok(est) => match est.hausdorff(&target) {
                    Ok(d) => s.bound(d, limit),
                    Err(_) => skipped += 1,
                },
                Err(_) => skipped += 1,
            }
        }
    }
    s.detail = format!(
        "hausdorff(alpha estimate, R_i) for points of A_(i-1) minus A_i; {skipped} skipped (dead preimage tree)"
    );
    s
}

fn suite_level_sets(f: &PiecewiseMap, ev: &LyapunovEvaluator, cfg: &RunConfig) -> SuiteOutcome {
    let mut s = SuiteOutcome::new("level_sets");
    if ev.is_degenerate() {
        s.detail = "degenerate (transitive): V vanishes identically".into();
        return s;
    }
    let mut rng = suite_rng(cfg.seed, 3);
    let horizon = ev.sup_horizon() + ev.series_horizon();
    let mut g_checked = 0;
    let mut v_checked = 0;
    for (i, m) in ev.morse_sets().iter().enumerate() {
        let level = ev.level_value(i);
        let mut candidates: Vec<f64> = m.boundary_points();
        candidates.extend(m.intervals().iter().flat_map(|iv| [iv.0, iv.1]));
        candidates.extend((0..LEVEL_SAMPLES).filter_map(|_| sample_point(m, &mut rng)));
        for x in candidates {
            let Ok(g) = ev.g(x) else { continue };
            s.bound((g - level).abs(), 1e-9);
            g_checked += 1;
            // V is constant only on points whose orbit stays in M_i
            let stays = f
                .iterate(x, horizon)
                .is_ok_and(|o| o.points.iter().all(|&y| m.contains(y, Membership::Closed)));
            if !stays {
                continue;
            }
            if let Ok(v) = ev.v(f, x) {
                s.bound((v.value - level).abs(), v.error_bound + LEVEL_SLACK);
                v_checked += 1;
            }
        }
    }
    s.detail =
        format!("{g_checked} g checks in M_i, {v_checked} V checks on orbits staying in M_i");
    s
}

fn suite_h_orbit_monotone(
    f: &PiecewiseMap,
    ev: &LyapunovEvaluator,
    cfg: &RunConfig,
) -> SuiteOutcome {
    let mut s = SuiteOutcome::new("h_orbit_monotone");
    let mut rng = suite_rng(cfg.seed, 4);
    let mut skipped = 0;
    for _ in 0..cfg.samples {
        let x: f64 = rng.gen();
        match ev.h_along_orbit(f, x, cfg.monotone_steps) {
            Ok(h) => {
                let worst = h.windows(2).map(|w| w[1] - w[0]).fold(f64::MIN, f64::max);
                s.bound(worst, 0.0);
            }
            Err(_) => skipped += 1,
        }
    }
    s.detail =
        format!("max of h(f^(n+1)(x)) - h(f^n(x)) on shared orbit buffers; {skipped} skipped");
    s
}

fn suite_v_monotone(
    f: &PiecewiseMap,
    ev: &LyapunovEvaluator,
    chain: &ARChain,
    cfg: &RunConfig,
) -> SuiteOutcome {
    let mut s = SuiteOutcome::new("v_monotone");
    let mut rng = suite_rng(cfg.seed, 5);
    let rep = verify_monotone(f, ev, chain, cfg.samples, cfg.monotone_steps, &mut rng);
    s.checked = rep.tested;
    s.passed = rep.passed();
    s.limit = Some(rep.tolerance);
    s.worst = rep.min_decrement.map(|d| -d);
    s.detail = format!(
        "{} tested, {} skipped, {} violations, {} shared-buffer violations; worst is minus the smallest decrement",
        rep.tested, rep.skipped, rep.violations, rep.shared_buffer_violations
    );
    if rep.tested == 0 {
        s.detail.push_str(" (no connecting region)");
    }
    s
}

/// Whether the two classifications share a legitimate answer.
pub fn alpha_classes_agree(a: &AlphaClass, b: &AlphaClass) -> bool {
    let (ra, rb): (Vec<AlphaSet>, Vec<AlphaSet>) = (a.answers(), b.answers());
    ra.iter().any(|x| rb.contains(x))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Readback {
    pub compared: usize,
    pub agreed: usize,
    /// Ambiguous direct classification, undefined `V` or `V` in no band.
    pub excluded: usize,
    /// `V` on the level of `M_i` while `x` itself is off `M_i`: the orbit
    /// enters the box approximation of `M_i` after one or more steps, which
    /// the series over `k >= 1` cannot tell apart from `x ∈ M_i`.
    pub late_entry: usize,
}

pub fn alpha_readback<R: Rng>(
    f: &PiecewiseMap,
    ev: &LyapunovEvaluator,
    chain: &ARChain,
    samples: usize,
    rng: &mut R,
) -> Readback {
    let mut out = Readback::default();
    for _ in 0..samples {
        let x: f64 = rng.gen();
        let direct = classify_alpha(chain, x);
        let Ok(v) = ev.v(f, x) else {
            out.excluded += 1;
            continue;
        };
        let from_v = alpha_from_v(v.value, ev, chain);
        match from_v {
            Ok(c) if !direct.is_ambiguous() && !c.is_ambiguous() => {
                if let Some(level) = on_level(&c, ev) {
                    if ev.g(x).map_or(true, |g| (g - level).abs() > LEVEL_SLACK) {
                        out.late_entry += 1;
                        continue;
                    }
                }
                out.compared += 1;
                if alpha_classes_agree(&direct, &c) {
                    out.agreed += 1;
                }
            }
            _ => out.excluded += 1,
        }
    }
    out
}

/// Level value of `V` behind a band classification, `None` for `C_j`.
fn on_level(c: &AlphaClass, ev: &LyapunovEvaluator) -> Option<f64> {
    match *c {
        AlphaClass::WholeSpace | AlphaClass::Unresolved { .. } => Some(0.0),
        AlphaClass::Repeller { level } => Some(ev.level_value(level - 1)),
        _ => None,
    }
}

fn suite_alpha_readback(
    f: &PiecewiseMap,
    ev: &LyapunovEvaluator,
    chain: &ARChain,
    cfg: &RunConfig,
) -> SuiteOutcome {
    let mut s = SuiteOutcome::new("alpha_readback");
    let mut rng = suite_rng(cfg.seed, 6);
    let r = alpha_readback(f, ev, chain, cfg.samples, &mut rng);
    s.checked = r.compared;
    s.worst = Some((r.compared - r.agreed) as f64);
    s.limit = Some(0.0);
    s.passed = r.compared == r.agreed;
    s.detail = format!(
        "{}/{} agree; {} excluded (ambiguous or undefined), {} on a level band but off its Morse set",
        r.agreed, r.compared, r.excluded, r.late_entry
    );
    s
}

fn suite_pair_agreement(ev: &LyapunovEvaluator, chain: &ARChain) -> SuiteOutcome {
    const NAME: &str = "pair_morse_agreement";
    if chain.level_count != 1 {
        return SuiteOutcome::not_applicable(NAME, "needs exactly one level");
    }
    let mut s = SuiteOutcome::new(NAME);
    let l = &chain.levels[0];
    for i in 0..=1000 {
        let x = i as f64 / 1000.0;
        if let (Ok(a), Ok(b)) = (g_pair(x, &l.attracting, &l.repelling, ev.eps_l()), ev.g(x)) {
            s.bound((a - b).abs(), PAIR_AGREEMENT_TOL);
        }
    }
    s.detail = "|g_pair - g_morse| on a 1001-point grid".into();
    s
}

fn renorm_section(
    f: &PiecewiseMap,
    cfg: &RunConfig,
    chain: Option<&ARChain>,
    errors: &mut Vec<String>,
) -> RenormSection {
    let mut sec = RenormSection {
        status: String::new(),
        max_return: cfg.max_return,
        result: None,
        first_return_violations: None,
        attracting_set: None,
        attracting_set_stabilized: None,
        invariant_set_e: None,
    };
    if !matches!(f.kind(), MapKind::Lorenz { .. }) {
        sec.status = "not a Lorenz map".into();
        return sec;
    }
    let Some(r) = detect_renormalization(f, cfg.max_return) else {
        sec.status = format!("none within bound {}", cfg.max_return);
        return sec;
    };
    sec.status = "renormalizable".into();
    sec.first_return_violations = Some(first_return_violations(f, &r, FIRST_RETURN_SAMPLES));
    let band = chain.map_or(1.0 / cfg.n_boxes as f64, |c| c.box_width);
    let built = attracting_set_from_renorm(f, &r, cfg.sup_horizon).and_then(|(a, stable)| {
        let e = invariant_set_e(f, &r, cfg.e_depth, cfg.n_boxes)?;
        let summary = RenormSummary::new(f, &r, &e, band)?;
        Ok((a, stable, e, summary))
    });
    match built {
        Ok((a, stable, e, summary)) => {
            if !stable {
                errors.push(format!(
                    "renormalization: orbit of the return interval did not stabilize within {} images",
                    cfg.sup_horizon
                ));
            }
            sec.attracting_set = Some(a);
            sec.attracting_set_stabilized = Some(stable);
            sec.invariant_set_e = Some(e);
            sec.result = Some(summary);
        }
        Err(e) => errors.push(format!("renormalization: {e}")),
    }
    sec
}

fn renorm_suites(
    f: &PiecewiseMap,
    chain: Option<&ARChain>,
    sec: &RenormSection,
) -> Vec<SuiteOutcome> {
    const LEVELS: &str = "renorm_level_consistency";
    const RETURN: &str = "renorm_first_return";
    const SETS: &str = "renorm_set_consistency";
    if !matches!(f.kind(), MapKind::Lorenz { .. }) {
        return [LEVELS, RETURN, SETS]
            .into_iter()
            .map(|n| SuiteOutcome::not_applicable(n, "not a Lorenz map"))
            .collect();
    }
    let Some(chain) = chain else {
        let e = Error::Config("decomposition unavailable".into());
        return [LEVELS, RETURN, SETS]
            .into_iter()
            .map(|n| SuiteOutcome::failed(n, &e))
            .collect();
    };
    let mut levels = SuiteOutcome::new(LEVELS);
    let found = sec.result.is_some();
    levels.checked = 1;
    levels.passed = found == (chain.level_count >= 1);
    levels.detail = format!(
        "renormalization {}, chain has {} levels",
        if found { "found" } else { "not found" },
        chain.level_count
    );

    let (Some(violations), Some(a), Some(e)) = (
        sec.first_return_violations,
        &sec.attracting_set,
        &sec.invariant_set_e,
    ) else {
        return vec![
            levels,
            SuiteOutcome::not_applicable(RETURN, &sec.status),
            SuiteOutcome::not_applicable(SETS, &sec.status),
        ];
    };
    let mut ret = SuiteOutcome::new(RETURN);
    ret.bound(violations as f64, 0.0);
    ret.checked = FIRST_RETURN_SAMPLES;
    ret.detail = format!(
        "{violations} of {FIRST_RETURN_SAMPLES} grid points fail the first-return property"
    );

    let mut sets = SuiteOutcome::new(SETS);
    let limit = 4.0 * chain.box_width;
    match chain.levels.first() {
        Some(l) => {
            for (x, y) in [(a, &l.attracting), (e, &l.repelling)] {
                match x.hausdorff(y) {
                    Ok(d) => sets.bound(d, limit),
                    Err(err) => return vec![levels, ret, SuiteOutcome::failed(SETS, &err)],
                }
            }
            sets.detail = "hausdorff(orbit of return interval, A_1) and hausdorff(E_1, R_1)".into();
        }
        None => {
            sets.passed = false;
            sets.detail = "renormalizable map but the chain has no level".into();
        }
    }
    vec![levels, ret, sets]
}

fn lyapunov_section(
    f: &PiecewiseMap,
    ev: &LyapunovEvaluator,
    chain: &ARChain,
    cfg: &RunConfig,
) -> LyapunovSection {
    let rows = sample_rows(f, ev, chain, cfg.samples);
    let vs: Vec<f64> = rows.iter().filter_map(|r| r.v).collect();
    let undefined = rows.len() - vs.len();
    let modulus = if chain.overlap().is_empty() {
        let n = cfg.n_boxes.max(8);
        continuity_modulus(f, ev, &[n / 8, n / 4, n / 2, n])
    } else {
        vec![]
    };
    LyapunovSection {
        status: if ev.is_degenerate() {
            "degenerate (transitive)".into()
        } else {
            "ok".into()
        },
        sup_horizon: ev.sup_horizon(),
        series_horizon: ev.series_horizon(),
        tail_bound: ev.tail_bound(),
        eps_l: ev.eps_l(),
        level_values: (0..=ev.level_count()).map(|i| ev.level_value(i)).collect(),
        v_min: vs.iter().copied().reduce(f64::min),
        v_max: vs.iter().copied().reduce(f64::max),
        v_mean: (!vs.is_empty()).then(|| vs.iter().sum::<f64>() / vs.len() as f64),
        undefined_samples: undefined,
        continuity_modulus: modulus,
    }
}

fn suite_v_bounds(l: &LyapunovSection, ev: &LyapunovEvaluator) -> SuiteOutcome {
    let mut s = SuiteOutcome::new("v_bounds");
    if let (Some(lo), Some(hi)) = (l.v_min, l.v_max) {
        s.bound(-lo, 0.0);
        s.bound(hi, 1.0 + ev.tail_bound());
    }
    s.detail = "0 <= V <= 1 + tail on the sample grid; worst is the larger violation side".into();
    s
}

fn suite_continuity(f: &PiecewiseMap, l: &LyapunovSection, chain: &ARChain) -> SuiteOutcome {
    const NAME: &str = "v_continuity";
    if let MapKind::Lorenz { .. } = f.kind() {
        // V jumps at preimages of c in the interval topology
        return SuiteOutcome::not_applicable(NAME, "map is discontinuous at its critical point");
    }
    if !chain.overlap().is_empty() {
        return SuiteOutcome::not_applicable(NAME, "overlap set is nonempty");
    }
    let mut s = SuiteOutcome::new(NAME);
    if let (Some(first), Some(last)) = (l.continuity_modulus.first(), l.continuity_modulus.last()) {
        s.checked = l.continuity_modulus.len();
        s.worst = Some(last.1);
        s.limit = Some(first.1);
        s.passed = last.1 <= first.1;
    }
    s.detail = "largest neighbour jump of V must not grow as the grid is refined".into();
    s
}

/// Lyapunov CSV for the `sample` mode.
pub fn sample_csv(f: &PiecewiseMap, cfg: &RunConfig) -> Result<String> {
    let chain = crate::decomposition::leveled_decomposition(f, cfg.max_depth, cfg.n_boxes)?;
    let ev = LyapunovEvaluator::from_chain(&chain, cfg.sup_horizon, cfg.series_horizon)?;
    rows_to_csv(&sample_rows(f, &ev, &chain, cfg.samples))
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

/// Writes every `(path, contents)` to a temporary sibling first and renames
/// only when all writes succeeded.
pub fn write_atomic(files: &[(&Path, &str)]) -> Result<()> {
    let mut written = Vec::new();
    for (path, contents) in files {
        let tmp = temp_path(path);
        if let Err(e) = fs::write(&tmp, contents) {
            for t in &written {
                let _ = fs::remove_file(t);
            }
            return Err(Error::Io(format!("{}: {e}", path.display())));
        }
        written.push(tmp);
    }
    for ((path, _), tmp) in files.iter().zip(&written) {
        fs::rename(tmp, path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

/// Writes the report, the CSV and the graph dump named in `cfg`.
pub fn emit(report: &Report, f: &PiecewiseMap, cfg: &RunConfig) -> Result<()> {
    let json = report.to_json();
    let csv = match &cfg.csv {
        Some(_) => Some(sample_csv(f, cfg)?),
        None => None,
    };
    let dump = match &cfg.graph_dump {
        Some(_) => Some(TransitionGraph::build(f, cfg.n_boxes)?.dump()),
        None => None,
    };
    let mut files: Vec<(&Path, &str)> = Vec::new();
    if let Some(p) = &cfg.report {
        files.push((p, &json));
    }
    if let (Some(p), Some(c)) = (&cfg.csv, &csv) {
        files.push((p, c));
    }
    if let (Some(p), Some(d)) = (&cfg.graph_dump, &dump) {
        files.push((p, d));
    }
    write_atomic(&files)
}
