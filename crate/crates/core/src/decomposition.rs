//! Leveled attracting/repelling decomposition and alpha-limit classification.
//!
//! Everything is computed on a pair of covers: the working cover with `n`
//! boxes and its refinement with `2n` boxes. A recurrent component of the
//! working graph is kept only if its refinement still contains recurrent
//! boxes; outer approximations produce short-lived self-loops next to
//! expanding fixed points that disappear under refinement.
//!
//! With the kept components `K`, ordered by reachability:
//!
//! * the components no other component reaches are the sources;
//! * the maximal proper attracting set is the forward closure of the other
//!   components inside the ambient set;
//! * the repelling set of level `i` is the backward closure, inside the
//!   complement of `A_i`, of all sources found at levels `1..=i`.
//!
//! Attracting sets are outer approximations. Repelling sets exclude `A_i`
//! by construction, so near a true overlap `A_i ∩ R_i` they err inward.

use serde::Serialize;

use crate::box_graph::{BoxCover, BoxSet, Direction, TransitionGraph};
use crate::error::{Error, Result};
use crate::interval_set::{IntervalUnion, Membership, EPS_GEOM};
use crate::map_model::PiecewiseMap;

/// Default cap on the number of levels.
pub const DEFAULT_MAX_DEPTH: usize = 8;

/// Allowed movement of an attracting set under one cover doubling, in
/// working box widths.
const REFINEMENT_LIMIT_BOXES: f64 = 4.0;

/// Working graph plus its one-step refinement.
#[derive(Debug, Clone)]
pub struct GraphPair {
    pub coarse: TransitionGraph,
    pub fine: TransitionGraph,
}

impl GraphPair {
    pub fn build(f: &PiecewiseMap, n_boxes: usize) -> Result<Self> {
        Ok(Self {
            coarse: TransitionGraph::build(f, n_boxes)?,
            fine: TransitionGraph::build(f, n_boxes * 2)?,
        })
    }

    pub fn cover(&self) -> &BoxCover {
        self.coarse.cover()
    }

    /// Recurrent components of the working graph restricted to `ambient`
    /// that still carry recurrence after one refinement.
    pub fn persistent_components(&self, ambient: &BoxSet) -> Vec<BoxSet> {
        let fine_rec = self
            .fine
            .recurrent_components_within(&ambient.refine())
            .into_iter()
            .fold(BoxSet::empty(self.fine.len()), |acc, c| acc.union(&c));
        self.coarse
            .recurrent_components_within(ambient)
            .into_iter()
            .filter(|c| !c.refine().intersect(&fine_rec).is_empty())
            .collect()
    }
}

/// Attracting candidate of one level, on the working cover.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractingCandidate {
    pub attracting: BoxSet,
    /// Outer approximation of the basin: everything with a path into `attracting`.
    pub basin: BoxSet,
    /// Source components of the ambient set, excluded from `attracting`.
    pub sources: BoxSet,
}

/// Largest proper attracting set inside the invariant set `ambient`, or
/// `None` when the map restricted to `ambient` is transitive at graph level
/// (at most one persistent recurrent component).
pub fn maximal_proper_attracting_set(
    graphs: &GraphPair,
    ambient: &BoxSet,
) -> Result<Option<AttractingCandidate>> {
    let g = &graphs.coarse;
    let comps = graphs.persistent_components(ambient);
    if comps.len() <= 1 {
        return Ok(None);
    }
    let reach: Vec<BoxSet> = comps
        .iter()
        .map(|c| g.reach_within(c, Direction::Forward, ambient))
        .collect();
    let is_source =
        |i: usize| !(0..comps.len()).any(|j| j != i && !reach[j].intersect(&comps[i]).is_empty());
    let n = g.len();
    let mut sources = BoxSet::empty(n);
    let mut core = BoxSet::empty(n);
    for (i, c) in comps.iter().enumerate() {
        if is_source(i) {
            sources = sources.union(c);
        } else {
            core = core.union(c);
        }
    }
    if core.is_empty() {
        return Err(Error::Inconsistent {
            level: 0,
            reason: "no recurrent component is reachable from another: more than one attractor"
                .into(),
        });
    }
    let attracting = g.reach_within(&core, Direction::Forward, ambient);
    let basin = g.reach(&attracting, Direction::Backward);
    Ok(Some(AttractingCandidate {
        attracting,
        basin,
        sources,
    }))
}

/// Boxes outside `attracting` whose paths can stay outside it forever by
/// reaching one of the `sources` components.
pub fn repelling_set(g: &TransitionGraph, attracting: &BoxSet, sources: &BoxSet) -> Result<BoxSet> {
    let outside = attracting.complement();
    let r = g.reach_within(sources, Direction::Backward, &outside);
    if r.is_empty() {
        return Err(Error::Inconsistent {
            level: 0,
            reason: "empty repelling set for a proper attracting set".into(),
        });
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
struct BoxLevel {
    attracting: BoxSet,
    repelling: BoxSet,
    basin: BoxSet,
}

#[derive(Debug, Clone, PartialEq)]
struct BoxChain {
    levels: Vec<BoxLevel>,
    truncated: bool,
}

fn box_chain(graphs: &GraphPair, max_depth: usize) -> Result<BoxChain> {
    let n = graphs.coarse.len();
    let mut ambient = BoxSet::full(n);
    let mut sources = BoxSet::empty(n);
    let mut levels = Vec::new();
    loop {
        let level = levels.len() + 1;
        let Some(cand) =
            maximal_proper_attracting_set(graphs, &ambient).map_err(|e| at_level(e, level))?
        else {
            return Ok(BoxChain {
                levels,
                truncated: false,
            });
        };
        if levels.len() == max_depth {
            return Ok(BoxChain {
                levels,
                truncated: true,
            });
        }
        sources = sources.union(&cand.sources);
        let repelling = repelling_set(&graphs.coarse, &cand.attracting, &sources)
            .map_err(|e| at_level(e, level))?;
        ambient = cand.attracting.clone();
        levels.push(BoxLevel {
            attracting: cand.attracting,
            repelling,
            basin: cand.basin,
        });
    }
}

fn at_level(e: Error, level: usize) -> Error {
    match e {
        Error::Inconsistent { reason, .. } => Error::Inconsistent { level, reason },
        other => other,
    }
}

/// One pair `(A_i, R_i)` of the decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ARLevel {
    pub index: usize,
    #[serde(rename = "A")]
    pub attracting: IntervalUnion,
    #[serde(rename = "R")]
    pub repelling: IntervalUnion,
    pub basin: IntervalUnion,
    /// `A_i ∩ R_i`.
    #[serde(rename = "L")]
    pub overlap: IntervalUnion,
    #[serde(skip)]
    pub attracting_boxes: BoxSet,
    #[serde(skip)]
    pub repelling_boxes: BoxSet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainDiagnostics {
    /// Hausdorff distance between `A_i` on the working cover and on its
    /// refinement, per level.
    pub refinement_gaps: Vec<f64>,
    /// Hausdorff distance between consecutive attracting sets `A_{i-1}`, `A_i`.
    pub attracting_gaps: Vec<f64>,
    pub attracting_error_side: &'static str,
    pub repelling_error_side: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ARChain {
    pub n_boxes: usize,
    pub box_width: f64,
    pub level_count: usize,
    pub truncated: bool,
    pub transitive: bool,
    pub attractor: IntervalUnion,
    pub levels: Vec<ARLevel>,
    /// `M_0 … M_m` with `M_i = A_i ∩ R_{i+1}`, `A_0 = X`, `R_{m+1} = X`.
    pub morse_sets: Vec<IntervalUnion>,
    /// `C_j = A_j \ (A_{j+1} ∪ R_{j+1})` for `j < m`.
    pub connecting_regions: Vec<IntervalUnion>,
    pub diagnostics: ChainDiagnostics,
    #[serde(skip)]
    pub morse_boxes: Vec<BoxSet>,
}

impl ARChain {
    pub fn cover(&self) -> BoxCover {
        BoxCover::new(self.n_boxes).expect("chain cover is valid")
    }

    /// `A_i` with `A_0 = X`.
    pub fn attracting(&self, i: usize) -> IntervalUnion {
        if i == 0 {
            IntervalUnion::full()
        } else {
            self.levels[i - 1].attracting.clone()
        }
    }

    /// `R_i` with `R_0 = ∅` and `R_{m+1} = X`.
    pub fn repelling(&self, i: usize) -> IntervalUnion {
        match i {
            0 => IntervalUnion::empty(),
            i if i > self.level_count => IntervalUnion::full(),
            i => self.levels[i - 1].repelling.clone(),
        }
    }

    /// `L = ⋃ L_i`.
    pub fn overlap(&self) -> IntervalUnion {
        self.levels
            .iter()
            .fold(IntervalUnion::empty(), |acc, l| acc.union(&l.overlap))
    }

    fn from_boxes(chain: &BoxChain, cover: BoxCover, diagnostics: ChainDiagnostics) -> Self {
        let n = cover.len();
        let m = chain.levels.len();
        let levels: Vec<ARLevel> = chain
            .levels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let attracting = l.attracting.to_union(&cover);
                let repelling = l.repelling.to_union(&cover);
                ARLevel {
                    index: i + 1,
                    overlap: attracting.intersect(&repelling),
                    attracting,
                    repelling,
                    basin: l.basin.to_union(&cover),
                    attracting_boxes: l.attracting.clone(),
                    repelling_boxes: l.repelling.clone(),
                }
            })
            .collect();
        let a = |i: usize| {
            if i == 0 {
                BoxSet::full(n)
            } else {
                chain.levels[i - 1].attracting.clone()
            }
        };
        let r = |i: usize| {
            if i > m {
                BoxSet::full(n)
            } else {
                chain.levels[i - 1].repelling.clone()
            }
        };
        let morse_boxes: Vec<BoxSet> = (0..=m).map(|i| a(i).intersect(&r(i + 1))).collect();
        let connecting_regions = (0..m)
            .map(|j| a(j).difference(&a(j + 1).union(&r(j + 1))).to_union(&cover))
            .collect();
        Self {
            n_boxes: n,
            box_width: cover.width(),
            level_count: m,
            truncated: chain.truncated,
            transitive: m == 0 && !chain.truncated,
            attractor: a(m).to_union(&cover),
            morse_sets: morse_boxes.iter().map(|b| b.to_union(&cover)).collect(),
            morse_boxes,
            connecting_regions,
            levels,
            diagnostics,
        }
    }
}

/// Repeats the maximal proper attracting set extraction until the restricted
/// map is transitive or `max_depth` levels exist. The chain is computed on
/// `n_boxes` and on `2 * n_boxes`; the two must agree level by level.
pub fn leveled_decomposition(
    f: &PiecewiseMap,
    max_depth: usize,
    n_boxes: usize,
) -> Result<ARChain> {
    leveled_decomposition_pair(f, max_depth, n_boxes).map(|(chain, _)| chain)
}

/// The chain on `n_boxes` together with the chain on `2 * n_boxes` it was
/// checked against.
pub fn leveled_decomposition_pair(
    f: &PiecewiseMap,
    max_depth: usize,
    n_boxes: usize,
) -> Result<(ARChain, ARChain)> {
    let working = GraphPair::build(f, n_boxes)?;
    let refined = GraphPair {
        coarse: working.fine.clone(),
        fine: TransitionGraph::build(f, n_boxes * 4)?,
    };
    leveled_decomposition_on(&working, &refined, max_depth)
}

/// Same as [`leveled_decomposition_pair`] with prebuilt graphs;
/// `refined.coarse` must be `working.fine`.
pub fn leveled_decomposition_on(
    working: &GraphPair,
    refined: &GraphPair,
    max_depth: usize,
) -> Result<(ARChain, ARChain)> {
    let cover = *working.cover();
    let fine_cover = *refined.cover();
    let chain = box_chain(working, max_depth)?;
    let check = box_chain(refined, max_depth)?;
    let limit = REFINEMENT_LIMIT_BOXES * cover.width();

    let mut refinement_gaps = Vec::new();
    for (i, (a, b)) in chain.levels.iter().zip(&check.levels).enumerate() {
        let gap = a
            .attracting
            .to_union(&cover)
            .hausdorff(&b.attracting.to_union(&fine_cover))?;
        if gap > limit {
            return Err(Error::ResolutionTooCoarse {
                level: i + 1,
                gap,
                limit,
            });
        }
        refinement_gaps.push(gap);
    }
    if chain.levels.len() != check.levels.len() {
        let level = chain.levels.len().min(check.levels.len()) + 1;
        // a cap that binds at both resolutions is not a disagreement
        if !(chain.truncated && check.truncated) {
            return Err(Error::ResolutionTooCoarse {
                level,
                gap: f64::INFINITY,
                limit,
            });
        }
    }

    let mut attracting_gaps = Vec::new();
    let mut prev = IntervalUnion::full();
    for l in &chain.levels {
        let a = l.attracting.to_union(&cover);
        attracting_gaps.push(prev.hausdorff(&a)?);
        prev = a;
    }
    let diagnostics = ChainDiagnostics {
        refinement_gaps,
        attracting_gaps,
        attracting_error_side: "outer",
        repelling_error_side: "inner near A_i, outer elsewhere",
    };
    let refined_chain = ARChain::from_boxes(&check, fine_cover, diagnostics.clone());
    Ok((
        ARChain::from_boxes(&chain, cover, diagnostics),
        refined_chain,
    ))
}

/// Limit set answer carried by an [`AlphaClass`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AlphaSet {
    Whole,
    Repelling(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaClass {
    /// `α(x) = X`.
    WholeSpace,
    /// `α(x) = R_level`.
    Repeller { level: usize },
    /// `x ∈ L_level` or within one box of the boundary of `A_level`: both
    /// `R_level` and `R_{level+1}` are legitimate answers.
    Overlap { level: usize, level_count: usize },
    /// Connecting orbit `C_j`; `α(x) = R_{j+1}`.
    Connecting { j: usize },
    /// Inside the last attracting set of a depth-capped chain.
    Unresolved { depth: usize },
}

impl AlphaClass {
    /// Every legitimate value of `α(x)` for this class.
    pub fn answers(&self) -> Vec<AlphaSet> {
        match *self {
            AlphaClass::WholeSpace => vec![AlphaSet::Whole],
            AlphaClass::Repeller { level } => vec![AlphaSet::Repelling(level)],
            AlphaClass::Overlap { level, level_count } => {
                let next = if level >= level_count {
                    AlphaSet::Whole
                } else {
                    AlphaSet::Repelling(level + 1)
                };
                vec![AlphaSet::Repelling(level), next]
            }
            AlphaClass::Connecting { j } => vec![AlphaSet::Repelling(j + 1)],
            AlphaClass::Unresolved { .. } => vec![],
        }
    }

    pub fn is_ambiguous(&self) -> bool {
        matches!(
            self,
            AlphaClass::Overlap { .. } | AlphaClass::Unresolved { .. }
        )
    }

    pub fn label(&self) -> String {
        match *self {
            AlphaClass::WholeSpace => "X".into(),
            AlphaClass::Repeller { level } => format!("R{level}"),
            AlphaClass::Overlap { level, .. } => format!("overlap({level})"),
            AlphaClass::Connecting { j } => format!("R{}", j + 1),
            AlphaClass::Unresolved { depth } => format!("unresolved({depth})"),
        }
    }
}

/// `x ∈ A_{i-1} \ A_i` gives `R_i`; `x` in the final attracting set gives
/// `X`. Points of `L_i`, or within one box of the relative boundary of `A_i`,
/// are reported as overlaps.
pub fn classify_alpha(chain: &ARChain, x: f64) -> AlphaClass {
    let w = chain.box_width;
    let m = chain.level_count;
    for (i, level) in chain.levels.iter().enumerate() {
        let i = i + 1;
        if !level.overlap.is_empty() && level.overlap.contains(x, Membership::Closed) {
            return AlphaClass::Overlap {
                level: i,
                level_count: m,
            };
        }
        if level.attracting.distance_to_boundary(x) < w {
            return AlphaClass::Overlap {
                level: i,
                level_count: m,
            };
        }
        if !level.attracting.contains(x, Membership::Closed) {
            return AlphaClass::Repeller { level: i };
        }
    }
    if chain.truncated {
        AlphaClass::Unresolved { depth: m }
    } else {
        AlphaClass::WholeSpace
    }
}

/// Empirical `α(x)`: preimage generations up to `depth`, at most `cap`
/// points per generation (kept evenly spread), returning the points of the
/// last quarter of the generations.
pub fn alpha_limit_estimate(
    f: &PiecewiseMap,
    x: f64,
    depth: usize,
    cap: usize,
) -> Result<IntervalUnion> {
    if depth == 0 {
        return Err(Error::Config("alpha estimate needs depth >= 1".into()));
    }
    let cap = cap.max(2);
    let keep_from = depth - depth.div_ceil(4) + 1;
    let mut generation = vec![x];
    let mut kept: Vec<(f64, f64)> = Vec::new();
    for k in 1..=depth {
        let mut next: Vec<f64> = generation.iter().flat_map(|&y| f.preimages(y)).collect();
        if next.is_empty() {
            return Err(Error::PreimageTreeDied {
                last_nonempty: k - 1,
            });
        }
        next.sort_by(f64::total_cmp);
        next.dedup_by(|a, b| (*a - *b).abs() <= EPS_GEOM);
        if next.len() > cap {
            let last = next.len() - 1;
            next = (0..cap)
                .map(|i| next[(i * last + (cap - 1) / 2) / (cap - 1)])
                .collect();
        }
        if k >= keep_from {
            kept.extend(next.iter().map(|&p| (p, p)));
        }
        generation = next;
    }
    IntervalUnion::normalize(&kept)
}
