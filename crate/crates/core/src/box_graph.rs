//! Combinatorial outer approximation of a map on a uniform dyadic box cover.
//!
//! Box `k` of an `n`-box cover is `[k/n, (k+1)/n]`. The transition graph has
//! an edge `k → j` whenever box `j` meets the exact image of box `k` in more
//! than a shared endpoint, so every true transition `x ↦ f(x)` is represented.

use std::collections::VecDeque;
use std::fmt::Write as _;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use rand::Rng;

use crate::error::{Error, Result};
use crate::interval_set::IntervalUnion;
use crate::map_model::{PiecewiseMap, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxCover {
    n: usize,
}

impl BoxCover {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "box count must be a power of two >= 2, got {n}"
            )));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn width(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn interval(&self, k: usize) -> (f64, f64) {
        let n = self.n as f64;
        (k as f64 / n, (k + 1) as f64 / n)
    }

    /// Box whose half-open cell `[k/n, (k+1)/n)` holds `x`; `1` goes to the last box.
    pub fn box_of(&self, x: f64) -> usize {
        ((x * self.n as f64).floor() as usize).min(self.n - 1)
    }

    pub fn refine(&self) -> Self {
        Self { n: self.n * 2 }
    }

    /// Boxes meeting `[lo, hi]` in more than an endpoint (the containing box
    /// for a degenerate interval).
    fn boxes_meeting(&self, lo: f64, hi: f64) -> std::ops::RangeInclusive<usize> {
        let n = self.n as f64;
        let first = ((lo * n).floor().max(0.0) as usize).min(self.n - 1);
        let last = if hi > lo {
            (((hi * n).ceil() as usize).saturating_sub(1)).min(self.n - 1)
        } else {
            first
        };
        first..=last.max(first)
    }
}

/// Membership flags over the boxes of a cover.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoxSet {
    members: Vec<bool>,
}

impl BoxSet {
    pub fn empty(n: usize) -> Self {
        Self {
            members: vec![false; n],
        }
    }

    pub fn full(n: usize) -> Self {
        Self {
            members: vec![true; n],
        }
    }

    pub fn from_indices(n: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(n);
        for k in idx {
            s.members[k] = true;
        }
        s
    }

    /// Every box that meets `s` (closed intersection).
    pub fn outer_from_union(cover: &BoxCover, s: &IntervalUnion) -> Self {
        let mut out = Self::empty(cover.len());
        let n = cover.len() as f64;
        for &(lo, hi) in s.intervals() {
            let first = ((lo * n).ceil() as usize)
                .saturating_sub(1)
                .min(cover.len() - 1);
            let last = ((hi * n).floor() as usize).min(cover.len() - 1);
            for k in first..=last.max(first) {
                let (a, b) = cover.interval(k);
                if a <= hi && b >= lo {
                    out.members[k] = true;
                }
            }
        }
        out
    }

    pub fn universe(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.members[k]
    }

    pub fn insert(&mut self, k: usize) {
        self.members[k] = true;
    }

    pub fn remove(&mut self, k: usize) {
        self.members[k] = false;
    }

    pub fn count(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&m| m)
    }

    pub fn is_full(&self) -> bool {
        self.members.iter().all(|&m| m)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter_map(|(k, &m)| m.then_some(k))
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a || b)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> Self {
        Self {
            members: self.members.iter().map(|m| !m).collect(),
        }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.members
            .iter()
            .zip(&other.members)
            .all(|(&a, &b)| !a || b)
    }

    fn zip(&self, other: &Self, op: impl Fn(bool, bool) -> bool) -> Self {
        assert_eq!(
            self.universe(),
            other.universe(),
            "box sets on different covers"
        );
        Self {
            members: self
                .members
                .iter()
                .zip(&other.members)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        }
    }

    /// Adds the `k` nearest boxes on each side of every member.
    pub fn dilate(&self, k: usize) -> Self {
        let n = self.universe();
        let mut out = self.clone();
        for i in self.iter() {
            for j in i.saturating_sub(k)..=(i + k).min(n - 1) {
                out.members[j] = true;
            }
        }
        out
    }

    /// Same set on the cover with twice as many boxes.
    pub fn refine(&self) -> Self {
        Self {
            members: self.members.iter().flat_map(|&m| [m, m]).collect(),
        }
    }

    pub fn to_union(&self, cover: &BoxCover) -> IntervalUnion {
        let raw: Vec<(f64, f64)> = self.iter().map(|k| cover.interval(k)).collect();
        IntervalUnion::normalize(&raw).expect("box endpoints lie in [0, 1]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone)]
pub struct TransitionGraph {
    cover: BoxCover,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Isolation {
    pub isolating: bool,
    /// A box of `Inv N` that is not in the combinatorial interior of `N`.
    pub witness: Option<usize>,
}

impl TransitionGraph {
    /// Edges from exact per-branch interval images of every box.
    pub fn build(f: &PiecewiseMap, n_boxes: usize) -> Result<Self> {
        let cover = BoxCover::new(n_boxes)?;
        let succ: Vec<Vec<usize>> = (0..n_boxes)
            .map(|k| {
                let (lo, hi) = cover.interval(k);
                let img = f.image_union(&IntervalUnion::interval(lo, hi).expect("box"));
                let mut out: Vec<usize> = img
                    .intervals()
                    .iter()
                    .flat_map(|&(a, b)| cover.boxes_meeting(a, b))
                    .collect();
                out.sort_unstable();
                out.dedup();
                out
            })
            .collect();
        Ok(Self::from_edges(cover, succ))
    }

    /// Graph with explicit successor lists; used for synthetic graphs.
    pub fn from_edges(cover: BoxCover, succ: Vec<Vec<usize>>) -> Self {
        let n = cover.len();
        assert_eq!(succ.len(), n);
        let mut pred = vec![Vec::new(); n];
        for (k, out) in succ.iter().enumerate() {
            for &j in out {
                pred[j].push(k);
            }
        }
        Self { cover, succ, pred }
    }

    pub fn cover(&self) -> &BoxCover {
        &self.cover
    }

    pub fn len(&self) -> usize {
        self.cover.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn successors(&self, k: usize) -> &[usize] {
        &self.succ[k]
    }

    pub fn predecessors(&self, k: usize) -> &[usize] {
        &self.pred[k]
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.succ[from].binary_search(&to).is_ok() || self.succ[from].contains(&to)
    }

    fn neighbors(&self, k: usize, dir: Direction) -> &[usize] {
        match dir {
            Direction::Forward => &self.succ[k],
            Direction::Backward => &self.pred[k],
        }
    }

    /// Boxes of `n` admitting a path of `m` steps forward and `m` steps
    /// backward inside `n`.
    pub fn inv_m(&self, n: &BoxSet, m: usize) -> BoxSet {
        self.path_core(n, Direction::Forward, Some(m))
            .intersect(&self.path_core(n, Direction::Backward, Some(m)))
    }

    /// Boxes of `n` lying on a bi-infinite path inside `n`.
    pub fn inv(&self, n: &BoxSet) -> BoxSet {
        self.path_core(n, Direction::Forward, None)
            .intersect(&self.path_core(n, Direction::Backward, None))
    }

    /// Boxes of `n` with a path of `steps` edges (unbounded if `None`) in the
    /// given direction that stays in `n`.
    fn path_core(&self, n: &BoxSet, dir: Direction, steps: Option<usize>) -> BoxSet {
        let mut cur = n.clone();
        let mut round = 0;
        loop {
            if steps.is_some_and(|m| round >= m) {
                return cur;
            }
            let next = BoxSet {
                members: (0..self.len())
                    .map(|k| {
                        cur.contains(k) && self.neighbors(k, dir).iter().any(|&j| cur.contains(j))
                    })
                    .collect(),
            };
            if next == cur {
                return cur;
            }
            cur = next;
            round += 1;
        }
    }

    /// Combinatorial isolation test: every box of `Inv N` must have both
    /// neighbouring boxes in `N`, where the ends of `[0, 1]` count as members.
    /// The whole cover is never isolating: no neighbourhood strictly contains it.
    pub fn is_isolating(&self, n: &BoxSet) -> Isolation {
        let inv = self.inv(n);
        let last = self.len() - 1;
        if n.is_full() {
            let witness = inv
                .iter()
                .find(|&k| k == 0 || k == last)
                .or_else(|| inv.iter().next());
            return Isolation {
                isolating: false,
                witness,
            };
        }
        let witness = inv.iter().find(|&k| {
            let left = k == 0 || n.contains(k - 1);
            let right = k == last || n.contains(k + 1);
            !(left && right)
        });
        Isolation {
            isolating: witness.is_none(),
            witness,
        }
    }

    /// Transitive closure of `s`, including `s`.
    pub fn reach(&self, s: &BoxSet, dir: Direction) -> BoxSet {
        self.reach_within(s, dir, &BoxSet::full(self.len()))
    }

    /// Closure of `s ∩ within` along edges that stay in `within`.
    pub fn reach_within(&self, s: &BoxSet, dir: Direction, within: &BoxSet) -> BoxSet {
        let mut seen = s.intersect(within);
        let mut queue: VecDeque<usize> = seen.iter().collect();
        while let Some(k) = queue.pop_front() {
            for &j in self.neighbors(k, dir) {
                if within.contains(j) && !seen.contains(j) {
                    seen.insert(j);
                    queue.push_back(j);
                }
            }
        }
        seen
    }

    /// Nontrivial strongly connected components (more than one box, or a
    /// self-loop), sources of the condensation first.
    pub fn recurrent_components(&self) -> Vec<BoxSet> {
        self.recurrent_components_within(&BoxSet::full(self.len()))
    }

    pub fn recurrent_components_within(&self, ambient: &BoxSet) -> Vec<BoxSet> {
        let mut g = DiGraph::<usize, ()>::new();
        let mut node = vec![None; self.len()];
        for k in ambient.iter() {
            node[k] = Some(g.add_node(k));
        }
        for k in ambient.iter() {
            for &j in &self.succ[k] {
                if let (Some(a), Some(b)) = (node[k], node[j]) {
                    g.add_edge(a, b, ());
                }
            }
        }
        let mut sccs = tarjan_scc(&g);
        // tarjan yields sinks first
        sccs.reverse();
        sccs.into_iter()
            .filter(|c| c.len() > 1 || self.has_edge(g[c[0]], g[c[0]]))
            .map(|c: Vec<NodeIndex>| BoxSet::from_indices(self.len(), c.into_iter().map(|i| g[i])))
            .collect()
    }

    /// Image of `s` under the edge relation.
    pub fn image(&self, s: &BoxSet) -> BoxSet {
        BoxSet::from_indices(
            self.len(),
            s.iter().flat_map(|k| self.succ[k].iter().copied()),
        )
    }

    /// Counts sampled transitions `x ↦ f(x)` missing from the graph.
    pub fn outer_approximation_violations<R: Rng>(
        &self,
        f: &PiecewiseMap,
        samples: usize,
        rng: &mut R,
    ) -> usize {
        let n = self.len() as f64;
        (0..samples)
            .filter(|_| {
                let x: f64 = rng.gen();
                let Ok(y) = f.eval(x, Side::Auto) else {
                    return false;
                };
                let k = self.cover.box_of(x);
                let j = self.cover.box_of(y);
                // a point on a box boundary belongs to both boxes
                let on_edge = (y * n).fract() == 0.0 && y > 0.0;
                !(self.has_edge(k, j) || on_edge && self.has_edge(k, j - 1))
            })
            .count()
    }

    /// Edge list, one `k → j` pair per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, js) in self.succ.iter().enumerate() {
            for j in js {
                let _ = writeln!(out, "{k} → {j}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_box(edges: &[(usize, usize)]) -> TransitionGraph {
        let mut succ = vec![Vec::new(); 2];
        for &(a, b) in edges {
            succ[a].push(b);
        }
        TransitionGraph::from_edges(BoxCover::new(2).unwrap(), succ)
    }

    #[test]
    fn cover_rejects_bad_sizes() {
        assert!(BoxCover::new(100).is_err());
        assert!(BoxCover::new(1).is_err());
        assert!(BoxCover::new(64).is_ok());
    }

    #[test]
    fn build_examples() {
        let g = TransitionGraph::build(&canonical::doubling(), 4).unwrap();
        assert_eq!(g.successors(0), &[0, 1]);
        let g = TransitionGraph::build(&canonical::square(), 4).unwrap();
        assert_eq!(g.successors(0), &[0]);
        // image of [0.75, 1] is [0.5625, 1]
        assert_eq!(g.successors(3), &[2, 3]);
    }

    #[test]
    fn outer_approximation_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for f in [
            canonical::square(),
            canonical::doubling(),
            canonical::tent(),
            canonical::logistic(3.8),
            canonical::renormalizable_lorenz(),
            canonical::sqrt2_lorenz(),
        ] {
            let g = TransitionGraph::build(&f, 128).unwrap();
            assert_eq!(g.outer_approximation_violations(&f, 10_000, &mut rng), 0);
            for k in 0..g.len() {
                assert!(!g.successors(k).is_empty());
            }
        }
    }

    #[test]
    fn inv_m_examples() {
        let cycle = two_box(&[(0, 1), (1, 0)]);
        let both = BoxSet::full(2);
        assert_eq!(cycle.inv_m(&both, 5), both);
        assert_eq!(cycle.inv(&both), both);
        let chain = two_box(&[(0, 1)]);
        assert!(chain.inv_m(&both, 1).is_empty());
        assert!(chain.inv(&both).is_empty());
        assert_eq!(chain.inv_m(&both, 0), both);
        assert!(cycle.inv_m(&BoxSet::empty(2), 3).is_empty());
    }

    #[test]
    fn isolation_examples() {
        let f = canonical::square();
        let g = TransitionGraph::build(&f, 256).unwrap();
        let all = BoxSet::full(256);
        let iso = g.is_isolating(&all);
        assert!(!iso.isolating);
        assert!(iso.witness.is_some());

        // [0, 0.25 + δ] isolates the fixed point 0
        let cover = g.cover();
        let n = BoxSet::outer_from_union(cover, &IntervalUnion::interval(0.0, 0.26).unwrap());
        let iso = g.is_isolating(&n);
        assert!(iso.isolating, "{iso:?}");
        assert_eq!(g.inv(&n), BoxSet::from_indices(256, [0]));

        assert!(g.is_isolating(&BoxSet::empty(256)).isolating);
    }

    #[test]
    fn reach_examples() {
        let g = TransitionGraph::build(&canonical::square(), 64).unwrap();
        let sink = BoxSet::from_indices(64, [0]);
        assert_eq!(g.reach(&sink, Direction::Forward), sink);
        assert!(g.reach(&BoxSet::empty(64), Direction::Forward).is_empty());
        let d = TransitionGraph::build(&canonical::doubling(), 64).unwrap();
        let s = BoxSet::from_indices(64, [17]);
        assert!(d.reach(&s, Direction::Backward).is_full());
    }

    #[test]
    fn recurrent_component_examples() {
        let d = TransitionGraph::build(&canonical::doubling(), 64).unwrap();
        let comps = d.recurrent_components();
        assert_eq!(comps.len(), 1);
        assert!(comps[0].is_full());

        let chain = two_box(&[(0, 1)]);
        assert!(chain.recurrent_components().is_empty());

        // x²: components surviving refinement contain 0 and 1
        let coarse = TransitionGraph::build(&canonical::square(), 64).unwrap();
        let fine = TransitionGraph::build(&canonical::square(), 256).unwrap();
        let fine_rec = fine
            .recurrent_components()
            .into_iter()
            .fold(BoxSet::empty(256), |a, c| a.union(&c));
        let surviving: Vec<BoxSet> = coarse
            .recurrent_components()
            .into_iter()
            .filter(|c| c.refine().refine().intersect(&fine_rec).count() > 0)
            .collect();
        assert_eq!(surviving.len(), 2);
        // sources first: the repelling end comes before the attracting end
        assert!(surviving[0].contains(63));
        assert!(surviving[1].contains(0));
    }

    #[test]
    fn inv_is_invariant_and_antitone() {
        let f = canonical::logistic(3.7);
        let g = TransitionGraph::build(&f, 128).unwrap();
        let n = BoxSet::outer_from_union(g.cover(), &IntervalUnion::interval(0.1, 0.95).unwrap());
        let inv = g.inv(&n);
        assert_eq!(g.inv_m(&inv, 1), inv);
        // every box of Inv N has a predecessor and a successor in Inv N
        assert_eq!(g.image(&inv).intersect(&inv), inv);
        assert!(inv
            .iter()
            .all(|k| g.successors(k).iter().any(|&j| inv.contains(j))));
        let mut prev = n.clone();
        for m in 1..40 {
            let cur = g.inv_m(&n, m);
            assert!(cur.is_subset(&prev));
            prev = cur;
        }
        assert_eq!(prev, inv);
    }

    #[test]
    fn refinement_shrinks_inv() {
        let f = canonical::logistic(3.7);
        let s = IntervalUnion::interval(0.2, 0.9).unwrap();
        let mut prev: Option<IntervalUnion> = None;
        for n in [32, 64, 128, 256] {
            let g = TransitionGraph::build(&f, n).unwrap();
            let set = BoxSet::outer_from_union(g.cover(), &s);
            let inv = g.inv(&set).to_union(g.cover());
            if let Some(p) = &prev {
                assert!(inv.is_subset_of(p, 1e-12));
            }
            prev = Some(inv);
        }
    }

    #[test]
    fn dump_format() {
        let g = two_box(&[(0, 1), (1, 0)]);
        assert_eq!(g.dump(), "0 → 1\n1 → 0\n");
    }
}
