//! Rooted finite-depth trees.
//!
//! Vertices carry dense ids in breadth-first order, so the children of a
//! vertex form a contiguous id range and every level is a contiguous slice.
//! All maximal paths have the same length `depth`; "rays" are root-to-level-N
//! paths of the truncation.

use std::collections::BTreeSet;
use std::ops::Range;

use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use rand::distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::scalar::rational_to_f64;

/// Default per-vertex child cap used by the builders.
pub const DEFAULT_MAX_CHILDREN: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplicitTree {
    parent: Vec<Option<usize>>,
    first_child: Vec<usize>,
    child_count: Vec<usize>,
    vertex_depth: Vec<usize>,
    level_start: Vec<usize>,
    depth: usize,
}

/// Serialized form: child counts per level in breadth-first order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSpec {
    pub children: Vec<Vec<usize>>,
    pub depth: usize,
}

impl ExplicitTree {
    /// Build from child counts listed level by level in breadth-first order.
    /// `levels[k][i]` is the number of children of the `i`-th vertex of level `k`.
    pub fn from_levels(levels: &[Vec<usize>]) -> Result<Self> {
        Self::from_levels_with_limit(levels, DEFAULT_MAX_CHILDREN)
    }

    pub fn from_levels_with_limit(levels: &[Vec<usize>], max_children: usize) -> Result<Self> {
        let depth = levels.len();
        let mut parent = vec![None];
        let mut vertex_depth = vec![0];
        let mut first_child = Vec::new();
        let mut child_count = Vec::new();
        let mut level_start = vec![0, 1];
        let mut width = 1usize;
        for (k, counts) in levels.iter().enumerate() {
            if counts.len() != width {
                return Err(Error::InvalidTree(format!(
                    "level {k} lists {} child counts but has {width} vertices (ragged depths?)",
                    counts.len()
                )));
            }
            let base = level_start[k];
            let mut next = level_start[k + 1];
            for (i, &c) in counts.iter().enumerate() {
                if c == 0 {
                    return Err(Error::InvalidTree(format!(
                        "vertex {} at depth {k} has no children but the tree has depth {depth}",
                        base + i
                    )));
                }
                if c > max_children {
                    return Err(Error::InvalidTree(format!(
                        "vertex {} has {c} children, above the cap of {max_children}",
                        base + i
                    )));
                }
                first_child.push(next);
                child_count.push(c);
                for _ in 0..c {
                    parent.push(Some(base + i));
                    vertex_depth.push(k + 1);
                }
                next += c;
            }
            width = next - level_start[k + 1];
            level_start.push(next);
        }
        let n = parent.len();
        first_child.resize(n, n);
        child_count.resize(n, 0);
        let tree = Self {
            parent,
            first_child,
            child_count,
            vertex_depth,
            level_start,
            depth,
        };
        debug_assert!(tree.validate().is_ok());
        Ok(tree)
    }

    pub fn from_spec(spec: &TreeSpec) -> Result<Self> {
        if spec.children.len() != spec.depth {
            return Err(Error::InvalidTree(format!(
                "depth {} but {} levels of child counts",
                spec.depth,
                spec.children.len()
            )));
        }
        Self::from_levels(&spec.children)
    }

    pub fn to_spec(&self) -> TreeSpec {
        let children = (0..self.depth)
            .map(|k| self.level(k).map(|v| self.child_count[v]).collect())
            .collect();
        TreeSpec {
            children,
            depth: self.depth,
        }
    }

    /// Spherically symmetric tree: every depth-(n-1) vertex has `f(n)` children.
    pub fn symmetric(growth: &[usize], depth: usize) -> Result<Self> {
        if depth > growth.len() {
            return Err(Error::InvalidProfile(format!(
                "depth {depth} exceeds profile length {}",
                growth.len()
            )));
        }
        let mut levels = Vec::with_capacity(depth);
        let mut width = 1usize;
        for &f in &growth[..depth] {
            if f == 0 {
                return Err(Error::InvalidProfile("growth numbers must be >= 1".into()));
            }
            levels.push(vec![f; width]);
            width = width
                .checked_mul(f)
                .ok_or_else(|| Error::InvalidProfile("level size overflows".into()))?;
        }
        Self::from_levels_with_limit(&levels, usize::MAX)
    }

    /// Symmetric tree from an integer-valued [`GrowthProfile`].
    pub fn build_symmetric(profile: &GrowthProfile, depth: usize) -> Result<Self> {
        let ints = profile.integer_growth()?;
        Self::symmetric(&ints, depth)
    }

    /// Galton-Watson tree with offspring law `probs[j]` on `j + 1` children.
    /// Support starts at one child, so the tree is leafless by construction.
    pub fn galton_watson(offspring: &[f64], depth: usize, seed: u64) -> Result<Self> {
        if offspring.is_empty() {
            return Err(Error::param("offspring", "empty offspring law"));
        }
        let dist = WeightedIndex::new(offspring)
            .map_err(|e| Error::param("offspring", e.to_string()))?;
        let mut rng = CounterRng::new(seed, 0);
        let mut levels = Vec::with_capacity(depth);
        let mut width = 1usize;
        for _ in 0..depth {
            let counts: Vec<usize> = (0..width).map(|_| dist.sample(&mut rng) + 1).collect();
            width = counts.iter().sum();
            levels.push(counts);
        }
        Self::from_levels_with_limit(&levels, usize::MAX)
    }

    /// Galton-Watson tree with offspring law given on `{0, 1, .., K}`;
    /// rejects laws that can produce leaves.
    pub fn galton_watson_from_support(law: &[f64], depth: usize, seed: u64) -> Result<Self> {
        match law.first() {
            Some(&p0) if p0 > 0.0 => Err(Error::param(
                "offspring",
                "offspring law puts mass on 0 children; trees must be leafless",
            )),
            Some(_) => Self::galton_watson(&law[1..], depth, seed),
            None => Err(Error::param("offspring", "empty offspring law")),
        }
    }

    pub fn path(depth: usize) -> Self {
        Self::symmetric(&vec![1; depth], depth).expect("path is valid")
    }

    pub fn full(arity: usize, depth: usize) -> Self {
        Self::symmetric(&vec![arity; depth], depth).expect("full tree is valid")
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn vertex_depth(&self, v: usize) -> usize {
        self.vertex_depth[v]
    }

    pub fn children(&self, v: usize) -> Range<usize> {
        self.first_child[v]..self.first_child[v] + self.child_count[v]
    }

    pub fn child_count(&self, v: usize) -> usize {
        self.child_count[v]
    }

    /// Vertex ids at depth `k`.
    pub fn level(&self, k: usize) -> Range<usize> {
        self.level_start[k]..self.level_start[k + 1]
    }

    /// `|Γ_k|` for `k = 0..=depth`.
    pub fn level_sizes(&self) -> Vec<usize> {
        (0..=self.depth).map(|k| self.level(k).len()).collect()
    }

    pub fn leaves(&self) -> Range<usize> {
        self.level(self.depth)
    }

    pub fn contains(&self, v: usize) -> bool {
        v < self.len()
    }

    /// Truncation to the first `depth` levels.
    pub fn truncate(&self, depth: usize) -> Result<Self> {
        if depth > self.depth {
            return Err(Error::param("depth", "truncation deeper than the tree"));
        }
        let spec = self.to_spec();
        Self::from_levels_with_limit(&spec.children[..depth], usize::MAX)
    }

    /// Check parent/child consistency, depths and leaflessness.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 || self.parent[0].is_some() {
            return Err(Error::InvalidTree("missing root".into()));
        }
        for v in 1..n {
            let p = self.parent[v]
                .ok_or_else(|| Error::InvalidTree(format!("vertex {v} has no parent")))?;
            if p >= v {
                return Err(Error::InvalidTree(format!("parent of {v} is not earlier in BFS order")));
            }
            if !self.children(p).contains(&v) {
                return Err(Error::InvalidTree(format!("{v} missing from its parent's children")));
            }
            if self.vertex_depth[v] != self.vertex_depth[p] + 1 {
                return Err(Error::InvalidTree(format!("depth of {v} is inconsistent")));
            }
        }
        for v in 0..n {
            let d = self.vertex_depth[v];
            if (d < self.depth) != (self.child_count[v] > 0) {
                return Err(Error::InvalidTree(format!(
                    "vertex {v} at depth {d} violates leaflessness below depth {}",
                    self.depth
                )));
            }
            for c in self.children(v) {
                if self.parent[c] != Some(v) {
                    return Err(Error::InvalidTree(format!("child {c} disowns {v}")));
                }
            }
        }
        Ok(())
    }

    /// Deepest common ancestor `σ ∧ τ`.
    pub fn meet(&self, a: usize, b: usize) -> Result<usize> {
        for v in [a, b] {
            if !self.contains(v) {
                return Err(Error::UnknownVertex(v));
            }
        }
        let (mut a, mut b) = (a, b);
        while self.vertex_depth[a] > self.vertex_depth[b] {
            a = self.parent[a].expect("non-root");
        }
        while self.vertex_depth[b] > self.vertex_depth[a] {
            b = self.parent[b].expect("non-root");
        }
        while a != b {
            a = self.parent[a].expect("non-root");
            b = self.parent[b].expect("non-root");
        }
        Ok(a)
    }

    /// Ancestor of `v` at depth `k <= depth(v)`.
    pub fn ancestor_at(&self, mut v: usize, k: usize) -> usize {
        while self.vertex_depth[v] > k {
            v = self.parent[v].expect("non-root");
        }
        v
    }

    /// Exact spherical symmetrization `f(n) = |Γ_n| / |Γ_{n-1}|`.
    pub fn symmetrize(&self) -> GrowthProfile {
        let sizes = self.level_sizes();
        let factors = sizes
            .windows(2)
            .map(|w| BigRational::new(BigInt::from(w[1]), BigInt::from(w[0])))
            .collect();
        GrowthProfile::from_rationals(factors).expect("leafless trees have growth >= 1")
    }
}

/// Minimum cutset.
///
/// Minimizes `Σ_{σ∈Π} w(σ)` over antichain cutsets whose members all have
/// depth `>= min_level`, by the leaf-up recursion
/// `c(σ) = min(w(σ), Σ_children c)`. Ties go to the shallower vertex.
pub fn min_cutset(
    tree: &ExplicitTree,
    weight: impl Fn(usize) -> f64,
    min_level: usize,
) -> Result<(f64, Cutset)> {
    if min_level > tree.depth() {
        return Err(Error::param(
            "min_level",
            format!("{min_level} exceeds tree depth {}", tree.depth()),
        ));
    }
    let n = tree.len();
    let mut best = vec![0.0; n];
    let mut take_self = vec![false; n];
    for v in (0..n).rev() {
        let d = tree.vertex_depth(v);
        if d == tree.depth() {
            best[v] = weight(v);
            take_self[v] = true;
            continue;
        }
        let below: f64 = tree.children(v).map(|c| best[c]).sum();
        if d >= min_level {
            let w = weight(v);
            if w <= below {
                best[v] = w;
                take_self[v] = true;
                continue;
            }
        }
        best[v] = below;
    }
    let mut members = BTreeSet::new();
    let mut stack = vec![tree.root()];
    while let Some(v) = stack.pop() {
        if take_self[v] && tree.vertex_depth(v) >= min_level.min(tree.depth()) {
            members.insert(v);
        } else {
            stack.extend(tree.children(v));
        }
    }
    Ok((best[tree.root()], Cutset { members }))
}

/// Antichain of vertices meeting every root-to-level-N path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cutset {
    members: BTreeSet<usize>,
}

impl Cutset {
    /// Canonicalize an arbitrary vertex set: drop members that have an
    /// ancestor in the set, then check it meets every ray.
    pub fn new(tree: &ExplicitTree, vertices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let raw: BTreeSet<usize> = vertices.into_iter().collect();
        for &v in &raw {
            if !tree.contains(v) {
                return Err(Error::UnknownVertex(v));
            }
        }
        let members: BTreeSet<usize> = raw
            .iter()
            .copied()
            .filter(|&v| {
                let mut u = v;
                while let Some(p) = tree.parent(u) {
                    if raw.contains(&p) {
                        return false;
                    }
                    u = p;
                }
                true
            })
            .collect();
        let cut = Self { members };
        if !cut.is_cutset_of(tree) {
            return Err(Error::InvalidTree("vertex set misses some ray".into()));
        }
        Ok(cut)
    }

    pub fn members(&self) -> &BTreeSet<usize> {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_cutset_of(&self, tree: &ExplicitTree) -> bool {
        tree.leaves().all(|leaf| {
            let mut v = leaf;
            loop {
                if self.members.contains(&v) {
                    return true;
                }
                match tree.parent(v) {
                    Some(p) => v = p,
                    None => return false,
                }
            }
        })
    }
}

/// Growth numbers `f(1..=N)` of a (possibly virtual) spherically symmetric tree.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthProfile {
    factors: Vec<BigRational>,
    sizes: Vec<BigRational>,
}

impl GrowthProfile {
    pub fn from_rationals(factors: Vec<BigRational>) -> Result<Self> {
        let one = BigRational::one();
        if let Some(i) = factors.iter().position(|f| f < &one) {
            return Err(Error::InvalidProfile(format!(
                "growth number f({}) = {} is below 1",
                i + 1,
                factors[i]
            )));
        }
        let mut sizes = Vec::with_capacity(factors.len() + 1);
        sizes.push(one);
        for f in &factors {
            let next = sizes.last().expect("non-empty") * f;
            sizes.push(next);
        }
        Ok(Self { factors, sizes })
    }

    pub fn from_integers(factors: &[usize]) -> Result<Self> {
        Self::from_rationals(
            factors
                .iter()
                .map(|&f| BigRational::from_integer(BigInt::from(f)))
                .collect(),
        )
    }

    /// Real (virtual) growth numbers, converted exactly.
    pub fn from_reals(factors: &[f64]) -> Result<Self> {
        let rs = factors
            .iter()
            .map(|&f| {
                BigRational::from_float(f)
                    .ok_or_else(|| Error::InvalidProfile(format!("non-finite growth {f}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rationals(rs)
    }

    /// Profile whose cumulative sizes are the given level sizes `|Γ_0| = 1, |Γ_1|, ..`.
    pub fn from_level_sizes(sizes: &[BigRational]) -> Result<Self> {
        if sizes.first().map(|s| s != &BigRational::one()).unwrap_or(true) {
            return Err(Error::InvalidProfile("level sizes must start at 1".into()));
        }
        let factors = sizes
            .windows(2)
            .map(|w| {
                if w[0].is_zero() {
                    Err(Error::InvalidProfile("zero level size".into()))
                } else {
                    Ok(&w[1] / &w[0])
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rationals(factors)
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// `f(n)` for `n = 1..=len`, stored at index `n - 1`.
    pub fn factors(&self) -> &[BigRational] {
        &self.factors
    }

    pub fn factors_f64(&self) -> Vec<f64> {
        self.factors.iter().map(rational_to_f64).collect()
    }

    /// `λ_k = Π_{i<=k} f(i)` for `k = 0..=len`.
    pub fn level_sizes(&self) -> &[BigRational] {
        &self.sizes
    }

    pub fn level_sizes_f64(&self) -> Vec<f64> {
        self.sizes.iter().map(rational_to_f64).collect()
    }

    pub fn is_integral(&self) -> bool {
        self.factors.iter().all(|f| f.is_integer())
    }

    pub fn integer_growth(&self) -> Result<Vec<usize>> {
        self.factors
            .iter()
            .enumerate()
            .map(|(i, f)| {
                if !f.is_integer() {
                    return Err(Error::InvalidProfile(format!(
                        "f({}) = {f} is not an integer; virtual profiles are only valid for Ψ and R_p",
                        i + 1
                    )));
                }
                f.to_integer()
                    .to_usize()
                    .ok_or_else(|| Error::InvalidProfile("growth number too large".into()))
            })
            .collect()
    }

    pub fn truncate(&self, depth: usize) -> Self {
        let depth = depth.min(self.len());
        Self {
            factors: self.factors[..depth].to_vec(),
            sizes: self.sizes[..=depth].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    fn counterexample() -> ExplicitTree {
        ExplicitTree::from_levels(&[vec![1], vec![2], vec![2, 1]]).unwrap()
    }

    #[test]
    fn symmetric_level_sizes() {
        let t = ExplicitTree::symmetric(&[2, 2], 2).unwrap();
        assert_eq!(t.level_sizes(), vec![1, 2, 4]);
        assert_eq!(t.len(), 7);
        let p = ExplicitTree::symmetric(&[1, 1, 1], 3).unwrap();
        assert_eq!(p.level_sizes(), vec![1, 1, 1, 1]);
        let t = ExplicitTree::symmetric(&[1, 2, 1], 3).unwrap();
        assert_eq!(t.level_sizes(), vec![1, 1, 2, 2]);
    }

    #[test]
    fn non_integer_profile_rejected_for_building() {
        let prof = GrowthProfile::from_rationals(vec![ratio(1, 1), ratio(2, 1), ratio(3, 2)]).unwrap();
        let err = ExplicitTree::build_symmetric(&prof, 3).unwrap_err();
        assert!(err.to_string().contains("not an integer"));
    }

    #[test]
    fn explicit_fixtures() {
        assert_eq!(counterexample().level_sizes(), vec![1, 1, 2, 3]);
        let star = ExplicitTree::from_levels(&[vec![2]]).unwrap();
        assert_eq!(star.depth(), 1);
        assert_eq!(star.level_sizes(), vec![1, 2]);
        let path = ExplicitTree::from_levels(&[vec![1], vec![1]]).unwrap();
        assert_eq!(path.level_sizes(), vec![1, 1, 1]);
    }

    #[test]
    fn ragged_trees_rejected() {
        assert!(ExplicitTree::from_levels(&[vec![2], vec![1]]).is_err());
        assert!(ExplicitTree::from_levels(&[vec![2], vec![1, 0]]).is_err());
        assert!(ExplicitTree::from_levels(&[vec![65]]).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let t = counterexample();
        let json = serde_json::to_string(&t.to_spec()).unwrap();
        assert_eq!(json, r#"{"children":[[1],[2],[2,1]],"depth":3}"#);
        let back: TreeSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(ExplicitTree::from_spec(&back).unwrap(), t);
        assert!(serde_json::from_str::<TreeSpec>(r#"{"children":[],"depth":0,"x":1}"#).is_err());
    }

    #[test]
    fn galton_watson_is_deterministic() {
        let binary = ExplicitTree::galton_watson(&[0.0, 1.0], 3, 99).unwrap();
        assert_eq!(binary, ExplicitTree::full(2, 3));
        let a = ExplicitTree::galton_watson(&[0.5, 0.5], 2, 11).unwrap();
        let b = ExplicitTree::galton_watson(&[0.5, 0.5], 2, 11).unwrap();
        assert_eq!(a, b);
        assert!(ExplicitTree::galton_watson_from_support(&[0.1, 0.9], 2, 1).is_err());
        assert!(ExplicitTree::galton_watson_from_support(&[0.0, 0.5, 0.5], 2, 1).is_ok());
    }

    #[test]
    fn symmetrization() {
        let f = counterexample().symmetrize();
        assert_eq!(f.factors(), &[ratio(1, 1), ratio(2, 1), ratio(3, 2)]);
        assert_eq!(
            ExplicitTree::path(4).symmetrize().factors(),
            &vec![ratio(1, 1); 4][..]
        );
        assert_eq!(
            ExplicitTree::full(2, 3).symmetrize().factors(),
            &vec![ratio(2, 1); 3][..]
        );
    }

    #[test]
    fn meets() {
        let t = ExplicitTree::full(2, 2);
        for v in 0..t.len() {
            assert_eq!(t.meet(v, v).unwrap(), v);
            assert_eq!(t.meet(v, 0).unwrap(), 0);
        }
        // vertices 3,4 are under 1; 5,6 under 2
        assert_eq!(t.meet(3, 5).unwrap(), 0);
        assert_eq!(t.meet(3, 4).unwrap(), 1);
        assert_eq!(t.meet(3, 99), Err(Error::UnknownVertex(99)));
    }

    #[test]
    fn min_cutset_examples() {
        let t = ExplicitTree::full(2, 4);
        let (v, cut) = min_cutset(&t, |v| 0.5f64.powi(t.vertex_depth(v) as i32), 1).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert_eq!(cut.members().iter().copied().collect::<Vec<_>>(), vec![1, 2]);

        let p = ExplicitTree::path(9);
        // weights decrease with depth, so the deepest vertex is the cheapest cut
        let (v, cut) = min_cutset(&p, |v| (p.vertex_depth(v) as f64).powf(-0.5), 4).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(cut.members().iter().copied().collect::<Vec<_>>(), vec![9]);
        // constant weights: the shallowest allowed vertex wins the tie
        let (v, cut) = min_cutset(&p, |_| 1.0, 4).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(cut.members().iter().copied().collect::<Vec<_>>(), vec![4]);

        let c = counterexample();
        let (v, cut) = min_cutset(&c, |_| 1.0, 1).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(cut.members().iter().copied().collect::<Vec<_>>(), vec![1]);

        assert!(min_cutset(&c, |_| 1.0, 4).is_err());
    }

    #[test]
    fn cutset_canonicalization() {
        let t = ExplicitTree::full(2, 2);
        let c = Cutset::new(&t, [1, 3, 4, 2]).unwrap();
        assert_eq!(c.members().iter().copied().collect::<Vec<_>>(), vec![1, 2]);
        assert!(Cutset::new(&t, [1]).is_err());
    }
}
