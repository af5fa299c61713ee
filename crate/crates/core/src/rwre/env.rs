//! Lazily expanded random environments and single walk episodes.

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::law::IncrementLaw;
use crate::par;
use crate::rng::{derive_seed, CounterRng};
use crate::walk1d::McEstimate;

/// How vertices get their children.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// Spherically symmetric: every level-`d` vertex has `growth[d]` children.
    /// Vertex keys are breadth-first ids, so labels agree with
    /// [`crate::network::sample_labels`] on the explicit symmetric tree.
    Symmetric(Vec<usize>),
    /// Galton-Watson with `offspring[k]` the weight of `k + 1` children.
    /// Vertex keys are hashes of the root path.
    GaltonWatson(Vec<f64>),
}

#[derive(Clone, Debug)]
struct Node {
    depth: usize,
    log_c: f64,
    children: Vec<u64>,
}

/// Environment whose vertices are generated on first visit. Expansion is a
/// pure function of `(seed, key)` and the parent's data.
#[derive(Clone, Debug)]
pub struct LazyEnvironment {
    shape: Shape,
    law: IncrementLaw,
    seed: u64,
    level_start: Vec<u64>,
    memo: HashMap<u64, Node>,
}

const ROOT: u64 = 0;

impl LazyEnvironment {
    pub fn new(shape: Shape, law: IncrementLaw, seed: u64) -> Result<Self> {
        let level_start = match &shape {
            Shape::Symmetric(g) => {
                if g.iter().any(|&f| f == 0) {
                    return Err(Error::InvalidProfile("growth factors must be >= 1".into()));
                }
                let mut starts = vec![0u64, 1];
                let mut width = 1u64;
                for &f in g {
                    width = width.saturating_mul(f as u64);
                    let last = *starts.last().expect("nonempty");
                    starts.push(last.saturating_add(width));
                }
                starts
            }
            Shape::GaltonWatson(w) => {
                if w.is_empty() || w.iter().any(|x| !(*x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::param("offspring", "need nonnegative weights with positive sum"));
                }
                Vec::new()
            }
        };
        let mut memo = HashMap::new();
        memo.insert(ROOT, Node { depth: 0, log_c: 0.0, children: Vec::new() });
        let mut env = Self { shape, law, seed, level_start, memo };
        env.expand(ROOT);
        Ok(env)
    }

    pub fn max_depth(&self) -> Option<usize> {
        match &self.shape {
            Shape::Symmetric(g) => Some(g.len()),
            Shape::GaltonWatson(_) => None,
        }
    }

    /// A fresh copy with an empty memo.
    pub fn reset(&self) -> Self {
        Self::new(self.shape.clone(), self.law.clone(), self.seed).expect("validated")
    }

    fn expand(&mut self, key: u64) {
        let node = &self.memo[&key];
        if !node.children.is_empty() {
            return;
        }
        let (depth, log_c) = (node.depth, node.log_c);
        let keys: Vec<u64> = match &self.shape {
            Shape::Symmetric(g) => {
                if depth >= g.len() {
                    return;
                }
                let index = key - self.level_start[depth];
                let f = g[depth] as u64;
                (0..f).map(|j| self.level_start[depth + 1] + index * f + j).collect()
            }
            Shape::GaltonWatson(w) => {
                let mut rng = CounterRng::new(derive_seed(self.seed, 1), key);
                let total: f64 = w.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut k = w.len();
                for (i, x) in w.iter().enumerate() {
                    if u < *x {
                        k = i + 1;
                        break;
                    }
                    u -= x;
                }
                (0..k as u64).map(|j| derive_seed(key, j + 1)).collect()
            }
        };
        for &c in &keys {
            let x = self.law.sample(&mut CounterRng::new(self.seed, c));
            self.memo.insert(c, Node { depth: depth + 1, log_c: log_c + x, children: Vec::new() });
        }
        self.memo.get_mut(&key).expect("present").children = keys;
    }

    /// `(children keys, their log-conductances)`, expanding on demand.
    pub fn children(&mut self, key: u64) -> Vec<(u64, f64)> {
        self.expand(key);
        let kids = self.memo[&key].children.clone();
        kids.into_iter().map(|c| (c, self.memo[&c].log_c)).collect()
    }

    /// Log-conductance of the edge into `key` (its `S` value).
    pub fn log_conductance(&self, key: u64) -> Option<f64> {
        self.memo.get(&key).map(|n| n.log_c)
    }

    pub fn expanded(&self) -> usize {
        self.memo.len()
    }

    /// Order-independent digest of the memo contents.
    pub fn digest(&self) -> u64 {
        let mut keys: Vec<&u64> = self.memo.keys().collect();
        keys.sort();
        keys.into_iter().fold(0u64, |acc, k| {
            let n = &self.memo[k];
            derive_seed(acc ^ *k, n.log_c.to_bits() ^ (n.depth as u64))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeTag {
    ReturnedToRoot,
    ReachedDepth,
    Exhausted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EpisodeOutcome {
    pub tag: EpisodeTag,
    pub steps: usize,
    pub max_depth: usize,
}

fn pick(rng: &mut CounterRng, logs: &[f64]) -> usize {
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let mut u = rng.random::<f64>() * w.iter().sum::<f64>();
    for (i, x) in w.iter().enumerate() {
        if u < *x {
            return i;
        }
        u -= x;
    }
    w.len() - 1
}

/// Nearest-neighbour walk from the root with transition probabilities
/// proportional to edge conductances; the root reflects into its children.
pub fn walk_episode(env: &mut LazyEnvironment, target_depth: usize, max_steps: usize, seed: u64) -> Result<EpisodeOutcome> {
    if target_depth == 0 {
        return Err(Error::param("depth", "must be >= 1"));
    }
    if max_steps == 0 {
        return Err(Error::param("max_steps", "must be >= 1"));
    }
    let mut rng = CounterRng::new(seed, 0);
    // root path as (key, log-conductance of the edge into it)
    let mut path: Vec<(u64, f64)> = vec![(ROOT, 0.0)];
    let mut max_depth = 0;
    for step in 1..=max_steps {
        let (here, log_here) = *path.last().expect("nonempty");
        let kids = env.children(here);
        let mut logs: Vec<f64> = kids.iter().map(|(_, l)| *l).collect();
        let up = path.len() > 1;
        if up {
            logs.push(log_here);
        }
        if logs.is_empty() {
            // finite tree bottom reached below the target: bounce back
            path.pop();
        } else {
            let i = pick(&mut rng, &logs);
            if i == kids.len() {
                path.pop();
            } else {
                path.push(kids[i]);
            }
        }
        let depth = path.len() - 1;
        max_depth = max_depth.max(depth);
        if depth == 0 {
            return Ok(EpisodeOutcome { tag: EpisodeTag::ReturnedToRoot, steps: step, max_depth });
        }
        if depth == target_depth {
            return Ok(EpisodeOutcome { tag: EpisodeTag::ReachedDepth, steps: step, max_depth });
        }
    }
    Ok(EpisodeOutcome { tag: EpisodeTag::Exhausted, steps: max_steps, max_depth })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EscapeReport {
    pub reached: McEstimate,
    pub returned: usize,
    pub exhausted: usize,
    pub mean_steps: f64,
}

/// Frequency of reaching `target_depth` before returning, in one fixed
/// environment; episode `i` walks with stream `(seed, i)` on its own memo.
pub fn escape_mc(env: &LazyEnvironment, target_depth: usize, max_steps: usize, episodes: usize, seed: u64) -> Result<EscapeReport> {
    if episodes == 0 {
        return Err(Error::param("episodes", "must be >= 1"));
    }
    let blocks = par::map_blocks(episodes, |range| -> Result<[usize; 4]> {
        let mut local = env.reset();
        let mut acc = [0usize; 4];
        for i in range {
            let o = walk_episode(&mut local, target_depth, max_steps, derive_seed(seed, i as u64))?;
            match o.tag {
                EpisodeTag::ReachedDepth => acc[0] += 1,
                EpisodeTag::ReturnedToRoot => acc[1] += 1,
                EpisodeTag::Exhausted => acc[2] += 1,
            }
            acc[3] += o.steps;
        }
        Ok(acc)
    });
    let mut total = [0usize; 4];
    for b in blocks {
        let b = b?;
        for (t, x) in total.iter_mut().zip(b) {
            *t += x;
        }
    }
    Ok(EscapeReport {
        reached: McEstimate::from_counts(total[0], episodes),
        returned: total[1],
        exhausted: total[2],
        mean_steps: total[3] as f64 / episodes as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::Lattice;
    use crate::network::sample_labels;
    use crate::tree::ExplicitTree;

    fn zero() -> IncrementLaw {
        IncrementLaw::Lattice(Lattice::constant(0.0))
    }

    #[test]
    fn gamblers_ruin_on_a_path() {
        for d in [4usize, 16, 64] {
            let env = LazyEnvironment::new(Shape::Symmetric(vec![1; d]), zero(), 1).unwrap();
            let r = escape_mc(&env, d, 1_000_000, 100_000, 7).unwrap();
            assert!(r.reached.within(1.0 / d as f64, 3.0), "D = {d}: {:?}", r.reached);
            assert_eq!(r.exhausted, 0);
        }
    }

    #[test]
    fn binary_escape() {
        let env = LazyEnvironment::new(Shape::Symmetric(vec![2, 2]), zero(), 1).unwrap();
        let r = escape_mc(&env, 2, 10_000, 100_000, 3).unwrap();
        assert!(r.reached.within(2.0 / 3.0, 3.0), "{:?}", r.reached);
    }

    #[test]
    fn one_step_never_reaches_depth_two() {
        let mut env = LazyEnvironment::new(Shape::GaltonWatson(vec![1.0, 1.0]), IncrementLaw::rademacher(), 5).unwrap();
        for s in 0..200 {
            let o = walk_episode(&mut env, 2, 1, s).unwrap();
            assert_eq!(o.tag, EpisodeTag::Exhausted);
            assert_eq!(o.max_depth, 1);
        }
    }

    #[test]
    fn labels_match_explicit_tree() {
        let growth = vec![2, 1, 3];
        let tree = ExplicitTree::symmetric(&growth, 3).unwrap();
        let law = IncrementLaw::gaussian(0.0, 1.0).unwrap();
        let x = sample_labels(&tree, &law, 11);
        let mut env = LazyEnvironment::new(Shape::Symmetric(growth), law, 11).unwrap();
        let mut stack = vec![0u64];
        while let Some(k) = stack.pop() {
            for (c, log_c) in env.children(k) {
                let v = c as usize;
                let p = tree.parent(v).unwrap();
                let s_parent = env.log_conductance(p as u64).unwrap();
                assert!((log_c - s_parent - x[v]).abs() < 1e-12);
                stack.push(c);
            }
        }
        assert_eq!(env.expanded(), tree.len());
    }

    #[test]
    fn expansion_order_does_not_matter() {
        let shape = Shape::GaltonWatson(vec![1.0, 2.0, 1.0]);
        let law = IncrementLaw::rademacher();
        let base = LazyEnvironment::new(shape, law, 42).unwrap();
        let mut a = base.reset();
        let mut b = base.reset();
        for s in 0..50 {
            walk_episode(&mut a, 6, 200, s).unwrap();
        }
        for s in (0..50).rev() {
            walk_episode(&mut b, 6, 200, s).unwrap();
        }
        assert_eq!(a.digest(), b.digest());
        let tags_a: Vec<_> = (0..20).map(|s| walk_episode(&mut a, 6, 200, s).unwrap()).collect();
        let tags_b: Vec<_> = (0..20).map(|s| walk_episode(&mut base.reset(), 6, 200, s).unwrap()).collect();
        assert_eq!(tags_a, tags_b);
    }
}
