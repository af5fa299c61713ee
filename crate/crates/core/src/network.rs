//! Conductance networks on trees.
//!
//! Vertex `σ` stands for its parent edge `σ'σ`. Conductances are stored as
//! logarithms `S(σ)` so deep environments with large excursions neither
//! overflow nor underflow.

use crate::error::{Error, Result};
use crate::law::IncrementLaw;
use crate::rng::CounterRng;
use crate::tree::{min_cutset, Cutset, ExplicitTree};

/// `log(e^a + e^b)`
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(f64::NEG_INFINITY, log_add_exp)
}

/// Log-conductance of a series pair `(1/c1 + 1/c2)^{-1}`.
#[inline]
pub fn log_series(a: f64, b: f64) -> f64 {
    -log_add_exp(-a, -b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConductanceMap {
    log_c: Vec<f64>,
}

impl ConductanceMap {
    /// From log-conductances indexed by vertex; the root entry is ignored.
    pub fn from_logs(tree: &ExplicitTree, mut log_c: Vec<f64>) -> Result<Self> {
        if log_c.len() != tree.len() {
            return Err(Error::param("conductances", format!("expected {} entries, got {}", tree.len(), log_c.len())));
        }
        log_c[0] = 0.0;
        if let Some(v) = log_c.iter().position(|x| !x.is_finite()) {
            return Err(Error::param("conductances", format!("log-conductance of vertex {v} is not finite")));
        }
        Ok(Self { log_c })
    }

    pub fn from_conductances(tree: &ExplicitTree, c: &[f64]) -> Result<Self> {
        if let Some(v) = (1..c.len()).find(|&v| !(c[v] > 0.0) || !c[v].is_finite()) {
            return Err(Error::param("conductances", format!("conductance of vertex {v} is {}", c[v])));
        }
        let mut logs: Vec<f64> = c.iter().map(|x| x.ln()).collect();
        if let Some(r) = logs.first_mut() {
            *r = 0.0;
        }
        Self::from_logs(tree, logs)
    }

    pub fn uniform(tree: &ExplicitTree) -> Self {
        Self { log_c: vec![0.0; tree.len()] }
    }

    /// Conductances `e^{S(σ)}` from labels `X(σ)` (root label ignored).
    pub fn from_labels(tree: &ExplicitTree, x: &[f64]) -> Result<Self> {
        let mut s = vec![0.0; tree.len()];
        for v in 1..tree.len() {
            let p = tree.parent(v).expect("non-root");
            s[v] = s[p] + x[v];
        }
        Self::from_logs(tree, s)
    }

    pub fn log(&self, v: usize) -> f64 {
        self.log_c[v]
    }

    pub fn get(&self, v: usize) -> f64 {
        self.log_c[v].exp()
    }

    pub fn logs(&self) -> &[f64] {
        &self.log_c
    }

    /// Multiply every conductance by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        let shift = t.ln();
        let mut log_c: Vec<f64> = self.log_c.iter().map(|x| x + shift).collect();
        log_c[0] = 0.0;
        Self { log_c }
    }

    pub fn with_edge(&self, v: usize, log_value: f64) -> Self {
        let mut out = self.clone();
        out.log_c[v] = log_value;
        out
    }
}

/// I.i.d. labels, one per non-root vertex; vertex `v` reads stream `(seed, v)`.
pub fn sample_labels(tree: &ExplicitTree, law: &IncrementLaw, seed: u64) -> Vec<f64> {
    let mut x = vec![0.0; tree.len()];
    for (v, slot) in x.iter_mut().enumerate().skip(1) {
        *slot = law.sample(&mut CounterRng::new(seed, v as u64));
    }
    x
}

pub fn sample_environment(tree: &ExplicitTree, law: &IncrementLaw, seed: u64) -> ConductanceMap {
    ConductanceMap::from_labels(tree, &sample_labels(tree, law, seed)).expect("finite labels")
}

/// Log effective conductance between the root and level `N`.
pub fn log_effective_conductance(tree: &ExplicitTree, cond: &ConductanceMap) -> f64 {
    let mut sub = vec![f64::NEG_INFINITY; tree.len()];
    for v in (1..tree.len()).rev() {
        sub[v] = if tree.child_count(v) == 0 {
            cond.log(v)
        } else {
            let below = log_sum_exp(tree.children(v).map(|c| sub[c]));
            log_series(cond.log(v), below)
        };
    }
    log_sum_exp(tree.children(tree.root()).map(|c| sub[c]))
}

pub fn effective_conductance(tree: &ExplicitTree, cond: &ConductanceMap) -> f64 {
    log_effective_conductance(tree, cond).exp()
}

/// Probability that the walk from the root reaches level `N` before returning.
pub fn escape_probability(tree: &ExplicitTree, cond: &ConductanceMap) -> f64 {
    let total = log_sum_exp(tree.children(tree.root()).map(|c| cond.log(c)));
    (log_effective_conductance(tree, cond) - total).exp().min(1.0)
}

/// Resistance between the root and level `N` when the edge into `v` has
/// resistance `r(v) >= 0`.
pub fn tree_resistance(tree: &ExplicitTree, r: impl Fn(usize) -> f64) -> f64 {
    let mut sub = vec![0.0f64; tree.len()];
    for v in (0..tree.len()).rev() {
        let below = if tree.child_count(v) == 0 {
            0.0
        } else {
            let mut g = 0.0;
            let mut short = false;
            for c in tree.children(v) {
                if sub[c] == 0.0 {
                    short = true;
                    break;
                }
                g += 1.0 / sub[c];
            }
            if short {
                0.0
            } else {
                1.0 / g
            }
        };
        sub[v] = if v == tree.root() { below } else { r(v) + below };
    }
    sub[tree.root()]
}

/// Prefix minima `U(σ) = min_{ρ<τ<=σ} C(τ)`, as logarithms.
pub fn log_prefix_minima(tree: &ExplicitTree, cond: &ConductanceMap) -> Vec<f64> {
    let mut u = vec![f64::INFINITY; tree.len()];
    for v in 1..tree.len() {
        let p = tree.parent(v).expect("non-root");
        u[v] = u[p].min(cond.log(v));
    }
    u
}

/// Tightest cutset bound `min_Π Σ_{σ∈Π} U(σ)` on the root-to-level-`N` conductance.
pub fn bottleneck_bound(tree: &ExplicitTree, cond: &ConductanceMap) -> Result<(f64, Cutset)> {
    if tree.depth() == 0 {
        return Err(Error::param("tree", "bottleneck bound needs depth >= 1"));
    }
    let u = log_prefix_minima(tree, cond);
    min_cutset(tree, |v| u[v].exp(), 1)
}

/// Nearest-neighbour transition probabilities proportional to conductances.
/// Row `σ` lists the parent first (absent at the root), then the children.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionKernel {
    rows: Vec<Vec<f64>>,
}

impl TransitionKernel {
    pub fn row(&self, v: usize) -> &[f64] {
        &self.rows[v]
    }

    /// `q(σ, τ)` for a neighbour `τ` of `σ`.
    pub fn prob(&self, tree: &ExplicitTree, from: usize, to: usize) -> Option<f64> {
        let offset = usize::from(from != tree.root());
        if tree.parent(from) == Some(to) {
            return Some(self.rows[from][0]);
        }
        let r = tree.children(from);
        r.contains(&to).then(|| self.rows[from][offset + to - r.start])
    }
}

pub fn transition_kernel(tree: &ExplicitTree, cond: &ConductanceMap) -> TransitionKernel {
    let rows = (0..tree.len())
        .map(|v| {
            let mut logs: Vec<f64> = Vec::with_capacity(tree.child_count(v) + 1);
            if v != tree.root() {
                logs.push(cond.log(v));
            }
            logs.extend(tree.children(v).map(|c| cond.log(c)));
            let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
            let z: f64 = w.iter().sum();
            w.into_iter().map(|x| x / z).collect()
        })
        .collect();
    TransitionKernel { rows }
}

/// `X(σ) = log(q(σ', σ) / q(σ', σ''))` for `|σ| >= 2`; `None` above.
pub fn recover_labels(tree: &ExplicitTree, kernel: &TransitionKernel) -> Vec<Option<f64>> {
    (0..tree.len())
        .map(|v| {
            if tree.vertex_depth(v) < 2 {
                return None;
            }
            let p = tree.parent(v).expect("depth >= 2");
            let pp = tree.parent(p).expect("depth >= 2");
            let fwd = kernel.prob(tree, p, v)?;
            let back = kernel.prob(tree, p, pp)?;
            Some((fwd / back).ln())
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    /// Escape probability by solving the harmonic equations directly.
    pub(crate) fn harmonic_escape(tree: &ExplicitTree, cond: &ConductanceMap) -> f64 {
        let kernel = transition_kernel(tree, cond);
        let interior: Vec<usize> = (1..tree.len()).filter(|&v| tree.vertex_depth(v) < tree.depth()).collect();
        let mut pos = vec![usize::MAX; tree.len()];
        for (i, &v) in interior.iter().enumerate() {
            pos[v] = i;
        }
        let m = interior.len();
        let mut a = DMatrix::<f64>::identity(m, m);
        let mut b = DVector::<f64>::zeros(m);
        for (i, &v) in interior.iter().enumerate() {
            let p = tree.parent(v).unwrap();
            let mut nbrs = vec![p];
            nbrs.extend(tree.children(v));
            for (w, q) in nbrs.into_iter().zip(kernel.row(v)) {
                if w == tree.root() {
                    continue;
                }
                if tree.vertex_depth(w) == tree.depth() {
                    b[i] += q;
                } else {
                    a[(i, pos[w])] -= q;
                }
            }
        }
        let h = if m == 0 { b.clone() } else { a.lu().solve(&b).expect("nonsingular") };
        tree.children(0)
            .zip(kernel.row(0))
            .map(|(c, q)| q * if tree.vertex_depth(c) == tree.depth() { 1.0 } else { h[pos[c]] })
            .sum()
    }

    fn random_tree(seed: u64, depth: usize, max_children: usize) -> ExplicitTree {
        ExplicitTree::galton_watson(&vec![1.0; max_children], depth, seed).unwrap()
    }

    #[test]
    fn conductance_examples() {
        let star = ExplicitTree::from_levels(&[vec![1]]).unwrap();
        let c = ConductanceMap::from_conductances(&star, &[1.0, 2.5]).unwrap();
        assert!((effective_conductance(&star, &c) - 2.5).abs() < 1e-14);
        let path = ExplicitTree::path(2);
        let u = ConductanceMap::uniform(&path);
        assert!((effective_conductance(&path, &u) - 0.5).abs() < 1e-15);
        assert!((escape_probability(&path, &u) - 0.5).abs() < 1e-15);
        let bin = ExplicitTree::full(2, 2);
        let u = ConductanceMap::uniform(&bin);
        assert!((effective_conductance(&bin, &u) - 4.0 / 3.0).abs() < 1e-15);
        assert!((escape_probability(&bin, &u) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn environment_examples() {
        let t = ExplicitTree::full(2, 3);
        let zero = sample_environment(&t, &"const:0".parse().unwrap(), 1);
        assert!((1..t.len()).all(|v| zero.get(v) == 1.0));
        let c = 0.3;
        let drift = sample_environment(&t, &format!("const:{c}").parse().unwrap(), 1);
        for v in 1..t.len() {
            assert!((drift.log(v) - c * t.vertex_depth(v) as f64).abs() < 1e-12);
        }
        let star = ExplicitTree::from_levels(&[vec![64]]).unwrap();
        let law = IncrementLaw::rademacher();
        let mut up = 0usize;
        let seeds = 200;
        for s in 0..seeds {
            let env = sample_environment(&star, &law, s);
            for v in 1..star.len() {
                let x = env.get(v);
                assert!((x - std::f64::consts::E).abs() < 1e-12 || (x - (-1f64).exp()).abs() < 1e-12);
                up += usize::from(x > 1.0);
            }
        }
        let n = (seeds * 64) as f64;
        let p = up as f64 / n;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / n).sqrt());
    }

    #[test]
    fn bottleneck_examples() {
        let path = ExplicitTree::path(2);
        let (b, _) = bottleneck_bound(&path, &ConductanceMap::uniform(&path)).unwrap();
        assert_eq!(b, 1.0);
        let bin = ExplicitTree::full(2, 2);
        let (b, cut) = bottleneck_bound(&bin, &ConductanceMap::uniform(&bin)).unwrap();
        assert_eq!(b, 2.0);
        assert_eq!(cut.len(), 2);
        let p5 = ExplicitTree::path(5);
        let eps = 1e-6;
        let c = ConductanceMap::from_conductances(&p5, &[1.0, 3.0, 2.0, eps, 5.0, 7.0]).unwrap();
        let (b, _) = bottleneck_bound(&p5, &c).unwrap();
        assert!((b - eps).abs() < 1e-18);
        assert!(effective_conductance(&p5, &c) <= eps);
    }

    #[test]
    fn kernel_examples() {
        let t = ExplicitTree::full(3, 2);
        let k = transition_kernel(&t, &ConductanceMap::uniform(&t));
        assert_eq!(k.row(0), &[1.0 / 3.0; 3]);
        assert_eq!(k.row(1), &[0.25; 4]);
        let env = sample_environment(&t, &IncrementLaw::gaussian(0.0, 1.0).unwrap(), 4);
        assert_eq!(transition_kernel(&t, &env.scaled(2.0)).row(2).len(), 4);
        for v in 0..t.len() {
            let a = transition_kernel(&t, &env);
            let b = transition_kernel(&t, &env.scaled(2.0));
            for (x, y) in a.row(v).iter().zip(b.row(v)) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn labels_are_recovered() {
        for seed in 0..20 {
            let t = random_tree(seed, 5, 3);
            let law = IncrementLaw::gaussian(0.0, 2.0).unwrap();
            let x = sample_labels(&t, &law, seed);
            let env = ConductanceMap::from_labels(&t, &x).unwrap();
            let rec = recover_labels(&t, &transition_kernel(&t, &env));
            for v in 0..t.len() {
                match rec[v] {
                    Some(r) => assert!((r - x[v]).abs() < 1e-12, "{r} vs {}", x[v]),
                    None => assert!(t.vertex_depth(v) < 2),
                }
            }
        }
    }

    #[test]
    fn escape_matches_harmonic_solve() {
        for seed in 0..30 {
            let t = random_tree(seed, 1 + seed as usize % 6, 3);
            let env = sample_environment(&t, &IncrementLaw::rademacher(), seed);
            let e = escape_probability(&t, &env);
            assert!(e > 0.0 && e <= 1.0);
            assert!((e - harmonic_escape(&t, &env)).abs() < 1e-10);
            assert!((escape_probability(&t, &env.scaled(7.5)) - e).abs() < 1e-12);
        }
    }

    #[test]
    fn lemma_bound_and_rayleigh() {
        for seed in 0..200 {
            let t = random_tree(seed, 1 + seed as usize % 7, 3);
            let env = sample_environment(&t, &IncrementLaw::gaussian(0.0, 1.0).unwrap(), seed);
            let c = effective_conductance(&t, &env);
            let (b, cut) = bottleneck_bound(&t, &env).unwrap();
            assert!(cut.is_cutset_of(&t));
            assert!(c <= b * (1.0 + 1e-12));
            let v = 1 + (seed as usize * 7919) % (t.len() - 1);
            let bigger = env.with_edge(v, env.log(v) + 0.5);
            assert!(effective_conductance(&t, &bigger) >= c * (1.0 - 1e-14));
        }
    }

    #[test]
    fn zero_drift_binary_limit() {
        for n in [1, 2, 4, 10, 16] {
            let t = ExplicitTree::full(2, n);
            let c = effective_conductance(&t, &ConductanceMap::uniform(&t));
            // level i contributes resistance 2^{-i}
            let expected = 1.0 / (1..=n).map(|i| 0.5f64.powi(i as i32)).sum::<f64>();
            assert!((c - expected).abs() < 1e-12 * expected, "{n}: {c} vs {expected}");
        }
    }
}
