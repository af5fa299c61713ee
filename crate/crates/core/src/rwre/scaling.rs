//! Effective conductance to level `N` across many environments.
//!
//! The tree is never materialized. A depth-first pass draws each label from
//! stream `(seed, v)` with `v` the breadth-first id the vertex would have in
//! [`ExplicitTree::symmetric`](crate::tree::ExplicitTree::symmetric), so every
//! environment is the one [`crate::network::sample_environment`] would build.
//!
//! For a vertex `v` let `g_N(v)` be the conductance from `v` down to level `N`
//! divided by the conductance of the edge into `v`. Then
//! `g_N(v) = Σ_c e^{X(c)} g_N(c) / (1 + g_N(c))` with `g_N = ∞` at level `N`,
//! and the root value is the effective conductance itself. All grid depths
//! are carried through the same pass.

use serde::Serialize;
use statrs::statistics::{Data, OrderStatistics};

use crate::error::{Error, Result};
use crate::law::IncrementLaw;
use crate::par;
use crate::rng::CounterRng;

/// Maximum number of depths in one scaling run.
pub const MAX_GRID: usize = 16;
/// Vertex budget per environment.
pub const VERTEX_BUDGET: usize = 50_000_000;

/// Growth factors with `|Γ_n| = 2^{⌊γ log2(n+1)⌋}`, so `|Γ_n| = Θ(n^γ)` with
/// every factor a power of two.
pub fn power_growth(gamma: f64, depth: usize) -> Result<Vec<usize>> {
    if !(gamma >= 0.0) || gamma > 8.0 {
        return Err(Error::param("gamma", format!("must lie in [0, 8], got {gamma}")));
    }
    let exp = |n: usize| (gamma * ((n + 1) as f64).log2() + 1e-12).floor() as u32;
    Ok((1..=depth).map(|n| 1usize << (exp(n) - exp(n - 1))).collect())
}

pub fn level_sizes(growth: &[usize]) -> Vec<usize> {
    let mut sizes = vec![1usize];
    for &f in growth {
        sizes.push(sizes.last().expect("nonempty").saturating_mul(f));
    }
    sizes
}

/// Effective conductance and escape probability for one environment at each
/// depth in `depths` (sorted, distinct, all `<= growth.len()`).
pub fn scaling_environment(growth: &[usize], law: &IncrementLaw, depths: &[usize], seed: u64) -> Vec<(f64, f64)> {
    let sizes = level_sizes(growth);
    let mut starts = vec![0usize];
    for s in &sizes {
        starts.push(starts.last().expect("nonempty") + s);
    }
    let walker = Walker { growth, law, depths, seed, starts: &starts, bottom: *depths.last().expect("nonempty") };
    let mut root_sum = [0.0; MAX_GRID];
    let mut total = 0.0;
    for j in 0..growth[0] {
        let id = 1 + j;
        let (ex, g) = walker.visit(1, j, id);
        total += ex;
        for (k, slot) in root_sum.iter_mut().enumerate().take(depths.len()) {
            *slot += ex * ratio(g[k]);
        }
    }
    (0..depths.len()).map(|k| (root_sum[k], (root_sum[k] / total).min(1.0))).collect()
}

// g / (1 + g) with g = ∞ at the bottom level
fn ratio(g: f64) -> f64 {
    if g.is_infinite() {
        1.0
    } else {
        g / (1.0 + g)
    }
}

struct Walker<'a> {
    growth: &'a [usize],
    law: &'a IncrementLaw,
    depths: &'a [usize],
    seed: u64,
    starts: &'a [usize],
    bottom: usize,
}

impl Walker<'_> {
    /// Returns `(e^{X(v)}, g_N(v) for each grid depth)` for the vertex at
    /// `depth` with in-level index `index` and breadth-first id `id`.
    fn visit(&self, depth: usize, index: usize, id: usize) -> (f64, [f64; MAX_GRID]) {
        let ex = self.law.sample(&mut CounterRng::new(self.seed, id as u64)).exp();
        let mut g = [0.0; MAX_GRID];
        for (k, &n) in self.depths.iter().enumerate() {
            if n == depth {
                g[k] = f64::INFINITY;
            }
        }
        if depth < self.bottom {
            let f = self.growth[depth];
            for j in 0..f {
                let ci = index * f + j;
                let (cx, cg) = self.visit(depth + 1, ci, self.starts[depth + 1] + ci);
                for (k, &n) in self.depths.iter().enumerate() {
                    if n > depth {
                        g[k] += cx * ratio(cg[k]);
                    }
                }
            }
        }
        (ex, g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingVerdict {
    TransientLike,
    RecurrentLike,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub depth: usize,
    pub vertices: usize,
    pub conductance_q1: f64,
    pub conductance_median: f64,
    pub conductance_q3: f64,
    pub escape_q1: f64,
    pub escape_median: f64,
    pub escape_q3: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Median conductance at the largest depth over the median at the smallest.
    pub median_ratio: f64,
    pub verdict: ScalingVerdict,
    /// `conductances[e][k]` for environment `e` and grid depth `k`.
    #[serde(skip)]
    pub conductances: Vec<Vec<f64>>,
}

/// Ratio thresholds for the verdict.
pub const TRANSIENT_RATIO: f64 = 0.25;
pub const RECURRENT_RATIO: f64 = 0.05;

fn quartiles(values: Vec<f64>) -> (f64, f64, f64) {
    let mut d = Data::new(values);
    (d.lower_quartile(), d.median(), d.upper_quartile())
}

/// Exact effective conductance of `environments` sampled environments on the
/// symmetric tree with the given growth, at each depth of the grid.
/// Environment `e` uses seed `derive_seed(seed, e)`.
pub fn conductance_scaling_mc(
    growth: &[usize],
    law: &IncrementLaw,
    depths: &[usize],
    environments: usize,
    seed: u64,
) -> Result<ScalingReport> {
    if depths.is_empty() || depths.len() > MAX_GRID {
        return Err(Error::param("depths", format!("need 1 to {MAX_GRID} depths")));
    }
    if depths.windows(2).any(|w| w[0] >= w[1]) || depths[0] == 0 {
        return Err(Error::param("depths", "must be positive and strictly increasing"));
    }
    let bottom = *depths.last().expect("nonempty");
    if bottom > growth.len() {
        return Err(Error::param("depths", format!("deepest level {bottom} exceeds the profile length {}", growth.len())));
    }
    if growth.contains(&0) {
        return Err(Error::InvalidProfile("growth factors must be >= 1".into()));
    }
    if environments == 0 {
        return Err(Error::param("environments", "must be >= 1"));
    }
    let sizes = level_sizes(&growth[..bottom]);
    let vertices = sizes.iter().fold(0usize, |a, s| a.saturating_add(*s));
    if vertices > VERTEX_BUDGET {
        return Err(Error::StateSpaceTooLarge { estimate: vertices, budget: VERTEX_BUDGET });
    }
    let per_env = par::map_indexed(environments, |e| {
        scaling_environment(growth, law, depths, crate::rng::derive_seed(seed, e as u64))
    });
    let column = |k: usize, pick: fn(&(f64, f64)) -> f64| per_env.iter().map(|r| pick(&r[k])).collect::<Vec<_>>();
    let rows: Vec<ScalingRow> = depths
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let (c1, c2, c3) = quartiles(column(k, |r| r.0));
            let (e1, e2, e3) = quartiles(column(k, |r| r.1));
            ScalingRow {
                depth: n,
                vertices: sizes[..=n].iter().sum(),
                conductance_q1: c1,
                conductance_median: c2,
                conductance_q3: c3,
                escape_q1: e1,
                escape_median: e2,
                escape_q3: e3,
            }
        })
        .collect();
    let first = rows[0].conductance_median;
    let last = rows[rows.len() - 1].conductance_median;
    let median_ratio = last / first;
    let verdict = if median_ratio >= TRANSIENT_RATIO {
        ScalingVerdict::TransientLike
    } else if median_ratio <= RECURRENT_RATIO {
        ScalingVerdict::RecurrentLike
    } else {
        ScalingVerdict::Inconclusive
    };
    Ok(ScalingReport {
        rows,
        median_ratio,
        verdict,
        conductances: per_env.into_iter().map(|r| r.into_iter().map(|x| x.0).collect()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::Lattice;
    use crate::network::{effective_conductance, escape_probability, sample_environment};
    use crate::rng::derive_seed;
    use crate::tree::ExplicitTree;

    fn zero() -> IncrementLaw {
        IncrementLaw::Lattice(Lattice::constant(0.0))
    }

    #[test]
    fn binary_closed_form() {
        let r = conductance_scaling_mc(&[2; 8], &zero(), &[2, 4, 8], 5, 1).unwrap();
        for row in &r.rows {
            let n = row.depth as i32;
            let exact = 1.0 / (1.0 - 0.5f64.powi(n));
            assert!((row.conductance_median - exact).abs() < 1e-12, "{row:?}");
            assert_eq!(row.conductance_q1, row.conductance_q3);
        }
        assert!((r.rows[0].conductance_median - 4.0 / 3.0).abs() < 1e-14);
        assert!((r.rows[1].conductance_median - 16.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn matches_explicit_network() {
        let law = IncrementLaw::gaussian(0.0, 1.0).unwrap();
        for (growth, depths) in [(vec![2, 1, 3, 2], vec![1, 2, 4]), (vec![1, 1, 1, 1, 1], vec![3, 5]), (vec![3, 2, 2], vec![3])] {
            for e in 0..5u64 {
                let seed = derive_seed(9, e);
                let got = scaling_environment(&growth, &law, &depths, seed);
                for (k, &n) in depths.iter().enumerate() {
                    let tree = ExplicitTree::symmetric(&growth[..n], n).unwrap();
                    let cond = sample_environment(&tree, &law, seed);
                    let c = effective_conductance(&tree, &cond);
                    let p = escape_probability(&tree, &cond);
                    assert!((got[k].0 - c).abs() <= 1e-12 * c, "{growth:?} N={n}: {} vs {c}", got[k].0);
                    assert!((got[k].1 - p).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn path_is_gamblers_ruin() {
        let r = conductance_scaling_mc(&[1; 128], &zero(), &[4, 16, 128], 3, 0).unwrap();
        for row in &r.rows {
            assert!((row.conductance_median - 1.0 / row.depth as f64).abs() < 1e-14);
            assert!((row.escape_median - 1.0 / row.depth as f64).abs() < 1e-14);
        }
        // ratio 4/128 = 1/32
        assert_eq!(r.verdict, ScalingVerdict::RecurrentLike);
    }

    #[test]
    fn power_growth_sizes() {
        let g = power_growth(2.0, 255).unwrap();
        let sizes = level_sizes(&g);
        for (n, s) in sizes.iter().enumerate() {
            let target = ((n + 1) * (n + 1)) as f64;
            assert!(*s as f64 <= target && 2.0 * *s as f64 > target / 2.0, "n={n} size={s}");
        }
        assert_eq!(power_growth(0.0, 10).unwrap(), vec![1; 10]);
    }

    #[test]
    fn rejects_oversized_trees() {
        match conductance_scaling_mc(&[4; 20], &zero(), &[20], 1, 0) {
            Err(Error::StateSpaceTooLarge { estimate, .. }) => assert!(estimate > VERTEX_BUDGET),
            other => panic!("{other:?}"),
        }
        assert!(conductance_scaling_mc(&[2; 4], &zero(), &[4, 2], 1, 0).is_err());
        assert!(conductance_scaling_mc(&[2; 4], &zero(), &[5], 1, 0).is_err());
    }
}
