//! Pair correlations, moment-method bounds, TP2 and convexity checks.

use num::BigRational;
use rand::Rng;
use serde::Serialize;

use super::survival::exact_or_float;
use super::target::{compile, Table, TargetSet};
use crate::error::{Error, Result};
use crate::gauge::{capacity_network, hausdorff_content, Gauge};
use crate::law::IncrementLaw;
use crate::par;
use crate::rng::CounterRng;
use crate::scalar::{rational_to_f64, Scalar};
use crate::tree::{Cutset, ExplicitTree};

/// `T[i] = P(levels k+1..n survive | state i at level k)` for every `k <= n`.
fn tails<S: Scalar>(table: &Table<S>, n: usize) -> Vec<Vec<S>> {
    let mut out = vec![Vec::new(); n + 1];
    out[n] = vec![S::one(); table.states[n].len()];
    for k in (0..n).rev() {
        out[k] = table.rows[k]
            .iter()
            .map(|row| {
                row.alive
                    .iter()
                    .fold(S::zero(), |acc, (j, p)| acc + p.clone() * out[k + 1][*j as usize].clone())
            })
            .collect();
    }
    out
}

/// Law of the state after `k` levels on the surviving event.
fn forward<S: Scalar>(table: &Table<S>, k: usize) -> Vec<S> {
    let mut dist = vec![S::one()];
    for level in 0..k {
        let mut next = vec![S::zero(); table.states[level + 1].len()];
        for (i, m) in dist.iter().enumerate() {
            for (j, p) in &table.rows[level][i].alive {
                let j = *j as usize;
                next[j] = next[j].clone() + m.clone() * p.clone();
            }
        }
        dist = next;
    }
    dist
}

fn joint_of<S: Scalar>(table: &Table<S>, n: usize, k: usize) -> (S, S) {
    let t = tails(table, n);
    let spine = forward(table, k);
    let joint = spine
        .iter()
        .zip(&t[k])
        .fold(S::zero(), |acc, (m, tail)| acc + m.clone() * tail.clone() * tail.clone());
    let p = t[0][0].clone();
    (joint, p)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairSurvival {
    pub joint: f64,
    pub p_n: f64,
    /// `joint / p(n)²`
    pub ratio: f64,
    #[serde(serialize_with = "crate::scalar::serialize_rational_opt")]
    pub joint_exact: Option<BigRational>,
}

/// `P(ρ ↔ σ and ρ ↔ τ)` for `|σ| = |τ| = n`, `|σ ∧ τ| = k`.
pub fn pair_survival(law: &IncrementLaw, target: &TargetSet, n: usize, k: usize) -> Result<PairSurvival> {
    if k > n {
        return Err(Error::param("k", format!("meet depth {k} exceeds n = {n}")));
    }
    exact_or_float(
        || {
            let table = compile::<BigRational>(target, law, n)?;
            let (j, p) = joint_of(&table, n, k);
            let (jf, pf) = (rational_to_f64(&j), rational_to_f64(&p));
            Ok(PairSurvival { joint: jf, p_n: pf, ratio: rational_to_f64(&(&j / (&p * &p))), joint_exact: Some(j) })
        },
        || {
            let table = compile::<f64>(target, law, n)?;
            let (j, p) = joint_of(&table, n, k);
            Ok(PairSurvival { joint: j, p_n: p, ratio: j / (p * p), joint_exact: None })
        },
    )
}

/// Every `P(ρ ↔ σ, ρ ↔ τ)` with `|σ| = |τ| = n <= depth`, indexed `[n][k]`,
/// together with `p(n)` (index 0 holds `p(0) = 1`).
pub fn pair_table(law: &IncrementLaw, target: &TargetSet, depth: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let table = compile::<f64>(target, law, depth)?;
    let mut joint = vec![vec![1.0]];
    let mut p = vec![1.0];
    for n in 1..=depth {
        let t = tails(&table, n);
        let row = (0..=n)
            .map(|k| {
                forward(&table, k)
                    .iter()
                    .zip(&t[k])
                    .map(|(m, tail)| m * tail * tail)
                    .sum()
            })
            .collect();
        p.push(t[0][0]);
        joint.push(row);
    }
    Ok((joint, p))
}

/// The largest nonincreasing `g` with `g(0) = 1` and
/// `P(ρ ↔ σ, ρ ↔ τ) <= p(n)² / g(k)` on all levels up to `depth`.
pub fn certified_gauge(law: &IncrementLaw, target: &TargetSet, depth: usize) -> Result<Vec<f64>> {
    let (joint, p) = pair_table(law, target, depth)?;
    if let Some(n) = p.iter().position(|x| *x <= 0.0) {
        return Err(Error::ZeroMarginal(n));
    }
    let mut g = vec![f64::INFINITY; depth + 1];
    for n in 0..=depth {
        for k in 0..=n {
            if joint[n][k] > 0.0 {
                g[k] = g[k].min(p[n] * p[n] / joint[n][k]);
            }
        }
    }
    g[0] = g[0].min(1.0);
    for k in 1..=depth {
        g[k] = g[k].min(g[k - 1]);
    }
    Ok(g)
}

/// The smallest `M` with `P(ρ ↔ σ, ρ ↔ τ) <= M·p(n)² / p(k)` up to `depth`.
pub fn quasi_bernoulli_constant(law: &IncrementLaw, target: &TargetSet, depth: usize) -> Result<f64> {
    let (joint, p) = pair_table(law, target, depth)?;
    let mut m: f64 = 0.0;
    for n in 1..=depth {
        for k in 0..=n {
            if p[n] > 0.0 {
                m = m.max(joint[n][k] * p[k] / (p[n] * p[n]));
            }
        }
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentBounds {
    /// Hausdorff content in the gauge `p`.
    pub first_moment_upper: f64,
    #[serde(skip)]
    pub cutset: Cutset,
    /// `Cap_g`.
    pub second_moment_lower: f64,
}

/// `Cap_g(Γ) <= P(ρ ↔ ∂Γ) <= content_p(Γ)` where `p[k-1] = p(k)`; the
/// content here also admits the root cutset.
pub fn moment_bounds(tree: &ExplicitTree, p: &[f64], g: &Gauge) -> Result<MomentBounds> {
    if p.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::param("p", "must be positive"));
    }
    let (mut upper, mut cutset) = hausdorff_content(tree, &Gauge::Tabulated(p.to_vec()), 1)?;
    // the root alone is a cutset of weight p(0) = 1
    if upper > 1.0 {
        upper = 1.0;
        cutset = Cutset::new(tree, [tree.root()])?;
    }
    Ok(MomentBounds {
        first_moment_upper: upper,
        cutset,
        second_moment_lower: capacity_network(tree, g)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tp2Witness {
    /// Coordinate index `k` (1-based) whose rows are compared.
    pub level: usize,
    /// Tracked state of the prefix `x_1..x_{k-1}`.
    pub prefix_state: i64,
    /// Coordinate values (or cell upper ends) of the rows `x < y`.
    pub rows: (f64, f64),
    /// Columns `i < j`.
    pub columns: (usize, usize),
    /// `M_{xi} M_{yj}` and `M_{yi} M_{xj}`.
    pub products: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tp2Report {
    pub holds: bool,
    pub witness: Option<Tp2Witness>,
    pub prefixes_checked: usize,
}

fn tp2_with<S: Scalar>(table: &Table<S>, n: usize) -> Tp2Report {
    let tol = if S::EXACT { S::zero() } else { S::from_f64(1e-12) };
    // surv[k][i][j - k]: P(survive to level j | state i at level k)
    let surv: Vec<Vec<Vec<S>>> = (0..=n)
        .map(|k| {
            (0..table.states[k].len())
                .map(|i| {
                    let mut dist = vec![(i, S::one())];
                    let mut out = vec![S::one()];
                    for level in k..n {
                        let mut next: Vec<S> = vec![S::zero(); table.states[level + 1].len()];
                        for (s, m) in &dist {
                            for (j, p) in &table.rows[level][*s].alive {
                                let j = *j as usize;
                                next[j] = next[j].clone() + m.clone() * p.clone();
                            }
                        }
                        dist = next
                            .into_iter()
                            .enumerate()
                            .filter(|(_, m)| m > &S::zero())
                            .collect();
                        out.push(dist.iter().fold(S::zero(), |a, (_, m)| a + m.clone()));
                    }
                    out
                })
                .collect()
        })
        .collect();
    let mut checked = 0;
    for k in 1..=n {
        for (si, &state) in table.states[k - 1].iter().enumerate() {
            checked += 1;
            // rows indexed by coordinate symbol, columns j = k..=n
            let rows: Vec<(f64, Vec<S>)> = table.symbols[k - 1][si]
                .iter()
                .map(|(order, _, next)| {
                    let entries = match next {
                        Some(j) => surv[k][*j as usize].clone(),
                        None => vec![S::zero(); n - k + 1],
                    };
                    (*order, entries)
                })
                .collect();
            for x in 0..rows.len() {
                for y in x + 1..rows.len() {
                    for i in 0..=n - k {
                        for j in i + 1..=n - k {
                            let lhs = rows[x].1[i].clone() * rows[y].1[j].clone();
                            let rhs = rows[y].1[i].clone() * rows[x].1[j].clone();
                            if lhs.clone() + tol.clone() < rhs {
                                return Tp2Report {
                                    holds: false,
                                    witness: Some(Tp2Witness {
                                        level: k,
                                        prefix_state: state,
                                        rows: (rows[x].0, rows[y].0),
                                        columns: (k + i, k + j),
                                        products: (lhs.to_float(), rhs.to_float()),
                                    }),
                                    prefixes_checked: checked,
                                };
                            }
                        }
                    }
                }
            }
        }
    }
    Tp2Report { holds: true, witness: None, prefixes_checked: checked }
}

/// Total positivity of order two of `(y, j) ↦ p_j(x_1, .., x_{k-1}, y)` for
/// every level `k` and every reachable prefix (prefixes with the same
/// tracked state give the same matrix, so the check is exhaustive).
pub fn tp2_check(law: &IncrementLaw, target: &TargetSet, n: usize) -> Result<Tp2Report> {
    exact_or_float(
        || Ok(tp2_with(&compile::<BigRational>(target, law, n)?, n)),
        || Ok(tp2_with(&compile::<f64>(target, law, n)?, n)),
    )
}

/// `h(z) = P(S(B); ρ ↛ Γ_n)` for the product target with `p(B; k) = z_k`.
pub fn h_symmetric(factors: &[f64], z: &[f64]) -> f64 {
    let mut g = 0.0;
    for k in (0..z.len()).rev() {
        let prev = if k == 0 { 1.0 } else { z[k - 1] };
        let q = if prev > 0.0 { z[k] / prev } else { 0.0 };
        let base: f64 = (1.0 - q) + q * g;
        g = base.powf(factors[k]);
    }
    g
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexityProbe {
    pub trials: usize,
    pub violations: usize,
    /// Largest `h(mid) - (h(z) + h(w))/2` seen.
    pub worst_excess: f64,
}

fn ordered_point(rng: &mut CounterRng, n: usize) -> Vec<f64> {
    let mut z: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    z.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    z
}

/// Midpoint convexity of `h` on `1 >= z_1 >= .. >= z_n >= 0`.
pub fn h_convexity_probe(factors: &[f64], trials: usize, seed: u64) -> Result<ConvexityProbe> {
    let n = factors.len();
    if n == 0 || n > 8 {
        return Err(Error::param("profile", "need 1..=8 levels"));
    }
    if factors.iter().any(|f| !(*f > 0.0)) {
        return Err(Error::param("profile", "growth factors must be positive"));
    }
    let excess = par::map_indexed(trials, |t| {
        let mut rng = CounterRng::new(seed, t as u64);
        let z = ordered_point(&mut rng, n);
        let w = ordered_point(&mut rng, n);
        let mid: Vec<f64> = z.iter().zip(&w).map(|(a, b)| 0.5 * (a + b)).collect();
        h_symmetric(factors, &mid) - 0.5 * (h_symmetric(factors, &z) + h_symmetric(factors, &w))
    });
    Ok(ConvexityProbe {
        trials,
        violations: excess.iter().filter(|e| **e > 1e-12).count(),
        worst_excess: excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::percolation::survival::{marginals, survival_exact};
    use crate::scalar::ratio;

    fn rad() -> IncrementLaw {
        IncrementLaw::rademacher()
    }

    #[test]
    fn pair_examples() {
        let b0 = TargetSet::nonnegative_sums();
        let r = pair_survival(&rad(), &b0, 2, 0).unwrap();
        assert_eq!(r.joint_exact, Some(ratio(1, 4)));
        assert_eq!(r.ratio, 1.0);
        let r = pair_survival(&rad(), &b0, 2, 1).unwrap();
        assert_eq!(r.joint_exact, Some(ratio(1, 2)));
        assert_eq!(r.ratio, 2.0);
        for k in [1usize, 4, 16] {
            let r = pair_survival(&rad(), &b0, 64, k).unwrap();
            let shape = r.joint * 64.0 / (k as f64).sqrt();
            assert!((0.1..=10.0).contains(&shape), "k = {k}: {shape}");
        }
    }

    #[test]
    fn pair_table_matches_single_queries() {
        let b0 = TargetSet::nonnegative_sums();
        let (joint, p) = pair_table(&rad(), &b0, 6).unwrap();
        for n in 1..=6 {
            for k in 0..=n {
                let r = pair_survival(&rad(), &b0, n, k).unwrap();
                assert!((r.joint - joint[n][k]).abs() < 1e-15);
            }
            assert!((joint[n][n] - p[n]).abs() < 1e-15);
        }
    }

    #[test]
    fn bernoulli_bounds() {
        let tree = ExplicitTree::full(2, 8);
        let q = ratio(3, 4);
        let target = TargetSet::Box { q: vec![q; 8] };
        let p = marginals(&rad(), &target, 8).unwrap().floats;
        let surv = survival_exact(&tree, &rad(), &target).unwrap().survival;
        let b = moment_bounds(&tree, &p, &Gauge::Tabulated(p.clone())).unwrap();
        assert!(b.second_moment_lower <= surv && surv <= b.first_moment_upper, "{b:?} {surv}");
        let g = certified_gauge(&rad(), &target, 8).unwrap();
        for k in 0..=8 {
            let pk = if k == 0 { 1.0 } else { p[k - 1] };
            assert!((g[k] - pk).abs() < 1e-12);
        }
        let one = TargetSet::Box { q: vec![ratio(1, 1); 8] };
        let b = moment_bounds(&tree, &[1.0; 8], &Gauge::Tabulated(vec![1.0; 8])).unwrap();
        assert_eq!(survival_exact(&tree, &rad(), &one).unwrap().survival, 1.0);
        assert_eq!(b.first_moment_upper, 1.0);
    }

    #[test]
    fn rademacher_second_moment() {
        let tree = ExplicitTree::full(2, 8);
        let b0 = TargetSet::nonnegative_sums();
        let surv = survival_exact(&tree, &rad(), &b0).unwrap().survival;
        let g = certified_gauge(&rad(), &b0, 8).unwrap();
        let cap = capacity_network(&tree, &Gauge::Tabulated(g[1..].to_vec())).unwrap();
        assert!(cap <= surv);
        let m = quasi_bernoulli_constant(&rad(), &b0, 8).unwrap();
        let p = marginals(&rad(), &b0, 8).unwrap().floats;
        let g_qb: Vec<f64> = p.iter().map(|x| x / m).collect();
        let cap_qb = capacity_network(&tree, &Gauge::Tabulated(g_qb.iter().map(|x| x.min(1.0 / m)).collect()));
        assert!(m >= 1.0);
        if let Ok(c) = cap_qb {
            assert!(c <= surv + 1e-12);
        }
    }

    #[test]
    fn tp2_examples() {
        assert!(tp2_check(&rad(), &TargetSet::nonnegative_sums(), 8).unwrap().holds);
        let bx = TargetSet::Box { q: vec![ratio(1, 2), ratio(2, 3), ratio(1, 5)] };
        assert!(tp2_check(&rad(), &bx, 3).unwrap().holds);
        let c = TargetSet::counterexample(&ratio(1, 100)).unwrap();
        let r = tp2_check(&IncrementLaw::Uniform01, &c, 3).unwrap();
        assert!(!r.holds);
        let w = r.witness.unwrap();
        assert_eq!(w.level, 1);
        assert!(w.products.0 < w.products.1);
    }

    #[test]
    fn convexity_examples() {
        let one = h_convexity_probe(&[3.0], 1000, 1).unwrap();
        assert_eq!(one.violations, 0);
        let bin = h_convexity_probe(&[2.0; 4], 10_000, 2).unwrap();
        assert_eq!(bin.violations, 0);
        let z = [0.8, 0.5];
        // h for a depth-1 tree with |Γ_1| = 3
        assert!((h_symmetric(&[3.0], &[0.4]) - 0.6f64.powi(3)).abs() < 1e-15);
        assert!(h_symmetric(&[1.0, 0.5], &z) > 0.0);
        assert!(h_convexity_probe(&[1.0, 0.5], 1000, 3).is_ok());
    }
}
