//! Survival probabilities of target percolation.

use num::{BigRational, Zero};
use serde::Serialize;

use super::target::{compile, Table, TargetSet};
use crate::error::{Error, Result};
use crate::law::IncrementLaw;
use crate::scalar::{ratio, rational_to_f64, serialize_rational_opt, serialize_rationals_opt, Scalar};
use crate::tree::{ExplicitTree, GrowthProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactDp,
    Psi,
    Mc,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurvivalReport {
    pub survival: f64,
    #[serde(serialize_with = "serialize_rational_opt")]
    pub survival_exact: Option<BigRational>,
    /// `p(B; n)` for `n = 1..=N`.
    pub marginals: Vec<f64>,
    #[serde(serialize_with = "serialize_rationals_opt")]
    pub marginals_exact: Option<Vec<BigRational>>,
    pub method: Method,
}

/// Exact arithmetic first; floats when the law or target is not rational.
pub(crate) fn exact_or_float<T>(
    exact: impl FnOnce() -> Result<T>,
    float: impl FnOnce() -> Result<T>,
) -> Result<T> {
    match exact() {
        Err(Error::NotExact(_)) | Err(Error::StateSpaceTooLarge { .. }) => float(),
        other => other,
    }
}

/// Probability that no surviving path from a child at level `k + 1` reaches
/// the bottom, given the parent's state index `i` at level `k`.
fn child_failure<S: Scalar>(table: &Table<S>, k: usize, i: usize, below: &[S]) -> S {
    let row = &table.rows[k][i];
    row.alive
        .iter()
        .fold(row.dead.clone(), |acc, (j, p)| acc + p.clone() * below[*j as usize].clone())
}

/// `P(ρ ↛ ∂Γ)` by the leaf-up recursion over the explicit tree.
pub(crate) fn failure_on_tree<S: Scalar>(tree: &ExplicitTree, table: &Table<S>) -> S {
    let n = tree.depth();
    // values for the level below, one vector per vertex
    let mut below: Vec<Vec<S>> = Vec::new();
    for d in (1..=n).rev() {
        let next_start = if d < n { tree.level(d + 1).start } else { 0 };
        let cur: Vec<Vec<S>> = tree
            .level(d)
            .map(|v| {
                if d == n {
                    return vec![S::zero(); table.states[d].len()];
                }
                (0..table.states[d].len())
                    .map(|i| {
                        tree.children(v).fold(S::one(), |acc, c| {
                            acc * child_failure(table, d, i, &below[c - next_start])
                        })
                    })
                    .collect()
            })
            .collect();
        below = cur;
    }
    if n == 0 {
        return S::zero();
    }
    let first = tree.level(1).start;
    tree.children(tree.root())
        .fold(S::one(), |acc, c| acc * child_failure(table, 0, 0, &below[c - first]))
}

/// Mass alive after each level: `p(B; 1), .., p(B; N)`.
pub(crate) fn marginals_of<S: Scalar>(table: &Table<S>) -> Vec<S> {
    let mut dist = vec![S::one()];
    let mut out = Vec::with_capacity(table.depth());
    for k in 0..table.depth() {
        let mut next = vec![S::zero(); table.states[k + 1].len()];
        for (i, m) in dist.iter().enumerate() {
            for (j, p) in &table.rows[k][i].alive {
                let j = *j as usize;
                next[j] = next[j].clone() + m.clone() * p.clone();
            }
        }
        out.push(next.iter().cloned().fold(S::zero(), |a, b| a + b));
        dist = next;
    }
    out
}

/// `Ψ = G_0`, `G_N = 0`, `G_k = [E G_{k+1}(next)]^{f(k+1)}`.
pub(crate) fn psi_of<S: Scalar>(table: &Table<S>, profile: &GrowthProfile) -> Result<S> {
    let n = table.depth();
    if profile.len() < n {
        return Err(Error::InvalidProfile(format!("profile has {} levels, {n} needed", profile.len())));
    }
    let mut g = vec![S::zero(); table.states[n].len()];
    for k in (0..n).rev() {
        let exponent = &profile.factors()[k];
        g = (0..table.states[k].len())
            .map(|i| {
                child_failure(table, k, i, &g)
                    .pow_growth(exponent)
                    .ok_or_else(|| Error::NotExact("non-integer growth factor".into()))
            })
            .collect::<Result<_>>()?;
    }
    Ok(g.swap_remove(0))
}

fn survival_with<S: Scalar>(tree: &ExplicitTree, law: &IncrementLaw, target: &TargetSet) -> Result<(S, Vec<S>)> {
    let table = compile::<S>(target, law, tree.depth())?;
    let fail = failure_on_tree(tree, &table);
    Ok((S::one() - fail, marginals_of(&table)))
}

/// `P(B; ρ ↔ ∂Γ)` on an explicit tree of depth `N`.
pub fn survival_exact(tree: &ExplicitTree, law: &IncrementLaw, target: &TargetSet) -> Result<SurvivalReport> {
    exact_or_float(
        || {
            let (s, m) = survival_with::<BigRational>(tree, law, target)?;
            Ok(SurvivalReport {
                survival: rational_to_f64(&s),
                marginals: m.iter().map(rational_to_f64).collect(),
                survival_exact: Some(s),
                marginals_exact: Some(m),
                method: Method::ExactDp,
            })
        },
        || {
            let (s, m) = survival_with::<f64>(tree, law, target)?;
            Ok(SurvivalReport {
                survival: s,
                survival_exact: None,
                marginals: m,
                marginals_exact: None,
                method: Method::ExactDp,
            })
        },
    )
}

/// Non-survival `Ψ` on the (possibly virtual) symmetric tree with growth
/// factors `profile`, truncated at `depth`.
pub fn psi_symmetric(profile: &GrowthProfile, law: &IncrementLaw, target: &TargetSet, depth: usize) -> Result<f64> {
    Ok(psi_exact(profile, law, target, depth)?.map_or_else(
        || -> Result<f64> {
            let table = compile::<f64>(target, law, depth)?;
            psi_of(&table, profile)
        },
        |r| Ok(rational_to_f64(&r)),
    )?)
}

/// `Ψ` as an exact rational when the profile is integral and the law and
/// target are rational.
pub fn psi_exact(
    profile: &GrowthProfile,
    law: &IncrementLaw,
    target: &TargetSet,
    depth: usize,
) -> Result<Option<BigRational>> {
    if !profile.truncate(depth.min(profile.len())).is_integral() {
        return Ok(None);
    }
    exact_or_float(
        || {
            let table = compile::<BigRational>(target, law, depth)?;
            psi_of(&table, profile).map(Some)
        },
        || Ok(None),
    )
}

/// Survival on a symmetric profile, reported like [`survival_exact`].
pub fn survival_symmetric(
    profile: &GrowthProfile,
    law: &IncrementLaw,
    target: &TargetSet,
    depth: usize,
) -> Result<SurvivalReport> {
    let psi = psi_symmetric(profile, law, target, depth)?;
    let exact = psi_exact(profile, law, target, depth)?;
    let m = marginals(law, target, depth)?;
    Ok(SurvivalReport {
        survival: 1.0 - psi,
        survival_exact: exact.map(|p| BigRational::from_integer(1.into()) - p),
        marginals: m.floats,
        marginals_exact: m.exact,
        method: Method::Psi,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Marginals {
    pub floats: Vec<f64>,
    pub exact: Option<Vec<BigRational>>,
}

/// `p(B; n)` for `n = 1..=N`.
pub fn marginals(law: &IncrementLaw, target: &TargetSet, n: usize) -> Result<Marginals> {
    exact_or_float(
        || {
            let m = marginals_of(&compile::<BigRational>(target, law, n)?);
            Ok(Marginals { floats: m.iter().map(rational_to_f64).collect(), exact: Some(m) })
        },
        || {
            Ok(Marginals {
                floats: marginals_of(&compile::<f64>(target, law, n)?),
                exact: None,
            })
        },
    )
}

/// The product target `S(B)` with retention `q_i = p(B;i) / p(B;i-1)`.
pub fn symmetrize_target(law: &IncrementLaw, target: &TargetSet, n: usize) -> Result<TargetSet> {
    if let TargetSet::Box { q } = target {
        return Ok(TargetSet::Box { q: q[..n.min(q.len())].to_vec() });
    }
    let m = marginals(law, target, n)?;
    let exact = match m.exact {
        Some(e) => e,
        None => m
            .floats
            .iter()
            .map(|x| BigRational::from_float(*x).unwrap_or_else(|| ratio(0, 1)))
            .collect(),
    };
    let mut q = Vec::with_capacity(n);
    let mut prev = BigRational::from_integer(1.into());
    for (k, p) in exact.into_iter().enumerate() {
        if p.is_zero() {
            return Err(Error::ZeroMarginal(k + 1));
        }
        q.push(&p / &prev);
        prev = p;
    }
    Ok(TargetSet::Box { q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::Lattice;
    use crate::walk1d::{dp_stay_above, BoundaryFn};

    fn rad() -> IncrementLaw {
        IncrementLaw::rademacher()
    }

    #[test]
    fn small_examples() {
        let b0 = TargetSet::nonnegative_sums();
        let r = survival_exact(&ExplicitTree::path(2), &rad(), &b0).unwrap();
        assert_eq!(r.survival_exact, Some(ratio(1, 2)));
        let r = survival_exact(&ExplicitTree::full(2, 1), &rad(), &b0).unwrap();
        assert_eq!(r.survival_exact, Some(ratio(3, 4)));
        let f = GrowthProfile::from_integers(&[2, 2]).unwrap();
        assert_eq!(psi_exact(&f, &rad(), &b0, 2).unwrap(), Some(ratio(1, 4)));
        let r = survival_exact(&ExplicitTree::full(2, 2), &rad(), &b0).unwrap();
        assert_eq!(r.survival_exact, Some(ratio(3, 4)));
    }

    #[test]
    fn counterexample_survival() {
        let eps = ratio(1, 100);
        let t = ExplicitTree::from_levels(&[vec![1], vec![2], vec![2, 1]]).unwrap();
        let b = TargetSet::counterexample(&eps).unwrap();
        let r = survival_exact(&t, &IncrementLaw::Uniform01, &b).unwrap();
        let one = ratio(1, 1);
        let expected = &one - ratio(2, 1) * &eps * &eps - ratio(32, 1) * &eps * &eps * &eps;
        assert_eq!(r.survival_exact, Some(expected.clone()));
        assert_eq!(expected, ratio(124_971, 125_000));
        let m = r.marginals_exact.unwrap();
        assert_eq!(m, vec![one.clone(), &one - &eps, &one - ratio(3, 1) * &eps]);
        let s = symmetrize_target(&IncrementLaw::Uniform01, &b, 3).unwrap();
        let third = (&one - ratio(3, 1) * &eps) / (&one - &eps);
        assert_eq!(s, TargetSet::Box { q: vec![one.clone(), &one - &eps, third] });
        // virtual profile (1, 2, 3/2)
        let profile = t.symmetrize();
        assert!(!profile.is_integral());
        let psi = psi_symmetric(&profile, &IncrementLaw::Uniform01, &b, 3).unwrap();
        assert!(1.0 - psi >= rational_to_f64(&expected) - 1e-12);
    }

    #[test]
    fn ballot_marginals() {
        let m = marginals(&rad(), &TargetSet::nonnegative_sums(), 4).unwrap();
        assert_eq!(m.exact.unwrap(), vec![ratio(1, 2), ratio(1, 2), ratio(3, 8), ratio(3, 8)]);
        let s = symmetrize_target(&rad(), &TargetSet::nonnegative_sums(), 3).unwrap();
        assert_eq!(s, TargetSet::Box { q: vec![ratio(1, 2), ratio(1, 1), ratio(3, 4)] });
        let bx = TargetSet::Box { q: vec![ratio(1, 3), ratio(1, 2)] };
        assert_eq!(symmetrize_target(&rad(), &bx, 2).unwrap(), bx);
        let m = marginals(&rad(), &bx, 2).unwrap();
        assert_eq!(m.exact.unwrap(), vec![ratio(1, 3), ratio(1, 6)]);
    }

    #[test]
    fn path_matches_walk_dp() {
        let lat = Lattice::exact(1.0, vec![-1, 0, 2], vec![ratio(1, 2), ratio(1, 4), ratio(1, 4)]).unwrap();
        let law = IncrementLaw::Lattice(lat.clone());
        let f = BoundaryFn::Power { a: 0.5, b: 0.5 };
        for n in 2..=12 {
            let target = TargetSet::HalfSpaceFrom { f: f.clone(), n_f: 2 };
            let r = survival_exact(&ExplicitTree::path(n), &law, &target).unwrap();
            let dp = dp_stay_above(&lat, &f, 2, n, 12.0).unwrap();
            assert!((r.survival - dp.mid()).abs() < 1e-12, "n = {n}: {} vs {dp:?}", r.survival);
        }
    }

    #[test]
    fn float_and_exact_agree() {
        let t = ExplicitTree::galton_watson(&[1.0, 1.0, 1.0], 5, 9).unwrap();
        let target: TargetSet = "band:-1,-1,0,0,-2;2,3,3,inf,inf".parse().unwrap();
        let exact = survival_exact(&t, &rad(), &target).unwrap();
        let (f, _) = survival_with::<f64>(&t, &rad(), &target).unwrap();
        assert!((exact.survival - f).abs() < 1e-14);
        assert!(exact.survival_exact.is_some());
        let gauss = IncrementLaw::gaussian(0.0, 1.0).unwrap();
        let q = gauss.quantize(32).unwrap();
        let r = survival_exact(&t, &IncrementLaw::Lattice(q), &TargetSet::nonnegative_sums()).unwrap();
        assert!(r.survival_exact.is_none() && r.survival > 0.0 && r.survival < 1.0);
    }
}
