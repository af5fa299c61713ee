//! Comparison of a tree and target with their symmetrizations.

use num::BigRational;
use serde::Serialize;

use super::survival::{marginals, psi_symmetric, survival_exact, symmetrize_target};
use super::target::TargetSet;
use crate::error::Result;
use crate::gauge::{rp_symmetric, Gauge};
use crate::law::IncrementLaw;
use crate::scalar::{ratio, serialize_rational, serialize_rational_opt, serialize_rationals_opt};
use crate::tree::ExplicitTree;

pub const CHAIN_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainRecord {
    /// `P(B; Γ)`
    pub p_b_tree: f64,
    /// `P(B; S(Γ))`
    pub p_b_sym: f64,
    /// `P(S(B); S(Γ))`
    pub p_sb_sym: f64,
    /// `2 / R_p` in the gauge `p(B; ·)`
    pub two_over_rp: f64,
    /// `P(S(B); Γ)` on the original tree
    pub p_sb_tree: f64,
    #[serde(serialize_with = "serialize_rational_opt")]
    pub p_b_tree_exact: Option<BigRational>,
    #[serde(serialize_with = "serialize_rational_opt")]
    pub p_sb_tree_exact: Option<BigRational>,
    pub marginals: Vec<f64>,
    #[serde(serialize_with = "serialize_rationals_opt")]
    pub marginals_exact: Option<Vec<BigRational>>,
    /// Each of the first four values is at most the next, within [`CHAIN_TOLERANCE`].
    pub chain_holds: bool,
    /// `P(S(B); Γ) < P(B; Γ)`: symmetrizing the target alone lowers survival.
    pub counterexample_to_swap: bool,
    /// The symmetrized tree has non-integer growth.
    #[serde(rename = "virtual")]
    pub is_virtual: bool,
}

pub fn theorem42_chain(tree: &ExplicitTree, law: &IncrementLaw, target: &TargetSet) -> Result<ChainRecord> {
    let n = tree.depth();
    let profile = tree.symmetrize();
    let sb = symmetrize_target(law, target, n)?;
    let b_tree = survival_exact(tree, law, target)?;
    let sb_tree = survival_exact(tree, law, &sb)?;
    let p_b_sym = 1.0 - psi_symmetric(&profile, law, target, n)?;
    let p_sb_sym = 1.0 - psi_symmetric(&profile, law, &sb, n)?;
    let m = marginals(law, target, n)?;
    let rp = rp_symmetric(&profile, &Gauge::Tabulated(m.floats.clone()))?;
    let chain = [b_tree.survival, p_b_sym, p_sb_sym, rp.bound];
    Ok(ChainRecord {
        p_b_tree: b_tree.survival,
        p_b_sym,
        p_sb_sym,
        two_over_rp: rp.bound,
        p_sb_tree: sb_tree.survival,
        chain_holds: chain.windows(2).all(|w| w[0] <= w[1] + CHAIN_TOLERANCE),
        counterexample_to_swap: match (&b_tree.survival_exact, &sb_tree.survival_exact) {
            (Some(b), Some(s)) => s < b,
            _ => sb_tree.survival < b_tree.survival - CHAIN_TOLERANCE,
        },
        p_b_tree_exact: b_tree.survival_exact,
        p_sb_tree_exact: sb_tree.survival_exact,
        marginals: m.floats,
        marginals_exact: m.exact,
        is_virtual: rp.is_virtual,
    })
}

/// The three-level tree whose root has one child, which has two children
/// with two and one children respectively.
pub fn counterexample_tree() -> ExplicitTree {
    ExplicitTree::from_levels(&[vec![1], vec![2], vec![2, 1]]).expect("valid tree")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterexampleReport {
    #[serde(serialize_with = "serialize_rational")]
    pub eps: BigRational,
    /// `P(B; Γ)` from the dynamic program.
    #[serde(serialize_with = "serialize_rational")]
    pub p_b: BigRational,
    /// `P(S(B); Γ)` from the dynamic program.
    #[serde(serialize_with = "serialize_rational")]
    pub p_sb: BigRational,
    /// `1 - 2ε² - 32ε³`
    #[serde(serialize_with = "serialize_rational")]
    pub p_b_closed_form: BigRational,
    /// `1 - 3ε² - 12ε³/(1-ε)`
    #[serde(serialize_with = "serialize_rational")]
    pub p_sb_closed_form: BigRational,
    pub p_b_float: f64,
    pub p_sb_float: f64,
    /// `P(S(B); Γ) < P(B; Γ)`
    pub swap_fails: bool,
    pub chain: ChainRecord,
}

pub fn counterexample(eps: &BigRational) -> Result<CounterexampleReport> {
    let target = TargetSet::counterexample(eps)?;
    let tree = counterexample_tree();
    let chain = theorem42_chain(&tree, &IncrementLaw::Uniform01, &target)?;
    let p_b = chain.p_b_tree_exact.clone().expect("uniform boxes are exact");
    let p_sb = chain.p_sb_tree_exact.clone().expect("uniform boxes are exact");
    let one = ratio(1, 1);
    let e2 = eps * eps;
    let e3 = &e2 * eps;
    let p_b_closed_form = &one - ratio(2, 1) * &e2 - ratio(32, 1) * &e3;
    let p_sb_closed_form = &one - ratio(3, 1) * &e2 - ratio(12, 1) * &e3 / (&one - eps);
    Ok(CounterexampleReport {
        eps: eps.clone(),
        p_b_float: chain.p_b_tree,
        p_sb_float: chain.p_sb_tree,
        swap_fails: p_sb < p_b,
        p_b,
        p_sb,
        p_b_closed_form,
        p_sb_closed_form,
        chain,
    })
}
