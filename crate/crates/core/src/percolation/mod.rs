//! Target percolation on trees: each vertex `σ` carries an independent
//! coordinate `X(σ)` and is open when the path of coordinates from the root
//! lies in the target set.

mod bounds;
mod chain;
mod survival;
mod target;

pub use bounds::{
    certified_gauge, h_convexity_probe, h_symmetric, moment_bounds, pair_survival, pair_table,
    quasi_bernoulli_constant, tp2_check, ConvexityProbe, MomentBounds, PairSurvival, Tp2Report, Tp2Witness,
};
pub use chain::{counterexample, counterexample_tree, theorem42_chain, ChainRecord, CounterexampleReport, CHAIN_TOLERANCE};
pub use survival::{
    marginals, psi_exact, psi_symmetric, survival_exact, survival_symmetric, symmetrize_target, Marginals, Method,
    SurvivalReport,
};
pub use target::{Interval, TargetSet, STATE_BUDGET};
