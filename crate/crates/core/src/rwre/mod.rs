//! Walks in random and reinforced environments.

mod env;
mod reinforced;
mod scaling;
mod stable;

pub use env::{escape_mc, walk_episode, EpisodeOutcome, EpisodeTag, EscapeReport, LazyEnvironment, Shape};
pub use reinforced::{
    decode_sequence, dirichlet_exit_prob, equivalence_test, polya_sequence_prob, reinforced_episode, ChiSquare,
    EquivalenceReport, ReinforcedReport, UrnState, MAX_CELLS, SIGNIFICANCE,
};
pub use scaling::{
    conductance_scaling_mc, level_sizes, power_growth, scaling_environment, ScalingReport, ScalingRow,
    ScalingVerdict, MAX_GRID, RECURRENT_RATIO, TRANSIENT_RATIO, VERTEX_BUDGET,
};
pub use stable::{stable_ray_decay, stable_tail, StableReport, StableRow};
