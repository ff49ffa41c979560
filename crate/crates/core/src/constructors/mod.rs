//! Stage two: building the transition matrix.

pub mod heuristic;
pub mod lp;
pub mod unfixed;

pub use heuristic::{
    adjust_pattern, compute_q, heuristic_constructor, heuristic_constructor_with_hook, select_column,
    ConstructorState, HeuristicOutput, Selector,
};
pub use lp::{lp_fixed_point_constructor, lp_unfixed_constructor, LP_MAX_N};
pub use unfixed::{unfixed_optimum_constructor, UnfixedOutput};
