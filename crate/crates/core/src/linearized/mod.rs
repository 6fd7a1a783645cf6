//! The linearized operator about `u_{eps,R}` solved mode by mode, the
//! quadratic remainder, and the flat-model interior fixed point.

pub mod budget;
pub mod bvp;
pub mod lemma32;
pub mod picard;
pub mod remainder;

pub use budget::ParameterBudget;
pub use bvp::{
    potential, profile_norm, solve_mode_bvp, source_norm, ModeOperators, ModeSolution, RadialBVP,
    RadialGrid,
};
pub use lemma32::{lambda_n, lemma32_check, Lemma32Report};
pub use picard::{lipschitz_check, picard_interior, LipschitzReport, PicardConfig, PicardReport};
pub use remainder::{q_closed_form, q_quadrature, q_remainder, QSample};
