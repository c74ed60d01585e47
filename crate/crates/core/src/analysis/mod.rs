//! Audits of the quantitative estimates satisfied by solutions of the local
//! equation, and measurement of the constants entering them.

mod checks;
pub(crate) mod constants;
mod front;
mod interior_ball;
mod mollifier;
mod perimeter;
mod report;

pub use checks::{
    check_front_containment, check_lower_gradient_bound, check_solution_difference, gronwall_band_check,
    gronwall_band_inequality, increase_principle_check, initial_band_bound, kink_mask, l1_continuity_check,
    l1_continuity_modulus, max_jump, modulus_slope, perimeter_band_bound, superlevel_extent, REL_SLACK,
};
pub use constants::{
    band_semiconvexity, estimate_constants, estimate_eta, front_ball_measure, global_semiconvexity, measure_eta0,
    ConstantContext, EstimateConstants, ETA_SAFETY,
};
pub use front::front_radius;
pub use interior_ball::{
    boundary_nodes, fitted_interior_radius, interior_ball_construct, interior_ball_radius_bound,
    interior_ball_radius_check, interior_ball_semiconvexity_check, probe_boundary,
};
pub use mollifier::MollifiedIndicator;
pub use perimeter::{perimeter, superlevel_perimeter};
pub use report::{all_pass, to_csv, EstimateReport};
