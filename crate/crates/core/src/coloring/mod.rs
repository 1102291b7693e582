//! Lower-bound constructions: partial colorings, separating centers, grid
//! rounding, tiling and separation witnesses.

pub mod construction;
pub mod grid;
pub mod partial;
pub mod witness;

pub use construction::{
    abs_inner_sum, adversarial_center, antipodal_centers, center_for_power, centroid_witness, cost_gap,
    power_gap_bound, taylor_bounds_check, CentroidWitness, PowerCenter,
};
pub use grid::{
    default_delta, default_delta_tilde, default_delta_z2, max_rounding_perturbation, perturbation_budget,
    round_and_scale, scale_centers, scale_point, tile_instances, RoundedInstance, TileCopy, TiledInstance,
};
pub use partial::{discrepancy, find_partial_coloring, ColoringOrigin, PartialColoring};
pub use witness::{
    hamming_filter, is_separated, loglog_family_instance, loglog_levels, loglog_witness_centers,
    separation_witness, store_everything_witness, SeparationWitness,
};
