//! Far-field fluorescence correlations of a trapped-ion chain with one dark
//! isotope, and statistical search experiments that localize the isotope
//! from simulated photon-coincidence events.
//!
//! - [`model`]: chain, detector angles, excitation pulse, slices
//! - [`correlations`]: G¹ and G² patterns plus small-N closed forms
//! - [`sampling`]: normalized distributions and seeded event draws
//! - [`inference`]: likelihood localization and the classical baseline
//! - [`cli`]: the `ionscope` command-line front end

pub mod cli;
pub mod correlations;
pub mod error;
pub mod inference;
pub mod model;
pub mod sampling;

pub use correlations::{
    g1_four_closed, g1_pattern, g2_four_closed, g2_pattern, g2_two_ion_closed, pattern_over_slice,
    CorrelationOrder, Pattern,
};
pub use error::{Error, Result};
pub use inference::{
    classical_search_sim, log_likelihood, pattern_distance, posterior_over_positions,
    run_search_experiment, PosteriorReport, SearchExperimentResult,
};
pub use model::{
    phase_projection, resolve_slice, DetectorAngle, ExcitationPulse, IonChain, ScanRange, SliceSpec,
};
pub use sampling::{empirical_histogram, normalize, sample_events, DiscreteDistribution, EventSet};
