//! Online Dirichlet change-point detection.

mod detect;
mod dirichlet;
pub mod special;

pub use detect::{detect_change, estimate_2window, ChangeReport, DetectorSettings};
pub use dirichlet::{
    compose_window, dirichlet_mle, log_likelihood, sample_dirichlet, to_composition, CompositionSample, DirichletParams,
    ScaleBounds, SuffStats, ALPHA_MAX, ALPHA_MIN,
};
pub use special::{digamma, inverse_digamma, log_gamma, trigamma};
