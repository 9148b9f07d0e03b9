//! Accessibility, divergences, detour certificates and performance-bound checks.

mod accessible;
mod bounds;
mod certify;
mod divergence;

pub use accessible::{
    accessible_distribution, accessible_distribution_in, accessible_states, reachable_states,
    restrict_to, AccessibleSet,
};
pub use bounds::{
    default_reference_theta, optimal_returns, verify_return_bound, verify_value_discrepancy,
    BoundReport, DiscrepancyReport,
};
pub use certify::{
    certify_family, certify_mrs, certify_mrs_with, AccessibilityCertificate, CertifyOptions,
    CertifyScope, DiscrepancyReading, FamilyCertificate, Transition, Witness, DEFAULT_M_MAX,
};
pub use divergence::{js_divergence, js_divergence_slices, kl_divergence};
