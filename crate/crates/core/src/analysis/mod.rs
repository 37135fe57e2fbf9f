//! Energetics, residual audits and moment statistics.

mod bogovskii;
mod energy;
mod envelope;
mod moments;
mod residual;

pub use bogovskii::{bogovskii_1d, dissipation_bound_constant, dissipation_functional, DEFAULT_COUPLING};
pub use energy::{energy, energy_density, EnergyReport};
pub use envelope::{defect_decay_envelope, gronwall_bound};
pub use moments::{
    envelope_check, fit_envelope, moment_series, sup_moment, EnvelopeFit, EnvelopeVerdict, MomentSeries,
};
pub use residual::{
    energy_inequality_residual, energy_inequality_residual_with, pressure_weight_integral, renorm_residual,
    window_indices, Renormalizer, ResidualOptions,
};
