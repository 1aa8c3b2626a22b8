//! Cavity geometric phase gate.
//!
//! One gate application multiplies each Dicke-basis matrix element by
//! `exp(i phi_nm)`. The phase matrix follows either from the adiabatic limit
//! or from a finite-duration drive pulse.

mod effective;
mod phases;
mod pulse;
mod rates;

pub use effective::{effective_dephasing_rates, effective_emission_rates};
pub use phases::{
    adiabatic_coefficient_derivatives, adiabatic_coefficients, adiabatic_phases, apply_channel,
    detuning_band, finite_time_phases, sin2_coefficients, FiniteCoefficients, GateDuration,
    GpgParams, GpgPhaseMatrix, PhaseCoefficients, DEFAULT_SAMPLES,
};
pub use pulse::{
    forward_zeta_from_eta, invert_zeta_to_eta, round_trip_residual, sin2_pulse, PulseGrid,
    PULSE_CSV_HEADER,
};
pub use rates::{cavity_params_from_geometry, rates_from_cooperativity, CavityParams, NoiseRates};

