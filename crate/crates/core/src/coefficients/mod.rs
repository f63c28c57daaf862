//! Coefficient families, declared structural constants and condition checkers.

mod conditions;
mod exponents;
mod families;

pub use conditions::{
    check_a1_a4, check_aprime, random_nonnegative_field, CheckContext, ConditionReport,
    ConditionResult, Inequality, SamplePlan, Verdict, Witness, WitnessPoint, CHECK_TOL,
};
pub use exponents::{interpolation_exponents, young_exponents, InterpolationExponents};
pub use families::{
    evaluate_diffusion, evaluate_drift, evaluate_jump, power, DeclaredConstants, DiffusionSpec,
    DriftSpec, InitialDatum, JumpCoeffSpec, Phi0, PowerLaw,
};
