//! Numerics for flows on finite nest algebras: perturbation cocycles,
//! generators and inner derivations, Gaussian smoothing, and cocycle
//! decompositions.

pub mod algebra;
pub mod cocycle_tools;
pub mod dyson;
pub mod error;
pub mod expm;
pub mod flow;
pub mod inner;
pub mod linalg;
pub mod literal;
pub mod quadrature;
pub mod sample;
pub mod smoothing;
pub mod superop;

pub use algebra::{identity, matrix_unit, norm, Element, NestAlgebra, NormKind};
pub use cocycle_tools::{
    decompose, differentiability_estimate, mollified_similarity, similar_cocycle, DecompositionReport,
    DifferentiabilityEstimate,
};
pub use dyson::{
    closed_form_cocycle, cocycle_defect, dyson_cocycle, ode_cocycle, perturbation_distance_bounds,
    perturbed_flow_eval, Cocycle, CocycleDefect, DistanceBounds, DysonResult, TabulatedCocycle,
};
pub use error::{FlowError, Result};
pub use expm::matrix_exponential;
pub use flow::{
    certified_growth, generator_superop, growth_bound, CocycleMethod, Flow, FlowSpec, GrowthBound,
};
pub use inner::{
    automorphism_similarity, conjugate_flow, extract_flow_generator, inner_derivation_solve, relate_flows,
    DerivationSolution, FlowRelation, SimilaritySolution,
};
pub use linalg::C64;
pub use literal::MatrixLiteral;
pub use smoothing::{analytic_smooth, analyticity_check, gaussian_weight_integral, SmoothingResult};
pub use superop::{SuperOp, SuperOpNormKind};
