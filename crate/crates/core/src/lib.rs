//! Numerical toolkit for suspension Anosov flows of hyperbolic toral
//! automorphisms: exterior algebra, the flow model, differential forms,
//! asymmetry measurements, the Livšic cohomological equation and weak L²
//! identities.

pub mod asymmetry;
pub mod error;
pub mod exterior;
pub mod fit;
pub mod forms;
pub mod l2;
pub mod livsic;
pub mod model;
pub mod quadrature;
pub mod snf;
pub mod tolerances;

pub use asymmetry::{is_asymmetric, AsymmetryVerdict, RateFit};
pub use error::{Error, Result};
pub use exterior::{hodge_star, inner, k_volume, AltForm, IndexSet, MetricFrame};
pub use forms::{canonical_alpha, interior_x_volume, volume_form, FormAtom, FormField, LieMode, Profile, Shape};
pub use l2::{l2_inner, OrbitIntegral};
pub use livsic::{case_split, solve, SolveResult, SolverOptions};
pub use model::{
    AnosovMetric, EigenBlock, HyperbolicAutomorphism, HyperbolicityConstants, NormConvention, Point,
    SuspensionFlow, TangentVector,
};
pub use quadrature::{Estimate, QuadratureSpec};
