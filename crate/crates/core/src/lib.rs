//! Symbolic-numeric machinery for heat-kernel index densities.
//!
//! The crate cross-validates the computational content of the local
//! (equivariant, family) index theorem at desk scale: exact Clifford and
//! exterior algebra with supertraces, characteristic forms over nilpotent
//! coefficient rings, a Volterra symbol calculus with parametrix and
//! heat-coefficient extraction, closed-form model heat kernels with an
//! independent finite-difference oracle, finite-dimensional superconnection
//! and JLO characters, and exact-spectrum eta invariants.

pub mod charforms;
pub mod error;
pub mod graded;
pub mod matrix;
pub mod mehler;
pub mod oracle;
pub mod quad;
pub mod scalar;
pub mod spectral;
pub mod superconn;
pub mod volterra;

pub use error::{Error, Result};
pub use charforms::{
    a_hat, chern_character, equivariant_index_density, index_density_untwisted, nu_phi,
    FormMat, IsometryNormalAction, RotationBlock,
};
pub use graded::{
    equivariant_supertrace, equivariant_supertrace_direct, spinor_lift, AlgebraContext,
    BasisMask, BerezinMode, EquivariantStr, FiberRep, FixedPointFrame, GradedElement,
    PiScaled, PlaneRotation, SpinorLift, SpinorRep,
};
pub use matrix::Mat;
pub use mehler::{
    equivariant_model_density, fixed_point_integral, mehler_kernel, mehler_kernel_numeric,
    FixedPointGeometry, MehlerData,
};
pub use volterra::{
    compose, curvature_laplacian, heat_coefficients, heat_symbol, kernel_diagonal,
    model_compose_check, parametrix, rescaled_parity_check, DiffOp, DiagXPoly, GradedSymbol,
    SymbolTerm, XPoly,
};
pub use scalar::{Exact, Scalar, C64};
pub use spectral::{
    eta_integrand, eta_invariant, heat_trace, large_t_exponent, small_t_exponent,
    sphere_lefschetz, sphere_radial_spectrum, CertifiedValue, EtaResult, HeatTraceSeries,
    ModelKind, SlopeFit, SpectralLine, SpectrumModel,
};
pub use superconn::{
    chern_form, chern_form_exact, duhamel_exp, eta_form_integrand,
    eta_form_integrand_rewritten, grassmann_exp_identity, heat_equation_residual, jlo_cochain,
    DuhamelMode, FormMatrix, FormPoly, Superconnection,
};
