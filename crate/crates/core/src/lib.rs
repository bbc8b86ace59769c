//! Numerical laboratory for self-similar blowup of the mass-supercritical
//! nonlinear Schrödinger equation.
//!
//! The crate covers the deformed Laplacian `Δ_b = Δ + ib(d/2 + x·∇)` and its
//! exact semigroup, the extended resolvent families `R_b^±(z)`, radial
//! shooting for the self-similar profile `Q_b`, the matrix linearized
//! operator around `Q_b`, and a Strang-split integrator for the renormalized
//! flow together with the rate fits used to check decay and growth laws.

pub mod error;
pub mod field;
pub mod fit;
pub mod flow;
pub mod grid;
pub mod linearized;
pub mod ode;
pub mod params;
pub mod plot;
pub mod profile;
pub mod propagator;
pub mod resolvent;
pub mod spectral;

pub use error::{Error, Result};
pub use field::{Field, RadialField, Space, VectorField2};
pub use grid::{Grid1D, RadialGrid};
pub use params::{derive_params, ModelParams};

pub type C64 = num_complex::Complex64;
