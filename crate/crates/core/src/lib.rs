//! Sphere-valued nonlinear Hodge energies on flat tori.
//!
//! The energy of a map u: M → S^m is
//!
//! ```text
//! E_ρ(u) = ∫_M ∫₀^{Q(du)} ρ(s) ds dM,   Q(du) = ⟨du, du⟩
//! ```
//!
//! for a mass-density law ρ. This crate provides the density laws
//! ([`density`]), a discrete periodic domain ([`domain`]), the sphere
//! target ([`sphere`]), projected-gradient critical point search
//! ([`solver`]), second-variation stability probing ([`stability`]), the
//! 1-D channel models ([`channel1d`]), and the batch CLI ([`cli`]).

pub mod channel1d;
pub mod cli;
pub mod config;
pub mod density;
pub mod domain;
pub mod error;
pub mod numeric;
pub mod solver;
pub mod sphere;
pub mod stability;

pub use density::{DensityModel, FlowRegime};
pub use domain::{AmbientField, TorusGrid, VectorFieldOnGrid};
pub use error::{Error, Result};
pub use sphere::{SphereMap, VariationField};
