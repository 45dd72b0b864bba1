//! Almost cosymplectic, cosymplectic and contact structures on coordinate
//! charts, with their Hamiltonian dynamics.
//!
//! Numerical routines are generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases fix the scalar to `f64`.

pub mod almost_contact;
pub mod chart;
pub mod doc;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod field;
pub mod forms;
pub mod integrate;
pub mod jacobi_flows;
pub mod manifolds;
pub mod scalar;
pub mod structures;
pub mod suite;

pub use chart::{Bound, Chart, ChartPoint, DarbouxLayout, DomainGuard, GuardDoc};
pub use error::{Error, Result};
pub use expr::{parse, Expr, Func, ParseError};
pub use field::{DerivativeMode, ScalarField, VectorField};
pub use forms::{ChartMap, FormValue, KForm};
pub use scalar::Real;
pub use doc::{ChartDoc, StructureDoc};
pub use structures::{CanonicalThetaSpec, StructureClass, StructureSpec};

pub type Point64 = ChartPoint<f64>;
pub type ScalarField64 = ScalarField<f64>;
pub type VectorField64 = VectorField<f64>;
pub type Structure64 = StructureSpec<f64>;
