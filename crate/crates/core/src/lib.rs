//! Lookdown particle constructions of population models.
//!
//! Particles carry a type (location on a torus plus an allele) and a level in
//! `[0, λ)`. Mechanisms move levels and types so that, conditional on the
//! types, levels stay i.i.d. uniform. The [`stats`] module turns that and the
//! related projection, genealogy and Poisson-measure identities into
//! hypothesis tests.

pub mod config;
pub mod domain;
pub mod engine;
pub mod error;
pub mod genealogy;
pub mod mechanisms;
pub mod models;
pub mod numeric;
pub mod output;
pub mod poisson_oracle;
pub mod rng;
pub mod stats;
pub mod testfn;

pub use config::{Configuration, Particle};
pub use domain::{Domain, Intensity, RateFn, TypeLaw, TypePoint};
pub use engine::{ModelSpec, Trajectory};
pub use error::{Error, Result};
pub use testfn::TestFunction;
