//! Twisted de Rham cohomology, signature operators and eta invariants on flat tori.
//!
//! The exterior algebra and the twisted complex are generic over [`Real`] (`f32` or `f64`);
//! spectral, cylinder and heat-kernel computations run in `f64`.

pub mod bundle;
pub mod cylinder;
pub mod error;
pub mod exterior;
pub mod heat;
pub mod scalar;
pub mod signature;
pub mod spectral;
pub mod twisted;

pub use bundle::FlatBundle;
pub use error::{Error, Result};
pub use exterior::{Form, Mode, MultiIndex, Parity};
pub use scalar::{Cx, Real};
pub use twisted::{FluxForm, TwistedTorus};

/// Double-precision aliases.
pub type Metric = exterior::FlatMetric<f64>;
pub type Torus = TwistedTorus<f64>;
pub type Flux = FluxForm<f64>;
pub type Bundle = FlatBundle<f64>;
pub type Complex64 = Cx<f64>;
