//! The twisted de Rham complex `(Ω(T^n, E), ∇^E + H∧)` on mode blocks.

mod complex;
mod flux;
mod kernel;
mod operator;

pub use complex::{
    exterior_exp, external_product, AdjointPair, CohomologyResult, GaugeTransform, KunnethReport, PoincareReport,
    TwistedTorus,
};
pub use flux::FluxForm;
pub use kernel::{numerical_kernel, sorted_eigen};
pub use operator::{Block, BlockOperator};
