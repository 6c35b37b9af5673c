//! Complex exterior algebra on flat tori at the level of Fourier coefficients.

mod fiber;
mod form;
mod metric;
mod multi_index;

pub use fiber::{
    degree_diagonal, differential_symbol, gram, hodge_star, submatrix, top_pairing, wedge_left, FiberBasis,
    FiberGeometry, Orthonormalizer, Parity,
};
pub use form::{lattice_box, Ambient, Form, Mode};
pub use metric::FlatMetric;
pub use multi_index::{MultiIndex, MAX_DIM};
