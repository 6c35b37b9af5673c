//! Odd-dimensional tori: the odd signature operator, eta and rho invariants, spectral flow.
//!
//! Everything here is double precision.

mod eta;
mod flow;
mod local;
mod operator;
pub mod quadrature;

pub use eta::{eta_invariant, rho_invariant, EtaEstimate, EtaMethod, EXTRAPOLATION_GRID};
pub use flow::{spectral_flow, spectral_flow_between, Crossing, SpectralFlowResult, FLOW_LEVEL, OVERLAP_THRESHOLD};
pub use local::{flux_representative_experiment, local_term, FluxExperiment, LocalTerm};
pub use operator::{LabeledEigenvalue, OddSignatureOperator};
