//! Predictive-coding networks with standard, µPC and orthogonal
//! parameterisations.
//!
//! Conventions used throughout:
//! * layers are numbered `1..=L` with `L = H + 1`; layer `0` is the input;
//! * activities are stored batch-as-columns, one `N_l x B` matrix per layer;
//! * energies and losses are batch means, so every gradient carries `1/B`;
//! * activity Hessians are per sample (they do not depend on `B`).

pub mod data;
pub mod energy;
pub mod error;
pub mod hessian;
pub mod inference;
pub mod learning;
pub mod network;
pub mod probes;

pub use error::{PcError, Result};
pub use network::{
    forward_norm_profile, make_premultipliers, Activation, ForwardTrace, InitScheme, Network, NetworkSpec,
    ParameterSet, Parameterisation,
};
pub use pclab_linalg::{Matrix, RngStream, Vector};
