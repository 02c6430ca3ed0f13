//! Collective momentum-ladder model of the high-gain quantum free-electron laser.
//!
//! * [`fock_ladder`]: symmetric many-electron ⊗ photon basis and sparse operators.
//! * [`hamiltonians`]: lab and rotating-frame Hamiltonians, Fourier components,
//!   effective Hamiltonians to third order.
//! * [`dynamics`]: exact state evolution and observables.
//! * [`gain_analytics`]: dispersion relations, photon statistics, parametric propagators.
//!
//! Numeric code is generic over [`Real`] (`f32`, `f64`); the aliases below fix `f64`.

pub mod dense;
pub mod dynamics;
pub mod error;
pub mod fock_ladder;
pub mod gain_analytics;
pub mod hamiltonians;
pub mod scalar;
pub mod sparse;

pub use error::{QfelError, Result};
pub use fock_ladder::{
    charge_operator, collective_jump, enumerate_basis, photon_operator, CompositeBasis, LadderWindow, PhotonOp,
    SymmetricElectronBasis,
};
pub use hamiltonians::AveragingMode;
pub use scalar::{Cx, Real};
pub use sparse::commutator;

pub type Complex64 = Cx<f64>;
pub type SparseOperator = sparse::SparseOp<f64>;
pub type DenseMatrix = dense::DenseMatrix<f64>;
pub type ModelParams = hamiltonians::ModelParams<f64>;
pub type PhysicalParams = hamiltonians::PhysicalParams<f64>;
pub type FourierComponents = hamiltonians::FourierComponents<f64>;
pub type EffectiveHamiltonianSet = hamiltonians::EffectiveHamiltonianSet<f64>;
pub type StateVector = dynamics::StateVector<f64>;
pub type MixedEnsemble = dynamics::MixedEnsemble<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
pub type IntegratorConfig = dynamics::IntegratorConfig<f64>;
pub type DispersionSolution = gain_analytics::DispersionSolution<f64>;
pub type ParametricPropagator = gain_analytics::ParametricPropagator<f64>;
pub type PhotonStats = gain_analytics::PhotonStats<f64>;
pub type GainScale = gain_analytics::GainScale<f64>;
pub type MomentumAxis = gain_analytics::MomentumAxis<f64>;
