//! Models for a trapped-electron hybrid platform: dispersive phonon readout
//! through a transmon, cooling routes, electron–ion Coulomb coupling,
//! pseudopotential traps and resonator line fits.
//!
//! The numerical kernels are generic over [`scalar::Real`]; the aliases below
//! fix the scalar to `f64`, with `*32` variants for `f32`.

pub mod cooling;
pub mod coulomb;
pub mod dispersive;
pub mod error;
pub mod hamiltonians;
pub mod qcore;
pub mod report;
pub mod scalar;
pub mod spectra;
pub mod trapfields;

pub use error::{Error, Result};
pub use scalar::Real;

pub type HilbertOp = qcore::Operator<f64>;
pub type HilbertOp32 = qcore::Operator<f32>;
pub type EigenResult = qcore::EigenResult<f64>;
pub type EigenResult32 = qcore::EigenResult<f32>;
pub type CircuitParams = hamiltonians::CircuitParams<f64>;
pub type CircuitParams32 = hamiltonians::CircuitParams<f32>;
pub type ElectronIonParams = hamiltonians::ElectronIonParams<f64>;
pub type ElectronIonParams32 = hamiltonians::ElectronIonParams<f32>;
pub type ThermalEnv = hamiltonians::ThermalEnv<f64>;
pub type ThermalEnv32 = hamiltonians::ThermalEnv<f32>;
pub type ZetaPoint = dispersive::ZetaPoint<f64>;
pub type ReadoutBudget = dispersive::ReadoutBudget<f64>;
pub type CouplingSet = coulomb::CouplingSet<f64>;
pub type CouplingSet32 = coulomb::CouplingSet<f32>;
pub type TaylorCoeffs = coulomb::TaylorCoeffs<f64>;
pub type CoolingProtocolParams = cooling::CoolingProtocolParams<f64>;
pub type CoolingProtocolParams32 = cooling::CoolingProtocolParams<f32>;
pub type PopulationState = cooling::PopulationState<f64>;
pub type SympatheticParams = cooling::SympatheticParams<f64>;
