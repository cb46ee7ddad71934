//! Tomography of time-bin photonic qudits measured by time-resolved detection
//! after a dispersive fiber.
//!
//! The crate is organized bottom-up:
//!
//! - [`wavepacket`]: Gaussian bin envelopes and their dispersive propagation.
//! - [`povm`]: time-resolved measurement operators, detector jitter, time grids.
//! - [`states`]: density matrices, the `W` parametrization, fidelity, state families.
//! - [`simulate`]: expected counts and seeded Poisson sampling.
//! - [`tomography`]: least-squares and maximum-likelihood reconstruction.
//! - [`pipeline`]: ready-made experiment cells for qubits, qutrits and photon pairs.

pub mod error;
pub mod linalg;
pub mod optim;
pub mod pipeline;
pub mod povm;
pub mod quadrature;
pub mod simulate;
pub mod states;
pub mod tomography;
pub mod wavepacket;

pub use error::{Error, Result};
pub use linalg::CMatrix;
pub use pipeline::{CellResult, CellSpec, SystemKind};
pub use povm::{JitterConfig, MeasurementOperator, TimeGrid};
pub use simulate::{CountRecord, Experiment, ExperimentConfig};
pub use states::{BlochPoint, DensityMatrix, MajoranaPair, WParams};
pub use tomography::{FidelityStats, Method, ReconstructionResult};
pub use wavepacket::{FiberConfig, PulseConfig};
