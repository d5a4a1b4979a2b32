//! Entanglement distribution of three-qubit states under dephasing.
//!
//! States from [`states`] are evolved by the closed-form dephasing channels
//! in [`dynamics`] (local or common bath, Markov or with bath memory from
//! [`bath`]) and the distribution `D = |E_A:BC - E_A:B - E_A:C|` is computed
//! from relative entropy of entanglement in [`entanglement`].

pub mod bath;
pub mod dynamics;
pub mod entanglement;
pub mod error;
pub mod linalg;
pub mod quadrature;
pub mod runner;
pub mod states;

pub use error::{Error, Result};
