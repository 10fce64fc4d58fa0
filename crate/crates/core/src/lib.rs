//! Frequency-domain stability, boundedness and convergence analysis for
//! reset control systems.
//!
//! The library decides closed-loop stability of loops that mix linear
//! controllers with a first-order reset element (Clegg integrator, PCI,
//! GFORE), working either from parametric transfer functions or from a
//! measured plant FRF:
//!
//! - [`poly`], [`ss`]: polynomial / transfer-function algebra, Hurwitz
//!   testing, Pade delay approximants, canonical realizations.
//! - [`frf`]: measured FRF ingestion, frequency grids, uniform plant
//!   evaluation with exact or rational delay.
//! - [`reset`]: reset elements, loop assembly, the hybrid closed-loop
//!   state space and its jump map.
//! - [`hbeta`]: the stability vector and sector conditions, the FRF-form
//!   positivity function, its matrix-form twin, and the randomized
//!   equivalence oracle between the two.
//! - [`delay`]: delay feasibility (sign-oscillation probes, the reset
//!   integrator exclusion rule, Pade order selection).
//! - [`sim`]: time-domain validation with zero-crossing resets, plus
//!   boundedness and convergence probes.

pub mod delay;
pub mod error;
pub mod frf;
pub mod hbeta;
pub mod poly;
pub mod reset;
pub mod sim;
pub mod ss;

pub use error::{Error, Result};
