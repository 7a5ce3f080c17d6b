//! Pricing engine for the American put whose exercise right lapses at the
//! last time the underlying sits at or above a fixed level `L`.
//!
//! The last exit time `θ = sup{t ≤ T : X_t ≥ L}` is not a stopping time, so
//! the payoff `(K − X_τ)⁺ 1{τ < θ}` is first projected onto the price
//! filtration with the Azéma supermartingale `Z(t, x) = P(θ > t | F_t)`.
//! What remains is an ordinary optimal stopping problem with gain
//! `G(t, x) = (K − x)⁺ Z(t, x)`, solved here in closed form for the
//! perpetual contract and through an early-exercise-premium integral
//! equation for finite maturities. A Monte Carlo layer checks every step.
//!
//! Module map:
//!
//! * [`model`]: market and contract parameters, Gaussian building blocks.
//! * [`azema`]: `Z` and its partial derivatives.
//! * [`perpetual`]: closed-form perpetual boundary and value.
//! * [`fb_solver`]: backward-induction free-boundary solver.
//! * [`valuation`]: value function and value surfaces.
//! * [`mc`]: Monte Carlo oracle.
//! * [`cli`]: configuration file and command implementations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod azema;
pub mod cli;
pub mod error;
pub mod fb_solver;
pub mod mc;
pub mod model;
pub mod par;
pub mod perpetual;
pub mod quadrature;
pub mod valuation;

mod fmt;

pub use error::{Error, Result};
pub use model::{Contract, MarketParams, Maturity, TimeGrid};
pub use par::Execution;
