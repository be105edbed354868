//! Asymptotic and quasi-asymptotic frequencies of noisy limit-cycle oscillators.
//!
//! The crate is organised bottom-up:
//!
//! * [`sde`] defines models `dX = V(X) dt + σ B(X) dW`, basins of attraction and a
//!   reproducible Euler–Maruyama integrator with per-step observers.
//! * [`zoo`] ships the concrete oscillators (Hopf variants, a three-cycle radial
//!   system and a Holling type III predator–prey model).
//! * [`cycle`] and [`phase_map`] find deterministic limit cycles and evaluate phase
//!   maps together with their first and second derivatives.
//! * [`tracking`] lifts phases to the real line, counts windings and splits the phase
//!   into its drift integral and martingale part.
//! * [`estimate`], [`fokker_planck`] and [`conditions`] estimate (quasi-)ergodic
//!   measures, evaluate frequency formulas and check integrability conditions.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std` feature.
//! The `parallel` feature runs ensembles on a rayon pool; results never depend on
//! the worker count.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod banded;
pub mod basin;
pub mod conditions;
pub mod cycle;
pub mod estimate;
pub mod fokker_planck;
pub mod histogram;
pub mod math;
pub mod ode;
pub mod phase_map;
pub mod rng;
pub mod sde;
pub mod spline;
pub mod stats;
pub mod tracking;
pub mod zoo;

pub use cycle::{find_limit_cycle, CycleError, CycleOptions, LimitCycle};
pub use estimate::{EstimateError, FrequencyEstimate};
pub use histogram::{GridSpec, MeasureHistogram};
pub use phase_map::{PhaseDerivatives, PhaseError, PhaseMap};
pub use sde::{Basin, IntegratorConfig, SdeModel, SimError, TrajectoryRecord, VectorField};
pub use tracking::LiftedPhase;
pub use zoo::{ModelKind, ModelSpec, SpecError};
