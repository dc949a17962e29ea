//! Tsallis Value-at-Risk bounds for the inverse moment of supOU reversion
//! measures, with the supporting model identification.
//!
//! The crate is organised bottom-up:
//!
//! - [`qcalc`]: q-exponential, q-logarithm and the Tsallis divergence;
//! - [`reversion`]: Gamma reversion measures, their quantile discretization
//!   and the tilted quadrature;
//! - [`supou`]: Lévy moments and stationary statistics;
//! - [`solver`]: the upper/lower bound objectives and their semi-implicit descent;
//! - [`ambiguity`]: worst-case densities and the primal side of the duality;
//! - [`identify`]: fitting a model to an hourly discharge record.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ambiguity;
pub mod error;
pub mod identify;
pub mod numeric;
pub mod optim;
pub mod qcalc;
pub mod reversion;
pub mod solver;
pub mod special;
pub mod stations;
pub mod supou;

pub use error::{Error, ErrorCategory, Result};
pub use qcalc::{q_exp, q_log, tsallis_divergence, DiscreteDensity, ShapeParameter};
pub use reversion::{DiscreteMeasure, GammaReversionMeasure, Scheme};
pub use solver::{descend, Side, TsVaRProblem, TsVaRSolution};
pub use stations::Station;
pub use supou::{StationaryStats, SupOUModel, TemperedStableLevy};
