//! Numerical laboratory for intermediary-proof posted-price mechanisms.
//!
//! The crate is organised bottom-up:
//!
//! * [`distributions`]: valuation families and λ-regularity machinery.
//! * [`order_statistics`]: expectations, tail probabilities and samplers.
//! * [`agents`]: demand structures and intermediary purchase behaviour.
//! * [`mechanisms`]: posted prices, menus, the (k+1)-price auction and bundles.
//! * [`simulation`]: the Monte Carlo market engine and its reports.
//! * [`theory`]: grid and oracle checks of the supporting inequalities.
//! * [`config`] and [`cli`]: the experiment file format and command-line front end.

pub mod agents;
pub mod cli;
pub mod config;
pub mod distributions;
pub mod error;
pub mod mechanisms;
pub mod order_statistics;
pub mod quadrature;
pub mod simulation;
pub mod theory;
mod util;

pub use distributions::Distribution;
pub use error::{Error, Result};
