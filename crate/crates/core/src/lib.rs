//! Econometric modeling of large flexible electricity loads: hourly panel
//! handling, transforms, hypothesis tests, SARIMA errors, staged regression
//! and the demand-response model built on top of them.

pub mod drmodel;
pub mod error;
pub mod indicators;
pub mod linalg;
pub mod panel;
pub mod regress;
pub mod sarima;
pub mod stats;
pub mod transform;

pub use error::{Error, Result};
pub use panel::{Column, HourlyPanel, Season, SeasonMask, SeriesSource};
pub use drmodel::{DemandModel, PresetCoefficients};
