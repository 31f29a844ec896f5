//! Day planning on top of `fillroute-core`.
//!
//! [`plan_day`] chains forecasting, selection and routing for one date and
//! persists the result in a directory-backed [`Store`]. Plans can be
//! compared with an externally supplied baseline ([`compare`]), exported as
//! GeoJSON ([`geo`]) and served over HTTP ([`service`]).

pub mod compare;
mod error;
pub mod geo;
pub mod plan;
pub mod service;
pub mod store;

pub use compare::{compare, BaselinePlan, ComparisonReport, Savings};
pub use error::{Error, Result};
pub use geo::export_geojson;
pub use plan::{plan_day, DayPlan, NacMode, PlanMetrics, PlanRequest, PlanRun, RouteMetrics};
pub use store::Store;
