//! Lipschitz extensions on finite metric spaces that keep the asymptotic
//! Lipschitz constant of the data at every point of the subset.
//!
//! The crate is organised bottom-up:
//!
//! - [`metric`]: validated finite metric spaces, balls, Lipschitz constants;
//! - [`schedule`]: the geometric scale sequence driving the construction;
//! - [`extension`]: penalization profiles, the extension itself, McShane
//!   envelopes and bounded / bounded-support post-processing;
//! - [`verification`]: executable checks of every quantitative property;
//! - [`energy`]: scale-indexed Lipschitz energies on the space and on the subset;
//! - [`instances`] and [`io`]: seeded generators and the JSON instance format.

pub mod metric;
pub mod schedule;
pub mod extension;
pub mod verification;
pub mod energy;
pub mod instances;
pub mod io;

pub use energy::{EnergyReport, MeasureData};
pub use extension::{ExtensionEngine, ExtensionField, Localization, PenalizationProfile};
pub use metric::{validate_instance, Geometry, MetricInstance, RawInstance, Samples};
pub use schedule::{build_schedule, plan_schedule, ScaleSchedule, ScheduleRequest};
pub use verification::{run_battery, BatteryConfig, CheckResult, Status, VerificationReport};
