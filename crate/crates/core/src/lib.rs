//! One-dimensional multi-component liquid chromatography simulator.
//!
//! The column model `u_t + F q(u)_t + v u_x = D u_xx` with a Langmuir isotherm
//! is stepped by a modified method of characteristics with adjusted advection
//! ([`mmocaa`]); the dispersion-free single-component case has its own
//! Lax-Wendroff type solver ([`ideal`]). [`reference`] supplies the oracles
//! and error metrics, [`study`] the grid-convergence harness.
//!
//! Everything is generic over the scalar type through [`Real`]; the `*64` and
//! `*32` aliases fix it.
//!
//! ```
//! use chromsim::{presets, run};
//!
//! let scenario = presets::langmuir_pulse::<f64>(50, 400);
//! let trajectory = run(&scenario).unwrap();
//! assert_eq!(trajectory.outlet[0].len(), 401);
//! assert!(trajectory.relative_mass_error()[0] < 1e-3);
//! ```

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blocksolve;
pub mod characteristics;
pub mod error;
pub mod field;
pub mod ideal;
pub mod isotherm;
pub mod massaudit;
pub mod mmocaa;
pub mod model;
pub mod num;
pub mod presets;
pub mod reference;
pub mod scenario_file;
pub mod special;
pub mod study;

pub use error::{Error, Result};
pub use field::ConcentrationField;
pub use massaudit::MassLedger;
pub use mmocaa::{run, run_with, RunOptions, SolverMode, StepDiagnostics, Trajectory};
pub use model::{validate_scenario, Scenario, ScenarioConfig};
pub use num::Real;
pub use reference::ChromatogramRecord;

pub type Scenario64 = Scenario<f64>;
pub type ScenarioConfig64 = ScenarioConfig<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type Field64 = ConcentrationField<f64>;
pub type Chromatogram64 = ChromatogramRecord<f64>;

pub type Scenario32 = Scenario<f32>;
pub type ScenarioConfig32 = ScenarioConfig<f32>;
pub type Trajectory32 = Trajectory<f32>;
pub type Field32 = ConcentrationField<f32>;
pub type Chromatogram32 = ChromatogramRecord<f32>;
