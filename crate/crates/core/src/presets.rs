//! Built-in scenarios.
//!
//! * `linear_pulse`: linear isotherm, `L = v = 1`, `F = 1.5`, `a = 1`, unit
//!   feed for 3 time units, horizon 7.
//! * `langmuir_pulse`: `q = u / (1 + u)`, porosity 0.5, 250 plates, unit feed
//!   for 0.2 time units, horizon 3.
//! * `binary_langmuir`: two components, `a = (0.5, 1)`, `b = (0.05, 0.1)`,
//!   porosity 0.4, `v = 0.1`, 5000 plates, feed 10 each for 2 time units,
//!   horizon 40.
//! * `ideal_linear`: `linear_pulse` with `D = 0`.
//!
//! The `*_config` forms return the unvalidated configuration; the others
//! validate and panic on failure, which only a bad grid can cause.

use crate::model::{
    CflMode, ColumnSpec, GridSpec, InitialCondition, InjectionProfile, IsothermSpec, Scenario,
    ScenarioConfig, SolverSettings,
};
use crate::num::Real;

/// Plate count used for the linear pulse (dispersion `D = L v / (2 N_t)`).
pub const LINEAR_PULSE_PLATES: f64 = 250.0;

fn build<T: Real>(config: ScenarioConfig<T>) -> Scenario<T> {
    Scenario::validate(config).unwrap_or_else(|e| panic!("preset rejected: {e}"))
}

pub fn linear_pulse_config<T: Real>(n_x: usize, n_t: usize) -> ScenarioConfig<T> {
    ScenarioConfig {
        column: ColumnSpec {
            length: T::one(),
            velocity: T::one(),
            porosity: None,
            phase_ratio: Some(T::lit(1.5)),
            plate_count: Some(T::lit(LINEAR_PULSE_PLATES)),
            diffusion: None,
        },
        isotherm: IsothermSpec {
            a: vec![T::one()],
            b: vec![T::zero()],
        },
        injection: InjectionProfile::rectangular(vec![T::one()], T::lit(3.0)),
        grid: GridSpec::new(n_x, n_t, T::lit(7.0)),
        initial: InitialCondition::Zero,
        solver: SolverSettings::default(),
    }
}

pub fn linear_pulse<T: Real>(n_x: usize, n_t: usize) -> Scenario<T> {
    build(linear_pulse_config(n_x, n_t))
}

/// `linear_pulse` accepting `v dt / dx < 2`, which the 4:1 time/space grids need.
pub fn linear_pulse_relaxed<T: Real>(n_x: usize, n_t: usize) -> Scenario<T> {
    let mut config = linear_pulse_config(n_x, n_t);
    config.solver.cfl = CflMode::Relaxed(2);
    build(config)
}

pub fn ideal_linear<T: Real>(n_x: usize, n_t: usize) -> Scenario<T> {
    let mut config = linear_pulse_config(n_x, n_t);
    config.column.plate_count = None;
    config.column.diffusion = Some(T::zero());
    build(config)
}

pub fn langmuir_pulse_config<T: Real>(n_x: usize, n_t: usize) -> ScenarioConfig<T> {
    ScenarioConfig {
        column: ColumnSpec::from_plates(T::one(), T::one(), T::lit(0.5), T::lit(250.0)),
        isotherm: IsothermSpec {
            a: vec![T::one()],
            b: vec![T::one()],
        },
        injection: InjectionProfile::rectangular(vec![T::one()], T::lit(0.2)),
        grid: GridSpec::new(n_x, n_t, T::lit(3.0)),
        initial: InitialCondition::Zero,
        solver: SolverSettings::default(),
    }
}

pub fn langmuir_pulse<T: Real>(n_x: usize, n_t: usize) -> Scenario<T> {
    build(langmuir_pulse_config(n_x, n_t))
}

pub fn binary_langmuir_config<T: Real>(n_x: usize, n_t: usize) -> ScenarioConfig<T> {
    ScenarioConfig {
        column: ColumnSpec::from_plates(T::one(), T::lit(0.1), T::lit(0.4), T::lit(5000.0)),
        isotherm: IsothermSpec {
            a: vec![T::lit(0.5), T::one()],
            b: vec![T::lit(0.05), T::lit(0.1)],
        },
        injection: InjectionProfile::rectangular(vec![T::lit(10.0), T::lit(10.0)], T::lit(2.0)),
        grid: GridSpec::new(n_x, n_t, T::lit(40.0)),
        initial: InitialCondition::Zero,
        solver: SolverSettings::default(),
    }
}

pub fn binary_langmuir<T: Real>(n_x: usize, n_t: usize) -> Scenario<T> {
    build(binary_langmuir_config(n_x, n_t))
}
