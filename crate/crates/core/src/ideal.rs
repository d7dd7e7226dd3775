//! Ideal model (`D = 0`) for one component.
//!
//! With `w = u + F a u / (1 + b u)` the equation becomes `w_t + v u_x = 0`. A
//! second-order Taylor step in time, with
//!
//! ```text
//! w_t  = -v u_x
//! w_tt = v^2 u_xx / (1 + F a / (1 + b u)^2) + 2 v^2 F a b (1 + b u) u_x^2 / ((1 + b u)^2 + F a)^2
//! ```
//!
//! and central differences in space, gives a Lax-Wendroff type update for `w`;
//! `u` is recovered from `w` in closed form after every step.

use crate::error::{Error, Result};
use crate::field::ConcentrationField;
use crate::mmocaa::{
    snapshot_levels, AdjustBranch, RunOptions, SolverMode, StepDiagnostics, Trajectory,
};
use crate::model::{IdealVariant, Scenario};
use crate::num::Real;

/// `w = u + F a u / (1 + b u)`.
#[inline]
pub fn w_of_u<T: Real>(u: T, f: T, a: T, b: T) -> T {
    u + f * a * u / (T::one() + b * u)
}

/// Non-negative root of `b u^2 + (F a + 1 - b w) u - w = 0`; `w / (1 + F a)` for `b = 0`.
#[inline]
pub fn u_of_w<T: Real>(w: T, f: T, a: T, b: T) -> T {
    let fa1 = f * a + T::one();
    if b == T::zero() {
        return w / fa1;
    }
    let beta = fa1 - b * w;
    let disc = beta * beta + T::lit(4.0) * b * w;
    debug_assert!(disc >= T::zero(), "negative discriminant for w = {w}");
    let root = disc.max(T::zero()).sqrt();
    // pick the cancellation-free form of the same root
    if beta >= T::zero() {
        T::lit(2.0) * w / (beta + root)
    } else {
        (root - beta) / (T::lit(2.0) * b)
    }
}

/// `w_t = -v u_x`.
#[inline]
pub fn w_t<T: Real>(u_x: T, v: T) -> T {
    -v * u_x
}

/// Second time derivative of `w` along smooth solutions.
#[inline]
pub fn w_tt<T: Real>(u: T, u_x: T, u_xx: T, f: T, a: T, b: T, v: T) -> T {
    let s = T::one() + b * u;
    let fa = f * a;
    let denom = s * s + fa;
    v * v * u_xx / (T::one() + fa / (s * s))
        + T::lit(2.0) * v * v * fa * b * s * u_x * u_x / (denom * denom)
}

/// Constants of the ideal update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealCoefficients<T> {
    pub phase_ratio: T,
    pub a: T,
    pub b: T,
    pub velocity: T,
    pub dt: T,
    pub dx: T,
    pub variant: IdealVariant,
}

impl<T: Real> IdealCoefficients<T> {
    pub fn from_scenario(scenario: &Scenario<T>) -> Self {
        let p = scenario.isotherm();
        Self {
            phase_ratio: p.phase_ratio(),
            a: p.a()[0],
            b: p.b()[0],
            velocity: scenario.velocity(),
            dt: scenario.dt(),
            dx: scenario.dx(),
            variant: scenario.solver().ideal_variant,
        }
    }

    #[inline]
    fn increment(&self, u: T, left: T, right: T) -> T {
        let half = T::lit(0.5);
        let sigma = self.velocity * self.dt / self.dx;
        let fa = self.phase_ratio * self.a;
        let d1 = right - left;
        let d2 = right - T::lit(2.0) * u + left;
        let s = T::one() + self.b * u;
        let denom = s * s + fa;
        let d1_sq = match self.variant {
            IdealVariant::AsPrinted => d1 * d1,
            IdealVariant::Corrected => half * d1 * half * d1,
        };
        -half * sigma * d1
            + half
                * sigma
                * sigma
                * (d2 / (T::one() + fa / (s * s))
                    + T::lit(2.0) * fa * self.b * s * d1_sq / (denom * denom))
    }
}

/// `w^{n+1}` on all nodes from `u^n`. Node 0 takes the inlet value `inlet_u`
/// at the new level; the outlet uses the mirrored ghost `u_{N+1} = u_{N-1}`.
pub fn lw_update<T: Real>(u: &[T], inlet_u: T, k: &IdealCoefficients<T>) -> Vec<T> {
    let n = u.len();
    let mut w = Vec::with_capacity(n);
    w.push(w_of_u(inlet_u, k.phase_ratio, k.a, k.b));
    for i in 1..n {
        let left = u[i - 1];
        let right = if i + 1 < n { u[i + 1] } else { u[i - 1] };
        let wi = w_of_u(u[i], k.phase_ratio, k.a, k.b);
        w.push(wi + k.increment(u[i], left, right));
    }
    w
}

/// Runs the ideal single-component model.
pub fn run_ideal<T: Real>(
    scenario: &Scenario<T>,
    options: &RunOptions<T>,
) -> Result<Trajectory<T>> {
    if scenario.components() != 1 {
        return Err(Error::invalid(format!(
            "the ideal solver handles one component, scenario has {}",
            scenario.components()
        )));
    }
    if scenario.diffusion() != T::zero() {
        return Err(Error::invalid(format!(
            "the ideal solver requires D = 0, scenario has D = {}",
            scenario.diffusion()
        )));
    }
    if scenario.cfl() > T::one() {
        return Err(Error::Cfl {
            ratio: scenario.cfl().as_f64(),
            bound: 1.0,
        });
    }
    let k = IdealCoefficients::from_scenario(scenario);
    let state = ConcentrationField::from_values(scenario.initial_field(), 1, 0, T::zero())?;
    let mut trajectory = Trajectory::start(scenario, SolverMode::Ideal, &state)?;
    let levels = snapshot_levels(scenario, &options.snapshots);
    if levels.contains(&0) {
        trajectory.snapshots.push(state.clone());
    }
    let mut inlet = [T::zero()];
    let mut state = state;
    for n in 0..scenario.grid().n_t {
        let level = n + 1;
        let t_next = scenario.time(level);
        scenario.injection().value_into(t_next, &mut inlet);
        let deficits = trajectory.ledger.current().deficit();
        let w = lw_update(state.values(), inlet[0], &k);
        let u: Vec<T> = w
            .iter()
            .map(|w| u_of_w(*w, k.phase_ratio, k.a, k.b))
            .collect();
        let next =
            ConcentrationField::from_values(u, 1, level, t_next).map_err(|e| e.at_step(level))?;
        trajectory
            .ledger
            .record_step(
                &next,
                state.time(),
                scenario.injection(),
                scenario.isotherm(),
                scenario.velocity(),
                scenario.dx(),
                scenario.dt(),
            )
            .map_err(|e| e.at_step(level))?;
        trajectory.push_level(&next);
        trajectory.diagnostics.push(StepDiagnostics {
            level,
            iterations: 0,
            residual: T::zero(),
            converged: true,
            branches: vec![AdjustBranch::Off],
            deficits,
            min_value: next.min_value(),
        });
        if levels.contains(&level) {
            trajectory.snapshots.push(next.clone());
        }
        state = next;
    }
    trajectory.final_state = state;
    Ok(trajectory)
}
