//! Modified method of characteristics with adjusted advection.
//!
//! One step from level `n` to `n + 1`:
//!
//! 1. trace every node back along `dx/dt = v` and interpolate the old field at
//!    the foot; with mass adjustment on, trace the two perturbed feet
//!    `x_i - v dt +/- eta dt dx` as well and keep, per component, the pointwise
//!    max (mass deficit) or min (mass surplus) of the two candidates;
//! 2. solve `(u - u~)/dt + F A (u - u^n)/dt = D u_xx` implicitly, iterating on
//!    the coupling matrix `A` (secant diagonal, analytic off-diagonals) until
//!    the iterates settle.

use crate::blocksolve::{
    assemble_into, BlockThomas, BlockTridiagonalSystem, CouplingBlocks, StepCoefficients,
};
use crate::characteristics::{trace_field, TraceGeometry, TracedField};
use crate::error::{Error, Result};
use crate::massaudit::{column_holdup, MassLedger};
use crate::model::{AdjustScope, Scenario};
use crate::num::{max_abs_diff, Real};
use crate::reference::ChromatogramRecord;
use std::io::Write;

pub use crate::field::ConcentrationField;

/// Which perturbed foot a component followed during a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjustBranch {
    /// Mass deficit: pointwise max of the two candidates.
    Max,
    /// Mass surplus: pointwise min of the two candidates.
    Min,
    /// Unperturbed foot (adjustment disabled or mass balanced).
    Off,
}

impl AdjustBranch {
    pub fn as_str(self) -> &'static str {
        match self {
            AdjustBranch::Max => "max",
            AdjustBranch::Min => "min",
            AdjustBranch::Off => "off",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics<T> {
    /// Level produced by the step.
    pub level: usize,
    pub iterations: usize,
    /// `max |u_l - u_{l-1}|` of the accepted iterate.
    pub residual: T,
    pub converged: bool,
    pub branches: Vec<AdjustBranch>,
    /// Signed mass deficit per component before the adjustment.
    pub deficits: Vec<T>,
    /// Smallest concentration in the new field; negative values flag undershoots.
    pub min_value: T,
}

/// Result of the inner iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerOutcome<T> {
    pub state: ConcentrationField<T>,
    pub iterations: usize,
    pub residual: T,
}

/// Solver used to produce a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    Mmocaa,
    /// Plain modified method of characteristics (no foot perturbation).
    MmocUnadjusted,
    /// Single-component ideal-model update (`D = 0`).
    Ideal,
}

impl SolverMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverMode::Mmocaa => "mmocaa",
            SolverMode::MmocUnadjusted => "mmoc-unadjusted",
            SolverMode::Ideal => "ideal",
        }
    }

    /// Default solver for a scenario: the ideal update for one component with
    /// `D = 0`, the characteristic stepper otherwise.
    pub fn dispatch<T: Real>(scenario: &Scenario<T>) -> Self {
        if scenario.diffusion() == T::zero() && scenario.components() == 1 {
            SolverMode::Ideal
        } else if scenario.solver().mass_adjust {
            SolverMode::Mmocaa
        } else {
            SolverMode::MmocUnadjusted
        }
    }
}

impl std::str::FromStr for SolverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mmocaa" => Ok(SolverMode::Mmocaa),
            "mmoc-unadjusted" | "mmoc" => Ok(SolverMode::MmocUnadjusted),
            "ideal" => Ok(SolverMode::Ideal),
            other => Err(Error::invalid(format!(
                "unknown solver mode '{other}' (expected mmocaa, mmoc-unadjusted or ideal)"
            ))),
        }
    }
}

/// Extra outputs requested from a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions<T> {
    /// Solver override; `None` dispatches on the scenario.
    pub mode: Option<SolverMode>,
    /// Times at which full fields are kept (nearest time level).
    pub snapshots: Vec<T>,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub mode: SolverMode,
    /// `t^0 .. t^{n_t}`.
    pub times: Vec<T>,
    /// Outlet concentration per component, one entry per time level.
    pub outlet: Vec<Vec<T>>,
    pub snapshots: Vec<ConcentrationField<T>>,
    pub diagnostics: Vec<StepDiagnostics<T>>,
    pub ledger: MassLedger<T>,
    pub final_state: ConcentrationField<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn chromatogram(&self) -> ChromatogramRecord<T> {
        ChromatogramRecord::new(self.times.clone(), self.outlet.clone(), self.mode.as_str())
    }

    pub fn max_iterations(&self) -> usize {
        self.diagnostics
            .iter()
            .map(|d| d.iterations)
            .max()
            .unwrap_or(0)
    }

    /// `|injected - holdup - outflow| / injected` at `t_max`.
    pub fn relative_mass_error(&self) -> Vec<T> {
        self.ledger.current().relative_error()
    }

    /// CSV `time,x,component,u`, one row per snapshot, node and component.
    pub fn write_snapshots_csv<W: Write>(&self, dx: T, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time,x,component,u")?;
        for snap in &self.snapshots {
            for j in 0..snap.nodes() {
                let x = dx * T::from_count(j);
                for (c, u) in snap.node(j).iter().enumerate() {
                    writeln!(out, "{:?},{x:?},{},{u:?}", snap.time(), c + 1)?;
                }
            }
        }
        Ok(())
    }

    /// CSV `level,iterations,residual,branches,min_value`; branches are
    /// `;`-separated per component.
    pub fn write_diagnostics_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "level,iterations,residual,branches,min_value")?;
        for d in &self.diagnostics {
            let branches: Vec<&str> = d.branches.iter().map(|b| b.as_str()).collect();
            writeln!(
                out,
                "{},{},{:?},{},{:?}",
                d.level,
                d.iterations,
                d.residual,
                branches.join(";"),
                d.min_value
            )?;
        }
        Ok(())
    }

    pub(crate) fn start(
        scenario: &Scenario<T>,
        mode: SolverMode,
        state: &ConcentrationField<T>,
    ) -> Result<Self> {
        let n_t = scenario.grid().n_t;
        let m = scenario.components();
        let holdup = column_holdup(state, scenario.isotherm(), scenario.dx())?;
        let mut outlet = vec![Vec::with_capacity(n_t + 1); m];
        for (c, series) in outlet.iter_mut().enumerate() {
            series.push(state.outlet()[c]);
        }
        Ok(Self {
            mode,
            times: (0..=n_t).map(|n| scenario.time(n)).collect(),
            outlet,
            snapshots: Vec::new(),
            diagnostics: Vec::with_capacity(n_t),
            ledger: MassLedger::new(holdup),
            final_state: state.clone(),
        })
    }

    pub(crate) fn push_level(&mut self, state: &ConcentrationField<T>) {
        for (c, series) in self.outlet.iter_mut().enumerate() {
            series.push(state.outlet()[c]);
        }
    }
}

/// Characteristic stepper with reusable work buffers.
pub struct Stepper<'a, T: Real> {
    scenario: &'a Scenario<T>,
    geometry: TraceGeometry<T>,
    coeffs: StepCoefficients<T>,
    adjust: bool,
    blocks: CouplingBlocks<T>,
    next_blocks: CouplingBlocks<T>,
    system: BlockTridiagonalSystem<T>,
    thomas: BlockThomas<T>,
    scratch: Vec<T>,
}

impl<'a, T: Real> Stepper<'a, T> {
    pub fn new(scenario: &'a Scenario<T>) -> Self {
        let nodes = scenario.nodes();
        let m = scenario.components();
        Self {
            scenario,
            geometry: TraceGeometry {
                dx: scenario.dx(),
                length: scenario.length(),
                velocity: scenario.velocity(),
                dt: scenario.dt(),
            },
            coeffs: StepCoefficients::new(
                scenario.phase_ratio(),
                scenario.diffusion(),
                scenario.dt(),
                scenario.dx(),
            ),
            adjust: scenario.solver().mass_adjust,
            blocks: CouplingBlocks::zeros(nodes, m),
            next_blocks: CouplingBlocks::zeros(nodes, m),
            system: BlockTridiagonalSystem::zeros(nodes, m),
            thomas: BlockThomas::new(),
            scratch: vec![T::zero(); m],
        }
    }

    /// Overrides the scenario's mass-adjustment switch.
    pub fn with_adjustment(mut self, on: bool) -> Self {
        self.adjust = on;
        self
    }

    /// Traced field at level `state.level()`, mass-adjusted when enabled.
    pub fn trace(
        &self,
        state: &ConcentrationField<T>,
        ledger: &MassLedger<T>,
    ) -> Result<(TracedField<T>, Vec<AdjustBranch>, Vec<T>)> {
        let profile = self.scenario.injection();
        let m = state.components();
        let mut traced = trace_field(state, &self.geometry, profile, T::zero())?;
        let entry = ledger.current();
        let deficits = entry.deficit();
        if !self.adjust {
            return Ok((traced, vec![AdjustBranch::Off; m], deficits));
        }
        let settings = self.scenario.solver();
        let branch = |d: T, injected: T| {
            let tol = settings.mass_tol * injected.abs();
            if d > tol {
                AdjustBranch::Max
            } else if d < -tol {
                AdjustBranch::Min
            } else {
                AdjustBranch::Off
            }
        };
        let branches: Vec<AdjustBranch> = match settings.adjust_scope {
            AdjustScope::PerComponent => deficits
                .iter()
                .zip(&entry.injected)
                .map(|(d, i)| branch(*d, *i))
                .collect(),
            AdjustScope::Global => {
                let d: T = deficits.iter().copied().sum();
                let i: T = entry.injected.iter().copied().sum();
                vec![branch(d, i); m]
            }
        };
        if branches.iter().all(|b| *b == AdjustBranch::Off) {
            return Ok((traced, branches, deficits));
        }
        let delta = settings.eta * self.geometry.dt * self.geometry.dx;
        let plus = trace_field(state, &self.geometry, profile, delta)?;
        let minus = trace_field(state, &self.geometry, profile, -delta)?;
        for (c, b) in branches.iter().enumerate() {
            match b {
                AdjustBranch::Max => traced.select_component(c, &plus, &minus, T::max),
                AdjustBranch::Min => traced.select_component(c, &plus, &minus, T::min),
                AdjustBranch::Off => {}
            }
        }
        Ok((traced, branches, deficits))
    }

    fn fill_blocks(
        scenario: &Scenario<T>,
        u_prev: &ConcentrationField<T>,
        iterate: &ConcentrationField<T>,
        scratch: &mut [T],
        blocks: &mut CouplingBlocks<T>,
    ) -> Result<()> {
        let p = scenario.isotherm();
        let freeze = scenario.solver().secant_freeze;
        for j in 0..u_prev.nodes() {
            p.secant_into(
                u_prev.node(j),
                iterate.node(j),
                freeze,
                scratch,
                blocks.block_mut(j),
            )?;
        }
        Ok(())
    }

    /// Inner iteration on the coupling matrix, starting from `u_0 = u_prev`.
    pub fn inner(
        &mut self,
        traced: &TracedField<T>,
        u_prev: &ConcentrationField<T>,
        inlet: &[T],
    ) -> Result<InnerOutcome<T>> {
        let settings = self.scenario.solver();
        let level = u_prev.level() + 1;
        let time = self.scenario.time(level);
        let mut current = u_prev.clone();
        current.set_level(level, time);
        let mut next = current.clone();
        Self::fill_blocks(
            self.scenario,
            u_prev,
            &current,
            &mut self.scratch,
            &mut self.blocks,
        )?;
        let mut increment = T::infinity();
        for l in 1..=settings.inner_cap {
            assemble_into(
                traced,
                u_prev,
                &self.blocks,
                self.coeffs,
                inlet,
                &mut self.system,
            )?;
            self.thomas.solve_into(&self.system, next.values_mut())?;
            increment = max_abs_diff(next.values(), current.values());
            std::mem::swap(&mut current, &mut next);
            if increment <= settings.inner_tol {
                return Ok(InnerOutcome {
                    state: current,
                    iterations: l,
                    residual: increment,
                });
            }
            Self::fill_blocks(
                self.scenario,
                u_prev,
                &current,
                &mut self.scratch,
                &mut self.next_blocks,
            )?;
            if self.next_blocks == self.blocks {
                // the next solve would reproduce this iterate exactly
                return Ok(InnerOutcome {
                    state: current,
                    iterations: l,
                    residual: T::zero(),
                });
            }
            std::mem::swap(&mut self.blocks, &mut self.next_blocks);
        }
        Err(Error::NonConvergence {
            iterations: settings.inner_cap,
            residual: increment.as_f64(),
        })
    }

    /// Advances `state` by one time step.
    pub fn step(
        &mut self,
        state: &ConcentrationField<T>,
        ledger: &MassLedger<T>,
    ) -> Result<(ConcentrationField<T>, StepDiagnostics<T>)> {
        let (traced, branches, deficits) = self.trace(state, ledger)?;
        let level = state.level() + 1;
        let mut inlet = vec![T::zero(); state.components()];
        self.scenario
            .injection()
            .value_into(self.scenario.time(level), &mut inlet);
        let outcome = self.inner(&traced, state, &inlet)?;
        let diagnostics = StepDiagnostics {
            level,
            iterations: outcome.iterations,
            residual: outcome.residual,
            converged: true,
            branches,
            deficits,
            min_value: outcome.state.min_value(),
        };
        Ok((outcome.state, diagnostics))
    }
}

/// One step of the scheme from `state` (level `n`) given the mass ledger at level `n`.
pub fn advance_step<T: Real>(
    state: &ConcentrationField<T>,
    scenario: &Scenario<T>,
    ledger: &MassLedger<T>,
) -> Result<(ConcentrationField<T>, StepDiagnostics<T>)> {
    Stepper::new(scenario).step(state, ledger)
}

/// Inner iteration for a given traced field; the inlet value is taken at the new level.
pub fn inner_iteration<T: Real>(
    traced: &TracedField<T>,
    u_prev: &ConcentrationField<T>,
    scenario: &Scenario<T>,
) -> Result<InnerOutcome<T>> {
    let mut inlet = vec![T::zero(); scenario.components()];
    scenario
        .injection()
        .value_into(scenario.time(u_prev.level() + 1), &mut inlet);
    Stepper::new(scenario).inner(traced, u_prev, &inlet)
}

/// Traced field of `state` with the max/min selection between the perturbed feet.
pub fn mass_adjusted_trace<T: Real>(
    state: &ConcentrationField<T>,
    scenario: &Scenario<T>,
    ledger: &MassLedger<T>,
) -> Result<TracedField<T>> {
    Stepper::new(scenario)
        .with_adjustment(true)
        .trace(state, ledger)
        .map(|(traced, _, _)| traced)
}

/// Runs the scenario with the default solver.
pub fn run<T: Real>(scenario: &Scenario<T>) -> Result<Trajectory<T>> {
    run_with(scenario, &RunOptions::default())
}

/// Runs the scenario from `t = 0` to `t_max`.
pub fn run_with<T: Real>(scenario: &Scenario<T>, options: &RunOptions<T>) -> Result<Trajectory<T>> {
    let mode = match options
        .mode
        .unwrap_or_else(|| SolverMode::dispatch(scenario))
    {
        SolverMode::Mmocaa if !scenario.solver().mass_adjust => SolverMode::MmocUnadjusted,
        mode => mode,
    };
    if mode == SolverMode::Ideal {
        return crate::ideal::run_ideal(scenario, options);
    }
    let m = scenario.components();
    let state = ConcentrationField::from_values(scenario.initial_field(), m, 0, T::zero())?;
    let mut trajectory = Trajectory::start(scenario, mode, &state)?;
    let snapshot_levels = snapshot_levels(scenario, &options.snapshots);
    if snapshot_levels.contains(&0) {
        trajectory.snapshots.push(state.clone());
    }

    let mut stepper = Stepper::new(scenario).with_adjustment(mode == SolverMode::Mmocaa);
    let mut state = state;
    for n in 0..scenario.grid().n_t {
        let (next, diagnostics) = stepper
            .step(&state, &trajectory.ledger)
            .map_err(|e| e.at_step(n + 1))?;
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
            .map_err(|e| e.at_step(n + 1))?;
        trajectory.push_level(&next);
        trajectory.diagnostics.push(diagnostics);
        if snapshot_levels.contains(&(n + 1)) {
            trajectory.snapshots.push(next.clone());
        }
        state = next;
    }
    trajectory.final_state = state;
    Ok(trajectory)
}

pub(crate) fn snapshot_levels<T: Real>(scenario: &Scenario<T>, times: &[T]) -> Vec<usize> {
    let n_t = scenario.grid().n_t;
    let mut levels: Vec<usize> = times
        .iter()
        .map(|t| {
            let k = (*t / scenario.dt()).round().max(T::zero());
            k.to_usize().unwrap_or(n_t).min(n_t)
        })
        .collect();
    levels.sort_unstable();
    levels.dedup();
    levels
}
