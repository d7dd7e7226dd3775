//! Physical and numerical configuration of a column run.
//!
//! A [`ScenarioConfig`] is what a user writes down: column geometry, transport
//! coefficients, Langmuir constants, the inlet pulse, the grid and solver knobs.
//! [`Scenario::validate`] checks every invariant once and caches the derived
//! quantities (dispersion `D`, phase ratio `F`, `dx`, `dt`, CFL ratio) so that
//! the solvers never have to re-check them.

use crate::error::{Error, Result};
use crate::isotherm::IsothermParams;
use crate::num::Real;

/// Column geometry and transport data.
///
/// Exactly one of `porosity` / `phase_ratio` and exactly one of
/// `plate_count` / `diffusion` must be supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec<T> {
    pub length: T,
    pub velocity: T,
    pub porosity: Option<T>,
    pub phase_ratio: Option<T>,
    pub plate_count: Option<T>,
    pub diffusion: Option<T>,
}

impl<T: Real> ColumnSpec<T> {
    /// Column described by porosity and number of theoretical plates.
    pub fn from_plates(length: T, velocity: T, porosity: T, plate_count: T) -> Self {
        Self {
            length,
            velocity,
            porosity: Some(porosity),
            phase_ratio: None,
            plate_count: Some(plate_count),
            diffusion: None,
        }
    }

    /// Column described by an explicit phase ratio and dispersion coefficient.
    pub fn explicit(length: T, velocity: T, phase_ratio: T, diffusion: T) -> Self {
        Self {
            length,
            velocity,
            porosity: None,
            phase_ratio: Some(phase_ratio),
            plate_count: None,
            diffusion: Some(diffusion),
        }
    }

    fn check(&self) -> Result<()> {
        positive("column.length", self.length)?;
        positive("column.velocity", self.velocity)?;
        if let Some(eps) = self.porosity {
            if !(eps > T::zero() && eps < T::one()) {
                return Err(Error::invalid(format!(
                    "column.porosity must lie in (0, 1), got {eps}"
                )));
            }
        }
        if let Some(f) = self.phase_ratio {
            non_negative("column.phase_ratio", f)?;
        }
        if let Some(n) = self.plate_count {
            positive("column.plate_count", n)?;
        }
        if let Some(d) = self.diffusion {
            non_negative("column.diffusion", d)?;
        }
        Ok(())
    }
}

/// Dispersion `D` and phase ratio `F` of a column.
///
/// `D = L v / (2 N_t)` when the plate count is given and `F = (1 - eps) / eps`
/// when the porosity is given; explicit values are passed through.
pub fn derive_coefficients<T: Real>(column: &ColumnSpec<T>) -> Result<(T, T)> {
    column.check()?;
    let diffusion = match (column.plate_count, column.diffusion) {
        (Some(n), None) => column.length * column.velocity / (T::lit(2.0) * n),
        (None, Some(d)) => d,
        (Some(_), Some(_)) => {
            return Err(Error::invalid(
                "column: supply exactly one of plate_count and diffusion, not both",
            ))
        }
        (None, None) => {
            return Err(Error::invalid(
                "column: one of plate_count or diffusion is required",
            ))
        }
    };
    let phase_ratio = match (column.porosity, column.phase_ratio) {
        (Some(eps), None) => phase_ratio_from_porosity(eps),
        (None, Some(f)) => f,
        (Some(_), Some(_)) => {
            return Err(Error::invalid(
                "column: supply exactly one of porosity and phase_ratio, not both",
            ))
        }
        (None, None) => {
            return Err(Error::invalid(
                "column: one of porosity or phase_ratio is required",
            ))
        }
    };
    Ok((diffusion, phase_ratio))
}

pub fn phase_ratio_from_porosity<T: Real>(porosity: T) -> T {
    (T::one() - porosity) / porosity
}

pub fn porosity_from_phase_ratio<T: Real>(phase_ratio: T) -> T {
    T::one() / (T::one() + phase_ratio)
}

pub fn plate_count_from_diffusion<T: Real>(length: T, velocity: T, diffusion: T) -> T {
    length * velocity / (T::lit(2.0) * diffusion)
}

/// Langmuir constants as written in a scenario; the phase ratio is attached
/// during validation.
#[derive(Debug, Clone, PartialEq)]
pub struct IsothermSpec<T> {
    pub a: Vec<T>,
    pub b: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InjectionKind {
    #[default]
    Rectangular,
}

/// Inlet feed: a rectangular pulse of height `feed` on `0 < t <= t_inj`.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionProfile<T> {
    pub feed: Vec<T>,
    pub t_inj: T,
    pub kind: InjectionKind,
}

impl<T: Real> InjectionProfile<T> {
    pub fn rectangular(feed: Vec<T>, t_inj: T) -> Self {
        Self {
            feed,
            t_inj,
            kind: InjectionKind::Rectangular,
        }
    }

    pub fn components(&self) -> usize {
        self.feed.len()
    }

    /// True when the pulse is on at time `t`.
    #[inline]
    pub fn is_active(&self, t: T) -> bool {
        match self.kind {
            InjectionKind::Rectangular => t > T::zero() && t <= self.t_inj,
        }
    }

    /// Writes the inlet concentration at time `t` into `out`.
    pub fn value_into(&self, t: T, out: &mut [T]) {
        if self.is_active(t) {
            out.copy_from_slice(&self.feed);
        } else {
            out.iter_mut().for_each(|o| *o = T::zero());
        }
    }

    /// `int_0^t g(s) ds` for component `c`, exact for the rectangular pulse.
    pub fn cumulative(&self, c: usize, t: T) -> T {
        let active = t.min(self.t_inj).max(T::zero());
        self.feed[c] * active
    }
}

/// Inlet concentration vector at time `t`.
pub fn injection_value<T: Real>(profile: &InjectionProfile<T>, t: T) -> Vec<T> {
    let mut out = vec![T::zero(); profile.components()];
    profile.value_into(t, &mut out);
    out
}

/// Space-time grid: `n_x` cells on `[0, L]` (so `n_x + 1` nodes) and `n_t`
/// uniform steps on `[0, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub n_x: usize,
    pub n_t: usize,
    pub t_max: T,
}

impl<T: Real> GridSpec<T> {
    pub fn new(n_x: usize, n_t: usize, t_max: T) -> Self {
        Self { n_x, n_t, t_max }
    }

    pub fn dx(&self, length: T) -> T {
        length / T::from_count(self.n_x)
    }

    pub fn dt(&self) -> T {
        self.t_max / T::from_count(self.n_t)
    }

    pub fn nodes(&self) -> usize {
        self.n_x + 1
    }

    pub fn time(&self, n: usize) -> T {
        T::from_count(n) * self.dt()
    }
}

/// Admissible CFL ratio `v dt / dx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CflMode {
    /// `v dt / dx < 1`: every foot lies in the cell adjacent to its node.
    #[default]
    Strict,
    /// `v dt / dx < K`: the interpolation stencil follows the foot to whatever
    /// cell contains it.
    Relaxed(u32),
}

impl CflMode {
    pub fn bound(self) -> f64 {
        match self {
            CflMode::Strict => 1.0,
            CflMode::Relaxed(k) => k as f64,
        }
    }
}

/// Which arguments of the non-differentiated components are frozen in the
/// secant derivative `(q_i(u_new_i, .) - q_i(u_old_i, .)) / (u_new_i - u_old_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SecantFreeze {
    /// Other components held at the previous time level.
    #[default]
    Old,
    /// Other components held at the current inner iterate.
    Current,
}

/// Granularity of the max/min selection between perturbed feet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdjustScope {
    /// Each component follows the sign of its own mass deficit.
    #[default]
    PerComponent,
    /// All components follow the sign of the summed deficit.
    Global,
}

/// Reading of the nonlinear `(delta_x u)^2` term in the ideal-model update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IdealVariant {
    /// Undivided central difference squared, as the update is usually printed.
    #[default]
    AsPrinted,
    /// `(delta_x u / 2)^2`, consistent with the continuous `w_tt` expansion.
    Corrected,
}

/// Solver knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings<T> {
    /// Foot perturbation `eta` in `x_f = x_i - v dt +/- eta dt dx`, in (0, 1).
    pub eta: T,
    /// Stop the inner iteration once `max |u_l - u_{l-1}| <= inner_tol`.
    pub inner_tol: T,
    pub inner_cap: usize,
    pub mass_adjust: bool,
    /// Dead band for the deficit sign, relative to the mass injected so far.
    pub mass_tol: T,
    pub cfl: CflMode,
    pub secant_freeze: SecantFreeze,
    pub adjust_scope: AdjustScope,
    pub ideal_variant: IdealVariant,
}

impl<T: Real> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            eta: T::lit(0.5),
            // 1e-10 in double precision; single precision cannot resolve that
            inner_tol: T::lit(1e-10).max(T::lit(100.0) * T::epsilon()),
            inner_cap: 50,
            mass_adjust: true,
            mass_tol: T::lit(1e-12),
            cfl: CflMode::Strict,
            secant_freeze: SecantFreeze::Old,
            adjust_scope: AdjustScope::PerComponent,
            ideal_variant: IdealVariant::AsPrinted,
        }
    }
}

/// Column contents at `t = 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialCondition<T> {
    #[default]
    Zero,
    /// One constant per component.
    Uniform(Vec<T>),
    /// Node-major field: `values[node * m + component]`, `n_x + 1` nodes.
    Field(Vec<T>),
}

/// Unvalidated description of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig<T> {
    pub column: ColumnSpec<T>,
    pub isotherm: IsothermSpec<T>,
    pub injection: InjectionProfile<T>,
    pub grid: GridSpec<T>,
    pub initial: InitialCondition<T>,
    pub solver: SolverSettings<T>,
}

impl<T: Real> ScenarioConfig<T> {
    pub fn components(&self) -> usize {
        self.isotherm.a.len()
    }

    /// Converts every scalar to another floating point type.
    pub fn cast<U: Real>(&self) -> ScenarioConfig<U> {
        let c = |x: T| U::lit(x.as_f64());
        let cv = |v: &[T]| v.iter().map(|x| c(*x)).collect::<Vec<U>>();
        ScenarioConfig {
            column: ColumnSpec {
                length: c(self.column.length),
                velocity: c(self.column.velocity),
                porosity: self.column.porosity.map(c),
                phase_ratio: self.column.phase_ratio.map(c),
                plate_count: self.column.plate_count.map(c),
                diffusion: self.column.diffusion.map(c),
            },
            isotherm: IsothermSpec {
                a: cv(&self.isotherm.a),
                b: cv(&self.isotherm.b),
            },
            injection: InjectionProfile {
                feed: cv(&self.injection.feed),
                t_inj: c(self.injection.t_inj),
                kind: self.injection.kind,
            },
            grid: GridSpec::new(self.grid.n_x, self.grid.n_t, c(self.grid.t_max)),
            initial: match &self.initial {
                InitialCondition::Zero => InitialCondition::Zero,
                InitialCondition::Uniform(v) => InitialCondition::Uniform(cv(v)),
                InitialCondition::Field(v) => InitialCondition::Field(cv(v)),
            },
            solver: SolverSettings {
                eta: c(self.solver.eta),
                inner_tol: c(self.solver.inner_tol),
                inner_cap: self.solver.inner_cap,
                mass_adjust: self.solver.mass_adjust,
                mass_tol: c(self.solver.mass_tol),
                cfl: self.solver.cfl,
                secant_freeze: self.solver.secant_freeze,
                adjust_scope: self.solver.adjust_scope,
                ideal_variant: self.solver.ideal_variant,
            },
        }
    }
}

/// A validated scenario with its derived coefficients. Immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    config: ScenarioConfig<T>,
    isotherm: IsothermParams<T>,
    diffusion: T,
    phase_ratio: T,
    dx: T,
    dt: T,
    cfl: T,
}

/// Checks every invariant of `config` and derives `D`, `F`, `dx`, `dt` and the
/// CFL ratio.
pub fn validate_scenario<T: Real>(config: ScenarioConfig<T>) -> Result<Scenario<T>> {
    Scenario::validate(config)
}

impl<T: Real> Scenario<T> {
    pub fn validate(config: ScenarioConfig<T>) -> Result<Self> {
        let (diffusion, phase_ratio) = derive_coefficients(&config.column)?;

        let m = config.components();
        if m == 0 {
            return Err(Error::invalid(
                "isotherm: at least one component is required",
            ));
        }
        if config.isotherm.b.len() != m {
            return Err(Error::invalid(format!(
                "isotherm: a has {m} entries but b has {}",
                config.isotherm.b.len()
            )));
        }
        if config.injection.feed.len() != m {
            return Err(Error::invalid(format!(
                "injection: feed has {} entries, expected {m}",
                config.injection.feed.len()
            )));
        }
        let isotherm = IsothermParams::new(
            config.isotherm.a.clone(),
            config.isotherm.b.clone(),
            phase_ratio,
        )?;

        positive("injection.t_inj", config.injection.t_inj)?;
        for (i, f) in config.injection.feed.iter().enumerate() {
            non_negative(&format!("injection.feed[{i}]"), *f)?;
        }

        let grid = config.grid;
        if grid.n_x < 3 {
            return Err(Error::invalid(format!(
                "grid.n_x = {} is below the 3 cells needed by the quadratic stencil",
                grid.n_x
            )));
        }
        if grid.n_t < 1 {
            return Err(Error::invalid("grid.n_t must be at least 1"));
        }
        positive("grid.t_max", grid.t_max)?;

        match &config.initial {
            InitialCondition::Zero => {}
            InitialCondition::Uniform(v) => {
                if v.len() != m {
                    return Err(Error::invalid(format!(
                        "initial: expected {m} values, got {}",
                        v.len()
                    )));
                }
                for x in v {
                    non_negative("initial", *x)?;
                }
            }
            InitialCondition::Field(v) => {
                if v.len() != m * grid.nodes() {
                    return Err(Error::invalid(format!(
                        "initial: field has {} entries, expected {} nodes x {m} components",
                        v.len(),
                        grid.nodes()
                    )));
                }
                for x in v {
                    non_negative("initial", *x)?;
                }
            }
        }

        let s = &config.solver;
        if !(s.eta > T::zero() && s.eta < T::one()) {
            return Err(Error::invalid(format!(
                "solver.eta must lie in (0, 1), got {}",
                s.eta
            )));
        }
        if !(s.inner_tol > T::zero()) {
            return Err(Error::invalid("solver.inner_tol must be positive"));
        }
        if s.inner_cap == 0 {
            return Err(Error::invalid("solver.inner_cap must be at least 1"));
        }
        if !(s.mass_tol >= T::zero()) {
            return Err(Error::invalid("solver.mass_tol must be non-negative"));
        }
        if let CflMode::Relaxed(0) = s.cfl {
            return Err(Error::invalid(
                "solver.relax_cfl must be a positive integer",
            ));
        }

        let dx = grid.dx(config.column.length);
        let dt = grid.dt();
        let cfl = config.column.velocity * dt / dx;
        let bound = s.cfl.bound();
        if !(cfl.as_f64() < bound) {
            return Err(Error::Cfl {
                ratio: cfl.as_f64(),
                bound,
            });
        }

        Ok(Self {
            config,
            isotherm,
            diffusion,
            phase_ratio,
            dx,
            dt,
            cfl,
        })
    }

    pub fn config(&self) -> &ScenarioConfig<T> {
        &self.config
    }

    pub fn into_config(self) -> ScenarioConfig<T> {
        self.config
    }

    pub fn isotherm(&self) -> &IsothermParams<T> {
        &self.isotherm
    }

    pub fn column(&self) -> &ColumnSpec<T> {
        &self.config.column
    }

    pub fn injection(&self) -> &InjectionProfile<T> {
        &self.config.injection
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.config.grid
    }

    pub fn solver(&self) -> &SolverSettings<T> {
        &self.config.solver
    }

    pub fn components(&self) -> usize {
        self.isotherm.components()
    }

    pub fn nodes(&self) -> usize {
        self.config.grid.nodes()
    }

    pub fn length(&self) -> T {
        self.config.column.length
    }

    pub fn velocity(&self) -> T {
        self.config.column.velocity
    }

    pub fn diffusion(&self) -> T {
        self.diffusion
    }

    pub fn phase_ratio(&self) -> T {
        self.phase_ratio
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// `v dt / dx`.
    pub fn cfl(&self) -> T {
        self.cfl
    }

    /// `t^n = n dt`.
    pub fn time(&self, n: usize) -> T {
        T::from_count(n) * self.dt
    }

    pub fn position(&self, node: usize) -> T {
        T::from_count(node) * self.dx
    }

    /// Node-major initial field.
    pub fn initial_field(&self) -> Vec<T> {
        let m = self.components();
        let nodes = self.nodes();
        match &self.config.initial {
            InitialCondition::Zero => vec![T::zero(); m * nodes],
            InitialCondition::Uniform(v) => (0..nodes).flat_map(|_| v.iter().copied()).collect(),
            InitialCondition::Field(v) => v.clone(),
        }
    }

    /// Same scenario on a different grid.
    pub fn with_grid(&self, n_x: usize, n_t: usize) -> Result<Self> {
        let mut config = self.config.clone();
        if let InitialCondition::Field(_) = config.initial {
            return Err(Error::invalid(
                "cannot regrid a scenario with a node-wise initial field",
            ));
        }
        config.grid = GridSpec::new(n_x, n_t, config.grid.t_max);
        Self::validate(config)
    }

    /// Same scenario with modified solver settings.
    pub fn with_solver(&self, f: impl FnOnce(&mut SolverSettings<T>)) -> Result<Self> {
        let mut config = self.config.clone();
        f(&mut config.solver);
        Self::validate(config)
    }

    /// Same scenario with a modified configuration.
    pub fn modified(&self, f: impl FnOnce(&mut ScenarioConfig<T>)) -> Result<Self> {
        let mut config = self.config.clone();
        f(&mut config);
        Self::validate(config)
    }
}

fn positive<T: Real>(name: &str, x: T) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must be positive and finite, got {x}"
        )))
    }
}

fn non_negative<T: Real>(name: &str, x: T) -> Result<()> {
    if x >= T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must be non-negative and finite, got {x}"
        )))
    }
}
