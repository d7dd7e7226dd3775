//! Discrete mass bookkeeping.
//!
//! Per component the ledger tracks the mass fed through the inlet (plus the
//! initial column content), the column holdup `int (u + F q) dx` by the
//! trapezoid rule, and the convective outflow `v dt sum_k u_N^k` (rectangle
//! rule at the new levels). The deficit `injected - holdup - outflow` drives
//! the max/min selection of the adjusted-advection step.

use std::io::Write;

use crate::error::Result;
use crate::field::ConcentrationField;
use crate::isotherm::IsothermParams;
use crate::model::InjectionProfile;
use crate::num::Real;

/// `v int_0^t g(s) ds` per component.
pub fn injected_mass<T: Real>(profile: &InjectionProfile<T>, t: T, velocity: T) -> Vec<T> {
    (0..profile.components())
        .map(|c| velocity * profile.cumulative(c, t))
        .collect()
}

/// Trapezoidal `int_0^L (u_i + F q_i(u)) dx` per component.
pub fn column_holdup<T: Real>(
    state: &ConcentrationField<T>,
    params: &IsothermParams<T>,
    dx: T,
) -> Result<Vec<T>> {
    let m = state.components();
    let nodes = state.nodes();
    let f = params.phase_ratio();
    let mut q = vec![T::zero(); m];
    let mut total = vec![T::zero(); m];
    let half = T::lit(0.5);
    for j in 0..nodes {
        let u = state.node(j);
        params.q_into(u, &mut q)?;
        let w = if j == 0 || j + 1 == nodes {
            half
        } else {
            T::one()
        };
        for c in 0..m {
            total[c] += w * (u[c] + f * q[c]);
        }
    }
    Ok(total.into_iter().map(|t| t * dx).collect())
}

/// `v dt sum_{k=1..n} u_N^k` per component, for outlet series indexed by level.
pub fn outflow_mass<T: Real>(outlet: &[Vec<T>], velocity: T, dt: T) -> Vec<T> {
    outlet
        .iter()
        .map(|series| {
            let s: T = series.iter().skip(1).copied().sum();
            velocity * dt * s
        })
        .collect()
}

/// Ledger totals at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry<T> {
    pub level: usize,
    pub time: T,
    pub injected: Vec<T>,
    pub holdup: Vec<T>,
    pub outflow: Vec<T>,
}

impl<T: Real> LedgerEntry<T> {
    pub fn deficit(&self) -> Vec<T> {
        self.injected
            .iter()
            .zip(&self.holdup)
            .zip(&self.outflow)
            .map(|((i, h), o)| *i - *h - *o)
            .collect()
    }

    /// `|injected - holdup - outflow| / injected` per component (0 when nothing
    /// was injected).
    pub fn relative_error(&self) -> Vec<T> {
        self.deficit()
            .iter()
            .zip(&self.injected)
            .map(|(d, i)| {
                if *i > T::zero() {
                    d.abs() / *i
                } else {
                    d.abs()
                }
            })
            .collect()
    }
}

/// Signed mass deficit `injected - holdup - outflow` per component.
pub fn deficit<T: Real>(ledger: &MassLedger<T>) -> Vec<T> {
    ledger.current().deficit()
}

/// Running mass totals of one run, with the full per-level history.
#[derive(Debug, Clone, PartialEq)]
pub struct MassLedger<T> {
    history: Vec<LedgerEntry<T>>,
}

impl<T: Real> MassLedger<T> {
    /// Ledger at level 0: the initial column content counts as injected.
    pub fn new(initial_holdup: Vec<T>) -> Self {
        let m = initial_holdup.len();
        Self {
            history: vec![LedgerEntry {
                level: 0,
                time: T::zero(),
                injected: initial_holdup.clone(),
                holdup: initial_holdup,
                outflow: vec![T::zero(); m],
            }],
        }
    }

    pub fn components(&self) -> usize {
        self.current().injected.len()
    }

    pub fn current(&self) -> &LedgerEntry<T> {
        self.history.last().expect("ledger has a level-0 entry")
    }

    pub fn history(&self) -> &[LedgerEntry<T>] {
        &self.history
    }

    /// Appends the next level from single-step increments and the new holdup.
    pub fn record(
        &mut self,
        level: usize,
        time: T,
        injected_increment: &[T],
        holdup: Vec<T>,
        outflow_increment: &[T],
    ) {
        let prev = self.current();
        let injected = prev
            .injected
            .iter()
            .zip(injected_increment)
            .map(|(a, b)| *a + *b)
            .collect();
        let outflow = prev
            .outflow
            .iter()
            .zip(outflow_increment)
            .map(|(a, b)| *a + *b)
            .collect();
        self.history.push(LedgerEntry {
            level,
            time,
            injected,
            holdup,
            outflow,
        });
    }

    /// Records the step `t_prev -> t_next` for a new state.
    #[allow(clippy::too_many_arguments)]
    pub fn record_step(
        &mut self,
        state: &ConcentrationField<T>,
        t_prev: T,
        profile: &InjectionProfile<T>,
        params: &IsothermParams<T>,
        velocity: T,
        dx: T,
        dt: T,
    ) -> Result<()> {
        let t_next = state.time();
        let injected: Vec<T> = (0..profile.components())
            .map(|c| velocity * (profile.cumulative(c, t_next) - profile.cumulative(c, t_prev)))
            .collect();
        let outflow: Vec<T> = state.outlet().iter().map(|u| velocity * dt * *u).collect();
        let holdup = column_holdup(state, params, dx)?;
        self.record(state.level(), t_next, &injected, holdup, &outflow);
        Ok(())
    }

    /// Writes the history as CSV: `time,component,injected,holdup,outflow,deficit`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time,component,injected,holdup,outflow,deficit")?;
        for e in &self.history {
            let d = e.deficit();
            for (c, deficit) in d.iter().enumerate() {
                writeln!(
                    out,
                    "{:?},{},{:?},{:?},{:?},{:?}",
                    e.time,
                    c + 1,
                    e.injected[c],
                    e.holdup[c],
                    e.outflow[c],
                    deficit
                )?;
            }
        }
        Ok(())
    }
}
