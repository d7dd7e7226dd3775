//! Grid-convergence ladders and reference comparisons.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::mmocaa::{run_with, RunOptions, SolverMode};
use crate::model::Scenario;
use crate::num::Real;
use crate::reference::{
    analytic_record, fine_grid_reference, l1_error, max_error, ChromatogramRecord, ReferenceCache,
};

/// Where reference outlet curves come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceKind {
    /// Closed form; linear isotherms with `D > 0` only.
    Analytic,
    /// Same scenario on a fine grid, optionally cached.
    FineGrid {
        grid: (usize, usize),
        cache: Option<ReferenceCache>,
    },
}

impl ReferenceKind {
    /// Analytic when the scenario admits it, fine grid otherwise.
    pub fn auto<T: Real>(
        scenario: &Scenario<T>,
        grid: (usize, usize),
        cache: Option<ReferenceCache>,
    ) -> Self {
        let linear = scenario.isotherm().b().iter().all(|b| *b == T::zero());
        if linear && scenario.diffusion() > T::zero() {
            ReferenceKind::Analytic
        } else {
            ReferenceKind::FineGrid { grid, cache }
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ReferenceKind::Analytic => "analytic",
            ReferenceKind::FineGrid { .. } => "fine-grid",
        }
    }

    /// Reference record for `scenario`. Analytic references are evaluated on
    /// the scenario's own time levels.
    pub fn build<T: Real>(&self, scenario: &Scenario<T>) -> Result<ChromatogramRecord<T>> {
        match self {
            ReferenceKind::Analytic => analytic_record(scenario),
            ReferenceKind::FineGrid { grid, cache } => {
                fine_grid_reference(scenario, Some(*grid), cache.as_ref())
            }
        }
    }
}

/// One grid of a ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow<T> {
    pub n_x: usize,
    pub n_t: usize,
    pub l1: Vec<T>,
    pub max_error: Vec<T>,
    pub wall_seconds: f64,
    /// Observed order against the previous row, per component (`None` on the first row).
    pub order: Option<Vec<T>>,
}

/// Parses `nx1:nt1,nx2:nt2,...`.
pub fn parse_ladder(text: &str) -> Result<Vec<(usize, usize)>> {
    let ladder: Vec<(usize, usize)> = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (a, b) = pair
                .split_once(':')
                .ok_or_else(|| Error::invalid(format!("ladder entry '{pair}' is not nx:nt")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::invalid(format!("ladder entry '{pair}': {e}")))
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect::<Result<_>>()?;
    if ladder.is_empty() {
        return Err(Error::invalid("empty grid ladder"));
    }
    Ok(ladder)
}

/// `ln(e_prev / e) / ln(n_x / n_x_prev)` per component.
pub fn observed_order<T: Real>(prev: &[T], next: &[T], refinement: T) -> Vec<T> {
    prev.iter()
        .zip(next)
        .map(|(a, b)| (*a / *b).ln() / refinement.ln())
        .collect()
}

/// Runs `scenario` on every grid of `ladder` (up to `jobs` at a time) and
/// measures the outlet error against `reference`.
pub fn convergence_study<T: Real>(
    scenario: &Scenario<T>,
    ladder: &[(usize, usize)],
    reference: &ReferenceKind,
    mode: Option<SolverMode>,
    jobs: usize,
) -> Result<Vec<StudyRow<T>>> {
    if ladder.is_empty() {
        return Err(Error::invalid("empty grid ladder"));
    }
    let scenarios: Vec<Scenario<T>> = ladder
        .iter()
        .map(|(n_x, n_t)| scenario.with_grid(*n_x, *n_t))
        .collect::<Result<_>>()?;
    // a shared fine-grid reference is built once, before the workers start
    let shared = match reference {
        ReferenceKind::Analytic => None,
        kind => Some(kind.build(scenario)?),
    };

    let slots: Vec<Mutex<Option<Result<StudyRow<T>>>>> =
        ladder.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        if i >= scenarios.len() {
            break;
        }
        let row = measure(&scenarios[i], reference, shared.as_ref(), mode);
        *slots[i].lock().expect("slot lock") = Some(row);
    };
    let jobs = jobs.clamp(1, ladder.len());
    if jobs == 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..jobs {
                s.spawn(worker);
            }
        });
    }

    let mut rows: Vec<StudyRow<T>> = slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("slot lock")
                .expect("every slot filled")
        })
        .collect::<Result<_>>()?;
    for i in 1..rows.len() {
        let refinement = T::from_count(rows[i].n_x) / T::from_count(rows[i - 1].n_x);
        if refinement != T::one() {
            rows[i].order = Some(observed_order(&rows[i - 1].l1, &rows[i].l1, refinement));
        }
    }
    Ok(rows)
}

fn measure<T: Real>(
    scenario: &Scenario<T>,
    reference: &ReferenceKind,
    shared: Option<&ChromatogramRecord<T>>,
    mode: Option<SolverMode>,
) -> Result<StudyRow<T>> {
    let start = Instant::now();
    let trajectory = run_with(
        scenario,
        &RunOptions {
            mode,
            snapshots: Vec::new(),
        },
    )?;
    let wall_seconds = start.elapsed().as_secs_f64();
    let numeric = trajectory.chromatogram();
    let own;
    let reference = match shared {
        Some(r) => r,
        None => {
            own = reference.build(scenario)?;
            &own
        }
    };
    Ok(StudyRow {
        n_x: scenario.grid().n_x,
        n_t: scenario.grid().n_t,
        l1: l1_error(&numeric, reference)?,
        max_error: max_error(&numeric, reference)?,
        wall_seconds,
        order: None,
    })
}

/// CSV `n_x,n_t,component,l1,max_error,wall_seconds[,order]`, one line per
/// grid and component. The order column appears only for ladders of two or
/// more grids.
pub fn write_study_csv<T: Real, W: Write>(rows: &[StudyRow<T>], mut out: W) -> std::io::Result<()> {
    let with_order = rows.len() > 1;
    write!(out, "n_x,n_t,component,l1,max_error,wall_seconds")?;
    if with_order {
        write!(out, ",order")?;
    }
    writeln!(out)?;
    for row in rows {
        for c in 0..row.l1.len() {
            write!(
                out,
                "{},{},{},{:?},{:?},{:.6}",
                row.n_x,
                row.n_t,
                c + 1,
                row.l1[c],
                row.max_error[c],
                row.wall_seconds
            )?;
            if with_order {
                match &row.order {
                    Some(o) => write!(out, ",{:?}", o[c])?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Pointwise comparison of a numeric outlet curve with a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison<T> {
    pub numeric: ChromatogramRecord<T>,
    /// Reference resampled on the numeric time levels.
    pub reference: ChromatogramRecord<T>,
    pub l1: Vec<T>,
    pub max_error: Vec<T>,
}

impl<T: Real> Comparison<T> {
    pub fn new(numeric: ChromatogramRecord<T>, reference: &ChromatogramRecord<T>) -> Result<Self> {
        let l1 = l1_error(&numeric, reference)?;
        let max = max_error(&numeric, reference)?;
        let reference = reference.resample(&numeric.times);
        Ok(Self {
            numeric,
            reference,
            l1,
            max_error: max,
        })
    }

    /// CSV `time,component,numeric,reference,abs_error`.
    pub fn write_overlay_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time,component,numeric,reference,abs_error")?;
        for (k, t) in self.numeric.times.iter().enumerate() {
            for c in 0..self.numeric.components() {
                let u = self.numeric.outlet[c][k];
                let r = self.reference.outlet[c][k];
                writeln!(out, "{t:?},{},{u:?},{r:?},{:?}", c + 1, (u - r).abs())?;
            }
        }
        Ok(())
    }
}

/// Runs `scenario` and compares its outlet curve with `reference`.
pub fn compare<T: Real>(
    scenario: &Scenario<T>,
    reference: &ReferenceKind,
    mode: Option<SolverMode>,
) -> Result<Comparison<T>> {
    let reference = reference.build(scenario)?;
    let numeric = run_with(
        scenario,
        &RunOptions {
            mode,
            snapshots: Vec::new(),
        },
    )?
    .chromatogram();
    Comparison::new(numeric, &reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn ladder_parsing() {
        assert_eq!(
            parse_ladder("50:200,100:400").unwrap(),
            vec![(50, 200), (100, 400)]
        );
        assert_eq!(parse_ladder(" 8:9 ").unwrap(), vec![(8, 9)]);
        assert!(parse_ladder("").is_err());
        assert!(parse_ladder("50-200").is_err());
        assert!(parse_ladder("50:x").is_err());
    }

    #[test]
    fn order_of_exact_halving() {
        let o = observed_order(&[0.04f64], &[0.01], 2.0);
        assert!((o[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn single_row_has_no_order_column() {
        let s = presets::linear_pulse::<f64>(50, 400);
        let rows = convergence_study(&s, &[(50, 400)], &ReferenceKind::Analytic, None, 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].order.is_none());
        let mut buf = Vec::new();
        write_study_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "n_x,n_t,component,l1,max_error,wall_seconds"
        );
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn parallel_rows_match_sequential() {
        let s = presets::linear_pulse::<f64>(25, 200);
        let ladder = [(25, 200), (50, 400), (100, 800)];
        let a = convergence_study(&s, &ladder, &ReferenceKind::Analytic, None, 1).unwrap();
        let b = convergence_study(&s, &ladder, &ReferenceKind::Analytic, None, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(
                (x.n_x, x.n_t, &x.l1, &x.order),
                (y.n_x, y.n_t, &y.l1, &y.order)
            );
        }
        assert!(a[1].order.is_some());
    }

    #[test]
    fn self_comparison_is_zero() {
        let s = presets::langmuir_pulse::<f64>(50, 400);
        let numeric = run_with(&s, &RunOptions::default()).unwrap().chromatogram();
        let cmp = Comparison::new(numeric.clone(), &numeric).unwrap();
        assert_eq!(cmp.l1, vec![0.0]);
        assert_eq!(cmp.max_error, vec![0.0]);
    }

    #[test]
    fn analytic_request_for_nonlinear_fails() {
        let s = presets::langmuir_pulse::<f64>(50, 400);
        let err = compare(&s, &ReferenceKind::Analytic, None).unwrap_err();
        assert!(matches!(err, Error::ReferenceUnavailable(_)));
    }
}
