//! Reference solutions and error metrics.
//!
//! * closed-form outlet response of the linear (`b = 0`) column, from the
//!   semi-infinite step response of `R u_t + v u_x = D u_xx` superposed for
//!   the rectangular pulse;
//! * fine-grid self-reference for nonlinear scenarios, cached on disk under a
//!   content hash of the scenario;
//! * the time-integrated outlet L1 error.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use libm::erfc;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mmocaa::{run_with, RunOptions, SolverMode};
use crate::model::Scenario;
use crate::num::Real;
use crate::scenario_file;
use crate::special::erfcx;

/// Environment variable overriding the reference cache directory.
pub const CACHE_ENV: &str = "CHROMSIM_CACHE_DIR";

/// Grid of the fine-grid self-reference unless overridden.
pub const FINE_GRID: (usize, usize) = (3000, 20000);

/// Outlet time series per component.
#[derive(Debug, Clone, PartialEq)]
pub struct ChromatogramRecord<T> {
    pub times: Vec<T>,
    /// `outlet[c][k]` is component `c` at `times[k]`.
    pub outlet: Vec<Vec<T>>,
    pub label: String,
}

impl<T: Real> ChromatogramRecord<T> {
    pub fn new(times: Vec<T>, outlet: Vec<Vec<T>>, label: impl Into<String>) -> Self {
        Self {
            times,
            outlet,
            label: label.into(),
        }
    }

    pub fn components(&self) -> usize {
        self.outlet.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty() || self.outlet.is_empty()
    }

    /// Component `c` linearly interpolated at `t`, held constant outside the record.
    pub fn value_at(&self, c: usize, t: T) -> T {
        let times = &self.times;
        let series = &self.outlet[c];
        let last = times.len() - 1;
        if t <= times[0] {
            return series[0];
        }
        if t >= times[last] {
            return series[last];
        }
        let k = times.partition_point(|s| *s <= t);
        let (t0, t1) = (times[k - 1], times[k]);
        let w = (t - t0) / (t1 - t0);
        series[k - 1] + w * (series[k] - series[k - 1])
    }

    /// This record linearly resampled at `times`.
    pub fn resample(&self, times: &[T]) -> Self {
        let outlet = (0..self.components())
            .map(|c| times.iter().map(|t| self.value_at(c, *t)).collect())
            .collect();
        Self::new(times.to_vec(), outlet, self.label.clone())
    }

    pub fn cast<U: Real>(&self) -> ChromatogramRecord<U> {
        let conv = |x: &T| U::lit(x.as_f64());
        ChromatogramRecord {
            times: self.times.iter().map(conv).collect(),
            outlet: self
                .outlet
                .iter()
                .map(|s| s.iter().map(conv).collect())
                .collect(),
            label: self.label.clone(),
        }
    }

    /// CSV with header `time,u1,..,um`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "time")?;
        for c in 0..self.components() {
            write!(out, ",u{}", c + 1)?;
        }
        writeln!(out)?;
        for (k, t) in self.times.iter().enumerate() {
            write!(out, "{t:?}")?;
            for series in &self.outlet {
                write!(out, ",{:?}", series[k])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Reads the format written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: BufRead>(input: R, label: impl Into<String>) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::EmptyRecord("missing header".into()))??;
        let m = header.split(',').count().saturating_sub(1);
        if m == 0 {
            return Err(Error::EmptyRecord("no component columns".into()));
        }
        let mut times = Vec::new();
        let mut outlet = vec![Vec::new(); m];
        for (i, line) in lines.enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != m + 1 {
                return Err(Error::Parse {
                    line: i + 2,
                    message: format!("expected {} fields, found {}", m + 1, fields.len()),
                });
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|e| Error::Parse {
                        line: i + 2,
                        message: format!("'{s}': {e}"),
                    })
            };
            times.push(parse(fields[0])?);
            for c in 0..m {
                outlet[c].push(parse(fields[c + 1])?);
            }
        }
        Ok(Self::new(times, outlet, label))
    }
}

/// Constant-coefficient transport `R u_t + v u_x = D u_xx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetardedTransportParams<T> {
    pub retardation: T,
    pub velocity: T,
    pub diffusion: T,
}

impl<T: Real> RetardedTransportParams<T> {
    pub fn new(retardation: T, velocity: T, diffusion: T) -> Result<Self> {
        if !(retardation >= T::one()) {
            return Err(Error::invalid(format!(
                "retardation {retardation} must be >= 1"
            )));
        }
        if !(velocity > T::zero()) || !(diffusion > T::zero()) {
            return Err(Error::invalid(
                "closed-form reference needs v > 0 and D > 0",
            ));
        }
        Ok(Self {
            retardation,
            velocity,
            diffusion,
        })
    }

    /// Parameters of component `c` of a linear scenario.
    pub fn for_component(scenario: &Scenario<T>, c: usize) -> Result<Self> {
        let p = scenario.isotherm();
        if p.b()[c] != T::zero() {
            return Err(Error::ReferenceUnavailable(format!(
                "no closed-form reference for a nonlinear isotherm (b{} = {})",
                c + 1,
                p.b()[c]
            )));
        }
        Self::new(
            T::one() + p.phase_ratio() * p.a()[c],
            scenario.velocity(),
            scenario.diffusion(),
        )
    }

    pub fn effective_velocity(&self) -> T {
        self.velocity / self.retardation
    }

    pub fn effective_diffusion(&self) -> T {
        self.diffusion / self.retardation
    }

    /// Unit step response at `(x, t)` for a semi-infinite column with an inlet step at `t = 0`.
    pub fn step_response(&self, x: T, t: T) -> T {
        if t <= T::zero() {
            return T::zero();
        }
        let (x, t) = (x.as_f64(), t.as_f64());
        let r = self.retardation.as_f64();
        let v = self.velocity.as_f64();
        let d = self.diffusion.as_f64();
        let spread = 2.0 * (d * r * t).sqrt();
        let z1 = (r * x - v * t) / spread;
        let z2 = (r * x + v * t) / spread;
        // exp(v x / D) erfc(z2) = exp(v x / D - z2^2) erfcx(z2), exponent <= 0
        let second = (v * x / d - z2 * z2).exp() * erfcx(z2);
        T::lit(0.5 * (erfc(z1) + second))
    }

    /// Response at `(x, t)` to a rectangular pulse of height `feed` and length `t_inj`.
    pub fn pulse_response(&self, feed: T, t_inj: T, x: T, t: T) -> T {
        let mut c = self.step_response(x, t);
        if t > t_inj {
            c -= self.step_response(x, t - t_inj);
        }
        feed * c
    }
}

/// Closed-form concentration of component `c` at `(x, t)` for a linear scenario.
pub fn linear_analytic<T: Real>(scenario: &Scenario<T>, c: usize, x: T, t: T) -> Result<T> {
    let params = RetardedTransportParams::for_component(scenario, c)?;
    let inj = scenario.injection();
    Ok(params.pulse_response(inj.feed[c], inj.t_inj, x, t))
}

/// Closed-form outlet concentrations at `t` for a linear scenario.
pub fn linear_analytic_outlet<T: Real>(scenario: &Scenario<T>, t: T) -> Result<Vec<T>> {
    (0..scenario.components())
        .map(|c| linear_analytic(scenario, c, scenario.length(), t))
        .collect()
}

/// Closed-form outlet record on the scenario's time levels.
pub fn analytic_record<T: Real>(scenario: &Scenario<T>) -> Result<ChromatogramRecord<T>> {
    let times: Vec<T> = (0..=scenario.grid().n_t)
        .map(|n| scenario.time(n))
        .collect();
    let params: Vec<RetardedTransportParams<T>> = (0..scenario.components())
        .map(|c| RetardedTransportParams::for_component(scenario, c))
        .collect::<Result<_>>()?;
    let inj = scenario.injection();
    let l = scenario.length();
    let outlet = params
        .iter()
        .enumerate()
        .map(|(c, p)| {
            times
                .iter()
                .map(|t| p.pulse_response(inj.feed[c], inj.t_inj, l, *t))
                .collect()
        })
        .collect();
    Ok(ChromatogramRecord::new(times, outlet, "analytic"))
}

/// `sum_k (t_k - t_{k-1}) |u_num(t_k) - u_ref(t_k)|` per component over the
/// numeric time levels `k >= 1`, with the reference resampled linearly.
pub fn l1_error<T: Real>(
    numeric: &ChromatogramRecord<T>,
    reference: &ChromatogramRecord<T>,
) -> Result<Vec<T>> {
    check_pair(numeric, reference)?;
    Ok((0..numeric.components())
        .map(|c| {
            let mut total = T::zero();
            for k in 1..numeric.len() {
                let t = numeric.times[k];
                let dt = t - numeric.times[k - 1];
                total += dt * (numeric.outlet[c][k] - reference.value_at(c, t)).abs();
            }
            total
        })
        .collect())
}

/// `max_k |u_num(t_k) - u_ref(t_k)|` per component.
pub fn max_error<T: Real>(
    numeric: &ChromatogramRecord<T>,
    reference: &ChromatogramRecord<T>,
) -> Result<Vec<T>> {
    check_pair(numeric, reference)?;
    Ok((0..numeric.components())
        .map(|c| {
            numeric
                .times
                .iter()
                .zip(&numeric.outlet[c])
                .map(|(t, u)| (*u - reference.value_at(c, *t)).abs())
                .fold(T::zero(), T::max)
        })
        .collect())
}

fn check_pair<T: Real>(
    numeric: &ChromatogramRecord<T>,
    reference: &ChromatogramRecord<T>,
) -> Result<()> {
    if numeric.is_empty() {
        return Err(Error::EmptyRecord(format!(
            "numeric record '{}'",
            numeric.label
        )));
    }
    if reference.is_empty() {
        return Err(Error::EmptyRecord(format!(
            "reference record '{}'",
            reference.label
        )));
    }
    if numeric.components() != reference.components() {
        return Err(Error::Dimension(format!(
            "numeric record has {} components, reference has {}",
            numeric.components(),
            reference.components()
        )));
    }
    Ok(())
}

/// On-disk store of fine-grid references, one CSV per scenario hash.
///
/// Files are written to a temporary name and renamed into place, so readers
/// never observe a partial record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceCache {
    dir: PathBuf,
}

impl ReferenceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// `$CHROMSIM_CACHE_DIR` when set, `fallback` otherwise.
    pub fn from_env_or(fallback: impl Into<PathBuf>) -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(dir) if !dir.is_empty() => Self::new(dir),
            _ => Self::new(fallback),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.csv"))
    }

    pub fn load<T: Real>(&self, key: &str) -> Result<Option<ChromatogramRecord<T>>> {
        let path = self.path_for(key);
        match fs::File::open(&path) {
            Ok(file) => ChromatogramRecord::read_csv(BufReader::new(file), "fine-grid").map(Some),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn store<T: Real>(&self, key: &str, record: &ChromatogramRecord<T>) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(key);
        let tmp = self.dir.join(format!(".{key}.{}.tmp", std::process::id()));
        {
            let mut out = std::io::BufWriter::new(fs::File::create(&tmp)?);
            record.write_csv(&mut out)?;
            out.flush()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(path)
    }
}

/// Content hash of a scenario as run on a given grid.
pub fn scenario_key<T: Real>(scenario: &Scenario<T>) -> String {
    let mut h = Sha256::new();
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update([0u8]);
    h.update(std::any::type_name::<T>().as_bytes());
    h.update([0u8]);
    h.update(scenario_file::render(scenario.config()).as_bytes());
    hex::encode(h.finalize())
}

/// Outlet record of the scenario rerun on a fine grid (default [`FINE_GRID`]),
/// served from `cache` when present.
pub fn fine_grid_reference<T: Real>(
    scenario: &Scenario<T>,
    grid: Option<(usize, usize)>,
    cache: Option<&ReferenceCache>,
) -> Result<ChromatogramRecord<T>> {
    let (n_x, n_t) = grid.unwrap_or(FINE_GRID);
    let fine = scenario.with_grid(n_x, n_t)?;
    let key = scenario_key(&fine);
    if let Some(cache) = cache {
        if let Some(record) = cache.load(&key)? {
            if record.components() == fine.components() && record.len() == n_t + 1 {
                return Ok(record);
            }
        }
    }
    let options = RunOptions {
        mode: Some(SolverMode::dispatch(&fine)),
        snapshots: Vec::new(),
    };
    let mut record = run_with(&fine, &options)?.chromatogram();
    record.label = "fine-grid".into();
    if let Some(cache) = cache {
        cache.store(&key, &record)?;
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use proptest::prelude::*;

    fn record(values: Vec<f64>, dt: f64) -> ChromatogramRecord<f64> {
        let times = (0..values.len()).map(|k| k as f64 * dt).collect();
        ChromatogramRecord::new(times, vec![values], "test")
    }

    #[test]
    fn identical_records_have_zero_error() {
        let r = record(vec![0.0, 0.3, 0.9, 0.2], 0.5);
        assert_eq!(l1_error(&r, &r).unwrap(), vec![0.0]);
        assert_eq!(max_error(&r, &r).unwrap(), vec![0.0]);
    }

    #[test]
    fn constant_offset_integrates_exactly() {
        let n = 700;
        let base: Vec<f64> = (0..=n).map(|k| (k as f64 * 0.01).sin()).collect();
        let shifted: Vec<f64> = base.iter().map(|v| v + 0.25).collect();
        let e = l1_error(&record(shifted, 0.01), &record(base, 0.01)).unwrap()[0];
        assert!((e - 0.25 * 7.0).abs() < 1e-12);
    }

    #[test]
    fn empty_and_mismatched_records_are_rejected() {
        let r = record(vec![1.0, 2.0], 1.0);
        let empty = ChromatogramRecord::<f64>::new(vec![], vec![], "e");
        assert!(matches!(l1_error(&empty, &r), Err(Error::EmptyRecord(_))));
        assert!(matches!(l1_error(&r, &empty), Err(Error::EmptyRecord(_))));
        let two = ChromatogramRecord::new(vec![0.0, 1.0], vec![vec![0.0; 2], vec![0.0; 2]], "2");
        assert!(matches!(l1_error(&r, &two), Err(Error::Dimension(_))));
    }

    #[test]
    fn resampling_is_linear() {
        let coarse = record(vec![0.0, 2.0, 4.0], 1.0);
        let fine = coarse.resample(&[0.0, 0.5, 1.25, 2.0, 3.0]);
        assert_eq!(fine.outlet[0], vec![0.0, 1.0, 2.5, 4.0, 4.0]);
    }

    #[test]
    fn analytic_edge_values() {
        let s = presets::linear_pulse::<f64>(100, 1400);
        assert_eq!(linear_analytic_outlet(&s, 0.0).unwrap(), vec![0.0]);
        let late = linear_analytic_outlet(&s, 40.0).unwrap()[0];
        assert!(late.abs() < 1e-12, "{late}");
        // plateau between breakthrough and washout
        let mid = linear_analytic_outlet(&s, 4.0).unwrap()[0];
        assert!((mid - 1.0).abs() < 1e-6, "{mid}");
        let nonlinear = presets::langmuir_pulse::<f64>(50, 400);
        assert!(matches!(
            linear_analytic_outlet(&nonlinear, 1.0),
            Err(Error::ReferenceUnavailable(_))
        ));
    }

    #[test]
    fn breakthrough_midpoint_near_retention_time() {
        let s = presets::linear_pulse::<f64>(100, 1400);
        // step response at x = L crosses 1/2 slightly before t = R L / v = 2.5
        let p = RetardedTransportParams::for_component(&s, 0).unwrap();
        let at = |t: f64| p.step_response(1.0, t);
        assert!(at(2.45) < 0.5 && at(2.55) > 0.5);
    }

    #[test]
    fn analytic_satisfies_the_transport_equation() {
        let p = RetardedTransportParams::new(2.5, 1.0, 0.01).unwrap();
        let u = |x: f64, t: f64| p.pulse_response(1.0, 3.0, x, t);
        for &(x, t) in &[(0.5, 1.2), (1.0, 2.3), (0.8, 5.1), (1.3, 6.0)] {
            let mut res = Vec::new();
            for &h in &[1e-2, 5e-3] {
                let ut = (u(x, t + h) - u(x, t - h)) / (2.0 * h);
                let ux = (u(x + h, t) - u(x - h, t)) / (2.0 * h);
                let uxx = (u(x + h, t) - 2.0 * u(x, t) + u(x - h, t)) / (h * h);
                res.push((2.5 * ut + ux - 0.01 * uxx).abs());
            }
            // second-order consistency of the probe
            assert!(
                res[1] <= res[0] / 3.0 || res[1] < 1e-9,
                "{res:?} at ({x}, {t})"
            );
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let r = ChromatogramRecord::new(
            vec![0.0, 0.1, 0.2],
            vec![
                vec![0.0, 1.0 / 3.0, 2e-17],
                vec![1.0, 0.5, std::f64::consts::PI],
            ],
            "x",
        );
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time,u1,u2\n"));
        let back = ChromatogramRecord::<f64>::read_csv(&buf[..], "x").unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn cache_serves_identical_record() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReferenceCache::new(dir.path());
        let s = presets::langmuir_pulse::<f64>(20, 100);
        let first = fine_grid_reference(&s, Some((40, 200)), Some(&cache)).unwrap();
        let key = scenario_key(&s.with_grid(40, 200).unwrap());
        assert!(cache.path_for(&key).exists());
        let second = fine_grid_reference(&s, Some((40, 200)), Some(&cache)).unwrap();
        assert_eq!(first, second);
        let uncached = fine_grid_reference(&s, Some((40, 200)), None).unwrap();
        assert_eq!(first, uncached);
    }

    #[test]
    fn key_depends_on_content() {
        let a = presets::langmuir_pulse::<f64>(50, 400);
        let b = a.with_solver(|k| k.eta = 0.25).unwrap();
        assert_ne!(scenario_key(&a), scenario_key(&b));
        assert_eq!(scenario_key(&a), scenario_key(&a.clone()));
    }

    fn series() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-5.0f64..5.0, 12)
    }

    proptest! {
        #[test]
        fn l1_is_a_metric(a in series(), b in series(), c in series()) {
            let (ra, rb, rc) = (record(a.clone(), 0.1), record(b, 0.1), record(c, 0.1));
            let ab = l1_error(&ra, &rb).unwrap()[0];
            let ba = l1_error(&rb, &ra).unwrap()[0];
            let ac = l1_error(&ra, &rc).unwrap()[0];
            let cb = l1_error(&rc, &rb).unwrap()[0];
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-15);
            prop_assert!(ab <= ac + cb + 1e-12);
            prop_assert_eq!(l1_error(&ra, &ra).unwrap()[0], 0.0);
        }
    }
}
