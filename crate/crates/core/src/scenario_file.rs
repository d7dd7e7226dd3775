//! Scenario text format.
//!
//! ```text
//! # comment
//! [column]
//! length = 1
//! velocity = 1
//! phase_ratio = 1.5        # or: porosity = 0.4
//! plate_count = 250        # or: diffusion = 0.002
//!
//! [isotherm]
//! a = 0.5, 1
//! b = 0.05, 0.1
//!
//! [injection]
//! feed = 10, 10
//! t_inj = 2
//! kind = rectangular
//!
//! [grid]
//! n_x = 100
//! n_t = 400
//! t_max = 7
//!
//! [solver]                 # optional, every key defaults
//! eta = 0.5
//! relax_cfl = 2            # 0 = strict v dt / dx < 1
//!
//! [initial]                # optional, default zero
//! u0 = 0, 0
//! ```
//!
//! Vectors are comma separated. `render` writes every key, defaults included,
//! and parses back to the same configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    AdjustScope, CflMode, ColumnSpec, GridSpec, IdealVariant, InitialCondition, InjectionKind,
    InjectionProfile, IsothermSpec, ScenarioConfig, SecantFreeze, SolverSettings,
};
use crate::num::Real;

const SECTIONS: &[(&str, &[&str])] = &[
    (
        "column",
        &[
            "length",
            "velocity",
            "porosity",
            "phase_ratio",
            "plate_count",
            "diffusion",
        ],
    ),
    ("isotherm", &["a", "b", "m"]),
    ("injection", &["feed", "t_inj", "kind"]),
    ("grid", &["n_x", "n_t", "t_max"]),
    (
        "solver",
        &[
            "eta",
            "inner_tol",
            "inner_cap",
            "mass_adjust",
            "mass_tol",
            "relax_cfl",
            "secant_freeze",
            "adjust_scope",
            "ideal_variant",
        ],
    ),
    ("initial", &["u0", "field"]),
];

struct Entry {
    line: usize,
    value: String,
}

struct Document {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl Document {
    fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split(['#', ';']).next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| {
                        parse_error(line, format!("unterminated section header '{content}'"))
                    })?
                    .trim();
                if !SECTIONS.iter().any(|(s, _)| *s == name) {
                    return Err(parse_error(line, format!("unknown section [{name}]")));
                }
                if sections.contains_key(name) {
                    return Err(parse_error(line, format!("duplicate section [{name}]")));
                }
                sections.insert(name.to_string(), BTreeMap::new());
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                parse_error(line, format!("expected 'key = value', found '{content}'"))
            })?;
            let key = key.trim();
            let section = current
                .as_ref()
                .ok_or_else(|| parse_error(line, format!("key '{key}' outside any section")))?;
            let allowed = SECTIONS
                .iter()
                .find(|(s, _)| s == section)
                .map(|(_, keys)| *keys)
                .unwrap_or(&[]);
            if !allowed.contains(&key) {
                return Err(parse_error(
                    line,
                    format!("unknown key '{key}' in [{section}]"),
                ));
            }
            let map = sections
                .get_mut(section)
                .expect("section inserted on header");
            if map.contains_key(key) {
                return Err(parse_error(
                    line,
                    format!("duplicate key '{key}' in [{section}]"),
                ));
            }
            map.insert(
                key.to_string(),
                Entry {
                    line,
                    value: value.trim().to_string(),
                },
            );
        }
        Ok(Self { sections })
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    fn require(&self, section: &str, key: &str) -> Result<&Entry> {
        self.get(section, key)
            .ok_or_else(|| Error::invalid(format!("missing key '{key}' in [{section}]")))
    }

    fn scalar<T: Real>(&self, section: &str, key: &str) -> Result<Option<T>> {
        self.get(section, key).map(|e| number(e)).transpose()
    }

    fn vector<T: Real>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        self.get(section, key)
            .map(|e| {
                e.value
                    .split(',')
                    .map(|part| {
                        number(&Entry {
                            line: e.line,
                            value: part.trim().to_string(),
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    fn count(&self, section: &str, key: &str) -> Result<Option<usize>> {
        self.get(section, key)
            .map(|e| {
                e.value
                    .parse::<usize>()
                    .map_err(|err| parse_error(e.line, format!("'{key}': '{}': {err}", e.value)))
            })
            .transpose()
    }
}

fn parse_error(line: usize, message: String) -> Error {
    Error::Parse { line, message }
}

fn number<T: Real>(e: &Entry) -> Result<T> {
    let x: f64 = e
        .value
        .parse()
        .map_err(|err| parse_error(e.line, format!("'{}': {err}", e.value)))?;
    Ok(T::lit(x))
}

fn keyword<V>(e: &Entry, options: &[(&str, V)]) -> Result<V>
where
    V: Copy,
{
    options
        .iter()
        .find(|(name, _)| *name == e.value)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            parse_error(
                e.line,
                format!("'{}' is not one of {}", e.value, names.join(", ")),
            )
        })
}

const FREEZE: &[(&str, SecantFreeze)] = &[
    ("old", SecantFreeze::Old),
    ("current", SecantFreeze::Current),
];
const SCOPE: &[(&str, AdjustScope)] = &[
    ("per_component", AdjustScope::PerComponent),
    ("global", AdjustScope::Global),
];
const VARIANT: &[(&str, IdealVariant)] = &[
    ("as_printed", IdealVariant::AsPrinted),
    ("corrected", IdealVariant::Corrected),
];
const BOOL: &[(&str, bool)] = &[("true", true), ("false", false)];

/// Parses scenario text. Structural errors carry the line number.
pub fn parse<T: Real>(text: &str) -> Result<ScenarioConfig<T>> {
    let doc = Document::parse(text)?;
    for required in ["column", "isotherm", "injection", "grid"] {
        if !doc.sections.contains_key(required) {
            return Err(Error::invalid(format!("missing section [{required}]")));
        }
    }

    let column = ColumnSpec {
        length: number(doc.require("column", "length")?)?,
        velocity: number(doc.require("column", "velocity")?)?,
        porosity: doc.scalar("column", "porosity")?,
        phase_ratio: doc.scalar("column", "phase_ratio")?,
        plate_count: doc.scalar("column", "plate_count")?,
        diffusion: doc.scalar("column", "diffusion")?,
    };

    let a: Vec<T> = doc
        .vector("isotherm", "a")?
        .ok_or_else(|| Error::invalid("missing key 'a' in [isotherm]"))?;
    let b: Vec<T> = doc
        .vector("isotherm", "b")?
        .ok_or_else(|| Error::invalid("missing key 'b' in [isotherm]"))?;
    if let Some(m) = doc.count("isotherm", "m")? {
        if m != a.len() {
            let line = doc.require("isotherm", "m")?.line;
            return Err(parse_error(
                line,
                format!("m = {m} but a has {} entries", a.len()),
            ));
        }
    }

    let kind = match doc.get("injection", "kind") {
        Some(e) => keyword(e, &[("rectangular", InjectionKind::Rectangular)])?,
        None => InjectionKind::Rectangular,
    };
    let injection = InjectionProfile {
        feed: doc
            .vector("injection", "feed")?
            .ok_or_else(|| Error::invalid("missing key 'feed' in [injection]"))?,
        t_inj: number(doc.require("injection", "t_inj")?)?,
        kind,
    };

    let grid = GridSpec::new(
        doc.count("grid", "n_x")?
            .ok_or_else(|| Error::invalid("missing key 'n_x' in [grid]"))?,
        doc.count("grid", "n_t")?
            .ok_or_else(|| Error::invalid("missing key 'n_t' in [grid]"))?,
        number(doc.require("grid", "t_max")?)?,
    );

    let mut solver = SolverSettings::<T>::default();
    if let Some(x) = doc.scalar("solver", "eta")? {
        solver.eta = x;
    }
    if let Some(x) = doc.scalar("solver", "inner_tol")? {
        solver.inner_tol = x;
    }
    if let Some(x) = doc.count("solver", "inner_cap")? {
        solver.inner_cap = x;
    }
    if let Some(e) = doc.get("solver", "mass_adjust") {
        solver.mass_adjust = keyword(e, BOOL)?;
    }
    if let Some(x) = doc.scalar("solver", "mass_tol")? {
        solver.mass_tol = x;
    }
    if let Some(k) = doc.count("solver", "relax_cfl")? {
        solver.cfl = match k {
            0 => CflMode::Strict,
            k => CflMode::Relaxed(u32::try_from(k).map_err(|_| {
                parse_error(
                    doc.get("solver", "relax_cfl").map_or(0, |e| e.line),
                    format!("relax_cfl {k} too large"),
                )
            })?),
        };
    }
    if let Some(e) = doc.get("solver", "secant_freeze") {
        solver.secant_freeze = keyword(e, FREEZE)?;
    }
    if let Some(e) = doc.get("solver", "adjust_scope") {
        solver.adjust_scope = keyword(e, SCOPE)?;
    }
    if let Some(e) = doc.get("solver", "ideal_variant") {
        solver.ideal_variant = keyword(e, VARIANT)?;
    }

    let initial = match (
        doc.vector("initial", "u0")?,
        doc.vector("initial", "field")?,
    ) {
        (Some(_), Some(_)) => {
            return Err(Error::invalid(
                "[initial] takes either u0 or field, not both",
            ))
        }
        (Some(u0), None) => {
            if u0.iter().all(|x: &T| *x == T::zero()) {
                InitialCondition::Zero
            } else {
                InitialCondition::Uniform(u0)
            }
        }
        (None, Some(field)) => InitialCondition::Field(field),
        (None, None) => InitialCondition::Zero,
    };

    Ok(ScenarioConfig {
        column,
        isotherm: IsothermSpec { a, b },
        injection,
        grid,
        initial,
        solver,
    })
}

/// Reads and parses a scenario file.
pub fn load<T: Real>(path: &Path) -> Result<ScenarioConfig<T>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse(&text)
}

fn join<T: Real>(v: &[T]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn name_of<V: PartialEq + Copy>(options: &[(&'static str, V)], v: V) -> &'static str {
    options
        .iter()
        .find(|(_, x)| *x == v)
        .map(|(n, _)| *n)
        .unwrap_or("?")
}

/// Canonical text of a configuration, every key written out.
pub fn render<T: Real>(config: &ScenarioConfig<T>) -> String {
    let mut s = String::new();
    let c = &config.column;
    let _ = writeln!(s, "[column]");
    let _ = writeln!(s, "length = {}", c.length);
    let _ = writeln!(s, "velocity = {}", c.velocity);
    if let Some(x) = c.porosity {
        let _ = writeln!(s, "porosity = {x}");
    }
    if let Some(x) = c.phase_ratio {
        let _ = writeln!(s, "phase_ratio = {x}");
    }
    if let Some(x) = c.plate_count {
        let _ = writeln!(s, "plate_count = {x}");
    }
    if let Some(x) = c.diffusion {
        let _ = writeln!(s, "diffusion = {x}");
    }
    let _ = writeln!(s, "\n[isotherm]");
    let _ = writeln!(s, "m = {}", config.isotherm.a.len());
    let _ = writeln!(s, "a = {}", join(&config.isotherm.a));
    let _ = writeln!(s, "b = {}", join(&config.isotherm.b));
    let _ = writeln!(s, "\n[injection]");
    let _ = writeln!(s, "feed = {}", join(&config.injection.feed));
    let _ = writeln!(s, "t_inj = {}", config.injection.t_inj);
    let _ = writeln!(s, "kind = rectangular");
    let g = &config.grid;
    let _ = writeln!(s, "\n[grid]");
    let _ = writeln!(s, "n_x = {}", g.n_x);
    let _ = writeln!(s, "n_t = {}", g.n_t);
    let _ = writeln!(s, "t_max = {}", g.t_max);
    let k = &config.solver;
    let _ = writeln!(s, "\n[solver]");
    let _ = writeln!(s, "eta = {}", k.eta);
    let _ = writeln!(s, "inner_tol = {}", k.inner_tol);
    let _ = writeln!(s, "inner_cap = {}", k.inner_cap);
    let _ = writeln!(s, "mass_adjust = {}", k.mass_adjust);
    let _ = writeln!(s, "mass_tol = {}", k.mass_tol);
    let relax = match k.cfl {
        CflMode::Strict => 0,
        CflMode::Relaxed(k) => k,
    };
    let _ = writeln!(s, "relax_cfl = {relax}");
    let _ = writeln!(s, "secant_freeze = {}", name_of(FREEZE, k.secant_freeze));
    let _ = writeln!(s, "adjust_scope = {}", name_of(SCOPE, k.adjust_scope));
    let _ = writeln!(s, "ideal_variant = {}", name_of(VARIANT, k.ideal_variant));
    match &config.initial {
        InitialCondition::Zero => {}
        InitialCondition::Uniform(v) => {
            let _ = writeln!(s, "\n[initial]\nu0 = {}", join(v));
        }
        InitialCondition::Field(v) => {
            let _ = writeln!(s, "\n[initial]\nfield = {}", join(v));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    const TABLE1: &str = "\
# linear pulse
[column]
length = 1
velocity = 1
phase_ratio = 1.5
plate_count = 250

[isotherm]
a = 1
b = 0

[injection]
feed = 1
t_inj = 3

[grid]
n_x = 100
n_t = 1400
t_max = 7
";

    #[test]
    fn parses_minimal_file_with_defaults() {
        let cfg: ScenarioConfig<f64> = parse(TABLE1).unwrap();
        assert_eq!(cfg, presets::linear_pulse_config::<f64>(100, 1400));
    }

    #[test]
    fn render_round_trips() {
        for cfg in [
            presets::linear_pulse_config::<f64>(100, 400),
            presets::langmuir_pulse_config::<f64>(50, 400),
            presets::binary_langmuir_config::<f64>(200, 2000),
        ] {
            let mut cfg = cfg;
            cfg.solver.cfl = CflMode::Relaxed(3);
            cfg.solver.adjust_scope = AdjustScope::Global;
            cfg.solver.eta = 0.3;
            let back: ScenarioConfig<f64> = parse(&render(&cfg)).unwrap();
            assert_eq!(back, cfg);
        }
        let mut cfg = presets::binary_langmuir_config::<f64>(10, 100);
        cfg.initial = InitialCondition::Uniform(vec![0.5, 0.25]);
        assert_eq!(parse::<f64>(&render(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_line() {
        let bad = TABLE1.replace("t_inj = 3", "t_inj = three");
        match parse::<f64>(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 14),
            other => panic!("{other:?}"),
        }
        let bad = TABLE1.replace("[grid]", "[grids]");
        assert!(matches!(
            parse::<f64>(&bad),
            Err(Error::Parse { line: 16, .. })
        ));
        let bad = TABLE1.replace("n_t = 1400", "n_t = 1400\nnx = 3");
        assert!(parse::<f64>(&bad).unwrap_err().to_string().contains("nx"));
        let bad = TABLE1.replace("b = 0", "b = 0\nb = 1");
        assert!(parse::<f64>(&bad)
            .unwrap_err()
            .to_string()
            .contains("duplicate"));
        let bad = TABLE1.replace("feed = 1\n", "");
        assert!(parse::<f64>(&bad).unwrap_err().is_validation());
    }

    #[test]
    fn solver_keywords() {
        let text = format!(
            "{TABLE1}\n[solver]\nmass_adjust = false\nsecant_freeze = current\nideal_variant = corrected\nrelax_cfl = 2\n"
        );
        let cfg: ScenarioConfig<f64> = parse(&text).unwrap();
        assert!(!cfg.solver.mass_adjust);
        assert_eq!(cfg.solver.secant_freeze, SecantFreeze::Current);
        assert_eq!(cfg.solver.ideal_variant, IdealVariant::Corrected);
        assert_eq!(cfg.solver.cfl, CflMode::Relaxed(2));
        let bad = format!("{TABLE1}\n[solver]\nmass_adjust = yes\n");
        assert!(parse::<f64>(&bad).is_err());
    }
}
