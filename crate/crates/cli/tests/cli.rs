use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_chromsim"));
    cmd.env_remove("CHROMSIM_CACHE_DIR");
    cmd
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn write_scenario(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("s.ini");
    fs::write(&path, text).unwrap();
    path
}

const LANGMUIR_SMALL: &str = "\
[column]
length = 1
velocity = 1
porosity = 0.5
plate_count = 250
[isotherm]
a = 1
b = 1
[injection]
feed = 1
t_inj = 0.2
[grid]
n_x = 40
n_t = 300
t_max = 3
";

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn error_record(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| {
        panic!(
            "stderr is not JSON: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn read_csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_owned();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|f| f.parse::<f64>().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    (header, rows)
}

#[test]
fn linear_scenario_end_to_end() {
    let out = TempDir::new().unwrap();
    let o = run(&[
        "--scenario",
        shipped("linear_pulse.ini").to_str().unwrap(),
        "--out-dir",
        out.path().to_str().unwrap(),
        "--snapshots",
        "1,2.5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let (header, rows) = read_csv(&out.path().join("chromatogram.csv"));
    assert_eq!(header, "time,u1");
    assert_eq!(rows.len(), 1401);
    // breakthrough near L R / v = 2.5, washout near 2.5 + t_inj = 5.5
    let crossing = |rising: bool| {
        rows.windows(2)
            .find(|w| {
                if rising {
                    w[0][1] < 0.5 && w[1][1] >= 0.5
                } else {
                    w[0][1] >= 0.5 && w[1][1] < 0.5
                }
            })
            .map(|w| w[1][0])
            .unwrap()
    };
    assert!((crossing(true) - 2.5).abs() < 0.05);
    assert!((crossing(false) - 5.5).abs() < 0.05);

    let (header, mass) = read_csv(&out.path().join("mass.csv"));
    assert_eq!(header, "time,component,injected,holdup,outflow,deficit");
    let last = mass.last().unwrap();
    assert!((last[2] - 3.0).abs() < 1e-12);
    assert!(last[5].abs() / last[2] < 1e-3);

    let (header, snaps) = read_csv(&out.path().join("snapshots.csv"));
    assert_eq!(header, "time,x,component,u");
    assert_eq!(snaps.len(), 2 * 101);

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["mode"], "mmocaa");
    assert_eq!(manifest["config"]["solver"]["eta"], 0.5);
    assert_eq!(manifest["config"]["grid"]["n_t"], 1400);
    assert_eq!(manifest["derived"]["diffusion"], 0.002);
    for name in manifest["outputs"].as_array().unwrap() {
        assert!(out.path().join(name.as_str().unwrap()).exists(), "{name}");
    }
}

#[test]
fn outputs_are_byte_stable() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let s = shipped("langmuir_pulse.ini");
    for dir in [&a, &b] {
        assert!(run(&[
            "--scenario",
            s.to_str().unwrap(),
            "--out-dir",
            dir.path().to_str().unwrap()
        ])
        .status
        .success());
    }
    for name in ["chromatogram.csv", "mass.csv", "diagnostics.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn ideal_mode_on_two_components_is_rejected() {
    let out = TempDir::new().unwrap();
    let o = run(&[
        "--scenario",
        shipped("binary_langmuir.ini").to_str().unwrap(),
        "--mode",
        "ideal",
        "--out-dir",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let rec = error_record(&o);
    assert_eq!(rec["error"], "validation");
    assert!(rec["message"].as_str().unwrap().contains("one component"));
}

#[test]
fn no_mass_adjust_leaves_larger_deficit() {
    let dir = TempDir::new().unwrap();
    let s = shipped("langmuir_pulse.ini");
    let final_deficit = |extra: &[&str], sub: &str| {
        let out = dir.path().join(sub);
        let mut args = vec![
            "--scenario",
            s.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        assert!(run(&args).status.success());
        let manifest: Value =
            serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        (
            manifest["mode"].as_str().unwrap().to_owned(),
            manifest["mass"]["deficit"][0].as_f64().unwrap().abs(),
        )
    };
    let (mode_on, on) = final_deficit(&[], "on");
    let (mode_off, off) = final_deficit(&["--no-mass-adjust"], "off");
    assert_eq!(
        (mode_on.as_str(), mode_off.as_str()),
        ("mmocaa", "mmoc-unadjusted")
    );
    assert!(off > on, "off {off} on {on}");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    // missing scenario file
    let o = run(&["--scenario", "/nonexistent/x.ini", "--out-dir", out]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_record(&o)["error"], "io");

    // parse error with line number
    let s = write_scenario(
        dir.path(),
        &LANGMUIR_SMALL.replace("velocity = 1", "velocity = one"),
    );
    let o = run(&["--scenario", s.to_str().unwrap(), "--out-dir", out]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&o)["line"], 3);

    // CFL above the strict bound, accepted once relaxed
    let linear = fs::read_to_string(shipped("linear_pulse.ini"))
        .unwrap()
        .replace("n_t = 1400", "n_t = 400");
    let s = write_scenario(dir.path(), &linear);
    let o = run(&["--scenario", s.to_str().unwrap(), "--out-dir", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(error_record(&o)["message"]
        .as_str()
        .unwrap()
        .contains("CFL"));
    assert!(run(&[
        "--scenario",
        s.to_str().unwrap(),
        "--out-dir",
        out,
        "--relax-cfl"
    ])
    .status
    .success());

    // bad eta
    let s = write_scenario(dir.path(), LANGMUIR_SMALL);
    let o = run(&[
        "--scenario",
        s.to_str().unwrap(),
        "--out-dir",
        out,
        "--eta",
        "1.5",
    ]);
    assert_eq!(o.status.code(), Some(2));

    // unknown flag
    let o = run(&["--scenario", s.to_str().unwrap(), "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&o)["error"], "usage");

    // inner iteration cap reached
    let s = write_scenario(
        dir.path(),
        &format!("{LANGMUIR_SMALL}[solver]\ninner_cap = 1\n"),
    );
    let o = run(&["--scenario", s.to_str().unwrap(), "--out-dir", out]);
    assert_eq!(o.status.code(), Some(3));
    let rec = error_record(&o);
    assert_eq!(rec["error"], "solver");
    assert_eq!(rec["step"], 1);

    // unwritable output directory
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = run(&[
        "--scenario",
        s.to_str().unwrap(),
        "--out-dir",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn ladder_writes_convergence_table() {
    let dir = TempDir::new().unwrap();
    let s = shipped("linear_pulse.ini");
    let o = run(&[
        "--scenario",
        s.to_str().unwrap(),
        "--ladder",
        "50:400,100:800",
        "--jobs",
        "2",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&dir.path().join("convergence.csv"));
    assert_eq!(header, "n_x,n_t,component,l1,max_error,wall_seconds,order");
    assert_eq!(rows.len(), 2);
    assert!(rows[1][3] < rows[0][3]);
    assert!(rows[0][6].is_nan() && rows[1][6] > 0.0);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["study"]["reference"], "analytic");

    let single = dir.path().join("single");
    let o = run(&[
        "--scenario",
        s.to_str().unwrap(),
        "--ladder",
        "50:400",
        "--out-dir",
        single.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let (header, _) = read_csv(&single.join("convergence.csv"));
    assert_eq!(header, "n_x,n_t,component,l1,max_error,wall_seconds");
}

#[test]
fn fine_grid_comparison_uses_cache_env() {
    let dir = TempDir::new().unwrap();
    let cache = dir.path().join("cache");
    let s = write_scenario(dir.path(), LANGMUIR_SMALL);
    let out = dir.path().join("out");
    let args = [
        "--scenario",
        s.to_str().unwrap(),
        "--compare",
        "fine-grid",
        "--reference-grid",
        "200:1500",
        "--out-dir",
        out.to_str().unwrap(),
    ];
    let o = bin()
        .args(args)
        .env("CHROMSIM_CACHE_DIR", &cache)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cached: Vec<_> = fs::read_dir(&cache).unwrap().collect();
    assert_eq!(cached.len(), 1);
    let first = fs::read(out.join("overlay.csv")).unwrap();
    let (header, _) = read_csv(&out.join("overlay.csv"));
    assert_eq!(header, "time,component,numeric,reference,abs_error");

    // a second run is served from the cache and reproduces the overlay
    let o = bin()
        .args(args)
        .env("CHROMSIM_CACHE_DIR", &cache)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(fs::read(out.join("overlay.csv")).unwrap(), first);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["comparison"]["reference"], "fine-grid");
    assert!(manifest["comparison"]["l1"][0].as_f64().unwrap() > 0.0);

    // analytic comparison of a nonlinear scenario is refused
    let o = run(&[
        "--scenario",
        s.to_str().unwrap(),
        "--compare",
        "analytic",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ideal_scenario_with_corrected_variant() {
    let dir = TempDir::new().unwrap();
    let o = run(&[
        "--scenario",
        shipped("ideal_linear.ini").to_str().unwrap(),
        "--corrected-3.10",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["mode"], "ideal");
    assert_eq!(manifest["config"]["solver"]["ideal_variant"], "corrected");
    assert!(manifest["mass"]["relative_error"][0].as_f64().unwrap() < 1e-6);
}
