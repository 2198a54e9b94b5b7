use std::path::Path;
use std::process::Command as Process;

use genflow_cli::cli::main_with_args;
use genflow_cli::config::{self, Overrides};
use genflow_cli::{exit, preset, resolve, Scenario};
use serde_json::{json, Value};
use tempfile::TempDir;

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["genflow"];
    full.extend_from_slice(args);
    main_with_args(full)
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn write_json(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p.display().to_string()
}

fn out_arg(dir: &TempDir, sub: &str) -> String {
    dir.path().join(sub).display().to_string()
}

#[test]
fn solve_with_the_zero_field_is_constant() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "solve");
    assert_eq!(run(&["solve", "--p0", "0.5", "--p0=-1", "--grid-t", "-1,1,5", "--out", &out, "-q"]), exit::OK);
    let mut rdr = csv::Reader::from_path(Path::new(&out).join("trajectories.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["epsilon", "t", "alpha0", "alpha"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    // 7 net values × 2 starts × 5 times
    assert_eq!(rows.len(), 70);
    for r in &rows {
        assert_eq!(r[2], r[3]);
    }
    assert!(Path::new(&out).join("trajectories.dat").exists());
}

#[test]
fn conditions_on_the_marsden_field() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "c");
    assert_eq!(run(&["conditions", "--preset", "marsden", "--out", &out, "-q"]), exit::OK);
    let r = report(Path::new(&out));
    assert_eq!(r["command"], "conditions");
    assert_eq!(r["config"]["scenario"], "custom");
    let verdict = |name: &str| {
        r["conditions"].as_array().unwrap().iter().find(|c| c["condition"] == name).unwrap()["verdict"].clone()
    };
    assert_eq!(verdict("global-bound-h"), "holds");
    assert_eq!(verdict("logtype-derivative"), "holds");
    assert_eq!(verdict("bounded-derivative"), "fails");
}

#[test]
fn fast_association_on_the_torus() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "a");
    let args = ["associate", "--preset", "torus", "--notion", "fast", "--t", "0.5", "--reference", "closed-form", "--out", &out, "-q"];
    assert_eq!(run(&args), exit::OK);
    let r = report(Path::new(&out));
    assert_eq!(r["association"]["notion"], "fast");
    // every p node, including those on the jump line α = 0
    assert_eq!(r["association"]["verdict"], "holds");
    assert!(Path::new(&out).join("association.dat").exists());
}

#[test]
fn zero_association_of_the_zero_field_holds() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "z");
    let args = ["associate", "--notion", "zero", "--t", "1", "--out", &out, "-q"];
    assert_eq!(run(&args), exit::OK);
    assert_eq!(report(Path::new(&out))["association"]["verdict"], "holds");
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "x");
    let unknown = write_json(tmp.path(), "unknown.json", &json!({"scenario": "marsden", "bogus": 1}));
    assert_eq!(run(&["run", "--config", &unknown, "--out", &out]), exit::CONFIG);
    let nested = write_json(tmp.path(), "nested.json", &json!({"scenario": "marsden", "table": {"bogus": 1}}));
    assert_eq!(run(&["run", "--config", &nested, "--out", &out]), exit::CONFIG);
    let coarse = write_json(tmp.path(), "tol.json", &json!({"scenario": "marsden", "tol": 0.5}));
    assert_eq!(run(&["run", "--config", &coarse, "--out", &out]), exit::CONFIG);
    let mixed = write_json(tmp.path(), "mixed.json", &json!({"scenario": "torus"}));
    assert_eq!(run(&["scenario", "marsden", "--config", &mixed, "--out", &out]), exit::CONFIG);
    // a time that is not on the table grid
    assert_eq!(run(&["associate", "--preset", "torus", "--t", "0.37", "--out", &out]), exit::CONFIG);
    assert_eq!(run(&["scenario", "marsden", "--epsilon-min", "0.5", "--epsilon-max", "0.1", "--out", &out]), exit::CONFIG);
    assert_eq!(run(&["run", "--out", &out]), exit::CONFIG);
    assert_eq!(run(&["frobnicate"]), exit::CONFIG);
    assert_eq!(run(&["--help"]), exit::OK);
    assert!(!Path::new(&out).exists());
}

#[test]
fn io_errors_exit_with_4() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("missing.json").display().to_string();
    assert_eq!(run(&["run", "--config", &missing]), exit::IO);
    let garbled = tmp.path().join("garbled.json");
    std::fs::write(&garbled, "{ not json").unwrap();
    assert_eq!(run(&["run", "--config", &garbled.display().to_string()]), exit::CONFIG);
    // the output directory is an existing file
    let file = tmp.path().join("occupied");
    std::fs::write(&file, "").unwrap();
    assert_eq!(run(&["conditions", "--preset", "marsden", "--out", &file.display().to_string(), "-q"]), exit::IO);
}

#[test]
fn a_failing_assertion_exits_with_1_and_still_writes_the_report() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "f");
    let cfg = json!({
        "scenario": "marsden",
        "limiting": {"pairs": [[0.5, -0.5]]},
        "trajectories": {"enabled": false},
        "conditions": {"enabled": false}
    });
    let path = write_json(tmp.path(), "f.json", &cfg);
    assert_eq!(run(&["run", "--config", &path, "--out", &out, "-q"]), exit::ASSERTION);
    let r = report(Path::new(&out));
    assert_eq!(r["passed"], false);
    let failed: Vec<&Value> = r["assertions"].as_array().unwrap().iter().filter(|a| a["passed"] == false).collect();
    assert_eq!(failed.len(), 1);
    assert!(failed[0]["detail"].as_str().unwrap().contains("(1, -1)"));
}

#[test]
fn layering_order() {
    let file = json!({"scenario": "marsden", "out": "from-file", "tol": 1e-8});
    let flags = Overrides { out: Some("from-flag".into()), ..Overrides::default() };
    let none = Overrides::default();
    let m = Some(Scenario::Marsden);
    assert_eq!(resolve(m, None, None, &none).unwrap().out, preset(Scenario::Marsden).out);
    assert_eq!(resolve(m, Some(&file), None, &none).unwrap().out, "from-file");
    assert_eq!(resolve(m, Some(&file), Some("from-env"), &none).unwrap().out, "from-env");
    let cfg = resolve(m, Some(&file), Some("from-env"), &flags).unwrap();
    assert_eq!(cfg.out, "from-flag");
    assert_eq!(cfg.tol, 1e-8);
    // untouched keys keep the preset values
    assert_eq!(cfg.table, preset(Scenario::Marsden).table);
}

#[test]
fn the_binary_honours_the_environment_and_flags() {
    let tmp = TempDir::new().unwrap();
    let env_dir = tmp.path().join("env");
    let flag_dir = tmp.path().join("flag");
    let bin = env!("CARGO_BIN_EXE_genflow");
    let status = Process::new(bin)
        .args(["conditions", "--preset", "marsden", "-q"])
        .env(config::OUT_ENV, &env_dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(exit::OK));
    assert!(env_dir.join("report.json").exists());
    let status = Process::new(bin)
        .args(["conditions", "--preset", "marsden", "-q", "--out"])
        .arg(&flag_dir)
        .env(config::OUT_ENV, tmp.path().join("unused"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(exit::OK));
    assert!(flag_dir.join("conditions.dat").exists());
    assert!(!tmp.path().join("unused").exists());
}

#[test]
fn printed_presets_are_valid_configs() {
    let bin = env!("CARGO_BIN_EXE_genflow");
    for name in ["marsden", "torus", "hierarchy", "custom"] {
        let out = Process::new(bin).args(["preset", name]).output().unwrap();
        assert!(out.status.success());
        let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
        config::validate_schema(&doc).unwrap();
        assert_eq!(doc["scenario"], name);
    }
}

#[test]
fn a_report_reruns_to_the_same_result() {
    let tmp = TempDir::new().unwrap();
    let first = out_arg(&tmp, "first");
    let second = out_arg(&tmp, "second");
    assert_eq!(run(&["scenario", "hierarchy", "--out", &first, "-q"]), exit::OK);
    let report_path = Path::new(&first).join("report.json").display().to_string();
    assert_eq!(run(&["run", "--config", &report_path, "--out", &second, "-q"]), exit::OK);
    let (a, b) = (report(Path::new(&first)), report(Path::new(&second)));
    for key in ["hierarchy", "assertions", "net", "passed", "findings", "files"] {
        assert_eq!(a[key], b[key], "{key}");
    }
    let strip = |mut v: Value| {
        v["out"] = Value::Null;
        v
    };
    assert_eq!(strip(a["config"].clone()), strip(b["config"].clone()));
    let dat = |d: &str| std::fs::read(Path::new(d).join("hierarchy.dat")).unwrap();
    assert_eq!(dat(&first), dat(&second));
}

#[test]
fn repeated_runs_write_identical_files() {
    let tmp = TempDir::new().unwrap();
    let dirs = [out_arg(&tmp, "one"), out_arg(&tmp, "two")];
    for d in &dirs {
        assert_eq!(run(&["flow", "--preset", "torus", "--grid-p", "9", "--out", d, "-q"]), exit::OK);
    }
    for name in ["flowtable.csv", "limit.dat", "report.json"] {
        let read = |d: &str| std::fs::read(Path::new(d).join(name)).unwrap();
        // report.json records the output directory
        if name == "report.json" {
            let strip = |d: &str| {
                let mut v: Value = serde_json::from_slice(&read(d)).unwrap();
                v["config"]["out"] = Value::Null;
                v
            };
            assert_eq!(strip(&dirs[0]), strip(&dirs[1]));
        } else {
            assert_eq!(read(&dirs[0]), read(&dirs[1]), "{name}");
        }
    }
}
