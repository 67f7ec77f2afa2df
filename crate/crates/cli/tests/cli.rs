use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
example_id = "small"

[rates]
k = 4
r = 4

[kernel]
kind = "cubic_delay"
deltas = [0.02, 0.1]

[model]
M = 2
m_i = 2
m_q = 2
L_f = 8

[data]
n_train = 512
n_val = 128

[dpd]
n_bb = 256
M = 3
m_i = 1
m_q = 1
"#;

fn adt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    text.split_whitespace()
        .find_map(|t| t.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from {text:?}"))
        .parse()
        .unwrap()
}

fn write_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    std::fs::write(&p, SMALL).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn staged_pipeline_matches_sweep_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let csv = dir.path().join("sweep.csv");
    stdout(&adt(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        csv.to_str().unwrap(),
    ]));
    let rows =
        adt_core::experiment::parse_sweep_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    let row = &rows[1];

    let data = dir.path().join("point");
    let d = data.to_str().unwrap();
    stdout(&adt(&[
        "simulate",
        "--config",
        &cfg,
        "--delta",
        "0.1",
        "--out-dir",
        d,
    ]));
    let fit = stdout(&adt(&["fit", "--config", &cfg, "--data-dir", d]));
    let model = data.join("model.csv");
    let val = stdout(&adt(&[
        "validate",
        "--config",
        &cfg,
        "--model",
        model.to_str().unwrap(),
        "--data-dir",
        d,
    ]));
    assert_eq!(field(&fit, "train_nmse_db"), row.train_nmse_db);
    assert_eq!(field(&val, "val_nmse_db"), row.val_nmse_db);
}

#[test]
fn sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let run = |name: &str, jobs: &str| {
        let p = dir.path().join(name);
        stdout(&adt(&[
            "sweep",
            "--config",
            &cfg,
            "--jobs",
            jobs,
            "--out",
            p.to_str().unwrap(),
        ]));
        let rows =
            adt_core::experiment::parse_sweep_csv(&std::fs::read_to_string(p).unwrap()).unwrap();
        rows.into_iter()
            .map(|r| (r.delta, r.train_nmse_db, r.val_nmse_db))
            .collect::<Vec<_>>()
    };
    assert_eq!(run("a.csv", "1"), run("b.csv", "2"));
}

#[test]
fn missing_config_names_the_path() {
    let o = adt(&["sweep", "--config", "/nonexistent/cfg.toml"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error:"), "{err}");
    assert!(err.contains("/nonexistent/cfg.toml"), "{err}");
}

#[test]
fn unknown_keys_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "[model]\nM = 2\nbogus = 1\n[data]\nwhatever = 3\n").unwrap();
    let o = adt(&["fit", "--config", p.to_str().unwrap(), "--data-dir", "."]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("model.bogus") && err.contains("data.whatever"),
        "{err}"
    );
}

#[test]
fn print_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let printed = stdout(&adt(&["sweep", "--config", &cfg, "--print-config"]));
    let p = dir.path().join("printed.toml");
    std::fs::write(&p, &printed).unwrap();
    let again = stdout(&adt(&[
        "sweep",
        "--config",
        p.to_str().unwrap(),
        "--print-config",
    ]));
    assert_eq!(printed, again);
}

#[test]
fn stimulus_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.csv");
    stdout(&adt(&[
        "gen-stimulus",
        "--n",
        "64",
        "--seed",
        "5",
        "--out",
        x.to_str().unwrap(),
    ]));
    let sig = adt_core::io::load_signal(&x).unwrap();
    assert_eq!(sig.len(), 64);

    let cfg = write_config(dir.path());
    let d = dir.path().join("p");
    let ds = d.to_str().unwrap();
    stdout(&adt(&[
        "simulate",
        "--config",
        &cfg,
        "--delta",
        "0.05",
        "--out-dir",
        ds,
    ]));
    stdout(&adt(&["fit", "--config", &cfg, "--data-dir", ds]));
    let model = d.join("model.csv");
    let canon = dir.path().join("canon.csv");
    let wide = dir.path().join("wide.csv");
    stdout(&adt(&[
        "export-model",
        "--model",
        model.to_str().unwrap(),
        "--out",
        canon.to_str().unwrap(),
    ]));
    stdout(&adt(&[
        "export-model",
        "--model",
        model.to_str().unwrap(),
        "--out",
        wide.to_str().unwrap(),
        "--format",
        "wide",
    ]));
    assert_eq!(
        std::fs::read_to_string(&canon).unwrap(),
        std::fs::read_to_string(&model).unwrap()
    );
    let wide = std::fs::read_to_string(&wide).unwrap();
    let m = adt_core::model::FirBankModel::load(&model).unwrap();
    assert_eq!(wide.lines().count(), m.l_f() + 1);
    assert_eq!(
        wide.lines().next().unwrap().split(',').count(),
        1 + 2 * m.basis.len()
    );
}

#[test]
fn dpd_fit_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let comp = dir.path().join("comp.csv");
    let c = comp.to_str().unwrap();
    let fit = stdout(&adt(&[
        "dpd-fit", "--config", &cfg, "--delta", "0.05", "--out", c,
    ]));
    assert!(field(&fit, "distortion_db").is_finite());
    let ev = stdout(&adt(&[
        "dpd-eval",
        "--config",
        &cfg,
        "--compensator",
        c,
        "--delta",
        "0.05",
    ]));
    assert!(field(&ev, "nmse_plain_db").is_finite());
    assert!(field(&ev, "nmse_dpd_db").is_finite());
}
