use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use agglab::config::{E2Config, ExperimentConfig, Params};
use proptest::prelude::*;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_agglab"));
    c.env_remove("AGG_LAB_OUT");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn latest_csvs(root: &Path, exp: &str) -> Vec<(String, Vec<u8>)> {
    let base = root.join(exp);
    let stamp = fs::read_to_string(base.join("latest")).unwrap();
    let dir = base.join(stamp.trim());
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

const SMALL_E2: &str = r#"{ "experiment": "E2", "distributions": 4, "trials": 3000 }"#;

#[test]
fn hinge_cert_prints_constants() {
    let o = bin().arg("cert").arg(configs().join("hinge.json")).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().next(), Some("c1=1 c2=2 valid=true"));
}

#[test]
fn bipartite_cert_is_one_over_n() {
    let o = bin().arg("cert").arg(configs().join("bipartite3.json")).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("c1=0.333"), "{}", stdout(&o));
}

#[test]
fn list_names_every_experiment() {
    let o = bin().arg("list").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for id in ["E1", "E2", "E3", "E4", "E5", "E6", "E7"] {
        assert!(text.lines().any(|l| l.starts_with(id)), "missing {id}");
    }
}

#[test]
fn shipped_configs_validate() {
    for e in 1..=7 {
        let o = bin().arg("validate").arg(configs().join(format!("e{e}.json"))).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "e{e}: {}", stderr(&o));
    }
}

#[test]
fn missing_alpha_is_a_single_line_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "e3.json", r#"{ "experiment": "E3" }"#);
    let o = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("ERR:") && err.contains("alpha"), "{err}");
}

#[test]
fn bad_arguments_exit_one() {
    let o = bin().arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("ERR:"));
    let o = bin().args(["run", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("ERR:"));
}

#[test]
fn failing_checks_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "e7.json", r#"{ "experiment": "E7", "ns": [60], "trials": 2, "max_disagreement": 0.0, "excess_tol": 0.0 }"#);
    let o = bin().arg("run").arg(&cfg).arg("--out").arg(tmp.path().join("out")).output().unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict FAIL"));
}

#[test]
fn runs_are_reproducible_across_threads_and_out_sources() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "e2.json", SMALL_E2);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let o = bin().arg("run").arg(&cfg).args(["--threads", "1", "--out"]).arg(&a).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o2 = bin().arg("run").arg(&cfg).args(["--threads", "3"]).env("AGG_LAB_OUT", &b).output().unwrap();
    assert_eq!(o2.status.code(), Some(0), "{}", stderr(&o2));
    assert_eq!(stdout(&o), stdout(&o2));
    let (ca, cb) = (latest_csvs(&a, "e2"), latest_csvs(&b, "e2"));
    assert!(ca.iter().any(|(n, _)| n == "checks.csv"));
    assert_eq!(ca, cb);
}

#[test]
fn seed_flag_changes_the_draws() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "e2.json", SMALL_E2);
    let run = |seed: &str| {
        let o = bin().arg("run").arg(&cfg).args(["--seed", seed, "--out"]).arg(tmp.path().join(seed)).output().unwrap();
        stdout(&o)
    };
    assert_ne!(run("1"), run("2"));
}

#[test]
fn calib_prints_a_curve() {
    let o = bin().args(["calib", "margin", "--p", "0.7,0.3", "--m", "3", "--grid", "5"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "eps,psi_raw,psi_convex,lower_bound");
    assert_eq!(rows.len(), 6);
}

#[test]
fn in_process_entry_point_matches_the_binary() {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let hinge = configs().join("hinge.json");
    let code = agglab::cli::main_with(["agglab".into(), "cert".into(), hinge.into_os_string()], &mut out, &mut err);
    assert_eq!(code, 0);
    assert!(String::from_utf8(out).unwrap().starts_with("c1=1 c2=2 valid=true"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resolved_config_round_trips(
        items in 2usize..6,
        distributions in 1usize..40,
        trials in 2usize..100_000,
        m in proptest::option::of(1usize..20),
        seed in proptest::option::of(any::<u32>()),
    ) {
        let cfg = ExperimentConfig {
            seed: seed.map(u64::from),
            out: None,
            params: Params::E2(E2Config { items, distributions, trials, m, ..E2Config::default() }),
        };
        let back = ExperimentConfig::from_value(cfg.resolved()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
