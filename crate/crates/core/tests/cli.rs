use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::CommandFactory;
use delay_attractor::cli::{Cli, Manifest};

const BIN: &str = env!("CARGO_BIN_EXE_delay-attractor");
const SUBCOMMANDS: [&str; 6] = ["simulate", "spectrum", "bounds", "verify", "dims", "replay"];

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn snapshot_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/snapshots")
}

fn help_text(sub: Option<&str>) -> String {
    let mut args: Vec<&str> = sub.into_iter().collect();
    args.push("--help");
    let out = run(&args);
    assert!(out.status.success());
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn help_matches_snapshots() {
    let update = std::env::var_os("UPDATE_SNAPSHOTS").is_some();
    let mut names = vec![None];
    names.extend(SUBCOMMANDS.iter().map(|s| Some(*s)));
    for sub in names {
        let text = help_text(sub);
        let file = snapshot_dir().join(format!("help_{}.txt", sub.unwrap_or("main")));
        if update {
            std::fs::create_dir_all(snapshot_dir()).unwrap();
            std::fs::write(&file, &text).unwrap();
        }
        let expected =
            std::fs::read_to_string(&file).unwrap_or_else(|_| panic!("missing snapshot {file:?}"));
        assert_eq!(
            text, expected,
            "help for {sub:?} changed; rerun with UPDATE_SNAPSHOTS=1"
        );
    }
}

#[test]
fn every_flag_is_documented_in_help() {
    let root = Cli::command();
    let mut cmds = vec![root.clone()];
    cmds.extend(root.get_subcommands().cloned());
    for cmd in cmds {
        let name = cmd.get_name().to_string();
        let sub = (name != "delay-attractor").then_some(name.as_str());
        let text = help_text(sub);
        for arg in cmd.get_arguments() {
            if let Some(long) = arg.get_long() {
                assert!(
                    text.contains(&format!("--{long}")),
                    "--{long} missing from {name} help"
                );
            }
            if arg.get_id() != "help" && arg.get_id() != "version" {
                assert!(
                    arg.get_help().is_some(),
                    "{name}: `{}` has no help text",
                    arg.get_id()
                );
            }
        }
    }
    assert!(help_text(None).contains("--threads"));
    for sub in &SUBCOMMANDS[..5] {
        let text = help_text(Some(sub));
        for flag in ["--config", "--set", "--out", "--threads"] {
            assert!(text.contains(flag), "{flag} missing from {sub}");
        }
    }
}

#[test]
fn unknown_flag_is_rejected() {
    assert!(!run(&["bounds", "--bogus"]).status.success());
}

fn read_manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();

    let v = run(&["verify", "--set", "model.sigma=1", "--out", &out("gate")]);
    assert_eq!(v.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("gate/verify.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["absorbing_ok"], false);
    assert_eq!(read_manifest(&tmp.path().join("gate")).exit_code, 1);

    assert_eq!(
        run(&["bounds", "--set", "model.mu=-2", "--out", &out("bad")])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&["bounds", "--set", "model.nope=1", "--out", &out("bad2")])
            .status
            .code(),
        Some(1)
    );

    // sigma well above mu makes the linear part grow without bound
    let d = run(&[
        "simulate",
        "--set",
        "model.sigma=20",
        "--set",
        "model.mu=0.1",
        "--set",
        "integrator.t_final=30",
        "--set",
        "grid.points=16",
        "--set",
        "integrator.n_tau=8",
        "--out",
        &out("div"),
    ]);
    assert_eq!(
        d.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&d.stderr)
    );

    // a tiny prefactor limit falsifies the envelope check
    let f = run(&[
        "verify",
        "--set",
        "verify.absorbing=false",
        "--set",
        "verify.pairs=2",
        "--set",
        "verify.prefactor_limit=1e-6",
        "--set",
        "grid.points=64",
        "--set",
        "integrator.n_tau=16",
        "--out",
        &out("fals"),
    ]);
    assert_eq!(
        f.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&f.stderr)
    );
}

#[test]
fn simulate_linear_decay_log() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sim");
    let o = run(&[
        "simulate",
        "--set",
        "model.nonlinearity.kind=zero",
        "--set",
        "model.sigma=0",
        "--set",
        "model.mu=0.7",
        "--set",
        "initial.kind=constant",
        "--set",
        "initial.value=2.0",
        "--set",
        "integrator.t_final=5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.join("norms.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,segment_norm,state_norm,near_norm,far_norm"
    );
    let mut rows = 0;
    let mut first = None;
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let n0 = *first.get_or_insert(cols[2]);
        let expected = n0 * (-0.7 * cols[0]).exp();
        assert!(
            (cols[2] - expected).abs() <= 1e-6 * n0,
            "t={} {} vs {}",
            cols[0],
            cols[2],
            expected
        );
        rows += 1;
    }
    assert_eq!(rows, 5 * 64 + 1);
    for f in [
        "final_state.csv",
        "final_segment.bin",
        "simulate.json",
        "manifest.json",
    ] {
        assert!(dir.join(f).exists(), "{f}");
    }
}

#[test]
fn bounds_on_worked_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/worked_bounds.toml");
    let o = run(&[
        "bounds",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("bounds.json")).unwrap())
            .unwrap();
    let zeta = v["at_config"]["zeta"].as_f64().unwrap();
    let dim = v["at_config"]["dim_bound"].as_f64().unwrap();
    assert!((zeta - 0.576).abs() < 0.005, "{zeta}");
    assert!((dim - 7.75).abs() < 0.1, "{dim}");
    assert!(v["optimum"]["dim_bound"].as_f64().unwrap() <= 7.75);
    assert_eq!(v["validation"]["absorbing_ok"], false);
}

#[test]
fn sweep_and_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sweep");
    let o = run(&[
        "bounds",
        "--set",
        "model.mu=3",
        "--set",
        "model.nonlinearity.epsilon=0.1",
        "--set",
        "model.trunc_radius=1.5707963267948966",
        "--set",
        "bounds.sweep.param=\"model.sigma\"",
        "--set",
        "bounds.sweep.values=[0.0, 0.1, 0.2]",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 4);
    assert!(sweep.starts_with("model.sigma,"));

    let m = dir.join("manifest.json");
    let replay_dir = tmp.path().join("again");
    let r = run(&[
        "--threads",
        "1",
        "replay",
        m.to_str().unwrap(),
        "--out",
        replay_dir.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(
        read_manifest(&dir).outputs,
        read_manifest(&replay_dir).outputs
    );

    // tampering with an output is detected
    let mut manifest = read_manifest(&dir);
    manifest.outputs[0].sha256 = "0".repeat(64);
    let forged = tmp.path().join("forged.json");
    std::fs::write(&forged, serde_json::to_string(&manifest).unwrap()).unwrap();
    let r = run(&[
        "replay",
        forged.to_str().unwrap(),
        "--out",
        tmp.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(2));
}
