use std::path::Path;
use std::process::{Command, Output};

use moderation_pipeline::harness::{preset, preset_names};
use moderation_pipeline::{CostDistribution, EnvConfig, Schedule, TypeParams};

fn modsim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modsim"))
        .args(args)
        .env("MODSIM_OUT", out)
        .output()
        .expect("spawn modsim")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn presets_validate() {
    for name in preset_names() {
        preset(name)
            .unwrap()
            .validate()
            .unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn simulate_writes_under_env_dir_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let run = modsim(
        &[
            "simulate",
            "--scenario",
            "disjoint_blocks",
            "--reps",
            "2",
            "--traces",
        ],
        dir.path(),
    );
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let base = dir.path().join("disjoint_blocks");
    assert!(base.join("report.json").exists());
    let trace = base.join("trace-bacid.jsonl");

    let replay = modsim(&["replay", "--trace", trace.to_str().unwrap()], dir.path());
    assert!(replay.status.success());
    assert!(stdout(&replay).contains("identical"));

    let tampered = dir.path().join("tampered.jsonl");
    let text = std::fs::read_to_string(&trace).unwrap();
    std::fs::write(
        &tampered,
        text.replacen("\"seed\":2000", "\"seed\":2001", 1),
    )
    .unwrap();
    let replay = modsim(
        &["replay", "--trace", tampered.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(replay.status.code(), Some(3));
}

#[test]
fn explicit_out_wins_over_env() {
    let env_dir = tempfile::tempdir().unwrap();
    let out_dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep",
        "--scenario",
        "disjoint_blocks",
        "--param",
        "lifetime",
        "--values",
        "10,20",
        "--reps",
        "1",
        "--out",
    ];
    let mut args = args.to_vec();
    args.push(out_dir.path().to_str().unwrap());
    let run = modsim(&args, env_dir.path());
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(out_dir
        .path()
        .join("disjoint_blocks-lifetime/report.json")
        .exists());
    assert!(std::fs::read_dir(env_dir.path()).unwrap().next().is_none());
}

#[test]
fn fluid_reports_each_window() {
    let dir = tempfile::tempdir().unwrap();
    let env = EnvConfig {
        horizon: 3,
        arrival_rates: vec![Schedule::from_pairs([(1, 0.0), (2, 1.0), (3, 0.0)])],
        capacity: Schedule::from_pairs([(1, 0), (3, 1)]),
        types: vec![TypeParams::new(
            0,
            5,
            1.0,
            CostDistribution::signed_unit(0.5),
        )],
        r_max: 1.0,
        sigma_max: 1.0,
        feature_bound: 1.0,
    };
    let path = dir.path().join("env.json");
    std::fs::write(&path, serde_json::to_string(&env).unwrap()).unwrap();
    let run = modsim(
        &["fluid", "--env", path.to_str().unwrap(), "--w", "1,2,0"],
        dir.path(),
    );
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    for w in [1, 2, 3] {
        assert!(dir.path().join(format!("fluid-w{w}.json")).exists());
    }
    assert_eq!(stdout(&run).lines().count(), 4);
}

#[test]
fn invalid_inputs_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut env = moderation_pipeline::harness::scenario::single_type(10, 50);
    env.arrival_rates.push(Schedule::constant(0.5));
    env.types.push(TypeParams::new(
        1,
        10,
        0.5,
        CostDistribution::signed_unit(0.5),
    ));
    let path = dir.path().join("bad.json");
    std::fs::write(&path, serde_json::to_string(&env).unwrap()).unwrap();
    let run = modsim(&["fluid", "--env", path.to_str().unwrap()], dir.path());
    assert_eq!(run.status.code(), Some(2));

    let run = modsim(&["simulate", "--scenario", "no-such-preset"], dir.path());
    assert_eq!(run.status.code(), Some(2));
    let run = modsim(
        &[
            "sweep",
            "--scenario",
            "single_type",
            "--param",
            "bogus",
            "--values",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(run.status.code(), Some(2));
}
