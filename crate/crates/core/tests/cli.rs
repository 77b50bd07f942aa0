use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_goal-discovery"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn demo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo.maze")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

const SMALL: [&str; 10] = [
    "--set",
    "episodes=200",
    "--set",
    "pretrain_steps=200",
    "--set",
    "predictor_steps=200",
    "--set",
    "ablation_seeds=1",
    "--set",
    "eval_every=100",
];

#[test]
fn help_and_usage_errors() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["train", "--variant", "bogus"]).status.code(), Some(2));
    let o = run(&["show-config", "--set", "gamma"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_3() {
    let o = run(&["show-config", "--set", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(text(&o.stderr).contains("no_such_key"));

    let o = run(&["show-config", "--set", "tau_nei=1.2"]);
    assert_eq!(o.status.code(), Some(3));
    let err = text(&o.stderr);
    assert!(err.contains("tau_nei") && err.contains("tau_adj"), "{err}");

    let o = run(&["show-config", "--set", "gamma=1.5"]);
    assert_eq!(o.status.code(), Some(3));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "threshold = 1\nthis line has no equals sign\n").unwrap();
    let o = run(&["show-config", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(text(&o.stderr).contains("line 2"));

    assert_eq!(run(&["sample"]).status.code(), Some(3), "sampling needs a maze");
}

#[test]
fn config_paths_resolve_against_config_dir() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(demo(), dir.path().join("m.maze")).unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# demo run\nmaze = m.maze\nseed = 9\nseed = 10\n").unwrap();
    let o = bin().args(["show-config", "--config", cfg.to_str().unwrap()]).env("RUST_LOG", "warn").output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let out = text(&o.stdout);
    assert!(out.contains("seed: 10"), "{out}");
    assert!(out.contains(&dir.path().join("m.maze").display().to_string()), "{out}");
    assert!(text(&o.stderr).contains("duplicate key `seed`"));
}

#[test]
fn stages_out_of_order_name_the_missing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let maze = demo();
    let o = run(&["eval", "--maze", maze.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("run `train` first"), "{}", text(&o.stderr));
    let o = run(&["capacity", "--maze", maze.to_str().unwrap(), "--out", out]);
    assert!(text(&o.stderr).contains("run `sample` first"));
}

#[test]
fn verify_passes() {
    let o = run(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stdout));
    let out = text(&o.stdout);
    assert!(out.contains("0 failed"));
    assert!(out.contains("result pass"));
}

#[test]
fn stage_by_stage_matches_pipeline() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let maze = demo();
    let common = |out: &Path| -> Vec<String> {
        let mut v = vec!["--maze".into(), maze.display().to_string(), "--out".into(), out.display().to_string()];
        v.extend(SMALL.iter().map(|s| s.to_string()));
        v
    };
    let o = bin().arg("pipeline").args(common(a.path())).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    for stage in ["sample", "capacity", "subgoals", "train-predictor"] {
        let o = bin().arg(stage).args(common(b.path())).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{stage}: {}", text(&o.stderr));
    }
    for v in ["gdcc", "sparse"] {
        let o = bin().args(["train", "--variant", v]).args(common(b.path())).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
        let o = bin().args(["eval", "--variant", v]).args(common(b.path())).output().unwrap();
        assert!(text(&o.stdout).contains("success_rate"));
    }
    for f in [
        "trajectories.log",
        "capacity.map",
        "subgoals.txt",
        "potential.field",
        "predictor.bin",
        "qtable_gdcc.txt",
        "curve_gdcc.txt",
        "eval_sparse.txt",
    ] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }

    let o = bin().arg("eval-predictor").args(common(b.path())).output().unwrap();
    assert!(text(&o.stdout).starts_with("region_accuracy "));
    assert!(b.path().join("predictor_eval.txt").is_file());
}

#[test]
fn render_kinds_write_images() {
    let dir = tempfile::tempdir().unwrap();
    let maze = demo();
    let (m, out) = (maze.to_str().unwrap(), dir.path().to_str().unwrap());
    for stage in ["sample", "capacity", "subgoals"] {
        assert_eq!(run(&[stage, "--maze", m, "--out", out]).status.code(), Some(0));
    }
    for (kind, file) in [("capacity", "capacity.ppm"), ("regions", "regions.ppm"), ("potential", "potential.ppm")] {
        let o = run(&["render", "--kind", kind, "--maze", m, "--out", out, "--set", "render_scale=4"]);
        assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
        let bytes = std::fs::read(dir.path().join(file)).unwrap();
        let header = b"P6\n44 44\n255\n";
        assert!(bytes.starts_with(header), "{kind}");
        assert_eq!(bytes.len(), header.len() + 44 * 44 * 3);
    }
    let o = run(&["render", "--kind", "curve", "--maze", m, "--out", out]);
    assert_eq!(o.status.code(), Some(2), "no curves yet");
}
