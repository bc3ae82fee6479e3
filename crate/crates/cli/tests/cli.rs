use std::fs;
use std::path::Path;
use std::process::Command;

use movdet_cli::run_command_with;

const SCENE: &str = r#"
width = 96
height = 64
frame_count = 12
seed = 3

[camera]
tx = 2.0

[[sprites]]
x = 8.0
y = 22.0
w = 14
h = 14
vx = 3.0
vy = 0.0
color = [230, 40, 40]
"#;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("movdet").chain(args.iter().copied());
    let code = run_command_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn synth_sequence(dir: &Path) -> String {
    let description = dir.join("scene.toml");
    fs::write(&description, SCENE).unwrap();
    let seq = dir.join("seq");
    let (code, out, err) = run(&["synth", description.to_str().unwrap(), seq.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("12 frames"), "{out}");
    seq.to_str().unwrap().to_string()
}

fn txt_files(dir: &Path) -> usize {
    fs::read_dir(dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "txt"))
        .count()
}

#[test]
fn help_lists_every_configuration_key() {
    let (code, out, _) = run(&["detect", "--help"]);
    assert_eq!(code, 0);
    for (key, _, _) in movdet_cli::config::KEYS {
        assert!(out.contains(key), "missing {key}");
    }
}

#[test]
fn unknown_flag_and_subcommand_are_usage_errors() {
    assert_eq!(run(&["detect", "--bogus", "x"]).0, 1);
    assert_eq!(run(&["frobnicate"]).0, 1);
    assert_eq!(run(&["config", "--set", "no_such_key=1"]).0, 1);
    assert_eq!(run(&["config", "--set", "margin"]).0, 1);
}

#[test]
fn missing_or_invalid_data_is_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nothing");
    assert_eq!(run(&["detect", missing.to_str().unwrap()]).0, 2);
    assert_eq!(run(&["config", "--set", "tau=1.5"]).0, 2);
    assert_eq!(run(&["config", "--set", "t_base=oops"]).0, 2);
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "width = \"wide\"").unwrap();
    assert_eq!(run(&["synth", bad.to_str().unwrap(), tmp.path().join("o").to_str().unwrap()]).0, 2);
}

#[test]
fn detect_writes_one_file_per_frame_and_overlays() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = synth_sequence(tmp.path());
    let out_dir = tmp.path().join("det");
    let (code, out, err) = run(&["detect", &seq, "--out", out_dir.to_str().unwrap(), "--overlay"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("12 frames"), "{out}");
    assert_eq!(txt_files(&out_dir), 12);
    assert_eq!(fs::read_dir(out_dir.join("overlay")).unwrap().count(), 12);

    let (code, _, err) = run(&["detect", &seq]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(txt_files(&Path::new(&seq).join("detections")), 12);
}

#[test]
fn ground_truth_as_detections_scores_perfectly() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = synth_sequence(tmp.path());
    let gt = Path::new(&seq).join("annotations");
    let (code, out, err) = run(&["evaluate", &seq, gt.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("Average"), "{out}");
    for label in ["O_r", "Pr ", "R  ", "F1 "] {
        let line = out.lines().find(|l| l.contains(label)).unwrap();
        assert!(line.contains("1.0000"), "{line}");
    }

    let (code, out, _) = run(&["evaluate", &seq, gt.to_str().unwrap(), "--csv"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "sequence,o_r,pr,r,f1,tp,fp,fn");
    assert!(lines[1].starts_with("seq,1.0000,1.0000,1.0000,1.0000,"), "{}", lines[1]);
    assert!(lines[2].starts_with("average,"));
}

#[test]
fn evaluate_runs_the_detector_over_a_directory_of_sequences() {
    let tmp = tempfile::tempdir().unwrap();
    synth_sequence(tmp.path());
    let (code, out, err) = run(&["evaluate", tmp.path().to_str().unwrap(), "--csv", "--set", "skip_frames=4"]);
    assert_eq!(code, 0, "{err}");
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "seq");
    let tp: usize = row[5].parse().unwrap();
    assert!(tp >= 6, "{out}");
}

#[test]
fn config_output_round_trips_through_a_file() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, first, _) = run(&["config", "--set", "margin=3", "--set", "t_base=35.5"]);
    assert_eq!(code, 0);
    assert!(first.contains("margin = 3"));
    let file = tmp.path().join("run.toml");
    fs::write(&file, &first).unwrap();
    let (code, second, _) = run(&["config", "--config", file.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(first, second);
}

#[test]
fn bench_on_a_synthetic_scene_reports_stages() {
    let (code, out, err) = run(&["bench", "--synth", "64x48", "--frames", "4"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("resolution   64x48"), "{out}");
    assert!(out.contains("fps"));
    assert!(out.contains("flow"));
    assert_eq!(run(&["bench", "--synth", "tiny"]).0, 1);
    assert_eq!(run(&["bench"]).0, 1);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_movdet");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&["--help"]), Some(0));
    assert_eq!(status(&["--nope"]), Some(1));
    assert_eq!(status(&["detect", "/definitely/not/here"]), Some(2));
}
