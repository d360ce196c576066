use std::collections::BTreeSet;
use std::io::Write;
use std::process::{Command, Output, Stdio};

use hytl_core::agent::TrajectoryLine;
use hytl_core::attcat::parse_heatmap;
use hytl_env::trajectory::read_lines;

fn hytl(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_hytl"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn progress_prints_each_step_and_stops_at_a_verdict() {
    let o = hytl(&["progress", "--formula", "F (a & F b)"], "\na\nb\na,b\n");
    assert!(o.status.success());
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], lines[0].trim());
    assert_ne!(lines[0], lines[1]);
    assert_eq!(lines[2], "true");
}

#[test]
fn progress_reaches_false_on_a_safety_violation() {
    let o = hytl(&["progress", "--formula", "!c U d"], "c\nd\n");
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "false");
}

#[test]
fn progress_rejects_unknown_propositions() {
    let o = hytl(&["progress", "--formula", "F a"], "zzz\n");
    assert!(!o.status.success());
}

#[test]
fn tasks_lists_the_library() {
    let o = hytl(&["tasks"], "");
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 6);
    assert!(out.lines().any(|l| l.starts_with("PegInsertion\t")));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = hytl(&["juggle"], "");
    assert_eq!(o.status.code(), Some(2));
    let o = hytl(&["train"], "");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_eval_attcat_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.toml");
    std::fs::write(
        &config,
        "task = \"TwoStage\"\nbudget = 200\nwarmup_steps = 50\neval_every = 100\neval_episodes = 2\nbatch_size = 16\nhidden = 16\nlayers = 1\ndim = 8\nheads = 2\nmlp_hidden = 8\nwall_clock = false\n",
    )
    .unwrap();
    let out = dir.path().join("run");
    let o = hytl(
        &[
            "train",
            "--config",
            config.to_str().unwrap(),
            "--seed",
            "4",
            "--out",
            out.to_str().unwrap(),
        ],
        "",
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("env_steps="));
    let ckpt = out.join("checkpoint.hytl");
    let ckpt = ckpt.to_str().unwrap();

    let traj = dir.path().join("eval.jsonl");
    let o = hytl(
        &[
            "eval",
            "--checkpoint",
            ckpt,
            "--episodes",
            "3",
            "--trajectory",
            traj.to_str().unwrap(),
        ],
        "",
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("success_rate="));
    let lines: Vec<TrajectoryLine> = read_lines(std::io::BufReader::new(std::fs::File::open(&traj).unwrap())).unwrap();
    let episodes: BTreeSet<u64> = lines.iter().map(|l| l.step.episode).collect();
    assert_eq!(episodes.len(), 3);
    assert!(lines.len() <= 3 * 25);
    assert!(lines.iter().all(|l| l.waypoint.is_some()));
    for w in lines.windows(2) {
        if w[0].step.episode == w[1].step.episode {
            assert_eq!(w[1].step.step, w[0].step.step + 1);
        } else {
            assert_eq!(w[1].step.step, 0);
        }
    }

    let csv = dir.path().join("heat.csv");
    let args = [
        "attcat",
        "--checkpoint",
        ckpt,
        "--formula",
        "F (zone_a & F zone_b)",
        "--class",
        "zone_b",
        "--out",
        csv.to_str().unwrap(),
    ];
    let o = hytl(&args, "");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let scores = parse_heatmap(std::fs::File::open(&csv).unwrap(), "zone_b").unwrap();
    assert_eq!(
        scores.tokens,
        ["<cls>", "eventually", "and", "zone_a", "eventually", "zone_b"]
    );
    let mut sender = args.to_vec();
    sender.push("--sender");
    assert!(hytl(&sender, "").status.success());

    let o = hytl(
        &[
            "attcat",
            "--checkpoint",
            ckpt,
            "--formula",
            "F zone_c",
            "--class",
            "zone_b",
            "--out",
            "x.csv",
        ],
        "",
    );
    assert!(!o.status.success());
    let o = hytl(&["eval", "--checkpoint", "/nonexistent/ckpt", "--episodes", "1"], "");
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn attcat_needs_an_encoder() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("plain.toml");
    std::fs::write(
        &config,
        "task = \"ReachPoint\"\nbudget = 60\nwarmup_steps = 60\neval_every = 60\neval_episodes = 1\nbatch_size = 16\nhidden = 8\nencoder = false\nprobe = false\n",
    )
    .unwrap();
    let out = dir.path().join("run");
    assert!(hytl(
        &[
            "train",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ],
        ""
    )
    .status
    .success());
    let ckpt = out.join("checkpoint.hytl");
    let o = hytl(
        &[
            "attcat",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--formula",
            "F reached",
            "--class",
            "reached",
            "--out",
            dir.path().join("h.csv").to_str().unwrap(),
        ],
        "",
    );
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("not trained"));
}
