use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use haunted_core::engine::{Command as GameCommand, Scenario};
use haunted_core::geometry::Direction;
use haunted_core::messages::InstructionVariant;
use haunted_core::transcript::{
    read_jsonl, replay, write_jsonl, AgentInfo, OutcomeStatus, Transcript,
};
use haunted_harness::{StubScript, StubServer};

fn haunted() -> Command {
    Command::new(env!("CARGO_BIN_EXE_haunted"))
}

fn run_with_stdin(args: &[&str], stdin: &str) -> Output {
    let mut child = haunted()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(stdin.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn read(path: &Path) -> Vec<Transcript> {
    read_jsonl(std::fs::read(path).unwrap().as_slice()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn play_the_walkthrough() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("play.jsonl");
    let input = "down\nup\nleft\nleft\nright\nright\nleft\nleft\ndown\nup\ndown\ndown\n";
    let o = run_with_stdin(&["play", "--out", out.to_str().unwrap()], input);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("Welcome to the Haunted House game!"));
    assert!(text.contains("Congratulations - You have escaped the haunted house!"));
    assert!(text.contains("move 12/20"));
    let t = read(&out);
    assert_eq!(t[0].outcome.status, OutcomeStatus::Escaped);
    assert_eq!(t[0].agent, AgentInfo::human());
}

#[test]
fn play_quit_saves_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("play.jsonl");
    let o = run_with_stdin(
        &["play", "--out", out.to_str().unwrap()],
        "left\nwhat now\nquit\n",
    );
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("move 1/20"));
    assert!(text.contains("Please reply with exactly one move"));
    let t = read(&out);
    assert_eq!(t[0].outcome.status, OutcomeStatus::Incomplete);
    assert_eq!(t[0].moves.len(), 1);
}

#[test]
fn play_runs_out_of_moves() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("play.jsonl");
    let o = run_with_stdin(
        &["play", "--out", out.to_str().unwrap()],
        &"up\n".repeat(25),
    );
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("Game over - You ran out of moves!"));
    assert!(text.contains("move 20/20"));
    assert!(!text.contains("move 21/20"));
}

#[test]
fn play_coordinates_variant() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("play.jsonl");
    let o = run_with_stdin(
        &[
            "play",
            "--variant",
            "coordinates",
            "--out",
            out.to_str().unwrap(),
        ],
        "C2\nquit\n",
    );
    assert!(o.status.success());
    assert!(stdout(&o).contains("You start in C1."));
    assert_eq!(read(&out)[0].variant, InstructionVariant::Coordinates);
}

#[test]
fn sim_optimal_and_random() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("opt.jsonl");
    let o = haunted()
        .args([
            "sim",
            "--agent",
            "optimal",
            "--n",
            "1",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(o.status.success());
    let t = read(&out);
    assert_eq!(t.len(), 1);
    assert_eq!(t[0].outcome.status, OutcomeStatus::Escaped);
    assert_eq!(t[0].moves.len(), 12);
    assert!(dir.path().join("opt.summary.json").exists());

    let run = |name: &str| {
        let path = dir.path().join(name);
        let o = haunted()
            .args([
                "sim",
                "--agent",
                "random",
                "--seed",
                "9",
                "--n",
                "50",
                "--parallelism",
                "4",
            ])
            .args(["--out", path.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(o.status.success());
        std::fs::read(path).unwrap()
    };
    assert_eq!(run("a.jsonl"), run("b.jsonl"));
}

#[test]
fn analyze_reports_table_cells() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("set.jsonl");
    let walkthrough: Vec<GameCommand> =
        haunted_harness::walkthrough_commands(InstructionVariant::Original);
    let mut set = Vec::new();
    for i in 0..20 {
        let commands = if i == 0 {
            walkthrough.clone()
        } else {
            vec![GameCommand::Move(Direction::Up); 20]
        };
        let mut t = replay(&Scenario::canonical(), &commands, true).unwrap();
        t.session_id = format!("s{i}");
        t.agent = AgentInfo::model("m");
        set.push(t);
    }
    write_jsonl(std::fs::File::create(&path).unwrap(), &set).unwrap();

    let o = haunted()
        .args(["analyze", "--in", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("1 (5%)"), "{}", stdout(&o));

    let o = haunted()
        .args(["analyze", "--format", "csv", "--mode", "clues", "--in"])
        .arg(&path)
        .arg(&path)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).lines().count() >= 2);

    let o = haunted()
        .args(["analyze", "--in", "/definitely/not/here.jsonl"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn oracle_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = haunted().args(["oracle", "--out"]).arg(p).output().unwrap();
        assert!(o.status.success());
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["min_win_length"], 10);
    assert_eq!(v["uniform_random_success"]["denominator"], "549755813888");
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["frobnicate"],
        vec!["sim"],
        vec!["sim", "--agent", "clever"],
        vec!["sim", "--agent", "optimal", "--n", "0"],
        vec!["play", "--variant", "bogus"],
    ] {
        let o = haunted().args(&args).output().unwrap();
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    assert_eq!(
        haunted().arg("--help").output().unwrap().status.code(),
        Some(0)
    );
}

#[test]
fn eval_against_the_stub() {
    let stub = StubServer::start(StubScript::optimal(InstructionVariant::Original)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eval.jsonl");
    let o = haunted()
        .args([
            "eval",
            "--endpoint",
            &stub.url(),
            "--model",
            "stub",
            "--pacing-ms",
            "0",
        ])
        .args(["--out", out.to_str().unwrap()])
        .env("HAUNTED_API_KEY", "k")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("pass 20/20"));
    assert_eq!(read(&out).len(), 20);

    let out10 = dir.path().join("ten.jsonl");
    let o = haunted()
        .args([
            "eval",
            "--endpoint",
            &stub.url(),
            "--model",
            "stub",
            "--pacing-ms",
            "0",
        ])
        .args(["--n", "10", "--out", out10.to_str().unwrap()])
        .env("HAUNTED_API_KEY", "k")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(read(&out10).len(), 10);
}

#[test]
fn eval_failures_exit_one() {
    let url = {
        let stub = StubServer::start(StubScript::default()).unwrap();
        stub.url()
    };
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eval.jsonl");
    let o = haunted()
        .args(["eval", "--endpoint", &url, "--model", "gone", "--n", "3"])
        .args([
            "--pacing-ms",
            "0",
            "--backoff-ms",
            "1",
            "--max-retries",
            "1",
        ])
        .args(["--out", out.to_str().unwrap()])
        .env("HAUNTED_API_KEY", "k")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    // whatever was written is still well-formed
    if out.exists() {
        for t in read(&out) {
            assert_eq!(t.outcome.status, OutcomeStatus::Invalid);
        }
    }

    let o = haunted()
        .args([
            "eval",
            "--endpoint",
            &url,
            "--model",
            "m",
            "--credential-env",
            "HAUNTED_UNSET_FOR_TEST",
        ])
        .env_remove("HAUNTED_UNSET_FOR_TEST")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("HAUNTED_UNSET_FOR_TEST"));
}

#[test]
fn serve_accepts_sessions() {
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("events.jsonl");
    let mut child = haunted()
        .args(["serve", "--addr", &format!("127.0.0.1:{port}"), "--store"])
        .arg(&store)
        .env("HAUNTED_ADMIN_TOKEN", "t")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let url = format!("http://127.0.0.1:{port}/sessions");
    let deadline = Instant::now() + Duration::from_secs(20);
    let response = loop {
        match ureq::post(&url).send_json(serde_json::json!({"variant": "ghost"})) {
            Ok(r) => break r,
            Err(_) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(100)),
            Err(e) => {
                let _ = child.kill();
                panic!("service never came up: {e}");
            }
        }
    };
    let status = response.status().as_u16();
    let _ = child.kill();
    let _ = child.wait();
    assert_eq!(status, 200);
    assert!(std::fs::read_to_string(&store)
        .unwrap()
        .contains("\"created\""));
}
