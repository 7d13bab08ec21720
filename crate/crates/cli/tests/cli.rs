use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn dfprompt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfprompt")).current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const WORLD: &str = r#"{
  "tokens": {
    "highly": {"a": 0.05, "d": 0.0},
    "detailed": {"a": 0.2, "d": 0.0},
    "artstation": {"a": 0.6, "d": 0.01},
    "sharp": {"a": 0.1, "d": 0.0},
    "focus": {"a": 0.05, "d": 0.0},
    "blurry": {"a": -0.4, "d": 0.02},
    "cinematic": {"a": 0.3, "d": 0.005}
  },
  "noise_scale": 0.05,
  "seed": 3
}"#;

const LOG: &str = r#"{"prompt": "a cat, highly detailed, artstation", "source": "a"}
{"prompt": "a red car, blurry", "source": "b"}
{"prompt": "a quiet harbor, sharp focus, cinematic", "source": "c"}
{"prompt": "a cat, artstation, cinematic", "source": "d"}
{"prompt": "portrait of a knight, detailed", "source": "e"}
{"prompt": "no division point here"}
"#;

/// A workspace with a world file, a prompt log and a small training config.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("world.json"), WORLD).unwrap();
    fs::write(dir.path().join("log.jsonl"), LOG).unwrap();
    fs::write(dir.path().join("prompts.txt"), "a cat\na lighthouse\n\nportrait of a knight\n").unwrap();
    fs::write(
        dir.path().join("run.json"),
        r#"{"scorer": {"kind": "synthetic", "world_path": "world.json"},
            "filter": {"samples": 2},
            "training": {"episodes": 12, "batch": 4, "lr": 0.001, "max_len": 3},
            "seed": 5}"#,
    )
    .unwrap();
    dir
}

fn filter_and_train(dir: &Path) {
    let o = dfprompt(dir, &["filter", "--in", "log.jsonl", "--out", "pairs.jsonl", "--config", "run.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = dfprompt(dir, &["train", "--data", "pairs.jsonl", "--checkpoint", "ckpt.json", "--metrics", "m.csv", "--config", "run.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn parse_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = dfprompt(dir.path(), &["parse", "a forest goddess, [beauty : 0.5->0 : 0.75]"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["base"], "a forest goddess");
    assert_eq!(v["triples"][0]["token"], "beauty");
    assert_eq!(v["triples"][0]["range"], serde_json::json!([0.5, 0.0]));
    assert_eq!(v["triples"][0]["weight"], 0.75);
}

#[test]
fn malformed_prompt_exits_2_with_message_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let o = dfprompt(dir.path(), &["parse", "a cat, [x : 0->1 : 1]"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).is_empty());
    assert!(stderr(&o).contains("RangeOrder"), "{}", stderr(&o));
}

#[test]
fn format_reads_stdin_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let text = "a cat, [artstation : 1->0.5 : 1.25], [vivid : 1->0 : 0.5]";
    let json = stdout(&dfprompt(dir.path(), &["parse", text]));
    let mut child = Command::new(env!("CARGO_BIN_EXE_dfprompt"))
        .args(["format", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(json.as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), text);
}

#[test]
fn schedule_lists_active_steps() {
    let dir = tempfile::tempdir().unwrap();
    let o = dfprompt(dir.path(), &["schedule", "a cat, [x : 0.5->0 : 1.5]", "--steps", "10"]);
    assert!(o.status.success());
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines.len(), 10);
    assert_eq!(lines[0], "step=0 t=1 tokens=a:1,cat:1");
    assert_eq!(lines[5], "step=5 t=0.5 tokens=a:1,cat:1,x:1.5");
    assert!(lines[4].ends_with("cat:1"));
    assert_eq!(dfprompt(dir.path(), &["schedule", "a cat", "--steps", "0"]).status.code(), Some(2));
}

#[test]
fn missing_file_exits_1() {
    let dir = workspace();
    let o = dfprompt(dir.path(), &["filter", "--in", "absent.jsonl", "--out", "x.jsonl", "--world", "world.json"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = workspace();
    fs::write(dir.path().join("bad.json"), r#"{"reward": {"zeta": 0.3, "zetta": 1}}"#).unwrap();
    let o = dfprompt(dir.path(), &["filter", "--in", "log.jsonl", "--out", "x.jsonl", "--config", "bad.json"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unreachable_scorer_exits_3() {
    let dir = workspace();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("http://127.0.0.1:{port}");
    let o = dfprompt(dir.path(), &["filter", "--in", "log.jsonl", "--out", "x.jsonl", "--remote", &url]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn filter_keeps_improving_pairs() {
    let dir = workspace();
    let o = dfprompt(dir.path(), &["filter", "--in", "log.jsonl", "--out", "pairs.jsonl", "--config", "run.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let err = stderr(&o);
    assert!(err.contains("skipping line:6"), "{err}");
    assert!(err.contains("of 5 pairs"), "{err}");
    let kept = fs::read_to_string(dir.path().join("pairs.jsonl")).unwrap();
    let sources: Vec<String> = kept
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["source"].as_str().unwrap().to_string())
        .collect();
    assert!(!sources.is_empty());
    assert!(!sources.contains(&"b".to_string()));
}

#[test]
fn train_writes_checkpoint_and_metrics() {
    let dir = workspace();
    filter_and_train(dir.path());
    let csv = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "episode,mean_reward,mean_kl,value_loss");
    assert_eq!(lines.len(), 13);
    let ckpt: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("ckpt.json")).unwrap()).unwrap();
    assert_eq!(ckpt["config"]["training"]["episodes"], 12);
}

#[test]
fn config_echo_reproduces_the_run() {
    let dir = workspace();
    filter_and_train(dir.path());
    let echo = dfprompt(dir.path(), &["config", "--checkpoint", "ckpt.json"]);
    assert!(echo.status.success());
    fs::write(dir.path().join("echo.json"), stdout(&echo)).unwrap();
    let o = dfprompt(dir.path(), &["train", "--data", "pairs.jsonl", "--checkpoint", "again.json", "--metrics", "again.csv", "--config", "echo.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(dir.path().join("m.csv")).unwrap(), fs::read(dir.path().join("again.csv")).unwrap());
}

#[test]
fn default_config_prints_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = dfprompt(dir.path(), &["config"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["reward"]["zeta"], 0.28);
    assert_eq!(v["training"]["episodes"], 3000);
    assert_eq!(v["training"]["lr"], 5e-5);
}

#[test]
fn suggest_is_deterministic() {
    let dir = workspace();
    filter_and_train(dir.path());
    let run = |extra: &[&str]| {
        let mut args = vec!["suggest", "--checkpoint", "ckpt.json", "a lighthouse"];
        args.extend_from_slice(extra);
        let o = dfprompt(dir.path(), &args);
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o)
    };
    assert_eq!(run(&[]), run(&[]));
    assert_eq!(run(&["--temperature", "0.9", "--seed", "4"]), run(&["--temperature", "0.9", "--seed", "4"]));
    assert!(run(&[]).starts_with("a lighthouse"));
}

#[test]
fn evaluate_without_checkpoint_is_a_self_comparison() {
    let dir = workspace();
    let o = dfprompt(dir.path(), &["evaluate", "--prompts", "prompts.txt", "--config", "run.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows[0], "prompts\tsamples\tmean_aes\tmean_clip\tpick_win_rate");
    let fields: Vec<&str> = rows[1].split('\t').collect();
    assert_eq!(fields[0], "3");
    assert_eq!(fields[1], "2");
    assert_eq!(fields[4], "1.000000");
}

#[test]
fn evaluate_with_checkpoint_reports_one_row() {
    let dir = workspace();
    filter_and_train(dir.path());
    let o = dfprompt(dir.path(), &["evaluate", "--checkpoint", "ckpt.json", "--prompts", "prompts.txt", "--config", "run.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let row: Vec<f64> = out.lines().nth(1).unwrap().split('\t').map(|f| f.parse().unwrap()).collect();
    assert_eq!(row.len(), 5);
    assert!((0.0..=1.0).contains(&row[4]));
}
