use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn kmland(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kmland"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Four points on a line; with K = 2 there are three minima and two
/// crossing points at J = 10.
fn toy(dir: &Path) -> PathBuf {
    let p = dir.join("toy.csv");
    std::fs::write(&p, "x,class\n0,a\n3,a\n4,b\n7,b\n").unwrap();
    p
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&read(dir, name)).unwrap()
}

const TOY: &[&str] = &[
    "--data", "toy.csv", "--labels", "class", "--k", "2", "--starts", "300", "--seed", "5",
];

fn run_ok(dir: &Path, cmd: &[&str]) -> Output {
    let args: Vec<&str> = cmd.iter().chain(TOY).copied().collect();
    let o = kmland(dir, &args);
    assert_eq!(code(&o), 0, "{cmd:?}: {}", stderr(&o));
    o
}

#[test]
fn toy_pipeline() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    toy(dir);
    run_ok(dir, &["explore"]);
    let minima = json(dir, "out/minima.json");
    let mut costs: Vec<f64> = minima["minima"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["cost"].as_f64().unwrap())
        .collect();
    costs.sort_by(f64::total_cmp);
    assert_eq!(costs.len(), 3);
    assert!((costs[0] - 26.0 / 3.0).abs() < 1e-12);
    assert!((costs[1] - 26.0 / 3.0).abs() < 1e-12);
    assert!((costs[2] - 9.0).abs() < 1e-12);

    let o = run_ok(dir, &["connect"]);
    assert!(stderr(&o).contains("components=1"), "{}", stderr(&o));
    let net = json(dir, "out/network.json");
    let ts = net["transition_states"].as_array().unwrap();
    assert_eq!(ts.len(), 2);
    for t in ts {
        assert!((t["cost"].as_f64().unwrap() - 10.0).abs() < 1e-3);
    }

    run_ok(dir, &["rates"]);
    let rates = read(dir, "out/rates.csv");
    assert_eq!(
        rates.lines().count(),
        4,
        "header, columns, two minima: {rates}"
    );

    let gm = net["minima"]
        .as_array()
        .unwrap()
        .iter()
        .min_by(|a, b| {
            a["cost"]
                .as_f64()
                .unwrap()
                .total_cmp(&b["cost"].as_f64().unwrap())
        })
        .unwrap()["id"]
        .as_u64()
        .unwrap();
    let other = (0..3)
        .find(|&i| i != gm && net["minima"][i as usize]["cost"].as_f64().unwrap() < 9.0)
        .unwrap();
    run_ok(dir, &["path", "--from", &other.to_string()]);
    let path = read(dir, "out/path.csv");
    let rows: Vec<&str> = path.lines().skip(2).collect();
    assert_eq!(
        rows.len(),
        5,
        "two crossings and the middle minimum: {path}"
    );
    assert!(
        rows[2].contains(",9.0,") || rows[2].contains(",9,"),
        "{path}"
    );

    run_ok(dir, &["dgraph", "--colour", "cost"]);
    assert_eq!(
        read(dir, "out/dgraph.svg")
            .matches("class=\"leaf\"")
            .count(),
        3
    );
    run_ok(dir, &["frustration", "--n-temps", "4"]);
    assert_eq!(read(dir, "out/frustration.csv").lines().count(), 6);
    run_ok(dir, &["compare", "--a", "0", "--b", "1"]);
    assert!(read(dir, "out/compare.csv")
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("a,b,RI,ARI,T,rate"));
    run_ok(dir, &["validate"]);
}

#[test]
fn artifacts_carry_provenance() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    toy(dir);
    run_ok(dir, &["explore"]);
    run_ok(dir, &["connect"]);
    run_ok(dir, &["dgraph"]);
    run_ok(dir, &["frustration"]);
    let hash = json(dir, "out/network.json")["config_hash"]
        .as_str()
        .unwrap()
        .to_string();
    assert_eq!(hash.len(), 64);
    assert_eq!(json(dir, "out/network.json")["seed"], 5);
    let header = format!("# config_hash={hash} seed=5");
    for name in ["out/minima.csv", "out/frustration.csv"] {
        assert_eq!(read(dir, name).lines().next().unwrap(), header, "{name}");
    }
    assert!(read(dir, "out/dgraph.svg").contains(&format!("config_hash={hash} seed=5")));
    assert_eq!(json(dir, "out/dgraph.json")["meta"][0][1], hash.as_str());
}

#[test]
fn explore_is_replayable() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    toy(dir);
    run_ok(dir, &["explore", "--out", "a"]);
    run_ok(dir, &["explore", "--out", "b", "--threads", "4"]);
    assert_eq!(read(dir, "a/minima.json"), read(dir, "b/minima.json"));
    assert_eq!(read(dir, "a/minima.csv"), read(dir, "b/minima.csv"));
    let reseeded = [
        "explore", "--data", "toy.csv", "--labels", "class", "--k", "2", "--starts", "300",
        "--seed", "6", "--out", "c",
    ];
    assert_eq!(code(&kmland(dir, &reseeded)), 0);
    assert_ne!(read(dir, "a/minima.json"), read(dir, "c/minima.json"));
}

#[test]
fn single_minimum_graph_has_one_leaf() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    toy(dir);
    let args = [
        "--data", "toy.csv", "--k", "1", "--starts", "5", "--labels", "class",
    ];
    for cmd in ["explore", "connect", "dgraph"] {
        let o = kmland(dir, &[&[cmd][..], &args[..]].concat());
        assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
    }
    assert_eq!(
        read(dir, "out/dgraph.svg")
            .matches("class=\"leaf\"")
            .count(),
        1
    );
}

fn corrupt(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) {
    let mut db = json(dir, "out/network.json");
    edit(&mut db);
    std::fs::write(
        dir.join("out/network.json"),
        serde_json::to_string_pretty(&db).unwrap(),
    )
    .unwrap();
}

#[test]
fn validate_reports_injected_faults() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    toy(dir);
    run_ok(dir, &["explore"]);
    run_ok(dir, &["connect"]);
    let clean = std::fs::read(dir.join("out/network.json")).unwrap();

    corrupt(dir, |db| {
        let j = db["minima"][1]["cost"].as_f64().unwrap();
        db["minima"][1]["cost"] = (j - 0.5).into();
    });
    let o = kmland(dir, &[&["validate"][..], TOY].concat());
    assert_eq!(code(&o), 1);
    let out = String::from_utf8(o.stdout).unwrap();
    assert_eq!(out.lines().collect::<Vec<_>>(), ["minimum 1: CostMismatch"]);

    std::fs::write(dir.join("out/network.json"), &clean).unwrap();
    corrupt(dir, |db| {
        db["transition_states"][0]["connected"][1] = 99.into()
    });
    let o = kmland(dir, &[&["validate"][..], TOY].concat());
    assert_eq!(code(&o), 1);
    let out = String::from_utf8(o.stdout).unwrap();
    assert_eq!(
        out.lines().collect::<Vec<_>>(),
        ["transition state 0: MissingMinimum"]
    );

    std::fs::write(dir.join("out/network.json"), b"{ not json").unwrap();
    assert_eq!(code(&kmland(dir, &[&["validate"][..], TOY].concat())), 3);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    toy(dir);
    // configuration errors
    assert_eq!(code(&kmland(dir, &["explore", "--k", "2"])), 2);
    assert_eq!(
        code(&kmland(
            dir,
            &["explore", "--data", "toy.csv", "--labels", "class"]
        )),
        2
    );
    assert_eq!(
        code(&kmland(
            dir,
            &["explore", "--data", "toy.csv", "--labels", "class", "--k", "0"]
        )),
        2
    );
    assert_eq!(
        code(&kmland(
            dir,
            &["explore", "--data", "toy.csv", "--labels", "class", "--k", "2", "--temp", "-1"]
        )),
        2
    );
    // missing inputs
    assert_eq!(
        code(&kmland(dir, &["explore", "--data", "nope.csv", "--k", "2"])),
        3
    );
    assert_eq!(code(&kmland(dir, &[&["connect"][..], TOY].concat())), 3);
    assert_eq!(
        code(&kmland(dir, &["explore", "--config", "missing.conf"])),
        3
    );
    // partial network
    run_ok(dir, &["explore"]);
    let o = kmland(dir, &[&["connect", "--budget", "0"][..], TOY].concat());
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(
        dir.join("out/network.json").exists(),
        "partial network is still written"
    );
    assert_eq!(code(&kmland(dir, &[&["rates"][..], TOY].concat())), 4);
    assert_eq!(
        code(&kmland(dir, &[&["path", "--from", "0"][..], TOY].concat())),
        4
    );
}

#[test]
fn flags_override_config_file() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    toy(dir);
    std::fs::write(
        dir.join("run.conf"),
        "# toy run\ndata = toy.csv\nlabels = class\nk = 2\nstarts = 300\nseed = 5\nout = from_file\n",
    )
    .unwrap();
    let o = kmland(dir, &["explore", "--config", "run.conf"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = kmland(
        dir,
        &["explore", "--config", "run.conf", "--out", "from_flag"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        read(dir, "from_file/minima.json"),
        read(dir, "from_flag/minima.json")
    );
    let o = kmland(
        dir,
        &[
            "explore", "--config", "run.conf", "--seed", "8", "--out", "reseeded",
        ],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(json(dir, "reseeded/minima.json")["seed"], 8);
    std::fs::write(dir.join("bad.conf"), "data = toy.csv\nk = two\n").unwrap();
    assert_eq!(code(&kmland(dir, &["explore", "--config", "bad.conf"])), 2);
}
