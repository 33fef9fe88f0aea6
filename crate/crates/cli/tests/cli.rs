use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn rfcw(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfcw"))
        .current_dir(dir)
        .env_remove("RFCW_OUTPUT_DIR")
        .args(args)
        .output()
        .expect("spawn rfcw")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    assert_eq!(code(&rfcw(d, &["--help"])), 0);
    assert_eq!(code(&rfcw(d, &["simulate", "--bogus"])), 1);
    assert_eq!(
        code(&rfcw(d, &["simulate", "--beta", "-1", "--output-dir", "a"])),
        1
    );
    assert_eq!(
        code(&rfcw(d, &["betastar", "--h", "0.3", "--output-dir", "b"])),
        1
    );
    let origin = rfcw(
        d,
        &[
            "integrate",
            "--m0",
            "0",
            "--lambda0",
            "0",
            "--crossings",
            "3",
            "--output-dir",
            "c",
        ],
    );
    assert_eq!(code(&origin), 2);
    assert!(String::from_utf8_lossy(&origin.stderr).starts_with("error:"));
}

#[test]
fn lyapunov2_prints_reference_value() {
    let tmp = TempDir::new().unwrap();
    let out = rfcw(tmp.path(), &["lyapunov2", "--output-dir", "o"]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "-0.00277778");
    let m = manifest(&tmp.path().join("o"));
    assert_eq!(m["command"], "lyapunov2");
    assert!(tmp.path().join("o/lyapunov2.json").exists());
}

#[test]
fn manifest_and_replay_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let runs: [(&str, &[&str], &str); 2] = [
        (
            "sim",
            &[
                "simulate", "--n", "200", "--t-end", "2", "--seed", "9", "--h", "0.4",
            ],
            "trajectory.csv",
        ),
        (
            "ode",
            &[
                "integrate",
                "--system",
                "lienard",
                "--t-end",
                "5",
                "--crossings",
                "4",
            ],
            "crossings.csv",
        ),
    ];
    for (name, args, file) in runs {
        let mut full = args.to_vec();
        full.extend(["--output-dir", name]);
        assert_eq!(code(&rfcw(d, &full)), 0);
        let m = manifest(&d.join(name));
        assert_eq!(m["tool"], "rfcw");
        assert!(m["outputs"].as_array().unwrap().iter().any(|o| o == file));

        let again = format!("{name}-replay");
        let manifest_path = d.join(name).join("manifest.json");
        let out = rfcw(
            d,
            &[
                "replay",
                manifest_path.to_str().unwrap(),
                "--output-dir",
                &again,
            ],
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        for f in m["outputs"].as_array().unwrap() {
            let f = f.as_str().unwrap();
            assert_eq!(
                fs::read(d.join(name).join(f)).unwrap(),
                fs::read(d.join(&again).join(f)).unwrap(),
                "{f}"
            );
        }
    }
}

#[test]
fn output_independent_of_thread_count() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    for threads in ["1", "4"] {
        let lln = [
            "lln",
            "--beta",
            "1",
            "--h",
            "0.3",
            "--n-list",
            "50,200",
            "--seeds-per-n",
            "6",
            "--t-end",
            "2",
            "--threads",
            threads,
            "--output-dir",
        ];
        let mut args = lln.to_vec();
        let dir = format!("lln{threads}");
        args.push(&dir);
        assert_eq!(code(&rfcw(d, &args)), 0);

        let dir = format!("scan{threads}");
        let scan = [
            "scan",
            "--h",
            "0.6:0.2:1.0",
            "--beta",
            "2:0.5:4",
            "--threads",
            threads,
            "--output-dir",
            &dir,
        ];
        assert_eq!(code(&rfcw(d, &scan)), 0);
    }
    for (a, b, f) in [
        ("lln1", "lln4", "lln.csv"),
        ("scan1", "scan4", "phase.csv"),
        ("scan1", "scan4", "beta_star.csv"),
    ] {
        assert_eq!(
            fs::read(d.join(a).join(f)).unwrap(),
            fs::read(d.join(b).join(f)).unwrap(),
            "{f}"
        );
    }
    let phase = fs::read_to_string(d.join("scan1/phase.csv")).unwrap();
    assert_eq!(phase.lines().count(), 1 + 3 * 5);
}

#[test]
fn config_precedence() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("run.toml"),
        "beta = 1.2\nh = 0.5\noutput_dir = \"from_file\"\n",
    )
    .unwrap();

    assert_eq!(
        code(&rfcw(
            d,
            &["stability", "--config", "run.toml", "--beta", "3.0"]
        )),
        0
    );
    let m = manifest(&d.join("from_file"));
    assert_eq!(m["config"]["beta"], 3.0);
    assert_eq!(m["config"]["h"], 0.5);

    let with_env = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_rfcw"))
            .current_dir(d)
            .env("RFCW_OUTPUT_DIR", "from_env")
            .args(args)
            .output()
            .unwrap()
    };
    assert_eq!(code(&with_env(&["stability", "--config", "run.toml"])), 0);
    assert_eq!(manifest(&d.join("from_env"))["config"]["beta"], 1.2);
    assert_eq!(
        code(&with_env(&[
            "stability",
            "--config",
            "run.toml",
            "--output-dir",
            "from_flag"
        ])),
        0
    );
    assert!(d.join("from_flag/stability.json").exists());

    fs::write(d.join("bad.toml"), "betta = 1.0\n").unwrap();
    assert_eq!(code(&rfcw(d, &["stability", "--config", "bad.toml"])), 1);
}
