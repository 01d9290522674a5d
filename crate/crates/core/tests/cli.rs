use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bp_invlab::bench::ResultTable;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bp-invlab"))
}

fn write(dir: &Path, name: &str, body: &[u8]) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(config: &Path, out: &Path, threads: Option<&str>) -> Output {
    let mut cmd = bin();
    cmd.args(["run", "--config"]).arg(config).arg("--out").arg(out);
    if let Some(t) = threads {
        cmd.env("BP_INVLAB_THREADS", t);
    }
    cmd.output().unwrap()
}

const SWEEP: &str = r#"
experiment = "cs_pgd_sweep_r"
seeds = [0, 1]
side = 8
snr_db = 20.0
params = [0.5, 1.0, 1.5]
iters = 12
star_iters = 40

[signal]
kind = "sparse"
k = 5
"#;

#[test]
fn run_writes_sorted_csv_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.toml", SWEEP.as_bytes());
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("nested/b.csv"));
    let out = run(&cfg, &a, Some("1"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(run(&cfg, &b, Some("3")).status.code(), Some(0));
    let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ba, bb);

    let table = ResultTable::read_csv(ba.as_slice()).unwrap();
    // 2 seeds x 3 radii x 2 fidelities x (12 + 1) recorded iterates
    assert_eq!(table.len(), 2 * 3 * 2 * 13);
    let mut sorted = table.clone();
    sorted.sort();
    assert_eq!(sorted, table);
    assert!(table.rows.iter().all(|r| r.psnr_star.is_some()));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let bad = write(dir.path(), "bad.toml", SWEEP.replace("side = 8", "side = 6").as_bytes());
    assert_eq!(run(&bad, &out, None).status.code(), Some(2));
    let garbled = write(dir.path(), "garbled.toml", b"experiment = ");
    assert_eq!(run(&garbled, &out, None).status.code(), Some(2));
    assert_eq!(run(&dir.path().join("missing.toml"), &out, None).status.code(), Some(2));
    let cfg = write(dir.path(), "ok.toml", SWEEP.as_bytes());
    assert_eq!(run(&cfg, &out, Some("zero")).status.code(), Some(2));
    assert!(!out.exists());
}

fn pgm(side: usize, f: impl Fn(usize, usize) -> u8) -> Vec<u8> {
    let mut v = format!("P5\n{side} {side}\n255\n").into_bytes();
    for r in 0..side {
        for c in 0..side {
            v.push(f(r, c));
        }
    }
    v
}

#[test]
fn images_and_failed_cells() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "ramp.pgm", &pgm(16, |r, c| (8 * r + 4 * c) as u8));
    write(dir.path(), "black.pgm", &pgm(16, |_, _| 0));
    let text = |paths: &str| {
        format!(
            r#"
            experiment = "cs_pgd_ratios"
            seeds = [4]
            side = 8
            ratios = [0.5]
            snr_db = 25.0
            iters = 6
            [signal]
            kind = "images"
            paths = [{paths}]
            "#
        )
    };
    let out = dir.path().join("img.csv");
    let cfg = write(dir.path(), "img.toml", text("\"ramp.pgm\"").as_bytes());
    assert_eq!(run(&cfg, &out, None).status.code(), Some(0));
    let table = ResultTable::read_csv(std::fs::File::open(&out).unwrap()).unwrap();
    assert!(table.rows.iter().all(|r| r.image == "ramp"));
    assert_eq!(table.len(), 2 * 7);

    // a black image has no finite SNR: its cells fail, the other image's rows survive
    let cfg = write(dir.path(), "mixed.toml", text("\"ramp.pgm\", \"black.pgm\"").as_bytes());
    let res = run(&cfg, &out, None);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("image=black"));
    let mixed = ResultTable::read_csv(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(mixed, table);
}

#[test]
fn rates_subcommand() {
    let out = bin()
        .args(["rates", "--n", "64", "--m", "32", "--k", "4", "--supports", "50", "--seed", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let get = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key}=")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(get("p_bp_hat") <= get("p_ls_hat"));
    assert!(get("ratio") < 1.0);

    let bad = bin()
        .args(["rates", "--n", "64", "--m", "32", "--k", "40"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn check_runs_selected_criteria() {
    let out = bin().args(["check", "1", "9"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2);
}
