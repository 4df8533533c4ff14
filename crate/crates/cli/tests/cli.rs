use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn sbm(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbm"))
        .args(args)
        .env("SBM_OUTPUT_DIR", out)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn study_writes_csv_and_gnuplot_files() {
    let dir = TempDir::new().unwrap();
    let out = sbm(
        &[
            "study",
            "--problem",
            "poisson",
            "--order",
            "2",
            "--levels",
            "8,16,32,64",
            "--rotations",
            "0,45",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", text(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("poisson_k2.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], sbm_core::harness::CSV_HEADER);
    assert_eq!(lines.len(), 1 + 8);
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 12);
        assert_eq!(fields[0], "poisson");
        assert_eq!(fields[1], "2");
        assert!(fields[7].parse::<f64>().unwrap() > 0.0);
        assert!(fields[9].is_empty(), "no condition number was requested");
    }
    for norm in ["l2", "h1"] {
        let dat = fs::read_to_string(dir.path().join(format!("poisson_k2_{norm}.dat"))).unwrap();
        let rows: Vec<Vec<f64>> = dat
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.len() == 2));
    }
}

#[test]
fn out_of_range_order_is_a_configuration_error() {
    let dir = TempDir::new().unwrap();
    let out = sbm(&["study", "--order", "9"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(err.contains("order must be in 1..5"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn diag_reports_assumption_quantities() {
    let dir = TempDir::new().unwrap();
    let out = sbm(
        &["diag", "--order", "1", "--levels", "8", "--rotations", "45"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", text(&out.stderr));
    let stdout = text(&out.stdout);
    let mut lines = stdout.lines();
    let header: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert!(header.contains(&"max_delta_over_h") && header.contains(&"n_abnormal"));
    let values: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(values.len(), header.len());
    let col = |name: &str| values[header.iter().position(|h| *h == name).unwrap()];
    let ratio: f64 = col("max_delta_over_h").parse().unwrap();
    assert!(ratio > 0.0 && ratio < 1.0, "{ratio}");
    col("n_abnormal").parse::<usize>().unwrap();
}

#[test]
fn failed_rows_exit_with_one_and_keep_the_csv() {
    let dir = TempDir::new().unwrap();
    // a domain smaller than one cell at n = 8 has no surrogate there
    let out = sbm(
        &[
            "study",
            "--side",
            "0.05",
            "--levels",
            "8,64",
            "--rotations",
            "0",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1), "stderr: {}", text(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("poisson_k1.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].ends_with(",,,,,,"));
    assert!(!rows[1].ends_with(','));
}

#[test]
fn flags_override_config_file_values() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("study.json");
    fs::write(
        &cfg,
        r#"{"problem": "poisson", "order": 3, "levels": [8, 16], "rotations": [0]}"#,
    )
    .unwrap();
    let out = sbm(
        &["study", "--config", cfg.to_str().unwrap(), "--order", "1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", text(&out.stderr));
    assert!(dir.path().join("poisson_k1.csv").exists());
    assert!(!dir.path().join("poisson_k3.csv").exists());
    let csv = fs::read_to_string(dir.path().join("poisson_k1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "levels came from the file");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\n  \"order\": 1,\n  \"mesh_size\": 0.1\n}\n").unwrap();
    let out = sbm(&["study", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(err.contains("mesh_size"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn output_dir_flag_beats_environment() {
    let env_dir = TempDir::new().unwrap();
    let flag_dir = TempDir::new().unwrap();
    let out = sbm(
        &[
            "study",
            "--levels",
            "8",
            "--rotations",
            "0",
            "--output-dir",
            flag_dir.path().to_str().unwrap(),
        ],
        env_dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", text(&out.stderr));
    assert!(flag_dir.path().join("poisson_k1.csv").exists());
    assert!(!env_dir.path().join("poisson_k1.csv").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = [
        "study",
        "--order",
        "2",
        "--levels",
        "8,16",
        "--rotations",
        "0,22.5,45",
        "--condition",
    ];
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(sbm(&args, a.path()).status.code(), Some(0));
    let mut serial = args.to_vec();
    serial.extend(["--threads", "1"]);
    assert_eq!(sbm(&serial, b.path()).status.code(), Some(0));
    for file in ["poisson_k2.csv", "poisson_k2_l2.dat", "poisson_k2_h1.dat"] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn solve_writes_samples_matrix_and_mesh() {
    let dir = TempDir::new().unwrap();
    let out = sbm(
        &[
            "solve",
            "--problem",
            "elasticity",
            "--order",
            "2",
            "--level",
            "64",
            "--rotation",
            "30",
            "--write-matrix",
            "--write-mesh",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", text(&out.stderr));
    let stem = dir.path().join("elasticity_k2_n64_r30");
    let samples = fs::read_to_string(format!("{}_solution.dat", stem.display())).unwrap();
    let mut lines = samples.lines();
    assert_eq!(lines.next().unwrap(), "# x y ux_h uy_h ux_exact uy_exact");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!(rows.iter().all(|r| r.len() == 6));
    let scale = rows
        .iter()
        .map(|r| r[4].abs().max(r[5].abs()))
        .fold(0.0, f64::max);
    let worst = rows
        .iter()
        .map(|r| (r[2] - r[4]).abs().max((r[3] - r[5]).abs()))
        .fold(0.0, f64::max);
    // the benchmark field oscillates, so only a fine grid resolves it nodally
    assert!(
        worst < 0.1 * scale,
        "nodal error {worst} against displacement scale {scale}"
    );
    let mtx = fs::read_to_string(format!("{}_matrix.mtx", stem.display())).unwrap();
    let mut mtx_lines = mtx.lines();
    let dims: Vec<usize> = mtx_lines
        .next()
        .unwrap()
        .split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(dims[1], mtx_lines.count());
    assert_eq!(dims[0], 2 * rows.len());
    assert!(Path::new(&format!("{}_mesh.dat", stem.display())).exists());
}

#[test]
fn selftest_lists_every_suite() {
    let dir = TempDir::new().unwrap();
    let out = sbm(&["selftest"], dir.path());
    let stdout = text(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), sbm_core::selftest::run_all().len());
    assert!(lines
        .iter()
        .all(|l| l.starts_with("PASS") || l.starts_with("FAIL")));
    let expected = if lines.iter().all(|l| l.starts_with("PASS")) {
        0
    } else {
        1
    };
    assert_eq!(out.status.code(), Some(expected));
}

/// Sample value for every flag the subcommands document; a documented flag
/// missing here fails the test below.
fn sample(flag: &str, cfg: &str, dir: &str) -> Option<Vec<String>> {
    let value = match flag {
        "--config" => cfg,
        "--problem" => "elasticity",
        "--order" => "2",
        "--levels" => "8,16",
        "--rotations" => "0,45",
        "--side" => "0.4",
        "--center" => "0.5,0.5",
        "--young" => "2e11",
        "--poisson-ratio" => "0.25",
        "--condition-mode" => "dense",
        "--threads" => "2",
        "--output-dir" => dir,
        "--level" => "16",
        "--rotation" => "10",
        "--condition" | "--write-matrix" | "--write-mesh" | "--verbose" | "--quiet" => {
            return Some(vec![flag.into()])
        }
        _ => return None,
    };
    Some(vec![flag.into(), value.into()])
}

#[test]
fn every_documented_flag_is_parsed() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("empty.json");
    fs::write(&cfg, "{}").unwrap();
    let (cfg, d) = (cfg.to_str().unwrap(), dir.path().to_str().unwrap());
    for sub in ["study", "solve", "diag", "selftest"] {
        let help = text(&sbm(&[sub, "--help"], dir.path()).stdout);
        let flags: Vec<&str> = help
            .split(|c: char| c.is_whitespace() || c == ',' || c == '=')
            .map(|w| w.trim_end_matches('.'))
            .filter(|w| w.starts_with("--") && w.len() > 2)
            .filter(|w| *w != "--help" && *w != "--version")
            .collect();
        assert!(!flags.is_empty() || sub == "selftest");
        for flag in flags {
            let mut args = vec![sub.to_string()];
            args.extend(
                sample(flag, cfg, d)
                    .unwrap_or_else(|| panic!("help of {sub} documents unknown flag {flag}")),
            );
            if sub != "selftest" {
                // an invalid order stops the run right after parsing succeeds
                if flag != "--order" {
                    args.extend(["--order".into(), "9".into()]);
                } else {
                    args[2] = "9".into();
                }
            } else {
                args.push("--help".into());
            }
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            let out = sbm(&refs, dir.path());
            let err = text(&out.stderr);
            assert!(
                !err.contains("unexpected argument") && !err.contains("invalid value"),
                "{args:?}: {err}"
            );
            if sub != "selftest" {
                assert_eq!(out.status.code(), Some(2), "{args:?}: {err}");
                assert!(err.contains("order must be in 1..5"), "{args:?}: {err}");
            }
        }
    }
}
