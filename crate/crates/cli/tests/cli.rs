use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_evrep");

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn meta(text: &str, key: &str) -> String {
    let prefix = format!("# {key}=");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
        .to_owned()
}

/// Data rows of a CSV table, parsed as numbers where possible.
fn rows(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let data = lines
        .map(|l| {
            l.split(',')
                .map(|x| x.parse().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    (header, data)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

const LARMOR: &str = r#"
two_s = 1

[hamiltonian]
linear = [0.0, 0.0, 1.0]

[initial_state]
kind = "coherent"
theta = 1.5707963267948966
phi = 0.0

[time]
t_start = 0.0
t_end = 18.84955592153876
steps = 99
"#;

#[test]
fn quorum_report_spin_half() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", "two_s = 1\n");
    let o = run(&["quorum", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    let (_, data) = rows(&text);
    assert_eq!(data.len(), 4);
    assert!(meta(&text, "duality_residual").parse::<f64>().unwrap() < 1e-9);
    assert!(meta(&text, "identity_residual").parse::<f64>().unwrap() < 1e-8);
}

#[test]
fn quorum_report_scalar_spin() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", "two_s = 0\n");
    let o = run(&["quorum", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(rows(&text).1.len(), 1);
    let cond: f64 = meta(&text, "condition_number").parse().unwrap();
    assert!((cond - 1.0).abs() < 1e-12);
}

#[test]
fn duplicated_cone_angles_exit_with_singular_quorum() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "two_s = 2\n[quorum]\ncone_angles = [0.7, 0.7, 2.0]\nazimuth_offsets = [0.0, 0.0, 0.0]\n",
    );
    let o = run(&["quorum", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("not informationally complete"), "{err}");
}

#[test]
fn config_errors_exit_2_with_field_name() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", "two_s = 1\nbogus_field = 3\n");
    let o = run(&["quorum", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("bogus_field"));

    let o = run(&[
        "quorum",
        "--config",
        dir.path().join("missing.toml").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn quorum_export_then_import() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", "two_s = 3\n");
    let doc = dir.path().join("q.toml");
    let o = run(&[
        "quorum",
        "--config",
        cfg.to_str().unwrap(),
        "--export",
        doc.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let direct = stdout(&o);

    let cfg2 = write(
        dir.path(),
        "c2.toml",
        "two_s = 3\n[quorum]\nimport = \"q.toml\"\n",
    );
    let o = run(&["quorum", "--config", cfg2.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let imported = stdout(&o);
    assert_eq!(rows(&direct).1, rows(&imported).1);

    let cfg3 = write(
        dir.path(),
        "c3.toml",
        "two_s = 2\n[quorum]\nimport = \"q.toml\"\n",
    );
    assert_eq!(
        run(&["quorum", "--config", cfg3.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn frozen_run_is_constant() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "two_s = 2\nmethod = \"rk4\"\n[initial_state]\nkind = \"random_mixed\"\nseed = 5\n[time]\nt_start = 0.0\nt_end = 4.0\nsteps = 8\n",
    );
    let out = dir.path().join("t.csv");
    let o = run(&[
        "evolve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let (header, data) = rows(&fs::read_to_string(&out).unwrap());
    assert_eq!(data.len(), 9);
    let n_s = 9;
    for row in &data {
        assert_eq!(&row[1..=n_s], &data[0][1..=n_s]);
    }
    assert_eq!(header.len(), 1 + n_s + 4);
}

#[test]
fn larmor_run_with_oracle() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", LARMOR);
    let out = dir.path().join("t.csv");
    let o = run(&[
        "evolve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--oracle",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let (header, data) = rows(&text);
    assert_eq!(data.len(), 100);
    let dev = column(&header, "oracle_dev");
    let ep = column(&header, "ePdot");
    assert!(data.iter().all(|r| r[dev] < 1e-8));
    assert!(data.iter().all(|r| (r[ep] - data[0][ep]).abs() < 1e-8));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("t.csv.summary.json")).unwrap())
            .unwrap();
    assert!(summary["oracle_max_deviation"].as_f64().unwrap() < 1e-8);
    assert!(
        summary["trajectory"]["normalization_drift"]
            .as_f64()
            .unwrap()
            < 1e-8
    );
    assert_eq!(
        summary["generator"]["spectrum"].as_array().unwrap().len(),
        4
    );
    assert_eq!(
        summary["config_sha256"].as_str().unwrap(),
        meta(&text, "config_sha256")
    );
}

#[test]
fn json_lines_trajectory() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", LARMOR);
    let out = dir.path().join("t.jsonl");
    let o = run(&[
        "evolve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "json-lines",
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 101);
    assert_eq!(lines[0]["meta"]["N_s"], 4);
    assert!(lines[1]["P_1"].is_f64());
}

#[test]
fn evolve_requires_output_and_supported_method() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", LARMOR);
    assert_eq!(
        run(&["evolve", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    let driven = format!(
        "{LARMOR}\n[hamiltonian.drive]\nlinear = [0.2, 0.0, 0.0]\nenvelope = {{ kind = \"cosine\", amplitude = 1.0, frequency = 1.0 }}\n"
    );
    let cfg = write(dir.path(), "d.toml", &driven);
    let out = dir.path().join("d.csv");
    let o = run(&[
        "evolve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("rk4"));

    let rk4 = format!("method = \"rk4\"\n{driven}");
    let cfg = write(dir.path(), "r.toml", &rk4);
    let o = run(&[
        "evolve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn reconstruct_maximally_mixed() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "two_s = 2\n[initial_state]\nkind = \"maximally_mixed\"\n",
    );
    let o = run(&["reconstruct", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let (_, data) = rows(&stdout(&o));
    assert_eq!(data.len(), 9);
    assert!(data.iter().all(|r| (r[1] - 1.0 / 3.0).abs() < 1e-12));
}

#[test]
fn reconstruct_density_reports_round_trip() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "two_s = 1\n[initial_state]\nkind = \"density\"\nre = [[0.7, 0.1], [0.1, 0.3]]\nim = [[0.0, -0.2], [0.2, 0.0]]\n",
    );
    let o = run(&["reconstruct", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(meta(&text, "round_trip_deviation").parse::<f64>().unwrap() < 1e-9);

    let bad = write(
        dir.path(),
        "b.toml",
        "two_s = 2\n[initial_state]\nkind = \"density\"\nre = [[1.0, 0.0], [0.0, 0.0]]\n",
    );
    let o = run(&["reconstruct", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr)
        .unwrap()
        .contains("dimension mismatch"));
}

#[test]
fn reconstruct_unphysical_pvector_warns_but_succeeds() {
    let dir = TempDir::new().unwrap();
    // Spin-1/2 quorum: P = 1 on the two upper-cone directions is not a state.
    let cfg = write(
        dir.path(),
        "c.toml",
        "two_s = 1\n[initial_state]\nkind = \"pvector\"\nvalues = [1.0, 1.0, 0.0, 0.0]\n",
    );
    let o = run(&["reconstruct", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(meta(&text, "min_eigenvalue").parse::<f64>().unwrap() < 0.0);
    assert_eq!(meta(&text, "warning"), "true");
    assert_eq!(rows(&text).1.len(), 4);
}

#[test]
fn spectrum_lists_h_and_m() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", LARMOR);
    let o = run(&["spectrum", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    let body: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect();
    assert_eq!(body.iter().filter(|l| l.starts_with("H,")).count(), 2);
    assert_eq!(body.iter().filter(|l| l.starts_with("M,")).count(), 4);
    assert!(
        meta(&text, "bohr_spectrum_deviation")
            .parse::<f64>()
            .unwrap()
            < 1e-8
    );
}
