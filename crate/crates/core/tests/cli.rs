use std::path::Path;
use std::process::{Command, Output};

use asgs_flow::app::vtk::parse_vtk;

fn asgs(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asgs"))
        .args(args)
        .env("ASGS_OUTPUT_DIR", out)
        .output()
        .expect("binary runs")
}

#[test]
fn convergence_writes_table_and_fields() {
    let dir = tempfile::tempdir().unwrap();
    let o = asgs(&["convergence", "--preset", "weak_const_re100", "--ndiv", "4,8"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(dir.path().join("re100_table.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("Re=100,1/4,4,"));
    assert!(lines[2].starts_with("Re=100,1/8,8,"));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("e_u") && stdout.contains("1/8"));
    for n in [4, 8] {
        let text = std::fs::read_to_string(dir.path().join(format!("re100_n{n}.vtk"))).unwrap();
        let d = parse_vtk(&text).unwrap();
        assert_eq!(d.points.len(), (n + 1) * (n + 1));
        assert_eq!(d.cells.len(), 2 * n * n);
    }
}

#[test]
fn output_dir_flag_beats_environment() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let o = asgs(
        &[
            "convergence",
            "--preset",
            "strong_linear_c",
            "--ndiv",
            "3",
            "--output-dir",
            flag_dir.path().to_str().unwrap(),
        ],
        env_dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_dir.path().join("strong_linear_c_table.csv").exists());
    assert!(!env_dir.path().join("strong_linear_c_table.csv").exists());
}

#[test]
fn cavity_outputs_per_reynolds_number() {
    let dir = tempfile::tempdir().unwrap();
    let o = asgs(&["cavity", "--re", "20,50", "--grid", "8"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for re in [20, 50] {
        for f in [
            format!("psi_re{re}.csv"),
            format!("u1_vertical_re{re}.csv"),
            format!("u2_horizontal_re{re}.csv"),
            format!("cavity_re{re}.vtk"),
        ] {
            assert!(dir.path().join(&f).exists(), "{f}");
        }
    }
    let summary = std::fs::read_to_string(dir.path().join("cavity_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.lines().skip(1).all(|l| l.split(',').nth(1) == Some("ok")));
}

#[test]
fn solve_with_config_file_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        r#"
command = "solve"
name = "custom"

[scenario]
kind = "strong_exp_c"

[mesh]
n_div = [4]

[time]
dt = { rule = "fixed", dt = 0.25 }
t_final = 0.5

[output]
retain_trajectory = true
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = asgs(&["solve", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("custom_table.csv").exists());
    assert!(out.join("custom_n4_step00001.vtk").exists());
    assert!(out.join("custom_n4_step00002.vtk").exists());
    assert!(out.join("custom_n4.vtk").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // configuration problems
    for args in [
        &["convergence", "--preset", "missing"][..],
        &["convergence", "--preset", "weak_const_re100", "--ndiv", "0"],
        &["cavity", "--re", "-5"],
        &["solve", "--config", "/nonexistent/run.toml"],
        &["frobnicate"],
    ] {
        assert_eq!(asgs(args, dir.path()).status.code(), Some(2), "{args:?}");
    }
    // a sweep whose every level fails numerically
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "command = \"convergence\"\n[scenario]\nkind = \"weak_const\"\nre = 100.0\n[mesh]\nn_div = [4]\n\
         [solver]\nkind = \"gmres\"\nrestart = 1\nmax_iter = 1\n",
    )
    .unwrap();
    let o = asgs(&["convergence", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let table = std::fs::read_to_string(dir.path().join("re100_table.csv")).unwrap();
    assert!(table.contains("failed: "));
    // help is not an error
    assert_eq!(asgs(&["--help"], dir.path()).status.code(), Some(0));
}
