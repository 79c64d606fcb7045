use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use uavnoma_cli::config::{self, Layers};
use uavnoma_cli::output::{compare_pair, Manifest};
use uavnoma_cli::{execute, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK};

fn uavnoma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uavnoma"))
        .args(args)
        .env_remove("UAVNOMA_OUT")
        .output()
        .unwrap()
}

fn small_run(dir: &Path, experiment: &str, extra: &[&str]) -> PathBuf {
    let mut overrides = vec!["pairs=1", "antennas=2"];
    overrides.extend_from_slice(extra);
    let layers = Layers {
        experiment: Some(experiment.into()),
        seeds: Some(3),
        overrides: overrides.into_iter().map(String::from).collect(),
    };
    let cfg = config::load(None, &layers).unwrap();
    let summary = execute(&cfg, dir, 2).unwrap();
    assert_eq!(summary.exit_code, EXIT_OK);
    summary.manifest_path
}

/// CSV text with the wall_ms column blanked.
fn without_timing(csv: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "wall_ms").unwrap();
    let mut out = header.join(",");
    for line in lines {
        let mut cells: Vec<&str> = line.split(',').collect();
        cells[col] = "";
        out.push('\n');
        out.push_str(&cells.join(","));
    }
    out
}

#[test]
fn csv_follows_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let m = small_run(dir.path(), "fig6_user_power", &["values=[0.01, 0.05]"]);
    let manifest = Manifest::read(&m).unwrap();
    let text = std::fs::read_to_string(dir.path().join(&manifest.csv[0])).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "P_user,scheme,seed,EE,rounds,wall_ms,error");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 * 3 * 2);
    assert_eq!(manifest.rows, rows.len());
    let keys: Vec<(f64, u64)> = rows
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[2].parse().unwrap()))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    assert_eq!(keys, sorted);
    for r in &rows {
        assert_eq!(r.len(), 7);
        let ee: f64 = r[3].parse().unwrap();
        assert!(ee > 0.0);
        assert!(r[6].is_empty());
    }
    assert_eq!(manifest.seeds, vec![0, 1, 2]);
    assert_eq!(manifest.config_sha256.len(), 64);
    assert!(manifest.version.starts_with('v'));
}

#[test]
fn reruns_and_replays_are_identical_apart_from_timing() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = small_run(a.path(), "fig4_beacon_power", &["values=[5.0, 20.0]"]);
    let mb = small_run(b.path(), "fig4_beacon_power", &["values=[5.0, 20.0]"]);
    let csv = |d: &Path| std::fs::read_to_string(d.join("fig4_beacon_power.csv")).unwrap();
    assert_eq!(without_timing(&csv(a.path())), without_timing(&csv(b.path())));
    assert_eq!(std::fs::read(&ma).unwrap(), std::fs::read(&mb).unwrap());

    let out = a.path().join("again");
    let status = uavnoma(&[
        "replay",
        ma.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--jobs",
        "3",
    ]);
    assert_eq!(
        status.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    assert_eq!(without_timing(&csv(&out)), without_timing(&csv(a.path())));
    assert_eq!(
        std::fs::read(out.join("fig4_beacon_power.manifest.json")).unwrap(),
        std::fs::read(&ma).unwrap()
    );
}

#[test]
fn unknown_keys_exit_with_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "experiment = 'fig4_beacon_power'\nseedz = 3\n[params]\nbeam_width = 2\n",
    )
    .unwrap();
    let out = uavnoma(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("seedz") && err.contains("params.beam_width"), "{err}");
    assert!(!dir.path().join("fig4_beacon_power.csv").exists());
}

#[test]
fn all_infeasible_runs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = uavnoma(&[
        "run",
        "--experiment",
        "fig6_user_power",
        "--seeds",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
        "--override",
        "values=[0.01]",
        "--override",
        "r_min=40",
    ]);
    assert_eq!(out.status.code(), Some(EXIT_INFEASIBLE));
    let csv = std::fs::read_to_string(dir.path().join("fig6_user_power.csv")).unwrap();
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| l.contains(",,") && l.contains("infeasible")));
}

#[test]
fn partial_failures_become_error_rows() {
    let dir = tempfile::tempdir().unwrap();
    let layers = Layers {
        experiment: Some("fig3_users".into()),
        seeds: Some(2),
        overrides: vec![
            "values=[3.0, 4.0]".into(),
            "antennas=4".into(),
            "schemes=['noma_ld']".into(),
        ],
    };
    let cfg = config::load(None, &layers).unwrap();
    let summary = execute(&cfg, dir.path(), 1).unwrap();
    assert_eq!(summary.exit_code, EXIT_OK);
    assert_eq!(summary.manifest.warnings, 2);
    let csv = std::fs::read_to_string(dir.path().join("fig3_users.csv")).unwrap();
    let odd: Vec<&str> = csv.lines().filter(|l| l.starts_with("3,")).collect();
    assert_eq!(odd.len(), 2);
    assert!(odd.iter().all(|l| l.contains("even number")));
}

#[test]
fn env_var_overrides_the_output_flag() {
    let dir = tempfile::tempdir().unwrap();
    let flag = dir.path().join("flag");
    let env = dir.path().join("env");
    let out = Command::new(env!("CARGO_BIN_EXE_uavnoma"))
        .args([
            "run",
            "--experiment",
            "fig7_antennas",
            "--seeds",
            "1",
            "--override",
            "values=[2]",
        ])
        .args(["--out", flag.to_str().unwrap()])
        .env("UAVNOMA_OUT", &env)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert!(env.join("fig7_antennas.csv").exists());
    assert!(!flag.exists());
}

#[test]
fn identical_manifests_tie_at_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let m = small_run(dir.path(), "fig6_user_power", &["values=[0.01, 0.05]"]);
    let manifest = Manifest::read(&m).unwrap();
    let c = compare_pair((&m, &manifest), (&m, &manifest), None, None).unwrap();
    assert_eq!(c.rows.len(), 2);
    for r in &c.rows {
        assert_eq!(r.win_rate, 0.5);
        assert_eq!(r.mean_a, r.mean_b);
        assert_eq!(r.pairs, 3);
    }

    // scheme A against scheme B on paired seeds
    let c = compare_pair((&m, &manifest), (&m, &manifest), Some("noma_ld"), Some("oma_ld")).unwrap();
    assert_eq!(c.scheme_b, "oma_ld");
    assert!(c.rows.iter().all(|r| (0.0..=1.0).contains(&r.win_rate)));
    let out = uavnoma(&[
        "compare",
        m.to_str().unwrap(),
        m.to_str().unwrap(),
        "--scheme-b",
        "oma_ld",
    ]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        text.contains("P_user,scheme_a,scheme_b,pairs,mean_EE_a,mean_EE_b,win_rate"),
        "{text}"
    );
}

#[test]
fn disjoint_axes_are_an_error() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = small_run(a.path(), "fig6_user_power", &["values=[0.01]"]);
    let mb = small_run(b.path(), "fig4_beacon_power", &["values=[5.0]"]);
    let (xa, xb) = (Manifest::read(&ma).unwrap(), Manifest::read(&mb).unwrap());
    assert!(compare_pair((&ma, &xa), (&mb, &xb), None, None).is_err());

    // same axis, no common point
    let c = tempfile::tempdir().unwrap();
    let mc = small_run(c.path(), "fig6_user_power", &["values=[0.05]"]);
    let xc = Manifest::read(&mc).unwrap();
    assert!(compare_pair((&ma, &xa), (&mc, &xc), None, None).is_err());
    let out = uavnoma(&["compare", ma.to_str().unwrap(), mc.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn every_experiment_runs_at_toy_scale() {
    let dir = tempfile::tempdir().unwrap();
    for (name, extra) in [
        ("fig8_convergence", vec![]),
        ("fig10_tau", vec!["values=[0.8, 0.95]"]),
        ("fig11_placement_heatmap", vec!["heatmap_points=3"]),
        (
            "fig12_es_gap",
            vec![
                "values=[1]",
                "es_grid.alpha=5",
                "es_grid.power=5",
                "es_grid.tau=3",
                "es_grid.xy=3",
            ],
        ),
        ("fig5_uav_power", vec!["values=[5.0]"]),
        ("fig9_altitude", vec!["values=[20.0]"]),
        ("fig3_users", vec!["values=[2]", "schemes=['noma_ld','no_eh']"]),
    ] {
        let m = small_run(&dir.path().join(name), name, &extra);
        let manifest = Manifest::read(&m).unwrap();
        assert!(manifest.rows > 0, "{name}");
        assert!(manifest.warnings < manifest.rows, "{name}");
    }
    let heat = std::fs::read_to_string(dir.path().join("fig11_placement_heatmap/fig11_placement_heatmap.csv")).unwrap();
    assert!(heat.starts_with("x0,y0,scheme"));
    assert_eq!(heat.lines().count(), 1 + 3 * 9);
}
