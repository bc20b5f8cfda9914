//! Configuration parsing, output layout and exit status.

use std::path::{Path, PathBuf};
use std::process::Command;

use memwave::*;
use memwave_core::analysis::fig1_config;
use proptest::prelude::*;
use serde_json::Value;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn shipped() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    v.sort();
    v
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn memwave(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_memwave"))
        .args(args)
        .env("MEMWAVE_OUT", out)
        .output()
        .unwrap()
}

#[test]
fn empty_config_gives_figure_defaults() {
    let cfg = parse_config_str("{}").unwrap();
    assert_eq!(cfg, RunConfig::default());
    let sim = cfg.simulation().unwrap();
    assert_eq!(sim, fig1_config(3.0, 2.0).unwrap());
    assert_eq!(sim.grid.len(), 629);
    assert_eq!(sim.time.n_t(), 731);
    assert_eq!(
        (sim.packet.x0, sim.packet.sigma_g, sim.packet.lambda),
        (-2.0, 0.05, 10.0)
    );
    assert_eq!(sim.model.t0, 2.0);
}

#[test]
fn ratio_two_is_rejected_as_cfl() {
    let err = parse_config_str(r#"{"time": {"dt": 0.02}}"#).unwrap_err();
    assert!(err.to_string().contains("CFL"), "{err}");
}

#[test]
fn negative_packet_width_is_rejected() {
    let err = parse_config_str(r#"{"packet": {"sigma_g": -0.05}}"#).unwrap_err();
    assert!(err.to_string().contains("sigma_g"), "{err}");
}

#[test]
fn unknown_keys_are_rejected_with_their_path() {
    match parse_config_str(r#"{"packet": {"x_0": -2.0}}"#) {
        Err(CliError::Schema { path, .. }) => assert_eq!(path, "packet.x_0"),
        other => panic!("{other:?}"),
    }
    match parse_config_str(r#"{"validation": {"campaigns": ["energy", "nonsense"]}}"#) {
        Err(CliError::Schema { path, .. }) => assert!(path.starts_with("validation.campaigns"), "{path}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn invalid_models_are_rejected() {
    for text in [
        r#"{"model": {"r": 0.2}}"#,
        r#"{"model": {"gamma": -1.0}}"#,
        r#"{"frequency": {"r1": 0.4}}"#,
        r#"{"frequency": {"sigmas": []}}"#,
        r#"{"stride": 0}"#,
        r#"{"frame_pairs": [[-1.0, 0.0]]}"#,
        r#"{"validation": {"convergence_levels": 2}}"#,
        r#"{"name": "a/b"}"#,
    ] {
        assert!(parse_config_str(text).is_err(), "{text}");
    }
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let files = shipped();
    assert!(files.len() >= 3);
    for path in files {
        let cfg = parse_config(&path).unwrap();
        assert_eq!(parse_config_str(&cfg.to_json()).unwrap(), cfg, "{}", path.display());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialized_configs_reparse_identically(
        dx in 0.002f64..0.02,
        ratio in 0.1f64..0.5,
        x0 in -2.5f64..-1.0,
        sigma_g in 0.01f64..0.1,
        lambda in 1.0f64..30.0,
        gamma in 0.0f64..10.0,
        alpha_p in 0.0f64..20.0,
        v in prop::collection::vec((-500.0f64..500.0, -50.0f64..50.0), 1..4),
        sigma in 0.1f64..3.0,
        seed in any::<u64>(),
    ) {
        let mut cfg = RunConfig::default();
        cfg.grid.dx = dx;
        cfg.time.dt = ratio * dx;
        cfg.packet.x0 = x0;
        cfg.packet.sigma_g = sigma_g;
        cfg.packet.lambda = lambda;
        cfg.model.gamma = gamma;
        cfg.model.alpha_p = alpha_p;
        let n = v.len();
        cfg.model.breakpoints = (0..=n).map(|k| -0.5 + k as f64 / n as f64).collect();
        cfg.model.values = v.iter().map(|(re, im)| num_complex::Complex64::new(*re, *im)).collect();
        cfg.frequency.sigmas = vec![sigma];
        cfg.seed = seed;
        prop_assume!(cfg.validate().is_ok());
        prop_assert_eq!(parse_config_str(&cfg.to_json()).unwrap(), cfg);
    }
}

#[test]
fn frames_have_one_row_per_node_and_one_file_per_stored_level() {
    let out = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        stride: 50,
        ..RunConfig::default()
    };
    let outcome = cmd_frames(&cfg, out.path()).unwrap();
    assert!(outcome.pass);
    let n_t = cfg.simulation().unwrap().time.n_t();
    for label in ["fig1_gamma0_alpha0", "fig1_gamma3_alpha2", "fig1_gamma4_alpha10"] {
        let dir = out.path().join(label).join("frames");
        let mut files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        assert_eq!(files.len(), n_t.div_ceil(50), "{label}");
        assert!(files[0].ends_with("frame_000000.csv"));
        let text = std::fs::read_to_string(&files[files.len() - 1]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,re_u,im_u,abs_u,V_norm"));
        let rows: Vec<Vec<f64>> = lines
            .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 629);
        assert!(rows.iter().all(|r| r.len() == 5 && r.iter().all(|x| x.is_finite())));
        // |u| column agrees with the components; V_norm peaks at one.
        assert!(rows
            .iter()
            .all(|r| (r[3] - r[1].hypot(r[2])).abs() <= 1e-12 * (1.0 + r[3])));
        let vmax = rows.iter().map(|r| r[4]).fold(f64::MIN, f64::max);
        assert_eq!(vmax, 1.0);
        let report = read_json(&out.path().join(label).join("reports/frames.json"));
        assert_eq!(report["frames"], n_t.div_ceil(50));
    }
    let index = read_json(&out.path().join("fig1/reports/frames.json"));
    assert_eq!(index.as_array().unwrap().len(), 3);
}

#[test]
fn cone_violation_exits_nonzero_without_frames() {
    let out = tempfile::tempdir().unwrap();
    let config = out.path().join("strict.json");
    std::fs::write(&config, r#"{"name": "strict", "boundary": "strict"}"#).unwrap();
    let o = memwave(&["simulate", "--config", config.to_str().unwrap()], out.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("cone violation"));
    assert!(!out.path().join("strict").exists());
}

#[test]
fn validate_on_defaults_passes_and_writes_reports() {
    let out = tempfile::tempdir().unwrap();
    let o = memwave(&["validate", "--threads", "4"], out.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let reports = out.path().join("fig1/reports");
    let summary = read_json(&reports.join("validate.json"));
    assert_eq!(summary["pass"], true);
    for c in summary["campaigns"].as_array().unwrap() {
        let name = c["campaign"].as_str().unwrap();
        assert_eq!(c["pass"], true, "{name}");
        assert!(reports.join(format!("{name}.json")).exists(), "{name}");
    }
}

#[test]
fn failing_gate_gives_nonzero_exit() {
    let out = tempfile::tempdir().unwrap();
    let config = out.path().join("tight.json");
    std::fs::write(
        &config,
        r#"{"name": "tight", "validation": {"campaigns": ["fixed_point", "free_transport"], "free_transport_tol": 1e-9}}"#,
    )
    .unwrap();
    let o = memwave(&["validate", "--config", config.to_str().unwrap()], out.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("free_transport"));
    let summary = read_json(&out.path().join("tight/reports/validate.json"));
    assert_eq!(summary["pass"], false);
    assert_eq!(summary["campaigns"][0]["pass"], true);
    assert_eq!(summary["campaigns"][1]["pass"], false);
}

#[test]
fn spectra_are_written_as_complex_pairs() {
    let out = tempfile::tempdir().unwrap();
    let o = memwave(
        &["smatrix", "--sigma-line", "0.75", "--out", out.path().to_str().unwrap()],
        Path::new("/nonexistent"),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let spectra = out.path().join("fig1/spectra");
    for name in ["incident", "t_of_f", "rplus_of_f"] {
        let s = read_json(&spectra.join(format!("{name}_sigma0.75.json")));
        assert_eq!(s["sigma"], 0.75);
        let omega = s["omega"].as_array().unwrap();
        let values = s["values"].as_array().unwrap();
        assert_eq!(omega.len(), 256);
        assert_eq!(values.len(), 256);
        assert!(values.iter().all(|v| v.as_array().unwrap().len() == 2));
    }
    assert!(!spectra.join("t_of_f_sigma0.5.json").exists());
}

#[test]
fn short_window_extraction_is_flagged() {
    let out = tempfile::tempdir().unwrap();
    let dir = RunDir::new(out.path(), "fig1");
    let outcome = cmd_extract(&RunConfig::default(), &dir).unwrap();
    assert!(!outcome.pass);
    assert_eq!(outcome.failures, vec!["window".to_string()]);
    let report = read_json(&dir.reports().join("extract.json"));
    assert_eq!(report["window_complete"], false);
    assert_eq!(report["support"]["pass"], true);
    assert!(dir.reports().join("scattering_record.json").exists());
}

#[test]
fn convergence_writes_both_studies() {
    let out = tempfile::tempdir().unwrap();
    let dir = RunDir::new(out.path(), "fig1");
    let mut cfg = RunConfig::default();
    cfg.validation.convergence_levels = 3;
    assert!(cmd_convergence(&cfg, &dir).unwrap().pass);
    for name in ["joint", "time_only"] {
        let r = read_json(&dir.reports().join(format!("convergence_{name}.json")));
        assert_eq!(r["errors"].as_array().unwrap().len(), 2);
        assert_eq!(r["refinement"], name);
    }
}
