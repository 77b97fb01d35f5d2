use std::path::Path;
use std::process::{Command as Proc, Output};

use canard_lab::{Preset, State};
use canard_lab_cli::{plan, CliError, Command, Region};

const BIN: &str = env!("CARGO_BIN_EXE_canard-lab");

fn run(args: &[&str]) -> Output {
    Proc::new(BIN).args(args).env("CANARD_LAB_THREADS", "2").output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn plan_resolves_presets_and_defaults() {
    let pl = plan(["simulate", "--preset", "fig6", "--lambda", "0.001"]).unwrap();
    let spec = pl.spec.as_ref().unwrap();
    assert_eq!(spec.epsilon(), 0.2);
    assert_eq!(spec.lambda(), 0.001);
    assert_eq!(pl.common.tol, 1e-9);
    assert_eq!(pl.common.t_max, 500.0);
    match pl.command {
        Command::Simulate { init, .. } => {
            assert_eq!(init, State::new(0.001, spec.f_value(0.001) - 0.1));
        }
        other => panic!("{other:?}"),
    }
    let fig4 = canard_lab::SystemSpec::preset(Preset::Fig4, 0.2, 0.0);
    assert_eq!(plan(["classify", "--preset", "fig4"]).unwrap().spec.unwrap().h(), fig4.h());

    let pl = plan(["certify", "--preset", "fig4", "--lambda", "0.5", "--region", "W"]).unwrap();
    assert_eq!(
        pl.command,
        Command::Certify {
            region: Region::W,
            x_hat: -3.0,
            m1: -1.0,
            m4: None,
            samples: 200,
            out: None
        }
    );
    assert!(pl.spec.is_some());
    assert!(plan(["stommel", "--K", "1.5", "--lambda", "1"]).unwrap().spec.is_none());
}

#[test]
fn plan_rejects_bad_input() {
    let cases: [&[&str]; 8] = [
        &["classify"],
        &["classify", "--preset", "fig9"],
        &["classify", "--preset", "fig4", "--eps", "-1"],
        &["classify", "--preset", "fig4", "--tol", "1e-20"],
        &["classify", "--preset", "fig4", "--tol", "0.1"],
        &["sweep", "--preset", "fig4", "--lambda-min", "1", "--lambda-max", "0"],
        &["stommel", "--K", "0.5", "--lambda", "1"],
        &["certify", "--preset", "fig4", "--region", "X"],
    ];
    for args in cases {
        let e = plan(args.iter().copied()).unwrap_err();
        assert_eq!(e.exit_code(), 1, "{args:?}: {e}");
    }
    assert!(matches!(plan(["--help"]), Err(CliError::Info(_))));
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["simulate"]), 1);
    assert_eq!(code(&["orbit", "--preset", "fig6", "--lambda", "-2"]), 2);
    assert_eq!(code(&["certify", "--preset", "fig4", "--lambda", "-0.1", "--region", "W"]), 1);
    assert_eq!(code(&["certify", "--preset", "fig4", "--lambda", "0.5", "--region", "V"]), 1);
    // a nearly flat l4 lets the flow leave through the top right corner
    let out = run(&["certify", "--preset", "fig4", "--lambda", "0.5", "--region", "W", "--m4", "-0.001", "--samples", "50"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&["certify", "--preset", "fig4", "--lambda", "0.5", "--region", "W", "--samples", "50"]), 0);
}

#[test]
fn artifacts_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let sim = dir.path().join(format!("sim{k}.csv"));
        let ev = dir.path().join(format!("ev{k}.json"));
        let cyc = dir.path().join(format!("cyc{k}.csv"));
        let st = dir.path().join(format!("st{k}.csv"));
        let a = run(&["simulate", "--preset", "fig6", "--lambda", "0.001", "--t-max", "80", "--out", p(&sim), "--events", p(&ev)]);
        let b = run(&["orbit", "--preset", "fig4", "--lambda", "0.0142", "--out", p(&cyc)]);
        let c = run(&["stommel", "--K", "1.5", "--lambda", "1.02", "--t-max", "100", "--out", p(&st)]);
        for o in [&a, &b, &c] {
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        }
        let files: Vec<Vec<u8>> = [&sim, &ev, &cyc, &st].iter().map(|f| std::fs::read(f).unwrap()).collect();
        outputs.push((a.stdout, b.stdout, c.stdout, files));
    }
    assert_eq!(outputs[0], outputs[1]);
    let csv = String::from_utf8(outputs[0].3[0].clone()).unwrap();
    assert!(csv.starts_with("t,x,y\n"));
    let stommel = String::from_utf8(outputs[0].3[3].clone()).unwrap();
    assert!(stommel.starts_with("t,y,mu\n"));
    let events: serde_json::Value = serde_json::from_slice(&outputs[0].3[1]).unwrap();
    assert!(events.as_array().unwrap().len() >= 2);
}

#[test]
fn saved_config_reproduces_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sys.json");
    for sub in ["classify", "orbit"] {
        let direct = run(&[sub, "--preset", "fig4", "--eps", "0.2", "--lambda", "0.0142", "--save-config", p(&cfg)]);
        assert!(direct.status.success());
        let again = run(&[sub, "--config", p(&cfg)]);
        assert!(again.status.success(), "{}", String::from_utf8_lossy(&again.stderr));
        assert_eq!(direct.stdout, again.stdout, "{sub}");
    }
    // overrides apply on top of a loaded file
    let moved = run(&["classify", "--config", p(&cfg), "--lambda", "0.5"]);
    let fresh = run(&["classify", "--preset", "fig4", "--lambda", "0.5"]);
    assert_eq!(moved.stdout, fresh.stdout);
}

#[test]
fn sweep_writes_rows_and_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let rows = dir.path().join("rows.csv");
    let iv = dir.path().join("iv.json");
    let o = run(&[
        "sweep", "--preset", "fig4", "--lambda", "0.014", "--lambda-min", "0.012", "--lambda-max", "0.016",
        "--samples", "20", "--out", p(&rows), "--intervals", p(&iv),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&rows).unwrap().lines().count(), 21);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&iv).unwrap()).unwrap();
    let ivs = v["explosion_intervals"].as_array().unwrap();
    assert_eq!(ivs.len(), 1);
    let lo = ivs[0]["lambda_lo"].as_f64().unwrap();
    assert!(lo > 0.0141 && lo < 0.0143);
}
