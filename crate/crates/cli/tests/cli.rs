//! End-to-end behaviour of the `hodograph` binary and the command library.

use hodograph_cli::commands::{run, Command, Status};
use hodograph_cli::config::{DataConfig, ProblemConfig, TaskConfig};
use hodograph_cli::{Output, RunConfig, Table};
use hodograph_core::oracle::pde_residual;
use hodograph_core::{solve_u, ForceSpec, HodographProblem, InitialData, Vect};
use proptest::prelude::*;
use std::path::{Path, PathBuf};
use std::process::Command as Proc;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> RunConfig {
    RunConfig::load(&configs_dir().join(name)).unwrap()
}

fn table(cmd: Command, cfg: &RunConfig) -> Table {
    match run(cmd, cfg).unwrap().output {
        Output::Csv(t) => t,
        Output::Text(_) => panic!("expected a table"),
    }
}

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_hodograph"))
}

fn f(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn shipped_configs_round_trip() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let c = RunConfig::load(&path).unwrap();
            assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c, "{}", path.display());
            n += 1;
        }
    }
    assert!(n >= 8);
}

fn arb_data() -> impl Strategy<Value = DataConfig> {
    let leaf = prop_oneof![
        (0.1f64..3.0, 0.1f64..3.0).prop_map(|(mu, kappa)| DataConfig::Tanh1d { mu, kappa }),
        (0.1f64..3.0).prop_map(|c| DataConfig::Constant { c: vec![c] }),
    ];
    prop_oneof![
        leaf.clone(),
        proptest::collection::vec(leaf, 1..4).prop_map(|parts| DataConfig::Blocks { parts }),
    ]
}

proptest! {
    #[test]
    fn generated_configs_round_trip(data in arb_data(), a in -3.0f64..3.0, seed in any::<u64>(), samples in 1usize..500) {
        let n = match &data {
            DataConfig::Blocks { parts } => parts.len(),
            _ => 1,
        };
        let cfg = RunConfig {
            problem: ProblemConfig::Diag { a: vec![a; n], g: Some(vec![0.5; n]) },
            data,
            task: TaskConfig::Compare(hodograph_cli::config::CompareTask {
                samples,
                t_max: 1.0,
                tol: 1e-9,
                seed,
                grid: 11,
                x_min: None,
                x_max: None,
            }),
        };
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml(), text);
    }
}

#[test]
fn output_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("compare_tanh.toml");
    let mut outputs = Vec::new();
    for threads in ["1", "4", "4"] {
        let out = dir.path().join(format!("out{}.csv", outputs.len()));
        let st = bin()
            .args(["compare", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--threads", threads, "--seed", "11"])
            .status()
            .unwrap();
        assert_eq!(st.code(), Some(0));
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(text.starts_with("# hodograph compare\n# config-sha256 "));
    // the seed override is part of the hashed config
    let other = dir.path().join("other.csv");
    bin().args(["compare", "--config"]).arg(&cfg).arg("--out").arg(&other).args(["--seed", "12"]).status().unwrap();
    let other = std::fs::read_to_string(other).unwrap();
    assert_ne!(text.lines().nth(1), other.lines().nth(1));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str], cfg: &Path| bin().args(args).arg("--config").arg(cfg).output().unwrap().status.code();

    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&["solve"], &missing), Some(1));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[problem]\npreset = \"scalar\"\na = 1.0\n").unwrap();
    assert_eq!(code(&["solve"], &bad), Some(1));

    // command and task kind disagree
    assert_eq!(code(&["solve"], &configs_dir().join("tanh_blowup.toml")), Some(1));

    // periodic verification requires g = 0: a solver-side failure
    let text = std::fs::read_to_string(configs_dir().join("coriolis_period.toml")).unwrap();
    let with_g = dir.path().join("with_g.toml");
    std::fs::write(&with_g, text.replace("omega = 1.0", "omega = 1.0\ng = [0.1, 0.0]")).unwrap();
    assert_eq!(code(&["period"], &with_g), Some(2));

    let text = std::fs::read_to_string(configs_dir().join("compare_tanh.toml")).unwrap();
    let strict = dir.path().join("strict.toml");
    std::fs::write(&strict, text.replace("tol = 1e-9", "tol = 1e-300")).unwrap();
    assert_eq!(code(&["compare"], &strict), Some(3));

    assert_eq!(code(&["blowup"], &configs_dir().join("tanh_blowup.toml")), Some(0));
}

fn solve_rows(t: &Table, time: f64) -> Vec<(f64, Option<f64>, Status)> {
    let (ct, cx, cu, cs) = (t.column("t").unwrap(), t.column("x1").unwrap(), t.column("u1").unwrap(), t.column("status").unwrap());
    t.rows
        .iter()
        .filter(|r| f(&r[ct]) == time)
        .map(|r| (f(&r[cx]), (!r[cu].is_empty()).then(|| f(&r[cu])), Status::parse(&r[cs]).unwrap()))
        .collect()
}

#[test]
fn solve_rows_at_time_zero_are_initial_data() {
    let t = table(Command::Solve, &load("tanh_profile_g1.toml"));
    let data = InitialData::tanh_1d(1.0, 1.0).unwrap();
    for (x, u, st) in solve_rows(&t, 0.0) {
        assert_eq!(st, Status::Ok);
        let want = data.u0_eval(&Vect::from_element(1, x)).unwrap()[0];
        assert!((u.unwrap() - want).abs() <= 1e-14);
    }
}

#[test]
fn solved_rows_satisfy_the_pde() {
    let cfg = load("tanh_profile_g1.toml");
    let t = table(Command::Solve, &cfg);
    let p = HodographProblem::new(ForceSpec::scalar(0.0, 1.0).unwrap(), InitialData::tanh_1d(1.0, 1.0).unwrap()).unwrap();
    let field = |t: f64, x: &Vect| solve_u(&p, t, x, None).map(|s| s.sample.u);
    let ok: Vec<(f64, f64)> = [0.25, 0.5, 0.75]
        .iter()
        .flat_map(|&time| solve_rows(&t, time).into_iter().filter(|r| r.2 == Status::Ok).map(move |r| (time, r.0)))
        .collect();
    // 20 rows spread over the table
    for k in 0..20 {
        let (time, x) = ok[k * ok.len() / 20];
        let r = pde_residual(&field, p.spec(), time, &Vect::from_element(1, x), 1e-4).unwrap();
        assert!(r <= 1e-5, "t={time} x={x}: {r:e}");
    }
}

#[test]
fn rows_after_the_catastrophe_are_marked() {
    let t = table(Command::Solve, &load("tanh_profile_g1.toml"));
    let late = solve_rows(&t, 1.25);
    assert!(late.iter().any(|r| matches!(r.2, Status::Blowup | Status::PostBlowup)));
    for (_, u, st) in late {
        assert_eq!(u.is_some(), matches!(st, Status::Ok | Status::NearBlowup));
    }
}

#[test]
fn compare_gate_and_post_blowup_policy() {
    let t = table(Command::Compare, &load("compare_tanh.toml"));
    let (ct, ce, cs) = (t.column("t").unwrap(), t.column("error").unwrap(), t.column("status").unwrap());
    let mut post = 0;
    for r in &t.rows {
        match Status::parse(&r[cs]).unwrap() {
            Status::Ok | Status::NearBlowup => assert!(f(&r[ce]) <= 1e-9),
            Status::PostBlowup => {
                assert!(f(&r[ct]) >= 1.0 - 1e-8);
                post += 1;
            }
            s => panic!("unexpected {s:?}"),
        }
    }
    assert!(post > 0);
}

#[test]
fn coriolis3d_compare_passes_gate() {
    let out = run(Command::Coriolis3d, &load("coriolis3d_compare.toml")).unwrap();
    assert!(out.gate.is_none(), "{:?}", out.gate);
}

#[test]
fn period_reports() {
    let text = |name: &str| match run(Command::Period, &load(name)).unwrap().output {
        Output::Text(s) => s,
        Output::Csv(_) => panic!(),
    };
    let r = text("periodic2d.toml");
    assert!(r.contains("periodic: true"));
    assert!(r.contains(&format!("period: {}", 2.0 * std::f64::consts::PI)));
    let r = text("coriolis_period.toml");
    assert!(r.contains("verify: passed"), "{r}");
    let r = text("coriolis3d_period.toml");
    assert!(r.contains("reason: zero eigenvalue") && r.contains("witness: t="), "{r}");

    let mut cfg = load("periodic2d.toml");
    cfg.problem = ProblemConfig::Diag { a: vec![1.0, -1.0], g: None };
    let Output::Text(r) = run(Command::Period, &cfg).unwrap().output else { panic!() };
    assert!(r.contains("reason: real eigenvalues"), "{r}");
    cfg.problem = ProblemConfig::Coriolis2d { omega: 2.0, g: None };
    let Output::Text(r) = run(Command::Period, &cfg).unwrap().output else { panic!() };
    assert!(r.contains(&format!("period: {}", std::f64::consts::PI)), "{r}");
}

#[test]
fn blowup_summaries() {
    let summary = |t: &Table, key: &str| -> String {
        t.comments.iter().find_map(|c| c.strip_prefix(&format!("{key} ")).map(str::to_string)).unwrap()
    };
    let t = table(Command::Blowup, &load("tanh_certified.toml"));
    assert_eq!(summary(&t, "t_star"), "none");
    assert!(summary(&t, "certificate").starts_with("CERTIFIED"));
    assert!(t.rows.iter().all(|r| r.last().unwrap().starts_with("ABSENT")));

    let t = table(Command::Blowup, &load("tanh2d_blowup.toml"));
    assert!((f(&summary(&t, "t_star")) - 1.0 / 1.5).abs() < 1e-9);
    let sheets: std::collections::BTreeSet<&str> = t.rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(sheets.len(), 2);
}
