use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use gittins_renewal::index_levy::LevyIndexModel;
use gittins_renewal::{RewardSpec, SnlpParams};

fn gittins(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gittins"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn config(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect();
    p.to_str().unwrap().to_string()
}

fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect()
}

#[test]
fn index_prints_closed_form() {
    let o = gittins(&[
        "index", "--model", "snlp", "--params", "1,1,6,2", "--q", "0.5", "--lambda", "0.1", "--reward", "identity",
        "--x", "0",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let m = LevyIndexModel::new(SnlpParams::new(1.0, 1.0, 6.0, 2.0).unwrap(), 0.5, 0.1, RewardSpec::Identity).unwrap();
    let expect = (1.0 - m.atom_p0()) / m.phi_q();
    let got: f64 = rows(&stdout(&o))[0][1].parse().unwrap();
    assert!((got - expect).abs() < 1e-5 * expect);
}

#[test]
fn index_at_tiny_lambda_is_the_reward() {
    for model in [["snlp", "1,1,6,2"], ["ou", "1"], ["rsnlp", "-10,1/2,1,6,2"]] {
        let o = gittins(&[
            "index", "--model", model[0], "--params", model[1], "--lambda", "1e-9", "--reward", "sigmoid", "--x", "0,1",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let r = rows(&stdout(&o));
        assert_eq!(r[0][1], "0.5");
        let s1: f64 = r[1][1].parse().unwrap();
        assert!((s1 - 1.0 / (1.0 + (-1f64).exp())).abs() < 1e-6);
        let has_limit = model[0] != "ou";
        assert_eq!(r[0][2] != "-", has_limit);
    }
}

#[test]
fn validation_failures_exit_2_without_rows() {
    let cases: [&[&str]; 6] = [
        &["index", "--model", "levy", "--params", "1", "--x", "0"],
        &["index", "--model", "bm", "--params", "1,2", "--x", "0"],
        &["index", "--model", "bm", "--params", "-1", "--x", "0"],
        &["index", "--model", "bm", "--params", "1", "--reward", "cubic", "--x", "0"],
        &["index", "--model", "rbm", "--params", "1,1", "--x", "0"],
        &["index", "--model", "bm", "--params", "1"],
    ];
    for args in cases {
        let o = gittins(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn simulate_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "1", "3"].iter().enumerate() {
        let path = dir.path().join(format!("run{i}.csv"));
        let o = gittins(&[
            "simulate",
            &config("inhomogeneous.json"),
            "--paths",
            "1",
            "--seed",
            "7",
            "--threads",
            threads,
            "-o",
            path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "setting,model,reward,strategy,mean,sd,ci_lo,ci_hi,n_paths,seed");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&first[..4], &["inhomogeneous", "mixed", "mixed", "GI"]);
    assert_eq!(first[5], "NaN");
    assert_eq!(&first[8..], &["1", "7"]);
}

#[test]
fn simulate_schema_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let good = fs::read_to_string(config("table1_bm.json")).unwrap();
    let bad = [
        good.replacen("\"seed\"", "\"sede\"", 1),
        good.replacen("\"sigma\"", "\"gamma\"", 1),
        good.replacen("\"gi\"", "\"oracle\"", 1),
        good.replacen("\"lambda\": 0.1", "\"lambda\": -0.1", 1),
        "{".to_string(),
    ];
    for (i, text) in bad.iter().enumerate() {
        assert_ne!(text, &good);
        let path = dir.path().join(format!("bad{i}.json"));
        fs::write(&path, text).unwrap();
        let o = gittins(&["simulate", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "case {i}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = gittins(&["simulate", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bundled_configs_parse() {
    let dir: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs"].iter().collect();
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = gittins_renewal::cli::load_config(&path).unwrap();
        assert_eq!(cfg.episode.arms.len(), 3);
        assert_eq!((cfg.episode.q, cfg.episode.horizon), (0.5, 50.0));
        count += 1;
    }
    assert_eq!(count, 32);
    let inh = gittins_renewal::cli::load_config(std::path::Path::new(&config("inhomogeneous.json"))).unwrap();
    let lambdas: Vec<f64> = inh.episode.arms.iter().map(|a| a.lambda).collect();
    assert_eq!(lambdas, [0.1, 0.2, 0.3]);
    let names: Vec<&str> = inh.episode.arms.iter().map(|a| a.model.name()).collect();
    assert_eq!(names, ["bm", "snlp", "rsnlp"]);
    let rewards: Vec<RewardSpec> = inh.episode.arms.iter().map(|a| a.reward).collect();
    assert_eq!(rewards, [RewardSpec::Softplus, RewardSpec::Sigmoid, RewardSpec::Identity]);
}

#[test]
fn oracle_passes_for_bm() {
    let o = gittins(&["oracle", "--model", "bm", "--params", "1", "--x", "0", "--paths", "200000", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS"));
}

#[test]
fn capped_oracle_paths_exit_3() {
    // strong upward drift, almost no discounting and a two-epoch cap
    let o = gittins(&[
        "oracle", "--model", "snlp", "--params", "5,0.1,0,1", "--q", "1e-6", "--lambda", "10", "--x", "0", "--paths",
        "100", "--max-epochs", "2",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epoch cap"));
}

#[test]
fn converge_emits_curves() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for i in 0..2 {
        let path = dir.path().join(format!("c{i}.csv"));
        let o = gittins(&[
            "converge", "--model", "snlp", "--params", "1,1,6,2", "--x-min", "-2", "--x-max", "2", "--x-points", "21",
            "-o", path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        let d: Vec<f64> = rows(&stdout(&o)).iter().map(|r| r[1].parse().unwrap()).collect();
        assert_eq!(d.len(), 4);
        assert!(d.windows(2).all(|w| w[1] < w[0]));
        files.push(fs::read_to_string(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let lines: Vec<&str> = files[0].lines().collect();
    assert_eq!(lines[0], "model,lambda,x,gamma_lambda,gamma_inf");
    assert_eq!(lines.len(), 1 + 4 * 21);
    let o = gittins(&["converge", "--model", "ou", "--params", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn selfcheck_succeeds() {
    let o = gittins(&["selfcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}
