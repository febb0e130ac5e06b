use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use silofed_cli::results::{read_results, ResultRow, Round, Seed, HEADER};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn silofed(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_silofed"));
    cmd.args(args).env_remove("SILOFED_SEED_OFFSET");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn run_fixture(name: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = fixture(name);
    let mut args = vec!["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    silofed(&args, &[])
}

fn rows(path: &Path) -> Vec<ResultRow> {
    read_results(path).unwrap().into_iter().map(|(_, r)| r).collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn three_seeds_give_three_rows_and_an_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_fixture("minimal.json", dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(text.starts_with(&format!("{}\n", HEADER.join(","))));
    assert!(!text.contains('\r'));
    let r = rows(&dir.path().join("results.csv"));
    assert_eq!(r.len(), 4);
    let seeds: Vec<Seed> = r.iter().map(|x| x.seed).collect();
    assert_eq!(seeds, vec![Seed::Run(0), Seed::Run(1), Seed::Run(2), Seed::Agg]);
    assert!(r.iter().all(|x| x.round == Round::Final && x.method == "mrmtl" && x.lambda == Some(0.1)));
    let mean = r[..3].iter().map(|x| x.test_metric).sum::<f64>() / 3.0;
    assert!((r[3].test_metric - mean).abs() < 1e-8);
    for x in &r {
        assert!(x.realized_epsilon <= x.epsilon, "{x:?}");
        assert!(x.realized_epsilon > 0.0);
    }
    let agg = std::fs::read_to_string(dir.path().join("results_agg.csv")).unwrap();
    assert_eq!(agg.lines().count(), 2);
    assert!(agg.lines().nth(1).unwrap().starts_with("mrmtl,0.1,2,1e-05,final,3,"));
    // Defaults are echoed.
    assert!(stderr(&o).contains("\"learning_rate\": 0.1"), "{}", stderr(&o));
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_fixture("minimal.json", a.path(), &["--workers", "1"]).status.success());
    assert!(run_fixture("minimal.json", b.path(), &["--workers", "4"]).status.success());
    for f in ["results.csv", "results_agg.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    assert!(run_fixture("minimal.json", a.path(), &[]).status.success());
    let c = std::fs::read(a.path().join("results.csv")).unwrap();
    assert_eq!(c, std::fs::read(b.path().join("results.csv")).unwrap());
}

#[test]
fn seed_offset_shifts_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("minimal.json");
    let args = ["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()];
    let o = silofed(&args, &[("SILOFED_SEED_OFFSET", "10")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let seeds: Vec<Seed> = rows(&dir.path().join("results.csv")).iter().map(|x| x.seed).collect();
    assert_eq!(seeds, vec![Seed::Run(10), Seed::Run(11), Seed::Run(12), Seed::Agg]);
    let o = silofed(&args, &[("SILOFED_SEED_OFFSET", "ten")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn intermediate_rounds_every_twentieth() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("minimal.json"))
        .unwrap()
        .replace("\"rounds\": 10", "\"rounds\": 45")
        .replace("[0, 1, 2]", "[0]");
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, text).unwrap();
    let o = silofed(
        &["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--report-intermediate"],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&dir.path().join("results.csv"));
    let per_seed: Vec<Round> = r.iter().filter(|x| x.seed == Seed::Run(0)).map(|x| x.round).collect();
    let mut want: Vec<Round> = (1..=14).map(|i| Round::At(3 * i)).collect();
    want.push(Round::Final);
    assert_eq!(per_seed, want);
    // One agg row per reported round.
    assert_eq!(r.iter().filter(|x| x.seed == Seed::Agg).count(), 15);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("minimal.json")).unwrap().replace("\"epsilons\"", "\"epsilonn\"");
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, text).unwrap();
    let o = silofed(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("epsilonn"), "{}", stderr(&o));
    assert!(!dir.path().join("results.csv").exists());
}

#[test]
fn failed_runs_become_error_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_fixture("partial_failure.json", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("2 of 4 runs failed"), "{}", stderr(&o));
    let r = rows(&dir.path().join("results.csv"));
    let ifca: Vec<&ResultRow> = r.iter().filter(|x| x.method == "ifca_g2").collect();
    assert_eq!(ifca.len(), 3);
    assert!(ifca[..2].iter().all(|x| x.round == Round::Error && x.test_metric.is_nan()));
    assert!(ifca[2].seed == Seed::Agg && ifca[2].test_metric.is_nan());
    let local: Vec<&ResultRow> = r.iter().filter(|x| x.method == "local").collect();
    assert!(local.iter().all(|x| x.test_metric.is_finite() && x.realized_epsilon.is_infinite()));
    let notes = std::fs::read_to_string(dir.path().join("results_errors.txt")).unwrap();
    assert_eq!(notes.lines().count(), 2);
    assert!(notes.contains("classification"));
}

#[test]
fn lambda_sweep_is_unimodal_and_tracks_theory() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_fixture("lambda_sweep.json", dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&dir.path().join("results.csv"));
    let agg: Vec<&ResultRow> = r.iter().filter(|x| x.seed == Seed::Agg).collect();
    assert_eq!(agg.len(), 9);
    // Monte Carlo (test) agrees with the closed form (train).
    for x in &agg {
        let rel = (x.test_metric - x.train_metric).abs() / x.train_metric;
        assert!(rel < 0.03, "{x:?}");
    }
    let curve: Vec<f64> = agg.iter().map(|x| x.test_metric).collect();
    let best = curve.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!(best > 0 && best < curve.len() - 1, "{curve:?}");
    assert!(curve[..=best].windows(2).all(|w| w[1] < w[0]), "{curve:?}");
    assert!(curve[best..].windows(2).all(|w| w[1] > w[0]), "{curve:?}");
}

#[test]
fn tuning_study_writes_its_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_fixture("tuning.json", dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("tuning.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("lambda,mse_nonprivate,mse_private,mse_private_tuned_eta"));
    assert_eq!(lines.count(), 4);
}

fn summarize(path: &Path) -> Output {
    silofed(&["summarize", path.to_str().unwrap()], &[])
}

#[test]
fn summary_of_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("one.csv");
    std::fs::write(&p, format!("{}\nlocal,,1,1e-05,0,final,0.1,0.2,0.9\n", HEADER.join(","))).unwrap();
    let o = summarize(&p);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("local") && lines[1].contains("0.2"), "{out}");
}

#[test]
fn summary_prefers_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.csv");
    let body = [
        "mrmtl,0.1,1,1e-05,0,final,0.1,0.05,0.9",
        "mrmtl,0.1,1,1e-05,1,final,0.1,0.35,0.9",
        "mrmtl,0.1,1,1e-05,agg,final,0.1,0.2,0.9",
        "mrmtl,1,1,1e-05,0,final,0.1,0.15,0.9",
        "mrmtl,1,1,1e-05,1,final,0.1,0.15,0.9",
        "mrmtl,1,1,1e-05,agg,final,0.1,0.15,0.9",
        "local,,1,1e-05,0,5,0.1,0.01,0.9",
        "local,,1,1e-05,0,final,0.1,0.3,0.9",
    ];
    std::fs::write(&p, format!("{}\n{}\n", HEADER.join(","), body.join("\n"))).unwrap();
    let before = std::fs::read(&p).unwrap();
    let o = summarize(&p);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(lines[0], ["mrmtl", "1", "1", "agg", "0.15", "0.1"]);
    assert_eq!(lines[1], ["local", "-", "1", "0", "0.3", "0.1"]);
    assert_eq!(std::fs::read(&p).unwrap(), before);
}

#[test]
fn summary_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = summarize(&dir.path().join("missing.csv"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not found"), "{}", stderr(&o));
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, format!("{}\nlocal,,1,1e-05,0,final,0.1,0.2,0.9\nlocal,,1\n", HEADER.join(","))).unwrap();
    let o = summarize(&p);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.csv:3"), "{}", stderr(&o));
}

#[test]
fn csv_directory_resolves_against_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_fixture("csv_silos.json", dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&dir.path().join("results.csv"));
    let methods: Vec<&str> = r.iter().map(|x| x.method.as_str()).collect();
    assert_eq!(methods, ["fedavg", "fedavg", "local", "local"]);
    // Error rates over three test examples.
    for x in &r {
        assert!([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0].iter().any(|v| (x.test_metric - v).abs() < 1e-8), "{x:?}");
    }
}
