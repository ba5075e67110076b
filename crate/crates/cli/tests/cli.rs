use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use strainmix::data::{load_counts, InputFormat};
use strainmix::simulator::CohortTruth;

const BIN: &str = env!("CARGO_BIN_EXE_strainmix");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn strainmix")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

fn simulate(dir: &Path, extra: &[&str]) {
    let mut args = vec!["simulate", "--out", p(dir)];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn simulate_is_deterministic_and_self_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let flags = ["--m", "500", "--c", "100", "--k", "3", "--alpha", "0.1", "--seed", "7"];
    simulate(&tmp.path().join("a"), &flags);
    simulate(&tmp.path().join("b"), &flags);
    for f in ["counts.tsv", "truth.json"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let ds = load_counts(&tmp.path().join("a/counts.tsv"), InputFormat::Tsv).unwrap();
    assert_eq!((ds.n_samples(), ds.n_snps()), (1, 500));
    let truth: CohortTruth =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("a/truth.json")).unwrap()).unwrap();
    assert_eq!(truth.samples.len(), 1);
    assert_eq!(truth.samples[0].params.k, 3);
    assert_eq!(truth.samples[0].params.alpha, 0.1);
    assert!(tmp.path().join("a/manifest.json").exists());
}

#[test]
fn malformed_input_exits_1_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("bad.tsv");
    fs::write(&input, "snp_id\tsample_id\tref\tnonref\ns1\tA\t3\tx\n").unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(&["fit", "--input", p(&input), "--out", p(&out_dir), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.tsv:2"));
    assert!(!out_dir.exists());
    // Only the input file remains: no staging directory is left behind.
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 1);
}

#[test]
fn usage_errors_and_existing_output_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["study", "--out", p(&tmp.path().join("x")), "--k-range", "0-3"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["simulate", "--out", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("already exists"));
}

#[test]
fn plaf_command_writes_filtered_frequencies() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(&tmp.path().join("sim"), &["--m", "200", "--samples", "4", "--seed", "3", "--k", "2"]);
    let out = tmp.path().join("plaf");
    ok(&["plaf", "--input", p(&tmp.path().join("sim/counts.tsv")), "--out", p(&out), "--seed", "1"]);
    let rows = csv_rows(&out.join("plaf.csv"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("filter_report.json")).unwrap()).unwrap();
    assert_eq!(rows.len() as u64, report["snps_out"].as_u64().unwrap());
    assert!(rows.iter().all(|r| {
        let f: f64 = r[1].parse().unwrap();
        f > 0.0 && f < 1.0
    }));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["input"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["files"][1]["columns"][0], "snp_id");
}

#[test]
fn fit_at_true_k_recovers_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(
        &sim,
        &["--m", "600", "--c", "150", "--k", "2", "--alpha", "0.1", "--weights", "0.7,0.3", "--samples", "10", "--seed", "5"],
    );
    let out = tmp.path().join("fit");
    ok(&[
        "fit", "--input", p(&sim.join("counts.tsv")), "--out", p(&out), "--k", "2", "--iterations", "4000",
        "--seed", "2", "--truth", p(&sim.join("truth.json")), "--svg",
    ]);
    // PLAF is pooled over the cohort, so it needs enough samples not to
    // track any one sample's own allele frequencies.
    let rows = csv_rows(&out.join("summary.csv"));
    assert_eq!(rows.len(), 10);
    for r in &rows {
        let w: Vec<f64> = r[12].split(';').map(|x| x.parse().unwrap()).collect();
        let lo: Vec<f64> = r[13].split(';').map(|x| x.parse().unwrap()).collect();
        let hi: Vec<f64> = r[14].split(';').map(|x| x.parse().unwrap()).collect();
        assert!(lo[0] <= 0.7 && 0.7 <= hi[0] && lo[1] <= 0.3 && 0.3 <= hi[1], "{r:?}");
        assert!((w[0] - 0.7).abs() < 0.1, "{r:?}");
        // alpha trades off against nu at this size, so only its range is checked.
        let alpha: f64 = r[6].parse().unwrap();
        assert!(alpha > 0.0 && alpha < 1.0);
    }
    let scores = csv_rows(&out.join("score.csv"));
    assert_eq!(scores.len(), 10);
    assert!(scores.iter().all(|r| r[6].parse::<f64>().unwrap() < 0.01));
    for id in ["sim_1", "sim_2", "sim_3"] {
        let fig = csv_rows(&out.join(format!("figures/{id}.csv")));
        for layer in ["observed", "band", "simulated"] {
            assert!(fig.iter().any(|r| &r[0] == layer), "{id} {layer}");
        }
        assert!(out.join(format!("figures/{id}.svg")).exists());
    }
}

#[test]
fn auto_fit_on_unmixed_samples_picks_one_strain() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, &["--m", "300", "--c", "60", "--k", "1", "--alpha", "0", "--samples", "3", "--seed", "11"]);
    let out = tmp.path().join("fit");
    ok(&[
        "fit", "--input", p(&sim.join("counts.tsv")), "--out", p(&out), "--k-range", "1-3", "--restricted",
        "--iterations", "2000", "--seed", "4", "--dump-chains",
    ]);
    for r in csv_rows(&out.join("summary.csv")) {
        assert_eq!(&r[1], "1", "{r:?}");
    }
    let selection = csv_rows(&out.join("selection.csv"));
    assert_eq!(selection.len(), 3 * 7);
    assert_eq!(selection.iter().filter(|r| &r[8] == "true").count(), 3);
    let chain = csv_rows(&out.join("chains/sim_1_k2_full.csv"));
    assert_eq!(chain.len(), (2000 - 400) / 5);
}

#[test]
fn json_input_round_trips_through_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, &["--m", "150", "--k", "2", "--samples", "2", "--seed", "8", "--format", "json"]);
    let out = tmp.path().join("fit");
    ok(&["fit", "--input", p(&sim.join("counts.json")), "--out", p(&out), "--k", "1", "--iterations", "500", "--seed", "1"]);
    assert_eq!(csv_rows(&out.join("summary.csv")).len(), 2);
}

#[test]
fn compare_reports_winners_and_tally() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, &["--m", "200", "--k", "1", "--alpha", "0.2", "--samples", "3", "--seed", "12"]);
    let out = tmp.path().join("cmp");
    let res = ok(&[
        "compare", "--input", p(&sim.join("counts.tsv")), "--out", p(&out), "--k-range", "1-2", "--iterations",
        "1500", "--seed", "3",
    ]);
    let rows = csv_rows(&out.join("comparison.csv"));
    assert_eq!(rows.len(), 3);
    let tally: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("tally.json")).unwrap()).unwrap();
    let wins = &tally["wins"];
    let total = wins["full"].as_u64().unwrap() + wins["alpha_zero"].as_u64().unwrap() + wins["k_one"].as_u64().unwrap();
    assert_eq!(total, 3);
    assert!(String::from_utf8_lossy(&res.stdout).contains("of 3 samples"));
}

#[test]
fn smoke_study_stays_small() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("study");
    ok(&["study", "--scale", "smoke", "--iterations", "150", "--k-range", "1-3", "--seed", "1", "--out", p(&out)]);
    let rows = csv_rows(&out.join("study.csv"));
    assert!(rows.len() <= 24 && !rows.is_empty());
    assert!(rows.iter().all(|r| &r[9] == "ok"));
    assert_eq!(csv_rows(&out.join("summary.csv")).len(), 8);
}
