use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use shared_lasso::datadir;
use shared_lasso::synthetic::{generate, SyntheticConfig};

const FAST: [&str; 4] = ["--folds", "3", "--grid-size", "15"];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shared-lasso"))
        .args(args)
        .env_remove("SHARED_LASSO_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_corpus(root: &Path, per_dir: usize) {
    let genres = ["drama", "comedy", "horror"];
    let pos = ["great", "superb", "loved", "fun"];
    let neg = ["awful", "boring", "dull", "bad"];
    let mut sidecar = String::new();
    let mut k = 0;
    for split in ["train", "test"] {
        for polarity in ["pos", "neg"] {
            let dir = root.join(split).join(polarity);
            fs::create_dir_all(&dir).unwrap();
            for i in 0..per_dir {
                let (rating, words) = if polarity == "pos" {
                    (7 + i % 4, &pos)
                } else {
                    (1 + i % 4, &neg)
                };
                let text = format!(
                    "The {} movie<br />was {} and {}",
                    genres[k % 3],
                    words[i % 4],
                    words[(i + 1) % 4]
                );
                fs::write(dir.join(format!("{k}_{rating}.txt")), text).unwrap();
                sidecar.push_str(&format!("{split}/{polarity}/{k}\t{}\n", genres[k % 3]));
                k += 1;
            }
        }
    }
    fs::write(root.join("genres.tsv"), sidecar).unwrap();
}

/// Three-group synthetic problem written in the featurized layout.
fn synthetic_data(dir: &Path) {
    let cfg = SyntheticConfig {
        group_sizes: vec![30, 30, 30],
        p: 40,
        density: 0.15,
        shared_support: 5,
        offset_support: 2,
        ..Default::default()
    };
    let s = generate(&cfg, 11).unwrap();
    let ids = |n: usize, prefix: &str| -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    };
    datadir::write(
        dir,
        (&s.train, &ids(s.train.n_rows(), "tr")),
        (&s.test, &ids(s.test.n_rows(), "te")),
        None,
    )
    .unwrap();
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

/// Every output file except the manifest, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != "manifest.json" {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn featurize_toy_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    write_corpus(&corpus, 2);
    let out = tmp.path().join("out");
    ok(&[
        "featurize",
        "--corpus",
        p(&corpus),
        "--min-doc-freq",
        "1",
        "--out",
        p(&out),
    ]);
    let data = datadir::read(&out).unwrap();
    // 8 reviews in total, split in half
    assert_eq!(data.train.n_rows() + data.test.n_rows(), 8);
    assert_eq!(data.train.n_rows(), 4);
    assert_eq!(data.train.group_names(), ["all"]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 0);
    assert!(manifest["details"]["tokenizer"].is_string());
    assert!(manifest["command"]["featurize"].is_object());
    let vocab = fs::read_to_string(out.join("vocab.tsv")).unwrap();
    assert!(vocab.starts_with("feature_id\ttoken\tdoc_freq\n"));
    assert!(!vocab.contains("\tbr\t"));
}

#[test]
fn featurize_six_reviews() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    // six files: train/pos, train/neg, test/pos, test/neg hold 2, 1, 2, 1
    write_corpus(&corpus, 1);
    fs::write(corpus.join("train/pos/100_9.txt"), "great drama").unwrap();
    fs::write(corpus.join("test/pos/101_8.txt"), "fun comedy").unwrap();

    let out = tmp.path().join("out");
    ok(&[
        "featurize",
        "--corpus",
        p(&corpus),
        "--min-doc-freq",
        "1",
        "--out",
        p(&out),
    ]);
    let data = datadir::read(&out).unwrap();
    assert_eq!(data.train.n_rows() + data.test.n_rows(), 6);
    assert_eq!(data.train.n_rows(), 3);
}

#[test]
fn grouped_without_sidecar_names_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    write_corpus(&corpus, 1);
    let out = run(&[
        "featurize",
        "--corpus",
        p(&corpus),
        "--grouped",
        "--out",
        p(&tmp.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--genres"));
}

#[test]
fn featurize_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    write_corpus(&corpus, 6);
    let run_into = |name: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "featurize",
            "--corpus",
            p(&corpus),
            "--genres",
            p(&corpus.join("genres.tsv")),
            "--grouped",
            "--min-doc-freq",
            "2",
            "--out",
            p(&out),
        ]);
        let data = datadir::read(&out).unwrap();
        assert_eq!(data.train.group_names(), ["drama", "comedy", "horror"]);
        snapshot(&out)
    };
    assert_eq!(run_into("a"), run_into("b"));
}

#[test]
fn fit_dsl_writes_one_row_with_four_mse_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synthetic_data(&data);
    let out = tmp.path().join("fit");
    let mut args = vec![
        "fit",
        "--data",
        p(&data),
        "--model",
        "dsl",
        "--weights",
        "sqrt_third",
        "--out",
        p(&out),
    ];
    args.extend(FAST);
    ok(&args);
    let rows = read_csv(&out.join("mse.csv"));
    assert_eq!(rows[0], ["model", "weights", "all", "g1", "g2", "g3"]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][..2], ["dsl", "sqrt_third"]);
    for v in &rows[1][2..] {
        assert!(v.parse::<f64>().unwrap() >= 0.0);
    }
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("fit_dsl_sqrt_third.json")).unwrap())
            .unwrap();
    assert_eq!(doc["model"], "dsl");
    assert_eq!(doc["fit"]["r"].as_array().unwrap().len(), 3);
}

#[test]
fn fit_all_schemes_gives_eight_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synthetic_data(&data);
    let out = tmp.path().join("fit");
    let mut args = vec![
        "fit",
        "--data",
        p(&data),
        "--weights",
        "all",
        "--out",
        p(&out),
    ];
    args.extend(FAST);
    ok(&args);
    let rows = read_csv(&out.join("mse.csv"));
    assert_eq!(rows.len(), 9);
    let names: Vec<&str> = rows[1..].iter().map(|r| r[1].as_str()).collect();
    assert_eq!(
        names,
        [
            "sqrt_third",
            "sqrt_share",
            "sqrt_log_ratio_inv",
            "size_ratio_inv",
            "log_ratio_inv",
            "log_ratio",
            "sqrt_log_ratio",
            "sqrt_mixed"
        ]
    );
}

#[test]
fn custom_weights_below_one_warn() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synthetic_data(&data);
    let out = tmp.path().join("fit");
    let mut args = vec![
        "fit",
        "--data",
        p(&data),
        "--weights",
        "custom:0.3,0.3,0.3",
        "--out",
        p(&out),
    ];
    args.extend(FAST);
    let res = ok(&args);
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("<= 1"), "{stderr}");
    let rows = read_csv(&out.join("mse.csv"));
    assert_eq!(rows[1][1], "custom:0.3,0.3,0.3");
    assert_eq!(rows[1].len(), 6);
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("fit_dsl_custom.json")).unwrap())
            .unwrap();
    assert_eq!(doc["fit"]["beta"].as_array().unwrap().len(), 0);
}

#[test]
fn pooled_and_separate_fits() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synthetic_data(&data);
    for model in ["pooled", "separate"] {
        let out = tmp.path().join(model);
        let mut args = vec![
            "fit",
            "--data",
            p(&data),
            "--model",
            model,
            "--out",
            p(&out),
        ];
        args.extend(FAST);
        ok(&args);
        let rows = read_csv(&out.join("mse.csv"));
        assert_eq!(rows[1][0], model);
        assert!(out.join(format!("fit_{model}.json")).exists());
    }
}

#[test]
fn bootstrap_counts_bounded_and_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synthetic_data(&data);
    let go = |name: &str, mode: &str, threads: &str| {
        let out = tmp.path().join(name);
        let mut args = vec![
            "bootstrap",
            "--data",
            p(&data),
            "--mode",
            mode,
            "-B",
            "2",
            "--seed",
            "5",
            "--threads",
            threads,
            "--out",
            p(&out),
        ];
        args.extend(FAST);
        ok(&args);
        out
    };
    for mode in ["bls", "bsls"] {
        let a = go(&format!("{mode}_a"), mode, "1");
        let b = go(&format!("{mode}_b"), mode, "2");
        assert_eq!(snapshot(&a), snapshot(&b), "{mode} differs across reruns");
        for (name, bytes) in snapshot(&a) {
            if name.starts_with("stability") {
                let text = String::from_utf8(bytes).unwrap();
                let mut lines = text.lines();
                assert_eq!(lines.next(), Some("feature_id\ttoken\tcount\tproportion"));
                for line in lines {
                    let count: u32 = line.split('\t').nth(2).unwrap().parse().unwrap();
                    assert!((1..=2).contains(&count));
                }
            }
        }
        let union = fs::read_to_string(a.join("union.txt")).unwrap();
        let reduced = datadir::read(&a.join("reduced")).unwrap();
        assert_eq!(reduced.train.n_features(), union.lines().count());
        let table1 = read_csv(&a.join("table1.csv"));
        assert_eq!(
            table1[0],
            [
                "group",
                "full_mse",
                "reduced_mse",
                "full_features",
                "reduced_features"
            ]
        );
    }
}

#[test]
fn denoise_sweep_starts_at_unthresholded_mse() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synthetic_data(&data);
    let fit_dir = tmp.path().join("fit");
    let mut args = vec!["fit", "--data", p(&data), "--out", p(&fit_dir)];
    args.extend(FAST);
    ok(&args);
    let mse = read_csv(&fit_dir.join("mse.csv"))[1][2].clone();

    let out = tmp.path().join("dn");
    ok(&[
        "denoise",
        "--fit",
        p(&fit_dir.join("fit_dsl_sqrt_third.json")),
        "--data",
        p(&data),
        "--sigma",
        "50",
        "--out",
        p(&out),
    ]);
    let rows = read_csv(&out.join("sweep.csv"));
    assert_eq!(rows[0], ["gamma", "threshold", "mse"]);
    assert_eq!(rows.len(), 101);
    assert_eq!(rows[1][0], "0");
    assert_eq!(rows[1][2], mse);
    assert_eq!(rows[100][0], "0.5");
    // sigma = 50 zeroes every coefficient well before the end of the grid
    assert_eq!(rows[99][2], rows[100][2]);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["sigma"], 50.0);
    assert_eq!(summary["n"], 90);
}

#[test]
fn denoise_rejects_bad_sigma() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synthetic_data(&data);
    let fit_dir = tmp.path().join("fit");
    let mut args = vec![
        "fit",
        "--data",
        p(&data),
        "--model",
        "pooled",
        "--out",
        p(&fit_dir),
    ];
    args.extend(FAST);
    ok(&args);
    let res = run(&[
        "denoise",
        "--fit",
        p(&fit_dir.join("fit_pooled.json")),
        "--data",
        p(&data),
        "--sigma",
        "loud",
        "--out",
        p(&tmp.path().join("dn")),
    ]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn subgroups_table_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synthetic_data(&data);
    let out = tmp.path().join("sg");
    let mut args = vec!["subgroups", "--data", p(&data), "--out", p(&out)];
    args.extend(FAST);
    ok(&args);
    let rows = read_csv(&out.join("table6.csv"));
    assert_eq!(
        rows[0],
        [
            "penalty",
            "removal_type",
            "all_pct",
            "g1_pct",
            "g2_pct",
            "g3_pct",
            "coef_removed"
        ]
    );
    let blocks: Vec<&str> = rows[1..]
        .iter()
        .filter(|r| r[1] == "no removal")
        .map(|r| r[0].as_str())
        .collect();
    assert_eq!(blocks.len(), 7);
    for r in rows[1..].iter().filter(|r| r[1] == "no removal") {
        assert_eq!(r[2..6], ["0", "0", "0", "0"]);
        assert_eq!(r[6], "0");
    }

    let venn: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("venn.json")).unwrap()).unwrap();
    let sets: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("sets.json")).unwrap()).unwrap();
    for scheme in blocks {
        let total: u64 = venn[scheme]
            .as_object()
            .unwrap()
            .values()
            .map(|v| v.as_u64().unwrap())
            .sum();
        let mut union: Vec<u64> = ["g1", "g2", "g3", "shared"]
            .iter()
            .flat_map(|k| sets[scheme][k].as_array().unwrap().iter())
            .map(|v| v.as_u64().unwrap())
            .collect();
        union.sort_unstable();
        union.dedup();
        assert_eq!(total, union.len() as u64, "{scheme}");
    }
}

#[test]
fn report_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synthetic_data(&data);
    let out = tmp.path().join("rep");
    let mut args = vec!["report", "--data", p(&data), "--out", p(&out)];
    args.extend(FAST);
    ok(&args);
    let t2 = read_csv(&out.join("table2.csv"));
    let models: Vec<&str> = t2[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(models, ["pooled", "separate", "dsl"]);
    assert_eq!(read_csv(&out.join("table3.csv")).len(), 9);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn exit_codes_by_category() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synthetic_data(&data);
    let out = tmp.path().join("o");

    let bad_scheme = run(&[
        "fit",
        "--data",
        p(&data),
        "--weights",
        "nope",
        "--out",
        p(&out),
    ]);
    assert_eq!(bad_scheme.status.code(), Some(3));

    let missing = run(&[
        "fit",
        "--data",
        p(&tmp.path().join("absent")),
        "--out",
        p(&out),
    ]);
    assert_eq!(missing.status.code(), Some(1));

    fs::write(data.join("train.design"), "not a design\n").unwrap();
    let corrupt = run(&["fit", "--data", p(&data), "--out", p(&out)]);
    assert_eq!(corrupt.status.code(), Some(4));

    let usage = run(&["fit"]);
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_with_five() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synthetic_data(&data);
    let out = tmp.path().join("o");
    let res = run(&[
        "fit",
        "--data",
        p(&data),
        "--model",
        "pooled",
        "--max-iterations",
        "1",
        "--folds",
        "3",
        "--grid-size",
        "15",
        "--out",
        p(&out),
    ]);
    assert_eq!(
        res.status.code(),
        Some(5),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
}
