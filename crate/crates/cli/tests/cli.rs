use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_egc");

fn egc(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes `<root>/AIA/{C,S}/*.png`; sick images are noisier.
fn write_images(root: &Path, control: usize, sick: usize) {
    let mut state = 0x2545_f491_u32;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 17;
        state ^= state << 5;
        state
    };
    for (class, count, spread) in [("C", control, 16), ("S", sick, 120)] {
        let dir = root.join("AIA").join(class);
        std::fs::create_dir_all(&dir).unwrap();
        for i in 0..count {
            let img = image::GrayImage::from_fn(20, 20, |x, y| {
                let base = 100 + (x + y) * 2;
                image::Luma([(base + next() % spread).min(255) as u8])
            });
            img.save(dir.join(format!("{class}_{i:02}.png"))).unwrap();
        }
    }
}

fn write_config(dir: &Path, root: &Path, id: &str, classifier: &str) -> PathBuf {
    let config = format!(
        r#"{{"id":"{id}","dataset":{{"root":{root:?},"name":"AIA"}},
            "descriptor":{{"kind":"lpq","window":3}},
            "classifier":{classifier},"folds":{{"k":4}},"seed":5}}"#,
        root = s(root)
    );
    let path = dir.join(format!("{id}.json"));
    std::fs::write(&path, config).unwrap();
    path
}

/// A workspace with two handcrafted members over a 10+10 image set.
fn workspace(tmp: &Path) -> PathBuf {
    write_images(tmp, 10, 10);
    let ws = tmp.join("ws");
    for (id, c) in [("knn", r#"{"kind":"knn","k":3}"#), ("gnb", r#"{"kind":"gnb"}"#)] {
        let cfg = write_config(tmp, tmp, id, c);
        let o = egc(&["run", "--config", s(&cfg), "--out", s(&ws)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    ws
}

/// `sample_id,fold` pairs from the workspace fold plan.
fn plan_rows(ws: &Path) -> Vec<(String, String)> {
    std::fs::read_to_string(ws.join("fold_plan.csv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[2].to_string())
        })
        .collect()
}

fn write_proba(path: &Path, rows: &[(String, String)], p_s: f64, sum: f64) {
    let mut text = String::from("sample_id,fold,p_C,p_S\n");
    for (id, fold) in rows {
        text.push_str(&format!("{id},{fold},{},{p_s}\n", sum - p_s));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn extract_reports_class_counts() {
    let tmp = tempfile::tempdir().unwrap();
    write_images(tmp.path(), 6, 5);
    let cfg = write_config(tmp.path(), tmp.path(), "x", r#"{"kind":"knn"}"#);
    let out = tmp.path().join("features");
    let o = egc(&["extract", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["counts"]["C"], 6);
    assert_eq!(manifest["counts"]["S"], 5);
    assert_eq!(manifest["dim"], 256);
    let csv = std::fs::read_to_string(out.join("features.csv")).unwrap();
    assert!(csv.starts_with("# config_fingerprint="));
    assert_eq!(csv.lines().count(), 2 + 11);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    write_images(tmp.path(), 8, 8);
    let cfg = write_config(tmp.path(), tmp.path(), "rf", r#"{"kind":"rf","trees":5}"#);
    let mut outputs = Vec::new();
    for (ws, threads) in [("a", "1"), ("b", "4")] {
        let dir = tmp.path().join(ws);
        let o = egc(&["--threads", threads, "run", "--config", s(&cfg), "--out", s(&dir)]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push((
            stdout(&o),
            std::fs::read(dir.join("members/rf/probabilities.csv")).unwrap(),
            std::fs::read(dir.join("members/rf/metrics.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn seed_flag_changes_the_fingerprint() {
    let tmp = tempfile::tempdir().unwrap();
    write_images(tmp.path(), 8, 8);
    let cfg = write_config(tmp.path(), tmp.path(), "knn", r#"{"kind":"knn"}"#);
    let fp = |extra: &[&str], ws: &str| {
        let dir = tmp.path().join(ws);
        let mut args = vec!["run", "--config", s(&cfg), "--out", s(&dir)];
        args.extend_from_slice(extra);
        let o = egc(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o).split("fingerprint=").nth(1).unwrap().trim().to_string()
    };
    assert_ne!(fp(&[], "a"), fp(&["--seed", "6"], "b"));
}

#[test]
fn empty_class_folder_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    write_images(tmp.path(), 4, 0);
    std::fs::create_dir_all(tmp.path().join("AIA/S")).unwrap();
    let cfg = write_config(tmp.path(), tmp.path(), "x", r#"{"kind":"knn"}"#);
    let o = egc(&["extract", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(s(&tmp.path().join("AIA").join("S"))), "{}", stderr(&o));
}

#[test]
fn malformed_config_exits_with_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, r#"{"id":"x","classifier":{"kind":"knn"},"bogus":1}"#).unwrap();
    let o = egc(&["run", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"), "{}", stderr(&o));
}

#[test]
fn import_rejects_an_incomplete_fold() {
    let tmp = tempfile::tempdir().unwrap();
    let ws = workspace(tmp.path());
    let rows = plan_rows(&ws);
    let kept: Vec<_> = rows.iter().filter(|(_, f)| f != "2").cloned().collect();
    let csv = tmp.path().join("partial.csv");
    write_proba(&csv, &kept, 0.3, 1.0);
    let o = egc(&["import-proba", "--out", s(&ws), "--id", "cnn", s(&csv)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fold(s) 2"), "{}", stderr(&o));
}

#[test]
fn import_renormalizes_near_unit_rows_with_a_count() {
    let tmp = tempfile::tempdir().unwrap();
    let ws = workspace(tmp.path());
    let csv = tmp.path().join("cnn.csv");
    write_proba(&csv, &plan_rows(&ws), 0.4, 0.99);
    let o = egc(&["import-proba", "--out", s(&ws), "--id", "cnn", s(&csv)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("renormalized_with_warning=20"), "{}", stdout(&o));
}

#[test]
fn fuse_needs_two_members() {
    let tmp = tempfile::tempdir().unwrap();
    let ws = workspace(tmp.path());
    let o = egc(&["fuse", "--out", s(&ws), "--members", "knn"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn six_members_sweep_to_171_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let ws = workspace(tmp.path());
    for (id, c) in [("rf", r#"{"kind":"rf","trees":4}"#), ("knn1", r#"{"kind":"knn","k":1}"#)] {
        let cfg = write_config(tmp.path(), tmp.path(), id, c);
        assert!(egc(&["run", "--config", s(&cfg), "--out", s(&ws)]).status.success());
    }
    let rows = plan_rows(&ws);
    for (j, p) in [0.2, 0.7].iter().enumerate() {
        let csv = tmp.path().join(format!("n{j}.csv"));
        write_proba(&csv, &rows, *p, 1.0);
        let o = egc(&["import-proba", "--out", s(&ws), "--id", &format!("cnn{j}"), s(&csv)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let o = egc(&["fuse", "--out", s(&ws)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(ws.join("fusion/report.csv")).unwrap();
    let data: Vec<&str> = report.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(data.len(), 171);
    assert!(stdout(&o).starts_with("Rank"));
}

#[test]
fn ranks_over_the_descriptor_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let table = tmp.path().join("grid.csv");
    std::fs::write(
        &table,
        "row,LBP,RLBP,LPQ\nAIA,0.7895,0.8062,0.7535\nTW,0.9279,0.9231,0.9447\nD,0.8520,0.8327,0.8637\n",
    )
    .unwrap();
    let o = egc(&["stats", "ranks", s(&table), "--out", s(tmp.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ranks: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("ranks.json")).unwrap()).unwrap();
    let rows: Vec<Vec<f64>> = serde_json::from_value(ranks["row_ranks"].clone()).unwrap();
    assert_eq!(rows, vec![vec![2.0, 1.0, 3.0], vec![2.0, 3.0, 1.0], vec![2.0, 3.0, 1.0]]);
    let avg: Vec<f64> = serde_json::from_value(ranks["average_ranks"].clone()).unwrap();
    for (got, want) in avg.iter().zip([2.0, 7.0 / 3.0, 5.0 / 3.0]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn wilcoxon_reports_exact_and_normal_p() {
    let tmp = tempfile::tempdir().unwrap();
    let pairs = tmp.path().join("pairs.csv");
    std::fs::write(&pairs, "fused,single\n0.9,0.8\n0.8,0.75\n0.85,0.82\n0.95,0.91\n0.7,0.55\n").unwrap();
    let o = egc(&["stats", "wilcoxon", s(&pairs)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("p_value=0.031250"), "{out}");
    assert!(out.contains("p_normal_uncorrected=0.0216"), "{out}");
}
