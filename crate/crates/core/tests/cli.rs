//! End-to-end runs of the `glia3d` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn glia3d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glia3d"))
        .args(args)
        .output()
        .expect("spawn glia3d")
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn entries(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = match std::fs::read_dir(dir) {
        Ok(rd) => rd
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect(),
        Err(_) => Vec::new(),
    };
    names.sort();
    names
}

fn scene(dir: &Path) -> PathBuf {
    let stack = dir.join("scene.tif");
    let o = glia3d(&[
        "phantom",
        "scene",
        "--k",
        "4",
        "--out",
        s(&stack),
        "--truth",
        s(&dir.join("truth.json")),
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    stack
}

#[test]
fn run_writes_table_report_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let stack = scene(dir.path());
    let out = dir.path().join("out");
    let o = glia3d(&[
        "run",
        "--input",
        s(&stack),
        "--output-dir",
        s(&out),
        "--spacing",
        "0.5",
        "--manual",
        s(&fixture("M_fixture.csv")),
        "--ilastik",
        s(&fixture("i_fixture.csv")),
        "--um-per-px",
        "0.2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        entries(&out),
        ["D_scene.csv", "centroids_scene.svg", "compare_scene.json"]
    );

    let table = std::fs::read_to_string(out.join("D_scene.csv")).unwrap();
    let prov: Vec<&str> = table.lines().take_while(|l| l.starts_with('#')).collect();
    assert!(prov.iter().any(|l| l.starts_with("# tool glia3d ")));
    assert!(prov.iter().any(|l| l.starts_with("# config_sha256 ")));
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 1 + 4);

    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("truth.json")).unwrap())
            .unwrap();
    assert_eq!(truth["cells"].as_array().unwrap().len(), 4);

    let report = std::fs::read_to_string(out.join("compare_scene.json")).unwrap();
    let r = glia3d::compare::ComparisonReport::from_json(&report).unwrap();
    let counts: Vec<(&str, usize)> = r
        .methods
        .iter()
        .map(|m| (m.method.as_str(), m.count))
        .collect();
    assert_eq!(counts, [("manual", 81), ("ilastik", 179), ("morph", 4)]);
    assert_eq!(r.matches.len(), 2);
    let svg = std::fs::read_to_string(out.join("centroids_scene.svg")).unwrap();
    assert!(svg.contains("<!-- tool glia3d "));
}

#[test]
fn missing_input_exits_3_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = glia3d(&[
        "run",
        "--input",
        s(&dir.path().join("nope.tif")),
        "--output-dir",
        s(&out),
        "--spacing",
        "0.5",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("error [volume_io]"), "{}", stderr(&o));
    assert!(stderr(&o).contains("hint:"));
    assert!(entries(&out).is_empty());
}

#[test]
fn bad_compare_input_leaves_no_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let stack = scene(dir.path());
    let bad = dir.path().join("i_bad.csv");
    let text = std::fs::read_to_string(fixture("i_fixture.csv")).unwrap();
    std::fs::write(&bad, text.replacen(",0.66,0.34", ",0.66,0.44", 1)).unwrap();
    let out = dir.path().join("out");
    let o = glia3d(&[
        "run",
        "--input",
        s(&stack),
        "--output-dir",
        s(&out),
        "--spacing",
        "0.5",
        "--ilastik",
        s(&bad),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert!(entries(&out).is_empty(), "{:?}", entries(&out));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let stack = scene(dir.path());
    let out = dir.path().join("out");

    // spacing missing
    let o = glia3d(&["run", "--input", s(&stack), "--output-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("spacing"));

    let o = glia3d(&[
        "run",
        "--input",
        s(&stack),
        "--output-dir",
        s(&out),
        "--spacing",
        "0.5",
        "--connectivity",
        "7",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "spacing = [0.5, 0.5, 0.5]\nthreshhold = 0.3\n").unwrap();
    let o = glia3d(&[
        "--config",
        s(&cfg),
        "run",
        "--input",
        s(&stack),
        "--output-dir",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("threshhold"));
    assert!(entries(&out).is_empty());
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let stack = scene(dir.path());
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "input = {:?}\nspacing = [0.5, 0.5, 0.5]\nthreshold = 0.5\nmin_voxels = 1000000\n",
            s(&stack)
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    // the file alone filters every cell away
    let o = glia3d(&["--config", s(&cfg), "run", "--output-dir", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("0 cells"));
    let o = glia3d(&[
        "--config",
        s(&cfg),
        "run",
        "--output-dir",
        s(&out),
        "--min-voxels",
        "10",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("4 cells"));
}

#[test]
fn staged_subcommands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let stack = scene(dir.path());
    let labels = dir.path().join("labels.tif");
    let o = glia3d(&[
        "segment",
        "--input",
        s(&stack),
        "--spacing",
        "0.5",
        "--out",
        s(&labels),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("4 cells"));

    let table = dir.path().join("D_labels.csv");
    let o = glia3d(&[
        "morph",
        "--labels",
        s(&labels),
        "--spacing",
        "0.5",
        "--out",
        s(&table),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = glia3d::compare::parse_morph(&table).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows
        .iter()
        .all(|r| r.n_endpoints == Some(2) && r.n_branchpoints == Some(0)));

    let skel = dir.path().join("skeleton.csv");
    let o = glia3d(&[
        "skeleton",
        "--labels",
        s(&labels),
        "--spacing",
        "0.5",
        "--out",
        s(&skel),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(std::fs::read_to_string(&skel).unwrap().lines().count() > 4);

    let report = dir.path().join("report.json");
    let svg = dir.path().join("scatter.svg");
    let o = glia3d(&[
        "compare",
        "--manual",
        s(&fixture("M_fixture.csv")),
        "--ilastik",
        s(&fixture("i_fixture.csv")),
        "--morph",
        s(&fixture("D_fixture.csv")),
        "--out",
        s(&report),
        "--svg",
        s(&svg),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r =
        glia3d::compare::ComparisonReport::from_json(&std::fs::read_to_string(&report).unwrap())
            .unwrap();
    let counts: Vec<usize> = r.methods.iter().map(|m| m.count).collect();
    assert_eq!(counts, [81, 179, 15]);
    assert!(r.notes.iter().any(|n| n.contains("um_per_px")));
    assert_eq!(r.inputs[0].file, "M_fixture.csv");
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn compare_without_inputs_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = glia3d(&["compare", "--out", s(&dir.path().join("r.json"))]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(entries(dir.path()).is_empty());
}
