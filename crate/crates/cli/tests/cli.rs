use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn ptbloch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptbloch"))
        .args(args)
        .output()
        .expect("binary runs")
}

struct Case {
    dir: TempDir,
}

impl Case {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("config.json"), config).unwrap();
        Self { dir }
    }

    fn config(&self) -> String {
        self.dir.path().join("config.json").display().to_string()
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn run(&self, command: &str, extra: &[&str]) -> Output {
        let (config, out) = (self.config(), self.out().display().to_string());
        let mut args = vec![command, "--config", &config, "--out", &out];
        args.extend_from_slice(extra);
        ptbloch(&args)
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.out().join(name)).unwrap()).unwrap()
    }

    fn csv(&self, name: &str) -> Vec<Vec<f64>> {
        fs::read_to_string(self.out().join(name))
            .unwrap()
            .lines()
            .skip(1)
            .filter(|l| !l.is_empty())
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect()
    }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn complex(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

const COS: &str = r#"{"potential": {"coefficients": {"1": 0.05, "-1": 0.05}}, "resonances": [1]}"#;
const PT: &str = r#"{"potential": {"coefficients": {"1": 0.2, "-1": -0.05}}, "resonances": [1]}"#;

#[test]
fn free_scan_hits_two_at_one() {
    let case =
        Case::new(r#"{"window": {"re_min": 0, "re_max": 4, "im_min": 0, "im_max": 0}, "grid": {"re_points": 401}}"#);
    let o = case.run("discriminant", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = case.csv("discriminant.csv");
    assert_eq!(rows.len(), 401);
    let row = rows.iter().find(|r| r[0] == 1.0).expect("a row at E = 1");
    assert!((row[2] - 2.0).abs() < 1e-9 && row[3].abs() < 1e-12, "{row:?}");
}

#[test]
fn cosine_scan_shows_the_gap() {
    let case = Case::new(
        r#"{"potential": {"coefficients": {"1": 0.05, "-1": 0.05}},
            "window": {"re_min": 0.1, "re_max": 0.4, "im_min": 0, "im_max": 0},
            "grid": {"re_points": 301}}"#,
    );
    let o = case.run("discriminant", &["--jobs", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let outside: Vec<f64> = case
        .csv("discriminant.csv")
        .iter()
        .filter(|r| r[2].abs() > 2.0)
        .map(|r| r[0])
        .collect();
    let (lo, hi) = (outside[0], outside[outside.len() - 1]);
    // edges from the resonance command on the same potential
    assert!(
        (lo - 0.198781).abs() < 1.5e-3 && (hi - 0.298719).abs() < 1.5e-3,
        "{lo} {hi}"
    );
    assert_eq!(outside.len(), ((hi - lo) / 1e-3).round() as usize + 1);
}

#[test]
fn malformed_config_exits_with_two_and_names_the_key() {
    let case = Case::new(r#"{"tolerances": {"integrator": 1e-9, "newtn": 1e-10}}"#);
    let o = case.run("discriminant", &[]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("tolerances") && msg.contains("newtn"), "{msg}");

    let case = Case::new(r#"{"resonances": [1,"#);
    assert_eq!(case.run("resonance", &[]).status.code(), Some(2));

    let case = Case::new(r#"{"resonances": [0]}"#);
    assert_eq!(case.run("resonance", &[]).status.code(), Some(2));

    let missing = ptbloch(&["resonance", "--config", "/nonexistent/config.json"]);
    assert_eq!(missing.status.code(), Some(2));

    let case = Case::new(COS);
    assert_eq!(case.run("resonance", &["--jobs", "0"]).status.code(), Some(2));
    assert_eq!(case.run("resonance", &["--tol", "-1"]).status.code(), Some(2));
}

#[test]
fn resonance_panels() {
    for (coefficients, verdict) in [
        (r#"{"1": 0.05, "-1": 0.05}"#, "gap"),
        (r#"{"1": 0.1}"#, "double_point_at_first_order"),
        (r#"{"1": 0.2, "-1": -0.05}"#, "transversal_band"),
    ] {
        let case = Case::new(&format!(
            r#"{{"potential": {{"coefficients": {coefficients}}}, "resonances": [1]}}"#
        ));
        let o = case.run("resonance", &[]);
        assert!(o.status.success(), "{}", stderr(&o));
        let entry = &case.json("resonance.json")["results"][0];
        assert_eq!(entry["report"]["verdict"], verdict);
        assert!(!entry["arcs"].as_array().unwrap().is_empty());
        let svg = fs::read_to_string(case.out().join("resonance_n1.svg")).unwrap();
        assert!(svg.contains("<path") && svg.contains("<circle"));
    }
}

#[test]
fn transversal_band_flags_the_first_order_mismatch() {
    let case = Case::new(PT);
    let o = case.run("resonance", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let entry = &case.json("resonance.json")["results"][0];
    let report = &entry["report"];
    let pair = report["numeric_branch_points"].as_array().unwrap();
    let (a, b) = (complex(&pair[0]), complex(&pair[1]));
    assert!((a.0 - b.0).abs() < 1e-8 && (a.1 + b.1).abs() < 1e-8);
    // the second-order shift of this potential is just above the default tolerance
    assert!(report["mismatch"].as_f64().unwrap() > 5e-3);
    assert!(!report["warnings"].as_array().unwrap().is_empty());
    let crossing = entry["arcs"][0]["real_axis_crossings"][0].as_f64().unwrap();
    assert!((crossing - 0.26).abs() < 2e-2);
}

#[test]
fn empty_resonance_list_is_a_no_op() {
    let case = Case::new(r#"{"resonances": []}"#);
    for command in ["resonance", "divisor"] {
        let o = case.run(command, &[]);
        assert!(o.status.success());
        assert!(!case.out().exists());
    }
}

#[test]
fn divisor_shapes() {
    let case = Case::new(COS);
    assert!(case.run("divisor", &[]).status.success());
    let report = &case.json("divisor.json")["results"][0]["report"];
    assert_eq!(report["shape"]["kind"], "segment");
    assert!(report["gamma0_imag"].as_f64().unwrap() < 1e-12);
    let rows = case.csv("divisor_n1.csv");
    assert!(rows.iter().all(|r| r[2] == 0.0));

    let case = Case::new(r#"{"resonances": [1]}"#);
    assert!(case.run("divisor", &[]).status.success());
    let report = &case.json("divisor.json")["results"][0]["report"];
    assert_eq!(report["unperturbed"], true);
    assert_eq!(report["shape"]["kind"], "constant");

    let case = Case::new(PT);
    assert!(case.run("divisor", &[]).status.success());
    let report = &case.json("divisor.json")["results"][0]["report"];
    assert_eq!(report["shape"]["kind"], "ellipse");
    assert!(report["focal_mismatch"].as_f64().unwrap().is_finite());
    let slope = report["scaling_slope"].as_f64().unwrap();
    assert!((1.7..=2.3).contains(&slope), "{slope}");
    let svg = fs::read_to_string(case.out().join("divisor_n1.svg")).unwrap();
    assert!(svg.contains("stroke-dasharray"));
}

fn dubrovin_config(divisor: &str, span: &str) -> String {
    format!(r#"{{"dubrovin": {{"branch_points": [0, 1, 2, 3, 4], "divisor": {divisor}, "span": {span}}}}}"#)
}

#[test]
fn dubrovin_genus_one_oscillates_in_the_gap() {
    let case = Case::new(
        r#"{"dubrovin": {"branch_points": [0, 1, 2], "divisor": [{"gamma": 1.5, "sheet": "minus"}],
            "span": [0, 10], "samples": 200}}"#,
    );
    let o = case.run("dubrovin", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = case.csv("dubrovin.csv");
    assert_eq!(rows.len(), 201);
    assert!(rows
        .iter()
        .all(|r| (1.0 - 1e-7..=2.0 + 1e-7).contains(&r[1]) && r[2] == 0.0));
    let summary = &case.json("dubrovin.json")["results"];
    assert!(summary["near_branch_samples"][0].as_u64().unwrap() > 0);
    assert!(summary["max_sheet_defect"].as_f64().unwrap() < 1e-8);
}

#[test]
fn dubrovin_zero_span_echoes_the_initial_state() {
    let case = Case::new(&dubrovin_config(
        r#"[{"gamma": 0.5, "sheet": "plus"}, {"gamma": [3.5, 0.1], "sheet": "minus"}]"#,
        "[2, 2]",
    ));
    assert!(case.run("dubrovin", &[]).status.success());
    let rows = case.csv("dubrovin.csv");
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][..4], &[2.0, 0.5, 0.0, rows[0][3]]);
    assert_eq!((rows[0][5], rows[0][6]), (3.5, 0.1));
}

#[test]
fn dubrovin_collision_is_a_numerical_failure() {
    let case = Case::new(&dubrovin_config(
        r#"[{"gamma": 0.5, "sheet": "plus"}, {"gamma": 0.5, "sheet": "minus"}]"#,
        "[0, 1]",
    ));
    let o = case.run("dubrovin", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("collided"), "{}", stderr(&o));
}

#[test]
fn dubrovin_needs_a_consistent_curve() {
    let case = Case::new(r#"{"dubrovin": {"branch_points": [0, 1], "divisor": [], "span": [0, 1]}}"#);
    assert_eq!(case.run("dubrovin", &[]).status.code(), Some(2));
    let case = Case::new(&dubrovin_config(r#"[{"gamma": 0.5, "sheet": "plus"}]"#, "[0, 1]"));
    assert_eq!(case.run("dubrovin", &[]).status.code(), Some(2));
    let case = Case::new("{}");
    assert_eq!(case.run("dubrovin", &[]).status.code(), Some(2));
}

#[test]
fn locus_command() {
    let case = Case::new(
        r#"{"potential": {"coefficients": {"1": 0.2, "-1": -0.05}}, "locus": {"start": [0.25, 0.05]},
            "window": {"re_min": 0, "re_max": 0.5, "im_min": -0.3, "im_max": 0.3}}"#,
    );
    let o = case.run("locus", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let arcs = &case.json("locus.json")["results"];
    assert_eq!(arcs[0]["start"]["kind"], "branch_point");
    assert_eq!(arcs[0]["end"]["kind"], "branch_point");
    assert!(case.csv("locus.csv").len() > 10);
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn embedded_config_reproduces_the_outputs() {
    let case = Case::new(COS);
    assert!(case.run("resonance", &["--tol", "1e-9"]).status.success());
    let first = snapshot(&case.out());
    let embedded = &case.json("resonance.json")["config"];
    assert_eq!(embedded["tolerances"]["integrator"], 1e-9);

    let replay = case.dir.path().join("replay.json");
    fs::write(&replay, serde_json::to_string(embedded).unwrap()).unwrap();
    let o = ptbloch(&["resonance", "--config", replay.to_str().unwrap(), "--jobs", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(snapshot(&case.out()), first);
}
