use std::ffi::OsStr;
use std::path::Path;
use std::process::{Command, Output};

use salience::io;

fn salience<S: AsRef<OsStr>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_salience"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small synthetic dataset shared by the tests below.
fn synthesize(dir: &Path, seed: &str) {
    let o = salience(&[
        "synthesize", "--out-dir", p(dir), "--trials", "1500", "--subjects", "6", "--images", "8",
        "--maps", "6", "--voxels", "60", "--map-size", "40", "--seed", seed,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = salience(&["fit", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(salience(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(salience(&["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_trials_are_a_data_error_naming_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let trials = dir.path().join("t.csv");
    std::fs::write(
        &trials,
        format!("{}\n0,1,2,none,left,right_first\n0,1,2,none,left,up_first\n", io::TRIALS_HEADER),
    )
    .unwrap();
    let o = salience(&["fit", "--trials", p(&trials), "--out", p(&dir.path().join("m.txt"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("outcome"), "{err}");
}

#[test]
fn fit_rank_cv_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    synthesize(dir.path(), "4");
    let trials = dir.path().join("trials.csv");
    let model = dir.path().join("model.txt");

    let o = salience(&["fit", "--trials", p(&trials), "--c", "1.0", "--out", p(&model)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fitted = io::load_model(&model).unwrap();
    assert_eq!(fitted.w.len(), 8);
    assert_eq!(fitted.s.len(), 6);

    let o = salience(&["rank", "--model", p(&model)]);
    let text = stdout(&o);
    assert!(text.starts_with("rank,image_id,score\n1,"));
    assert_eq!(text.lines().count(), 9);

    let o = salience(&["cv", "--trials", p(&trials), "--folds", "3", "--grid", "0.1,1,10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("c,mean_accuracy\n0.1,"));
    assert!(text.contains("# best_c="));

    let report = dir.path().join("eval.csv");
    let o = salience(&["eval", "--trials", p(&trials), "--grid", "0.1,1", "--inner-folds", "2", "--out", p(&report)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("baseline"));
    let csv = std::fs::read_to_string(&report).unwrap();
    assert!(csv.starts_with("fold,split,auc,tjur_r2,accuracy\n"));
    // 6 subjects -> 3 outer folds, each with test, train and baseline rows
    assert_eq!(csv.lines().count(), 1 + 9);
}

#[test]
fn cv_with_more_folds_than_subjects_fails() {
    let dir = tempfile::tempdir().unwrap();
    synthesize(dir.path(), "5");
    let o = salience(&["cv", "--trials", p(&dir.path().join("trials.csv")), "--folds", "9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fixation_map_commands() {
    let dir = tempfile::tempdir().unwrap();
    synthesize(dir.path(), "6");
    let fixations = dir.path().join("fixations.csv");
    let (a, b) = (dir.path().join("a.grid"), dir.path().join("b.grid"));
    for (image, out) in [("0", &a), ("1", &b)] {
        let o = salience(&[
            "density", "--fixations", p(&fixations), "--image", image, "--width", "20", "--height", "15",
            "--out", p(out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("first_fixations="));
        let g = io::load_grid(out).unwrap();
        assert!((g.sum() - 1.0).abs() < 1e-12);
    }

    let o = salience(&["kld", "--fixation-map", p(&a), "--salience-map", p(&a)]);
    let same: f64 = stdout(&o).trim().parse().unwrap();
    assert!(same.abs() <= 1e-6);
    let o = salience(&["kld", "--fixation-map", p(&a), "--salience-map", p(&b)]);
    let cross: f64 = stdout(&o).trim().parse().unwrap();
    assert!(cross > 0.0);

    let o = salience(&["mass", "--map", p(&a), "--left", "0,0,10,15", "--right", "10,0,20,15"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("m_left="));
    let o = salience(&["mass", "--map", p(&a), "--left", "0,0,12,15", "--right", "10,0,20,15"]);
    assert_eq!(o.status.code(), Some(1));
    let o = salience(&["mass", "--map", p(&a), "--left", "0,0,10", "--right", "10,0,20,15"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn negative_salience_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("neg.grid");
    std::fs::write(&g, "GRID 2 2 1.0\n0.5 0.5\n-0.1 0.1\n").unwrap();
    let o = salience(&["kld", "--fixation-map", p(&g), "--salience-map", p(&g)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn contrast_and_bootstrap() {
    let dir = tempfile::tempdir().unwrap();
    synthesize(dir.path(), "7");
    let out = dir.path().join("contrast.grid");
    let o = salience(&[
        "contrast", "--luminance", p(&dir.path().join("maps/0.grid")), "--window-radius", "2", "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(io::load_grid(&out).unwrap().width, 40);
    let o = salience(&[
        "contrast", "--luminance", p(&dir.path().join("maps/0.grid")), "--window-radius", "30", "--out", p(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));

    let values = dir.path().join("values.csv");
    std::fs::write(&values, "id,diff\n0,0.5\n1,1.5\n2,-0.25\n3,0.75\n").unwrap();
    let run = || stdout(&salience(&["bootstrap", "--values", p(&values), "--column", "diff", "--seed", "9"]));
    let first = run();
    assert!(first.starts_with("n=4 mean=0.625"), "{first}");
    assert_eq!(first, run());
}

#[test]
fn prf_commands_and_reproducibility() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    synthesize(d1.path(), "8");
    synthesize(d2.path(), "8");
    for name in ["trials.csv", "voxels.csv", "measured.csv", "maps/3.grid"] {
        assert_eq!(
            std::fs::read(d1.path().join(name)).unwrap(),
            std::fs::read(d2.path().join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
    let f = |name: &str| d1.path().join(name).display().to_string();
    let common = |area: &str| vec![
        "--voxels".to_string(), f("voxels.csv"), "--maps".into(), f("maps"), "--area".into(), area.into(),
    ];
    let run = |head: &[String], area: &str| {
        let mut args = head.to_vec();
        args.extend(common(area));
        salience(&args)
    };

    let o = run(&["predict-profiles".into(), "--out".into(), f("pred.csv")], "V1");
    assert!(o.status.success(), "{}", stderr(&o));
    let table = io::load_measured(Path::new(&f("pred.csv")), Some(60)).unwrap();
    assert_eq!(table.image_ids, (0..6).collect::<Vec<_>>());

    let o = run(&["identify".into(), "--measured".into(), f("pred.csv"), "--out-dir".into(), f("id")], "V1");
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("accuracy=1.0"), "{}", stdout(&o));
    let corr = std::fs::read_to_string(f("id/correlation.csv")).unwrap();
    assert_eq!(corr.lines().count(), 7);
    assert!(corr.lines().nth(1).unwrap().starts_with("0,1.0,"));
    let conf = std::fs::read_to_string(f("id/confidence.csv")).unwrap();
    assert!(conf.starts_with("image_id,confidence,correct\n"));

    let o = run(&["rsa".into(), "--measured".into(), f("measured.csv"), "--out-dir".into(), f("rsa")], "V1");
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("kendall_tau="));
    assert!(Path::new(&f("rsa/predicted_rdm.csv")).is_file());

    let o = run(&["identify".into(), "--measured".into(), f("measured.csv"), "--out-dir".into(), f("none")], "LO12");
    assert_eq!(o.status.code(), Some(2));
}
