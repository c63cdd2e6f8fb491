//! End-to-end runs of the `layerkit` binary.

mod common;

use std::path::Path;

use common::{listing, ok, run, run_env, snapshot, write_worked_example, EXAMPLE_SETS};
use layerkit::dataio::manifest::{self, Split};
use layerkit::dataio::{layers_csv, pgm, report};

fn small_synth(out: &Path, seed: &str) {
    ok(&[
        &"synth",
        &"--out",
        &out,
        &"--count",
        &"6",
        &"--seed",
        &seed,
        &"--height",
        &"48",
        &"--width",
        &"32",
        &"--layers",
        &"3",
        &"--spacing",
        &"10",
        &"--dropout",
        &"0.3",
    ]);
}

#[test]
fn synth_writes_a_manifest_corpus() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), "4");
    let names = listing(dir.path());
    assert_eq!(names.len(), 6 * 3 + 1);
    assert!(names.contains(&"synth_0005_truth.csv".to_string()));
    let m = manifest::read(&dir.path().join("manifest.csv")).unwrap();
    assert_eq!(m.entries.len(), 6);
    assert_eq!(m.split(Split::Val).count(), 1);
    for e in &m.entries {
        let image = pgm::read_radargram(&e.image).unwrap();
        assert_eq!((image.height(), image.width()), (48, 32));
        assert_eq!(layers_csv::read(&e.layers).unwrap().width(), 32);
    }
}

#[test]
fn preprocess_worked_example_gives_four_crops() {
    let dir = tempfile::tempdir().unwrap();
    let (image, layers) = write_worked_example(dir.path());
    let out = dir.path().join("crops");
    ok(&[
        &"preprocess",
        &"--image",
        &image,
        &"--layers",
        &layers,
        &"--out",
        &out,
    ]);

    let m = manifest::read(&out.join("manifest.csv")).unwrap();
    assert_eq!(m.entries.len(), 4);
    for (k, (e, set)) in m.entries.iter().zip(EXAMPLE_SETS).enumerate() {
        assert_eq!(
            e.image.file_name().unwrap(),
            format!("example_crop{k}.pgm").as_str()
        );
        let ids: Vec<u8> = layers_csv::read(&e.layers).unwrap().ids().collect();
        assert_eq!(ids, set.to_vec());
        let labels = pgm::read_semantic(e.semantic.as_ref().unwrap()).unwrap();
        let crop = pgm::read_radargram(&e.image).unwrap();
        assert_eq!(
            (labels.height(), labels.width()),
            (crop.height(), crop.width())
        );
    }
}

#[test]
fn preprocess_then_layerize_reproduces_crop_layers() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), "11");
    let crops = dir.path().join("crops");
    let recovered = dir.path().join("recovered");
    ok(&[
        &"preprocess",
        &"--manifest",
        &dir.path().join("manifest.csv"),
        &"--out",
        &crops,
    ]);
    ok(&[
        &"layerize",
        &"--manifest",
        &crops.join("manifest.csv"),
        &"--out",
        &recovered,
    ]);

    let m = manifest::read(&crops.join("manifest.csv")).unwrap();
    assert!(!m.entries.is_empty());
    for e in &m.entries {
        let semantic = e.semantic.as_ref().unwrap();
        let stem = semantic.file_stem().unwrap().to_string_lossy();
        let back = std::fs::read(recovered.join(format!("{stem}.csv"))).unwrap();
        assert_eq!(
            back,
            std::fs::read(&e.layers).unwrap(),
            "{}",
            e.layers.display()
        );
    }
}

#[test]
fn evaluating_ground_truth_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let (image, layers) = write_worked_example(dir.path());
    let crops = dir.path().join("crops");
    ok(&[
        &"preprocess",
        &"--image",
        &image,
        &"--layers",
        &layers,
        &"--out",
        &crops,
    ]);

    let gt = crops.join("example_crop1_labels.pgm");
    let out = ok(&[&"evaluate", &"--pred", &gt, &"--gt", &gt]);
    let r = report::decode(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(r.summary.accuracy, 1.0);
    assert_eq!(r.summary.mean_iou, 1.0);
    assert_eq!(r.summary.thickness_mae_px, 0.0);
    assert_eq!(r.summary.k_classes_used, 8);
    assert!(r.per_image.is_none());

    let json = dir.path().join("report.json");
    ok(&[
        &"evaluate",
        &"--manifest",
        &crops.join("manifest.csv"),
        &"--pred-dir",
        &crops,
        &"--units",
        &"cm",
        &"--out",
        &json,
    ]);
    let r = report::read(&json).unwrap();
    assert_eq!(r.per_image.as_ref().unwrap().len(), 4);
    assert_eq!(r.thickness_mae_cm, Some(0.0));
    assert_eq!(r.summary.mean_iou, 1.0);
}

#[test]
fn evaluate_filters_can_exclude_everything() {
    let dir = tempfile::tempdir().unwrap();
    let (image, layers) = write_worked_example(dir.path());
    let crops = dir.path().join("crops");
    ok(&[
        &"preprocess",
        &"--image",
        &image,
        &"--layers",
        &layers,
        &"--out",
        &crops,
    ]);
    let gt = crops.join("example_crop0_labels.pgm");
    let out = run(&[
        &"evaluate",
        &"--pred",
        &gt,
        &"--gt",
        &gt,
        &"--min-layers",
        &"2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no image passes"));
}

fn schedule_rows(steps: &str) -> Vec<Vec<f64>> {
    let out = ok(&[&"schedule", &"--policy", &"onecycle", &"--steps", &steps]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,fraction,lr,momentum"));
    lines
        .map(|l| {
            assert!(!l.contains('e'), "decimal notation: {l}");
            l.split(',').map(|f| f.parse().unwrap()).collect()
        })
        .collect()
}

#[test]
fn onecycle_schedule_peaks_at_thirty_percent() {
    // 201 steps put a row exactly on fraction 0.3.
    let rows = schedule_rows("201");
    let peak = rows.iter().find(|r| r[1] == 0.3).expect("row at 0.3");
    assert!((peak[2] - 0.01).abs() < 1e-12);
    assert!((peak[3] - 0.8).abs() < 1e-12);

    // With 200 steps the nearest row is step 60 of 199.
    let rows = schedule_rows("200");
    assert_eq!(rows.len(), 200);
    let best = rows
        .iter()
        .max_by(|a, b| a[2].partial_cmp(&b[2]).unwrap())
        .unwrap();
    assert_eq!(best[0], 60.0);
    assert!((best[1] - 0.3).abs() < 1.0 / 199.0);
    assert!((best[2] - 0.01).abs() < 5e-5);
}

#[test]
fn train_predict_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), "21");
    let crops = dir.path().join("crops");
    ok(&[
        &"preprocess",
        &"--manifest",
        &dir.path().join("manifest.csv"),
        &"--out",
        &crops,
    ]);

    let train = |name: &str| {
        let w = dir.path().join(name);
        let h = dir.path().join(format!("{name}.history.csv"));
        ok(&[
            &"train",
            &"--manifest",
            &crops.join("manifest.csv"),
            &"--out",
            &w,
            &"--history",
            &h,
            &"--epochs",
            &"2",
            &"--batch-size",
            &"2",
            &"--seed",
            &"5",
            &"--num-classes",
            &"8",
        ]);
        (
            std::fs::read(w).unwrap(),
            std::fs::read_to_string(h).unwrap(),
        )
    };
    let (w1, h1) = train("a.tseg");
    let (w2, h2) = train("b.tseg");
    assert_eq!(w1, w2, "training is deterministic");
    assert_eq!(h1, h2);
    assert!(h1.starts_with("step,loss\n"));

    let preds = dir.path().join("preds");
    ok(&[
        &"predict",
        &"--weights",
        &dir.path().join("a.tseg"),
        &"--manifest",
        &crops.join("manifest.csv"),
        &"--out",
        &preds,
    ]);
    let json = dir.path().join("report.json");
    ok(&[
        &"evaluate",
        &"--manifest",
        &crops.join("manifest.csv"),
        &"--pred-dir",
        &preds,
        &"--split",
        &"train",
        &"--out",
        &json,
    ]);
    let r = report::read(&json).unwrap();
    let train_crops = manifest::read(&crops.join("manifest.csv"))
        .unwrap()
        .split(Split::Train)
        .count();
    assert_eq!(r.per_image.unwrap().len(), train_crops);
    assert!((0.0..=1.0).contains(&r.summary.accuracy));
}

#[test]
fn classes_beyond_the_network_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (image, layers) = write_worked_example(dir.path());
    let crops = dir.path().join("crops");
    ok(&[
        &"preprocess",
        &"--image",
        &image,
        &"--layers",
        &layers,
        &"--out",
        &crops,
    ]);
    let out = run(&[
        &"train",
        &"--manifest",
        &crops.join("manifest.csv"),
        &"--out",
        &dir.path().join("w"),
        &"--num-classes",
        &"4",
        &"--epochs",
        &"1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn plot_data_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let (image, layers) = write_worked_example(dir.path());
    let crops = dir.path().join("crops");
    ok(&[
        &"preprocess",
        &"--image",
        &image,
        &"--layers",
        &layers,
        &"--out",
        &crops,
    ]);

    let p = dir.path().join("plots/sched");
    ok(&[
        &"plot-data",
        &"schedule",
        &"--policy",
        &"onecycle",
        &"--steps",
        &"11",
        &"--out-prefix",
        &p,
    ]);
    let csv = std::fs::read_to_string(dir.path().join("plots/sched.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
    assert!(std::fs::read_to_string(dir.path().join("plots/sched.svg"))
        .unwrap()
        .starts_with("<svg"));

    let p = dir.path().join("thick");
    let labels = crops.join("example_crop3_labels.pgm");
    ok(&[
        &"plot-data",
        &"thickness-per-layer",
        &"--semantic",
        &labels,
        &"--out-prefix",
        &p,
    ]);
    let csv = std::fs::read_to_string(dir.path().join("thick.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("layer_id,thickness_px,pixel_count")
    );
    assert_eq!(csv.lines().count(), 4);

    let p = dir.path().join("overlay");
    let crop_layers = crops.join("example_crop0_layers.csv");
    ok(&[
        &"plot-data",
        &"layer-overlay",
        &"--layers",
        &crop_layers,
        &"--out-prefix",
        &p,
    ]);
    let csv = std::fs::read_to_string(dir.path().join("overlay.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 16);

    let out = run(&[&"plot-data", &"layer-overlay", &"--out-prefix", &p]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn thickness_in_both_units() {
    let dir = tempfile::tempdir().unwrap();
    let (image, layers) = write_worked_example(dir.path());
    let crops = dir.path().join("crops");
    ok(&[
        &"preprocess",
        &"--image",
        &image,
        &"--layers",
        &layers,
        &"--out",
        &crops,
    ]);
    let labels = crops.join("example_crop0_labels.pgm");
    let px = String::from_utf8(ok(&[&"thickness", &"--semantic", &labels]).stdout).unwrap();
    let cm =
        String::from_utf8(ok(&[&"thickness", &"--semantic", &labels, &"--units", &"cm"]).stdout)
            .unwrap();
    assert_eq!(px.lines().next(), Some("layer_id,thickness_px"));
    assert_eq!(cm.lines().next(), Some("layer_id,thickness_cm"));
    for (a, b) in px.lines().skip(1).zip(cm.lines().skip(1)) {
        let a: f64 = a.split(',').nth(1).unwrap().parse().unwrap();
        let b: f64 = b.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(a * 4.0, b);
    }
    let corpus =
        String::from_utf8(ok(&[&"thickness", &"--manifest", &crops.join("manifest.csv")]).stdout)
            .unwrap();
    assert_eq!(corpus.lines().next(), Some("image,layer_id,thickness_px"));
    assert_eq!(corpus.lines().count(), 1 + 2 + 7 + 2 + 3);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    small_synth(&a, "3");
    let out = run_env(
        &[
            &"synth",
            &"--out",
            &b,
            &"--count",
            &"6",
            &"--seed",
            &"3",
            &"--height",
            &"48",
            &"--width",
            &"32",
            &"--layers",
            &"3",
            &"--spacing",
            &"10",
            &"--dropout",
            &"0.3",
        ],
        &[("LAYERKIT_THREADS", "1")],
    );
    assert!(out.status.success());
    assert_eq!(snapshot(&a), snapshot(&b));

    ok(&[
        &"preprocess",
        &"--manifest",
        &a.join("manifest.csv"),
        &"--out",
        &a.join("crops"),
    ]);
    ok(&[
        &"preprocess",
        &"--manifest",
        &b.join("manifest.csv"),
        &"--out",
        &b.join("crops"),
    ]);
    assert_eq!(snapshot(&a.join("crops")), snapshot(&b.join("crops")));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&[&"--help"]).status.code(), Some(0));
    assert_eq!(run(&[&"--version"]).status.code(), Some(0));
    assert_eq!(run(&[&"evaluate", &"--help"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&[&"synth"]).status.code(), Some(1));
    assert_eq!(
        run(&[&"preprocess", &"--out", &dir.path()]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&[&"evaluate", &"--pred-dir", &dir.path()])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&[&"schedule", &"--policy", &"cyclic"]).status.code(),
        Some(1)
    );
    let bad_threads = run_env(&[&"schedule"], &[("LAYERKIT_THREADS", "many")]);
    assert_eq!(bad_threads.status.code(), Some(1));
    let zero_threads = run_env(&[&"schedule"], &[("LAYERKIT_THREADS", "0")]);
    assert_eq!(zero_threads.status.code(), Some(0));

    let corrupt = dir.path().join("corrupt.pgm");
    std::fs::write(&corrupt, b"P5\n4 4\n65535\n").unwrap();
    let out = run(&[
        &"layerize",
        &"--semantic",
        &corrupt,
        &"--out",
        &dir.path().join("x.csv"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("byte 7") && msg.contains("65535"), "{msg}");

    let (image, _) = write_worked_example(dir.path());
    let bad_csv = dir.path().join("bad.csv");
    std::fs::write(&bad_csv, "layer_id,col,row\n# width=16\n3,0,5\n2,0,9\n").unwrap();
    let out = run(&[
        &"preprocess",
        &"--image",
        &image,
        &"--layers",
        &bad_csv,
        &"--out",
        &dir.path(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}
