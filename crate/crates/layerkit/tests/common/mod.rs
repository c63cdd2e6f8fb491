#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use layerkit::dataio::{layers_csv, pgm};
use layerkit_core::{LayerId, LayerMap, Radargram};

/// Layer ids of the worked example; layer 12 is the incomplete one.
pub const EXAMPLE_IDS: [LayerId; 15] = [2, 3, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 18, 19, 20];
pub const EXAMPLE_SETS: [&[LayerId]; 4] =
    [&[2, 3], &[5, 6, 7, 8, 9, 10, 11], &[13, 14], &[18, 19, 20]];

pub fn run(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    run_env(args, &[])
}

pub fn run_env(args: &[&dyn AsRef<std::ffi::OsStr>], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_layerkit"));
    for a in args {
        cmd.arg(a.as_ref());
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("layerkit binary runs")
}

/// Runs and asserts success, echoing standard error on failure.
pub fn ok(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "layerkit failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// A 100x16 radargram annotated with the example's ids, layer 12 missing at
/// one column. Rows undulate gently but never cross.
pub fn worked_example() -> (Radargram, LayerMap) {
    let (height, width) = (100, 16);
    let mut m = LayerMap::new(width).unwrap();
    for (i, &id) in EXAMPLE_IDS.iter().enumerate() {
        let rows: Vec<Option<u32>> = (0..width)
            .map(|c| {
                if id == 12 && c == 7 {
                    None
                } else {
                    Some(6 + 6 * i as u32 + (c % 3) as u32)
                }
            })
            .collect();
        m.insert(id, rows).unwrap();
    }
    let pixels = (0..height * width).map(|i| (i * 37 % 251) as u8).collect();
    (Radargram::new(height, width, pixels).unwrap(), m)
}

pub fn write_worked_example(dir: &Path) -> (PathBuf, PathBuf) {
    let (image, layers) = worked_example();
    let image_path = dir.join("example.pgm");
    let layers_path = dir.join("example_layers.csv");
    pgm::write_radargram(&image_path, &image).unwrap();
    layers_csv::write(&layers_path, &layers).unwrap();
    (image_path, layers_path)
}

/// Sorted file names in `dir`.
pub fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

/// Every file in `dir` with its contents, sorted by name.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    listing(dir)
        .into_iter()
        .map(|n| {
            let bytes = std::fs::read(dir.join(&n)).unwrap();
            (n, bytes)
        })
        .collect()
}
