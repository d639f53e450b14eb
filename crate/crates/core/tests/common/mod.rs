#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn senseaug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_senseaug"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Unbiased MMD^2 with the cubic polynomial kernel, written as plain loops.
pub fn mmd_oracle(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let d = x[0].len() as f64;
    let k = |a: &[f64], b: &[f64]| {
        let mut dot = 0.0;
        for i in 0..a.len() {
            dot += a[i] * b[i];
        }
        (dot / d + 1.0).powi(3)
    };
    let (m, n) = (x.len() as f64, y.len() as f64);
    let mut xx = 0.0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            if i != j {
                xx += k(&x[i], &x[j]);
            }
        }
    }
    let mut yy = 0.0;
    for i in 0..y.len() {
        for j in 0..y.len() {
            if i != j {
                yy += k(&y[i], &y[j]);
            }
        }
    }
    let mut xy = 0.0;
    for a in x {
        for b in y {
            xy += k(a, b);
        }
    }
    xx / (m * (m - 1.0)) + yy / (n * (n - 1.0)) - 2.0 * xy / (m * n)
}

pub fn read_features(path: &std::path::Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect()
}

/// One row of the published reference-levels table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRow {
    pub kind: String,
    pub method: String,
    pub unit: String,
    pub levels: [f64; 5],
}

pub fn load_reference_levels() -> Result<Vec<ReferenceRow>, String> {
    let text =
        std::fs::read_to_string(fixture("reference_levels.csv")).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    if lines.next() != Some("kind,method,unit,p1,p2,p3,p4,p5") {
        return Err("unexpected header".into());
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 8 {
                return Err(format!("bad row {l:?}"));
            }
            let mut levels = [0.0; 5];
            for (slot, v) in levels.iter_mut().zip(&f[3..]) {
                *slot = v.parse().map_err(|e| format!("{l:?}: {e}"))?;
            }
            Ok(ReferenceRow {
                kind: f[0].into(),
                method: f[1].into(),
                unit: f[2].into(),
                levels,
            })
        })
        .collect()
}

/// Structural checks: known kinds, both methods per kind, strictly
/// increasing levels ending at the kind's maximum, odd blur kernels.
pub fn check_reference_levels(rows: &[ReferenceRow]) -> Result<(), String> {
    use senseaug::augment::AugmentationKind;
    if rows.len() != 28 {
        return Err(format!("expected 28 rows, got {}", rows.len()));
    }
    for pair in rows.chunks(2) {
        if pair[0].kind != pair[1].kind
            || pair[0].method != "baseline"
            || pair[1].method != "adaptive"
        {
            return Err(format!(
                "rows for {} are not a baseline/adaptive pair",
                pair[0].kind
            ));
        }
    }
    for r in rows {
        r.kind
            .parse::<AugmentationKind>()
            .map_err(|e| e.to_string())?;
        let max = match r.unit.as_str() {
            "alpha" => 1.0,
            "kernel_size" => 49.0,
            "sigma" => 50.0,
            other => return Err(format!("unknown unit {other}")),
        };
        if r.levels[4] != max {
            return Err(format!(
                "{} {}: p5 = {} (expected {max})",
                r.kind, r.method, r.levels[4]
            ));
        }
        if !(r.levels[0] > 0.0 && r.levels.windows(2).all(|w| w[0] < w[1])) {
            return Err(format!(
                "{} {}: levels not strictly increasing",
                r.kind, r.method
            ));
        }
        if r.unit == "kernel_size"
            && r.levels
                .iter()
                .any(|k| k.fract() != 0.0 || (*k as u64).is_multiple_of(2))
        {
            return Err(format!(
                "{} {}: kernel sizes must be odd integers",
                r.kind, r.method
            ));
        }
    }
    Ok(())
}
