#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Synthetic stand-in for a four-feature banknote-style table: features on
/// banknote-like ranges from an additive (Weyl) sequence, and two rule-based
/// "models" that agree on most of the space.
pub fn synthetic_banknote(n: usize) -> String {
    const STEPS: [f64; 4] = [0.618_033_988_7, 0.414_213_562_4, 0.732_050_807_6, 0.236_067_977_5];
    const RANGES: [(f64, f64); 4] = [(-7.0, 7.0), (-14.0, 13.0), (-5.0, 18.0), (-8.0, 2.5)];
    let mut s = String::from("variance,skewness,curtosis,entropy,m1,m2\n");
    for i in 0..n {
        let x: Vec<f64> = (0..4)
            .map(|j| {
                let u = ((i as f64 + 1.0) * STEPS[j]).fract();
                let (lo, hi) = RANGES[j];
                ((lo + u * (hi - lo)) * 1000.0).round() / 1000.0
            })
            .collect();
        let m1 = x[0] + 0.3 * x[1] < 0.5;
        let m2 = x[0] < 1.2 && (x[2] > -2.0 || x[1] < 3.0);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            x[0], x[1], x[2], x[3], if m1 { "forged" } else { "genuine" }, if m2 { "forged" } else { "genuine" }
        );
    }
    s
}

pub fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

pub fn jstdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jstdiff"))
        .args(args)
        .env_remove("JSTDIFF_LOG")
        .output()
        .expect("binary runs")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
