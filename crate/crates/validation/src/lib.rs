//! Oracles computed independently of the library, plus an in-process driver
//! for the `inexact` command line.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

/// `erfc(x)` as `1 - 2/sqrt(pi) * int_0^x exp(-u^2) du`, by composite Simpson
/// quadrature with `intervals` (even) panels.
pub fn erfc_by_quadrature(x: f64, intervals: usize) -> f64 {
    assert!(intervals > 0 && intervals % 2 == 0, "Simpson's rule needs an even panel count");
    let h = x / intervals as f64;
    let f = |u: f64| (-u * u).exp();
    let mut sum = f(0.0) + f(x);
    for i in 1..intervals {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * f(i as f64 * h);
    }
    1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum * h / 3.0
}

/// Data rows of a CSV artifact, skipping the provenance comment and the header.
pub fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

/// Runs the command line in-process with its output redirected into `dir`.
pub struct Cli {
    dir: PathBuf,
    runs: AtomicUsize,
}

impl Cli {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), runs: AtomicUsize::new(0) }
    }

    /// Runs `inexact <args> --output <fresh file>` and returns the file's bytes,
    /// or the exit status on failure.
    pub fn run(&self, args: &[&str]) -> Result<Vec<u8>, String> {
        let path = self.dir.join(format!("run-{}", self.runs.fetch_add(1, Ordering::Relaxed)));
        let path_arg = path.to_str().ok_or("temporary path is not UTF-8")?.to_string();
        let argv = std::iter::once("inexact").chain(args.iter().copied()).chain(["--output", &path_arg]);
        match inexact_cli::main_with(argv) {
            0 => std::fs::read(&path).map_err(|e| e.to_string()),
            code => Err(format!("inexact {} exited with status {code}", args.join(" "))),
        }
    }

    pub fn run_text(&self, args: &[&str]) -> Result<String, String> {
        String::from_utf8(self.run(args)?).map_err(|e| e.to_string())
    }
}
