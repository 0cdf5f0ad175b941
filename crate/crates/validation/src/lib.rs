//! Pass/fail bookkeeping for the acceptance run.

use std::time::Instant;

/// Verdict for one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

/// Collects verdicts and prints one line per criterion as it finishes.
#[derive(Debug, Default)]
pub struct Scoreboard {
    results: Vec<(String, bool)>,
}

impl Scoreboard {
    /// Runs `f`, printing `criterion <id>: PASS|FAIL ...`. An `Err` counts as a failure.
    pub fn run<F>(&mut self, id: &str, f: F)
    where
        F: FnOnce() -> Result<Verdict, String>,
    {
        let start = Instant::now();
        let v = f().unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        println!("criterion {id}: {} ({}) [{secs:.2} s]", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        self.results.push((id.to_string(), v.pass));
    }

    pub fn failed(&self) -> Vec<&str> {
        self.results.iter().filter(|(_, p)| !p).map(|(id, _)| id.as_str()).collect()
    }
}
