use std::fmt::Write as _;

use serde::Serialize;

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    /// A failed mandatory check fails the suite.
    pub mandatory: bool,
    pub passed: bool,
    pub metrics: Vec<(String, f64)>,
    pub note: String,
}

impl CheckResult {
    pub fn new(name: &str, mandatory: bool) -> Self {
        Self { name: name.into(), mandatory, passed: true, metrics: Vec::new(), note: String::new() }
    }

    pub fn metric(&mut self, key: &str, value: f64) -> &mut Self {
        self.metrics.push((key.into(), value));
        self
    }

    /// Record a condition; the check fails if any condition fails.
    pub fn require(&mut self, ok: bool, what: &str) -> &mut Self {
        if !ok {
            self.passed = false;
            if !self.note.is_empty() {
                self.note.push_str("; ");
            }
            self.note.push_str(what);
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub field: String,
    pub dim: usize,
    pub eta: f64,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    /// Wall-clock seconds per check; kept out of the text and CSV renderings
    /// so that reruns produce identical bytes.
    pub runtimes: Vec<(String, f64)>,
}

fn num(v: f64) -> String {
    format!("{v:.6e}")
}

impl VerifyReport {
    /// Every mandatory check passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.mandatory)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "field = {} (d = {})", self.field, self.dim);
        let _ = writeln!(s, "eta = {}", self.eta);
        let _ = writeln!(s, "seed = {}", self.seed);
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            let kind = if c.mandatory { "mandatory" } else { "informational" };
            let _ = writeln!(s, "\n[{status}] {} ({kind})", c.name);
            for (k, v) in &c.metrics {
                let _ = writeln!(s, "  {k} = {}", num(*v));
            }
            if !c.note.is_empty() {
                let _ = writeln!(s, "  note: {}", c.note);
            }
        }
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "\nsuite: {verdict}");
        s
    }

    /// Columns `check,mandatory,status,metric,value`; checks without
    /// metrics get one row with empty metric fields.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,mandatory,status,metric,value\n");
        for c in &self.checks {
            let status = if c.passed { "pass" } else { "fail" };
            if c.metrics.is_empty() {
                let _ = writeln!(s, "{},{},{},,", c.name, c.mandatory, status);
            }
            for (k, v) in &c.metrics {
                let _ = writeln!(s, "{},{},{},{},{}", c.name, c.mandatory, status, k, num(*v));
            }
        }
        s
    }

    pub fn runtimes_text(&self) -> String {
        self.runtimes.iter().map(|(k, v)| format!("{k} {v:.3}\n")).collect()
    }
}
