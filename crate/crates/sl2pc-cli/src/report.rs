//! One-JSON-object-per-line verification reports.

use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub suite: String,
    pub id: String,
    pub anchor: String,
    pub status: Status,
    pub value: Value,
    pub tolerance: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub summary: bool,
    pub suites: Vec<String>,
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub records: Vec<CheckRecord>,
    pub summary: Summary,
}

impl VerificationReport {
    pub fn new(suites: Vec<String>, mut records: Vec<CheckRecord>, config_hash: String, seed: u64) -> Self {
        records.sort_by(|a, b| (&a.suite, &a.id).cmp(&(&b.suite, &b.id)));
        let count = |s: Status| records.iter().filter(|r| r.status == s).count();
        let summary = Summary {
            summary: true,
            suites,
            checks: records.len(),
            passed: count(Status::Pass),
            failed: count(Status::Fail),
            skipped: count(Status::Skip),
            config_hash,
            seed,
        };
        VerificationReport { records, summary }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&self.summary).expect("summary serializes"));
        out.push('\n');
        out
    }

    /// Human-readable table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let tag = match r.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skip => "SKIP",
            };
            out.push_str(&format!("{tag}  {}/{}  value={} tol={}", r.suite, r.id, r.value, r.tolerance));
            if let Some(n) = &r.note {
                out.push_str(&format!("  ({n})"));
            }
            if let Some(ms) = r.runtime_ms {
                out.push_str(&format!("  {ms:.1} ms"));
            }
            out.push('\n');
        }
        let s = &self.summary;
        out.push_str(&format!(
            "{} checks: {} passed, {} failed, {} skipped (config {}, seed {})\n",
            s.checks, s.passed, s.failed, s.skipped, s.config_hash, s.seed
        ));
        out
    }
}
