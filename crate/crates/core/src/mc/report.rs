//! Check records and verdicts.
//!
//! A record's verdict is recomputed from its own fields by [`Rule::evaluate`],
//! so a serialized report can be re-judged without rerunning the simulation.

use serde::Serialize;

use super::stats::Estimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// How a record's estimate is judged against its reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rule {
    /// Reported only; always passes.
    Informational,
    /// `estimate + k * stderr <= reference`.
    AtMost { k: f64 },
    /// `estimate + k * stderr < reference`.
    Below { k: f64 },
    /// `estimate - k * stderr > reference`.
    Above { k: f64 },
    /// `|estimate - reference| <= k * stderr`; inconclusive when `k * stderr > max_half_width`.
    WithinSe { k: f64, max_half_width: f64 },
    /// Zero observed events, so the upper confidence bound is `k / sqrt(n)`;
    /// inconclusive when that bound exceeds `max_width`.
    ConsistentWithZero { k: f64, max_width: f64 },
    /// `estimate > k * stderr` and `estimate > k / sqrt(n)`; inconclusive when
    /// positive but not significant.
    Significant { k: f64 },
    /// `lo <= estimate <= hi`.
    Interval { lo: f64, hi: f64 },
}

impl Rule {
    pub fn evaluate(
        &self,
        estimate: f64,
        stderr: f64,
        n: usize,
        reference: Option<f64>,
    ) -> Verdict {
        use Verdict::*;
        let judge = |ok: bool| if ok { Pass } else { Fail };
        let r = reference.unwrap_or(0.0);
        if !matches!(self, Rule::Informational) && !(estimate.is_finite() && stderr.is_finite()) {
            return Fail;
        }
        match *self {
            Rule::Informational => Pass,
            Rule::AtMost { k } => judge(estimate + k * stderr <= r),
            Rule::Below { k } => judge(estimate + k * stderr < r),
            Rule::Above { k } => judge(estimate - k * stderr > r),
            Rule::WithinSe { k, max_half_width } => {
                if k * stderr > max_half_width {
                    Inconclusive
                } else {
                    judge((estimate - r).abs() <= k * stderr)
                }
            }
            Rule::ConsistentWithZero { k, max_width } => {
                let width = k / (n.max(1) as f64).sqrt();
                if estimate > 0.0 {
                    Fail
                } else if width > max_width {
                    Inconclusive
                } else {
                    Pass
                }
            }
            Rule::Significant { k } => {
                let floor = k / (n.max(1) as f64).sqrt();
                if estimate > k * stderr && estimate > floor {
                    Pass
                } else if estimate > 0.0 {
                    Inconclusive
                } else {
                    Fail
                }
            }
            Rule::Interval { lo, hi } => judge(lo <= estimate && estimate <= hi),
        }
    }
}

/// Whether a record must pass on its own or belongs to the check's any-of group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Required,
    AnyOf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub estimate: f64,
    pub stderr: f64,
    pub n: usize,
    pub reference: Option<f64>,
    pub rule: Rule,
    pub role: Role,
    pub verdict: Verdict,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, e: Estimate, reference: Option<f64>, rule: Rule) -> Self {
        Self {
            name: name.into(),
            estimate: e.estimate,
            stderr: e.stderr,
            n: e.n,
            reference,
            rule,
            role: Role::Required,
            verdict: rule.evaluate(e.estimate, e.stderr, e.n, reference),
        }
    }

    pub fn any_of(mut self) -> Self {
        self.role = Role::AnyOf;
        self
    }

    /// Re-evaluates the rule on the recorded fields.
    pub fn recompute(&self) -> Verdict {
        self.rule
            .evaluate(self.estimate, self.stderr, self.n, self.reference)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub verdict: Verdict,
    pub records: Vec<CheckRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Precondition that stopped the check from running.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refused: Option<String>,
}

/// Required records must all pass; if any-of records exist, at least one must pass.
/// A failure anywhere dominates an inconclusive result.
pub fn combine(records: &[CheckRecord]) -> Verdict {
    let required: Vec<Verdict> = records
        .iter()
        .filter(|r| r.role == Role::Required)
        .map(|r| r.verdict)
        .collect();
    let any_of: Vec<Verdict> = records
        .iter()
        .filter(|r| r.role == Role::AnyOf)
        .map(|r| r.verdict)
        .collect();
    let group = if any_of.is_empty() || any_of.contains(&Verdict::Pass) {
        Verdict::Pass
    } else if any_of.contains(&Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Fail
    };
    if required.contains(&Verdict::Fail) || group == Verdict::Fail {
        Verdict::Fail
    } else if required.contains(&Verdict::Inconclusive) || group == Verdict::Inconclusive {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    }
}

impl CheckReport {
    pub fn from_records(name: &str, records: Vec<CheckRecord>, note: Option<String>) -> Self {
        Self {
            name: name.to_string(),
            verdict: combine(&records),
            records,
            note,
            refused: None,
        }
    }

    pub fn refused(name: &str, reason: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            verdict: Verdict::Inconclusive,
            records: Vec::new(),
            note: None,
            refused: Some(reason.into()),
        }
    }

    pub fn record(&self, name: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name)
    }
}
