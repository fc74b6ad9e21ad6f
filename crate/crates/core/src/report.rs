//! Structured pass/fail records produced by every verifier.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Outcome of one named law. A failing law always carries the first witness
/// found in the deterministic sweep order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawResult {
    pub name: String,
    pub pass: bool,
    pub witness: Option<Value>,
    pub checked: u64,
}

/// Accumulates checks for one law, keeping the first failure.
#[derive(Clone, Debug)]
pub struct Law {
    name: String,
    witness: Option<Value>,
    checked: u64,
}

impl Law {
    pub fn new(name: impl Into<String>) -> Self {
        Law { name: name.into(), witness: None, checked: 0 }
    }

    #[inline]
    pub fn check(&mut self, ok: bool, witness: impl FnOnce() -> Value) -> bool {
        self.checked += 1;
        if !ok && self.witness.is_none() {
            self.witness = Some(witness());
        }
        ok
    }

    pub fn fail(&mut self, witness: Value) {
        self.checked += 1;
        if self.witness.is_none() {
            self.witness = Some(witness);
        }
    }

    pub fn failed(&self) -> bool {
        self.witness.is_some()
    }

    pub fn finish(self) -> LawResult {
        LawResult { name: self.name, pass: self.witness.is_none(), witness: self.witness, checked: self.checked }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Exhaustive,
    Spot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: String,
    pub pass: bool,
    pub mode: SweepMode,
    pub laws: Vec<LawResult>,
    pub counts: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new(suite: impl Into<String>) -> Self {
        VerificationReport {
            suite: suite.into(),
            pass: true,
            mode: SweepMode::Exhaustive,
            laws: Vec::new(),
            counts: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, law: Law) {
        let r = law.finish();
        self.pass &= r.pass;
        self.laws.push(r);
    }

    pub fn push_result(&mut self, name: impl Into<String>, pass: bool, witness: Option<Value>) {
        self.pass &= pass;
        self.laws.push(LawResult { name: name.into(), pass, witness, checked: 1 });
    }

    pub fn count(&mut self, key: impl Into<String>, n: u64) {
        *self.counts.entry(key.into()).or_insert(0) += n;
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn spot(&mut self) {
        self.mode = SweepMode::Spot;
    }

    /// Append another report's laws, prefixing their names.
    pub fn absorb(&mut self, prefix: &str, other: VerificationReport) {
        self.pass &= other.pass;
        if other.mode == SweepMode::Spot {
            self.mode = SweepMode::Spot;
        }
        for mut l in other.laws {
            l.name = format!("{prefix}{}", l.name);
            self.laws.push(l);
        }
        for (k, v) in other.counts {
            self.count(format!("{prefix}{k}"), v);
        }
        self.notes.extend(other.notes);
    }

    pub fn failed_laws(&self) -> Vec<&str> {
        self.laws.iter().filter(|l| !l.pass).map(|l| l.name.as_str()).collect()
    }

    pub fn law(&self, name: &str) -> Option<&LawResult> {
        self.laws.iter().find(|l| l.name == name)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}: {}", self.suite, if self.pass { "PASS" } else { "FAIL" })?;
        for l in &self.laws {
            write!(f, "  [{}] {} ({} checks)", if l.pass { "ok" } else { "FAIL" }, l.name, l.checked)?;
            if let Some(w) = &l.witness {
                write!(f, " witness={w}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
