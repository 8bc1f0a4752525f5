//! Pass/fail reports shared by the lemma suite and the plan checker.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Number of cases enumerated.
    pub cases: usize,
    /// First counterexample met, if any.
    pub witness: Option<String>,
}

impl Check {
    /// Folds per-case outcomes (`Err` carries a witness) into one check.
    pub fn from_outcomes<I>(name: &'static str, outcomes: I) -> Self
    where
        I: IntoIterator<Item = Result<(), String>>,
    {
        let mut cases = 0;
        let mut witness = None;
        for r in outcomes {
            cases += 1;
            if let (Err(w), None) = (r, &witness) {
                witness = Some(w);
            }
        }
        Self {
            name,
            passed: witness.is_none(),
            cases,
            witness,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "pass" } else { "FAIL" };
        write!(f, "{status} {} ({} cases)", self.name, self.cases)?;
        if let Some(w) = &self.witness {
            write!(f, ": {w}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}
