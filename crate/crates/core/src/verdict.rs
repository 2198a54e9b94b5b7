use serde::{Deserialize, Serialize};

use crate::epsilon::{GrowthClass, GrowthKind};

/// Outcome of a finite-sample decision rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Fails,
    Ambiguous,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }

    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Ambiguous => "ambiguous",
        }
    }

    /// Judges a growth fit against a set of admissible classes. An ambiguous
    /// fit still decides when its runner-up lands on the same side.
    pub fn from_growth(growth: &GrowthClass, admissible: impl Fn(GrowthKind) -> bool) -> Self {
        let first = admissible(growth.class);
        if !growth.ambiguous {
            return Verdict::from_bool(first);
        }
        match &growth.runner_up {
            Some(r) if admissible(r.class) == first => Verdict::from_bool(first),
            Some(_) => Verdict::Ambiguous,
            None => Verdict::from_bool(first),
        }
    }
}
