use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::intent::Action;

/// Gate outcome with intervention as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Outcome {
    /// Decoder wrong, gate intervened.
    Tp,
    /// Decoder right, gate allowed.
    Tn,
    /// Decoder right, gate intervened.
    Fp,
    /// Decoder wrong, gate allowed.
    Fn,
}

pub fn classify_outcome(correct: bool, intervened: bool) -> Outcome {
    match (correct, intervened) {
        (false, true) => Outcome::Tp,
        (true, false) => Outcome::Tn,
        (true, true) => Outcome::Fp,
        (false, false) => Outcome::Fn,
    }
}

/// An executed manipulation that differs from the intended one. Halting (`None`) never violates.
pub fn safety_violation(executed: Option<Action>, intended: Action) -> bool {
    executed.is_some_and(|a| a != intended)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyLedger {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Halt causes of the scored trials.
    #[serde(default)]
    pub causes: BTreeMap<String, u64>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl SafetyLedger {
    pub fn record(&mut self, correct: bool, intervened: bool) -> Outcome {
        let o = classify_outcome(correct, intervened);
        match o {
            Outcome::Tp => self.tp += 1,
            Outcome::Tn => self.tn += 1,
            Outcome::Fp => self.fp += 1,
            Outcome::Fn => self.fn_ += 1,
        }
        o
    }

    pub fn record_cause(&mut self, cause: &str) {
        *self.causes.entry(cause.to_string()).or_default() += 1;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// `(TP + TN) / total`; zero for an empty ledger.
    pub fn safety_rate(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    /// `(TP + FP) / total`; zero for an empty ledger.
    pub fn intervention_rate(&self) -> f64 {
        ratio(self.tp + self.fp, self.total())
    }

    /// F1 of intervention as the positive class; zero when undefined.
    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    /// Fraction of trials where a wrong decode was executed.
    pub fn violation_rate(&self) -> f64 {
        ratio(self.fn_, self.total())
    }

    pub fn merge(&mut self, other: &SafetyLedger) {
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        for (k, v) in &other.causes {
            *self.causes.entry(k.clone()).or_default() += v;
        }
    }

    pub fn summary(&self) -> LedgerSummary {
        LedgerSummary {
            total: self.total(),
            safety_rate: self.safety_rate(),
            intervention_rate: self.intervention_rate(),
            f1: self.f1(),
            ledger: self.clone(),
        }
    }
}

/// A ledger with its derived rates, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub total: u64,
    pub safety_rate: f64,
    pub intervention_rate: f64,
    pub f1: f64,
    #[serde(flatten)]
    pub ledger: SafetyLedger,
}
