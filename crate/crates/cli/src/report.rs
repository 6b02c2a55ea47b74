//! Report envelope written to `report.json`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::RunEcho;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Certified,
    Refuted,
    Inconclusive,
    Completed,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Certified | Outcome::Completed => 0,
            Outcome::Inconclusive => 2,
            Outcome::Refuted => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

impl Default for Tool {
    fn default() -> Self {
        Self { name: "pbcert", version: env!("CARGO_PKG_VERSION") }
    }
}

/// Witness data shared by the three hypotheses when the frequency theorem applies.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HypothesisWitness {
    pub nu: f64,
    pub j: usize,
    /// Margin of the frequency inequality that passed.
    pub margin: f64,
    pub condition: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisEntry {
    pub status: &'static str,
    pub witness: HypothesisWitness,
}

/// `H1`, `H2` and `H3`, present only when a frequency condition passed and
/// the dichotomy count equals `j`.
pub type HypothesisLedger = BTreeMap<&'static str, HypothesisEntry>;

pub fn certified_ledger(witness: HypothesisWitness) -> HypothesisLedger {
    ["H1", "H2", "H3"]
        .into_iter()
        .map(|h| (h, HypothesisEntry { status: "certified-by-frequency-theorem", witness }))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Report<R: Serialize> {
    pub tool: Tool,
    pub command: &'static str,
    pub config: RunEcho,
    pub outcome: Outcome,
    pub exit_code: i32,
    pub result: R,
}

impl<R: Serialize> Report<R> {
    pub fn new(command: &'static str, config: RunEcho, outcome: Outcome, result: R) -> Self {
        Self { tool: Tool::default(), command, config, outcome, exit_code: outcome.exit_code(), result }
    }
}
