//! Which inputs reach a compartment's conditional, and which unlock it.

use serde::{Deserialize, Serialize};

use crate::compartments::{Compartment, CompartmentReport};
use crate::coverage::InputCoverage;

fn reaches_conditional(c: &Compartment, input: &InputCoverage) -> bool {
    c.conditional_block()
        .is_some_and(|cond| input.covers(&c.function, cond))
}

fn unlocks_entry(c: &Compartment, input: &InputCoverage) -> bool {
    input.covers(&c.function, &c.entry_block)
}

/// Fills the Input and Solution columns with the first corpus input (in
/// corpus order) covering the conditional and the entry block respectively.
pub fn attribute_corpus(report: &CompartmentReport, corpus: &[InputCoverage]) -> CompartmentReport {
    let mut out = report.clone();
    let first = |c: &Compartment, pred: fn(&Compartment, &InputCoverage) -> bool| {
        corpus.iter().find(|i| pred(c, i)).map(|i| i.input.clone())
    };
    for c in &mut out.entries {
        c.input = first(c, reaches_conditional).unwrap_or_default();
        c.solution = first(c, unlocks_entry).unwrap_or_default();
    }
    // Retired compartments keep the candidate that unlocked them unless the
    // corpus already holds a solution.
    for c in &mut out.retired {
        c.input = first(c, reaches_conditional).unwrap_or_default();
        if let Some(s) = first(c, unlocks_entry) {
            c.solution = s;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompartmentEvaluation {
    pub compartment: String,
    pub reaches_conditional: bool,
    pub unlocks_entry: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateEvaluation {
    pub input: String,
    pub compartments: Vec<CompartmentEvaluation>,
}

impl CandidateEvaluation {
    pub fn unlocked(&self) -> impl Iterator<Item = &str> {
        self.compartments
            .iter()
            .filter(|e| e.unlocks_entry)
            .map(|e| e.compartment.as_str())
    }
}

/// Evaluates one candidate against every locked compartment, in rank order.
pub fn evaluate_candidate(report: &CompartmentReport, candidate: &InputCoverage) -> CandidateEvaluation {
    CandidateEvaluation {
        input: candidate.input.clone(),
        compartments: report
            .entries
            .iter()
            .map(|c| CompartmentEvaluation {
                compartment: c.id(),
                reaches_conditional: reaches_conditional(c, candidate),
                unlocks_entry: unlocks_entry(c, candidate),
            })
            .collect(),
    }
}
