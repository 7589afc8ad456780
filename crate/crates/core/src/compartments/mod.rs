//! Compartment discovery, weighting, and ranking.
//!
//! A compartment is an under-covered region entered through a single block:
//! either the target of a coverage-frontier edge, or the entry of a function
//! that nothing calls directly (reachable only through indirect calls). Its
//! weight is the number of instructions that unlocking the entry would expose:
//! the entry's dominator subtree plus every function reachable from it only
//! through single-call-site, still-unsaturated callees.

mod candidates;
mod rank;
mod stability;
mod weight;
mod whatif;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::coverage::AnalysisConfig;
use crate::error::{Error, Result};
use crate::icfg::{CallGraph, DominatorForest, Icfg};
use crate::labels::LabelSet;
use crate::pipeline::ArtifactPaths;

pub use candidates::enumerate_candidates;
pub use rank::rank_compartments;
pub use stability::{still_locked, topk_overlap, StabilityResult, TopkOverlap};
pub use weight::{block_weight, calls_weight, callee_closure};
pub use whatif::{hypothetical_counts, retire, unlock_region, whatif_unlock};

/// The static side of an analysis: graph, dominators, and call graph.
#[derive(Debug, Clone, Copy)]
pub struct Program<'a> {
    pub icfg: &'a Icfg,
    pub doms: &'a DominatorForest,
    pub callgraph: &'a CallGraph,
}

/// Instructions a compartment would expose, split by where they live.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct WeightBreakdown {
    block_weight: u64,
    calls_weight: u64,
}

impl WeightBreakdown {
    pub const ZERO: WeightBreakdown = WeightBreakdown {
        block_weight: 0,
        calls_weight: 0,
    };

    pub fn new(block_weight: u64, calls_weight: u64) -> Self {
        WeightBreakdown {
            block_weight,
            calls_weight,
        }
    }

    /// Rebuilds a breakdown from exported columns, checking additivity.
    pub fn from_parts(total: u64, block_weight: u64, calls_weight: u64) -> Result<Self> {
        if block_weight.checked_add(calls_weight) != Some(total) {
            return Err(Error::Invariant(format!(
                "weight {total} != block weight {block_weight} + calls weight {calls_weight}"
            )));
        }
        Ok(Self::new(block_weight, calls_weight))
    }

    pub fn block_weight(&self) -> u64 {
        self.block_weight
    }

    pub fn calls_weight(&self) -> u64 {
        self.calls_weight
    }

    pub fn total(&self) -> u64 {
        self.block_weight + self.calls_weight
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CompartmentKind {
    /// Entered over a frontier edge from `conditional_block`.
    Frontier { conditional_block: String },
    /// Function entry with no direct callers.
    IndirectTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Locked,
    Unlocked,
    Resolved,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Locked => "locked",
            Status::Unlocked => "unlocked",
            Status::Resolved => "resolved",
        })
    }
}

impl std::str::FromStr for Status {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "locked" => Ok(Status::Locked),
            "unlocked" => Ok(Status::Unlocked),
            "resolved" => Ok(Status::Resolved),
            other => Err(Error::MalformedDocument(format!("unknown status {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Compartment {
    pub function: String,
    pub entry_block: String,
    pub kind: CompartmentKind,
    pub weight: WeightBreakdown,
    /// Execution count at the blocking conditional; 0 for indirect targets.
    pub conditional_count: u64,
    pub conditional_loc: String,
    pub entry_loc: String,
    pub labels: LabelSet,
    pub input: String,
    pub solution: String,
    pub status: Status,
}

impl Compartment {
    /// Stable identifier `function:entry_block`.
    pub fn id(&self) -> String {
        format!("{}:{}", self.function, self.entry_block)
    }

    pub fn conditional_block(&self) -> Option<&str> {
        match &self.kind {
            CompartmentKind::Frontier { conditional_block } => Some(conditional_block),
            CompartmentKind::IndirectTarget => None,
        }
    }
}

/// Rank-ordered compartment list.
///
/// `entries` holds the locked compartments in rank order (rank = index + 1).
/// `retired` holds compartments taken out of the ranking by an unlock or
/// resolve action, in the order they were retired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompartmentReport {
    pub config: AnalysisConfig,
    pub sources: Option<ArtifactPaths>,
    pub snapshot: String,
    pub entries: Vec<Compartment>,
    pub retired: Vec<Compartment>,
}

impl CompartmentReport {
    pub fn find(&self, id: &str) -> Option<&Compartment> {
        self.entries
            .iter()
            .chain(self.retired.iter())
            .find(|c| c.id() == id)
    }

    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.entries.iter().position(|c| c.id() == id).map(|i| i + 1)
    }
}

/// Report order: total weight descending, then function name, then entry id.
pub(crate) fn report_order(a: &Compartment, b: &Compartment) -> std::cmp::Ordering {
    b.weight
        .total()
        .cmp(&a.weight.total())
        .then_with(|| a.function.cmp(&b.function))
        .then_with(|| a.entry_block.cmp(&b.entry_block))
}
