//! Compartment analysis for human-in-the-loop fuzzing.
//!
//! Given an interprocedural control-flow graph, cumulative per-block
//! execution counts from a fuzzing campaign, and the indirect calls the
//! campaign observed, this crate finds the under-covered regions that sit
//! behind a single blocking conditional, weighs them by the instructions they
//! would expose, and ranks them for an analyst.
//!
//! ```no_run
//! use compass_core::{run_pipeline, AnalysisConfig, ArtifactPaths};
//!
//! let paths = ArtifactPaths {
//!     icfg: "icfg.json".into(),
//!     profiles: vec!["profile.jsonl".into()],
//!     callgraph: "callgraph.jsonl".into(),
//!     labels: None,
//!     corpus: None,
//! };
//! let report = run_pipeline(&paths, AnalysisConfig::default())?;
//! print!("{}", report.to_json());
//! # Ok::<(), compass_core::Error>(())
//! ```

pub mod compartments;
pub mod coverage;
pub mod error;
pub mod evaluation;
pub mod icfg;
pub mod labels;
pub mod pipeline;
mod records;
pub mod report;
pub mod sim;
pub mod synth;

pub use compartments::{
    block_weight, calls_weight, enumerate_candidates, rank_compartments, retire, still_locked,
    topk_overlap, whatif_unlock, Compartment, CompartmentKind, CompartmentReport, Program,
    StabilityResult, Status, TopkOverlap, WeightBreakdown,
};
pub use coverage::{
    coverage_frontier, load_coverage_manifest, load_profile, merge_profiles, AnalysisConfig,
    BlockCounts, InputCoverage, ProfileSnapshot,
};
pub use error::{Error, Result};
pub use evaluation::{attribute_corpus, evaluate_candidate, CandidateEvaluation, CompartmentEvaluation};
pub use icfg::{augment_call_graph, load_callgraph_log, load_icfg, CallGraph, DominatorForest, Icfg};
pub use labels::{annotate, load_labels, LabelMap, LabelSet};
pub use pipeline::{run_pipeline, ArtifactDocuments, ArtifactPaths, Workspace};
pub use report::{render, Column, Format, RenderOptions};
