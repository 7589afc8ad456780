//! A deterministic toy target: guarded block graphs, an interpreter, and a
//! small coverage-guided mutational fuzzer that emits the artifact formats.
//!
//! Randomness comes from ChaCha8 seeded with `rng_seed` via
//! `SeedableRng::seed_from_u64`, so a run is reproducible from its
//! configuration alone.

mod exec;
pub mod fixtures;
mod fuzz;
mod spec;

pub use exec::{execute, ExecutionTrace};
pub use fuzz::{files, load_seeds, sim_fuzz, sim_fuzz_observed, FuzzOutputs, FuzzRunConfig, Seed};
pub use spec::{
    load_sim_spec, Guard, GuardDoc, SimBlock, SimBlockDoc, SimCall, SimCallDoc, SimFunctionDoc,
    SimSpec, SimSpecDoc, DEFAULT_MAX_INPUT_LEN, DEFAULT_STEP_BUDGET,
};
