//! Workloads shared by the benchmarks.

use compass_core::synth::{random_program, SynthParams, SynthProgram};
use compass_core::{AnalysisConfig, BlockCounts, CallGraph, DominatorForest, Icfg, Program};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A synthetic program with its profile resolved and call graph augmented.
pub struct Workload {
    pub icfg: Icfg,
    pub doms: DominatorForest,
    pub callgraph: CallGraph,
    pub counts: BlockCounts,
}

impl Workload {
    pub fn from_synth(p: &SynthProgram) -> Self {
        let icfg = Icfg::from_doc(&p.icfg).expect("generated icfg is valid");
        let doms = DominatorForest::build(&icfg);
        let callgraph = CallGraph::new(&icfg)
            .augment(&icfg, &p.edges)
            .expect("generated edges are valid");
        let counts = p.profile.resolve(&icfg).expect("generated profile is valid");
        Workload {
            icfg,
            doms,
            callgraph,
            counts,
        }
    }

    pub fn program(&self) -> Program<'_> {
        Program {
            icfg: &self.icfg,
            doms: &self.doms,
            callgraph: &self.callgraph,
        }
    }
}

/// A program with up to `functions` functions and `blocks` blocks in total.
pub fn synth(seed: u64, functions: usize, blocks: usize) -> SynthProgram {
    let params = SynthParams {
        max_functions: functions,
        max_blocks: blocks,
        ..SynthParams::default()
    };
    random_program(&mut ChaCha8Rng::seed_from_u64(seed), &params)
}

pub fn config() -> AnalysisConfig {
    AnalysisConfig {
        top_k: usize::MAX,
        ..AnalysisConfig::default()
    }
}
