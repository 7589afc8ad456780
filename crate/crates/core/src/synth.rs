//! Random whole programs with profiles and indirect-call logs, for property
//! tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::coverage::ProfileSnapshot;
use crate::icfg::{BlockDoc, CallDoc, DynamicCallEdge, FunctionDoc, IcfgDoc};

#[derive(Debug, Clone, Copy)]
pub struct SynthParams {
    pub max_functions: usize,
    /// Upper bound on blocks across the whole program.
    pub max_blocks: usize,
    pub max_block_size: u64,
    /// Counts are drawn from `0..=max_count`; pick it around twice the
    /// threshold under test so both sides of the threshold are common.
    pub max_count: u64,
    pub call_probability: f64,
    pub indirect_probability: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            max_functions: 12,
            max_blocks: 60,
            max_block_size: 20,
            max_count: 100,
            call_probability: 0.25,
            indirect_probability: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthProgram {
    pub icfg: IcfgDoc,
    pub profile: ProfileSnapshot,
    pub edges: Vec<DynamicCallEdge>,
}

/// A random function body of `n` blocks in which every block is reachable
/// from `b0`: each block after the first gets an edge from an earlier block,
/// plus a few random extra edges (back edges included).
pub fn random_cfg<R: Rng>(rng: &mut R, n: usize, max_block_size: u64) -> Vec<BlockDoc> {
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for b in 1..n {
        let from = rng.gen_range(0..b);
        succs[from].push(b);
    }
    for _ in 0..rng.gen_range(0..=n) {
        let from = rng.gen_range(0..n);
        let to = rng.gen_range(0..n);
        if !succs[from].contains(&to) {
            succs[from].push(to);
        }
    }
    (0..n)
        .map(|b| {
            let mut s = succs[b].clone();
            s.shuffle(rng);
            BlockDoc {
                id: format!("b{b}"),
                size: rng.gen_range(1..=max_block_size),
                succs: s.into_iter().map(|t| format!("b{t}")).collect(),
                loc: format!("f.c:{}", b + 1),
                calls: Vec::new(),
            }
        })
        .collect()
}

pub fn random_program<R: Rng>(rng: &mut R, p: &SynthParams) -> SynthProgram {
    let nf = rng.gen_range(1..=p.max_functions.max(1));
    let per = (p.max_blocks / nf).max(1);
    let names: Vec<String> = (0..nf).map(|i| format!("fn{i:02}")).collect();

    let mut functions = Vec::with_capacity(nf);
    let mut sites: Vec<(String, usize)> = Vec::new();
    for (fi, name) in names.iter().enumerate() {
        let nb = rng.gen_range(1..=per);
        let mut blocks = random_cfg(rng, nb, p.max_block_size);
        for b in &mut blocks {
            while rng.gen_bool(p.call_probability) && b.calls.len() < 3 {
                if rng.gen_bool(p.indirect_probability) {
                    let site = format!("s{}", sites.len());
                    sites.push((site.clone(), fi));
                    b.calls.push(CallDoc::Indirect { site });
                } else {
                    b.calls.push(CallDoc::Direct {
                        target: names[rng.gen_range(0..nf)].clone(),
                    });
                }
            }
        }
        functions.push(FunctionDoc {
            name: name.clone(),
            size: blocks.iter().map(|b| b.size).sum(),
            entry: "b0".into(),
            blocks,
        });
    }

    let mut profile = ProfileSnapshot::new("synth");
    for f in &functions {
        for b in &f.blocks {
            let c = rng.gen_range(0..=p.max_count);
            if c > 0 {
                profile.add(&f.name, &b.id, c).expect("counts are small");
            }
        }
    }

    let mut edges = Vec::new();
    for (site, owner) in &sites {
        if !rng.gen_bool(0.6) {
            continue;
        }
        let mut targets: Vec<usize> = (0..nf).collect();
        targets.shuffle(rng);
        for &t in targets.iter().take(rng.gen_range(1..=3)) {
            edges.push(DynamicCallEdge {
                site: site.clone(),
                caller: names[*owner].clone(),
                target: names[t].clone(),
                count: rng.gen_range(1..=p.max_count.max(1)),
            });
        }
    }

    SynthProgram {
        icfg: IcfgDoc { functions },
        profile,
        edges,
    }
}

/// A pointwise-larger copy of `s`: every block of `icfg` gains a random
/// non-negative amount, often zero.
pub fn grow_profile<R: Rng>(rng: &mut R, s: &ProfileSnapshot, icfg: &IcfgDoc, max_add: u64) -> ProfileSnapshot {
    let mut out = s.clone();
    for f in &icfg.functions {
        for b in &f.blocks {
            if rng.gen_bool(0.4) {
                out.add(&f.name, &b.id, rng.gen_range(1..=max_add.max(1)))
                    .expect("counts are small");
            }
        }
    }
    out
}
