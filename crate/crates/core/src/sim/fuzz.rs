use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::exec::{execute, ExecutionTrace};
use super::spec::{SimSpec, DEFAULT_STEP_BUDGET};
use crate::coverage::{write_coverage_manifest, BlockCounts, InputCoverage, ProfileSnapshot};
use crate::error::{Error, Result};
use crate::icfg::{write_callgraph_log, DynamicCallEdge, FuncId, SiteId};
use crate::labels::LabelMap;

/// Largest block touched by the duplicate and delete mutators.
const MAX_BLOCK: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seed {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Seed {
    pub fn new(name: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        Seed {
            name: name.into(),
            bytes: bytes.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzRunConfig {
    pub seeds: Vec<Seed>,
    pub harness_flags: u64,
    /// Number of mutants executed after the seeds.
    pub iterations: u64,
    pub rng_seed: u64,
    pub step_budget: u64,
}

impl FuzzRunConfig {
    pub fn new(seeds: Vec<Seed>, iterations: u64, rng_seed: u64) -> Self {
        FuzzRunConfig {
            seeds,
            harness_flags: 0,
            iterations,
            rng_seed,
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzOutputs {
    pub profile: ProfileSnapshot,
    /// Seeds followed by admitted mutants, in admission order.
    pub queue: Vec<Seed>,
    pub callgraph: Vec<DynamicCallEdge>,
    pub labels: LabelMap,
    /// Coverage of each queue entry, in queue order.
    pub per_input: Vec<InputCoverage>,
    pub executions: u64,
    pub truncated: u64,
}

/// Reads every regular file in `dir` as a seed, ordered by file name.
pub fn load_seeds(dir: &Path) -> Result<Vec<Seed>> {
    let mut seeds = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            seeds.push(Seed::new(
                entry.file_name().to_string_lossy().into_owned(),
                fs::read(entry.path())?,
            ));
        }
    }
    seeds.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(seeds)
}

fn mutate(rng: &mut ChaCha8Rng, parent: &[u8], queue: &[Seed], max_len: usize) -> Vec<u8> {
    let mut out = parent.to_vec();
    let op = rng.gen_range(0..5);
    if out.is_empty() && op != 4 {
        out.push(rng.gen());
        return out;
    }
    match op {
        0 => {
            let i = rng.gen_range(0..out.len());
            out[i] ^= 1 << rng.gen_range(0..8);
        }
        1 => {
            let i = rng.gen_range(0..out.len());
            out[i] = rng.gen();
        }
        2 => {
            let len = rng.gen_range(1..=out.len().min(MAX_BLOCK));
            let from = rng.gen_range(0..=out.len() - len);
            let to = rng.gen_range(0..=out.len());
            let block: Vec<u8> = out[from..from + len].to_vec();
            out.splice(to..to, block);
        }
        3 => {
            if out.len() > 1 {
                let len = rng.gen_range(1..=(out.len() - 1).min(MAX_BLOCK));
                let from = rng.gen_range(0..=out.len() - len);
                out.drain(from..from + len);
            } else {
                out[0] = rng.gen();
            }
        }
        _ => {
            let other = &queue[rng.gen_range(0..queue.len())].bytes;
            let cut = rng.gen_range(0..=out.len());
            let from = rng.gen_range(0..=other.len());
            out.truncate(cut);
            out.extend_from_slice(&other[from..]);
        }
    }
    out.truncate(max_len);
    out
}

struct Campaign<'a> {
    spec: &'a SimSpec,
    cfg: &'a FuzzRunConfig,
    total: BlockCounts,
    seen: Vec<Vec<bool>>,
    indirect: BTreeMap<(SiteId, FuncId), u64>,
    labels: LabelMap,
    executions: u64,
    truncated: u64,
}

impl Campaign<'_> {
    /// Runs one input, folds its trace into the totals, and reports whether it
    /// covered a block nothing covered before.
    fn run(&mut self, input: &[u8]) -> (ExecutionTrace, bool) {
        let trace = execute(self.spec, input, self.cfg.harness_flags, self.cfg.step_budget);
        self.executions += 1;
        self.truncated += u64::from(trace.truncated);
        self.total.accumulate(&trace.hits);
        let mut novel = false;
        for at in trace.hits.nonzero() {
            let seen = &mut self.seen[at.func.index()][at.block.index()];
            novel |= !*seen;
            *seen = true;
        }
        for (&key, &n) in &trace.indirect {
            let slot = self.indirect.entry(key).or_default();
            *slot = slot.saturating_add(n);
        }
        for (&at, &set) in &trace.labels {
            let name = self.spec.icfg.describe(at);
            self.labels.insert(name.function, name.block, set);
        }
        (trace, novel)
    }
}

/// Coverage-guided mutational loop over the sim target.
///
/// Seeds run first, in order, and form the initial queue. Each iteration then
/// mutates the next queue entry round-robin and runs the mutant; a mutant
/// joins the queue when it covers a block no earlier input covered. `observe`
/// sees every executed input with its trace.
pub fn sim_fuzz_observed<F>(spec: &SimSpec, cfg: &FuzzRunConfig, mut observe: F) -> Result<FuzzOutputs>
where
    F: FnMut(&[u8], &ExecutionTrace),
{
    if cfg.seeds.is_empty() {
        return Err(Error::EmptySeeds);
    }
    let mut campaign = Campaign {
        spec,
        cfg,
        total: BlockCounts::zeroed(&spec.icfg),
        seen: spec
            .icfg
            .functions()
            .iter()
            .map(|f| vec![false; f.blocks.len()])
            .collect(),
        indirect: BTreeMap::new(),
        labels: LabelMap::default(),
        executions: 0,
        truncated: 0,
    };

    let mut queue: Vec<Seed> = Vec::new();
    let mut per_input = Vec::new();
    for seed in &cfg.seeds {
        let mut bytes = seed.bytes.clone();
        bytes.truncate(spec.max_input_len);
        let (trace, _) = campaign.run(&bytes);
        observe(&bytes, &trace);
        per_input.push(trace.coverage(spec, &seed.name));
        queue.push(Seed::new(seed.name.clone(), bytes));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    for i in 0..cfg.iterations {
        let parent = &queue[(i % queue.len() as u64) as usize].bytes;
        let mutant = mutate(&mut rng, parent, &queue, spec.max_input_len);
        let (trace, novel) = campaign.run(&mutant);
        observe(&mutant, &trace);
        if novel {
            let name = format!("id_{:06}", queue.len());
            per_input.push(trace.coverage(spec, &name));
            queue.push(Seed::new(name, mutant));
        }
    }
    tracing::debug!(
        executions = campaign.executions,
        queue = queue.len(),
        truncated = campaign.truncated,
        "sim fuzz finished"
    );

    let icfg = &spec.icfg;
    let callgraph = campaign
        .indirect
        .iter()
        .map(|(&(site, target), &count)| {
            let s = icfg.site(site);
            DynamicCallEdge {
                site: s.name.clone(),
                caller: icfg.function(s.func).name.clone(),
                target: icfg.function(target).name.clone(),
                count,
            }
        })
        .collect();
    Ok(FuzzOutputs {
        profile: campaign.total.to_snapshot(icfg, "sim"),
        queue,
        callgraph,
        labels: campaign.labels,
        per_input,
        executions: campaign.executions,
        truncated: campaign.truncated,
    })
}

pub fn sim_fuzz(spec: &SimSpec, cfg: &FuzzRunConfig) -> Result<FuzzOutputs> {
    sim_fuzz_observed(spec, cfg, |_, _| {})
}

/// File names used by [`FuzzOutputs::write_to`].
pub mod files {
    pub const ICFG: &str = "icfg.json";
    pub const PROFILE: &str = "profile.jsonl";
    pub const CALLGRAPH: &str = "callgraph.jsonl";
    pub const LABELS: &str = "labels.jsonl";
    pub const CORPUS: &str = "corpus.jsonl";
    pub const QUEUE: &str = "queue";
}

impl FuzzOutputs {
    /// Writes the icfg, profile, callgraph log, label log, coverage manifest,
    /// and the queue's inputs under `dir`.
    pub fn write_to(&self, spec: &SimSpec, dir: &Path) -> Result<()> {
        let ctx = |name: &str| {
            let path = dir.join(name);
            move |e: Error| e.in_file(path)
        };
        let create = |name: &str| -> Result<std::io::BufWriter<fs::File>> {
            Ok(std::io::BufWriter::new(
                fs::File::create(dir.join(name)).map_err(|e| Error::from(e).in_file(dir.join(name)))?,
            ))
        };
        fs::create_dir_all(dir.join(files::QUEUE))?;

        let mut icfg = serde_json::to_string_pretty(&spec.icfg.to_doc())
            .map_err(|e| Error::Invariant(e.to_string()))?;
        icfg.push('\n');
        fs::write(dir.join(files::ICFG), icfg).map_err(|e| Error::from(e).in_file(dir.join(files::ICFG)))?;
        self.profile
            .write(create(files::PROFILE)?)
            .map_err(ctx(files::PROFILE))?;
        write_callgraph_log(create(files::CALLGRAPH)?, &self.callgraph)
            .map_err(ctx(files::CALLGRAPH))?;
        self.labels
            .write(create(files::LABELS)?)
            .map_err(ctx(files::LABELS))?;
        write_coverage_manifest(create(files::CORPUS)?, &self.per_input)
            .map_err(ctx(files::CORPUS))?;
        for seed in &self.queue {
            let path = dir.join(files::QUEUE).join(&seed.name);
            fs::write(&path, &seed.bytes).map_err(|e| Error::from(e).in_file(path))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::load_sim_spec;

    fn linear() -> SimSpec {
        load_sim_spec(
            br#"{"functions":[{"name":"main","size":6,"entry":"a","blocks":[
                {"id":"a","size":1,"succs":["b"]},{"id":"b","size":2,"succs":["c"]},
                {"id":"c","size":3}]}]}"#
                .as_slice(),
        )
        .unwrap()
    }

    #[test]
    fn empty_seeds_rejected() {
        let err = sim_fuzz(&linear(), &FuzzRunConfig::new(vec![], 10, 1)).unwrap_err();
        assert!(matches!(err, Error::EmptySeeds));
    }

    #[test]
    fn unguarded_region_covered_by_first_seed() {
        let cfg = FuzzRunConfig::new(vec![Seed::new("s", *b"hello")], 0, 1);
        let out = sim_fuzz(&linear(), &cfg).unwrap();
        assert_eq!(out.profile.get("main", "c"), 1);
        assert_eq!(out.executions, 1);
        assert_eq!(out.queue.len(), 1);
    }

    #[test]
    fn mutants_respect_length_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let queue = vec![Seed::new("a", vec![1u8; 8]), Seed::new("b", vec![])];
        for _ in 0..2000 {
            let m = mutate(&mut rng, &queue[0].bytes, &queue, 10);
            assert!(m.len() <= 10);
            let m = mutate(&mut rng, &queue[1].bytes, &queue, 10);
            assert!(m.len() <= 10);
        }
    }
}
