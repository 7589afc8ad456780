//! Brute-force reference implementations that work on the raw documents and
//! never touch the library's graph structures.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use compass_core::icfg::{CallDoc, DynamicCallEdge, FunctionDoc, IcfgDoc};
use compass_core::ProfileSnapshot;

/// Blocks reachable from the entry of `f` when `removed` is deleted.
pub fn reachable_without(f: &FunctionDoc, removed: Option<&str>) -> HashSet<String> {
    let succs: HashMap<&str, &Vec<String>> =
        f.blocks.iter().map(|b| (b.id.as_str(), &b.succs)).collect();
    let mut seen = HashSet::new();
    if removed == Some(f.entry.as_str()) {
        return seen;
    }
    let mut work = vec![f.entry.clone()];
    seen.insert(f.entry.clone());
    while let Some(b) = work.pop() {
        for s in succs[b.as_str()] {
            if Some(s.as_str()) != removed && seen.insert(s.clone()) {
                work.push(s.clone());
            }
        }
    }
    seen
}

/// Dominance by definition: `a` dominates reachable `b` iff deleting `a`
/// disconnects `b` from the entry.
pub struct DomOracle {
    reachable: HashSet<String>,
    without: HashMap<String, HashSet<String>>,
}

impl DomOracle {
    pub fn new(f: &FunctionDoc) -> Self {
        DomOracle {
            reachable: reachable_without(f, None),
            without: f
                .blocks
                .iter()
                .map(|b| (b.id.clone(), reachable_without(f, Some(&b.id))))
                .collect(),
        }
    }

    pub fn is_reachable(&self, b: &str) -> bool {
        self.reachable.contains(b)
    }

    pub fn dominates(&self, a: &str, b: &str) -> bool {
        self.is_reachable(b) && (a == b || !self.without[a].contains(b))
    }

    /// The strict dominator of `b` that every other strict dominator of `b`
    /// dominates.
    pub fn idom(&self, f: &FunctionDoc, b: &str) -> Option<String> {
        if !self.is_reachable(b) {
            return None;
        }
        let strict: Vec<&str> = f
            .blocks
            .iter()
            .map(|x| x.id.as_str())
            .filter(|&d| d != b && self.dominates(d, b))
            .collect();
        let idoms: Vec<&str> = strict
            .iter()
            .copied()
            .filter(|&d| strict.iter().all(|&o| self.dominates(o, d)))
            .collect();
        assert!(idoms.len() <= 1, "dominators of {b} are not a chain");
        idoms.first().map(|s| s.to_string())
    }
}

/// Block and calls weight computed from the documents alone.
pub struct WeightOracle<'a> {
    pub doc: &'a IcfgDoc,
    pub profile: &'a ProfileSnapshot,
    pub edges: &'a [DynamicCallEdge],
    pub threshold: u64,
}

impl<'a> WeightOracle<'a> {
    fn function(&self, name: &str) -> &'a FunctionDoc {
        self.doc.functions.iter().find(|f| f.name == name).unwrap()
    }

    fn count(&self, f: &str, b: &str) -> u64 {
        self.profile.get(f, b)
    }

    fn entry_count(&self, f: &str) -> u64 {
        self.count(f, &self.function(f).entry)
    }

    /// Distinct call sites that can reach `target`: each static direct call
    /// slot, plus each indirect site observed calling it.
    pub fn callers(&self, target: &str) -> usize {
        let direct = self
            .doc
            .functions
            .iter()
            .flat_map(|f| f.blocks.iter())
            .flat_map(|b| b.calls.iter())
            .filter(|c| matches!(c, CallDoc::Direct { target: t } if t == target))
            .count();
        let indirect: BTreeSet<&str> = self
            .edges
            .iter()
            .filter(|e| e.target == target)
            .map(|e| e.site.as_str())
            .collect();
        direct + indirect.len()
    }

    pub fn has_direct_caller(&self, target: &str) -> bool {
        self.doc
            .functions
            .iter()
            .flat_map(|f| f.blocks.iter())
            .flat_map(|b| b.calls.iter())
            .any(|c| matches!(c, CallDoc::Direct { target: t } if t == target))
    }

    fn block_callees(&self, f: &str, b: &str) -> Vec<String> {
        let block = self.function(f).blocks.iter().find(|x| x.id == b).unwrap();
        let mut out = Vec::new();
        for c in &block.calls {
            match c {
                CallDoc::Direct { target } => out.push(target.clone()),
                CallDoc::Indirect { site } => out.extend(
                    self.edges
                        .iter()
                        .filter(|e| &e.site == site)
                        .map(|e| e.target.clone()),
                ),
            }
        }
        out
    }

    fn admissible(&self, f: &str) -> bool {
        self.entry_count(f) <= self.threshold && self.callers(f) <= 1
    }

    /// Functions counted toward the calls weight: breadth-first from the
    /// callees of the dominated blocks, expanding only admissible functions.
    pub fn closure(&self, function: &str, blocks: &[String]) -> BTreeSet<String> {
        let mut seen = HashSet::new();
        let mut admitted = BTreeSet::new();
        let mut work: VecDeque<String> = blocks
            .iter()
            .flat_map(|b| self.block_callees(function, b))
            .collect();
        while let Some(g) = work.pop_front() {
            if !seen.insert(g.clone()) {
                continue;
            }
            if !self.admissible(&g) {
                continue;
            }
            admitted.insert(g.clone());
            for b in &self.function(&g).blocks {
                work.extend(self.block_callees(&g, &b.id));
            }
        }
        admitted
    }

    /// `(block weight, calls weight)` for the compartment entered at
    /// `function:entry`.
    pub fn weight(&self, function: &str, entry: &str) -> (u64, u64) {
        if self.count(function, entry) > self.threshold {
            return (0, 0);
        }
        let f = self.function(function);
        let doms = DomOracle::new(f);
        let dominated: Vec<String> = f
            .blocks
            .iter()
            .filter(|b| doms.dominates(entry, &b.id))
            .map(|b| b.id.clone())
            .collect();
        let block: u64 = f
            .blocks
            .iter()
            .filter(|b| dominated.contains(&b.id))
            .map(|b| b.size)
            .sum();
        let calls = self
            .closure(function, &dominated)
            .iter()
            .map(|g| self.function(g).size)
            .sum();
        (block, calls)
    }

    /// Compartment ids by definition: targets of reachable frontier edges,
    /// plus entries of unsaturated functions nothing calls directly.
    pub fn candidate_ids(&self, roots: &[String]) -> BTreeSet<String> {
        let t = self.threshold;
        let mut out = BTreeSet::new();
        for f in &self.doc.functions {
            let doms = DomOracle::new(f);
            for u in &f.blocks {
                if self.count(&f.name, &u.id) <= t {
                    continue;
                }
                for v in &u.succs {
                    if self.count(&f.name, v) <= t && doms.is_reachable(v) {
                        out.insert(format!("{}:{}", f.name, v));
                    }
                }
            }
        }
        for f in &self.doc.functions {
            if !self.has_direct_caller(&f.name)
                && self.entry_count(&f.name) <= t
                && !roots.contains(&f.name)
            {
                out.insert(format!("{}:{}", f.name, f.entry));
            }
        }
        out
    }
}

/// Library-side objects for one document set.
pub struct Built {
    pub icfg: compass_core::Icfg,
    pub doms: compass_core::DominatorForest,
    pub callgraph: compass_core::CallGraph,
}

impl Built {
    pub fn new(doc: &IcfgDoc, edges: &[DynamicCallEdge]) -> Self {
        let icfg = compass_core::Icfg::from_doc(doc).expect("valid icfg");
        let doms = compass_core::DominatorForest::build(&icfg);
        let callgraph = compass_core::CallGraph::new(&icfg)
            .augment(&icfg, edges)
            .expect("valid edges");
        Built {
            icfg,
            doms,
            callgraph,
        }
    }

    pub fn program(&self) -> compass_core::Program<'_> {
        compass_core::Program {
            icfg: &self.icfg,
            doms: &self.doms,
            callgraph: &self.callgraph,
        }
    }
}

/// A function with arbitrary edges, unreachable blocks allowed.
pub fn arbitrary_function<R: rand::Rng>(rng: &mut R, n: usize) -> FunctionDoc {
    use compass_core::icfg::BlockDoc;
    let density = rng.gen_range(0.02..0.25);
    let blocks: Vec<BlockDoc> = (0..n)
        .map(|b| BlockDoc {
            id: format!("b{b}"),
            size: 1,
            succs: (0..n)
                .filter(|_| rng.gen_bool(density))
                .map(|t| format!("b{t}"))
                .collect(),
            loc: String::new(),
            calls: Vec::new(),
        })
        .collect();
    FunctionDoc {
        name: "f".into(),
        size: n as u64,
        entry: format!("b{}", rng.gen_range(0..n)),
        blocks,
    }
}

/// Fuzzes `spec` and writes every artifact into a fresh directory.
pub fn fuzz_to_dir(
    spec: &compass_core::sim::SimSpecDoc,
    cfg: &compass_core::sim::FuzzRunConfig,
) -> (tempfile::TempDir, compass_core::ArtifactPaths, compass_core::sim::FuzzOutputs) {
    use compass_core::sim::{files, sim_fuzz, SimSpec};
    let spec = SimSpec::from_doc(spec).expect("valid sim spec");
    let out = sim_fuzz(&spec, cfg).expect("fuzzing runs");
    let dir = tempfile::tempdir().unwrap();
    out.write_to(&spec, dir.path()).unwrap();
    let paths = compass_core::ArtifactPaths {
        icfg: dir.path().join(files::ICFG),
        profiles: vec![dir.path().join(files::PROFILE)],
        callgraph: dir.path().join(files::CALLGRAPH),
        labels: Some(dir.path().join(files::LABELS)),
        corpus: Some(dir.path().join(files::CORPUS)),
    };
    (dir, paths, out)
}

/// Seeds that carry none of the fixture magics.
pub fn plain_seeds() -> Vec<compass_core::sim::Seed> {
    use compass_core::sim::Seed;
    vec![
        Seed::new("plain_a", b"the quick brown fox jumps".to_vec()),
        Seed::new("plain_b", vec![0u8; 20]),
        Seed::new("plain_c", b"0123456789abcdefghij".to_vec()),
    ]
}

pub fn five_regions() -> Vec<compass_core::sim::fixtures::MagicRegion> {
    use compass_core::sim::fixtures::MagicRegion;
    vec![
        MagicRegion::new("parse_pfr", b"PFR0", 500),
        MagicRegion::new("parse_woff", b"wOFF", 400),
        MagicRegion::new("parse_cff", b"CFF2", 300),
        MagicRegion::new("parse_bdf", b"BDF1", 200),
        MagicRegion::new("parse_pcf", b"\x01fcp", 100),
    ]
}

/// Serialized documents for an in-memory workspace.
pub fn documents(
    icfg: &IcfgDoc,
    profile: &ProfileSnapshot,
    labels: Option<&compass_core::LabelMap>,
    corpus: Option<&[compass_core::InputCoverage]>,
) -> compass_core::ArtifactDocuments {
    let mut prof = Vec::new();
    profile.write(&mut prof).unwrap();
    compass_core::ArtifactDocuments {
        icfg: serde_json::to_string(icfg).unwrap(),
        profiles: vec![String::from_utf8(prof).unwrap()],
        callgraph: String::new(),
        labels: labels.map(|l| {
            let mut out = Vec::new();
            l.write(&mut out).unwrap();
            String::from_utf8(out).unwrap()
        }),
        corpus: corpus.map(|c| {
            let mut out = Vec::new();
            compass_core::coverage::write_coverage_manifest(&mut out, c).unwrap();
            String::from_utf8(out).unwrap()
        }),
        snapshot: profile.tag.clone(),
    }
}

/// `n` regions in one chain behind guards that every run reaches, with
/// distinct weights `base - 10 * i`. Region `i` is compartment `main:r{i}`.
pub fn region_program(n: usize, base: u64) -> (IcfgDoc, ProfileSnapshot) {
    use compass_core::sim::fixtures::{magic_regions, MagicRegion};
    let regions: Vec<MagicRegion> = (0..n)
        .map(|i| MagicRegion::new(&format!("region_fn{i:02}"), b"MAGC", base - 10 * i as u64))
        .collect();
    let doc = magic_regions(&regions).icfg_doc();
    let mut profile = ProfileSnapshot::new("6h");
    let main = &doc.functions[0];
    for b in &main.blocks {
        if !b.id.starts_with('r') {
            profile.add("main", &b.id, 1000).unwrap();
        }
    }
    (doc, profile)
}

/// Raises region `i` (entry, tail, and helper) above any threshold.
pub fn cover_region(profile: &mut ProfileSnapshot, i: usize) {
    profile.add("main", &format!("r{i}"), 500).unwrap();
    profile.add("main", &format!("r{i}_tail"), 500).unwrap();
    profile.add(&format!("region_fn{i:02}"), "e", 500).unwrap();
}

/// A function whose conditional `cond` (hit `hits` times) guards an unrun
/// block `entry` of `block_weight` instructions that calls `helper` once;
/// `helper` holds `calls_weight` instructions and has no other caller.
pub fn gated_function(
    name: &str,
    helper: &str,
    block_weight: u64,
    calls_weight: u64,
    locs: (&str, &str),
    hits: u64,
    profile: &mut ProfileSnapshot,
) -> Vec<FunctionDoc> {
    use compass_core::icfg::BlockDoc;
    let b = |id: &str, size: u64, succs: &[&str], loc: &str| BlockDoc {
        id: id.into(),
        size,
        succs: succs.iter().map(|s| s.to_string()).collect(),
        loc: loc.into(),
        calls: Vec::new(),
    };
    let mut entry = b("entry", block_weight, &["exit"], locs.1);
    entry.calls.push(CallDoc::Direct {
        target: helper.into(),
    });
    let blocks = vec![
        b("head", 4, &["cond"], ""),
        b("cond", 2, &["entry", "exit"], locs.0),
        entry,
        b("exit", 1, &[], ""),
    ];
    for id in ["head", "cond", "exit"] {
        profile.add(name, id, hits).unwrap();
    }
    vec![
        FunctionDoc {
            name: name.into(),
            size: blocks.iter().map(|x| x.size).sum(),
            entry: "head".into(),
            blocks,
        },
        FunctionDoc {
            name: helper.into(),
            size: calls_weight,
            entry: "e".into(),
            blocks: vec![b("e", calls_weight, &[], "")],
        },
    ]
}

/// The four freetype2 rows of the example compartment list, rebuilt as a
/// program plus labels and corpus that reproduce every column.
pub fn freetype_rows() -> (
    IcfgDoc,
    ProfileSnapshot,
    compass_core::LabelMap,
    Vec<compass_core::InputCoverage>,
) {
    use compass_core::{InputCoverage, LabelMap, LabelSet};
    let mut profile = ProfileSnapshot::new("6h");
    let mut functions = Vec::new();
    // function, block weight, calls weight, (conditional, entry) locations, conditional hits
    type Row = (&'static str, u64, u64, (&'static str, &'static str), u64);
    let rows: [Row; 4] = [
        ("pfr_face_init", 482, 1759, ("pfrobjs.c:88", "pfrobjs.c:97"), 427023610),
        ("pcf_load_font", 603, 639, ("pcfread.c:1376", "pcfread.c:1380"), 442315),
        ("cid_face_open", 275, 693, ("cidload.c:716", "cidload.c:719"), 4683065),
        ("woff_open_font", 850, 93, ("sfobjs.c:452", "sfobjs.c:453"), 8487),
    ];
    for (name, bw, cw, locs, hits) in rows {
        let helper = format!("{name}_helper");
        functions.extend(gated_function(name, &helper, bw, cw, locs, hits, &mut profile));
    }
    let mut labels = LabelMap::default();
    labels.insert("woff_open_font", "cond", LabelSet::INPUT);

    let input = |name: &str, blocks: &[(&str, &str)]| {
        let mut c = InputCoverage::new(name);
        for (f, b) in blocks {
            c.insert(f, b);
        }
        c
    };
    let corpus = vec![
        input("Zurich.pfr", &[("pfr_face_init", "cond"), ("pfr_face_init", "entry")]),
        input("courB10.pcf.Z", &[("pcf_load_font", "cond"), ("pcf_load_font", "entry")]),
        input("96h_004325", &[("cid_face_open", "cond")]),
        input("Lack.woff", &[("woff_open_font", "cond")]),
        input("FiraCode-VF.woff", &[("woff_open_font", "cond"), ("woff_open_font", "entry")]),
    ];
    (IcfgDoc { functions }, profile, labels, corpus)
}

/// libxml2 compartment 167: 257 dominated instructions plus the 267 of
/// `xmlParseStringEntityRef`, called only from inside the compartment.
pub fn libxml2_compartment() -> (IcfgDoc, ProfileSnapshot) {
    let mut profile = ProfileSnapshot::new("6h");
    let functions = gated_function(
        "xmlStringLenDecodeEntities",
        "xmlParseStringEntityRef",
        257,
        267,
        ("parser.c:2702", "parser.c:2703"),
        9120,
        &mut profile,
    );
    (IcfgDoc { functions }, profile)
}
