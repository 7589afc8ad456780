//! Interprocedural control-flow graph: functions, basic blocks, and call sites.
//!
//! Blocks and functions are addressed by dense indices after loading; names are
//! kept for reporting and for matching profile records.

mod callgraph;
mod dominators;

use std::collections::HashMap;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use callgraph::{
    augment_call_graph, indirect_call_summary, load_callgraph_log, write_callgraph_log, CallGraph,
    DynamicCallEdge, IncomingSite, IndirectStats,
};
pub use dominators::{build_dominator_tree, DominatorForest, DominatorTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FuncId(pub u32);

/// Index of a block within its function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockRef {
    pub func: FuncId,
    pub block: BlockId,
}

impl BlockRef {
    pub fn new(func: FuncId, block: BlockId) -> Self {
        BlockRef { func, block }
    }
}

impl FuncId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl BlockId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl SiteId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallSite {
    Direct(FuncId),
    Indirect(SiteId),
}

#[derive(Debug, Clone)]
pub struct BasicBlock {
    pub name: String,
    pub size: u64,
    pub succs: Vec<BlockId>,
    pub loc: String,
    pub calls: Vec<CallSite>,
}

#[derive(Debug, Clone)]
pub struct Function {
    pub name: String,
    pub size: u64,
    pub entry: BlockId,
    pub blocks: Vec<BasicBlock>,
    block_index: HashMap<String, BlockId>,
}

impl Function {
    pub fn block(&self, id: BlockId) -> &BasicBlock {
        &self.blocks[id.index()]
    }

    pub fn block_id(&self, name: &str) -> Option<BlockId> {
        self.block_index.get(name).copied()
    }

    pub fn block_ids(&self) -> impl Iterator<Item = BlockId> {
        (0..self.blocks.len() as u32).map(BlockId)
    }
}

#[derive(Debug, Clone)]
pub struct IndirectSite {
    pub name: String,
    pub func: FuncId,
    pub block: BlockId,
}

/// A validated whole-program graph. Immutable once loaded.
#[derive(Debug, Clone)]
pub struct Icfg {
    functions: Vec<Function>,
    function_index: HashMap<String, FuncId>,
    sites: Vec<IndirectSite>,
    site_index: HashMap<String, SiteId>,
}

impl Icfg {
    pub fn functions(&self) -> &[Function] {
        &self.functions
    }

    pub fn function(&self, id: FuncId) -> &Function {
        &self.functions[id.index()]
    }

    pub fn func_ids(&self) -> impl Iterator<Item = FuncId> {
        (0..self.functions.len() as u32).map(FuncId)
    }

    pub fn func_id(&self, name: &str) -> Option<FuncId> {
        self.function_index.get(name).copied()
    }

    pub fn block(&self, at: BlockRef) -> &BasicBlock {
        self.function(at.func).block(at.block)
    }

    pub fn block_ref(&self, function: &str, block: &str) -> Option<BlockRef> {
        let func = self.func_id(function)?;
        let block = self.function(func).block_id(block)?;
        Some(BlockRef { func, block })
    }

    pub fn entry(&self, func: FuncId) -> BlockRef {
        BlockRef::new(func, self.function(func).entry)
    }

    pub fn sites(&self) -> &[IndirectSite] {
        &self.sites
    }

    pub fn site(&self, id: SiteId) -> &IndirectSite {
        &self.sites[id.index()]
    }

    pub fn site_id(&self, name: &str) -> Option<SiteId> {
        self.site_index.get(name).copied()
    }

    pub fn block_count(&self) -> usize {
        self.functions.iter().map(|f| f.blocks.len()).sum()
    }

    pub fn describe(&self, at: BlockRef) -> BlockName<'_> {
        BlockName {
            function: &self.function(at.func).name,
            block: &self.block(at).name,
        }
    }

    pub fn from_doc(doc: &IcfgDoc) -> Result<Icfg> {
        let mut function_index = HashMap::new();
        for (i, f) in doc.functions.iter().enumerate() {
            if function_index
                .insert(f.name.clone(), FuncId(i as u32))
                .is_some()
            {
                return Err(Error::DuplicateFunction(f.name.clone()));
            }
        }

        let mut functions = Vec::with_capacity(doc.functions.len());
        let mut sites = Vec::new();
        let mut site_index = HashMap::new();

        for (fi, fdoc) in doc.functions.iter().enumerate() {
            let func = FuncId(fi as u32);
            let mut block_index = HashMap::new();
            for (bi, b) in fdoc.blocks.iter().enumerate() {
                if block_index.insert(b.id.clone(), BlockId(bi as u32)).is_some() {
                    return Err(Error::DuplicateBlock {
                        function: fdoc.name.clone(),
                        block: b.id.clone(),
                    });
                }
                if b.size == 0 {
                    return Err(Error::EmptyBlock {
                        function: fdoc.name.clone(),
                        block: b.id.clone(),
                    });
                }
            }
            let entry = *block_index
                .get(&fdoc.entry)
                .ok_or_else(|| Error::MissingEntry {
                    function: fdoc.name.clone(),
                    entry: fdoc.entry.clone(),
                })?;
            let actual: u64 = fdoc.blocks.iter().map(|b| b.size).sum();
            if actual != fdoc.size {
                return Err(Error::SizeMismatch {
                    function: fdoc.name.clone(),
                    declared: fdoc.size,
                    actual,
                });
            }

            let mut blocks = Vec::with_capacity(fdoc.blocks.len());
            for (bi, b) in fdoc.blocks.iter().enumerate() {
                let mut succs = Vec::with_capacity(b.succs.len());
                for s in &b.succs {
                    let id = *block_index.get(s).ok_or_else(|| Error::DanglingSuccessor {
                        function: fdoc.name.clone(),
                        block: b.id.clone(),
                        succ: s.clone(),
                    })?;
                    if succs.contains(&id) {
                        return Err(Error::DuplicateSuccessor {
                            function: fdoc.name.clone(),
                            block: b.id.clone(),
                            succ: s.clone(),
                        });
                    }
                    succs.push(id);
                }
                let mut calls = Vec::with_capacity(b.calls.len());
                for c in &b.calls {
                    match c {
                        CallDoc::Direct { target } => {
                            let t = function_index.get(target).ok_or_else(|| {
                                Error::DanglingCallTarget {
                                    function: fdoc.name.clone(),
                                    block: b.id.clone(),
                                    target: target.clone(),
                                }
                            })?;
                            calls.push(CallSite::Direct(*t));
                        }
                        CallDoc::Indirect { site } => {
                            let id = SiteId(sites.len() as u32);
                            if site_index.insert(site.clone(), id).is_some() {
                                return Err(Error::DuplicateSite(site.clone()));
                            }
                            sites.push(IndirectSite {
                                name: site.clone(),
                                func,
                                block: BlockId(bi as u32),
                            });
                            calls.push(CallSite::Indirect(id));
                        }
                    }
                }
                blocks.push(BasicBlock {
                    name: b.id.clone(),
                    size: b.size,
                    succs,
                    loc: b.loc.clone(),
                    calls,
                });
            }
            functions.push(Function {
                name: fdoc.name.clone(),
                size: fdoc.size,
                entry,
                blocks,
                block_index,
            });
        }

        Ok(Icfg {
            functions,
            function_index,
            sites,
            site_index,
        })
    }

    pub fn to_doc(&self) -> IcfgDoc {
        IcfgDoc {
            functions: self
                .functions
                .iter()
                .map(|f| FunctionDoc {
                    name: f.name.clone(),
                    size: f.size,
                    entry: f.block(f.entry).name.clone(),
                    blocks: f
                        .blocks
                        .iter()
                        .map(|b| BlockDoc {
                            id: b.name.clone(),
                            size: b.size,
                            succs: b.succs.iter().map(|s| f.block(*s).name.clone()).collect(),
                            loc: b.loc.clone(),
                            calls: b
                                .calls
                                .iter()
                                .map(|c| match c {
                                    CallSite::Direct(t) => CallDoc::Direct {
                                        target: self.function(*t).name.clone(),
                                    },
                                    CallSite::Indirect(s) => CallDoc::Indirect {
                                        site: self.site(*s).name.clone(),
                                    },
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

pub struct BlockName<'a> {
    pub function: &'a str,
    pub block: &'a str,
}

impl fmt::Display for BlockName<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.function, self.block)
    }
}

/// Parses and validates an icfg document.
pub fn load_icfg<R: Read>(source: R) -> Result<Icfg> {
    let doc: IcfgDoc = serde_json::from_reader(source)
        .map_err(|e| Error::MalformedDocument(e.to_string()))?;
    Icfg::from_doc(&doc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcfgDoc {
    pub functions: Vec<FunctionDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionDoc {
    pub name: String,
    pub size: u64,
    pub entry: String,
    pub blocks: Vec<BlockDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDoc {
    pub id: String,
    pub size: u64,
    #[serde(default)]
    pub succs: Vec<String>,
    #[serde(default)]
    pub loc: String,
    #[serde(default)]
    pub calls: Vec<CallDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CallDoc {
    Direct { target: String },
    Indirect { site: String },
}
