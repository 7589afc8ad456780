use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::icfg::{BlockDoc, CallDoc, FuncId, FunctionDoc, Icfg, IcfgDoc, SiteId};
use crate::labels::LabelSet;

pub const DEFAULT_MAX_INPUT_LEN: usize = 4096;
pub const DEFAULT_STEP_BUDGET: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GuardDoc {
    /// `input[offset..offset + len(value)] == value`, `value` in hex.
    Bytes { offset: usize, value: String },
    Flag { bit: u32 },
    LenGe { n: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimCallDoc {
    Direct {
        target: String,
    },
    /// Dispatches on `input[byte]` through `table`. Table keys are a single
    /// literal character or a `0x`-prefixed hex byte. Bytes missing from the
    /// table call `default`, or nothing.
    Indirect {
        site: String,
        #[serde(default)]
        byte: usize,
        #[serde(default)]
        table: BTreeMap<String, String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimBlockDoc {
    pub id: String,
    pub size: u64,
    #[serde(default)]
    pub succs: Vec<String>,
    #[serde(default)]
    pub loc: String,
    #[serde(default)]
    pub calls: Vec<SimCallDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<GuardDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimFunctionDoc {
    pub name: String,
    pub size: u64,
    pub entry: String,
    pub blocks: Vec<SimBlockDoc>,
}

/// The sim spec file: an icfg document whose blocks may carry guards and
/// whose indirect calls carry dispatch tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSpecDoc {
    /// Function executed per input; defaults to the first function.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_input_len: Option<usize>,
    /// Number of declared harness flag bits, at most 64.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag_bits: Option<u32>,
    pub functions: Vec<SimFunctionDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Guard {
    Bytes { offset: usize, value: Vec<u8> },
    Flag { bit: u32 },
    LenGe { n: usize },
}

impl Guard {
    pub fn eval(&self, input: &[u8], flags: u64) -> bool {
        match self {
            Guard::Bytes { offset, value } => input
                .get(*offset..offset + value.len())
                .is_some_and(|s| s == value.as_slice()),
            Guard::Flag { bit } => flags >> bit & 1 == 1,
            Guard::LenGe { n } => input.len() >= *n,
        }
    }

    /// The provenance of the guard's operands.
    pub fn labels(&self) -> LabelSet {
        match self {
            Guard::Bytes { .. } | Guard::LenGe { .. } => LabelSet::INPUT,
            Guard::Flag { .. } => LabelSet::HARNESS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimCall {
    Direct(FuncId),
    Indirect {
        site: SiteId,
        byte: usize,
        table: BTreeMap<u8, FuncId>,
        default: Option<FuncId>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimBlock {
    pub guard: Option<Guard>,
    pub calls: Vec<SimCall>,
}

/// A validated sim spec.
#[derive(Debug, Clone)]
pub struct SimSpec {
    pub icfg: Icfg,
    pub entry: FuncId,
    pub max_input_len: usize,
    pub flag_bits: u32,
    pub blocks: Vec<Vec<SimBlock>>,
}

fn table_key(key: &str) -> Option<u8> {
    let mut chars = key.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii() => Some(c as u8),
        _ => u8::from_str_radix(key.strip_prefix("0x")?, 16).ok(),
    }
}

impl SimSpecDoc {
    /// The plain icfg the spec describes.
    pub fn icfg_doc(&self) -> IcfgDoc {
        IcfgDoc {
            functions: self
                .functions
                .iter()
                .map(|f| FunctionDoc {
                    name: f.name.clone(),
                    size: f.size,
                    entry: f.entry.clone(),
                    blocks: f
                        .blocks
                        .iter()
                        .map(|b| BlockDoc {
                            id: b.id.clone(),
                            size: b.size,
                            succs: b.succs.clone(),
                            loc: b.loc.clone(),
                            calls: b
                                .calls
                                .iter()
                                .map(|c| match c {
                                    SimCallDoc::Direct { target } => CallDoc::Direct {
                                        target: target.clone(),
                                    },
                                    SimCallDoc::Indirect { site, .. } => CallDoc::Indirect {
                                        site: site.clone(),
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

impl SimSpec {
    pub fn from_doc(doc: &SimSpecDoc) -> Result<SimSpec> {
        let icfg = Icfg::from_doc(&doc.icfg_doc())?;
        let max_input_len = doc.max_input_len.unwrap_or(DEFAULT_MAX_INPUT_LEN);
        let flag_bits = doc.flag_bits.unwrap_or(64);
        if flag_bits > 64 {
            return Err(Error::InvalidSimSpec(format!(
                "flag_bits {flag_bits} exceeds 64"
            )));
        }
        let entry = match &doc.entry {
            Some(name) => icfg
                .func_id(name)
                .ok_or_else(|| Error::InvalidSimSpec(format!("unknown entry function {name}")))?,
            None if doc.functions.is_empty() => {
                return Err(Error::InvalidSimSpec("no functions".into()))
            }
            None => FuncId(0),
        };
        let lookup = |name: &str| {
            icfg.func_id(name)
                .ok_or_else(|| Error::InvalidSimSpec(format!("unknown table target {name}")))
        };

        let mut blocks = Vec::with_capacity(doc.functions.len());
        for f in &doc.functions {
            let mut out = Vec::with_capacity(f.blocks.len());
            for b in &f.blocks {
                let at = format!("{}:{}", f.name, b.id);
                let guard = match &b.guard {
                    None => None,
                    Some(GuardDoc::Bytes { offset, value }) => {
                        let value = hex::decode(value).map_err(|e| {
                            Error::InvalidSimSpec(format!("guard at {at}: bad hex {value:?}: {e}"))
                        })?;
                        if value.is_empty() || offset + value.len() > max_input_len {
                            return Err(Error::InvalidSimSpec(format!(
                                "guard at {at} reads outside the declared input"
                            )));
                        }
                        Some(Guard::Bytes {
                            offset: *offset,
                            value,
                        })
                    }
                    Some(GuardDoc::Flag { bit }) => {
                        if *bit >= flag_bits {
                            return Err(Error::InvalidSimSpec(format!(
                                "guard at {at} tests undeclared flag bit {bit}"
                            )));
                        }
                        Some(Guard::Flag { bit: *bit })
                    }
                    Some(GuardDoc::LenGe { n }) => Some(Guard::LenGe { n: *n }),
                };
                let max_succs = if guard.is_some() { 2 } else { 1 };
                if b.succs.len() > max_succs || (guard.is_some() && b.succs.is_empty()) {
                    return Err(Error::InvalidSimSpec(format!(
                        "block {at} has {} successors; unguarded blocks take at most one, guarded blocks one or two",
                        b.succs.len()
                    )));
                }

                let mut calls = Vec::with_capacity(b.calls.len());
                for c in &b.calls {
                    calls.push(match c {
                        SimCallDoc::Direct { target } => SimCall::Direct(lookup(target)?),
                        SimCallDoc::Indirect {
                            site,
                            byte,
                            table,
                            default,
                        } => {
                            if *byte >= max_input_len {
                                return Err(Error::InvalidSimSpec(format!(
                                    "site {site} dispatches on undeclared input byte {byte}"
                                )));
                            }
                            let mut resolved = BTreeMap::new();
                            for (k, target) in table {
                                let key = table_key(k).ok_or_else(|| {
                                    Error::InvalidSimSpec(format!("site {site}: bad table key {k:?}"))
                                })?;
                                if resolved.insert(key, lookup(target)?).is_some() {
                                    return Err(Error::InvalidSimSpec(format!(
                                        "site {site}: byte {key:#04x} listed twice"
                                    )));
                                }
                            }
                            SimCall::Indirect {
                                site: icfg.site_id(site).expect("site validated by icfg"),
                                byte: *byte,
                                table: resolved,
                                default: default.as_deref().map(lookup).transpose()?,
                            }
                        }
                    });
                }
                out.push(SimBlock { guard, calls });
            }
            blocks.push(out);
        }
        Ok(SimSpec {
            icfg,
            entry,
            max_input_len,
            flag_bits,
            blocks,
        })
    }
}

pub fn load_sim_spec<R: Read>(source: R) -> Result<SimSpec> {
    let doc: SimSpecDoc =
        serde_json::from_reader(source).map_err(|e| Error::MalformedDocument(e.to_string()))?;
    SimSpec::from_doc(&doc)
}
