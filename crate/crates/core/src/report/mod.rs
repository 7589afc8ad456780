//! Report export document and text renderings.

mod render;

use serde::{Deserialize, Serialize};

use crate::compartments::{
    Compartment, CompartmentKind, CompartmentReport, Status, WeightBreakdown,
};
use crate::coverage::AnalysisConfig;
use crate::error::{Error, Result};
use crate::pipeline::ArtifactPaths;

pub use render::{render, Column, Format, RenderOptions};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ConfigDoc {
    max_exec_count: u64,
    top_k: usize,
    #[serde(default)]
    roots: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sources: Option<ArtifactPaths>,
}

/// One exported row. The first twelve fields follow the report table
/// columns; the rest make the row self-describing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryDoc {
    /// 1-based rank for locked rows, 0 for retired rows.
    pub rank: usize,
    pub function: String,
    pub weight: u64,
    pub block_weight: u64,
    pub calls_weight: u64,
    pub profile_cnt: u64,
    pub label: String,
    pub conditional: String,
    pub compartment: String,
    pub input: String,
    pub solution: String,
    pub status: Status,
    pub id: String,
    pub kind: String,
    pub entry_block: String,
    pub conditional_block: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ReportDoc {
    config: ConfigDoc,
    snapshot: String,
    entries: Vec<EntryDoc>,
}

pub fn entry_doc(rank: usize, c: &Compartment) -> EntryDoc {
    let (kind, conditional_block) = match &c.kind {
        CompartmentKind::Frontier { conditional_block } => ("frontier", conditional_block.clone()),
        CompartmentKind::IndirectTarget => ("indirect_target", String::new()),
    };
    EntryDoc {
        rank,
        function: c.function.clone(),
        weight: c.weight.total(),
        block_weight: c.weight.block_weight(),
        calls_weight: c.weight.calls_weight(),
        profile_cnt: c.conditional_count,
        label: c.labels.to_string(),
        conditional: c.conditional_loc.clone(),
        compartment: c.entry_loc.clone(),
        input: c.input.clone(),
        solution: c.solution.clone(),
        status: c.status,
        id: c.id(),
        kind: kind.into(),
        entry_block: c.entry_block.clone(),
        conditional_block,
    }
}

fn compartment_from_doc(e: &EntryDoc) -> Result<Compartment> {
    let kind = match e.kind.as_str() {
        "frontier" if !e.conditional_block.is_empty() => CompartmentKind::Frontier {
            conditional_block: e.conditional_block.clone(),
        },
        "indirect_target" if e.conditional_block.is_empty() => CompartmentKind::IndirectTarget,
        other => {
            return Err(Error::MalformedDocument(format!(
                "entry {}: bad kind {other:?} for conditional {:?}",
                e.id, e.conditional_block
            )))
        }
    };
    let c = Compartment {
        function: e.function.clone(),
        entry_block: e.entry_block.clone(),
        kind,
        weight: WeightBreakdown::from_parts(e.weight, e.block_weight, e.calls_weight)?,
        conditional_count: e.profile_cnt,
        conditional_loc: e.conditional.clone(),
        entry_loc: e.compartment.clone(),
        labels: e.label.parse()?,
        input: e.input.clone(),
        solution: e.solution.clone(),
        status: e.status,
    };
    if c.id() != e.id {
        return Err(Error::MalformedDocument(format!(
            "entry id {} does not match {}",
            e.id,
            c.id()
        )));
    }
    Ok(c)
}

impl CompartmentReport {
    /// Exported rows: locked entries in rank order, then retired entries.
    pub fn rows(&self) -> Vec<EntryDoc> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, c)| entry_doc(i + 1, c))
            .chain(self.retired.iter().map(|c| entry_doc(0, c)))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let doc = ReportDoc {
            config: ConfigDoc {
                max_exec_count: self.config.max_exec_count,
                top_k: self.config.top_k,
                roots: self.config.roots.clone(),
                sources: self.sources.clone(),
            },
            snapshot: self.snapshot.clone(),
            entries: self.rows(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ReportDoc =
            serde_json::from_str(text).map_err(|e| Error::MalformedDocument(e.to_string()))?;
        let mut entries = Vec::new();
        let mut retired = Vec::new();
        for e in &doc.entries {
            let c = compartment_from_doc(e)?;
            if c.status == Status::Locked {
                if !retired.is_empty() || e.rank != entries.len() + 1 {
                    return Err(Error::MalformedDocument(format!(
                        "entry {} has rank {}, expected {}",
                        e.id,
                        e.rank,
                        entries.len() + 1
                    )));
                }
                entries.push(c);
            } else {
                if e.rank != 0 {
                    return Err(Error::MalformedDocument(format!(
                        "retired entry {} must have rank 0",
                        e.id
                    )));
                }
                retired.push(c);
            }
        }
        let config = AnalysisConfig {
            max_exec_count: doc.config.max_exec_count,
            top_k: doc.config.top_k,
            roots: doc.config.roots,
        };
        config.validate()?;
        Ok(CompartmentReport {
            config,
            sources: doc.config.sources,
            snapshot: doc.snapshot,
            entries,
            retired,
        })
    }
}
