use super::{block_weight, report_order, Compartment, CompartmentReport, Program};
use crate::coverage::{AnalysisConfig, BlockCounts};
use crate::error::{Error, Result};

/// Weighs every candidate, sorts by report order, and keeps the top `top_k`.
pub fn rank_compartments(
    candidates: Vec<Compartment>,
    program: Program<'_>,
    counts: &BlockCounts,
    cfg: &AnalysisConfig,
    snapshot: &str,
) -> Result<CompartmentReport> {
    cfg.validate()?;
    let mut entries = Vec::with_capacity(candidates.len());
    for mut c in candidates {
        let at = program
            .icfg
            .block_ref(&c.function, &c.entry_block)
            .ok_or_else(|| Error::UnknownCompartment(c.id()))?;
        c.weight = block_weight(program, at, counts, cfg.max_exec_count)?;
        entries.push(c);
    }
    entries.sort_by(report_order);
    entries.truncate(cfg.top_k);
    Ok(CompartmentReport {
        config: cfg.clone(),
        sources: None,
        snapshot: snapshot.to_string(),
        entries,
        retired: Vec::new(),
    })
}
