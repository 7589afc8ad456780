use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use compass_core::sim::{load_seeds, load_sim_spec, sim_fuzz, FuzzRunConfig};
use compass_core::{
    evaluate_candidate, load_coverage_manifest, load_profile, merge_profiles, render,
    run_pipeline, still_locked, topk_overlap, AnalysisConfig, ArtifactPaths, CompartmentReport,
    Error, ProfileSnapshot, StabilityResult, Status, Workspace,
};

use crate::{AnalyzeArgs, EvaluateArgs, OutputArgs, ServeArgs, SimulateArgs, StabilityArgs, Usage, WhatifArgs};

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn emit_report(report: &CompartmentReport, out: &OutputArgs) -> Result<()> {
    emit(&render(report, &out.options())?, out.output.as_deref())
}

fn read_report(path: &Path) -> Result<CompartmentReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    Ok(CompartmentReport::from_json(&text).map_err(|e| e.in_file(path))?)
}

fn read_profiles(paths: &[std::path::PathBuf]) -> Result<ProfileSnapshot> {
    let tag = paths[0]
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut merged = ProfileSnapshot::new(tag.clone());
    for p in paths {
        let file = File::open(p).map_err(|e| Error::from(e).in_file(p))?;
        let snap = load_profile(BufReader::new(file), &tag).map_err(|e| e.in_file(p))?;
        merged = merge_profiles(&merged, &snap).map_err(|e| e.in_file(p))?;
    }
    Ok(merged)
}

pub fn analyze(a: AnalyzeArgs) -> Result<()> {
    let paths = ArtifactPaths {
        icfg: a.icfg,
        profiles: a.profile,
        callgraph: a.callgraph,
        labels: a.labels,
        corpus: a.corpus,
    };
    let config = AnalysisConfig {
        max_exec_count: a.max_exec_count,
        top_k: a.top,
        roots: a.roots,
    };
    config.validate().map_err(|e| Usage(e.to_string()))?;
    let report = run_pipeline(&paths, config)?;
    tracing::info!(compartments = report.entries.len(), "analysis done");
    emit_report(&report, &a.out)
}

pub fn whatif(a: WhatifArgs) -> Result<()> {
    let report = read_report(&a.report)?;
    let sources = report.sources.clone().ok_or_else(|| {
        anyhow!(
            "{}: report does not record its artifact paths; export it with `compass analyze --format json`",
            a.report.display()
        )
    })?;
    let ws = Workspace::from_paths(&sources, report.config.clone())?;
    let ids: Vec<(&str, Status)> = a.unlock.iter().map(|id| (id.as_str(), Status::Resolved)).collect();
    let next = ws.retire(&report, &ids)?;
    emit_report(&next, &a.out)
}

pub fn stability(a: StabilityArgs) -> Result<()> {
    if a.later_profile.is_empty() && a.other_report.is_none() {
        return Err(Usage("stability needs --later-profile or --other-report".into()).into());
    }
    let report = read_report(&a.report)?;
    let mut result = StabilityResult::default();
    let mut lines = Vec::new();
    if !a.later_profile.is_empty() {
        let later = read_profiles(&a.later_profile)?;
        let n = still_locked(&report, &later);
        result.still_locked = Some(n);
        lines.push(format!("still locked: {n} of {}", report.entries.len()));
    }
    if let Some(path) = &a.other_report {
        let other = read_report(path)?;
        let k = a.k.unwrap_or(report.config.top_k);
        let o = topk_overlap(&report, &other, k);
        result.topk_overlap = Some(o);
        let note = if o.truncated { " (a report has fewer than k entries)" } else { "" };
        lines.push(format!("top-{k} overlap: {}{note}", o.shared));
    }
    if a.json {
        emit(&serde_json::to_string_pretty(&result)?, None)
    } else {
        emit(&lines.join("\n"), None)
    }
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let report = read_report(&a.report)?;
    let file = File::open(&a.candidate_coverage).map_err(|e| Error::from(e).in_file(&a.candidate_coverage))?;
    let candidates =
        load_coverage_manifest(BufReader::new(file)).map_err(|e| e.in_file(&a.candidate_coverage))?;
    let evals: Vec<_> = candidates.iter().map(|c| evaluate_candidate(&report, c)).collect();
    if a.json {
        return emit(&serde_json::to_string_pretty(&evals)?, None);
    }
    let mut rows = vec![[
        "Input".to_string(),
        "Compartment".into(),
        "Rank".into(),
        "Reaches".into(),
        "Unlocks".into(),
    ]];
    for e in &evals {
        for (i, c) in e.compartments.iter().enumerate() {
            if c.reaches_conditional || c.unlocks_entry {
                let yes = |b: bool| if b { "yes" } else { "no" }.to_string();
                rows.push([
                    e.input.clone(),
                    c.compartment.clone(),
                    (i + 1).to_string(),
                    yes(c.reaches_conditional),
                    yes(c.unlocks_entry),
                ]);
            }
        }
    }
    if rows.len() == 1 {
        return emit("no candidate reaches a compartment conditional or entry", None);
    }
    let widths: Vec<usize> = (0..5).map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0)).collect();
    let text: Vec<String> = rows
        .iter()
        .map(|r| {
            let cells: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            cells.join("  ").trim_end().to_string()
        })
        .collect();
    emit(&text.join("\n"), None)
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let file = File::open(&a.spec).map_err(|e| Error::from(e).in_file(&a.spec))?;
    let spec = load_sim_spec(BufReader::new(file)).map_err(|e| e.in_file(&a.spec))?;
    let seeds = load_seeds(&a.seeds).map_err(|e| e.in_file(&a.seeds))?;
    let mut cfg = FuzzRunConfig::new(seeds, a.iters, a.rng_seed);
    cfg.harness_flags = a.flags;
    cfg.step_budget = a.step_budget;
    let out = sim_fuzz(&spec, &cfg)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    out.write_to(&spec, &a.out)?;
    emit(
        &format!(
            "executions {}, queue {}, truncated {}, artifacts in {}",
            out.executions,
            out.queue.len(),
            out.truncated,
            a.out.display()
        ),
        None,
    )
}

pub fn serve(a: ServeArgs) -> Result<()> {
    compass_service::serve_blocking(&a.state, a.listen)
        .with_context(|| format!("serving {} on {}", a.state.display(), a.listen))
}
